#ifndef POLYPROP_MODEL_HPP
#define POLYPROP_MODEL_HPP

#include <boost/rational.hpp>

#include <compare>
#include <string>
#include <vector>

namespace polyprop {

using Rational = boost::rational<long>;

inline double to_double(const Rational& q)
{
    return boost::rational_cast<double>(q);
}

enum class Regime { LowDim, HighDim };

/// A value in (1/2)Z, stored as twice its value so that set membership is exact.
struct HalfIndex {
    int twice = 0;

    static HalfIndex integer(int j) { return HalfIndex{2 * j}; }
    static HalfIndex half(int twice_value) { return HalfIndex{twice_value}; }

    bool is_integer() const { return twice % 2 == 0; }
    double value() const { return 0.5 * twice; }
    Rational rational() const { return Rational(twice, 2); }
    std::string str() const;

    auto operator<=>(const HalfIndex&) const = default;
};

HalfIndex operator+(HalfIndex a, HalfIndex b);

/// delta(j) = max{0, floor(j + 1/2)}.
int delta(HalfIndex j);

class ModelParams {
public:
    int m() const { return m_; }
    int n() const { return n_; }
    int m_n() const { return m_n_; }
    int k_c() const { return k_c_; }
    Regime regime() const { return regime_; }
    bool low_dim() const { return regime_ == Regime::LowDim; }

    /// m - n/2
    HalfIndex zero_index() const { return HalfIndex{2 * m_ - n_}; }
    /// 2m - n/2
    HalfIndex top_index() const { return HalfIndex{4 * m_ - n_}; }

private:
    friend ModelParams make_params(int m, int n);
    int m_ = 1, n_ = 1, m_n_ = 1, k_c_ = 1;
    Regime regime_ = Regime::LowDim;
};

ModelParams make_params(int m, int n);

struct IndexSet {
    int k = 0;
    std::vector<HalfIndex> members;

    HalfIndex max() const { return members.back(); }
    bool contains(HalfIndex j) const;
};

IndexSet index_set(const ModelParams& p, int k);

/// {j in J_k : j < m - n/2}
std::vector<HalfIndex> index_set_lower(const ModelParams& p, int k);
/// {j in J_k : m - n/2 < j < 2m - n/2}
std::vector<HalfIndex> index_set_middle(const ModelParams& p, int k);

Rational decay_exponent(const ModelParams& p, int k);

/// n(m-1)/(2m-1), the exponent of the spatial factor in the dispersive bound.
Rational spatial_exponent(const ModelParams& p);

double envelope(const ModelParams& p, int k, double t, double r);

Rational mu(const Rational& b, int m);
double mu(double b, int m);

}  // namespace polyprop

#endif
