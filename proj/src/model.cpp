#include "polyprop/model.hpp"

#include "polyprop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace polyprop {

std::string HalfIndex::str() const
{
    if (is_integer()) return std::to_string(twice / 2);
    return std::to_string(twice) + "/2";
}

HalfIndex operator+(HalfIndex a, HalfIndex b)
{
    return HalfIndex{a.twice + b.twice};
}

int delta(HalfIndex j)
{
    // floor((twice + 1) / 2) with floor division for negative numerators
    int num = j.twice + 1;
    int fl = num >= 0 ? num / 2 : -((-num + 1) / 2);
    return std::max(0, fl);
}

ModelParams make_params(int m, int n)
{
    if (m < 1) throw Error(ErrorCode::NonPositiveOrder, "m = " + std::to_string(m));
    if (n % 2 == 0) throw Error(ErrorCode::EvenDimension, "n = " + std::to_string(n));
    if (n < 1 || n >= 4 * m)
        throw Error(ErrorCode::DimensionOutOfRange,
                    "need 1 <= n < 4m, got m = " + std::to_string(m) + ", n = " + std::to_string(n));
    ModelParams p;
    p.m_ = m;
    p.n_ = n;
    p.regime_ = n < 2 * m ? Regime::LowDim : Regime::HighDim;
    p.m_n_ = p.low_dim() ? m : 2 * m - (n - 1) / 2;
    p.k_c_ = std::max(m - (n - 1) / 2, 0);
    return p;
}

bool IndexSet::contains(HalfIndex j) const
{
    return std::find(members.begin(), members.end(), j) != members.end();
}

IndexSet index_set(const ModelParams& p, int k)
{
    const int m = p.m(), n = p.n();
    if (k < 0 || k > p.m_n() + 1)
        throw Error(ErrorCode::KindOutOfRange, "k = " + std::to_string(k));
    IndexSet s;
    s.k = k;
    auto& out = s.members;
    if (p.low_dim()) {
        for (int j = 0; j <= m - (n + 1) / 2; ++j) out.push_back(HalfIndex::integer(j));
        out.push_back(p.zero_index());
        const int first = m - (n - 1) / 2;
        const int count = (k <= m) ? k : m;
        for (int j = first; j < first + count; ++j) out.push_back(HalfIndex::integer(j));
        if (k == m + 1) out.push_back(p.top_index());
    } else {
        out.push_back(p.zero_index());
        const int last = (k <= p.m_n()) ? k - 1 : 2 * m - (n + 1) / 2;
        for (int j = 0; j <= last; ++j) out.push_back(HalfIndex::integer(j));
        if (k == p.m_n() + 1) out.push_back(p.top_index());
    }
    return s;
}

std::vector<HalfIndex> index_set_lower(const ModelParams& p, int k)
{
    std::vector<HalfIndex> out;
    for (auto j : index_set(p, k).members)
        if (j < p.zero_index()) out.push_back(j);
    return out;
}

std::vector<HalfIndex> index_set_middle(const ModelParams& p, int k)
{
    std::vector<HalfIndex> out;
    for (auto j : index_set(p, k).members)
        if (p.zero_index() < j && j < p.top_index()) out.push_back(j);
    return out;
}

Rational decay_exponent(const ModelParams& p, int k)
{
    if (k < 0 || k > p.m_n() + 1)
        throw Error(ErrorCode::KindOutOfRange, "k = " + std::to_string(k));
    const long m2 = 2L * p.m();
    if (k <= p.k_c()) return Rational(p.n(), m2);
    if (k <= p.m_n()) return Rational(2L * p.m_n() + 1 - 2L * k, m2);
    return Rational(1, m2);
}

Rational spatial_exponent(const ModelParams& p)
{
    return Rational(static_cast<long>(p.n()) * (p.m() - 1), 2L * p.m() - 1);
}

double envelope(const ModelParams& p, int k, double t, double r)
{
    if (t == 0.0) throw Error(ErrorCode::ZeroTime, "envelope at t = 0");
    const double h = to_double(decay_exponent(p, k));
    const double at = std::abs(t);
    const double two_m = 2.0 * p.m();
    const double short_time = 1.0 + std::pow(at, -p.n() / two_m);
    const double spatial = std::pow(1.0 + std::pow(at, -1.0 / two_m) * r, -to_double(spatial_exponent(p)));
    return std::pow(1.0 + at, -h) * short_time * spatial;
}

Rational mu(const Rational& b, int m)
{
    return (Rational(m - 1) - b) / Rational(2L * m - 1);
}

double mu(double b, int m)
{
    return (m - 1 - b) / (2.0 * m - 1);
}

}  // namespace polyprop
