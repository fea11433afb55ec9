#ifndef POLYPROP_GRID_HPP
#define POLYPROP_GRID_HPP

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <vector>

namespace polyprop {

enum class SpaceKind { Line1D, RadialS };

const char* space_name(SpaceKind k);

/// Quadrature grid. Operators are stored in the l2 representation, i.e. a kernel k(x,y)
/// becomes sqrt(w_i) k(x_i,x_j) sqrt(w_j), so that matrix adjoints are operator adjoints.
struct Grid {
    SpaceKind kind = SpaceKind::Line1D;
    std::vector<double> x;
    std::vector<double> w;
    double h = 0.0;
    double extent = 0.0;
    /// order of the endpoint correction applied at kernel kinks
    int kink_order = 14;

    int size() const { return static_cast<int>(x.size()); }
    Eigen::VectorXd sqrt_weights() const;
    /// grid samples of f, in the l2 representation
    Eigen::VectorXd sample(const std::function<double(double)>& f) const;
    /// inverse of sample(): values at nodes
    Eigen::VectorXcd values(const Eigen::VectorXcd& u) const;
};

/// Uniform nodes on [-half_width, half_width] with trapezoid weights.
Grid line_grid(double half_width, int points);
/// Midpoint nodes on (0, radius) with weights 4 pi r^2 h (radial functions in R^3).
Grid radial_grid(double radius, int points);

/// Endpoint corrections c_p, p < q, for a trapezoid rule on a half line; a kink at a node is
/// integrated to O(h^{q+1}) by multiplying the weight at distance p by (1 + c_p), with 2 c_0 on
/// the node itself.
const std::vector<double>& kink_corrections(int q);

/// Radial kernel description. On a line grid value(|x-y|) is used. On the radial grid the
/// angular average over S^2 is (P(r+r') - P(|r-r'|)) / (2 r r') with P'(s) = s k(s), so the
/// primitive P is required there.
struct RadialKernel {
    std::function<std::complex<double>(double)> value;
    std::function<std::complex<double>(double)> primitive;
    bool kink = true;
    /// Optional odd part of value (and of primitive) carrying the kink; when set the endpoint
    /// corrections act on it alone, so smooth even parts keep their exact low-rank structure.
    std::function<std::complex<double>(double)> kink_value;
    std::function<std::complex<double>(double)> kink_primitive;
};

Eigen::MatrixXcd kernel_matrix(const Grid& g, const RadialKernel& k);

/// Kernel |x-y|^j.
RadialKernel power_kernel(int j);

}  // namespace polyprop

#endif
