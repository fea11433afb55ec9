#ifndef POLYPROP_PERTURBED_HPP
#define POLYPROP_PERTURBED_HPP

#include "polyprop/minverse.hpp"
#include "polyprop/model.hpp"
#include "polyprop/oscillatory.hpp"
#include "polyprop/spectral.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace polyprop {

struct StoneOptions {
    /// half width of the grid carrying v
    double support_width = 8.0;
    double h = 0.125;
    /// upper end of the lambda integral; the rest is a boundary term
    double lambda_max = 6.0;
    /// largest phase change per 20-node Gauss-Legendre panel
    double panel_phase = 12.0;
    /// energy of the low/high split; chi = cutoff_low(E, split_energy)
    double split_energy = std::pow(0.0625, 4);
    /// with kind >= 0, nodes with lambda <= scaled_below invert M through the scaled block
    /// operator of the projection family of that kind, which stays well conditioned near zero
    int kind = -1;
    double scaled_below = 0.0625;
};

/// Forms F(lambda)(x_a, x_b) = 2m lambda^{2m-1} Im <R_0^+ v M^+(lambda)^{-1} v R_0^+>(x_a, x_b) on
/// quadrature nodes in lambda, with the two Born terms and the remainder.
struct StoneTable {
    ModelParams params;
    StoneOptions opt;
    double t_max = 0.0;
    std::vector<double> points;
    std::vector<double> lambda, weight, chi;
    std::vector<Eigen::MatrixXd> full, born1, born2, remainder;
    /// forms at lambda_max for the boundary term
    Eigen::MatrixXd full_end, born1_end, born2_end, remainder_end;
    int grid_size = 0;
    int support_size = 0;
    /// largest || M x - b || / || b || over the nodes solved densely
    double solve_residual = 0.0;
    int scaled_nodes = 0;
    /// largest relative norm of a point-vector block set to zero by moment orthogonality
    double zeroed_max = 0.0;

    int index(double x) const;
};

/// Throws InvalidConfig when a point is not a grid node and ResolventSolveFailed when M^+ is
/// numerically singular at a node.
StoneTable stone_table(const ModelParams& p, const Potential& V, const std::vector<double>& points, double t_max,
                       const StoneOptions& opt = {});

struct HighKernelParts {
    cplx omega0, omega1, omega2, remainder;
    /// the high band computed from the full forms, independent of the Born split
    cplx full;
    cplx total() const { return omega0 + omega1 + omega2 + remainder; }
    cplx born() const { return omega0 + omega1 + omega2; }
};

/// Low energy part of the kernel of e^{-itH} P_ac(H) at (x, y).
cplx low_kernel(const StoneTable& T, double t, double x, double y);
/// High energy part split into the free term, the two Born terms and the remainder.
HighKernelParts high_kernel(const StoneTable& T, double t, double x, double y);
/// Whole kernel without the split.
cplx stone_kernel(const StoneTable& T, double t, double x, double y);

struct OracleOptions {
    double L = 1280.0;
    int N = 3840;
    /// energies below which localized modes are dropped
    double localized_energy = std::pow(0.0625, 4);
    /// fraction of mass in |x| < L/8 marking a mode as localized
    double localized_mass = 0.5;
};

/// Eigendecomposition of the pseudospectral (-Delta)^m + V on the periodic box [-L, L). The
/// box kernel is a sum over retained modes; the free box kernel is subtracted and the exact free
/// kernel added back, so that the free waves that wrap around the box cancel.
struct EigenOracle {
    ModelParams params;
    OracleOptions opt;
    std::vector<double> x;
    Eigen::VectorXd energies;
    Eigen::MatrixXd modes;
    std::vector<int> retained;
    int dropped_negative = 0;
    int dropped_localized = 0;

    int index(double x) const;
    /// sum over retained modes only
    cplx box_kernel(double t, double x, double y) const;
    /// the same sum for V = 0 on the same box
    cplx free_box_kernel(double t, double x, double y) const;
    cplx kernel(double t, double x, double y) const;
    /// sum of |e^{-itE}|^2 |psi(x)|^2 over retained modes
    double retained_weight(double t, double x) const;
};

EigenOracle eigendecomposition_oracle(const ModelParams& p, const Potential& V, const OracleOptions& opt = {});

struct DecayFitReport {
    double fitted_h = 0.0;
    Rational predicted_h;
    double residual = 0.0;
    double envelope_sup = 0.0;
    std::vector<double> t;
    std::vector<double> sup_abs;
};

/// Fit of log sup_{x,y} |K(t,x,y)| against log t. Throws FitIllConditioned with fewer than 8 times.
DecayFitReport decay_fit(const ModelParams& p, int k, const std::vector<double>& t,
                         const std::vector<std::vector<cplx>>& samples, const std::vector<double>& distances);

/// t_j = 2^{j/2}, j = 0 .. 2 log2(t_max)
std::vector<double> half_dyadic_times(double t_max);

}  // namespace polyprop

#endif
