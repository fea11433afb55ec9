#ifndef POLYPROP_RESOLVENT_HPP
#define POLYPROP_RESOLVENT_HPP

#include "polyprop/model.hpp"

#include <complex>
#include <vector>

namespace polyprop {

using cplx = std::complex<double>;

enum class Sign { Plus, Minus };

/// Which continuation of the resolvent a series or kernel refers to.
enum class Branch { Plus, Minus, Negative };

inline Branch branch_of(Sign s)
{
    return s == Sign::Plus ? Branch::Plus : Branch::Minus;
}

const char* sign_name(Sign s);

/// I+ = {0..m-1}, I- = {1..m}.
std::vector<int> rotation_indices(int m, Sign s);

double c_coefficient(int n, int j);
/// d_l = sum_j c_j / (l-j)!
double d_coefficient(int n, int l);

/// e^{i kappa r} (4 pi)^{-(n-1)/2} r^{2-n} sum_j c_j (i kappa r)^j, for complex kappa and r.
cplx helmholtz_kernel(int n, cplx kappa, cplx r);

/// Kernel of the second-order resolvent at lambda^2 on the given branch.
cplx second_order_kernel(int n, double lambda, Sign sign, double r);

/// Rotation sum over the roots lambda e^{i pi k/m}, k in I+-.
cplx higher_kernel(const ModelParams& p, Sign sign, double lambda, double r);
/// Same sum for complex lambda and radius (analytic continuation).
cplx higher_kernel(const ModelParams& p, Sign sign, cplx lambda, cplx r);

/// Kernel of ((-Delta)^m + lambda^{2m})^{-1}.
cplx negative_energy_kernel(const ModelParams& p, double lambda, double r);

/// Coefficient K_q with R(lambda)(r) = lambda^{n-2m} sum_q K_q (lambda r)^q.
cplx series_coefficient(const ModelParams& p, Branch b, int q);

/// Lowest power of r present in the series: 0 for n = 1, 2 - n otherwise.
int series_min_power(const ModelParams& p);

/// q is a power carried by the kernel series: even, or of the form 2m-n+2ml.
bool series_power_allowed(const ModelParams& p, int q);

struct ExpansionCoefficients {
    int theta = 0;
    std::vector<cplx> a_plus, a_minus;
    /// sign-independent a_j from the phase relation (taken from the Plus branch)
    std::vector<cplx> a;
    /// |a from Plus - a from Minus| per j
    std::vector<double> phase_residual;
    std::vector<double> b;
    /// max |imag b_l| over both branches
    double b_imag_residual = 0.0;
    /// largest extracted coefficient among powers that must vanish
    double spurious = 0.0;
    /// max deviation between extracted values and the series formula
    double formula_residual = 0.0;
};

/// Coefficients of the small-lambda expansion up to order theta, extracted from the
/// closed-form kernel by contour integration and cross-checked against the d_l formula.
ExpansionCoefficients expansion_coefficients(const ModelParams& p, int theta);

/// A_{alpha,beta} for multi-indices of length n.
double A_coefficient(const ModelParams& p, const std::vector<int>& alpha, const std::vector<int>& beta);

/// Integral over the unit sphere S^{n-1} of xi^gamma.
double sphere_moment(const std::vector<int>& gamma);

struct RemainderSample {
    double lambda = 0.0;
    double r = 0.0;
    /// d^l/dlambda^l of the remainder, l = 0..L
    std::vector<cplx> derivs;
};

struct RemainderProfile {
    int theta = 0;
    int order = 0;
    std::vector<RemainderSample> samples;
    /// per derivative order l: sup_r |d^l r_theta| / r^theta for each lambda
    std::vector<std::vector<double>> sup_values;
    std::vector<double> fitted_slopes;
    double fitted_slope = 0.0;
};

RemainderProfile remainder_profile(const ModelParams& p, Sign sign, int theta,
                                   const std::vector<double>& lambda_grid,
                                   const std::vector<double>& r_grid, int derivative_order);

struct LapProfile {
    std::vector<double> lambdas;
    std::vector<double> norms;
    double fitted_slope = 0.0;
};

/// Operator norm of <x>^{-s} R0(lambda^{2m}) <x>^{-s} on a line grid [-half_width, half_width].
LapProfile lap_norm_profile(const ModelParams& p, Sign sign, const std::vector<double>& lambda_grid,
                            double half_width, int points, double s);

}  // namespace polyprop

#endif
