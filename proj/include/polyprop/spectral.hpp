#ifndef POLYPROP_SPECTRAL_HPP
#define POLYPROP_SPECTRAL_HPP

#include "polyprop/grid.hpp"
#include "polyprop/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace polyprop {

/// Real potential; for the radial backend V is a function of r = |x|.
struct Potential {
    std::string form;
    std::function<double(double)> V;
};

/// V = -eps exp(-x^2)
Potential gauss_well(double eps);
/// V = -(-Delta)^m phi / phi with phi = 1 + exp(-|x|^2); n = 1 any m, n = 3 only m = 1.
Potential resonant_bump(const ModelParams& p);
/// Piecewise linear interpolation of samples, zero outside their range.
Potential sampled_potential(std::vector<double> x, std::vector<double> V);

struct PotentialSamples {
    Eigen::VectorXd V, v, U;
    /// sup over the grid of |V| <x>^beta
    double decay_sup = 0.0;
    double beta = 0.0;
};

/// Decay exponent max{4m - n, n} + 4k + 4 of the standing assumption.
double assumed_decay(const ModelParams& p, int k);

PotentialSamples sample_potential(const Grid& g, const Potential& V, double beta);

/// Kernel |x-y|^j on the grid, l2 representation.
Eigen::MatrixXd build_operator_G(const Grid& g, const ModelParams& p, int j);

/// T_0 = U + b_0 v G_{2m-n} v
Eigen::MatrixXd build_T0(const Grid& g, const ModelParams& p, const PotentialSamples& s);

/// Checks that the backend handles (m, n).
void check_backend(const Grid& g, const ModelParams& p);

/// Orthonormal basis of span{x^a v : a <= j} (radial: a = 0 only).
Eigen::MatrixXd moment_basis(const Grid& g, const Eigen::VectorXd& v, int j);

struct SingularTable {
    std::string label;
    std::vector<double> values;
};

struct ProjectionOptions {
    /// kernels: singular values below rel_threshold * ||T_0||
    double rel_threshold = 1e-8;
    /// reject singular values within this factor of the threshold
    double ambiguity_factor = 10.0;
};

/// The untruncated chain S_j, j in J_{m_n+1}, as orthonormal bases (N x dim S_j).
struct ProjectionChain {
    std::vector<HalfIndex> indices;
    std::map<HalfIndex, Eigen::MatrixXd> basis;
    std::vector<SingularTable> singular;
    double t0_norm = 0.0;
    int dim(HalfIndex j) const;
};

ProjectionChain build_projection_chain(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                       const Eigen::MatrixXd& T0, const ProjectionOptions& opt = {});

struct MomentCertificate {
    HalfIndex j;
    int alpha = 0;
    double residual = 0.0;
};

struct ProjectionFamily {
    int k = 0;
    std::vector<HalfIndex> indices;
    std::map<HalfIndex, Eigen::MatrixXd> S_basis;
    std::map<HalfIndex, Eigen::MatrixXd> Q_basis;
    std::vector<MomentCertificate> certificates;
    int size = 0;

    Eigen::MatrixXd S(HalfIndex j) const;
    Eigen::MatrixXd Q(HalfIndex j) const;
    int rank(HalfIndex j) const { return static_cast<int>(Q_basis.at(j).cols()); }
    /// || sum_{j in J_k} Q_j - I ||_2
    double completeness_residual() const;
    double max_certificate() const;
};

ProjectionFamily build_projection_family(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                         const ProjectionChain& chain, int k);

struct ResonanceReport {
    int k = 0;
    std::map<HalfIndex, int> dims;
    std::vector<SingularTable> singular_values;
    int oracle_k = -1;
    bool oracle_agreement = false;
    /// || I - sum_{J_{k-1}} Q_j ||, 0 when k = 0
    double gap = 0.0;
};

ResonanceReport classify_resonance(const Grid& g, const ModelParams& p, const Potential& V,
                                   const ProjectionOptions& opt = {});

/// Kind from an untruncated chain.
int kind_from_chain(const ModelParams& p, const ProjectionChain& chain);

/// phi = -b_0 G_{2m-n} v psi + sum C_a x^a, with the polynomial fitted so that U psi = v phi.
/// Returns node values.
Eigen::VectorXd resonance_function(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                   const Eigen::MatrixXd& T0, const Eigen::VectorXd& psi);

struct ShootingResult {
    int growth_order = 0;
    int dimension = 0;
    std::vector<double> singular_values;
    /// coefficients of the solution basis in the polynomial data at +L (columns)
    Eigen::MatrixXd plus_coefficients;
};

/// Solutions of (-1)^m phi^{(2m)} + V phi = 0 on [-L, L] that continue as polynomials of degree
/// <= growth_order at both ends (n = 1).
ShootingResult shooting_oracle(const ModelParams& p, const Potential& V, int growth_order, double L = 20.0);

/// First solution of the growth class evaluated at xs.
std::vector<double> shooting_solution(const ModelParams& p, const Potential& V, int growth_order,
                                      const std::vector<double>& xs, double L = 20.0);

/// Kind from the minimal growth class: n = 1 by shooting from both ends, n = 3 (m = 1) by the
/// s-wave equation u'' = V u from the origin.
int shooting_kind(const ModelParams& p, const Potential& V, double L = 20.0);

/// Fitted slope of log|int f(y)|x-y|^p dy| against log<x> over x in [4, L/2] after removing the
/// moments of order <= j from f (Line1D).
double moment_decay_check(const Grid& g, const std::function<double(double)>& f, int j, int p);

}  // namespace polyprop

#endif
