#ifndef POLYPROP_MINVERSE_HPP
#define POLYPROP_MINVERSE_HPP

#include "polyprop/grid.hpp"
#include "polyprop/model.hpp"
#include "polyprop/resolvent.hpp"
#include "polyprop/spectral.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace polyprop {

/// Kernel of R_0^{+-}(lambda^{2m}) in the form used by kernel_matrix.
RadialKernel resolvent_kernel(const ModelParams& p, Sign sign, double lambda);

/// Tail lambda^{n-2m} sum_{q > 4m-n} K_q (lambda r)^q of the kernel series, summed directly.
/// Accurate while lambda r stays moderate.
RadialKernel resolvent_tail_kernel(const ModelParams& p, Sign sign, double lambda);

/// M(lambda) = U + v R_0(lambda^{2m}) v. Throws GridTooCoarse when lambda h > 1.
Eigen::MatrixXcd build_M(const Grid& g, const ModelParams& p, const PotentialSamples& s, Sign sign,
                         double lambda);

/// Orthonormal bases of the ranges of Q_j laid out side by side.
struct BlockLayout {
    std::vector<HalfIndex> labels;
    std::vector<int> offset, dim;
    /// N x N orthogonal matrix [Q_{j_1} | Q_{j_2} | ...]
    Eigen::MatrixXd W;

    int position(HalfIndex j) const;
    int size() const { return static_cast<int>(W.cols()); }
};

/// Throws FamilyIncomplete when sum Q_j differs from I by more than tol.
BlockLayout block_layout(const ProjectionFamily& family, double tol = 1e-8);

/// Square matrix in the coordinates of a layout.
struct BlockMatrix {
    std::vector<HalfIndex> labels;
    std::vector<int> offset, dim;
    Eigen::MatrixXcd data;

    Eigen::MatrixXcd block(HalfIndex i, HalfIndex j) const;
    double block_norm(HalfIndex i, HalfIndex j) const;
};

BlockMatrix make_block_matrix(const BlockLayout& layout, Eigen::MatrixXcd data);

/// B_lambda = W diag(lambda^{-j}) and its adjoint, as N x N matrices.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> build_B(const BlockLayout& layout, double lambda);

/// || M^{-1} - lambda^{2m-n} B (lambda^{2m-n} B* M B)^{-1} B* || / || M^{-1} || with dense M and
/// dense inverses on both sides.
double reconstruction_identity_residual(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                        const BlockLayout& layout, Sign sign, double lambda);

/// Everything lambda independent that the expansion needs, computed once.
struct InversionSetup {
    Grid grid;
    ModelParams params;
    PotentialSamples samples;
    ProjectionFamily family;
    BlockLayout layout;
    Eigen::MatrixXd T0;
    /// W^T T_0 W; blocks with i + j > 2m - n that certify below the tolerance are set to zero
    Eigen::MatrixXd T0_blocks;
    /// q -> W^T v G_q v W for the powers q <= 4m - n of the kernel series other than 2m - n,
    /// with the blocks that vanish by moment orthogonality set to zero once certified
    std::map<int, Eigen::MatrixXd> G_blocks;
    std::map<Sign, std::vector<cplx>> series;
    /// largest relative norm among the blocks that were set to zero
    double zeroed_max = 0.0;
    /// blocks expected to vanish but above the tolerance
    std::vector<std::string> violations;
};

/// Family of kind k for V on g with the chain thresholds of opt.
InversionSetup prepare_inversion(const Grid& g, const ModelParams& p, const Potential& V, int k,
                                 const ProjectionOptions& opt = {}, double zero_tol = 1e-8);

/// lambda^{2m-n} B* M B in layout coordinates. For lambda * diameter <= 8 the kernel series
/// terms are assembled blockwise so that blocks vanishing by moment orthogonality stay exactly
/// zero; beyond that the dense M is projected.
Eigen::MatrixXcd scaled_block_operator(const InversionSetup& setup, Sign sign, double lambda);

struct LeadingBlocks {
    BlockMatrix D_sign;
    BlockMatrix D;
    /// diagonal entries of U_0 and U_1 in layout coordinates
    Eigen::VectorXcd U0, U1;
    /// || U0 D_sign U0 U1 - D ||
    double gauge_residual = 0.0;
    /// || (D_sign)^{-1} - U1 U0 D^{-1} U0 ||
    double inverse_gauge_residual = 0.0;
};

LeadingBlocks leading_blocks(const InversionSetup& setup, Sign sign);

struct GramReport {
    std::vector<int> lower, middle;
    Eigen::MatrixXd E0, E1;
    std::optional<double> min_eig_E0, max_eig_E1;
};

/// E_0 over J'_k and E_1 over J''_k (n = 1); throws EmptyIndexRange when both are empty.
GramReport gram_matrices(const ModelParams& p, int k);

struct FeshbachResult {
    Eigen::MatrixXcd inverse;
    double pivot_min_singular = 0.0;
    double complement_min_singular = 0.0;
};

/// Inverse of [a11 a12; a21 a22] with a11 of size split, by the Schur complement
/// d = a22 - a21 a11^{-1} a12. Throws PivotSingular or ComplementSingular when the relative
/// smallest singular value of a11 or d is below tol.
FeshbachResult feshbach_invert(const Eigen::MatrixXcd& A, int split, double tol = 1e-13);

/// Spectral radius by Gelfand's formula, ||T^{2^s}||^{2^-s} in the Frobenius norm (any
/// norm gives the same limit).
double spectral_radius(const Eigen::MatrixXcd& T, int squarings = 8);

struct NeumannResult {
    Eigen::MatrixXcd inverse;
    double spectral_radius = 0.0;
    int terms = 0;
    bool converged = false;
};

/// (D + R)^{-1} = D^{-1} sum_l (-R D^{-1})^l; throws NeumannDiverges when the spectral radius of
/// R D^{-1} is at least 1.
NeumannResult neumann_inverse(const Eigen::MatrixXcd& Dinv, const Eigen::MatrixXcd& R, double term_tol = 1e-12,
                              int max_terms = 200);

struct ExpansionSample {
    double lambda = 0.0;
    Sign sign = Sign::Plus;
    double remainder_norm = 0.0;
    double spectral_radius = 0.0;
    bool neumann_used = false;
    bool neumann_converged = false;
    int neumann_terms = 0;
    /// || Neumann inverse - dense inverse || / || dense inverse ||
    double neumann_vs_dense = 0.0;
    /// || M X - I || with X = lambda^{2m-n} B (B* M B)^{-1} B*
    double reconstruction_residual = 0.0;
    /// || M^{-1} - X || / || M^{-1} ||, both dense
    double identity_residual = 0.0;
    /// (i, j) -> || block of (lambda^{2m-n} B* M B)^{-1} ||
    std::map<std::pair<HalfIndex, HalfIndex>, double> block_norm;
    /// (i, j) -> || Gamma_{i,j}(lambda) ||
    std::map<std::pair<HalfIndex, HalfIndex>, double> gamma_norm;
};

struct ExpansionReport {
    int k = 0;
    std::map<Sign, BlockMatrix> M_blocks;
    std::vector<ExpansionSample> samples;
    std::map<Sign, double> remainder_slope;
    /// fitted slopes of || Gamma_{i,j} || over the samples with remainder spectral radius below 1/2
    std::map<Sign, std::map<std::pair<HalfIndex, HalfIndex>, double>> gamma_slope;
    /// diagonal entries carrying the improved class
    std::vector<HalfIndex> special;
    /// largest dyadic lambda with remainder spectral radius below 1/2, if any was sampled
    std::optional<double> lambda0;
    /// || M_{zero,zero} - (Q T_0 Q)^{-1} || per sign
    std::map<Sign, double> zero_block_error;
    /// max || M_{i,j} ||, i != j, with i or j in {m - n/2, 2m - n/2}
    std::map<Sign, double> off_block_max;
};

/// Samples the expansion over lambda_grid for both signs. The inverse of the scaled block operator
/// comes from the Neumann series where it converges and from a dense solve elsewhere.
ExpansionReport expansion(const InversionSetup& setup, const std::vector<double>& lambda_grid);

struct OrthogonalityEntry {
    HalfIndex i, j;
    /// power 2l of G, or -1 for T_0
    int power = 0;
    double norm = 0.0;
    bool pass = false;
};

struct OrthogonalityReport {
    std::vector<OrthogonalityEntry> entries;
    /// min over samples of b_1 <v G_{4m-n} v psi, psi> / ||psi||^2 for psi with vanishing moments
    /// of order <= 2m - 1
    double b1_min = 0.0;
    int b1_samples = 0;
    bool all_pass() const;
};

/// Norms relative to || v G_{2l} v || and || T_0 ||.
OrthogonalityReport orthogonality_checks(const ProjectionFamily& family, const Grid& g, const ModelParams& p,
                                         const PotentialSamples& s, const Eigen::MatrixXd& T0, int max_power = -1,
                                         int b1_samples = 20, unsigned seed = 7);

}  // namespace polyprop

#endif
