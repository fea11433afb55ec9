#include "polyprop/minverse.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/fit.hpp"
#include "polyprop/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <limits>
#include <random>

namespace polyprop {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;
// highest series power kept in the tail kernel
constexpr int kTailPowers = 80;
// largest lambda times diameter for which the series split is used
constexpr double kSplitLimit = 8.0;

// e^{i pi x / 2} style phases for half-integer exponents on the principal branch
cplx phase(double angle)
{
    return std::polar(1.0, angle);
}

// (-i)^{i+j} (-1)^j
cplx gauge_factor(HalfIndex i, HalfIndex j)
{
    return phase(-kPi * (i.value() + j.value()) / 2.0) * phase(kPi * j.value());
}

double frob(const MatrixXcd& A)
{
    return A.size() == 0 ? 0.0 : A.norm();
}

std::vector<cplx> series_table(const ModelParams& p, Sign sign)
{
    std::vector<cplx> K(kTailPowers + 3, 0.0);
    for (int q = series_min_power(p); q <= kTailPowers; ++q)
        if (series_power_allowed(p, q)) K[q + 2] = series_coefficient(p, branch_of(sign), q);
    return K;
}

// q with 2q = i.twice + j.twice, if integral
std::optional<int> sum_power(HalfIndex i, HalfIndex j)
{
    const int t = i.twice + j.twice;
    if (t % 2 != 0) return std::nullopt;
    return t / 2;
}

// power carried by the D table at block (i, j); nullopt when the block is zero
enum class LeadingTerm { None, T0, Even, B1 };

LeadingTerm leading_term(const ModelParams& p, HalfIndex i, HalfIndex j)
{
    const int m = p.m(), n = p.n();
    const auto q = sum_power(i, j);
    if (!q) return LeadingTerm::None;
    if (*q == 2 * m - n) return LeadingTerm::T0;
    if (i == p.top_index() && j == p.top_index()) return LeadingTerm::B1;
    if (*q % 2 != 0 || *q < 0) return LeadingTerm::None;
    const HalfIndex z = p.zero_index(), t = p.top_index();
    if (i == z || j == z || i == t || j == t) return LeadingTerm::None;
    return LeadingTerm::Even;
}

MatrixXcd dense_inverse(const MatrixXcd& A)
{
    return A.partialPivLu().inverse();
}

}  // namespace

double spectral_radius(const MatrixXcd& T, int squarings)
{
    // Gelfand: ||T^{2^s}||^{2^-s}, renormalized at every step to stay in range
    MatrixXcd P = T;
    double log_scale = 0.0;
    for (int s = 0; s < squarings; ++s) {
        const double nrm = P.norm();
        if (nrm == 0.0) return 0.0;
        P /= nrm;
        log_scale = 2.0 * (log_scale + std::log(nrm));
        P = (P * P).eval();
    }
    const double nrm = P.norm();
    if (nrm == 0.0) return 0.0;
    return std::exp((log_scale + std::log(nrm)) / std::ldexp(1.0, squarings));
}

namespace {

}  // namespace

RadialKernel resolvent_kernel(const ModelParams& p, Sign sign, double lambda)
{
    RadialKernel k;
    k.value = [p, sign, lambda](double r) { return higher_kernel(p, sign, lambda, r); };
    if (p.n() == 1) {
        k.kink_value = [p, sign, lambda](double r) {
            return 0.5 * (higher_kernel(p, sign, cplx(lambda), cplx(r)) - higher_kernel(p, sign, cplx(lambda), cplx(-r)));
        };
    }
    if (p.n() == 3 && p.m() == 1) {
        // s e^{+-i lambda s} / (4 pi s) integrates to e^{+-i lambda s} / (+-4 pi i lambda)
        const double sg = sign == Sign::Plus ? 1.0 : -1.0;
        k.primitive = [lambda, sg](double s) {
            return std::polar(1.0, sg * lambda * s) / (cplx(0.0, sg * 4.0 * kPi * lambda));
        };
        k.kink_primitive = [lambda](double s) { return cplx(std::sin(lambda * s) / (4.0 * kPi * lambda)); };
    }
    k.kink = true;
    return k;
}

RadialKernel resolvent_tail_kernel(const ModelParams& p, Sign sign, double lambda)
{
    const int first = 4 * p.m() - p.n() + 1;
    auto K = series_table(p, sign);
    const double pre = std::pow(lambda, p.n() - 2 * p.m());
    // sum over q >= first with q of the given parity (0 even, 1 odd, -1 all); extra is the shift
    // of the power and the divisor used for primitives
    auto sum = [K, first, pre, lambda](double r, int parity, bool primitive) {
        const double z = lambda * r;
        cplx acc = 0.0;
        double zq = std::pow(z, first);
        for (int q = first; q <= kTailPowers; ++q, zq *= z) {
            if (parity >= 0 && std::abs(q % 2) != parity) continue;
            acc += K[q + 2] * (primitive ? zq / double(q + 2) : zq);
        }
        return primitive ? pre * acc * r * r : pre * acc;
    };
    RadialKernel k;
    k.value = [sum](double r) { return sum(r, -1, false); };
    k.primitive = [sum](double s) { return sum(s, -1, true); };
    // r^2 times an odd power stays odd, so the primitive's kink part uses the same parity
    k.kink_value = [sum](double r) { return sum(r, 1, false); };
    k.kink_primitive = [sum](double s) { return sum(s, 1, true); };
    k.kink = true;
    return k;
}

MatrixXcd build_M(const Grid& g, const ModelParams& p, const PotentialSamples& s, Sign sign, double lambda)
{
    check_backend(g, p);
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be positive");
    if (lambda * g.h > 1.0)
        throw Error(ErrorCode::GridTooCoarse, "lambda h = " + std::to_string(lambda * g.h) + " exceeds 1");
    MatrixXcd M = s.v.asDiagonal() * kernel_matrix(g, resolvent_kernel(p, sign, lambda)) * s.v.asDiagonal();
    M.diagonal() += s.U.cast<cplx>();
    return M;
}

int BlockLayout::position(HalfIndex j) const
{
    auto it = std::find(labels.begin(), labels.end(), j);
    if (it == labels.end()) throw Error(ErrorCode::UnsupportedIndex, "index " + j.str() + " not in layout");
    return static_cast<int>(it - labels.begin());
}

BlockLayout block_layout(const ProjectionFamily& family, double tol)
{
    const double res = family.completeness_residual();
    if (res > tol)
        throw Error(ErrorCode::FamilyIncomplete,
                    "sum of Q_j differs from I by " + std::to_string(res) + " at k = " + std::to_string(family.k));
    BlockLayout L;
    L.W.resize(family.size, family.size);
    int col = 0;
    for (auto j : family.indices) {
        const MatrixXd& B = family.Q_basis.at(j);
        L.labels.push_back(j);
        L.offset.push_back(col);
        L.dim.push_back(static_cast<int>(B.cols()));
        L.W.middleCols(col, B.cols()) = B;
        col += static_cast<int>(B.cols());
    }
    return L;
}

BlockMatrix make_block_matrix(const BlockLayout& layout, MatrixXcd data)
{
    return BlockMatrix{layout.labels, layout.offset, layout.dim, std::move(data)};
}

MatrixXcd BlockMatrix::block(HalfIndex i, HalfIndex j) const
{
    auto pos = [&](HalfIndex a) {
        auto it = std::find(labels.begin(), labels.end(), a);
        if (it == labels.end()) throw Error(ErrorCode::UnsupportedIndex, "index " + a.str() + " not in block matrix");
        return static_cast<int>(it - labels.begin());
    };
    const int a = pos(i), b = pos(j);
    return data.block(offset[a], offset[b], dim[a], dim[b]);
}

double BlockMatrix::block_norm(HalfIndex i, HalfIndex j) const
{
    return frob(block(i, j));
}

std::pair<MatrixXd, MatrixXd> build_B(const BlockLayout& layout, double lambda)
{
    MatrixXd B = layout.W;
    for (size_t a = 0; a < layout.labels.size(); ++a)
        B.middleCols(layout.offset[a], layout.dim[a]) *= std::pow(lambda, -layout.labels[a].value());
    MatrixXd Bs = B.transpose();
    return {B, Bs};
}

double reconstruction_identity_residual(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                        const BlockLayout& layout, Sign sign, double lambda)
{
    const MatrixXcd M = build_M(g, p, s, sign, lambda);
    const auto [B, Bs] = build_B(layout, lambda);
    const double f = std::pow(lambda, 2 * p.m() - p.n());
    const MatrixXcd Bc = B.cast<cplx>(), Bsc = Bs.cast<cplx>();
    const MatrixXcd A = f * (Bsc * M * Bc);
    const MatrixXcd X = f * (Bc * dense_inverse(A) * Bsc);
    const MatrixXcd Mi = dense_inverse(M);
    return frob(Mi - X) / frob(Mi);
}

InversionSetup prepare_inversion(const Grid& g, const ModelParams& p, const Potential& V, int k,
                                 const ProjectionOptions& opt, double zero_tol)
{
    check_backend(g, p);
    const int m = p.m(), n = p.n();
    InversionSetup S{g, p, sample_potential(g, V, assumed_decay(p, k)), {}, {}, {}, {}, {}, {}, 0.0, {}};
    S.T0 = build_T0(g, p, S.samples);
    auto chain = build_projection_chain(g, p, S.samples, S.T0, opt);
    S.family = build_projection_family(g, p, S.samples, chain, k);
    S.layout = block_layout(S.family);
    const auto& L = S.layout;
    const int nb = static_cast<int>(L.labels.size());
    const MatrixXd vW = S.samples.v.asDiagonal() * L.W;

    auto zero_blocks = [&](MatrixXd& A, double scale, const std::string& what, auto&& vanishes) {
        for (int a = 0; a < nb; ++a)
            for (int b = 0; b < nb; ++b) {
                if (!vanishes(L.labels[a], L.labels[b]) || L.dim[a] == 0 || L.dim[b] == 0) continue;
                auto blk = A.block(L.offset[a], L.offset[b], L.dim[a], L.dim[b]);
                const double rel = blk.norm() / scale;
                if (rel < zero_tol) {
                    S.zeroed_max = std::max(S.zeroed_max, rel);
                    blk.setZero();
                } else {
                    S.violations.push_back(what + " block (" + L.labels[a].str() + "," + L.labels[b].str() +
                                           ") relative norm " + std::to_string(rel));
                }
            }
    };

    S.T0_blocks = L.W.transpose() * S.T0 * L.W;
    zero_blocks(S.T0_blocks, S.T0.norm(), "T0",
                [&](HalfIndex i, HalfIndex j) { return i.twice + j.twice > 2 * (2 * m - n); });

    for (int q = series_min_power(p); q <= 4 * m - n; ++q) {
        if (!series_power_allowed(p, q) || q == 2 * m - n) continue;
        const MatrixXd G = build_operator_G(g, p, q);
        MatrixXd P = vW.transpose() * G * vW;
        const double scale = (S.samples.v.asDiagonal() * G * S.samples.v.asDiagonal()).norm();
        if (q % 2 == 0)
            zero_blocks(P, scale, "vG_" + std::to_string(q) + "v",
                        [&](HalfIndex i, HalfIndex j) { return delta(i) + delta(j) - 1 >= q; });
        S.G_blocks[q] = std::move(P);
    }
    S.series[Sign::Plus] = series_table(p, Sign::Plus);
    S.series[Sign::Minus] = series_table(p, Sign::Minus);
    return S;
}

MatrixXcd scaled_block_operator(const InversionSetup& S, Sign sign, double lambda)
{
    const ModelParams& p = S.params;
    const int m = p.m(), n = p.n();
    const auto& L = S.layout;
    const int N = L.size();
    VectorXd e(N);
    for (size_t a = 0; a < L.labels.size(); ++a) e.segment(L.offset[a], L.dim[a]).setConstant(L.labels[a].value());
    const double ll = std::log(lambda);
    // entrywise lambda^{c - e_a - e_b}; exact zeros stay zero
    auto scaled = [&](const auto& A, double c) {
        MatrixXcd out(N, N);
        for (int b = 0; b < N; ++b)
            for (int a = 0; a < N; ++a) out(a, b) = cplx(A(a, b)) * std::exp((c - e(a) - e(b)) * ll);
        return out;
    };

    if (lambda * 2.0 * S.grid.extent > kSplitLimit) {
        const MatrixXcd M = build_M(S.grid, p, S.samples, sign, lambda);
        const MatrixXcd WMW = L.W.transpose() * M * L.W;
        return scaled(WMW, 2 * m - n);
    }
    if (lambda * S.grid.h > 1.0) throw Error(ErrorCode::GridTooCoarse, "lambda h exceeds 1");
    const auto& K = S.series.at(sign);
    MatrixXcd A = scaled(S.T0_blocks, 2 * m - n);
    for (const auto& [q, P] : S.G_blocks) A += K[q + 2] * scaled(P, q);
    const MatrixXd vW = S.samples.v.asDiagonal() * L.W;
    const MatrixXcd tail = kernel_matrix(S.grid, resolvent_tail_kernel(p, sign, lambda));
    const MatrixXcd Tw = vW.transpose() * tail * vW;
    A += scaled(Tw, 2 * m - n);
    return A;
}

LeadingBlocks leading_blocks(const InversionSetup& S, Sign sign)
{
    const ModelParams& p = S.params;
    const int m = p.m(), n = p.n();
    const auto& L = S.layout;
    const int N = L.size(), nb = static_cast<int>(L.labels.size());
    const auto coef = expansion_coefficients(p, 4 * m - n + 1);
    const auto& K = S.series.at(sign);
    MatrixXcd Ds = MatrixXcd::Zero(N, N), D = MatrixXcd::Zero(N, N);
    VectorXcd U0(N), U1(N);
    const double sg = sign == Sign::Plus ? 1.0 : -1.0;
    for (int a = 0; a < nb; ++a) {
        const double j = L.labels[a].value();
        const cplx u0 = phase(sg * kPi * (j + 0.5 * n - m) / (2.0 * m)) * phase(-kPi * j / 2.0);
        U0.segment(L.offset[a], L.dim[a]).setConstant(u0);
        U1.segment(L.offset[a], L.dim[a]).setConstant(phase(kPi * j));
    }
    for (int a = 0; a < nb; ++a)
        for (int b = 0; b < nb; ++b) {
            const HalfIndex i = L.labels[a], j = L.labels[b];
            const int ra = L.offset[a], cb = L.offset[b], da = L.dim[a], db = L.dim[b];
            if (da == 0 || db == 0) continue;
            const cplx gf = gauge_factor(i, j);
            switch (leading_term(p, i, j)) {
            case LeadingTerm::None:
                break;
            case LeadingTerm::T0: {
                const MatrixXcd blk = S.T0_blocks.block(ra, cb, da, db).cast<cplx>();
                Ds.block(ra, cb, da, db) = blk;
                D.block(ra, cb, da, db) = gf * blk;
                break;
            }
            case LeadingTerm::Even: {
                const int q = *sum_power(i, j);
                const MatrixXcd blk = S.G_blocks.at(q).block(ra, cb, da, db).cast<cplx>();
                Ds.block(ra, cb, da, db) = K[q + 2] * blk;
                D.block(ra, cb, da, db) = gf * coef.a.at(q / 2) * blk;
                break;
            }
            case LeadingTerm::B1: {
                const int q = 4 * m - n;
                const MatrixXcd blk = S.G_blocks.at(q).block(ra, cb, da, db).cast<cplx>();
                Ds.block(ra, cb, da, db) = K[q + 2] * blk;
                // e^{+-i pi} from the gauge phase of the top index
                D.block(ra, cb, da, db) = -gf * coef.b.at(1) * blk;
                break;
            }
            }
        }
    LeadingBlocks out;
    out.U0 = U0;
    out.U1 = U1;
    const MatrixXcd G = U0.asDiagonal() * Ds * U0.asDiagonal() * U1.asDiagonal();
    out.gauge_residual = frob(G - D);
    const MatrixXcd Dsi = dense_inverse(Ds), Di = dense_inverse(D);
    const MatrixXcd back = U1.asDiagonal() * (U0.asDiagonal() * Di * U0.asDiagonal());
    out.inverse_gauge_residual = frob(Dsi - back) / std::max(frob(Dsi), 1e-300);
    out.D_sign = make_block_matrix(L, std::move(Ds));
    out.D = make_block_matrix(L, std::move(D));
    return out;
}

GramReport gram_matrices(const ModelParams& p, int k)
{
    GramReport rep;
    for (auto j : index_set_lower(p, k))
        if (j.is_integer()) rep.lower.push_back(j.twice / 2);
    for (auto j : index_set_middle(p, k))
        if (j.is_integer()) rep.middle.push_back(j.twice / 2);
    if (rep.lower.empty() && rep.middle.empty())
        throw Error(ErrorCode::EmptyIndexRange, "J'_k and J''_k are empty for k = " + std::to_string(k));
    const int n = p.n();
    // multi-indices of length n with |alpha| in the given levels
    auto multi = [n](const std::vector<int>& levels) {
        std::vector<std::vector<int>> out;
        for (int lv : levels) {
            std::vector<int> a(n, 0);
            std::function<void(int, int)> rec = [&](int pos, int left) {
                if (pos == n - 1) {
                    a[pos] = left;
                    out.push_back(a);
                    return;
                }
                for (int v = left; v >= 0; --v) {
                    a[pos] = v;
                    rec(pos + 1, left - v);
                }
            };
            rec(0, lv);
        }
        return out;
    };
    auto gram = [&](const std::vector<int>& levels) {
        auto idx = multi(levels);
        const int d = static_cast<int>(idx.size());
        MatrixXd E(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                int s = 0;
                for (int t = 0; t < n; ++t) s += idx[a][t] + idx[b][t];
                const double A = A_coefficient(p, idx[a], idx[b]);
                // (-i)^s is real for even s; odd s pairs have A = 0
                E(a, b) = (s % 2 == 0) ? ((s / 2) % 2 == 0 ? A : -A) : 0.0;
            }
        return E;
    };
    if (!rep.lower.empty()) {
        rep.E0 = gram(rep.lower);
        rep.min_eig_E0 = Eigen::SelfAdjointEigenSolver<MatrixXd>(rep.E0).eigenvalues().minCoeff();
    }
    if (!rep.middle.empty()) {
        rep.E1 = gram(rep.middle);
        rep.max_eig_E1 = Eigen::SelfAdjointEigenSolver<MatrixXd>(rep.E1).eigenvalues().maxCoeff();
    }
    return rep;
}

FeshbachResult feshbach_invert(const MatrixXcd& A, int split, double tol)
{
    const int N = static_cast<int>(A.rows());
    if (A.cols() != N || split <= 0 || split >= N)
        throw Error(ErrorCode::InvalidConfig, "Feshbach split must lie strictly inside a square matrix");
    const int r = N - split;
    const MatrixXcd a11 = A.topLeftCorner(split, split), a12 = A.topRightCorner(split, r);
    const MatrixXcd a21 = A.bottomLeftCorner(r, split), a22 = A.bottomRightCorner(r, r);
    auto rel_min = [](const MatrixXcd& X) {
        Eigen::JacobiSVD<MatrixXcd> svd(X);
        const auto& sv = svd.singularValues();
        return sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
    };
    FeshbachResult out;
    out.pivot_min_singular = rel_min(a11);
    if (out.pivot_min_singular < tol)
        throw Error(ErrorCode::PivotSingular, "a11 relative singular value " + std::to_string(out.pivot_min_singular));
    const MatrixXcd a11i = dense_inverse(a11);
    const MatrixXcd d = a22 - a21 * a11i * a12;
    out.complement_min_singular = rel_min(d);
    if (out.complement_min_singular < tol)
        throw Error(ErrorCode::ComplementSingular,
                    "d relative singular value " + std::to_string(out.complement_min_singular));
    const MatrixXcd di = dense_inverse(d);
    const MatrixXcd left = a11i * a12 * di;   // a11^{-1} a12 d^{-1}
    const MatrixXcd right = di * a21 * a11i;  // d^{-1} a21 a11^{-1}
    out.inverse.resize(N, N);
    out.inverse.topLeftCorner(split, split) = a11i + left * a21 * a11i;
    out.inverse.topRightCorner(split, r) = -left;
    out.inverse.bottomLeftCorner(r, split) = -right;
    out.inverse.bottomRightCorner(r, r) = di;
    return out;
}

NeumannResult neumann_inverse(const MatrixXcd& Dinv, const MatrixXcd& R, double term_tol, int max_terms)
{
    const MatrixXcd T = -R * Dinv;
    NeumannResult out;
    out.spectral_radius = spectral_radius(T);
    if (out.spectral_radius >= 1.0)
        throw Error(ErrorCode::NeumannDiverges, "remainder spectral radius " + std::to_string(out.spectral_radius));
    MatrixXcd term = Dinv;
    out.inverse = Dinv;
    out.terms = 1;
    while (out.terms < max_terms) {
        term = (term * T).eval();
        out.inverse += term;
        ++out.terms;
        if (frob(term) < term_tol * frob(out.inverse)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

namespace {

// inverse of a leading block matrix, split at the indices below m - n/2 when both parts are
// nonempty
MatrixXcd invert_leading(const BlockMatrix& D, const ModelParams& p)
{
    int split = 0;
    for (size_t a = 0; a < D.labels.size(); ++a)
        if (D.labels[a] < p.zero_index()) split = D.offset[a] + D.dim[a];
    const int N = static_cast<int>(D.data.rows());
    if (split > 0 && split < N) return feshbach_invert(D.data, split).inverse;
    return dense_inverse(D.data);
}

}  // namespace

ExpansionReport expansion(const InversionSetup& S, const std::vector<double>& lambda_grid)
{
    const ModelParams& p = S.params;
    const int m = p.m(), n = p.n();
    const auto& L = S.layout;
    const int N = L.size();
    ExpansionReport rep;
    rep.k = S.family.k;
    if (rep.k == 0) rep.special.push_back(p.zero_index());
    if (rep.k == p.m_n() + 1) rep.special.push_back(p.top_index());

    std::map<Sign, MatrixXcd> Dsign, Dinv;
    for (Sign sign : {Sign::Plus, Sign::Minus}) {
        auto lb = leading_blocks(S, sign);
        Dsign[sign] = lb.D_sign.data;
        Dinv[sign] = invert_leading(lb.D_sign, p);
        rep.M_blocks[sign] = make_block_matrix(L, Dinv[sign]);
        const auto& Mb = rep.M_blocks[sign];
        const HalfIndex z = p.zero_index();
        double err = 0.0;
        if (std::find(L.labels.begin(), L.labels.end(), z) != L.labels.end() && L.dim[L.position(z)] > 0) {
            const int a = L.position(z);
            const MatrixXd Tz = S.T0_blocks.block(L.offset[a], L.offset[a], L.dim[a], L.dim[a]);
            const MatrixXcd ref = dense_inverse(Tz.cast<cplx>());
            err = frob(Mb.block(z, z) - ref) / frob(ref);
        }
        rep.zero_block_error[sign] = err;
        double off = 0.0;
        for (auto i : L.labels)
            for (auto j : L.labels) {
                if (i == j) continue;
                const bool special = i == z || j == z || i == p.top_index() || j == p.top_index();
                if (special) off = std::max(off, Mb.block_norm(i, j));
            }
        rep.off_block_max[sign] = off;
    }

    std::vector<ExpansionSample> samples;
    for (double lam : lambda_grid)
        for (Sign sign : {Sign::Plus, Sign::Minus}) {
            ExpansionSample smp;
            smp.lambda = lam;
            smp.sign = sign;
            samples.push_back(smp);
        }

    const double scale_pow = 2 * m - n;
    parallel_for(static_cast<int>(samples.size()), [&](int idx) {
        auto& smp = samples[idx];
        const double lam = smp.lambda;
        const MatrixXcd A = scaled_block_operator(S, smp.sign, lam);
        const MatrixXcd R = A - Dsign.at(smp.sign);
        smp.remainder_norm = frob(R);
        const MatrixXcd Adense = dense_inverse(A);
        MatrixXcd Ainv = Adense;
        smp.spectral_radius = spectral_radius(-R * Dinv.at(smp.sign));
        if (smp.spectral_radius < 1.0) {
            auto nr = neumann_inverse(Dinv.at(smp.sign), R);
            smp.neumann_used = true;
            smp.neumann_terms = nr.terms;
            smp.neumann_converged = nr.converged;
            smp.neumann_vs_dense = frob(nr.inverse - Adense) / frob(Adense);
            if (nr.converged) Ainv = nr.inverse;
        }
        const MatrixXcd Gamma = Ainv - Dinv.at(smp.sign);
        const auto Ab = make_block_matrix(L, Ainv), Gb = make_block_matrix(L, Gamma);
        for (auto i : L.labels)
            for (auto j : L.labels) {
                smp.block_norm[{i, j}] = Ab.block_norm(i, j);
                smp.gamma_norm[{i, j}] = Gb.block_norm(i, j);
            }
        // X = lambda^{2m-n} B A^{-1} B*
        const auto [B, Bs] = build_B(L, lam);
        const double f = std::pow(lam, scale_pow);
        const MatrixXcd X = f * (B.cast<cplx>() * Ainv * Bs.cast<cplx>());
        const MatrixXcd Xd = f * (B.cast<cplx>() * Adense * Bs.cast<cplx>());
        const MatrixXcd M = build_M(S.grid, p, S.samples, smp.sign, lam);
        smp.reconstruction_residual = frob(M * X - MatrixXcd::Identity(N, N)) / std::sqrt(double(N));
        const MatrixXcd Mi = dense_inverse(M);
        smp.identity_residual = frob(Mi - Xd) / frob(Mi);
    });
    rep.samples = samples;

    for (Sign sign : {Sign::Plus, Sign::Minus}) {
        std::vector<double> xs, rs;
        for (const auto& s : rep.samples)
            if (s.sign == sign && s.remainder_norm > 0.0) {
                xs.push_back(s.lambda);
                rs.push_back(s.remainder_norm);
            }
        if (xs.size() >= 2) rep.remainder_slope[sign] = fit_loglog(xs, rs).slope;
        for (auto i : L.labels)
            for (auto j : L.labels) {
                std::vector<double> lx, gy;
                double peak = 0.0;
                for (const auto& s : rep.samples)
                    if (s.sign == sign && s.spectral_radius < 0.5) {
                        lx.push_back(s.lambda);
                        gy.push_back(s.gamma_norm.at({i, j}));
                        peak = std::max(peak, gy.back());
                    }
                // structurally zero blocks carry no claim
                if (lx.size() < 2 || peak < 1e-13) continue;
                if (*std::min_element(gy.begin(), gy.end()) <= 0.0) continue;
                rep.gamma_slope[sign][{i, j}] = fit_loglog(lx, gy).slope;
            }
    }
    for (const auto& s : rep.samples)
        if (s.spectral_radius < 0.5 && (!rep.lambda0 || s.lambda > *rep.lambda0)) {
            bool both = true;
            for (const auto& o : rep.samples)
                if (o.lambda == s.lambda && o.spectral_radius >= 0.5) both = false;
            if (both) rep.lambda0 = s.lambda;
        }
    return rep;
}

bool OrthogonalityReport::all_pass() const
{
    for (const auto& e : entries)
        if (!e.pass) return false;
    return b1_min >= -1e-10;
}

OrthogonalityReport orthogonality_checks(const ProjectionFamily& family, const Grid& g, const ModelParams& p,
                                         const PotentialSamples& s, const MatrixXd& T0, int max_power,
                                         int b1_samples, unsigned seed)
{
    const int m = p.m(), n = p.n();
    if (max_power < 0) max_power = 4 * m - n - 1;
    OrthogonalityReport rep;
    const double t0n = T0.norm();
    for (int l2 = 0; l2 <= max_power; l2 += 2) {
        const MatrixXd vGv = s.v.asDiagonal() * build_operator_G(g, p, l2) * s.v.asDiagonal();
        const double scale = vGv.norm();
        for (auto i : family.indices)
            for (auto j : family.indices) {
                if (j < i || delta(i) + delta(j) - 1 < l2) continue;
                const MatrixXd& Bi = family.Q_basis.at(i);
                const MatrixXd& Bj = family.Q_basis.at(j);
                if (Bi.cols() == 0 || Bj.cols() == 0) continue;
                const double r = (Bi.transpose() * vGv * Bj).norm() / scale;
                rep.entries.push_back({i, j, l2, r, r < 1e-8});
            }
    }
    for (auto i : family.indices)
        for (auto j : family.indices) {
            if (j < i || i.twice + j.twice <= 2 * (2 * m - n)) continue;
            const MatrixXd& Bi = family.Q_basis.at(i);
            const MatrixXd& Bj = family.Q_basis.at(j);
            if (Bi.cols() == 0 || Bj.cols() == 0) continue;
            const double r = (Bi.transpose() * T0 * Bj).norm() / t0n;
            rep.entries.push_back({i, j, -1, r, r < 1e-8});
        }

    // b_1 v G_{4m-n} v is nonnegative on functions whose moments of order <= 2m-1 vanish
    const double b1 = expansion_coefficients(p, 4 * m - n + 1).b.at(1);
    const MatrixXd vGv = s.v.asDiagonal() * build_operator_G(g, p, 4 * m - n) * s.v.asDiagonal();
    const int order = g.kind == SpaceKind::RadialS ? 0 : 2 * m - 1;
    const MatrixXd Mb = moment_basis(g, s.v, order);
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    rep.b1_min = std::numeric_limits<double>::infinity();
    const int N = g.size();
    for (int t = 0; t < b1_samples; ++t) {
        VectorXd psi(N);
        for (int i = 0; i < N; ++i) psi(i) = gauss(rng) * (s.v(i) != 0.0 ? 1.0 : 0.0);
        psi -= Mb * (Mb.transpose() * psi);
        const double nn = psi.squaredNorm();
        if (nn == 0.0) continue;
        rep.b1_min = std::min(rep.b1_min, b1 * psi.dot(vGv * psi) / nn);
        ++rep.b1_samples;
    }
    if (rep.b1_samples == 0) rep.b1_min = 0.0;
    return rep;
}

}  // namespace polyprop
