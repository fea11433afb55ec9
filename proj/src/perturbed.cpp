#include "polyprop/perturbed.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/fit.hpp"
#include "polyprop/minverse.hpp"
#include "polyprop/parallel.hpp"
#include "polyprop/propagator.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <lapacke.h>

#include <algorithm>
#include <map>
#include <cmath>
#include <numbers>

namespace polyprop {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPanelNodes = 20;

int node_index(const std::vector<double>& x, double h, double x0, const char* what)
{
    const double s = (x0 - x.front()) / h;
    const long i = std::lround(s);
    if (std::abs(s - double(i)) > 1e-9 || i < 0 || i >= long(x.size()))
        throw Error(ErrorCode::InvalidConfig, std::string(what) + ": point " + std::to_string(x0) + " is not a node");
    return int(i);
}

// Gauss-Legendre panels on [0, Lambda]; the width keeps the phase of e^{-i t lambda^{2m}} and the
// spatial oscillation below budget per panel.
std::vector<std::pair<double, double>> lambda_nodes(int m, double t_max, double spatial, double Lambda,
                                                    double budget, const std::vector<double>& breaks)
{
    std::vector<double> edges{0.0};
    std::vector<double> bp;
    for (double b : breaks)
        if (b > 0.0 && b < Lambda) bp.push_back(b);
    bp.push_back(Lambda);
    std::sort(bp.begin(), bp.end());
    double a = 0.0;
    for (double b : bp) {
        while (a < b) {
            // rate bound taken at the right end of a provisional panel
            double w = budget / (spatial + 2.0 * m * t_max * std::pow(std::min(b, a + budget), 2 * m - 1));
            for (int it = 0; it < 4; ++it)
                w = budget / (spatial + 2.0 * m * t_max * std::pow(std::min(b, a + w), 2 * m - 1));
            const double next = (b - a < 1.05 * w) ? b : a + w;
            edges.push_back(next);
            a = next;
        }
    }
    std::vector<std::pair<double, double>> out;
    const auto& xs = boost::math::quadrature::gauss<double, kPanelNodes>::abscissa();
    const auto& ws = boost::math::quadrature::gauss<double, kPanelNodes>::weights();
    for (size_t e = 0; e + 1 < edges.size(); ++e) {
        const double c = 0.5 * (edges[e] + edges[e + 1]), r = 0.5 * (edges[e + 1] - edges[e]);
        for (size_t q = 0; q < xs.size(); ++q) {
            out.emplace_back(c - r * xs[q], r * ws[q]);
            if (xs[q] != 0.0) out.emplace_back(c + r * xs[q], r * ws[q]);
        }
    }
    return out;
}

struct NodeForms {
    MatrixXd full, born1, born2, remainder;
    double residual = 0.0;
};

struct StoneContext {
    ModelParams p;
    Grid g;
    PotentialSamples s;
    std::vector<int> support;
    std::vector<int> point_index;
    std::optional<InversionSetup> setup;
    /// per series power q: W^T of the point vectors v |x_a - .|^q, one column per point
    std::map<int, MatrixXd> moments;
};

// kink corrected weight factor for the odd part at node distance d
double kink_factor(const std::vector<double>& c, int d)
{
    return d < int(c.size()) ? (d == 0 ? 2.0 : 1.0) * c[d] : 0.0;
}

double prepare_moments(StoneContext& C, double tol)
{
    const InversionSetup& S = *C.setup;
    const auto& L = S.layout;
    const auto& c = kink_corrections(C.g.kink_order);
    const VectorXd sw = C.g.sqrt_weights();
    const int np = int(C.point_index.size()), N = C.g.size();
    const int top = 4 * C.p.m() - C.p.n();
    double zeroed = 0.0;
    for (int q = series_min_power(C.p); q <= top; ++q) {
        if (!series_power_allowed(C.p, q)) continue;
        MatrixXd u(N, np);
        for (int j = 0; j < np; ++j) {
            const double x0 = C.g.x[C.point_index[j]];
            for (int i = 0; i < N; ++i) {
                const double r = std::abs(C.g.x[i] - x0);
                const int d = int(std::lround(r / C.g.h));
                const double f = q % 2 != 0 ? 1.0 + kink_factor(c, d) : 1.0;
                u(i, j) = sw(i) * C.s.v(i) * std::pow(r, q) * f;
            }
        }
        MatrixXd w = L.W.transpose() * u;
        // v times a polynomial of degree q is orthogonal to Q_j whenever q < delta(j)
        if (q % 2 == 0) {
            const double ref = w.norm();
            for (size_t a = 0; a < L.labels.size(); ++a) {
                if (q >= delta(L.labels[a]) || L.dim[a] == 0) continue;
                auto blk = w.middleRows(L.offset[a], L.dim[a]);
                const double rel = ref > 0.0 ? blk.norm() / ref : 0.0;
                if (rel < tol) {
                    zeroed = std::max(zeroed, rel);
                    blk.setZero();
                }
            }
        }
        C.moments.emplace(q, std::move(w));
    }
    return zeroed;
}

// lambda^{2m-n} (B* b)^T A^{-1} (B* b) with A the scaled block operator
MatrixXcd scaled_form(const StoneContext& C, double lambda)
{
    const InversionSetup& S = *C.setup;
    const auto& L = S.layout;
    const int m = C.p.m(), n = C.p.n(), N = L.size(), np = int(C.point_index.size());
    const auto& K = S.series.at(Sign::Plus);
    VectorXd e(N);
    for (size_t a = 0; a < L.labels.size(); ++a) e.segment(L.offset[a], L.dim[a]).setConstant(L.labels[a].value());
    const double ll = std::log(lambda);

    MatrixXcd c = MatrixXcd::Zero(N, np);
    for (const auto& [q, w] : C.moments) {
        if (K[q + 2] == 0.0) continue;
        for (int a = 0; a < N; ++a) {
            const cplx f = K[q + 2] * std::exp((n - 2 * m + q - e(a)) * ll);
            for (int j = 0; j < np; ++j) c(a, j) += f * w(a, j);
        }
    }
    const RadialKernel tail = resolvent_tail_kernel(C.p, Sign::Plus, lambda);
    const auto& corr = kink_corrections(C.g.kink_order);
    const VectorXd sw = C.g.sqrt_weights();
    MatrixXcd u(C.g.size(), np);
    for (int j = 0; j < np; ++j) {
        const double x0 = C.g.x[C.point_index[j]];
        for (int i = 0; i < C.g.size(); ++i) {
            const double r = std::abs(C.g.x[i] - x0);
            const int d = int(std::lround(r / C.g.h));
            u(i, j) = sw(i) * C.s.v(i) * (tail.value(r) + kink_factor(corr, d) * tail.kink_value(r));
        }
    }
    const MatrixXcd tw = L.W.transpose() * u;
    for (int a = 0; a < N; ++a) c.row(a) += std::exp(-e(a) * ll) * tw.row(a);

    const MatrixXcd A = scaled_block_operator(S, Sign::Plus, lambda);
    Eigen::PartialPivLU<MatrixXcd> lu(A);
    if (!(lu.rcond() > 1e-14))
        throw Error(ErrorCode::ResolventSolveFailed,
                    "scaled operator singular at lambda = " + std::to_string(lambda));
    return std::pow(lambda, 2 * m - n) * (c.transpose() * lu.solve(c));
}

// forms at one lambda: P = b U b - b U K U b + b U K U K M^{-1} b with K = v R_0 v
NodeForms node_forms(const StoneContext& C, double lambda, bool scaled)
{
    const int np = int(C.point_index.size()), ns = int(C.support.size());
    NodeForms f{MatrixXd::Zero(np, np), MatrixXd::Zero(np, np), MatrixXd::Zero(np, np), MatrixXd::Zero(np, np), 0.0};
    if (ns == 0) return f;
    const int m = C.p.m();
    const MatrixXcd Mfull = build_M(C.g, C.p, C.s, Sign::Plus, lambda);
    MatrixXcd M(ns, ns);
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b) M(a, b) = Mfull(C.support[a], C.support[b]);
    VectorXd U(ns);
    for (int a = 0; a < ns; ++a) U(a) = C.s.U(C.support[a]);
    MatrixXcd K = M;
    K.diagonal() -= U.cast<cplx>();

    const RadialKernel rk = resolvent_kernel(C.p, Sign::Plus, lambda);
    const auto& c = kink_corrections(C.g.kink_order);
    const VectorXd sw = C.g.sqrt_weights();
    MatrixXcd B(ns, np);
    for (int j = 0; j < np; ++j) {
        const double x0 = C.g.x[C.point_index[j]];
        for (int a = 0; a < ns; ++a) {
            const int i = C.support[a];
            const double r = std::abs(C.g.x[i] - x0);
            const int d = int(std::lround(r / C.g.h));
            cplx val = rk.value(r);
            if (rk.kink_value && d < int(c.size())) val += (d == 0 ? 2.0 : 1.0) * c[d] * rk.kink_value(r);
            B(a, j) = sw(i) * C.s.v(i) * val;
        }
    }
    const MatrixXcd UB = U.asDiagonal() * B;
    const MatrixXcd KUB = K * UB;
    const MatrixXcd P1 = B.transpose() * UB;
    const MatrixXcd P2 = UB.transpose() * KUB;
    const double jac = 2.0 * m * std::pow(lambda, 2 * m - 1);
    f.born1 = jac * P1.imag();
    f.born2 = -jac * P2.imag();
    if (scaled) {
        f.full = jac * scaled_form(C, lambda).imag();
        f.remainder = f.full - f.born1 - f.born2;
        return f;
    }
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    if (!(lu.rcond() > 1e-14))
        throw Error(ErrorCode::ResolventSolveFailed, "M(lambda) singular at lambda = " + std::to_string(lambda));
    const MatrixXcd X = lu.solve(B);
    f.residual = (M * X - B).norm() / B.norm();
    const MatrixXcd P = B.transpose() * X;
    const MatrixXcd Pr = KUB.transpose() * (U.asDiagonal() * (K * X));
    f.full = jac * P.imag();
    f.remainder = jac * Pr.imag();
    return f;
}

cplx free_part(const ModelParams& p, double t, double r, std::optional<Band> band, double E0)
{
    if (t == 0.0) throw Error(ErrorCode::ZeroTime, "t = 0");
    const double at = std::abs(t);
    cplx v = band ? band_kernel(p, at, r, *band, E0) : free_kernel(p, at, r);
    return t < 0.0 ? std::conj(v) : v;
}

// -(1/pi) int e^{-i t lambda^{2m}} w(lambda) F(lambda) d lambda plus the boundary term at lambda_max
template <class Pick>
cplx spectral_integral(const StoneTable& T, double t, int a, int b, Pick pick, bool low)
{
    if (std::abs(t) > T.t_max * (1.0 + 1e-12))
        throw Error(ErrorCode::PhaseUnderResolved,
                    "t = " + std::to_string(t) + " beyond the table's t_max " + std::to_string(T.t_max));
    const int m = T.params.m();
    cplx acc = 0.0;
    for (size_t q = 0; q < T.lambda.size(); ++q) {
        const double w = low ? T.chi[q] : 1.0 - T.chi[q];
        if (w == 0.0) continue;
        acc += T.weight[q] * w * std::polar(1.0, -t * std::pow(T.lambda[q], 2 * m)) * pick(q)(a, b);
    }
    if (!low) {
        const double L = T.opt.lambda_max;
        const double rate = 2.0 * m * t * std::pow(L, 2 * m - 1);
        acc += std::polar(1.0, -t * std::pow(L, 2 * m)) * pick(-1)(a, b) / cplx(0.0, rate);
    }
    return -acc / kPi;
}

}  // namespace

int StoneTable::index(double x) const
{
    for (size_t i = 0; i < points.size(); ++i)
        if (std::abs(points[i] - x) < 1e-12) return int(i);
    throw Error(ErrorCode::InvalidConfig, "point " + std::to_string(x) + " not in the table");
}

StoneTable stone_table(const ModelParams& p, const Potential& V, const std::vector<double>& points, double t_max,
                       const StoneOptions& opt)
{
    if (p.n() != 1) throw Error(ErrorCode::BackendUnsupported, "perturbed kernel needs the line backend");
    if (!(t_max > 0.0)) throw Error(ErrorCode::InvalidConfig, "t_max must be positive");
    if (opt.lambda_max * opt.h > 1.0)
        throw Error(ErrorCode::GridTooCoarse, "lambda_max h exceeds 1");
    const long cells = std::lround(opt.support_width / opt.h);
    if (std::abs(cells * opt.h - opt.support_width) > 1e-9)
        throw Error(ErrorCode::InvalidConfig, "support width is not a multiple of h");

    StoneContext C{p, line_grid(opt.support_width, int(2 * cells + 1)), {}, {}, {}, {}, {}};
    C.s = sample_potential(C.g, V, 0.0);
    for (int i = 0; i < C.g.size(); ++i)
        if (C.s.v(i) != 0.0) C.support.push_back(i);
    double reach = 0.0;
    for (double x : points) {
        C.point_index.push_back(node_index(C.g.x, C.g.h, x, "stone_table"));
        reach = std::max(reach, std::abs(x));
    }

    StoneTable T;
    if (opt.kind >= 0 && !C.support.empty()) {
        if (int(C.support.size()) != C.g.size())
            throw Error(ErrorCode::InvalidConfig, "the scaled inversion needs v nonzero on the whole grid");
        C.setup = prepare_inversion(C.g, p, V, opt.kind);
        T.zeroed_max = prepare_moments(C, 1e-8);
    }
    T.params = p;
    T.opt = opt;
    T.t_max = t_max;
    T.points = points;
    T.grid_size = C.g.size();
    T.support_size = int(C.support.size());
    const int m = p.m();
    const double E0 = opt.split_energy;
    const std::vector<double> breaks{std::pow(0.5 * E0, 1.0 / (2 * m)), std::pow(E0, 1.0 / (2 * m))};
    const auto nodes = lambda_nodes(m, t_max, 2.0 * (reach + opt.support_width), opt.lambda_max, opt.panel_phase, breaks);
    const int nn = int(nodes.size());
    T.lambda.resize(nn);
    T.weight.resize(nn);
    T.chi.resize(nn);
    T.full.resize(nn);
    T.born1.resize(nn);
    T.born2.resize(nn);
    T.remainder.resize(nn);
    std::vector<double> res(nn + 1, 0.0);
    parallel_for(nn + 1, [&](int q) {
        const double l = q < nn ? nodes[q].first : opt.lambda_max;
        NodeForms f = node_forms(C, l, C.setup && l <= opt.scaled_below);
        res[q] = f.residual;
        if (q == nn) {
            T.full_end = std::move(f.full);
            T.born1_end = std::move(f.born1);
            T.born2_end = std::move(f.born2);
            T.remainder_end = std::move(f.remainder);
            return;
        }
        T.lambda[q] = l;
        T.weight[q] = nodes[q].second;
        T.chi[q] = cutoff_low(std::pow(l, 2 * m), E0);
        T.full[q] = std::move(f.full);
        T.born1[q] = std::move(f.born1);
        T.born2[q] = std::move(f.born2);
        T.remainder[q] = std::move(f.remainder);
    });
    T.solve_residual = *std::max_element(res.begin(), res.end());
    for (double l : T.lambda) T.scaled_nodes += C.setup && l <= opt.scaled_below;
    return T;
}

cplx low_kernel(const StoneTable& T, double t, double x, double y)
{
    const int a = T.index(x), b = T.index(y);
    auto pick = [&T](int q) -> const MatrixXd& { return q < 0 ? T.full_end : T.full[q]; };
    return free_part(T.params, t, std::abs(x - y), Band::Low, T.opt.split_energy) +
           spectral_integral(T, t, a, b, pick, true);
}

HighKernelParts high_kernel(const StoneTable& T, double t, double x, double y)
{
    const int a = T.index(x), b = T.index(y);
    HighKernelParts h;
    h.omega0 = free_part(T.params, t, std::abs(x - y), Band::High, T.opt.split_energy);
    h.omega1 = spectral_integral(
        T, t, a, b, [&T](int q) -> const MatrixXd& { return q < 0 ? T.born1_end : T.born1[q]; }, false);
    h.omega2 = spectral_integral(
        T, t, a, b, [&T](int q) -> const MatrixXd& { return q < 0 ? T.born2_end : T.born2[q]; }, false);
    h.remainder = spectral_integral(
        T, t, a, b, [&T](int q) -> const MatrixXd& { return q < 0 ? T.remainder_end : T.remainder[q]; }, false);
    h.full = h.omega0 + spectral_integral(
                            T, t, a, b, [&T](int q) -> const MatrixXd& { return q < 0 ? T.full_end : T.full[q]; }, false);
    return h;
}

cplx stone_kernel(const StoneTable& T, double t, double x, double y)
{
    const int a = T.index(x), b = T.index(y);
    auto pick = [&T](int q) -> const MatrixXd& { return q < 0 ? T.full_end : T.full[q]; };
    return free_part(T.params, t, std::abs(x - y), std::nullopt, 0.0) + spectral_integral(T, t, a, b, pick, true) +
           spectral_integral(T, t, a, b, pick, false);
}

int EigenOracle::index(double x0) const
{
    return node_index(x, x[1] - x[0], x0, "eigendecomposition_oracle");
}

cplx EigenOracle::box_kernel(double t, double x0, double y0) const
{
    const int i = index(x0), j = index(y0);
    const double h = x[1] - x[0];
    cplx acc = 0.0;
    for (int q : retained) acc += std::polar(1.0, -t * energies(q)) * modes(i, q) * modes(j, q);
    return acc / h;
}

cplx EigenOracle::free_box_kernel(double t, double x0, double y0) const
{
    const int N = opt.N, m = params.m();
    const double d = x0 - y0;
    cplx acc = 0.0;
    for (int j = -N / 2; j < N / 2; ++j) {
        const double k = kPi * j / opt.L;
        acc += std::polar(1.0, -t * std::pow(k, 2 * m)) * std::cos(k * d);
    }
    return acc / (2.0 * opt.L);
}

cplx EigenOracle::kernel(double t, double x0, double y0) const
{
    return free_part(params, t, std::abs(x0 - y0), std::nullopt, 0.0) + box_kernel(t, x0, y0) -
           free_box_kernel(t, x0, y0);
}

double EigenOracle::retained_weight(double t, double x0) const
{
    const int i = index(x0);
    double acc = 0.0;
    for (int q : retained) acc += std::norm(std::polar(1.0, -t * energies(q)) * modes(i, q));
    return acc;
}

EigenOracle eigendecomposition_oracle(const ModelParams& p, const Potential& V, const OracleOptions& opt)
{
    if (p.n() != 1) throw Error(ErrorCode::BackendUnsupported, "oracle needs the line backend");
    if (opt.N < 8 || opt.N % 2 != 0 || !(opt.L > 0.0))
        throw Error(ErrorCode::InvalidConfig, "oracle needs even N >= 8 and L > 0");
    const int N = opt.N, m = p.m();
    const double h = 2.0 * opt.L / N;
    EigenOracle O;
    O.params = p;
    O.opt = opt;
    O.x.resize(N);
    for (int i = 0; i < N; ++i) O.x[i] = -opt.L + h * i;

    // circulant symbol sum (1/N) sum_k k^{2m} cos(k d h); the Nyquist mode enters through its cosine
    VectorXd c(N);
    for (int d = 0; d < N; ++d) {
        double acc = 0.0;
        for (int j = -N / 2; j < N / 2; ++j) {
            const double k = kPi * j / opt.L;
            acc += std::pow(k, 2 * m) * std::cos(k * d * h);
        }
        c(d) = acc / N;
    }
    MatrixXd H(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) H(i, j) = c(std::abs(i - j));
    for (int i = 0; i < N; ++i) H(i, i) += V.V(O.x[i]);

    O.energies.resize(N);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', N, H.data(), N, O.energies.data()) != 0)
        throw Error(ErrorCode::InvalidConfig, "symmetric eigensolver failed");
    O.modes = std::move(H);
    for (int q = 0; q < N; ++q) {
        const double E = O.energies(q);
        if (E < 0.0) {
            ++O.dropped_negative;
            continue;
        }
        if (E <= opt.localized_energy) {
            double inner = 0.0;
            for (int i = 0; i < N; ++i)
                if (std::abs(O.x[i]) < opt.L / 8.0) inner += O.modes(i, q) * O.modes(i, q);
            if (inner > opt.localized_mass) {
                ++O.dropped_localized;
                continue;
            }
        }
        O.retained.push_back(q);
    }
    return O;
}

std::vector<double> half_dyadic_times(double t_max)
{
    std::vector<double> t;
    for (int j = 0; std::ldexp(1.0, 0) * std::pow(2.0, 0.5 * j) <= t_max * (1.0 + 1e-12); ++j)
        t.push_back(std::pow(2.0, 0.5 * j));
    return t;
}

DecayFitReport decay_fit(const ModelParams& p, int k, const std::vector<double>& t,
                         const std::vector<std::vector<cplx>>& samples, const std::vector<double>& distances)
{
    if (t.size() < 8 || samples.size() != t.size())
        throw Error(ErrorCode::FitIllConditioned, "decay fit needs at least 8 times with samples");
    DecayFitReport R;
    R.predicted_h = decay_exponent(p, k);
    R.t = t;
    for (size_t j = 0; j < t.size(); ++j) {
        if (samples[j].size() != distances.size())
            throw Error(ErrorCode::InvalidConfig, "samples and distances differ in length");
        double sup = 0.0;
        for (size_t i = 0; i < distances.size(); ++i) {
            const double a = std::abs(samples[j][i]);
            sup = std::max(sup, a);
            R.envelope_sup = std::max(R.envelope_sup, a / envelope(p, k, t[j], distances[i]));
        }
        R.sup_abs.push_back(sup);
    }
    const LogLogFit f = fit_loglog(R.t, R.sup_abs);
    R.fitted_h = -f.slope;
    R.residual = f.residual;
    return R;
}

}  // namespace polyprop
