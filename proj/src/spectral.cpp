#include "polyprop/spectral.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/fit.hpp"
#include "polyprop/resolvent.hpp"

#include <boost/math/special_functions/hermite.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace polyprop {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Potential gauss_well(double eps)
{
    Potential P;
    P.form = "gauss_well";
    P.V = [eps](double x) { return -eps * std::exp(-x * x); };
    return P;
}

Potential resonant_bump(const ModelParams& p)
{
    Potential P;
    P.form = "resonant_bump";
    const int m = p.m();
    if (p.n() == 1) {
        // (-d^2/dx^2)^m e^{-x^2} = (-1)^m H_{2m}(x) e^{-x^2}
        const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        P.V = [m, sgn](double x) {
            double g = std::exp(-x * x);
            return -sgn * boost::math::hermite(2 * m, x) * g / (1.0 + g);
        };
    } else if (p.n() == 3 && m == 1) {
        P.V = [](double r) {
            double g = std::exp(-r * r);
            return -(6.0 - 4.0 * r * r) * g / (1.0 + g);
        };
    } else {
        throw Error(ErrorCode::BackendUnsupported, "resonant bump needs n = 1, or n = 3 with m = 1");
    }
    return P;
}

Potential sampled_potential(std::vector<double> x, std::vector<double> V)
{
    if (x.size() != V.size() || x.size() < 2 || !std::is_sorted(x.begin(), x.end()))
        throw Error(ErrorCode::InvalidConfig, "potential samples need sorted x and matching V");
    Potential P;
    P.form = "samples";
    P.V = [x = std::move(x), V = std::move(V)](double s) {
        if (s < x.front() || s > x.back()) return 0.0;
        auto it = std::upper_bound(x.begin(), x.end(), s);
        if (it == x.end()) return V.back();
        size_t i = static_cast<size_t>(it - x.begin());
        double u = (s - x[i - 1]) / (x[i] - x[i - 1]);
        return (1.0 - u) * V[i - 1] + u * V[i];
    };
    return P;
}

double assumed_decay(const ModelParams& p, int k)
{
    return std::max(4 * p.m() - p.n(), p.n()) + 4.0 * k + 4.0;
}

PotentialSamples sample_potential(const Grid& g, const Potential& V, double beta)
{
    const int N = g.size();
    PotentialSamples s;
    s.beta = beta;
    s.V.resize(N);
    s.v.resize(N);
    s.U.resize(N);
    for (int i = 0; i < N; ++i) {
        double val = V.V(g.x[i]);
        if (!std::isfinite(val)) throw Error(ErrorCode::InvalidConfig, "potential is not finite on the grid");
        s.V(i) = val;
        s.v(i) = std::sqrt(std::abs(val));
        s.U(i) = val >= 0.0 ? 1.0 : -1.0;
        s.decay_sup = std::max(s.decay_sup, std::abs(val) * std::pow(1.0 + g.x[i] * g.x[i], 0.5 * beta));
    }
    return s;
}

void check_backend(const Grid& g, const ModelParams& p)
{
    if (g.kind == SpaceKind::Line1D && p.n() != 1)
        throw Error(ErrorCode::BackendUnsupported, "line grid needs n = 1");
    if (g.kind == SpaceKind::RadialS && !(p.n() == 3 && p.m() == 1))
        throw Error(ErrorCode::BackendUnsupported, "radial grid supports (m, n) = (1, 3) only");
}

MatrixXd build_operator_G(const Grid& g, const ModelParams& p, int j)
{
    if (j <= -p.n()) throw Error(ErrorCode::UnsupportedIndex, "G_j needs j > -n, j = " + std::to_string(j));
    if (g.kind == SpaceKind::Line1D && j < 0) throw Error(ErrorCode::UnsupportedIndex, "line grid needs j >= 0");
    if (g.kind == SpaceKind::RadialS && j == -2)
        throw Error(ErrorCode::BackendUnsupported, "log-singular radial average for j = -2");
    MatrixXd G = kernel_matrix(g, power_kernel(j)).real();
    return 0.5 * (G + G.transpose());
}

MatrixXd build_T0(const Grid& g, const ModelParams& p, const PotentialSamples& s)
{
    check_backend(g, p);
    const double b0 = expansion_coefficients(p, 4 * p.m() - p.n() + 1).b.at(0);
    MatrixXd T = b0 * s.v.asDiagonal() * build_operator_G(g, p, 2 * p.m() - p.n()) * s.v.asDiagonal();
    T.diagonal() += s.U;
    return 0.5 * (T + T.transpose());
}

namespace {

// modified Gram-Schmidt, two passes; drops numerically dependent columns
MatrixXd orthonormalize(const MatrixXd& A)
{
    MatrixXd Q(A.rows(), 0);
    for (int c = 0; c < A.cols(); ++c) {
        VectorXd x = A.col(c);
        const double n0 = x.norm();
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < Q.cols(); ++k) x -= Q.col(k).dot(x) * Q.col(k);
        if (x.norm() < 1e-12 * n0) continue;
        Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
        Q.col(Q.cols() - 1) = x / x.norm();
    }
    return Q;
}

// orthonormal basis of the orthogonal complement of span(B) inside span(P); B subset of P
MatrixXd complement_in(const MatrixXd& P, const MatrixXd& B)
{
    const int a = static_cast<int>(P.cols()), b = static_cast<int>(B.cols());
    if (b == 0) return P;
    MatrixXd C = P.transpose() * B;
    Eigen::HouseholderQR<MatrixXd> qr(C);
    MatrixXd Qf = qr.householderQ() * MatrixXd::Identity(a, a);
    return P * Qf.rightCols(a - b);
}

MatrixXd complement(const MatrixXd& B, int N)
{
    const int b = static_cast<int>(B.cols());
    if (b == 0) return MatrixXd::Identity(N, N);
    Eigen::HouseholderQR<MatrixXd> qr(B);
    MatrixXd Qf = qr.householderQ() * MatrixXd::Identity(N, N);
    return Qf.rightCols(N - b);
}

MatrixXd null_space(const MatrixXd& A, double tol, const ProjectionOptions& opt, const std::string& label,
                    std::vector<SingularTable>& tables)
{
    const int cols = static_cast<int>(A.cols());
    if (cols == 0) return MatrixXd(0, 0);
    Eigen::BDCSVD<MatrixXd> svd(A, Eigen::ComputeFullV);
    VectorXd sv = svd.singularValues();
    SingularTable t{label, std::vector<double>(sv.data(), sv.data() + sv.size())};
    tables.push_back(t);
    std::vector<int> keep;
    for (int i = 0; i < cols; ++i) {
        double s = i < sv.size() ? sv(i) : 0.0;
        if (s > tol / opt.ambiguity_factor && s < tol * opt.ambiguity_factor) {
            char msg[96];
            std::snprintf(msg, sizeof msg, ": singular value %.3e near threshold %.3e", s, tol);
            throw Error(ErrorCode::ThresholdAmbiguous, label + msg);
        }
        if (s < tol) keep.push_back(i);
    }
    MatrixXd Nm(cols, keep.size());
    for (size_t c = 0; c < keep.size(); ++c) Nm.col(c) = svd.matrixV().col(keep[c]);
    return Nm;
}

MatrixXd project_out(const MatrixXd& M, const MatrixXd& X)
{
    if (M.cols() == 0) return X;
    return X - M * (M.transpose() * X);
}

}  // namespace

MatrixXd moment_basis(const Grid& g, const VectorXd& v, int j)
{
    const int N = g.size();
    if (j < 0) return MatrixXd(N, 0);
    if (g.kind == SpaceKind::RadialS && j >= 2)
        throw Error(ErrorCode::BackendUnsupported, "radial backend carries no moments of order >= 2");
    const int top = g.kind == SpaceKind::RadialS ? 0 : j;
    const VectorXd sw = g.sqrt_weights();
    MatrixXd A(N, top + 1);
    for (int a = 0; a <= top; ++a)
        for (int i = 0; i < N; ++i) A(i, a) = sw(i) * v(i) * std::pow(g.x[i] / g.extent, a);
    return orthonormalize(A);
}

int ProjectionChain::dim(HalfIndex j) const
{
    auto it = basis.find(j);
    return it == basis.end() ? 0 : static_cast<int>(it->second.cols());
}

ProjectionChain build_projection_chain(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                       const MatrixXd& T0, const ProjectionOptions& opt)
{
    check_backend(g, p);
    const int N = g.size(), m = p.m(), n = p.n();
    ProjectionChain ch;
    ch.indices = index_set(p, p.m_n() + 1).members;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T0, Eigen::EigenvaluesOnly);
    ch.t0_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    const double tol = opt.rel_threshold * ch.t0_norm;
    auto moments = [&](int j) { return moment_basis(g, s.v, j); };

    if (p.low_dim()) {
        const int lo_top = m - (n + 1) / 2;
        for (int j = 0; j <= lo_top; ++j) ch.basis[HalfIndex::integer(j)] = complement(moments(j), N);
        const MatrixXd& B = ch.basis[HalfIndex::integer(lo_top)];
        MatrixXd A = B.transpose() * T0 * B;
        MatrixXd C = B * null_space(A, tol, opt, "S" + p.zero_index().str(), ch.singular);
        ch.basis[p.zero_index()] = C;
        for (int j = m - (n - 1) / 2; j <= 2 * m - (n + 1) / 2; ++j) {
            const HalfIndex J = HalfIndex::integer(j);
            if (C.cols() == 0) {
                ch.basis[J] = MatrixXd(N, 0);
                continue;
            }
            MatrixXd R1 = project_out(moments(2 * m - n - j - 1), T0 * C);
            MatrixXd R2 = moments(j).transpose() * C;
            MatrixXd A2(R1.rows() + R2.rows(), C.cols());
            A2 << R1, R2;
            ch.basis[J] = C * null_space(A2, tol, opt, "S" + J.str(), ch.singular);
        }
    } else {
        MatrixXd C = null_space(T0, tol, opt, "S" + p.zero_index().str(), ch.singular);
        ch.basis[p.zero_index()] = C;
        for (int j = 0; j <= 2 * m - (n + 1) / 2; ++j) {
            const HalfIndex J = HalfIndex::integer(j);
            if (C.cols() == 0) {
                ch.basis[J] = MatrixXd(N, 0);
                continue;
            }
            MatrixXd A = moments(j).transpose() * C;
            ch.basis[J] = C * null_space(A, tol, opt, "S" + J.str(), ch.singular);
        }
    }
    ch.basis[p.top_index()] = MatrixXd(N, 0);
    return ch;
}

MatrixXd ProjectionFamily::S(HalfIndex j) const
{
    const MatrixXd& B = S_basis.at(j);
    return B * B.transpose();
}

MatrixXd ProjectionFamily::Q(HalfIndex j) const
{
    const MatrixXd& B = Q_basis.at(j);
    return B * B.transpose();
}

double ProjectionFamily::completeness_residual() const
{
    MatrixXd E = -MatrixXd::Identity(size, size);
    for (auto j : indices) E += Q(j);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(E, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double ProjectionFamily::max_certificate() const
{
    double r = 0.0;
    for (const auto& c : certificates) r = std::max(r, c.residual);
    return r;
}

ProjectionFamily build_projection_family(const Grid& g, const ModelParams& p, const PotentialSamples& s,
                                         const ProjectionChain& chain, int k)
{
    const int N = g.size();
    ProjectionFamily F;
    F.k = k;
    F.size = N;
    F.indices = index_set(p, k).members;
    const HalfIndex top = F.indices.back();
    for (auto j : chain.indices) F.S_basis[j] = (j <= top) ? chain.basis.at(j) : MatrixXd(N, 0);
    for (size_t a = 0; a < F.indices.size(); ++a) {
        const HalfIndex j = F.indices[a];
        if (a == 0)
            F.Q_basis[j] = complement(F.S_basis[j], N);
        else
            F.Q_basis[j] = complement_in(F.S_basis[F.indices[a - 1]], F.S_basis[j]);
    }
    const VectorXd sw = g.sqrt_weights();
    for (auto j : F.indices) {
        const int top_alpha = (g.kind == SpaceKind::RadialS) ? std::min(delta(j) - 1, 0) : delta(j) - 1;
        const MatrixXd& B = F.Q_basis[j];
        for (int a = 0; a <= top_alpha; ++a) {
            VectorXd f(N);
            for (int i = 0; i < N; ++i) f(i) = sw(i) * s.v(i) * std::pow(g.x[i], a);
            double nf = f.norm();
            double r = (nf == 0.0 || B.cols() == 0) ? 0.0 : (B * (B.transpose() * f)).norm() / nf;
            F.certificates.push_back({j, a, r});
        }
    }
    return F;
}

int kind_from_chain(const ModelParams& p, const ProjectionChain& chain)
{
    for (int k = 0; k <= p.m_n() + 1; ++k)
        if (chain.dim(index_set(p, k).max()) == 0) return k;
    return p.m_n() + 1;
}

ResonanceReport classify_resonance(const Grid& g, const ModelParams& p, const Potential& V,
                                   const ProjectionOptions& opt)
{
    check_backend(g, p);
    auto s = sample_potential(g, V, assumed_decay(p, 0));
    MatrixXd T0 = build_T0(g, p, s);
    auto chain = build_projection_chain(g, p, s, T0, opt);
    ResonanceReport rep;
    rep.k = kind_from_chain(p, chain);
    for (auto j : chain.indices) rep.dims[j] = chain.dim(j);
    rep.singular_values = chain.singular;
    if (rep.k > 0) rep.gap = build_projection_family(g, p, s, chain, rep.k - 1).completeness_residual();
    rep.oracle_k = shooting_kind(p, V, g.extent);
    rep.oracle_agreement = (rep.oracle_k == rep.k);
    return rep;
}

VectorXd resonance_function(const Grid& g, const ModelParams& p, const PotentialSamples& s, const MatrixXd& T0,
                            const VectorXd& psi)
{
    const int N = g.size();
    const double b0 = expansion_coefficients(p, 4 * p.m() - p.n() + 1).b.at(0);
    const VectorXd sw = g.sqrt_weights();
    MatrixXd G = build_operator_G(g, p, 2 * p.m() - p.n());
    VectorXd Gv = G * s.v.cwiseProduct(psi);
    VectorXd phi(N);
    for (int i = 0; i < N; ++i) phi(i) = -b0 * Gv(i) / sw(i);
    // polynomial part: T_0 psi = v * sum C_a x^a
    const int deg = p.low_dim() ? p.m() - (p.n() + 1) / 2 : -1;
    if (deg >= 0) {
        VectorXd r = T0 * psi;
        MatrixXd A(N, deg + 1);
        for (int a = 0; a <= deg; ++a)
            for (int i = 0; i < N; ++i) A(i, a) = sw(i) * s.v(i) * std::pow(g.x[i] / g.extent, a);
        VectorXd c = A.colPivHouseholderQr().solve(r);
        for (int i = 0; i < N; ++i)
            for (int a = 0; a <= deg; ++a) phi(i) += c(a) * std::pow(g.x[i] / g.extent, a);
    }
    return phi;
}

namespace {

using State = std::vector<double>;

void integrate(const ModelParams& p, const Potential& V, State& y, double from, double to)
{
    namespace ode = boost::numeric::odeint;
    const int m2 = 2 * p.m();
    const double sgn = (p.m() % 2 == 0) ? -1.0 : 1.0;  // phi^{(2m)} = (-1)^{m+1} V phi
    auto sys = [&](const State& u, State& du, double x) {
        for (int k = 0; k + 1 < m2; ++k) du[k] = u[k + 1];
        du[m2 - 1] = sgn * V.V(x) * u[0];
    };
    if (from == to) return;
    ode::runge_kutta_fehlberg78<State> st;
    double dt = (to > from ? 1e-3 : -1e-3);
    ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, st), sys, y, from, to, dt);
}

// state of (x/L)^i at x = X
State poly_state(int m2, int i, double X, double L)
{
    State y(m2, 0.0);
    for (int k = 0; k < m2 && k <= i; ++k) {
        double c = 1.0;
        for (int q = 0; q < k; ++q) c *= (i - q);
        y[k] = c * std::pow(X, i - k) / std::pow(L, i);
    }
    return y;
}

struct Matching {
    MatrixXd Z;
    VectorXd scale;
};

Matching matching_matrix(const ModelParams& p, const Potential& V, int g, double L)
{
    const int m2 = 2 * p.m();
    Matching M;
    M.Z.resize(m2, 2 * (g + 1));
    M.scale.resize(2 * (g + 1));
    for (int side = 0; side < 2; ++side) {
        const double X = side == 0 ? L : -L;
        for (int i = 0; i <= g; ++i) {
            State y = poly_state(m2, i, X, L);
            integrate(p, V, y, X, 0.0);
            Eigen::Map<VectorXd> col(y.data(), m2);
            const int c = side * (g + 1) + i;
            M.scale(c) = col.norm();
            M.Z.col(c) = (side == 0 ? 1.0 : -1.0) * col / M.scale(c);
        }
    }
    return M;
}

}  // namespace

ShootingResult shooting_oracle(const ModelParams& p, const Potential& V, int growth_order, double L)
{
    if (p.n() != 1) throw Error(ErrorCode::BackendUnsupported, "shooting oracle needs n = 1");
    ShootingResult res;
    res.growth_order = growth_order;
    if (growth_order < 0) return res;
    const int g = std::min(growth_order, 2 * p.m() - 1);
    auto M = matching_matrix(p, V, g, L);
    Eigen::JacobiSVD<MatrixXd> svd(M.Z, Eigen::ComputeFullV);
    VectorXd sv = svd.singularValues();
    res.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double tol = 1e-8 * sv(0);
    std::vector<int> keep;
    for (int i = 0; i < M.Z.cols(); ++i) {
        double s = i < sv.size() ? sv(i) : 0.0;
        if (s > 0.1 * tol && s < 10.0 * tol)
            throw Error(ErrorCode::MatchingIllConditioned, "matching singular value " + std::to_string(s));
        if (s < tol) keep.push_back(i);
    }
    res.dimension = static_cast<int>(keep.size());
    res.plus_coefficients.resize(2 * (g + 1), keep.size());
    for (size_t c = 0; c < keep.size(); ++c)
        res.plus_coefficients.col(c) = svd.matrixV().col(keep[c]).cwiseQuotient(M.scale);
    return res;
}

std::vector<double> shooting_solution(const ModelParams& p, const Potential& V, int growth_order,
                                      const std::vector<double>& xs, double L)
{
    auto res = shooting_oracle(p, V, growth_order, L);
    if (res.dimension == 0) throw Error(ErrorCode::MatchingIllConditioned, "no solution in this growth class");
    const int m2 = 2 * p.m();
    const int g = std::min(growth_order, m2 - 1);
    State y0(m2, 0.0);
    for (int i = 0; i <= g; ++i) {
        State yi = poly_state(m2, i, L, L);
        for (int k = 0; k < m2; ++k) y0[k] += res.plus_coefficients(i, 0) * yi[k];
    }
    std::vector<size_t> order(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] > xs[b]; });
    std::vector<double> out(xs.size());
    double at = L;
    for (size_t i : order) {
        integrate(p, V, y0, at, xs[i]);
        at = xs[i];
        out[i] = y0[0];
    }
    return out;
}

int shooting_kind(const ModelParams& p, const Potential& V, double L)
{
    if (p.n() == 3 && p.m() == 1) {
        // s-wave: u = r phi, u'' = V u, regular at 0; phi ~ 1/r at infinity means u' -> 0
        State y{0.0, 1.0};
        namespace ode = boost::numeric::odeint;
        auto sys = [&](const State& u, State& du, double r) {
            du[0] = u[1];
            du[1] = V.V(r) * u[0];
        };
        ode::runge_kutta_fehlberg78<State> st;
        ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, st), sys, y, 0.0, L, 1e-3);
        double s = std::abs(y[1]) / std::hypot(y[0] / L, y[1]);
        if (s > 1e-9 && s < 1e-7) throw Error(ErrorCode::MatchingIllConditioned, "s-wave matching near threshold");
        return s < 1e-8 ? 1 : 0;
    }
    if (p.n() != 1) throw Error(ErrorCode::BackendUnsupported, "shooting oracle needs n = 1 or (m, n) = (1, 3)");
    for (int g = 0; g < p.m(); ++g)
        if (shooting_oracle(p, V, g, L).dimension > 0) return p.m() - g;
    return 0;
}

double moment_decay_check(const Grid& g, const std::function<double(double)>& f, int j, int pw)
{
    if (g.kind != SpaceKind::Line1D) throw Error(ErrorCode::BackendUnsupported, "moment check on the line grid");
    const int N = g.size();
    VectorXd ones = VectorXd::Ones(N);
    MatrixXd M = moment_basis(g, ones, j);
    VectorXd u = g.sample(f);
    u = project_out(M, u);
    const VectorXd sw = g.sqrt_weights();
    std::vector<double> xs, ys;
    const double a = 4.0, b = 0.5 * g.extent;
    for (int k = 0; k < 16; ++k) {
        double x = a * std::pow(b / a, k / 15.0);
        double F = 0.0;
        for (int i = 0; i < N; ++i) F += sw(i) * u(i) * std::pow(std::abs(x - g.x[i]), pw);
        xs.push_back(std::sqrt(1.0 + x * x));
        ys.push_back(std::abs(F));
    }
    return fit_loglog(xs, ys).slope;
}

}  // namespace polyprop
