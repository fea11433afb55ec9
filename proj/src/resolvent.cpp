#include "polyprop/resolvent.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/fit.hpp"
#include "polyprop/grid.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/multiprecision/cpp_complex.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace polyprop {

namespace {

using mpc = boost::multiprecision::cpp_complex_50;
using mpf = boost::multiprecision::cpp_bin_float_50;

constexpr double kPi = std::numbers::pi;

double factorial(int k)
{
    return boost::math::factorial<double>(static_cast<unsigned>(k));
}

cplx ipow(int l)
{
    static const cplx table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return table[((l % 4) + 4) % 4];
}

int c_min(int n)
{
    return n == 1 ? -1 : 0;
}

int c_max(int n)
{
    return n == 1 ? -1 : (n - 3) / 2;
}

void check_radius(int n, double r)
{
    if (!(r >= 0.0)) throw Error(ErrorCode::InvalidConfig, "negative radius");
    if (r == 0.0 && n >= 3) throw Error(ErrorCode::CoincidenceSingularity, "r = 0 with n >= 3");
}

// s^{n-2} F(s) for n >= 3 and F(s) for n = 1, where F is the rotation sum at lambda = 1.
// This is entire in s.
cplx scaled_rotation_sum(const ModelParams& p, Sign sign, cplx s)
{
    const int n = p.n(), m = p.m();
    const double pref = std::pow(4.0 * kPi, -0.5 * (n - 1)) / m;
    const int shift = n == 1 ? 1 : 0;
    cplx total = 0.0;
    for (int k : rotation_indices(m, sign)) {
        cplx kap = std::polar(1.0, kPi * k / m);
        cplx sum = 0.0;
        for (int j = c_min(n); j <= c_max(n); ++j)
            sum += c_coefficient(n, j) * std::pow(cplx(0, 1) * kap, j) * std::pow(s, j + shift);
        total += kap * kap * std::exp(cplx(0, 1) * kap * s) * sum;
    }
    return pref * total;
}

mpc mp_kernel(const ModelParams& p, Sign sign, const mpf& lambda, const mpf& r)
{
    const int n = p.n(), m = p.m();
    const mpf pi = boost::math::constants::pi<mpf>();
    const mpc I(0, 1);
    mpc total(0);
    for (int k : rotation_indices(m, sign)) {
        mpf ang = pi * k / m;
        mpc kap = mpc(cos(ang), sin(ang)) * lambda;
        mpc sum(0);
        for (int j = c_min(n); j <= c_max(n); ++j) {
            mpc t = mpc(mpf(c_coefficient(n, j)));
            mpc ikr = I * kap * r;
            if (j >= 0)
                for (int e = 0; e < j; ++e) t *= ikr;
            else
                t /= ikr;
            sum += t;
        }
        mpc term = kap * kap * exp(I * kap * r) * sum;
        total += term;
    }
    mpf pref = pow(4 * pi, mpf(-0.5 * (n - 1))) / (m * pow(lambda, 2 * m));
    mpf rp = pow(r, 2 - n);
    return total * pref * rp;
}

mpc mp_series_coefficient(const ModelParams& p, Sign sign, int q)
{
    const int n = p.n(), m = p.m();
    const int l = q + n - 2;
    const mpf pi = boost::math::constants::pi<mpf>();
    // d_l is a short sum of rationals; evaluate it in extended precision
    mpf d(0);
    for (int j = c_min(n); j <= std::min(l, c_max(n)); ++j) {
        mpf f(1);
        for (int k = 2; k <= l - j; ++k) f *= k;
        d += mpf(c_coefficient(n, j)) / f;
    }
    mpc phase(0);
    for (int k : rotation_indices(m, sign)) {
        mpf ang = pi * k * (q + n) / m;
        phase += mpc(cos(ang), sin(ang));
    }
    cplx il = ipow(l);
    mpc pref = mpc(mpf(il.real()), mpf(il.imag())) * pow(4 * pi, mpf(-0.5 * (n - 1))) / m;
    return pref * d * phase;
}

}  // namespace

const char* sign_name(Sign s)
{
    return s == Sign::Plus ? "plus" : "minus";
}

std::vector<int> rotation_indices(int m, Sign s)
{
    std::vector<int> out(m);
    std::iota(out.begin(), out.end(), s == Sign::Plus ? 0 : 1);
    return out;
}

double c_coefficient(int n, int j)
{
    if (n == 1) return j == -1 ? -0.5 : 0.0;
    const int h = (n - 3) / 2;
    if (j < 0 || j > h) return 0.0;
    return std::pow(-2.0, j) * factorial(n - 3 - j) / (factorial(j) * factorial(h - j));
}

double d_coefficient(int n, int l)
{
    double d = 0.0;
    for (int j = c_min(n); j <= std::min(l, c_max(n)); ++j) d += c_coefficient(n, j) / factorial(l - j);
    return d;
}

cplx helmholtz_kernel(int n, cplx kappa, cplx r)
{
    const cplx ik = cplx(0, 1) * kappa;
    cplx sum = 0.0;
    for (int j = c_min(n); j <= c_max(n); ++j) {
        const int e = j + 2 - n;
        sum += c_coefficient(n, j) * std::pow(ik, j) * (e == 0 ? cplx(1.0) : std::pow(r, e));
    }
    return std::exp(ik * r) * std::pow(4.0 * kPi, -0.5 * (n - 1)) * sum;
}

cplx second_order_kernel(int n, double lambda, Sign sign, double r)
{
    check_radius(n, r);
    const double kap = sign == Sign::Plus ? lambda : -lambda;
    return helmholtz_kernel(n, kap, r);
}

cplx higher_kernel(const ModelParams& p, Sign sign, cplx lambda, cplx r)
{
    const int m = p.m();
    cplx total = 0.0;
    for (int k : rotation_indices(m, sign)) {
        cplx kap = lambda * std::polar(1.0, kPi * k / m);
        total += kap * kap * helmholtz_kernel(p.n(), kap, r);
    }
    return total / (static_cast<double>(m) * std::pow(lambda, 2 * m));
}

cplx higher_kernel(const ModelParams& p, Sign sign, double lambda, double r)
{
    check_radius(p.n(), r);
    return higher_kernel(p, sign, cplx(lambda), cplx(r));
}

cplx negative_energy_kernel(const ModelParams& p, double lambda, double r)
{
    check_radius(p.n(), r);
    const cplx rotated = lambda * std::polar(1.0, kPi / (2.0 * p.m()));
    return higher_kernel(p, Sign::Plus, rotated, cplx(r));
}

cplx series_coefficient(const ModelParams& p, Branch b, int q)
{
    const int n = p.n(), m = p.m();
    const int l = q + n - 2;
    if (l < c_min(n)) return 0.0;
    const Sign s = b == Branch::Minus ? Sign::Minus : Sign::Plus;
    cplx phase = 0.0;
    for (int k : rotation_indices(m, s)) phase += std::polar(1.0, kPi * k * (q + n) / m);
    cplx K = std::pow(4.0 * kPi, -0.5 * (n - 1)) / m * d_coefficient(n, l) * ipow(l) * phase;
    if (b == Branch::Negative) K *= std::polar(1.0, kPi * (n - 2 * m + q) / (2.0 * m));
    return K;
}

int series_min_power(const ModelParams& p)
{
    return c_min(p.n()) + 2 - p.n();
}

bool series_power_allowed(const ModelParams& p, int q)
{
    if (q % 2 == 0) return q >= 0;
    const int off = q - (2 * p.m() - p.n());
    return off >= 0 && off % (2 * p.m()) == 0;
}

ExpansionCoefficients expansion_coefficients(const ModelParams& p, int theta)
{
    const int m = p.m(), n = p.n();
    if (theta < 0 || theta > 4 * m - n + 1)
        throw Error(ErrorCode::OrderTooLarge, "theta = " + std::to_string(theta));
    const int shift = n >= 3 ? n - 2 : 0;
    const int qmax = std::max(theta, 4 * m - n + 1) + 2;
    const int pmax = qmax + shift;
    const int N = 64;
    const double rho = 1.0;

    auto extract = [&](Sign sign) {
        std::vector<cplx> samples(N);
        for (int k = 0; k < N; ++k) samples[k] = scaled_rotation_sum(p, sign, std::polar(rho, 2 * kPi * k / N));
        std::vector<cplx> coef(pmax + 1);
        for (int q = 0; q <= pmax; ++q) {
            cplx acc = 0.0;
            for (int k = 0; k < N; ++k) acc += samples[k] * std::polar(1.0, -2 * kPi * k * q / N);
            coef[q] = acc / (N * std::pow(rho, q));
        }
        return coef;
    };
    const auto cp = extract(Sign::Plus);
    const auto cm = extract(Sign::Minus);
    auto at = [&](const std::vector<cplx>& c, int q) { return c[q + shift]; };

    ExpansionCoefficients out;
    out.theta = theta;
    for (int q = series_min_power(p); q <= qmax; ++q) {
        const cplx ep = at(cp, q), em = at(cm, q);
        if (!series_power_allowed(p, q)) {
            out.spurious = std::max({out.spurious, std::abs(ep), std::abs(em)});
            continue;
        }
        out.formula_residual = std::max({out.formula_residual,
                                         std::abs(ep - series_coefficient(p, Branch::Plus, q)),
                                         std::abs(em - series_coefficient(p, Branch::Minus, q))});
    }
    for (int j = 0; 2 * j < theta; ++j) {
        const cplx ap = at(cp, 2 * j), am = at(cm, 2 * j);
        const double ph = kPi * (2 * j + n - 2 * m) / (2.0 * m);
        const cplx from_plus = std::polar(1.0, ph) * ap;
        const cplx from_minus = std::polar(1.0, -ph) * am;
        out.a_plus.push_back(ap);
        out.a_minus.push_back(am);
        out.a.push_back(from_plus);
        out.phase_residual.push_back(std::abs(from_plus - from_minus));
    }
    for (int l = 0; 2 * m - n + 2 * m * l < theta; ++l) {
        const int q = 2 * m - n + 2 * m * l;
        const cplx bp = at(cp, q), bm = at(cm, q);
        out.b.push_back(0.5 * (bp.real() + bm.real()));
        out.b_imag_residual = std::max({out.b_imag_residual, std::abs(bp.imag()), std::abs(bm.imag()),
                                        std::abs(bp.real() - bm.real())});
    }
    if (out.formula_residual > 1e-8)
        throw Error(ErrorCode::FitIllConditioned, "contour coefficients disagree with the series formula");
    return out;
}

double sphere_moment(const std::vector<int>& gamma)
{
    int total = 0;
    double num = 2.0;
    for (int g : gamma) {
        if (g % 2 != 0) return 0.0;
        total += g;
        num *= std::tgamma(0.5 * (g + 1));
    }
    return num / std::tgamma(0.5 * (total + static_cast<int>(gamma.size())));
}

double A_coefficient(const ModelParams& p, const std::vector<int>& alpha, const std::vector<int>& beta)
{
    const int m = p.m(), n = p.n();
    if (static_cast<int>(alpha.size()) != n || static_cast<int>(beta.size()) != n)
        throw Error(ErrorCode::UnsupportedIndex, "multi-index length must equal n");
    int a = 0, b = 0;
    for (int i = 0; i < n; ++i) {
        if (alpha[i] < 0 || beta[i] < 0) throw Error(ErrorCode::UnsupportedIndex, "negative multi-index");
        a += alpha[i];
        b += beta[i];
    }
    const int top = 2 * m - (n + 1) / 2;
    if (a > top || b > top) throw Error(ErrorCode::OrderTooLarge, "|alpha| or |beta| above 2m-(n+1)/2");
    const bool low_a = a < p.k_c(), low_b = b < p.k_c();
    if (low_a != low_b) throw Error(ErrorCode::MixedRegime, "indices straddle k_c");

    std::vector<int> gamma(n);
    double fact = 1.0;
    for (int i = 0; i < n; ++i) {
        gamma[i] = alpha[i] + beta[i];
        fact *= factorial(alpha[i]) * factorial(beta[i]);
    }
    const double ang = sphere_moment(gamma);
    if (ang == 0.0) return 0.0;
    const int g = a + b;
    // radial integral of rho^{pw-1} / (1 + rho^{2m})
    const int pw = low_a ? g + n : g + n - 2 * m;
    boost::math::quadrature::exp_sinh<double> integrator;
    auto f = [&](double r) {
        if (r == 0.0) return 0.0;
        if (r > 1.0) return std::pow(r, pw - 1 - 2 * m) / (1.0 + std::pow(r, -2 * m));
        return std::pow(r, pw - 1) / (1.0 + std::pow(r, 2 * m));
    };
    double rad = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
    if (!low_a) rad = -rad;
    const double ig = (g / 2) % 2 == 0 ? 1.0 : -1.0;
    return ig * ang * rad / (std::pow(2.0 * kPi, n) * fact);
}

RemainderProfile remainder_profile(const ModelParams& p, Sign sign, int theta,
                                   const std::vector<double>& lambda_grid,
                                   const std::vector<double>& r_grid, int derivative_order)
{
    const int m = p.m(), n = p.n();
    if (theta < 0 || theta > 4 * m - n + 1)
        throw Error(ErrorCode::OrderTooLarge, "theta = " + std::to_string(theta));
    const int L = derivative_order;
    if (L < 0 || 2 * L > 2 * theta + n - 1 || L > 4)
        throw Error(ErrorCode::OrderTooLarge, "derivative order " + std::to_string(L));
    if (lambda_grid.size() < 2 || r_grid.empty())
        throw Error(ErrorCode::FitIllConditioned, "need at least two lambda samples");

    std::vector<std::pair<int, mpc>> trunc;
    for (int q = series_min_power(p); q < theta; ++q)
        if (series_power_allowed(p, q)) trunc.emplace_back(q, mp_series_coefficient(p, sign, q));

    auto remainder = [&](const mpf& lam, const mpf& r) {
        mpc v = mp_kernel(p, sign, lam, r);
        for (const auto& [q, K] : trunc) v -= K * pow(lam, n - 2 * m + q) * pow(r, q);
        return v;
    };

    RemainderProfile out;
    out.theta = theta;
    out.order = L;
    out.sup_values.assign(L + 1, std::vector<double>(lambda_grid.size(), 0.0));
    for (std::size_t il = 0; il < lambda_grid.size(); ++il) {
        const mpf lam(lambda_grid[il]);
        const mpf h = lam / 1000;
        for (double rv : r_grid) {
            const mpf r(rv);
            mpc f[5];
            for (int k = -2; k <= 2; ++k) f[k + 2] = (L >= 1 || k == 0) ? remainder(lam + k * h, r) : mpc(0);
            std::vector<mpc> d(L + 1);
            d[0] = f[2];
            if (L >= 1) d[1] = (f[3] - f[1]) / (2 * h);
            if (L >= 2) d[2] = (f[3] - 2 * f[2] + f[1]) / (h * h);
            if (L >= 3) d[3] = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * h * h * h);
            if (L >= 4) d[4] = (f[4] - 4 * f[3] + 6 * f[2] - 4 * f[1] + f[0]) / (h * h * h * h);
            RemainderSample s;
            s.lambda = lambda_grid[il];
            s.r = rv;
            for (int l = 0; l <= L; ++l) {
                cplx v(static_cast<double>(d[l].real()), static_cast<double>(d[l].imag()));
                s.derivs.push_back(v);
                const double scaled = std::abs(v) / std::pow(rv, theta);
                out.sup_values[l][il] = std::max(out.sup_values[l][il], scaled);
            }
            out.samples.push_back(std::move(s));
        }
    }
    for (int l = 0; l <= L; ++l) out.fitted_slopes.push_back(fit_loglog(lambda_grid, out.sup_values[l]).slope);
    out.fitted_slope = out.fitted_slopes[0];
    return out;
}

LapProfile lap_norm_profile(const ModelParams& p, Sign sign, const std::vector<double>& lambda_grid,
                            double half_width, int points, double s)
{
    if (p.n() != 1) throw Error(ErrorCode::BackendUnsupported, "weighted resolvent norm needs n = 1");
    Grid g = line_grid(half_width, points);
    const double lmax = *std::max_element(lambda_grid.begin(), lambda_grid.end());
    if (lmax * g.h >= 0.5) throw Error(ErrorCode::GridTooCoarse, "lambda_max * h >= 0.5");
    Eigen::VectorXd wt(g.size());
    for (int i = 0; i < g.size(); ++i) wt(i) = std::pow(1.0 + g.x[i] * g.x[i], -0.5 * s);

    LapProfile out;
    for (double lam : lambda_grid) {
        RadialKernel k;
        k.value = [&](double d) { return higher_kernel(p, sign, lam, d); };
        Eigen::MatrixXcd A = wt.asDiagonal() * kernel_matrix(g, k) * wt.asDiagonal();
        Eigen::MatrixXcd AA = A.adjoint() * A;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(AA, Eigen::EigenvaluesOnly);
        out.lambdas.push_back(lam);
        out.norms.push_back(std::sqrt(es.eigenvalues().maxCoeff()));
    }
    out.fitted_slope = fit_loglog(out.lambdas, out.norms).slope;
    return out;
}

}  // namespace polyprop
