// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include "polyprop/errors.hpp"
#include "polyprop/minverse.hpp"
#include "polyprop/model.hpp"
#include "polyprop/oscillatory.hpp"
#include "polyprop/perturbed.hpp"
#include "polyprop/propagator.hpp"
#include "polyprop/resolvent.hpp"
#include "polyprop/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace polyprop;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);
// Gaussian well depth with a 3D s-wave zero-energy resonance
constexpr double kTunedWell = 2.68400465092409153827;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::vector<double> dyadic(int lo, int hi)
{
    std::vector<double> v;
    for (int k = lo; k <= hi; ++k) v.push_back(std::ldexp(1.0, k));
    return v;
}

std::vector<double> log_grid(double a, double b, int count)
{
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(a * std::pow(b / a, i / (count - 1.0)));
    return v;
}

std::vector<double> uniform(double hi, int intervals)
{
    std::vector<double> v;
    for (int i = 0; i <= intervals; ++i) v.push_back(hi * i / intervals);
    return v;
}

void closed_form_kernels(Outcome& o)
{
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> L(0.01, 10.0), R(0.01, 20.0);
    auto p = make_params(2, 1);
    double e1 = 0.0, e3 = 0.0, e21 = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double l = L(rng), r = R(rng);
        e1 = std::max(e1, std::abs(second_order_kernel(1, l, Sign::Plus, r) - kI * std::exp(kI * l * r) / (2.0 * l)));
        e3 = std::max(e3, std::abs(second_order_kernel(3, l, Sign::Plus, r) - std::exp(kI * l * r) / (4.0 * kPi * r)));
        const cplx ref = (kI * std::exp(kI * l * r) - std::exp(-l * r)) / (4.0 * l * l * l);
        e21 = std::max(e21, std::abs(higher_kernel(p, Sign::Plus, l, r) - ref));
    }
    o.detail << "n=1 " << e1 << ", n=3 " << e3 << ", (2,1) " << e21;
    o.check(e1 < 1e-10 && e3 < 1e-10 && e21 < 1e-10, "kernel error >= 1e-10");
}

void coefficient_identities(Outcome& o)
{
    double phase = 0.0;
    for (auto [m, n] : {std::pair{2, 1}, {3, 1}, {1, 3}, {2, 3}}) {
        auto e = expansion_coefficients(make_params(m, n), 4 * m - n + 1);
        for (double r : e.phase_residual) phase = std::max(phase, r);
    }
    const double b13 = expansion_coefficients(make_params(1, 3), 2).b.at(0);
    const double b21 = expansion_coefficients(make_params(2, 1), 8).b.at(0);
    const double eb13 = std::abs(b13 - 1.0 / (4.0 * kPi)), eb21 = std::abs(b21 - 1.0 / 12.0);
    o.detail << "phase residual " << phase << ", |b0(1,3) - 1/4pi| " << eb13 << ", |b0(2,1) - 1/12| " << eb21;
    o.check(phase < 1e-10, "phase residual");
    o.check(eb13 < 1e-8 && eb21 < 1e-8, "b0 values");
}

void remainder_rates(Outcome& o)
{
    const auto lam = dyadic(-10, -4);
    const auto r = log_grid(1e-2, 1e6, 160);
    for (auto [m, n] : {std::pair{2, 1}, {1, 3}}) {
        auto p = make_params(m, n);
        for (int theta : {1, 2 * m - n + 1}) {
            const int L = std::min(2, (2 * theta + n - 1) / 2);
            auto prof = remainder_profile(p, Sign::Plus, theta, lam, r, L);
            o.detail << "(" << m << "," << n << ") theta=" << theta << ":";
            for (int l = 0; l <= L; ++l) {
                const double want = n - 2 * m + theta - l;
                o.detail << " " << prof.fitted_slopes[l];
                o.check(std::abs(prof.fitted_slopes[l] - want) < 0.15,
                        "slope l=" + std::to_string(l) + " expected " + std::to_string(want));
            }
            o.detail << "; ";
        }
    }
}

void free_propagator_bound(Outcome& o)
{
    const std::vector<double> ts = dyadic(-6, 6);
    std::vector<double> tcoarse;
    for (int k = -6; k <= 6; k += 3) tcoarse.push_back(std::ldexp(1.0, k));
    for (auto [m, n] : {std::pair{2, 1}, {2, 3}, {3, 1}}) {
        auto p = make_params(m, n);
        double ss = 0.0;
        for (double t : ts)
            for (double s : {0.0, 0.5, 3.0, 12.0, 50.0}) {
                const cplx a = free_kernel(p, t, s * std::pow(t, 1.0 / (2 * m)));
                const cplx b = std::pow(t, -double(n) / (2 * m)) * free_kernel(p, 1.0, s);
                ss = std::max(ss, std::abs(a - b) / std::abs(b));
            }
        const double e1 = envelope_sweep(p, tcoarse, uniform(50.0, 200));
        const double e2 = envelope_sweep(p, tcoarse, uniform(50.0, 400));
        const double change = std::abs(e1 - e2) / e2;
        o.detail << "(" << m << "," << n << ") self-similarity " << ss << " sup " << e2 << " change " << change << "; ";
        o.check(ss < 1e-8, "self-similarity");
        o.check(std::isfinite(e2) && change < 0.05, "envelope stability");
    }
}

void gram_definiteness(Outcome& o)
{
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    auto rebased = [&](const Eigen::MatrixXd& E) {
        Eigen::MatrixXd P(E.rows(), E.cols());
        for (int i = 0; i < P.size(); ++i) P.data()[i] = g(rng);
        P += 3.0 * Eigen::MatrixXd::Identity(E.rows(), E.cols());
        Eigen::MatrixXd C = P.transpose() * E * P;
        return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (C + C.transpose())).eigenvalues();
    };
    double lo = INFINITY, hi = -INFINITY;
    for (int m : {2, 3}) {
        auto p = make_params(m, 1);
        for (int k = 0; k <= p.m_n() + 1; ++k) {
            auto r = gram_matrices(p, k);
            if (r.min_eig_E0) {
                lo = std::min(lo, *r.min_eig_E0);
                o.check(*r.min_eig_E0 > 0.0 && rebased(r.E0).minCoeff() > 0.0, "E0 definiteness");
            }
            if (r.max_eig_E1) {
                hi = std::max(hi, *r.max_eig_E1);
                o.check(*r.max_eig_E1 < 0.0 && rebased(r.E1).maxCoeff() < 0.0, "E1 definiteness");
            }
        }
    }
    o.detail << "min eig E0 " << lo << ", max eig E1 " << hi;
}

void inversion_machinery(Outcome& o)
{
    auto p = make_params(2, 1);
    const auto S = prepare_inversion(line_grid(20.0, 401), p, gauss_well(0.5), 0);
    double rec = 0.0;
    for (double l : {0.5, 0.25})
        rec = std::max(rec, reconstruction_identity_residual(S.grid, S.params, S.samples, S.layout, Sign::Plus, l));
    o.detail << "reconstruction " << rec;
    o.check(rec < 1e-8, "reconstruction identity");
    auto rep = expansion(S, dyadic(-8, -3));
    for (Sign sign : {Sign::Plus, Sign::Minus}) {
        o.detail << "; " << sign_name(sign) << ": remainder slope " << rep.remainder_slope.at(sign)
                 << " zero block " << rep.zero_block_error.at(sign) << " gamma slopes";
        o.check(rep.remainder_slope.at(sign) >= 0.35, "remainder slope");
        o.check(rep.zero_block_error.at(sign) < 1e-6, "zero block");
        o.check(!rep.gamma_slope.at(sign).empty(), "no gamma slopes");
        for (const auto& [ij, slope] : rep.gamma_slope.at(sign)) {
            bool special = false;
            for (auto j : rep.special) special = special || (ij.first == j && ij.second == j);
            o.detail << " " << slope << (special ? "*" : "");
            o.check(slope >= (special ? 0.85 : 0.35), "gamma slope");
        }
    }
}

void resonance_classification(Outcome& o)
{
    struct Case {
        int m, n;
        Potential V;
    };
    const std::vector<Case> cases = {
        {2, 1, gauss_well(0.01)},
        {2, 1, resonant_bump(make_params(2, 1))},
        {2, 1, gauss_well(50.0)},
        {3, 1, resonant_bump(make_params(3, 1))},
        {1, 3, gauss_well(kTunedWell)},
    };
    bool resonance_found = false;
    for (const auto& c : cases) {
        auto p = make_params(c.m, c.n);
        Grid g = c.n == 1 ? line_grid(20.0, 801) : radial_grid(20.0, 800);
        auto rep = classify_resonance(g, p, c.V);
        auto s = sample_potential(g, c.V, assumed_decay(p, 0));
        auto T0 = build_T0(g, p, s);
        auto chain = build_projection_chain(g, p, s, T0);
        const double complete = build_projection_family(g, p, s, chain, rep.k).completeness_residual();
        o.detail << "(" << c.m << "," << c.n << ") " << c.V.form << " k=" << rep.k << " oracle " << rep.oracle_k
                 << " complete " << complete << " gap " << rep.gap << "; ";
        o.check(complete < 1e-8, "completeness at classified kind");
        if (rep.k > 0) o.check(rep.gap > 1e-4, "gap at k - 1");
        o.check(rep.oracle_agreement, "shooting oracle");
        if (c.V.form.find("resonant") != std::string::npos && c.m == 2) resonance_found = rep.k > 0;
    }
    o.check(resonance_found, "no resonance detected for the phi = 1 + e^{-x^2} construction");
}

Potential zero_potential()
{
    return Potential{"zero", [](double) { return 0.0; }};
}

void end_to_end(Outcome& o)
{
    auto p = make_params(2, 1);
    const std::vector<double> pts{-2.0, 0.0, 2.0};
    {
        StoneOptions so;
        auto T = stone_table(p, zero_potential(), {0.0, 2.0}, 4.0, so);
        bool exact = true;
        for (double t : {1.0, 2.0, 4.0})
            exact = exact && stone_kernel(T, t, 0.0, 2.0) == free_kernel(p, t, 2.0) &&
                    stone_kernel(T, t, 0.0, 0.0) == free_kernel(p, t, 0.0);
        o.check(exact, "V = 0 is not exactly the free kernel");
    }
    struct Level {
        double h, lambda_max, panel_phase, L;
    };
    const Level levels[] = {{0.25, 4.0, 24.0, 320.0}, {1.0 / 6.0, 6.0, 16.0, 640.0}, {0.125, 6.0, 12.0, 1280.0}};
    const auto V = gauss_well(-0.1);
    double prev = INFINITY;
    for (const auto& lv : levels) {
        StoneOptions so;
        so.h = lv.h;
        so.lambda_max = lv.lambda_max;
        so.panel_phase = lv.panel_phase;
        auto T = stone_table(p, V, pts, 4.0, so);
        OracleOptions oo;
        oo.L = lv.L;
        oo.N = static_cast<int>(std::lround(3.0 * lv.L));
        auto O = eigendecomposition_oracle(p, V, oo);
        double err = 0.0;
        for (double t : {1.0, 2.0, 4.0})
            for (double x : pts)
                for (double y : pts) err = std::max(err, std::abs(stone_kernel(T, t, x, y) - O.kernel(t, x, y)));
        o.detail << "h=" << lv.h << " L=" << lv.L << " max err " << err << "; ";
        o.check(err < prev, "error not decreasing");
        prev = err;
    }
    o.check(prev < 1e-4, "finest level error >= 1e-4");
}

DecayFitReport stone_decay(const ModelParams& p, const Potential& V, int kind, int k)
{
    const std::vector<double> pts{-2.0, 0.0, 2.0};
    StoneOptions so;
    so.h = 0.1;
    so.lambda_max = 5.0;
    so.kind = kind;
    auto T = stone_table(p, V, pts, 16.0, so);
    const auto ts = half_dyadic_times(16.0);
    std::vector<double> dist;
    for (double x : pts)
        for (double y : pts) dist.push_back(std::abs(x - y));
    std::vector<std::vector<cplx>> S;
    for (double t : ts) {
        std::vector<cplx> row;
        for (double x : pts)
            for (double y : pts) row.push_back(stone_kernel(T, t, x, y));
        S.push_back(row);
    }
    return decay_fit(p, k, ts, S, dist);
}

void decay_exponents(Outcome& o)
{
    auto p = make_params(2, 1);
    {
        const auto ts = half_dyadic_times(16.0);
        const std::vector<double> dist{0.0, 2.0, 4.0};
        std::vector<std::vector<cplx>> S;
        for (double t : ts) {
            std::vector<cplx> row;
            for (double d : dist) row.push_back(free_kernel(p, t, d));
            S.push_back(row);
        }
        auto r = decay_fit(p, 0, ts, S, dist);
        o.detail << "free h " << r.fitted_h << " (" << to_double(r.predicted_h) << "); ";
        o.check(std::abs(r.fitted_h - to_double(r.predicted_h)) < 0.15, "free exponent");
    }
    auto reg = stone_decay(p, gauss_well(-0.1), 0, 0);
    o.detail << "regular bump h " << reg.fitted_h << " (" << to_double(reg.predicted_h) << "); ";
    o.check(std::abs(reg.fitted_h - to_double(reg.predicted_h)) < 0.15, "regular exponent");

    const auto V = resonant_bump(p);
    const int k = classify_resonance(line_grid(20.0, 801), p, V).k;
    auto res = stone_decay(p, V, k, k);
    o.detail << "resonant bump k=" << k << " h " << res.fitted_h << " (" << to_double(res.predicted_h) << ")";
    o.check(k > 0, "bump not resonant");
    o.check(res.fitted_h <= reg.fitted_h + 0.15, "resonant decays faster than regular");
}

void lemma_checks(Outcome& o)
{
    for (auto [m, b] : {std::pair{1, 0.0}, {2, 0.0}, {2, 1.0}}) {
        auto a = verify_lemma_bounds(m, b, default_lemma_sweep(m, true), true);
        auto c = verify_lemma_bounds(m, b, default_lemma_sweep(m, false), false);

        const double mub = mu(b, m);
        const double inside = -(1.0 + b) / (2.0 * m);
        o.detail << "(" << m << "," << b << ") low t " << a.t_fit.exponent_t << "/" << inside << " x "
                 << a.x_fit.exponent_x << "/" << -mub << " high t " << c.t_fit.exponent_t << "/" << -0.5 + mub
                 << " x " << c.x_fit.exponent_x << "/" << -mub << "; ";
        o.check(std::abs(a.t_fit.exponent_t - inside) < 0.15, "inside exponent");
        o.check(std::abs(a.x_fit.exponent_x + mub) < 0.15, "outside exponent");
        o.check(std::abs(c.t_fit.exponent_t - (-0.5 + mub)) < 0.15, "high energy t exponent");
        o.check(std::abs(c.x_fit.exponent_x + mub) < 0.15, "high energy x exponent");
    }
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> all = {
        {1, "closed-form kernels", 1.0, closed_form_kernels},
        {2, "coefficient identities", 10.0, coefficient_identities},
        {3, "remainder rates", 30.0, remainder_rates},
        {4, "free propagator bound", 120.0, free_propagator_bound},
        {5, "Gram definiteness", 10.0, gram_definiteness},
        {6, "inversion machinery", 300.0, inversion_machinery},
        {7, "resonance classification", 60.0, resonance_classification},
        {8, "end-to-end propagator", 600.0, end_to_end},
        {9, "dispersive decay exponents", 900.0, decay_exponents},
        {10, "oscillatory lemma checks", 120.0, lemma_checks},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        o.detail.precision(4);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) o.check(false, "runtime over budget");
        std::printf("criterion %2d %s: %s (%.1f s of %.0f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    c.budget_s, o.detail.str().c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures;
}
