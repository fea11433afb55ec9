#include <doctest.h>

#include "polyprop/errors.hpp"
#include "polyprop/model.hpp"
#include "polyprop/oscillatory.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace polyprop;

namespace {

SymbolAmplitude gaussian()
{
    SymbolAmplitude g;
    g.eval = [](double l) { return cplx(std::exp(-l * l)); };
    g.continuation = [](cplx l) { return std::exp(-l * l); };
    g.continuation_from = 0.0;
    return g;
}

SymbolAmplitude bump(int m, int b)
{
    SymbolAmplitude f;
    f.order = b;
    f.hi = 1.0;
    f.scale = 0.05;
    f.breakpoints = {std::pow(0.5, 1.0 / (2 * m))};
    f.eval = [=](double l) { return cplx(std::pow(l, b) * cutoff_low(std::pow(l, 2 * m), 1.0)); };
    return f;
}

}  // namespace

TEST_CASE("gaussian amplitude against the closed form")
{
    // int_0^inf e^{-(1+it) l^2} dl = sqrt(pi/(1+it))/2
    auto g = gaussian();
    for (double t : {0.3, 1.0, 7.0, -2.0}) {
        cplx ref = 0.5 * std::sqrt(std::numbers::pi / cplx(1.0, t));
        for (auto M : {OscMethod::PanelFilon, OscMethod::RotatedTail, OscMethod::BruteForce}) {
            auto r = eval_osc(t, 0.0, g, 1, M);
            CHECK(std::abs(r.value - ref) < 1e-8);
        }
    }
}

TEST_CASE("zero amplitude and zero time")
{
    SymbolAmplitude z;
    z.hi = 2.0;
    z.eval = [](double) { return cplx(0.0); };
    CHECK(std::abs(eval_osc(3.0, 1.0, z, 2).value) == 0.0);
    CHECK_THROWS_AS(eval_osc(0.0, 1.0, z, 2), Error);
}

TEST_CASE("panel rule agrees with the brute-force oracle")
{
    std::mt19937 rng(20240611);
    std::uniform_real_distribution<double> ut(0.2, 12.0), ux(-15.0, 15.0);
    std::uniform_int_distribution<int> ub(0, 2), um(1, 3);
    int worst = 0;
    double maxdiff = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int m = um(rng), b = ub(rng);
        const double t = ut(rng) * (i % 5 == 0 ? -1.0 : 1.0), x = ux(rng);
        auto f = bump(m, b);
        auto p = eval_osc(t, x, f, m, OscMethod::PanelFilon);
        auto q = eval_osc(t, x, f, m, OscMethod::BruteForce);
        double d = std::abs(p.value - q.value);
        if (d > maxdiff) {
            maxdiff = d;
            worst = i;
        }
        CHECK(p.error <= 1e-9 * (1.0 + std::abs(p.value)));
    }
    INFO("worst sample " << worst);
    CHECK(maxdiff < 1e-8);
}

TEST_CASE("linearity and conjugation")
{
    auto f = bump(2, 1);
    auto g = gaussian();
    SymbolAmplitude h = f;
    h.eval = [&](double l) { return 2.0 * f.eval(l) - cplx(0, 3) * g.eval(l); };
    const double t = 2.5, x = 3.0;
    cplx lhs = eval_osc(t, x, h, 2).value;
    g.hi = 1.0;
    cplx rhs = 2.0 * eval_osc(t, x, f, 2).value - cplx(0, 3) * eval_osc(t, x, g, 2).value;
    CHECK(std::abs(lhs - rhs) < 1e-12);

    SymbolAmplitude c = f;
    c.eval = [&](double l) { return cplx(0.5, 2.0) * f.eval(l); };
    SymbolAmplitude cc = f;
    cc.eval = [&](double l) { return std::conj(c.eval(l)); };
    cplx a = eval_osc(-t, -x, cc, 2).value;
    cplx b = std::conj(eval_osc(t, x, c, 2).value);
    CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("infinite tail through the ray")
{
    // lambda^{-2} on [1, inf) has no oscillation-free closed form; compare panel and brute force
    SymbolAmplitude f;
    f.lo = 1.0;
    f.eval = [](double l) { return cplx(1.0 / (l * l)); };
    f.continuation = [](cplx l) { return 1.0 / (l * l); };
    f.continuation_from = 1.0;
    auto p = eval_osc(1.5, 2.0, f, 1);
    auto q = eval_osc(1.5, 2.0, f, 1, OscMethod::BruteForce);
    CHECK(std::abs(p.value - q.value) < 1e-9);
    CHECK(std::abs(eval_osc(1.5, 2.0, f, 1, OscMethod::RotatedTail).value - q.value) < 1e-9);
    f.continuation_from = 2.0;
    CHECK_THROWS_AS(eval_osc(1.5, 2.0, f, 1, OscMethod::RotatedTail), Error);
}

TEST_CASE("symbol constants")
{
    auto f = bump(2, 1);
    std::vector<double> grid;
    for (int k = -10; k <= -1; ++k) grid.push_back(std::ldexp(1.0, k));
    auto C = symbol_constants(f, grid);
    REQUIRE(C.size() == 3);
    CHECK(C[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(C[1] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(C[2] < 1e-3);
}

TEST_CASE("mu values")
{
    CHECK(mu(1.0, 2) == doctest::Approx(0.0));
    CHECK(mu(-0.5, 2) == doctest::Approx(0.5));
    for (auto [m, n] : {std::pair{2, 1}, {3, 5}, {2, 3}}) {
        auto p = make_params(m, n);
        double b = 0.5 * (n - 1);
        CHECK(b + mu(b, m) == doctest::Approx(to_double(spatial_exponent(p))));
    }
}

TEST_CASE("low energy decay slopes for m = 1")
{
    LemmaSweep s;
    for (int k = 3; k <= 10; ++k) s.t_grid.push_back(std::ldexp(1.0, k));
    s.t_fixed = std::ldexp(1.0, 12);
    for (int k = 7; k <= 14; ++k) s.x_grid.push_back(std::ldexp(1.0, k) * 0.25);
    auto rep = verify_lemma_bounds(1, 0.0, s, true);
    CHECK(std::abs(rep.t_fit.exponent_t + 0.5) < 0.15);
    CHECK(std::abs(rep.x_fit.exponent_x) < 0.15);
    LemmaSweep few = s;
    few.t_grid.resize(4);
    CHECK_THROWS_AS(verify_lemma_bounds(1, 0.0, few, true), Error);
}
