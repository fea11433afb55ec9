#include <doctest.h>

#include "polyprop/errors.hpp"
#include "polyprop/perturbed.hpp"
#include "polyprop/propagator.hpp"

#include <cmath>

using namespace polyprop;

namespace {

Potential zero_potential()
{
    return Potential{"zero", [](double) { return 0.0; }};
}

const StoneTable& bump_table()
{
    static const StoneTable T = [] {
        StoneOptions o;
        o.h = 1.0 / 6.0;
        return stone_table(make_params(2, 1), gauss_well(-0.1), {-2.0, 0.0, 2.0}, 2.0, o);
    }();
    return T;
}

}  // namespace

TEST_CASE("zero potential gives the free kernel")
{
    auto p = make_params(2, 1);
    StoneOptions o;
    o.h = 0.25;
    o.lambda_max = 4.0;
    auto T = stone_table(p, zero_potential(), {0.0, 2.0}, 2.0, o);
    CHECK(T.support_size == 0);
    for (double t : {1.0, 2.0}) {
        CHECK(low_kernel(T, t, 0.0, 2.0) == band_kernel(p, t, 2.0, Band::Low, o.split_energy));
        auto h = high_kernel(T, t, 0.0, 2.0);
        CHECK(h.omega0 == band_kernel(p, t, 2.0, Band::High, o.split_energy));
        CHECK(h.omega1 == 0.0);
        CHECK(h.omega2 == 0.0);
        CHECK(h.remainder == 0.0);
        CHECK(stone_kernel(T, t, 0.0, 0.0) == free_kernel(p, t, 0.0));
    }
}

TEST_CASE("split additivity and symmetries")
{
    const auto& T = bump_table();
    for (double t : {1.0, 2.0})
        for (double x : T.points)
            for (double y : T.points) {
                const cplx total = stone_kernel(T, t, x, y);
                CHECK(std::abs(low_kernel(T, t, x, y) + high_kernel(T, t, x, y).total() - total) < 1e-9);
                CHECK(std::abs(stone_kernel(T, t, y, x) - total) < 1e-8);
                CHECK(std::abs(low_kernel(T, -t, x, y) - std::conj(low_kernel(T, t, x, y))) < 1e-12);
            }
    CHECK(T.solve_residual < 1e-10);
    CHECK_THROWS_AS(stone_kernel(T, 3.0, 0.0, 0.0), Error);
    CHECK_THROWS_AS(stone_kernel(T, 1.0, 1.0, 0.0), Error);
    CHECK_THROWS_AS(stone_table(make_params(2, 1), gauss_well(-0.1), {0.1}, 1.0), Error);
}

TEST_CASE("Born remainder is cubic in the coupling")
{
    auto p = make_params(2, 1);
    StoneOptions o;
    // lambda h must stay well below 1: near the grid limit v R_0 v is large and the Born
    // series stops converging
    o.h = 0.125;
    o.lambda_max = 4.0;
    o.split_energy = 1.0;
    std::vector<double> rem;
    for (double eps : {0.1, 0.05, 0.025}) {
        auto T = stone_table(p, gauss_well(-eps), {0.0}, 1.0, o);
        auto h = high_kernel(T, 1.0, 0.0, 0.0);
        CHECK(std::abs(h.full - h.total()) < 1e-12);
        rem.push_back(std::abs(h.full - h.born()));
        MESSAGE(eps, " ", rem.back(), " ", std::abs(h.remainder));
    }
    for (int i = 0; i + 1 < 3; ++i) {
        const double rate = std::log2(rem[i] / rem[i + 1]);
        CHECK(rate > 2.8);
        CHECK(rate < 3.2);
    }
}

TEST_CASE("scaled inversion agrees with the dense solve")
{
    auto p = make_params(2, 1);
    StoneOptions a;
    a.h = 0.25;
    a.lambda_max = 4.0;
    a.kind = 0;
    StoneOptions b = a;
    b.scaled_below = 0.0;
    auto Ta = stone_table(p, gauss_well(-0.5), {0.0, 2.0}, 1.0, a);
    auto Tb = stone_table(p, gauss_well(-0.5), {0.0, 2.0}, 1.0, b);
    CHECK(Ta.scaled_nodes > 0);
    CHECK(Tb.scaled_nodes == 0);
    double diff = 0.0;
    for (size_t q = 0; q < Ta.lambda.size(); ++q) diff = std::max(diff, (Ta.full[q] - Tb.full[q]).norm());
    CHECK(diff < 1e-11);
}

TEST_CASE("eigendecomposition oracle")
{
    auto p = make_params(2, 1);
    OracleOptions o;
    o.L = 640.0;
    o.N = 1920;
    auto Z = eigendecomposition_oracle(p, zero_potential(), o);
    CHECK(Z.dropped_negative == 0);
    CHECK(std::abs(Z.box_kernel(1.0, 0.0, 2.0) - Z.free_box_kernel(1.0, 0.0, 2.0)) < 1e-10);
    CHECK(std::abs(Z.kernel(1.0, 0.0, 2.0) - free_kernel(p, 1.0, 2.0)) < 1e-10);
    CHECK(Z.retained_weight(1.0, 0.0) == doctest::Approx(Z.retained_weight(3.0, 0.0)).epsilon(1e-12));

    auto O = eigendecomposition_oracle(p, gauss_well(-0.1), o);
    CHECK(O.dropped_negative == 0);
    const auto& T = bump_table();
    for (double x : T.points)
        for (double y : T.points) CHECK(std::abs(stone_kernel(T, 1.0, x, y) - O.kernel(1.0, x, y)) < 1e-4);

    // a well carries a bound state, which is projected out
    auto W = eigendecomposition_oracle(p, gauss_well(1.0), o);
    CHECK(W.dropped_negative >= 1);
}

TEST_CASE("decay fit of the free kernel")
{
    auto p = make_params(2, 1);
    const auto ts = half_dyadic_times(16.0);
    CHECK(ts.size() == 9);
    const std::vector<double> pts{-2.0, 0.0, 2.0};
    std::vector<double> dist;
    for (double x : pts)
        for (double y : pts) dist.push_back(std::abs(x - y));
    std::vector<std::vector<cplx>> S;
    for (double t : ts) {
        std::vector<cplx> row;
        for (double d : dist) row.push_back(free_kernel(p, t, d));
        S.push_back(row);
    }
    auto r = decay_fit(p, 0, ts, S, dist);
    CHECK(r.fitted_h == doctest::Approx(0.25).epsilon(0.04 / 0.25));
    CHECK(r.predicted_h == Rational(1, 4));
    CHECK(r.envelope_sup > 0.0);
    CHECK(std::isfinite(r.envelope_sup));
    std::vector<double> few(ts.begin(), ts.begin() + 5);
    std::vector<std::vector<cplx>> Sf(S.begin(), S.begin() + 5);
    CHECK_THROWS_AS(decay_fit(p, 0, few, Sf, dist), Error);
}
