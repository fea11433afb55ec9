#include <doctest.h>

#include "polyprop/errors.hpp"
#include "polyprop/resolvent.hpp"

#include <cmath>
#include <numbers>

using namespace polyprop;

namespace {

constexpr double pi = std::numbers::pi;
const cplx I(0, 1);

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

}  // namespace

TEST_CASE("second order kernels")
{
    CHECK(std::abs(second_order_kernel(1, 2.0, Sign::Plus, 0.0) - I / 4.0) < 1e-15);
    cplx v = second_order_kernel(3, 1.0, Sign::Plus, 1.0);
    CHECK(std::abs(v - std::exp(I) / (4 * pi)) < 1e-15);
    CHECK(std::abs(second_order_kernel(3, 1.0, Sign::Minus, 1.0) - std::conj(v)) < 1e-15);
    // five dimensions: e^{i r}(1 - i r)/(8 pi^2 r^3)
    cplx v5 = second_order_kernel(5, 1.0, Sign::Plus, 2.0);
    CHECK(std::abs(v5 - std::exp(2.0 * I) * (1.0 - 2.0 * I) / (64 * pi * pi)) < 1e-15);
    CHECK_THROWS_AS(second_order_kernel(3, 1.0, Sign::Plus, 0.0), Error);
}

TEST_CASE("higher kernels")
{
    auto p1 = make_params(1, 3);
    CHECK(std::abs(higher_kernel(p1, Sign::Plus, 1.3, 0.7) - second_order_kernel(3, 1.3, Sign::Plus, 0.7)) < 1e-15);
    auto p = make_params(2, 1);
    CHECK(std::abs(higher_kernel(p, Sign::Plus, 1.0, 0.0) - (I - 1.0) / 4.0) < 1e-15);
    CHECK(std::abs(higher_kernel(p, Sign::Plus, 1.0, 10.0) - I * std::exp(10.0 * I) / 4.0) < 1e-4);
    for (double r : {0.0, 0.3, 2.5}) {
        cplx closed = (I * std::exp(I * 0.8 * r) - std::exp(-0.8 * r)) / (4 * std::pow(0.8, 3));
        CHECK(std::abs(higher_kernel(p, Sign::Plus, 0.8, r) - closed) < 1e-13);
        CHECK(std::abs(higher_kernel(p, Sign::Minus, 0.8, r) - std::conj(closed)) < 1e-13);
    }
}

TEST_CASE("kernel homogeneity")
{
    for (auto [m, n] : {std::pair{2, 1}, {2, 3}, {3, 5}, {1, 3}}) {
        auto p = make_params(m, n);
        for (double lam : {0.25, 3.0})
            for (double r : {0.5, 1.7}) {
                cplx a = higher_kernel(p, Sign::Plus, lam, r);
                cplx b = std::pow(lam, n - 2 * m) * higher_kernel(p, Sign::Plus, 1.0, lam * r);
                CHECK(std::abs(a - b) < 1e-10 * std::abs(b));
            }
    }
}

TEST_CASE("negative energy kernels")
{
    auto p = make_params(1, 3);
    CHECK(std::abs(negative_energy_kernel(p, 1.0, 1.0) - std::exp(-1.0) / (4 * pi)) < 1e-15);
    auto q = make_params(2, 1);
    // Fourier integral (1/pi) int_0^inf cos(xi r)/(1+xi^4), mpmath quadosc
    cplx v1 = negative_energy_kernel(q, 1.0, 1.0);
    CHECK(std::abs(v1 - 0.245779160428953595) < 1e-14);
    CHECK(std::abs(negative_energy_kernel(q, 1.0, 0.0) - 0.353553390593273762) < 1e-14);
    for (double r : {0.0, 0.5, 3.0, 12.0}) CHECK(std::abs(negative_energy_kernel(q, 1.3, r).imag()) < 1e-12);
    CHECK(std::abs(negative_energy_kernel(q, 1.0, 40.0)) < 1e-10);
}

TEST_CASE("series coefficients reproduce the kernel")
{
    for (auto [m, n] : {std::pair{2, 1}, {1, 3}, {3, 5}, {2, 7}}) {
        auto p = make_params(m, n);
        for (Branch b : {Branch::Plus, Branch::Minus, Branch::Negative}) {
            const double lam = 0.6, r = 0.9;
            cplx sum = 0.0;
            for (int q = series_min_power(p); q < 60; ++q) sum += series_coefficient(p, b, q) * std::pow(lam * r, q);
            sum *= std::pow(lam, n - 2 * m);
            cplx ref = b == Branch::Negative ? negative_energy_kernel(p, lam, r)
                                             : higher_kernel(p, b == Branch::Plus ? Sign::Plus : Sign::Minus, lam, r);
            CHECK(std::abs(sum - ref) < 1e-12 * std::abs(ref));
        }
    }
}

TEST_CASE("expansion coefficients")
{
    auto e11 = expansion_coefficients(make_params(1, 1), 3);
    CHECK(std::abs(e11.a_plus[0] - I / 2.0) < 1e-12);
    CHECK(std::abs(e11.a_minus[0] + I / 2.0) < 1e-12);

    auto e13 = expansion_coefficients(make_params(1, 3), 2);
    REQUIRE(e13.b.size() == 2);
    CHECK(e13.b[0] == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-12));
    CHECK(e13.b[1] == doctest::Approx(-1.0 / (8 * pi)).epsilon(1e-12));

    auto e21 = expansion_coefficients(make_params(2, 1), 8);
    REQUIRE(e21.b.size() == 2);
    CHECK(e21.b[0] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    // Taylor coefficients of (i e^{is} - e^{-s})/4: a_j+ = (i (-1)^j - 1) / (4 (2j)!)
    CHECK(std::abs(e21.a_plus[0] - (I - 1.0) / 4.0) < 1e-12);
    CHECK(std::abs(e21.a_plus[1] + (1.0 + I) / 8.0) < 1e-12);
    CHECK(std::abs(e21.a_plus[2] - (I - 1.0) / 96.0) < 1e-12);
    // b_1 from the r^7 term: (i * i^7 + 1)/(4 * 7!) with sign from -e^{-s}
    CHECK(e21.b[1] == doctest::Approx(2.0 / (4 * 5040.0)).epsilon(1e-10));
    CHECK(e21.spurious < 1e-12);
    CHECK(e21.b_imag_residual < 1e-12);
    for (double r : e21.phase_residual) CHECK(r < 1e-10);
    for (cplx a : e21.a_plus) CHECK(std::abs(a.imag()) > 1e-10);

    for (auto [m, n] : {std::pair{3, 1}, {3, 5}, {2, 3}, {3, 11}}) {
        auto p = make_params(m, n);
        auto e = expansion_coefficients(p, 4 * m - n + 1);
        CHECK(e.spurious < 1e-9);
        CHECK(e.formula_residual < 1e-10);
        CHECK(e.b_imag_residual < 1e-10);
        for (double b : e.b) CHECK(std::abs(b) > 1e-12);
        for (double r : e.phase_residual) CHECK(r < 1e-10);
    }
    CHECK_THROWS_AS(expansion_coefficients(make_params(2, 1), 9), Error);
}

TEST_CASE("d_l vanishes for odd l up to n-4")
{
    for (int n : {5, 7, 9, 11})
        for (int l = 1; l <= n - 4; l += 2) CHECK(std::abs(d_coefficient(n, l)) < 1e-14);
}

TEST_CASE("A coefficients")
{
    auto p = make_params(2, 1);
    CHECK(A_coefficient(p, {0}, {0}) == doctest::Approx(1.0 / (2 * std::sqrt(2.0))).epsilon(1e-12));
    CHECK(A_coefficient(p, {1}, {0}) == 0.0);
    CHECK(A_coefficient(p, {2}, {2}) == doctest::Approx(-1.0 / (8 * std::sqrt(2.0))).epsilon(1e-12));
    CHECK_THROWS_AS(A_coefficient(p, {0}, {2}), Error);
    CHECK_THROWS_AS(A_coefficient(p, {4}, {2}), Error);
    auto q = make_params(2, 3);
    CHECK(A_coefficient(q, {0, 0, 0}, {0, 0, 0}) == doctest::Approx(0.0562697697598191293).epsilon(1e-12));
    // in one dimension A_{a,b} matches the negative-energy Taylor coefficient times a binomial
    auto r = make_params(3, 1);
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) {
            if ((a < r.k_c()) != (b < r.k_c()) || (a + b) % 2) continue;
            double binom = std::tgamma(a + b + 1.0) / (std::tgamma(a + 1.0) * std::tgamma(b + 1.0));
            cplx tay = series_coefficient(r, Branch::Negative, a + b) * binom;
            CHECK(std::abs(A_coefficient(r, {a}, {b}) - tay.real()) < 1e-12);
        }
}

TEST_CASE("sphere moments")
{
    CHECK(sphere_moment({0, 0, 0}) == doctest::Approx(4 * pi));
    CHECK(sphere_moment({2, 0, 0}) == doctest::Approx(4 * pi / 3));
    CHECK(sphere_moment({1, 0, 0}) == 0.0);
    CHECK(sphere_moment({4}) == doctest::Approx(2.0));
}

TEST_CASE("remainder slopes")
{
    auto p = make_params(2, 1);
    auto lam = dyadic(-10, -4);
    auto r = log_grid(1e-2, 1e6, 160);
    auto prof = remainder_profile(p, Sign::Plus, 1, lam, r, 1);
    CHECK(std::abs(prof.fitted_slopes[0] + 2.0) < 0.15);
    CHECK(std::abs(prof.fitted_slopes[1] + 3.0) < 0.15);
    auto p13 = make_params(1, 3);
    auto z = remainder_profile(p13, Sign::Minus, 0, lam, r, 1);
    CHECK(std::abs(z.fitted_slope - 1.0) < 0.15);
    CHECK_THROWS_AS(remainder_profile(p, Sign::Plus, 1, lam, r, 2), Error);
}

TEST_CASE("weighted resolvent norm decay")
{
    auto lam = dyadic(0, 3);
    auto a = lap_norm_profile(make_params(1, 1), Sign::Plus, lam, 20.0, 801, 1.0);
    CHECK(a.fitted_slope < -1.0 + 0.2);
    auto b = lap_norm_profile(make_params(2, 1), Sign::Plus, lam, 20.0, 801, 1.0);
    CHECK(b.fitted_slope < -3.0 + 0.2);
    CHECK_THROWS_AS(lap_norm_profile(make_params(2, 1), Sign::Plus, {1.0, 16.0}, 20.0, 801, 1.0), Error);
}
