#include <doctest.h>

#include "polyprop/grid.hpp"

#include <cmath>
#include <numbers>

using namespace polyprop;

TEST_CASE("kink corrections satisfy the moment conditions")
{
    const auto& c = kink_corrections(6);
    REQUIRE(c.size() == 6);
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int p = 0; p < 6; ++p) {
        s0 += c[p];
        s1 += c[p] * p;
        s2 += c[p] * p * p;
        s3 += c[p] * p * p * p;
    }
    CHECK(s0 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(s1 == doctest::Approx(1.0 / 12.0).epsilon(1e-13));
    CHECK(std::abs(s2) < 1e-12);
    CHECK(s3 == doctest::Approx(-1.0 / 120.0).epsilon(1e-12));
}

TEST_CASE("line grid quadrature of a cubic kink")
{
    // double integral of |x-y|^3 exp(-x^2-y^2) equals 2 sqrt(2 pi)
    Grid g = line_grid(9.0, 181);
    Eigen::VectorXd u = g.sample([](double x) { return std::exp(-x * x); });
    Eigen::MatrixXcd K = kernel_matrix(g, power_kernel(3));
    std::complex<double> v = u.cast<std::complex<double>>().dot(K * u.cast<std::complex<double>>());
    CHECK(std::abs(v - 5.01325654926200100) < 1e-10);

    Grid plain = g;
    plain.kink_order = 0;
    Eigen::MatrixXcd K0 = kernel_matrix(plain, power_kernel(3));
    std::complex<double> v0 = u.cast<std::complex<double>>().dot(K0 * u.cast<std::complex<double>>());
    CHECK(std::abs(v0 - 5.01325654926200100) > 1e-7);
}

TEST_CASE("radial grid quadrature of |x-y|")
{
    // integral over R^3 x R^3 of |x-y| exp(-|x|^2-|y|^2) equals 2 sqrt(2) pi^{5/2}
    auto err = [](int N, int q) {
        Grid g = radial_grid(9.0, N);
        if (q > 0) g.kink_order = q;
        Eigen::VectorXcd u = g.sample([](double r) { return std::exp(-r * r); }).cast<std::complex<double>>();
        Eigen::MatrixXcd K = kernel_matrix(g, power_kernel(1));
        CHECK((K - K.transpose()).norm() < 1e-12 * K.norm());
        return std::abs(u.dot(K * u) - 49.4788589023862961);
    };
    CHECK(radial_grid(9.0, 10).kink_order == 6);
    CHECK(err(180, 14) < 1e-8);
    double e1 = err(180, 0), e2 = err(360, 0);
    CHECK(e1 < 1e-7);
    CHECK(e2 < e1 / 30.0);
}

TEST_CASE("even power kernels are polynomial on the grid")
{
    Grid g = line_grid(5.0, 101);
    Eigen::MatrixXcd K = kernel_matrix(g, power_kernel(2));
    // rank 3: 1, x, x^2 in each variable
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(K);
    CHECK(svd.singularValues()(3) < 1e-12 * svd.singularValues()(0));
}
