#include "polyprop/grid.hpp"

#include "polyprop/errors.hpp"

#include <boost/math/special_functions/bernoulli.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace polyprop {

const char* space_name(SpaceKind k)
{
    return k == SpaceKind::Line1D ? "line" : "radial";
}

Eigen::VectorXd Grid::sqrt_weights() const
{
    Eigen::VectorXd s(size());
    for (int i = 0; i < size(); ++i) s(i) = std::sqrt(w[i]);
    return s;
}

Eigen::VectorXd Grid::sample(const std::function<double(double)>& f) const
{
    Eigen::VectorXd u(size());
    for (int i = 0; i < size(); ++i) u(i) = std::sqrt(w[i]) * f(x[i]);
    return u;
}

Eigen::VectorXcd Grid::values(const Eigen::VectorXcd& u) const
{
    Eigen::VectorXcd f(size());
    for (int i = 0; i < size(); ++i) f(i) = u(i) / std::sqrt(w[i]);
    return f;
}

Grid line_grid(double half_width, int points)
{
    if (points < 3 || !(half_width > 0.0))
        throw Error(ErrorCode::GridTooCoarse, "line grid needs >= 3 points and positive width");
    Grid g;
    g.kind = SpaceKind::Line1D;
    g.extent = half_width;
    g.h = 2.0 * half_width / (points - 1);
    g.x.resize(points);
    g.w.assign(points, g.h);
    for (int i = 0; i < points; ++i) g.x[i] = -half_width + i * g.h;
    g.w.front() *= 0.5;
    g.w.back() *= 0.5;
    return g;
}

Grid radial_grid(double radius, int points)
{
    if (points < 3 || !(radius > 0.0))
        throw Error(ErrorCode::GridTooCoarse, "radial grid needs >= 3 points and positive radius");
    Grid g;
    g.kind = SpaceKind::RadialS;
    g.extent = radius;
    // high orders put large ghost weights next to the origin and spoil the operator norm
    g.kink_order = 6;
    g.h = radius / points;
    g.x.resize(points);
    g.w.resize(points);
    for (int i = 0; i < points; ++i) {
        g.x[i] = (i + 0.5) * g.h;
        g.w[i] = 4.0 * std::numbers::pi * g.x[i] * g.x[i] * g.h;
    }
    return g;
}

namespace {

using mpf = boost::multiprecision::cpp_bin_float_50;

std::vector<double> solve_corrections(int q)
{
    // sum_p c_p p^s = B_{s+1}/(s+1) for odd s, 0 for even s, s = 0..q-1
    std::vector<std::vector<mpf>> a(q, std::vector<mpf>(q + 1));
    for (int s = 0; s < q; ++s) {
        for (int p = 0; p < q; ++p) a[s][p] = (s == 0) ? mpf(1) : boost::multiprecision::pow(mpf(p), s);
        a[s][q] = (s % 2 == 1) ? boost::math::bernoulli_b2n<mpf>((s + 1) / 2) / mpf(s + 1) : mpf(0);
    }
    for (int c = 0; c < q; ++c) {
        int piv = c;
        for (int r = c + 1; r < q; ++r)
            if (abs(a[r][c]) > abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (int r = 0; r < q; ++r) {
            if (r == c) continue;
            mpf f = a[r][c] / a[c][c];
            for (int k = c; k <= q; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<double> out(q);
    for (int p = 0; p < q; ++p) out[p] = static_cast<double>(a[p][q] / a[p][p]);
    return out;
}

}  // namespace

const std::vector<double>& kink_corrections(int q)
{
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(q);
    if (it == cache.end()) it = cache.emplace(q, q > 0 ? solve_corrections(q) : std::vector<double>{}).first;
    return it->second;
}

Eigen::MatrixXcd kernel_matrix(const Grid& g, const RadialKernel& k)
{
    const int N = g.size();
    const Eigen::VectorXd sw = g.sqrt_weights();
    const auto& c = kink_corrections(k.kink ? g.kink_order : 0);
    const int q = static_cast<int>(c.size());
    auto corr = [&](int d) { return d < q ? (d == 0 ? 2.0 : 1.0) * c[d] : 0.0; };
    Eigen::MatrixXcd K(N, N);
    if (g.kind == SpaceKind::Line1D) {
        if (!k.value) throw Error(ErrorCode::BackendUnsupported, "line kernel needs a value function");
        const auto& kv = k.kink_value ? k.kink_value : k.value;
        std::vector<std::complex<double>> row(N), krow(q, 0.0);
        for (int d = 0; d < N; ++d) row[d] = k.value(d * g.h);
        for (int d = 0; d < std::min(q, N); ++d) krow[d] = kv(d * g.h);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                int d = std::abs(i - j);
                std::complex<double> val = row[d];
                if (d < q) val += corr(d) * krow[d];
                K(i, j) = sw(i) * val * sw(j);
            }
        return K;
    }
    if (!k.primitive) throw Error(ErrorCode::BackendUnsupported, "radial kernel needs a primitive");
    const auto& kp = k.kink_primitive ? k.kink_primitive : k.primitive;
    std::vector<std::complex<double>> psum(2 * N), pdiff(N);
    for (int s = 0; s < 2 * N; ++s) psum[s] = k.primitive((s + 1) * g.h);
    for (int d = 0; d < N; ++d) pdiff[d] = k.primitive(d * g.h);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            int d = std::abs(i - j);
            // r_i + r_j = (i + j + 1) h
            std::complex<double> avg = (psum[i + j] - pdiff[d]) / (2.0 * g.x[i] * g.x[j]);
            if (d < q) {
                const std::complex<double> kavg =
                    k.kink_primitive ? (kp(g.x[i] + g.x[j]) - kp(d * g.h)) / (2.0 * g.x[i] * g.x[j]) : avg;
                avg += corr(d) * kavg;
            }
            K(i, j) = sw(i) * avg * sw(j);
        }
    // Near the origin the inner stencil of the kink at r_i runs past r' = 0. The integrand on
    // (0, r_i) is even in r', so the stencil continues with its smooth extension, where the
    // primitive is taken at r_i - r' < 0.
    for (int i = 0; i < std::min(q, N); ++i)
        for (int p = i + 1; p < q && p - i - 1 < N; ++p) {
            const int j = p - i - 1;
            std::complex<double> ext = (kp(g.x[i] + g.x[j]) - kp(g.x[i] - g.x[j])) / (2.0 * g.x[i] * g.x[j]);
            K(i, j) += sw(i) * ext * sw(j) * c[p];
        }
    K = (0.5 * (K + K.transpose())).eval();
    return K;
}

RadialKernel power_kernel(int j)
{
    RadialKernel k;
    k.value = [j](double s) { return std::complex<double>(j == 0 ? 1.0 : std::pow(s, j)); };
    k.primitive = [j](double s) { return std::complex<double>(std::pow(s, j + 2) / (j + 2)); };
    k.kink = (j % 2 != 0);
    return k;
}

}  // namespace polyprop
