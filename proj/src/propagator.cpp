#include "polyprop/propagator.hpp"

#include "polyprop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace polyprop {

namespace {

constexpr double kPi = std::numbers::pi;

void check_dim(const ModelParams& p)
{
    if (p.n() != 1 && p.n() != 3)
        throw Error(ErrorCode::BackendUnsupported, "radial reduction implemented for n = 1 and n = 3");
}

// radial weight W(rho) with K = c_n int_0^inf e^{-it rho^2m} W(rho) d rho
template <class T>
T radial_weight(int n, double r, T rho)
{
    if (n == 1) return std::cos(rho * r);
    T z = rho * r;
    if (std::abs(z) < 1e-4) return rho * rho * (1.0 - z * z / 6.0 + z * z * z * z / 120.0);
    return rho * std::sin(z) / r;
}

double radial_constant(int n)
{
    // (2 pi)^{-n} |S^{n-1}|: 1/pi for n = 1, 1/(2 pi^2) for n = 3
    return n == 1 ? 1.0 / kPi : 1.0 / (2.0 * kPi * kPi);
}

SymbolAmplitude amplitude(const ModelParams& p, double r, Band band, double lambda0)
{
    const int n = p.n(), m = p.m();
    SymbolAmplitude f;
    f.order = n - 1;
    f.frequency = r;
    auto w = [n, r](double l) { return cplx(radial_weight(n, r, l)); };
    auto wc = [n, r](cplx l) { return radial_weight(n, r, l); };
    if (band == Band::Full) {
        f.eval = w;
        f.continuation = wc;
        f.continuation_from = 0.0;
        return f;
    }
    const double edge_hi = std::pow(lambda0, 1.0 / (2 * m));
    const double edge_lo = std::pow(0.5 * lambda0, 1.0 / (2 * m));
    f.breakpoints = {edge_lo, edge_hi};
    f.scale = std::min(1.0, 0.05 * edge_hi);
    auto chi = [m, lambda0](double l) { return cutoff_low(std::pow(l, 2 * m), lambda0); };
    if (band == Band::Low) {
        f.hi = edge_hi;
        f.eval = [=](double l) { return chi(l) * w(l); };
        return f;
    }
    f.eval = [=](double l) { return (1.0 - chi(l)) * w(l); };
    f.lo = edge_lo;
    f.continuation = wc;
    f.continuation_from = edge_hi;
    return f;
}

}  // namespace

cplx band_kernel(const ModelParams& p, double t, double r, Band band, double lambda0, OscMethod method)
{
    check_dim(p);
    if (t == 0.0) throw Error(ErrorCode::ZeroTime, "propagator kernel at t = 0");
    if (!(lambda0 > 0.0) && band != Band::Full) throw Error(ErrorCode::InvalidConfig, "lambda0 must be positive");
    r = std::abs(r);
    auto f = amplitude(p, r, band, lambda0);
    return radial_constant(p.n()) * eval_osc(t, 0.0, f, p.m(), method).value;
}

cplx free_kernel(const ModelParams& p, double t, double r, OscMethod method)
{
    return band_kernel(p, t, r, Band::Full, 1.0, method);
}

double envelope_ratio(const ModelParams& p, double t, double r, cplx value)
{
    const double m = p.m(), n = p.n();
    const double at = std::abs(t);
    return std::abs(value) * std::pow(at, n / (2 * m)) *
           std::pow(1.0 + std::pow(at, -1.0 / (2 * m)) * std::abs(r), to_double(spatial_exponent(p)));
}

PropagatorSample propagator_sample(const ModelParams& p, double t, double r)
{
    PropagatorSample s;
    s.t = t;
    s.r = r;
    s.value = free_kernel(p, t, r);
    s.envelope_ratio = envelope_ratio(p, t, r, s.value);
    return s;
}

std::vector<PropagatorSample> envelope_samples(const ModelParams& p, const std::vector<double>& t_grid,
                                               const std::vector<double>& s_grid)
{
    std::vector<PropagatorSample> out;
    out.reserve(t_grid.size() * s_grid.size());
    for (double t : t_grid)
        for (double s : s_grid) out.push_back(propagator_sample(p, t, s * std::pow(std::abs(t), 1.0 / (2 * p.m()))));
    return out;
}

double envelope_sweep(const ModelParams& p, const std::vector<double>& t_grid, const std::vector<double>& s_grid)
{
    double sup = 0.0;
    for (const auto& s : envelope_samples(p, t_grid, s_grid)) sup = std::max(sup, s.envelope_ratio);
    return sup;
}

}  // namespace polyprop
