#include "polyprop/oscillatory.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/fit.hpp"
#include "polyprop/model.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace polyprop {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr long kPanelBudget = 4000000;

struct Rule {
    std::vector<double> x, w;
};

template <int N>
Rule make_rule()
{
    using G = boost::math::quadrature::gauss<double, N>;
    Rule r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            r.x.push_back(0.0);
            r.w.push_back(w[i]);
            continue;
        }
        r.x.push_back(a[i]);
        r.w.push_back(w[i]);
        r.x.push_back(-a[i]);
        r.w.push_back(w[i]);
    }
    return r;
}

const Rule& rule20()
{
    static const Rule r = make_rule<20>();
    return r;
}

const Rule& rule10()
{
    static const Rule r = make_rule<10>();
    return r;
}

struct Acc {
    // absolute tolerance per unit length of a panel
    double density = 0.0;
    cplx sum = 0.0;
    double err = 0.0;
    long panels = 0;
};

// Integrates g over [a,b] with a 20-point rule, bisecting while the 10-point rule disagrees.
// floor: relative accuracy attainable given rounding of the phase on this panel
template <class G>
void panel(const G& g, double a, double b, Acc& acc, double floor = 1e-14, int depth = 0)
{
    if (++acc.panels > kPanelBudget) throw Error(ErrorCode::PhaseUnderResolved, "panel budget exceeded");
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const Rule& r20 = rule20();
    const Rule& r10 = rule10();
    cplx i20 = 0.0, i10 = 0.0;
    double mass = 0.0;
    for (std::size_t k = 0; k < r20.x.size(); ++k) {
        cplx v = g(c + h * r20.x[k]);
        i20 += r20.w[k] * v;
        mass += r20.w[k] * std::abs(v);
    }
    for (std::size_t k = 0; k < r10.x.size(); ++k) i10 += r10.w[k] * g(c + h * r10.x[k]);
    i20 *= h;
    i10 *= h;
    mass *= h;
    const double diff = std::abs(i20 - i10);
    if (diff <= floor * mass || diff <= acc.density * (b - a) || depth >= 24) {
        acc.sum += i20;
        acc.err += diff;
        return;
    }
    --acc.panels;
    panel(g, a, c, acc, floor, depth + 1);
    panel(g, c, b, acc, floor, depth + 1);
}

struct Setup {
    double t, x;
    int m;
    const SymbolAmplitude* f;

    double rate(double lam) const
    {
        return std::abs(2.0 * m * t * std::pow(lam, 2 * m - 1) - x) + f->frequency;
    }
    cplx phase(cplx lam) const
    {
        return cplx(0, 1) * (x * lam - t * std::pow(lam, 2 * m));
    }
    double floor(double b) const
    {
        return std::max(1e-14, 4e-16 * (std::abs(t) * std::pow(b, 2 * m) + std::abs(x) * b));
    }
    double stationary() const
    {
        if (x * t <= 0.0) return -1.0;
        return std::pow(x / (2.0 * m * t), 1.0 / (2 * m - 1));
    }
    // start of the steepest-descent ray for an infinite tail
    double ray_start() const
    {
        double s = std::pow((std::abs(x) + f->frequency) / (2.0 * m * t), 1.0 / (2 * m - 1));
        double L = std::max({2.0 * s, f->lo, f->continuation_from, 1.0});
        for (double b : f->breakpoints) L = std::max(L, b);
        return L;
    }
};

std::vector<double> segment_points(const Setup& S, double a, double b)
{
    std::vector<double> pts{a, b};
    double st = S.stationary();
    if (st > a && st < b) pts.push_back(st);
    for (double p : S.f->breakpoints)
        if (p > a && p < b) pts.push_back(p);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

void real_segment(const Setup& S, double a, double b, Acc& acc)
{
    auto g = [&](double lam) { return std::exp(S.phase(lam)) * S.f->eval(lam); };
    double u = a;
    if (u == 0.0) {
        // geometric grading toward the possible lambda^b singularity at 0
        double first = std::min({b, kPi / std::max(S.rate(0.0), 1e-300), S.f->scale, 0.25});
        double lo = first;
        const double tiny = 1e-17;
        while (true) {
            double next = 0.25 * lo;
            panel(g, next, lo, acc, S.floor(lo));
            lo = next;
            if (std::abs(S.f->eval(lo)) * lo < tiny * std::max(1.0, std::abs(acc.sum)) || lo < 1e-300) break;
        }
        u = first;
    }
    while (u < b) {
        double L = std::min({b - u, kPi / std::max(S.rate(u), 1e-300), S.f->scale});
        double re = S.rate(u + L);
        if (re * L > 1.5 * kPi) L = std::min(L, kPi / re);
        if (b - u - L < 1e-12 * b) L = b - u;
        panel(g, u, u + L, acc, S.floor(u + L));
        u += L;
    }
}

void ray_tail(const Setup& S, double start, Acc& acc)
{
    if (!S.f->continuation) throw Error(ErrorCode::BackendUnsupported, "infinite support needs a continuation");
    const cplx dir = std::polar(1.0, -kPi / (4.0 * S.m));
    auto lam = [&](double s) { return start + dir * s; };
    auto g = [&](double s) {
        cplx l = lam(s);
        return std::exp(S.phase(l)) * S.f->continuation(l) * dir;
    };
    double s = 0.0, peak = 0.0;
    for (int step = 0; step < 100000; ++step) {
        cplx l = lam(s);
        double rate = std::abs(2.0 * S.m * S.t * std::pow(l, 2 * S.m - 1) - S.x) + S.f->frequency;
        double L = std::min(kPi / std::max(rate, 1e-300), S.f->scale);
        L = std::max(L, 1e-3 * (1.0 + s));
        panel(g, s, s + L, acc, S.floor(std::abs(lam(s + L))));
        s += L;
        double mag = std::abs(g(s));
        peak = std::max(peak, mag);
        if (mag < 1e-18 * std::max(peak, 1e-300) || mag == 0.0) return;
    }
    throw Error(ErrorCode::PhaseUnderResolved, "ray tail did not decay");
}

double amplitude_density(const SymbolAmplitude& f, double a, double b)
{
    double peak = 0.0;
    for (int i = 0; i <= 256; ++i) {
        double l = a + (b - a) * (i + 0.5) / 257.0;
        peak = std::max(peak, std::abs(f.eval(l)));
    }
    return 1e-16 * std::max(peak, 1e-300);
}

OscResult panel_method(const Setup& S)
{
    Acc acc;
    const SymbolAmplitude& f = *S.f;
    double b = f.hi;
    if (!std::isfinite(b)) b = S.ray_start();
    acc.density = amplitude_density(f, f.lo, b);
    auto pts = segment_points(S, f.lo, b);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) real_segment(S, pts[i], pts[i + 1], acc);
    if (!std::isfinite(f.hi)) ray_tail(S, b, acc);
    return {acc.sum, acc.err, acc.panels};
}

OscResult rotated_method(const Setup& S)
{
    const SymbolAmplitude& f = *S.f;
    if (!f.continuation || f.continuation_from > f.lo || std::isfinite(f.hi))
        throw Error(ErrorCode::BackendUnsupported, "rotated contour needs an entire amplitude on [lo, inf)");
    Acc acc;
    acc.density = 1e-16 * std::abs(f.continuation(cplx(f.lo + 1.0)));
    ray_tail(S, f.lo, acc);
    return {acc.sum, acc.err, acc.panels};
}

// Trapezoid with two Richardson steps on [a,b], step at most hmax.
template <class G>
std::pair<cplx, double> romberg(const G& g, double a, double b, double hmax)
{
    long N = std::max(4L, static_cast<long>(std::ceil((b - a) / hmax)));
    double h = (b - a) / N;
    cplx T1 = 0.5 * (g(a) + g(b));
    for (long i = 1; i < N; ++i) T1 += g(a + i * h);
    T1 *= h;
    auto refine = [&](cplx T, long n, double hh) {
        cplx s = 0.0;
        for (long i = 0; i < n; ++i) s += g(a + (i + 0.5) * hh);
        return 0.5 * T + 0.5 * hh * s;
    };
    cplx T2 = refine(T1, N, h);
    cplx T3 = refine(T2, 2 * N, 0.5 * h);
    cplx R1 = (4.0 * T2 - T1) / 3.0, R2 = (4.0 * T3 - T2) / 3.0;
    cplx R = (16.0 * R2 - R1) / 15.0;
    return {R, std::abs(R - R2)};
}

OscResult brute_method(const Setup& S)
{
    const SymbolAmplitude& f = *S.f;
    double b = std::isfinite(f.hi) ? f.hi : S.ray_start();
    auto g = [&](double lam) { return std::exp(S.phase(lam)) * f.eval(lam); };
    double wmax = std::max(S.rate(f.lo), S.rate(b));
    double hmax = std::min(2.0 * kPi / (100.0 * std::max(wmax, 1e-300)), f.scale / 100.0);
    auto [v, e] = romberg(g, f.lo, b, hmax);
    OscResult out{v, e, 0};
    if (!std::isfinite(f.hi)) {
        if (!f.continuation) throw Error(ErrorCode::BackendUnsupported, "infinite support needs a continuation");
        const cplx dir = std::polar(1.0, -kPi / (4.0 * S.m));
        auto gr = [&](double s) {
            cplx l = b + dir * s;
            return std::exp(S.phase(l)) * f.continuation(l) * dir;
        };
        // find where the ray integrand has decayed
        double s = 0.0, peak = std::abs(gr(0.0)), step = 0.01;
        while (std::abs(gr(s)) > 1e-18 * peak) {
            s += step;
            peak = std::max(peak, std::abs(gr(s)));
            step *= 1.05;
        }
        double rate = std::abs(2.0 * S.m * S.t * std::pow(cplx(b + s), 2 * S.m - 1)) + std::abs(S.x) + f.frequency;
        auto [vt, et] = romberg(gr, 0.0, s, 2.0 * kPi / (100.0 * rate));
        out.value += vt;
        out.error += et;
    }
    return out;
}

}  // namespace

double smooth_step(double s)
{
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

double cutoff_low(double E, double lambda0)
{
    return 1.0 - smooth_step((E - 0.5 * lambda0) / (0.5 * lambda0));
}

const char* osc_method_name(OscMethod m)
{
    switch (m) {
    case OscMethod::PanelFilon: return "panel";
    case OscMethod::RotatedTail: return "rotated";
    case OscMethod::BruteForce: return "brute";
    }
    return "unknown";
}

OscResult eval_osc(double t, double x, const SymbolAmplitude& f, int m, OscMethod method)
{
    if (t == 0.0) throw Error(ErrorCode::ZeroTime, "oscillatory integral at t = 0");
    if (t < 0.0) {
        SymbolAmplitude g = f;
        g.eval = [e = f.eval](double l) { return std::conj(e(l)); };
        if (f.continuation)
            g.continuation = [c = f.continuation](cplx l) { return std::conj(c(std::conj(l))); };
        OscResult r = eval_osc(-t, -x, g, m, method);
        r.value = std::conj(r.value);
        return r;
    }
    Setup S{t, x, m, &f};
    switch (method) {
    case OscMethod::PanelFilon: return panel_method(S);
    case OscMethod::RotatedTail: return rotated_method(S);
    case OscMethod::BruteForce: return brute_method(S);
    }
    return {};
}

std::vector<double> symbol_constants(const SymbolAmplitude& f, const std::vector<double>& lambda_grid)
{
    const int K = std::min(f.derivatives, 4);
    std::vector<double> C(K + 1, 0.0);
    for (double lam : lambda_grid) {
        const double h = 1e-3 * lam;
        cplx v[5];
        for (int k = -2; k <= 2; ++k) v[k + 2] = f.eval(lam + k * h);
        cplx d[5];
        d[0] = v[2];
        d[1] = (v[3] - v[1]) / (2 * h);
        d[2] = (v[3] - 2.0 * v[2] + v[1]) / (h * h);
        d[3] = (v[4] - 2.0 * v[3] + 2.0 * v[1] - v[0]) / (2 * h * h * h);
        d[4] = (v[4] - 4.0 * v[3] + 6.0 * v[2] - 4.0 * v[1] + v[0]) / (h * h * h * h);
        for (int j = 0; j <= K; ++j) C[j] = std::max(C[j], std::abs(d[j]) * std::pow(lam, j - f.order));
    }
    return C;
}

namespace {

DecayFit make_fit(LemmaRegion region, const std::vector<double>& xs, const std::vector<double>& vs, double predicted,
                  bool along_t, double floor = 0.0)
{
    DecayFit d;
    d.region = region;
    d.predicted = predicted;
    std::vector<double> fx, fv;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        d.abscissae.push_back(xs[i]);
        d.values.push_back(vs[i]);
        if (vs[i] > floor) {
            fx.push_back(xs[i]);
            fv.push_back(vs[i]);
        }
    }
    auto f = fit_loglog(fx, fv);
    (along_t ? d.exponent_t : d.exponent_x) = f.slope;
    d.constant = std::exp(f.intercept);
    d.residual = f.residual;
    d.samples = f.samples;
    return d;
}

}  // namespace

LemmaReport verify_lemma_bounds(int m, double b, const LemmaSweep& sweep, bool low_energy)
{
    if (m < 1) throw Error(ErrorCode::NonPositiveOrder, "m must be positive");
    if (sweep.t_grid.size() < 8 || sweep.x_grid.size() < 8)
        throw Error(ErrorCode::FitIllConditioned, "decay fits need at least 8 samples");
    const double edge = std::pow(0.5, 1.0 / (2 * m));
    SymbolAmplitude f;
    f.order = b;
    f.derivatives = 4;
    f.breakpoints = {edge};
    f.scale = 0.05;
    if (low_energy) {
        f.eval = [=](double l) { return cplx(std::pow(l, b) * cutoff_low(std::pow(l, 2 * m), 1.0)); };
        f.lo = 0.0;
        f.hi = 1.0;
    } else {
        f.eval = [=](double l) { return cplx(std::pow(l, b) * (1.0 - cutoff_low(std::pow(l, 2 * m), 1.0))); };
        f.continuation = [=](cplx l) { return std::pow(l, b); };
        f.continuation_from = 1.0;
        f.lo = edge;
    }
    // the bounds are for the worse of the two signs of x; the high-energy phase carries -x
    auto mag = [&](double t, double x) {
        double xs = low_energy ? x : -x;
        double a = std::abs(eval_osc(t, xs, f, m).value);
        if (x == 0.0) return a;
        return std::max(a, std::abs(eval_osc(t, -xs, f, m).value));
    };
    LemmaReport rep;
    rep.m = m;
    rep.b = b;
    rep.low_energy = low_energy;
    const double mub = mu(b, m);
    std::vector<double> vt, vx;
    for (double t : sweep.t_grid) vt.push_back(mag(t, sweep.x_fixed));
    for (double x : sweep.x_grid) vx.push_back(mag(sweep.t_fixed, x));
    if (low_energy) {
        rep.t_fit = make_fit(LemmaRegion::Inside, sweep.t_grid, vt, -(1.0 + b) / (2.0 * m), true);
        rep.x_fit = make_fit(LemmaRegion::Outside, sweep.x_grid, vx, -mub, false);
    } else {
        rep.t_fit = make_fit(LemmaRegion::Outside, sweep.t_grid, vt, -0.5 + mub, true);
        rep.x_fit = make_fit(LemmaRegion::Outside, sweep.x_grid, vx, -mub, false);
        if (sweep.k_grid.size() >= 2) {
            std::vector<double> vk;
            for (double t : sweep.k_grid) vk.push_back(mag(t, 0.0));
            rep.k_fit = make_fit(LemmaRegion::Inside, sweep.k_grid, vk, -f.derivatives, true, 1e-11);
        }
    }
    return rep;
}

LemmaSweep default_lemma_sweep(int m, bool low_energy)
{
    LemmaSweep s;
    if (low_energy) {
        for (int k = 3; k <= 10; ++k) s.t_grid.push_back(std::ldexp(1.0, k));
        s.t_fixed = std::ldexp(1.0, 12);
        for (int k = 5; k <= 12; ++k) s.x_grid.push_back(std::ldexp(1.0, k));
        return s;
    }
    const int shift = m == 1 ? 1 : 0;
    for (int k = 0; k <= 7; ++k) s.t_grid.push_back(std::ldexp(1.0, k));
    s.x_fixed = std::ldexp(1.0, m == 1 ? 9 : 14);
    for (int k = 4; k <= 11; ++k) s.x_grid.push_back(std::ldexp(1.0, k - shift));
    s.t_fixed = 1.0;
    for (int k = 0; k <= 6; ++k) s.k_grid.push_back(std::ldexp(1.0, k));
    return s;
}

}  // namespace polyprop
