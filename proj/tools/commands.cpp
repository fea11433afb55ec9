#include "cli.hpp"

#include "polyprop/errors.hpp"
#include "polyprop/minverse.hpp"
#include "polyprop/oscillatory.hpp"
#include "polyprop/parallel.hpp"
#include "polyprop/perturbed.hpp"
#include "polyprop/propagator.hpp"
#include "polyprop/resolvent.hpp"
#include "polyprop/spectral.hpp"

#include <CLI11.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#ifndef POLYPROP_VERSION
#define POLYPROP_VERSION "unknown"
#endif

namespace polyprop::cli {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v)
{
    return csv_number(v);
}

std::string rational_str(const Rational& q)
{
    return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

/// Collects outputs and invariant results of one run.
class Run {
public:
    explicit Run(RunConfig c) : cfg(std::move(c)) {}

    RunConfig cfg;
    /// what the run is doing, reported with any error
    std::string stage = "validating the configuration";
    json summary = json::object();

    /// The first output of a run goes to stdout when no --out directory is given.
    void emit(const std::string& name, const std::string& content)
    {
        if (cfg.out.empty()) {
            if (!printed_) std::cout << content;
            printed_ = true;
            return;
        }
        std::ofstream f(std::filesystem::path(cfg.out) / name, std::ios::binary);
        if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write " + name + " in " + cfg.out);
        f << content;
        outputs_.push_back(name);
    }

    void plot(const std::string& name, const std::string& title, const std::string& xl, const std::string& yl,
              const std::vector<Series>& s, bool logx, bool logy)
    {
        if (cfg.svg && !cfg.out.empty()) emit(name, svg_plot(title, xl, yl, s, logx, logy));
    }

    void invariant(const std::string& name, bool pass, double value)
    {
        invariants_.push_back({{"name", name}, {"pass", pass}, {"value", std::isfinite(value) ? json(value) : json()}});
    }

    bool all_pass() const
    {
        for (const auto& i : invariants_)
            if (!i.at("pass").get<bool>()) return false;
        return true;
    }

    void write_manifest(const std::string& status, const std::string& error, double seconds)
    {
        if (cfg.out.empty()) return;
        json m = {{"tool", "polyprop"},
                  {"version", POLYPROP_VERSION},
                  {"libraries",
                   {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION}}},
                  {"threads", thread_count()},
                  {"config", to_json(cfg)},
                  {"status", status},
                  {"outputs", outputs_},
                  {"invariants", invariants_},
                  {"summary", summary},
                  {"elapsed_seconds", seconds}};
        if (!error.empty()) m["error"] = error;
        std::ofstream f(std::filesystem::path(cfg.out) / "manifest.json");
        f << m.dump(2) << "\n";
    }

private:
    bool printed_ = false;
    std::vector<std::string> outputs_;
    std::vector<json> invariants_;
};

std::vector<double> dyadic_between(double lo, double hi)
{
    if (!(lo > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidConfig, "lambda range must satisfy 0 < min <= max");
    std::vector<double> v;
    for (int e = static_cast<int>(std::ceil(std::log2(lo) - 1e-12)); std::ldexp(1.0, e) <= hi * (1 + 1e-12); ++e)
        v.push_back(std::ldexp(1.0, e));
    if (v.empty()) throw Error(ErrorCode::InvalidConfig, "no power of two between lambda-min and lambda-max");
    return v;
}

std::vector<double> r_grid(const RunConfig& c, bool skip_zero)
{
    if (c.r_count < 2 || !(c.r_max > 0.0)) throw Error(ErrorCode::InvalidConfig, "need r-max > 0 and r-count >= 2");
    std::vector<double> r;
    for (int i = 0; i < c.r_count; ++i) {
        const double v = c.r_max * i / (c.r_count - 1);
        if (v == 0.0 && skip_zero) continue;
        r.push_back(v);
    }
    return r;
}

Grid spatial_grid(const RunConfig& c, const ModelParams& p, int default_N)
{
    const double L = c.grid_L.value_or(20.0);
    const int N = c.grid_N.value_or(default_N);
    if (!(L > 0.0) || N < 8) throw Error(ErrorCode::InvalidConfig, "grid needs L > 0 and N >= 8");
    return p.n() == 1 ? line_grid(L, N) : radial_grid(L, N);
}

void cmd_kernel(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, {});
    auto p = make_params(c.m, c.n);
    std::vector<Series> series;
    if (c.free) {
        Table t{{"m", "n", "t", "r", "re", "im", "envelope_ratio"}, {}};
        const auto ts = half_dyadic_times(c.t_max.value_or(16.0));
        const auto rs = r_grid(c, false);
        run.stage = "sampling the free propagator";
        double sup = 0.0;
        for (double tv : ts) {
            Series s{"t=" + fmt(tv), {}, {}};
            for (double r : rs) {
                const cplx K = free_kernel(p, tv, r);
                const double e = envelope_ratio(p, tv, r, K);
                sup = std::max(sup, e);
                t.rows.push_back({std::to_string(c.m), std::to_string(c.n), fmt(tv), fmt(r), fmt(K.real()),
                                  fmt(K.imag()), fmt(e)});
                s.x.push_back(r);
                s.y.push_back(std::abs(K));
            }
            series.push_back(s);
        }
        run.invariant("envelope_ratio finite", std::isfinite(sup), sup);
        run.summary["envelope_sup"] = sup;
        run.emit("free_kernel.csv", t.str());
        run.plot("free_kernel.svg", "|K(t, r)|", "r", "|K|", series, false, false);
        return;
    }
    Table t{{"m", "n", "sign", "lambda", "r", "re", "im"}, {}};
    const auto ls = dyadic_between(c.lambda_min.value_or(0.0625), c.lambda_max.value_or(4.0));
    const auto rs = r_grid(c, c.n > 1);
    run.stage = "evaluating resolvent kernels";
    double conj_res = 0.0;
    for (double l : ls) {
        Series s{"lambda=" + fmt(l), {}, {}};
        for (double r : rs) {
            const cplx a = higher_kernel(p, Sign::Plus, l, r), b = higher_kernel(p, Sign::Minus, l, r);
            conj_res = std::max(conj_res, std::abs(b - std::conj(a)) / std::max(std::abs(a), 1e-300));
            for (auto [name, v] : {std::pair{"plus", a}, {"minus", b}})
                t.rows.push_back({std::to_string(c.m), std::to_string(c.n), name, fmt(l), fmt(r), fmt(v.real()),
                                  fmt(v.imag())});
            s.x.push_back(r);
            s.y.push_back(std::abs(a));
        }
        series.push_back(s);
    }
    run.invariant("minus branch is the conjugate of plus", conj_res < 1e-12, conj_res);
    run.emit("kernel.csv", t.str());
    run.plot("kernel.svg", "|R0+(lambda^2m)(r)|", "r", "|kernel|", series, false, true);
}

void cmd_coeffs(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, {"theta"});
    auto p = make_params(c.m, c.n);
    const int theta = static_cast<int>(std::lround(tol_value(c, "theta", 4 * c.m - c.n + 1)));
    run.stage = "extracting expansion coefficients";
    auto e = expansion_coefficients(p, theta);
    Table t{{"j", "re_a_plus", "im_a_plus", "re_a", "im_a", "residual"}, {}};
    Series s{"|a_j|", {}, {}};
    double phase = 0.0;
    for (std::size_t j = 0; j < e.a_plus.size(); ++j) {
        t.rows.push_back({std::to_string(j), fmt(e.a_plus[j].real()), fmt(e.a_plus[j].imag()), fmt(e.a[j].real()),
                          fmt(e.a[j].imag()), fmt(e.phase_residual[j])});
        phase = std::max(phase, e.phase_residual[j]);
        s.x.push_back(static_cast<double>(j));
        s.y.push_back(std::abs(e.a[j]));
    }
    Table b{{"l", "b"}, {}};
    for (std::size_t l = 0; l < e.b.size(); ++l) b.rows.push_back({std::to_string(l), fmt(e.b[l])});
    run.invariant("phase relation residual < 1e-10", phase < 1e-10, phase);
    run.invariant("coefficients of absent powers vanish", e.spurious < 1e-9, e.spurious);
    run.invariant("agreement with the series formula", e.formula_residual < 1e-10, e.formula_residual);
    run.invariant("b_l real", e.b_imag_residual < 1e-10, e.b_imag_residual);
    run.summary["theta"] = theta;
    run.summary["b"] = e.b;
    run.emit("coeffs.csv", t.str());
    run.emit("coeffs_b.csv", b.str());
    run.plot("coeffs.svg", "|a_j|", "j", "|a_j|", {s}, false, true);
}

json resonance_json(const ResonanceReport& r)
{
    json dims = json::object();
    for (const auto& [j, d] : r.dims) dims[j.str()] = d;
    return {{"k", r.k},
            {"dims", dims},
            {"oracle_k", r.oracle_k},
            {"oracle_agreement", r.oracle_agreement},
            {"gap", r.gap}};
}

ProjectionOptions projection_options(const RunConfig& c)
{
    ProjectionOptions o;
    o.rel_threshold = tol_value(c, "rel_threshold", o.rel_threshold);
    o.ambiguity_factor = tol_value(c, "ambiguity_factor", o.ambiguity_factor);
    return o;
}

void cmd_classify(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, {"rel_threshold", "ambiguity_factor"});
    auto p = make_params(c.m, c.n);
    auto V = make_potential(c.potential, p);
    Grid g = spatial_grid(c, p, c.n == 1 ? 801 : 800);
    run.stage = "classifying the zero-energy resonance";
    auto rep = classify_resonance(g, p, V, projection_options(c));
    json j = resonance_json(rep);
    j["m"] = c.m;
    j["n"] = c.n;
    j["potential"] = c.potential;
    j["grid"] = {{"space", space_name(g.kind)}, {"extent", g.extent}, {"points", g.size()}};
    Table t{{"table", "index", "singular_value"}, {}};
    std::vector<Series> series;
    for (const auto& tab : rep.singular_values) {
        Series s{tab.label, {}, {}};
        for (std::size_t i = 0; i < tab.values.size(); ++i) {
            t.rows.push_back({tab.label, std::to_string(i), fmt(tab.values[i])});
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(tab.values[i]);
        }
        series.push_back(s);
    }
    run.invariant("shooting oracle agrees", rep.oracle_agreement, rep.oracle_k);
    if (rep.k > 0) run.invariant("projections at k - 1 are incomplete (gap > 1e-4)", rep.gap > 1e-4, rep.gap);
    run.summary = j;
    run.emit("resonance.json", j.dump(2) + "\n");
    run.emit("singular_values.csv", t.str());
    run.plot("singular_values.svg", "singular values", "index", "sigma", series, false, true);
}

int classified_kind(Run& run, const ModelParams& p, const Potential& V)
{
    if (run.cfg.k) return *run.cfg.k;
    run.stage = "classifying the potential to choose the kind";
    const double L = run.cfg.grid_L.value_or(20.0);
    const int N = std::max(run.cfg.grid_N.value_or(801), 801);
    const int k = classify_resonance(line_grid(L, N), p, V, projection_options(run.cfg)).k;
    run.summary["classified_k"] = k;
    return k;
}

void cmd_minv_expand(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, {"zero_tol", "rel_threshold", "ambiguity_factor"});
    auto p = make_params(c.m, c.n);
    auto V = make_potential(c.potential, p);
    Grid g = spatial_grid(c, p, 401);
    check_backend(g, p);
    if (g.kind != SpaceKind::Line1D) throw Error(ErrorCode::BackendUnsupported, "minv-expand needs n = 1");
    const int k = classified_kind(run, p, V);
    run.stage = "preparing the projection family";
    auto S = prepare_inversion(g, p, V, k, projection_options(c), tol_value(c, "zero_tol", 1e-8));
    const auto ls = dyadic_between(c.lambda_min.value_or(1.0 / 256), c.lambda_max.value_or(0.125));
    run.stage = "sampling the expansion of M inverse";
    auto rep = expansion(S, ls);
    Table t{{"lambda", "sign", "i", "j", "block_norm", "gamma_norm", "reconstruction_residual"}, {}};
    std::map<std::string, Series> gamma;
    for (const auto& s : rep.samples)
        for (const auto& [ij, bn] : s.block_norm) {
            auto g_it = s.gamma_norm.find(ij);
            t.rows.push_back({fmt(s.lambda), sign_name(s.sign), ij.first.str(), ij.second.str(), fmt(bn),
                              g_it == s.gamma_norm.end() ? "" : fmt(g_it->second), fmt(s.reconstruction_residual)});
            if (g_it != s.gamma_norm.end() && s.sign == Sign::Plus) {
                auto& ser = gamma[ij.first.str() + "," + ij.second.str()];
                ser.name = "Gamma(" + ij.first.str() + "," + ij.second.str() + ")";
                ser.x.push_back(s.lambda);
                ser.y.push_back(g_it->second);
            }
        }
    run.stage = "checking the reconstruction identity";
    double rec = 0.0;
    for (double l : {0.5, 0.25})
        rec = std::max(rec, reconstruction_identity_residual(S.grid, S.params, S.samples, S.layout, Sign::Plus, l));
    json js = {{"k", k}, {"reconstruction_identity", rec}, {"zeroed_max", S.zeroed_max}, {"violations", S.violations}};
    js["lambda0"] = rep.lambda0 ? json(*rep.lambda0) : json();
    for (Sign sign : {Sign::Plus, Sign::Minus}) {
        json side = {{"remainder_slope", rep.remainder_slope.at(sign)},
                     {"zero_block_error", rep.zero_block_error.at(sign)},
                     {"off_block_max", rep.off_block_max.at(sign)}};
        json slopes = json::array();
        for (const auto& [ij, slope] : rep.gamma_slope.at(sign)) {
            bool special = false;
            for (auto j : rep.special) special = special || (ij.first == j && ij.second == j);
            slopes.push_back({{"i", ij.first.str()}, {"j", ij.second.str()}, {"slope", slope}, {"special", special}});
            run.invariant(std::string(sign_name(sign)) + " Gamma(" + ij.first.str() + "," + ij.second.str() +
                              ") slope >= " + (special ? "0.85" : "0.35"),
                          slope >= (special ? 0.85 : 0.35), slope);
        }
        side["gamma_slopes"] = slopes;
        js[sign_name(sign)] = side;
        run.invariant(std::string(sign_name(sign)) + " remainder slope >= 0.35", rep.remainder_slope.at(sign) >= 0.35,
                      rep.remainder_slope.at(sign));
        run.invariant(std::string(sign_name(sign)) + " zero block matches (QT0Q)^-1 to 1e-6",
                      rep.zero_block_error.at(sign) < 1e-6, rep.zero_block_error.at(sign));
    }
    run.invariant("reconstruction identity < 1e-8 at lambda 0.5, 0.25", rec < 1e-8, rec);
    run.invariant("vanishing blocks certified", S.violations.empty(), static_cast<double>(S.violations.size()));
    run.summary = js;
    run.emit("minv_expand.csv", t.str());
    run.emit("minv_summary.json", js.dump(2) + "\n");
    std::vector<Series> series;
    for (auto& [key, s] : gamma) series.push_back(s);
    run.plot("gamma.svg", "||Gamma_ij(lambda)||", "lambda", "norm", series, true, true);
}

StoneOptions stone_options(const RunConfig& c, double h, double lambda_max, int kind)
{
    StoneOptions o;
    o.h = tol_value(c, "h", h);
    o.lambda_max = c.lambda_max.value_or(lambda_max);
    o.panel_phase = tol_value(c, "panel_phase", o.panel_phase);
    o.split_energy = tol_value(c, "split_energy", o.split_energy);
    o.support_width = tol_value(c, "support_width", o.support_width);
    o.scaled_below = tol_value(c, "scaled_below", o.scaled_below);
    o.kind = kind;
    return o;
}

const std::vector<std::string> kStoneTols = {"h", "panel_phase", "split_energy", "support_width", "scaled_below",
                                             "oracle_budget"};

struct Sample {
    double t, x, y;
    cplx K;
    std::optional<cplx> oracle;
};

Table sample_table(const ModelParams& p, int k, const std::vector<Sample>& samples)
{
    Table t{{"t", "x", "y", "re", "im", "envelope_ratio", "oracle_re", "oracle_im", "abs_err"}, {}};
    for (const auto& s : samples) {
        const double ratio = std::abs(s.K) / envelope(p, k, s.t, std::abs(s.x - s.y));
        std::vector<std::string> row{fmt(s.t), fmt(s.x), fmt(s.y), fmt(s.K.real()), fmt(s.K.imag()), fmt(ratio)};
        if (s.oracle)
            row.insert(row.end(), {fmt(s.oracle->real()), fmt(s.oracle->imag()), fmt(std::abs(s.K - *s.oracle))});
        else
            row.insert(row.end(), {"", "", ""});
        t.rows.push_back(row);
    }
    return t;
}

void cmd_propagate(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, kStoneTols);
    auto p = make_params(c.m, c.n);
    auto V = make_potential(c.potential, p);
    const double t_max = c.t_max.value_or(4.0);
    const int kind = c.k.value_or(-1);
    auto opt = stone_options(c, 0.125, 6.0, kind);
    run.stage = "building the Stone table";
    auto T = stone_table(p, V, c.points, t_max, opt);
    const auto ts = half_dyadic_times(t_max);

    std::optional<EigenOracle> O;
    double budget = 0.0;
    if (c.oracle) {
        run.stage = "diagonalizing the oracle";
        OracleOptions oo;
        oo.L = c.grid_L.value_or(1280.0);
        oo.N = c.grid_N.value_or(static_cast<int>(std::lround(3.0 * oo.L)));
        O = eigendecomposition_oracle(p, V, oo);
        // no wave below the grid cutoff wraps around the box before this time
        const double kmax = kPi * oo.N / (2.0 * oo.L);
        budget = oo.L / (p.m() * std::pow(kmax, 2 * p.m() - 1));
        run.summary["oracle"] = {{"L", oo.L},
                                 {"N", oo.N},
                                 {"t_budget", budget},
                                 {"dropped_negative", O->dropped_negative},
                                 {"dropped_localized", O->dropped_localized},
                                 {"localized_energy", oo.localized_energy},
                                 {"localized_mass", oo.localized_mass}};
    }
    run.stage = "evaluating the kernel";
    std::vector<Sample> samples;
    double sym = 0.0, split = 0.0, err = 0.0;
    Series s00{"|K(t,0,0)|", {}, {}}, o00{"oracle", {}, {}};
    for (double t : ts)
        for (double x : c.points)
            for (double y : c.points) {
                Sample s{t, x, y, stone_kernel(T, t, x, y), {}};
                sym = std::max(sym, std::abs(stone_kernel(T, t, y, x) - s.K));
                split = std::max(split, std::abs(low_kernel(T, t, x, y) + high_kernel(T, t, x, y).total() - s.K));
                if (O && t <= budget) {
                    s.oracle = O->kernel(t, x, y);
                    err = std::max(err, std::abs(*s.oracle - s.K));
                }
                if (x == 0.0 && y == 0.0) {
                    s00.x.push_back(t);
                    s00.y.push_back(std::abs(s.K));
                    if (s.oracle) {
                        o00.x.push_back(t);
                        o00.y.push_back(std::abs(*s.oracle));
                    }
                }
                samples.push_back(s);
            }
    run.invariant("symmetry K(t,x,y) = K(t,y,x) < 1e-8", sym < 1e-8, sym);
    run.invariant("low + high = total < 1e-8", split < 1e-8, split);
    if (O) {
        const double b = tol_value(c, "oracle_budget", 1e-4);
        run.invariant("oracle agreement within budget", err < b, err);
    }
    run.summary["stone"] = {{"h", opt.h},
                            {"lambda_max", opt.lambda_max},
                            {"panel_phase", opt.panel_phase},
                            {"kind", opt.kind},
                            {"nodes", T.lambda.size()},
                            {"solve_residual", T.solve_residual},
                            {"scaled_nodes", T.scaled_nodes}};
    run.emit("propagate.csv", sample_table(p, std::max(kind, 0), samples).str());
    run.plot("propagate.svg", "|K(t,0,0)|", "t", "|K|", {s00, o00}, true, true);
}

void cmd_decay_fit(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, kStoneTols);
    auto p = make_params(c.m, c.n);
    auto V = make_potential(c.potential, p);
    const bool zero = c.potential.value("form", "") == "zero";
    const int k = zero ? c.k.value_or(0) : classified_kind(run, p, V);
    const double t_max = c.t_max.value_or(16.0);
    auto opt = stone_options(c, 0.1, 5.0, zero ? -1 : k);
    run.stage = "building the Stone table";
    auto T = stone_table(p, V, c.points, t_max, opt);
    const auto ts = half_dyadic_times(t_max);
    run.stage = "evaluating the kernel";
    std::vector<double> dist;
    for (double x : c.points)
        for (double y : c.points) dist.push_back(std::abs(x - y));
    std::vector<std::vector<cplx>> S;
    std::vector<Sample> samples;
    for (double t : ts) {
        std::vector<cplx> row;
        for (double x : c.points)
            for (double y : c.points) {
                row.push_back(stone_kernel(T, t, x, y));
                samples.push_back({t, x, y, row.back(), {}});
            }
        S.push_back(row);
    }
    run.stage = "fitting the decay exponent";
    auto r = decay_fit(p, k, ts, S, dist);
    json j = {{"k", k},
              {"fitted_h", r.fitted_h},
              {"predicted_h", rational_str(r.predicted_h)},
              {"predicted_h_value", to_double(r.predicted_h)},
              {"residual", r.residual},
              {"envelope_sup", r.envelope_sup},
              {"t", r.t},
              {"sup_abs", r.sup_abs}};
    run.invariant("fitted h within 0.15 of h(m,n,k)", std::abs(r.fitted_h - to_double(r.predicted_h)) < 0.15,
                  r.fitted_h);
    run.invariant("envelope_sup finite", std::isfinite(r.envelope_sup), r.envelope_sup);
    run.summary = j;
    run.emit("decay_fit.json", j.dump(2) + "\n");
    run.emit("decay_samples.csv", sample_table(p, k, samples).str());
    Series fit{"sup |K|", r.t, r.sup_abs};
    Series ref{"t^-h(m,n,k)", {}, {}};
    for (double t : r.t) {
        ref.x.push_back(t);
        ref.y.push_back(r.sup_abs.front() * std::pow(t / r.t.front(), -to_double(r.predicted_h)));
    }
    run.plot("decay_fit.svg", "sup |K(t,x,y)|", "t", "sup |K|", {fit, ref}, true, true);
}

void cmd_lemma_check(Run& run)
{
    auto& c = run.cfg;
    check_tol_names(c, {});
    if (c.m < 1) throw Error(ErrorCode::NonPositiveOrder, "m must be positive");
    Table t{{"m", "b", "region", "fitted_t_slope", "fitted_x_slope", "predicted_t", "predicted_x", "residual"}, {}};
    std::vector<Series> series;
    run.stage = "sweeping oscillatory integrals";
    for (double b : c.b) {
        const double mub = mu(b, c.m);
        auto lo = verify_lemma_bounds(c.m, b, default_lemma_sweep(c.m, true), true);
        auto hi = verify_lemma_bounds(c.m, b, default_lemma_sweep(c.m, false), false);
        const std::string ms = std::to_string(c.m), bs = fmt(b);
        auto row = [&](const char* region, const DecayFit& tf, const DecayFit& xf, double pt, double px) {
            t.rows.push_back({ms, bs, region, fmt(tf.exponent_t), fmt(xf.exponent_x), fmt(pt), fmt(px),
                              fmt(std::max(tf.residual, xf.residual))});
            run.invariant(std::string(region) + " t slope (m=" + ms + ", b=" + bs + ")",
                          std::abs(tf.exponent_t - pt) < 0.15, tf.exponent_t);
            run.invariant(std::string(region) + " x slope (m=" + ms + ", b=" + bs + ")",
                          std::abs(xf.exponent_x - px) < 0.15, xf.exponent_x);
        };
        row("low", lo.t_fit, lo.x_fit, -(1.0 + b) / (2.0 * c.m), -mub);
        row("high", hi.t_fit, hi.x_fit, -0.5 + mub, -mub);
        t.rows.push_back({ms, bs, "high_rapid", fmt(hi.k_fit.exponent_t), "", "", "", fmt(hi.k_fit.residual)});
        series.push_back({"low, b=" + bs, lo.t_fit.abscissae, lo.t_fit.values});
        series.push_back({"high, b=" + bs, hi.t_fit.abscissae, hi.t_fit.values});
    }
    run.emit("lemma_check.csv", t.str());
    run.plot("lemma_check.svg", "|I(t, x fixed)|", "t", "|I|", series, true, true);
}

void cmd_selftest(Run& run)
{
    check_tol_names(run.cfg, {});
    auto p = make_params(2, 1);
    Table t{{"check", "pass", "value"}, {}};
    auto record = [&](const std::string& name, bool pass, double value) {
        run.invariant(name, pass, value);
        t.rows.push_back({name, pass ? "true" : "false", fmt(value)});
    };
    run.stage = "running self checks";

    record("h(2,1,0) = 1/4", decay_exponent(p, 0) == Rational(1, 4), to_double(decay_exponent(p, 0)));

    double conj = 0.0, ss = 0.0;
    for (double tv : {0.5, 2.0})
        for (double r : {0.0, 1.5}) {
            conj = std::max(conj, std::abs(free_kernel(p, -tv, r) - std::conj(free_kernel(p, tv, r))));
            const cplx a = free_kernel(p, tv, r * std::pow(tv, 0.25));
            ss = std::max(ss, std::abs(a - std::pow(tv, -0.25) * free_kernel(p, 1.0, r)));
        }
    record("free kernel time reversal", conj < 1e-12, conj);
    record("free kernel self-similarity", ss < 1e-8, ss);

    double part = 0.0;
    for (double r : {0.0, 2.0})
        part = std::max(part, std::abs(band_kernel(p, 1.0, r, Band::Low, 2.0) + band_kernel(p, 1.0, r, Band::High, 2.0) -
                                       free_kernel(p, 1.0, r)));
    record("low + high bands = free kernel", part < 1e-8, part);

    Potential zero{"zero", [](double) { return 0.0; }};
    StoneOptions o;
    o.h = 0.25;
    o.lambda_max = 4.0;
    auto Z = stone_table(p, zero, {0.0, 2.0}, 2.0, o);
    auto hz = high_kernel(Z, 1.0, 0.0, 2.0);
    const bool free_exact = low_kernel(Z, 1.0, 0.0, 2.0) == band_kernel(p, 1.0, 2.0, Band::Low, o.split_energy) &&
                            hz.omega0 == band_kernel(p, 1.0, 2.0, Band::High, o.split_energy) &&
                            hz.omega1 == 0.0 && hz.omega2 == 0.0 && hz.remainder == 0.0;
    record("V = 0 gives the free kernel exactly", free_exact, 0.0);

    o.lambda_max = 3.0;
    auto B = stone_table(p, gauss_well(-0.1), {0.0, 2.0}, 1.0, o);
    const double tr = std::abs(low_kernel(B, -1.0, 0.0, 2.0) - std::conj(low_kernel(B, 1.0, 0.0, 2.0)));
    record("low kernel time reversal for real V", tr < 1e-12, tr);

    OracleOptions oo;
    oo.L = 40.0;
    oo.N = 120;
    auto O = eigendecomposition_oracle(p, zero, oo);
    const double w = std::abs(O.retained_weight(1.0, 0.0) - O.retained_weight(3.0, 0.0));
    record("oracle unitarity on the retained modes", w < 1e-12 * O.retained_weight(1.0, 0.0), w);

    const auto ts = half_dyadic_times(16.0);
    std::vector<std::vector<cplx>> S;
    for (double tv : ts) S.push_back({free_kernel(p, tv, 0.0), free_kernel(p, tv, 2.0)});
    auto fit = decay_fit(p, 0, ts, S, {0.0, 2.0});
    record("free decay slope 1/4 within 0.04", std::abs(fit.fitted_h - 0.25) < 0.04, fit.fitted_h);

    run.emit("selftest.csv", t.str());
}

struct Flags {
    std::string config_file;
    int m = 2, n = 1, k = 0;
    std::string potential;
    double grid_L = 0, lambda_min = 0, lambda_max = 0, t_max = 0, r_max = 0;
    int grid_N = 0, r_count = 0;
    std::string out;
    std::vector<std::string> tol;
    std::vector<double> b, points;
};

struct Options {
    CLI::Option *config, *m, *n, *k, *potential, *grid_L, *grid_N, *lambda_min, *lambda_max, *t_max, *out, *svg, *tol,
        *free, *r_max, *r_count, *b, *points, *no_oracle;
};

Options add_options(CLI::App* sc, Flags& f)
{
    Options o{};
    o.config = sc->add_option("--config", f.config_file, "JSON run config; flags given on the command line win");
    o.m = sc->add_option("--m", f.m, "order of (-Delta)^m");
    o.n = sc->add_option("--n", f.n, "odd dimension");
    o.k = sc->add_option("--k", f.k, "resonance kind (skips classification)");
    o.potential = sc->add_option("--potential", f.potential,
                                 "zero | gauss_well:EPS | resonant_bump | JSON object | JSON file");
    o.grid_L = sc->add_option("--grid-L", f.grid_L, "grid half width");
    o.grid_N = sc->add_option("--grid-N", f.grid_N, "grid points");
    o.lambda_min = sc->add_option("--lambda-min", f.lambda_min, "smallest lambda");
    o.lambda_max = sc->add_option("--lambda-max", f.lambda_max, "largest lambda");
    o.t_max = sc->add_option("--t-max", f.t_max, "largest time");
    o.out = sc->add_option("--out", f.out, "output directory; without it the main table goes to stdout");
    o.svg = sc->add_flag("--svg", "also write SVG plots (needs --out)");
    o.tol = sc->add_option("--tol", f.tol, "tolerance override NAME=VAL (repeatable)");
    o.free = sc->add_flag("--free", "kernel: sample the free propagator");
    o.r_max = sc->add_option("--r-max", f.r_max, "kernel: largest r");
    o.r_count = sc->add_option("--r-count", f.r_count, "kernel: number of r samples");
    o.b = sc->add_option("--b", f.b, "lemma-check: symbol orders");
    o.points = sc->add_option("--points", f.points, "propagate/decay-fit: spatial sample points");
    o.no_oracle = sc->add_flag("--no-oracle", "propagate: skip the eigendecomposition oracle");
    return o;
}

RunConfig build_config(const std::string& command, const Flags& f, const Options& o)
{
    RunConfig c;
    if (o.config->count()) {
        std::ifstream in(f.config_file);
        if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + f.config_file);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
        }
        c = config_from_json(j);
        if (!c.command.empty() && c.command != command)
            throw Error(ErrorCode::InvalidConfig, "config is for '" + c.command + "', not '" + command + "'");
    }
    c.command = command;
    if (o.m->count()) c.m = f.m;
    if (o.n->count()) c.n = f.n;
    if (o.k->count()) c.k = f.k;
    if (o.potential->count()) c.potential = parse_potential_spec(f.potential);
    if (o.grid_L->count()) c.grid_L = f.grid_L;
    if (o.grid_N->count()) c.grid_N = f.grid_N;
    if (o.lambda_min->count()) c.lambda_min = f.lambda_min;
    if (o.lambda_max->count()) c.lambda_max = f.lambda_max;
    if (o.t_max->count()) c.t_max = f.t_max;
    if (o.out->count()) c.out = f.out;
    if (o.svg->count()) c.svg = true;
    if (o.free->count()) c.free = true;
    if (o.r_max->count()) c.r_max = f.r_max;
    if (o.r_count->count()) c.r_count = f.r_count;
    if (o.b->count()) c.b = f.b;
    if (o.points->count()) c.points = f.points;
    if (o.no_oracle->count()) c.oracle = false;
    for (const auto& s : f.tol) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidConfig, "--tol expects NAME=VAL, got " + s);
        try {
            std::size_t used = 0;
            const double v = std::stod(s.substr(eq + 1), &used);
            if (used != s.size() - eq - 1) throw std::invalid_argument(s);
            c.tol[s.substr(0, eq)] = v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "--tol value is not a number: " + s);
        }
    }
    if (c.k && *c.k < 0) throw Error(ErrorCode::KindOutOfRange, "k must be non-negative");
    if (c.t_max && !(*c.t_max >= 1.0)) throw Error(ErrorCode::InvalidConfig, "t-max must be at least 1");
    return c;
}

int exit_code(ErrorCode code)
{
    if (is_threshold_error(code)) return 3;
    if (is_fit_error(code)) return 4;
    return 2;
}

}  // namespace

int dispatch(int argc, char** argv)
{
    CLI::App app{"Resolvent kernels, resonance classification and propagator kernels for (-Delta)^m + V"};
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"kernel", "free resolvent kernels on a (lambda, r) grid, or the free propagator with --free"},
        {"coeffs", "small-lambda expansion coefficients of the free resolvent"},
        {"classify", "zero-energy resonance kind of a potential"},
        {"minv-expand", "block expansion of M(lambda)^-1 near zero"},
        {"propagate", "perturbed propagator kernel against the eigendecomposition oracle"},
        {"decay-fit", "dispersive decay exponent of the perturbed propagator"},
        {"lemma-check", "decay exponents of model oscillatory integrals"},
        {"selftest", "quick consistency checks"},
    };
    std::map<std::string, std::pair<Flags, Options>> parsed;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        auto* sc = app.add_subcommand(name, help);
        auto& slot = parsed[name];
        slot.second = add_options(sc, slot.first);
        subs[name] = sc;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    std::string command;
    for (const auto& [name, sc] : subs)
        if (sc->parsed()) command = name;

    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<Run> run;
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    auto fail = [&](const std::string& msg, int code) {
        std::cerr << "polyprop " << command << ": " << msg;
        if (run) std::cerr << " (while " << run->stage << ")";
        std::cerr << "\n";
        if (run) {
            try {
                run->write_manifest("error", msg, elapsed());
            } catch (...) {
            }
        }
        return code;
    };
    try {
        const auto& [flags, opts] = parsed.at(command);
        run = std::make_unique<Run>(build_config(command, flags, opts));
        if (!run->cfg.out.empty()) std::filesystem::create_directories(run->cfg.out);
        if (command == "kernel") cmd_kernel(*run);
        else if (command == "coeffs") cmd_coeffs(*run);
        else if (command == "classify") cmd_classify(*run);
        else if (command == "minv-expand") cmd_minv_expand(*run);
        else if (command == "propagate") cmd_propagate(*run);
        else if (command == "decay-fit") cmd_decay_fit(*run);
        else if (command == "lemma-check") cmd_lemma_check(*run);
        else if (command == "selftest") cmd_selftest(*run);
        const bool ok = run->all_pass();
        run->write_manifest(ok ? "ok" : "invariant failed", "", elapsed());
        if (command == "selftest" && !ok) return fail("a self check failed", 1);
        return 0;
    } catch (const Error& e) {
        return fail(e.what(), exit_code(e.code()));
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(e.what(), 2);
    } catch (const std::exception& e) {
        return fail(std::string("internal error: ") + e.what(), 1);
    }
}

}  // namespace polyprop::cli
