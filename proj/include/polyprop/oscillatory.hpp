#ifndef POLYPROP_OSCILLATORY_HPP
#define POLYPROP_OSCILLATORY_HPP

#include <complex>
#include <functional>
#include <limits>
#include <vector>

namespace polyprop {

using cplx = std::complex<double>;

/// Smooth step: 0 for s <= 0, 1 for s >= 1, C-infinity in between.
double smooth_step(double s);

/// chi(E) = 1 for E <= lambda0/2, 0 for E >= lambda0, smooth in between.
double cutoff_low(double E, double lambda0);

/// Amplitude f(lambda) of an oscillatory integral.
struct SymbolAmplitude {
    std::function<cplx(double)> eval;
    /// analytic continuation, valid for Re lambda >= continuation_from; needed for infinite support
    std::function<cplx(cplx)> continuation;
    double continuation_from = std::numeric_limits<double>::infinity();
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    /// symbol order b and number of controlled derivatives K
    double order = 0.0;
    int derivatives = 2;
    /// bound on the amplitude's own oscillation rate (e.g. r for a factor cos(lambda r))
    double frequency = 0.0;
    /// shortest length scale of the amplitude away from 0
    double scale = 1.0;
    /// extra panel breakpoints (cutoff edges and the like)
    std::vector<double> breakpoints;
};

enum class OscMethod { PanelFilon, RotatedTail, BruteForce };

const char* osc_method_name(OscMethod m);

struct OscResult {
    cplx value;
    double error = 0.0;
    long panels = 0;
};

/// I(t,x) = int e^{-i t lambda^{2m} + i lambda x} f(lambda) d lambda over the support of f.
OscResult eval_osc(double t, double x, const SymbolAmplitude& f, int m, OscMethod method = OscMethod::PanelFilon);

/// Estimates C_j = max over the grid of |f^{(j)}(lambda)| lambda^{j-b}, j = 0..K, by central differences.
std::vector<double> symbol_constants(const SymbolAmplitude& f, const std::vector<double>& lambda_grid);

enum class LemmaRegion { Inside, Outside };

struct DecayFit {
    LemmaRegion region = LemmaRegion::Inside;
    double exponent_t = 0.0;
    double exponent_x = 0.0;
    double constant = 0.0;
    double residual = 0.0;
    double predicted = 0.0;
    int samples = 0;
    std::vector<double> abscissae;
    std::vector<double> values;
};

struct LemmaSweep {
    /// t sweep at fixed x
    std::vector<double> t_grid;
    double x_fixed = 0.0;
    /// x sweep at fixed t
    std::vector<double> x_grid;
    double t_fixed = 1.0;
    /// t sweep for the rapidly decaying branch (high energy only, at x = 0)
    std::vector<double> k_grid;
};

struct LemmaReport {
    int m = 1;
    double b = 0.0;
    bool low_energy = true;
    /// low energy: t-slope inside |t|^{-1/2m}|x| < 1; high energy: t-slope of the |x| >~ |t| branch
    DecayFit t_fit;
    /// x-slope in the outside region
    DecayFit x_fit;
    /// high energy only: slope where |x| << |t|, fitted over values above 1e-11
    DecayFit k_fit;
};

/// Sweeps the model amplitude lambda^b chi(lambda) (low energy) or lambda^b (1 - chi(lambda))
/// (high energy, phase e^{-i(t lambda^{2m} + x lambda)}) and fits the decay exponents.
LemmaReport verify_lemma_bounds(int m, double b, const LemmaSweep& sweep, bool low_energy);

/// Dyadic sweeps that sit well inside each region for the given m. Low energy: t in [2^3, 2^10]
/// at x = 0 and x in [2^5, 2^12] at t = 2^12. High energy: t in [1, 2^7] at x = 2^14 and x in
/// [2^4, 2^11] at t = 1, one octave lower in x for m = 1 so the stationary point stays resolvable.
LemmaSweep default_lemma_sweep(int m, bool low_energy);

}  // namespace polyprop

#endif
