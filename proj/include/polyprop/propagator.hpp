#ifndef POLYPROP_PROPAGATOR_HPP
#define POLYPROP_PROPAGATOR_HPP

#include "polyprop/model.hpp"
#include "polyprop/oscillatory.hpp"

#include <vector>

namespace polyprop {

struct PropagatorSample {
    double t = 1.0;
    double r = 0.0;
    cplx value;
    double envelope_ratio = 0.0;
};

enum class Band { Full, Low, High };

/// Kernel of e^{-it(-Delta)^m} at distance r, for n = 1 or 3.
cplx free_kernel(const ModelParams& p, double t, double r, OscMethod method = OscMethod::PanelFilon);

/// Kernel of e^{-it(-Delta)^m} chi((-Delta)^m) (Low) or (1 - chi) (High), chi = cutoff_low(., lambda0).
cplx band_kernel(const ModelParams& p, double t, double r, Band band, double lambda0,
                 OscMethod method = OscMethod::PanelFilon);

/// |K| |t|^{n/2m} (1 + |t|^{-1/2m} r)^{n(m-1)/(2m-1)}
double envelope_ratio(const ModelParams& p, double t, double r, cplx value);

PropagatorSample propagator_sample(const ModelParams& p, double t, double r);

/// Samples on t_grid x s_grid with r = s |t|^{1/2m}; returns every sample.
std::vector<PropagatorSample> envelope_samples(const ModelParams& p, const std::vector<double>& t_grid,
                                               const std::vector<double>& s_grid);

/// sup of envelope_ratio over the sweep, r = s |t|^{1/2m}.
double envelope_sweep(const ModelParams& p, const std::vector<double>& t_grid, const std::vector<double>& s_grid);

}  // namespace polyprop

#endif
