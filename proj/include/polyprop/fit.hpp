#ifndef POLYPROP_FIT_HPP
#define POLYPROP_FIT_HPP

#include <vector>

namespace polyprop {

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // max |log y - fitted| over the samples
    int samples = 0;
};

/// Least-squares line through (log x, log y). Requires x, y > 0 and at least two
/// samples; throws FitIllConditioned otherwise.
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace polyprop

#endif
