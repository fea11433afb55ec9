#include "polyprop/fit.hpp"

#include "polyprop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace polyprop {

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorCode::FitIllConditioned, "need at least two samples");
    const std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
            throw Error(ErrorCode::FitIllConditioned, "non-positive or non-finite sample");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) throw Error(ErrorCode::FitIllConditioned, "degenerate abscissae");
    LogLogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.samples = static_cast<int>(n);
    for (std::size_t i = 0; i < n; ++i)
        f.residual = std::max(f.residual, std::abs(ly[i] - f.intercept - f.slope * lx[i]));
    return f;
}

}  // namespace polyprop
