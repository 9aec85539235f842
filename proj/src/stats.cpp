#include "fbl/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace fbl {

double ks_statistic(std::vector<double>& sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    return d;
}

double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.3) {
        // Alternate series: P(K <= x) = sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
        const double pi = boost::math::constants::pi<double>();
        double s = 0.0;
        for (int k = 1; k < 50; ++k) {
            s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi * pi / (8.0 * lambda * lambda));
        }
        return 1.0 - std::sqrt(2.0 * pi) / lambda * s;
    }
    double s = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

double chi_square_sf(double stat, double dof) {
    if (stat <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

double bessel3_cdf(double y, double t) {
    if (y <= 0.0) return 0.0;
    const double z = y / std::sqrt(t);
    const double c = std::sqrt(2.0 / boost::math::constants::pi<double>());
    return boost::math::erf(z / std::sqrt(2.0)) - c * z * std::exp(-0.5 * z * z);
}

double bessel3_pdf(double y, double t) {
    if (y <= 0.0) return 0.0;
    const double c = std::sqrt(2.0 / boost::math::constants::pi<double>());
    return c * y * y / std::pow(t, 1.5) * std::exp(-0.5 * y * y / t);
}

double normal_cdf(double x, double variance) {
    return 0.5 * boost::math::erfc(-x / std::sqrt(2.0 * variance));
}

}  // namespace fbl
