#pragma once

#include <functional>
#include <vector>

namespace fbl {

/// sup |F_n - F| for the sample (sorted in place).
double ks_statistic(std::vector<double>& sample, const std::function<double(double)>& cdf);

/// P(sqrt(n) D_n > lambda) in the Kolmogorov limit.
double kolmogorov_sf(double lambda);

/// Upper tail of the chi-square distribution with k degrees of freedom.
double chi_square_sf(double stat, double dof);

/// CDF of the 3-dimensional Bessel process started at 0, at time t.
double bessel3_cdf(double y, double t);
/// Density of the same law.
double bessel3_pdf(double y, double t);

double normal_cdf(double x, double variance);

}  // namespace fbl
