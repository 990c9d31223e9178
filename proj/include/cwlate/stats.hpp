#pragma once

#include <vector>

namespace cwlate {

double norm_cdf(double x);
// Inverse standard normal CDF (Wichura AS241, |error| < 1e-9).
double norm_quantile(double p);

double sample_sd(const std::vector<double>& v);
// Linear-interpolation quantile of a copy-sorted sample, p in [0,1].
double sample_quantile(std::vector<double> v, double p);
double interquartile_range(const std::vector<double>& v);

}  // namespace cwlate
