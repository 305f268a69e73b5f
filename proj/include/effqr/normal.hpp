#pragma once

namespace effqr {

// Standard normal distribution helpers.
double normal_cdf(double z);
double normal_pdf(double z);
double normal_quantile(double p);

}  // namespace effqr
