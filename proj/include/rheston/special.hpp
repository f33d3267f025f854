#pragma once

namespace rheston {

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2. Relative accuracy is about 1e-15 on (0, 3).
double gamma_fn(double x);

double normal_pdf(double x);
double normal_cdf(double x);

}  // namespace rheston
