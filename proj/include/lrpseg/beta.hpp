#pragma once

namespace lrpseg {

// f(x; a, b) = x^(a-1) (1-x)^(b-1) / B(a, b), B(a, b) = G(a) G(b) / G(a + b),
// evaluated in log space. Throws DataError outside 0 <= x <= 1, a > 0, b > 0.
double beta_pdf(double x, double alpha, double beta);
double log_beta_pdf(double x, double alpha, double beta);

// Regularized incomplete beta I_x(a, b) by continued fraction (modified Lentz).
double beta_cdf(double x, double alpha, double beta);

}  // namespace lrpseg
