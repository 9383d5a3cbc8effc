#include "lrpseg/beta.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lrpseg/error.hpp"

namespace lrpseg {

namespace {

void check_domain(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) throw DataError("beta distribution: x = " + std::to_string(x) + " outside [0, 1]");
    if (!(a > 0.0 && b > 0.0)) throw DataError("beta distribution: shape parameters must be positive");
}

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double incomplete_beta_cf(double x, double a, double b) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double log_beta_pdf(double x, double alpha, double beta) {
    check_domain(x, alpha, beta);
    const double lx = alpha == 1.0 ? 0.0 : (alpha - 1.0) * std::log(x);
    const double l1x = beta == 1.0 ? 0.0 : (beta - 1.0) * std::log1p(-x);
    return lx + l1x - log_beta_fn(alpha, beta);
}

double beta_pdf(double x, double alpha, double beta) { return std::exp(log_beta_pdf(x, alpha, beta)); }

double beta_cdf(double x, double alpha, double beta) {
    check_domain(x, alpha, beta);
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double front =
        std::exp(alpha * std::log(x) + beta * std::log1p(-x) - log_beta_fn(alpha, beta));
    if (x < (alpha + 1.0) / (alpha + beta + 2.0)) return front * incomplete_beta_cf(x, alpha, beta) / alpha;
    return 1.0 - front * incomplete_beta_cf(1.0 - x, beta, alpha) / beta;
}

}  // namespace lrpseg
