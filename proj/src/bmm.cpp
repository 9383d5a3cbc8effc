#include <algorithm>
#include <cmath>

#include "lrpseg/beta.hpp"
#include "lrpseg/segmentation.hpp"

namespace lrpseg {

namespace {

// Below this a component is a point mass in [0, 1] units.
constexpr double kMinVariance = 1e-12;

BetaComponent moment_fit(std::span<const double> x, std::span<const double> r, const BmmOptions& opts,
                         const char* which) {
    double mass = 0.0, s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mass += r[i];
        s += r[i] * x[i];
    }
    if (mass < 1e-12) throw MomentFitError(std::string(which) + " component has no responsibility mass");
    const double m = s / mass;
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) var += r[i] * (x[i] - m) * (x[i] - m);
    var /= mass;
    if (!(var > kMinVariance) || !(var < m * (1.0 - m))) {
        throw MomentFitError(std::string(which) + " component has degenerate variance");
    }
    const double common = m * (1.0 - m) / var - 1.0;
    BetaComponent c;
    c.weight = mass / static_cast<double>(x.size());
    c.alpha = std::clamp(m * common, opts.min_shape, opts.max_shape);
    c.beta = std::clamp((1.0 - m) * common, opts.min_shape, opts.max_shape);
    return c;
}

// Smallest x with CDF(x) >= q, by bisection (CDF is monotone).
double beta_quantile(double q, double a, double b) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (beta_cdf(mid, a, b) < q) lo = mid;
        else hi = mid;
    }
    return hi;
}

}  // namespace

BmmFit fit_bmm(std::span<const double> values, const BmmOptions& opts) {
    const std::size_t n = values.size();
    if (n < 2) throw DataError("BMM fit needs at least two values");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 1.0)) throw DataError("BMM input values must lie in [0, 1]");
        x[i] = std::clamp(values[i], opts.edge, 1.0 - opts.edge);
    }

    // Hard isodata split seeds the first M-step.
    std::vector<double> rd(n), rb(n);
    const double t = isodata_threshold(x).threshold;
    for (std::size_t i = 0; i < n; ++i) {
        rd[i] = x[i] > t ? 1.0 : 0.0;
        rb[i] = 1.0 - rd[i];
    }

    BmmFit fit;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        BetaComponent bg = moment_fit(x, rb, opts, "background");
        BetaComponent dm = moment_fit(x, rd, opts, "damage");
        if (dm.mean() < bg.mean()) std::swap(bg, dm);
        const double wsum = bg.weight + dm.weight;
        bg.weight /= wsum;
        dm.weight /= wsum;
        fit.mixture.components = {bg, dm};
        fit.iterations = it + 1;

        const double damage_mean = dm.mean();
        const double bg_cut = beta_quantile(opts.background_quantile, bg.alpha, bg.beta);
        const double lwb = std::log(bg.weight);
        const double lwd = std::log(dm.weight);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double lb = lwb + log_beta_pdf(x[i], bg.alpha, bg.beta);
            const double ld = lwd + log_beta_pdf(x[i], dm.alpha, dm.beta);
            const double m = std::max(lb, ld);
            const double lse = m + std::log(std::exp(lb - m) + std::exp(ld - m));
            ll += lse;
            if (x[i] > damage_mean) rd[i] = 1.0;
            else if (x[i] <= bg_cut) rd[i] = 0.0;
            else rd[i] = std::exp(ld - lse);
            rb[i] = 1.0 - rd[i];
        }
        const bool done = !fit.log_likelihood.empty() &&
                          std::abs(ll - fit.log_likelihood.back()) < opts.tolerance * std::abs(ll);
        fit.log_likelihood.push_back(ll);
        if (done) break;
    }
    fit.damage_posterior = std::move(rd);
    return fit;
}

}  // namespace lrpseg
