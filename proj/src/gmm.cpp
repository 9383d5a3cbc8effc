#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "lrpseg/error.hpp"
#include "lrpseg/segmentation.hpp"

namespace lrpseg {

namespace {

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::size_t nearest(std::span<const double> centers, double v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < centers.size(); ++c)
        if (std::abs(v - centers[c]) < std::abs(v - centers[best])) best = c;
    return best;
}

constexpr std::size_t kKmeansRestarts = 10;

struct Collapse {};

// EM on data already mapped to [0, 1].
GmmFit fit_normalized(std::span<const double> u, std::uint64_t seed, const GmmOptions& opts) {
    constexpr std::size_t K = 3;
    const std::size_t n = u.size();
    const auto centers = kmeans_1d(u, K, seed, opts.kmeans_iterations);

    GaussianMixture gm;
    {
        std::array<double, K> sum{}, sq{};
        std::array<std::size_t, K> count{};
        for (double v : u) {
            const std::size_t c = nearest(centers, v);
            sum[c] += v;
            sq[c] += v * v;
            ++count[c];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (count[k] == 0) throw Collapse{};
            const double m = sum[k] / static_cast<double>(count[k]);
            gm.components[k].weight = static_cast<double>(count[k]) / static_cast<double>(n);
            gm.components[k].mean = m;
            gm.components[k].variance = std::max(sq[k] / static_cast<double>(count[k]) - m * m, opts.variance_floor);
        }
    }

    GmmFit fit;
    fit.seed_used = seed;
    std::vector<std::array<double, K>> resp(n);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, K> lj{};
            for (std::size_t k = 0; k < K; ++k)
                lj[k] = std::log(gm.components[k].weight) + gm.log_pdf(k, u[i]);
            const double lse = log_sum_exp(lj);
            ll += lse;
            for (std::size_t k = 0; k < K; ++k) resp[i][k] = std::exp(lj[k] - lse);
        }
        const bool done = !fit.log_likelihood.empty() &&
                          std::abs(ll - fit.log_likelihood.back()) < opts.tolerance * std::abs(ll);
        fit.log_likelihood.push_back(ll);
        if (done) break;

        for (std::size_t k = 0; k < K; ++k) {
            double nk = 0.0, s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i][k];
                s += resp[i][k] * u[i];
            }
            if (nk < 1e-12) throw Collapse{};
            const double m = s / nk;
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) v += resp[i][k] * (u[i] - m) * (u[i] - m);
            v /= nk;
            if (!std::isfinite(v)) throw Collapse{};
            gm.components[k] = {nk / static_cast<double>(n), m, std::max(v, opts.variance_floor)};
        }
    }
    fit.mixture = gm;
    return fit;
}

}  // namespace

double GaussianMixture::log_pdf(std::size_t k, double x) const {
    const auto& c = components.at(k);
    const double d = x - c.mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * c.variance) - d * d / (2.0 * c.variance);
}

double GaussianMixture::log_likelihood(std::span<const double> values) const {
    double ll = 0.0;
    for (double x : values) {
        std::array<double, 3> lj{};
        for (std::size_t k = 0; k < 3; ++k) lj[k] = std::log(components[k].weight) + log_pdf(k, x);
        ll += log_sum_exp(lj);
    }
    return ll;
}

std::vector<double> GaussianMixture::posterior(std::size_t k, std::span<const double> values) const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::array<double, 3> lj{};
        for (std::size_t c = 0; c < 3; ++c) lj[c] = std::log(components[c].weight) + log_pdf(c, values[i]);
        out[i] = std::exp(lj[k] - log_sum_exp(lj));
    }
    return out;
}

std::size_t GaussianMixture::densest_at(double x) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < components.size(); ++k)
        if (log_pdf(k, x) > log_pdf(best, x)) best = k;
    return best;
}

std::vector<double> kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                              std::size_t iterations) {
    const std::size_t n = values.size();
    if (k == 0 || n < k) throw DataError("k-means needs at least " + std::to_string(k) + " values");
    if (std::set<double>(values.begin(), values.end()).size() < k) {
        throw DataError("k-means needs at least " + std::to_string(k) + " distinct values");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> best;
    double best_inertia = std::numeric_limits<double>::infinity();
    std::vector<double> d2(n);
    for (std::size_t restart = 0; restart < kKmeansRestarts; ++restart) {
        // k-means++: each further center drawn with probability proportional
        // to the squared distance from the nearest chosen one.
        std::vector<double> centers{values[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]};
        while (centers.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = values[i] - centers[nearest(centers, values[i])];
                d2[i] = d * d;
                total += d2[i];
            }
            double pick = std::uniform_real_distribution<double>(0.0, total)(rng);
            std::size_t chosen = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                chosen = i;
                if (pick < d2[i]) break;
                pick -= d2[i];
            }
            centers.push_back(values[chosen]);
        }
        for (std::size_t it = 0; it < iterations; ++it) {
            std::vector<double> sum(k, 0.0);
            std::vector<std::size_t> count(k, 0);
            for (double v : values) {
                const std::size_t c = nearest(centers, v);
                sum[c] += v;
                ++count[c];
            }
            bool moved = false;
            for (std::size_t c = 0; c < k; ++c) {
                if (count[c] == 0) continue;
                const double m = sum[c] / static_cast<double>(count[c]);
                moved = moved || m != centers[c];
                centers[c] = m;
            }
            if (!moved) break;
        }
        double inertia = 0.0;
        for (double v : values) {
            const double d = v - centers[nearest(centers, v)];
            inertia += d * d;
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best = centers;
        }
    }
    std::sort(best.begin(), best.end());
    return best;
}

GmmFit fit_gmm(std::span<const double> values, std::uint64_t seed, const GmmOptions& opts) {
    const std::set<double> distinct(values.begin(), values.end());
    if (distinct.size() < 3) {
        throw DataError("GMM fit needs at least 3 distinct values, got " + std::to_string(distinct.size()));
    }
    const double lo = *distinct.begin();
    const double range = *distinct.rbegin() - lo;
    std::vector<double> u(values.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (values[i] - lo) / range;

    GmmFit fit;
    bool ok = false;
    for (std::uint64_t attempt = 0; attempt < 2 && !ok; ++attempt) {
        try {
            fit = fit_normalized(u, seed + attempt, opts);
            ok = true;
        } catch (const Collapse&) {
        }
    }
    if (!ok) throw DataError("degenerate GMM fit: a component collapsed after re-seeding");

    const double shift = static_cast<double>(values.size()) * std::log(range);
    for (double& ll : fit.log_likelihood) ll -= shift;
    for (auto& c : fit.mixture.components) {
        c.mean = lo + range * c.mean;
        c.variance *= range * range;
    }
    return fit;
}

}  // namespace lrpseg
