#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrpseg/error.hpp"
#include "lrpseg/relevance_map.hpp"

namespace lrpseg {

enum class SegmentationMethod { Simple, Gmm, Bmm };

std::string to_string(SegmentationMethod m);
SegmentationMethod parse_method(const std::string& name);

enum class SegmentationStatus { Ok, Warning };

struct SegmentationMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> mask;  // 1 = damage
    SegmentationMethod method = SegmentationMethod::Simple;
    std::optional<std::vector<float>> score;  // damage posterior, GMM and BMM only
    SegmentationStatus status = SegmentationStatus::Ok;
    std::string message;

    std::size_t count() const;
};

// 5x5 box average, borders replicated. Throws ShapeError below 5x5.
RelevanceMap mean_filter_5x5(const RelevanceMap& map);

// ---- Simple (isodata) ------------------------------------------------------

struct IsodataResult {
    double threshold = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

// Iterates t <- (mean(x <= t) + mean(x > t)) / 2 from t = mean(x) until
// |dt| < 1e-6 or 100 iterations.
IsodataResult isodata_threshold(std::span<const double> values);

// Min-max normalizes, thresholds by isodata, mask = value > t. A constant map
// yields an empty mask with Warning status.
SegmentationMask segment_simple(const RelevanceMap& map);

// ---- GMM -------------------------------------------------------------------

struct GaussianComponent {
    double weight = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

struct GaussianMixture {
    std::array<GaussianComponent, 3> components{};

    double log_pdf(std::size_t k, double x) const;
    double log_likelihood(std::span<const double> values) const;
    // Posterior of component k at each value.
    std::vector<double> posterior(std::size_t k, std::span<const double> values) const;
    // Component whose density is largest at x.
    std::size_t densest_at(double x) const;
};

struct GmmOptions {
    std::size_t kmeans_iterations = 20;
    std::size_t max_iterations = 200;
    double tolerance = 1e-7;  // relative log-likelihood change
    double variance_floor = 1e-6;  // in units of the squared data range
};

struct GmmFit {
    GaussianMixture mixture;
    std::vector<double> log_likelihood;  // one entry per EM iteration
    std::uint64_t seed_used = 0;
};

// k-means++ seeding from `seed`, `iterations` Lloyd steps, best of 10
// restarts by within-cluster sum of squares. Returns centers in ascending order.
std::vector<double> kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed,
                              std::size_t iterations);

// Three-component 1-D EM fit. On collapse re-seeds once, then throws DataError.
GmmFit fit_gmm(std::span<const double> values, std::uint64_t seed, const GmmOptions& opts = {});

SegmentationMask segment_gmm(const RelevanceMap& map, std::uint64_t seed);

// ---- BMM -------------------------------------------------------------------

struct BetaComponent {
    double weight = 0.0;
    double alpha = 1.0;
    double beta = 1.0;

    double mean() const { return alpha / (alpha + beta); }
};

// Component 0 is background, component 1 damage; mean(damage) >= mean(background).
struct BetaMixture {
    std::array<BetaComponent, 2> components{};
};

struct BmmOptions {
    std::size_t max_iterations = 200;
    double tolerance = 1e-7;
    double background_quantile = 0.9;
    double min_shape = 1e-3;
    double max_shape = 1e4;
    double edge = 1e-6;  // values are clamped into [edge, 1 - edge] before density evaluation
};

struct BmmFit {
    BetaMixture mixture;
    std::vector<double> damage_posterior;  // per input value
    std::vector<double> log_likelihood;
    std::size_t iterations = 0;
};

// Raised when method-of-moments has no valid (alpha, beta).
class MomentFitError : public DataError {
public:
    using DataError::DataError;
};

// Modified EM on values in [0, 1]: values above the damage mean are damage,
// values at or below the background's 90% quantile are background, the rest
// get Bayes posteriors. Damage clamp wins when both apply.
BmmFit fit_bmm(std::span<const double> values, const BmmOptions& opts = {});

// Filter, clamp negatives, drop the lower half, normalize, fit, threshold at 0.5.
SegmentationMask segment_bmm(const RelevanceMap& map, std::uint64_t seed);

SegmentationMask segment(const RelevanceMap& map, SegmentationMethod method, std::uint64_t seed);

}  // namespace lrpseg
