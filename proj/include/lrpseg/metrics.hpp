#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrpseg/relevance_map.hpp"

namespace lrpseg {

struct PixelConfusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    PixelConfusion& operator+=(const PixelConfusion& o);
};

// Masks are 0/1 per pixel, damage = 1. Throws ShapeError on length mismatch.
PixelConfusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

// std::nullopt marks an undefined ratio (zero denominator).
std::optional<double> iou(const PixelConfusion& c);
std::optional<double> precision(const PixelConfusion& c);
std::optional<double> recall(const PixelConfusion& c);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // thresholds strictly increasing
    double no_skill_precision = 0.0;
    bool saturated = false;       // top-threshold point still holds false positives from tied maxima
    double terminal_precision = 0.0;
};

// Micro-pooled sweep over every distinct score; a pixel is predicted damage
// when score >= threshold. Throws DataError without any positive pixel.
PrCurve pr_curve(std::span<const std::vector<float>> scores, std::span<const std::vector<std::uint8_t>> truths);

// Affine min-max map to [0, 1]. Throws DataError on a constant map.
RelevanceMap raw_lrp_scores(const RelevanceMap& map);

std::string pr_curve_csv(const PrCurve& curve);

struct MetricRow {
    std::string name;
    PixelConfusion confusion;
};

// Per-row IoU/precision/recall CSV with a trailing micro-pooled "summary" row.
std::string metrics_csv(const std::vector<MetricRow>& rows);
// Fixed-width text table: method | IoU | Precision | Recall.
std::string summary_table(const std::vector<MetricRow>& rows);

}  // namespace lrpseg
