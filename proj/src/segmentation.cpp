#include "lrpseg/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "lrpseg/error.hpp"

namespace lrpseg {

std::string to_string(SegmentationMethod m) {
    switch (m) {
        case SegmentationMethod::Simple: return "simple";
        case SegmentationMethod::Gmm: return "gmm";
        case SegmentationMethod::Bmm: return "bmm";
    }
    return "unknown";
}

SegmentationMethod parse_method(const std::string& name) {
    if (name == "simple") return SegmentationMethod::Simple;
    if (name == "gmm") return SegmentationMethod::Gmm;
    if (name == "bmm") return SegmentationMethod::Bmm;
    throw ConfigError("unknown segmentation method '" + name + "' (expected simple, gmm or bmm)");
}

std::size_t SegmentationMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

RelevanceMap mean_filter_5x5(const RelevanceMap& map) {
    if (map.height < 5 || map.width < 5) {
        throw ShapeError("5x5 mean filter needs a map of at least 5x5, got " + std::to_string(map.height) + "x" +
                         std::to_string(map.width));
    }
    const auto h = static_cast<long>(map.height);
    const auto w = static_cast<long>(map.width);
    RelevanceMap out = map;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long dy = -2; dy <= 2; ++dy) {
                const long yy = std::clamp(y + dy, 0L, h - 1);
                for (long dx = -2; dx <= 2; ++dx) {
                    const long xx = std::clamp(x + dx, 0L, w - 1);
                    acc += map.values[static_cast<std::size_t>(yy * w + xx)];
                }
            }
            out.values[static_cast<std::size_t>(y * w + x)] = static_cast<float>(acc / 25.0);
        }
    }
    return out;
}

IsodataResult isodata_threshold(std::span<const double> values) {
    IsodataResult r;
    if (values.empty()) return r;
    double t = 0.0;
    for (double v : values) t += v;
    t /= static_cast<double>(values.size());
    for (r.iterations = 1; r.iterations <= 100; ++r.iterations) {
        double lo = 0.0, hi = 0.0;
        std::size_t nlo = 0, nhi = 0;
        for (double v : values) {
            if (v <= t) {
                lo += v;
                ++nlo;
            } else {
                hi += v;
                ++nhi;
            }
        }
        if (nlo == 0 || nhi == 0) break;
        const double next = 0.5 * (lo / static_cast<double>(nlo) + hi / static_cast<double>(nhi));
        const double delta = std::abs(next - t);
        t = next;
        if (delta < 1e-6) {
            r.converged = true;
            break;
        }
    }
    r.iterations = std::min<std::size_t>(r.iterations, 100);
    r.threshold = t;
    return r;
}

namespace {

SegmentationMask empty_mask(const RelevanceMap& map, SegmentationMethod method) {
    SegmentationMask m;
    m.height = map.height;
    m.width = map.width;
    m.mask.assign(map.size(), 0);
    m.method = method;
    return m;
}

}  // namespace

SegmentationMask segment_simple(const RelevanceMap& map) {
    SegmentationMask out = empty_mask(map, SegmentationMethod::Simple);
    if (map.size() == 0) throw ShapeError("cannot segment an empty map");
    const auto [mn, mx] = std::minmax_element(map.values.begin(), map.values.end());
    const double lo = *mn, hi = *mx;
    if (!(hi > lo)) {
        out.status = SegmentationStatus::Warning;
        out.message = "constant relevance map: no separable classes";
        return out;
    }
    std::vector<double> norm(map.size());
    for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = (map.values[i] - lo) / (hi - lo);
    const IsodataResult t = isodata_threshold(norm);
    for (std::size_t i = 0; i < norm.size(); ++i) out.mask[i] = norm[i] > t.threshold ? 1 : 0;
    if (!t.converged) {
        out.status = SegmentationStatus::Warning;
        out.message = "isodata threshold did not converge within 100 iterations";
    }
    return out;
}

SegmentationMask segment_gmm(const RelevanceMap& map, std::uint64_t seed) {
    const RelevanceMap filtered = mean_filter_5x5(map);
    std::vector<double> values(filtered.values.begin(), filtered.values.end());
    const GmmFit fit = fit_gmm(values, seed);
    const double top = *std::max_element(values.begin(), values.end());
    const std::size_t damage = fit.mixture.densest_at(top);
    const auto post = fit.mixture.posterior(damage, values);

    SegmentationMask out = empty_mask(map, SegmentationMethod::Gmm);
    std::vector<float> score(post.size());
    for (std::size_t i = 0; i < post.size(); ++i) {
        score[i] = static_cast<float>(post[i]);
        out.mask[i] = score[i] > 0.5f ? 1 : 0;
    }
    out.score = std::move(score);
    return out;
}

SegmentationMask segment_bmm(const RelevanceMap& map, std::uint64_t /*seed*/) {
    RelevanceMap filtered = mean_filter_5x5(map);
    for (float& v : filtered.values) v = std::max(v, 0.0f);

    const std::size_t n = filtered.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const float va = filtered.values[a], vb = filtered.values[b];
        return va < vb || (va == vb && a < b);
    });
    const std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
    if (kept.size() < 16) {
        throw DataError("BMM segmentation needs at least 16 retained pixels, got " + std::to_string(kept.size()));
    }

    SegmentationMask out = empty_mask(map, SegmentationMethod::Bmm);
    std::vector<float> score(n, 0.0f);

    const double lo = filtered.values[kept.front()];
    const double hi = filtered.values[kept.back()];
    if (!(hi > lo)) {
        out.score = std::move(score);
        out.status = SegmentationStatus::Warning;
        out.message = "retained relevance values are constant: no separable classes";
        return out;
    }
    std::vector<double> x(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) x[i] = (filtered.values[kept[i]] - lo) / (hi - lo);

    try {
        const BmmFit fit = fit_bmm(x);
        for (std::size_t i = 0; i < kept.size(); ++i) score[kept[i]] = static_cast<float>(fit.damage_posterior[i]);
    } catch (const MomentFitError& e) {
        const IsodataResult t = isodata_threshold(x);
        for (std::size_t i = 0; i < kept.size(); ++i) score[kept[i]] = x[i] > t.threshold ? 1.0f : 0.0f;
        out.status = SegmentationStatus::Warning;
        out.message = std::string("beta moment fit infeasible, fell back to isodata threshold: ") + e.what();
    }
    for (std::size_t i = 0; i < n; ++i) out.mask[i] = score[i] > 0.5f ? 1 : 0;
    out.score = std::move(score);
    return out;
}

SegmentationMask segment(const RelevanceMap& map, SegmentationMethod method, std::uint64_t seed) {
    switch (method) {
        case SegmentationMethod::Simple: return segment_simple(map);
        case SegmentationMethod::Gmm: return segment_gmm(map, seed);
        case SegmentationMethod::Bmm: return segment_bmm(map, seed);
    }
    throw ConfigError("unknown segmentation method");
}

}  // namespace lrpseg
