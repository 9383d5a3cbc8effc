#include "lrpseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "lrpseg/error.hpp"

namespace lrpseg {

PixelConfusion& PixelConfusion::operator+=(const PixelConfusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

PixelConfusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) {
        throw ShapeError("mask sizes differ: " + std::to_string(predicted.size()) + " vs " +
                         std::to_string(truth.size()));
    }
    PixelConfusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] != 0;
        const bool t = truth[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(std::optional<double> v) {
    if (!v) return "nan";
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << *v;
    return os.str();
}

}  // namespace

std::optional<double> iou(const PixelConfusion& c) { return ratio(c.tp, c.tp + c.fp + c.fn); }
std::optional<double> precision(const PixelConfusion& c) { return ratio(c.tp, c.tp + c.fp); }
std::optional<double> recall(const PixelConfusion& c) { return ratio(c.tp, c.tp + c.fn); }

PrCurve pr_curve(std::span<const std::vector<float>> scores, std::span<const std::vector<std::uint8_t>> truths) {
    if (scores.size() != truths.size()) throw ShapeError("score and truth sets differ in length");
    std::vector<std::pair<float, bool>> pixels;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k].size() != truths[k].size()) {
            throw ShapeError("score map " + std::to_string(k) + " does not match its truth mask");
        }
        for (std::size_t i = 0; i < scores[k].size(); ++i) pixels.emplace_back(scores[k][i], truths[k][i] != 0);
    }
    const auto positives = static_cast<std::uint64_t>(
        std::count_if(pixels.begin(), pixels.end(), [](const auto& p) { return p.second; }));
    if (positives == 0) throw DataError("PR curve needs at least one positive pixel");

    PrCurve curve;
    curve.no_skill_precision = static_cast<double>(positives) / static_cast<double>(pixels.size());

    // Descending sweep; each distinct score closes a group of ties.
    std::sort(pixels.begin(), pixels.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::uint64_t tp = 0, fp = 0;
    std::vector<PrPoint> desc;
    bool first_group = true;
    for (std::size_t i = 0; i < pixels.size();) {
        const float t = pixels[i].first;
        for (; i < pixels.size() && pixels[i].first == t; ++i) pixels[i].second ? ++tp : ++fp;
        desc.push_back({t, static_cast<double>(tp) / static_cast<double>(tp + fp),
                        static_cast<double>(tp) / static_cast<double>(positives)});
        if (first_group) {
            curve.saturated = fp > 0 && tp + fp > 1;
            curve.terminal_precision = desc.back().precision;
            first_group = false;
        }
    }
    curve.points.assign(desc.rbegin(), desc.rend());
    return curve;
}

RelevanceMap raw_lrp_scores(const RelevanceMap& map) {
    if (map.size() == 0) throw DataError("empty relevance map");
    const auto [mn, mx] = std::minmax_element(map.values.begin(), map.values.end());
    const double lo = *mn, hi = *mx;
    if (!(hi > lo)) throw DataError("constant relevance map cannot be mapped to [0, 1]");
    RelevanceMap out = map;
    for (float& v : out.values) v = static_cast<float>((v - lo) / (hi - lo));
    return out;
}

std::string pr_curve_csv(const PrCurve& curve) {
    std::ostringstream os;
    os.precision(9);
    os << "threshold,precision,recall\n";
    for (const auto& p : curve.points) os << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
    return os.str();
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    os << "name,tp,fp,fn,tn,iou,precision,recall\n";
    PixelConfusion pooled;
    auto line = [&](const std::string& name, const PixelConfusion& c) {
        os << name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn << ',' << fmt(iou(c)) << ','
           << fmt(precision(c)) << ',' << fmt(recall(c)) << '\n';
    };
    for (const auto& r : rows) {
        line(r.name, r.confusion);
        pooled += r.confusion;
    }
    line("summary", pooled);
    return os.str();
}

std::string summary_table(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s\n", "Method", "IoU", "Precision", "Recall");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s\n", r.name.c_str(), fmt(iou(r.confusion)).c_str(),
                      fmt(precision(r.confusion)).c_str(), fmt(recall(r.confusion)).c_str());
        os << buf;
    }
    return os.str();
}

}  // namespace lrpseg
