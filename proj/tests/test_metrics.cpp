#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lrpseg/error.hpp"
#include "lrpseg/metrics.hpp"
#include "oracles.hpp"

using namespace lrpseg;

namespace {

std::vector<std::uint8_t> random_mask(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution d(p);
    std::vector<std::uint8_t> m(n);
    for (auto& v : m) v = d(rng) ? 1 : 0;
    return m;
}

// Scores drawn from a small alphabet so that ties are common.
std::vector<float> tied_scores(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> level(0, 7);
    std::vector<float> s(n);
    for (auto& v : s) v = static_cast<float>(level(rng)) / 7.0f;
    return s;
}

}  // namespace

TEST(Confusion, MatchesLoopOracle) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_mask(200, 0.3, rng), t = random_mask(200, 0.2, rng);
        const PixelConfusion c = confusion(p, t);
        const oracle::Counts o = oracle::confusion_loop(p, t);
        EXPECT_EQ(c.tp, o.tp);
        EXPECT_EQ(c.fp, o.fp);
        EXPECT_EQ(c.fn, o.fn);
        EXPECT_EQ(c.tn, o.tn);
        EXPECT_EQ(c.total(), 200u);
    }
}

TEST(Confusion, IdenticalAndComplementary) {
    std::mt19937_64 rng(2);
    const auto t = random_mask(100, 0.4, rng);
    const PixelConfusion same = confusion(t, t);
    EXPECT_EQ(same.fp, 0u);
    EXPECT_EQ(same.fn, 0u);
    EXPECT_EQ(*iou(same), 1.0);
    std::vector<std::uint8_t> inv(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) inv[i] = 1 - t[i];
    const PixelConfusion opp = confusion(inv, t);
    EXPECT_EQ(opp.tp, 0u);
    EXPECT_EQ(opp.tn, 0u);
    EXPECT_EQ(*iou(opp), 0.0);
    EXPECT_THROW(confusion(t, std::vector<std::uint8_t>(3)), ShapeError);
}

TEST(Ratios, DefinitionsAndUndefined) {
    const PixelConfusion c{6, 2, 4, 88};
    EXPECT_DOUBLE_EQ(*iou(c), 0.5);
    EXPECT_DOUBLE_EQ(*precision(c), 0.75);
    EXPECT_DOUBLE_EQ(*recall(c), 0.6);
    const PixelConfusion empty{0, 0, 0, 10};
    EXPECT_FALSE(iou(empty).has_value());
    EXPECT_FALSE(precision(empty).has_value());
    EXPECT_FALSE(recall(empty).has_value());
    const PixelConfusion no_pred{0, 0, 5, 5};
    EXPECT_FALSE(precision(no_pred).has_value());
    EXPECT_DOUBLE_EQ(*recall(no_pred), 0.0);
    EXPECT_DOUBLE_EQ(*iou(no_pred), 0.0);
}

TEST(Ratios, IouBoundedByPrecisionAndRecall) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const PixelConfusion c = confusion(random_mask(64, 0.3, rng), random_mask(64, 0.3, rng));
        if (!iou(c) || !precision(c) || !recall(c)) continue;
        EXPECT_LE(*iou(c), std::min(*precision(c), *recall(c)) + 1e-15);
    }
}

TEST(PrCurve, MatchesThresholdOracleExactly) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<float>> scores;
        std::vector<std::vector<std::uint8_t>> truths;
        for (int k = 0; k < 3; ++k) {
            scores.push_back(tied_scores(40, rng));
            truths.push_back(random_mask(40, 0.25, rng));
        }
        truths[0][0] = 1;
        const PrCurve curve = pr_curve(scores, truths);
        const auto oracle_points = oracle::pr_bruteforce(scores, truths);
        ASSERT_EQ(curve.points.size(), oracle_points.size());
        std::size_t i = 0;
        for (const auto& [t, c] : oracle_points) {
            const PrPoint& p = curve.points[i++];
            EXPECT_EQ(p.threshold, t);
            EXPECT_EQ(p.precision, static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
            EXPECT_EQ(p.recall, static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
        }
        for (std::size_t j = 1; j < curve.points.size(); ++j) {
            EXPECT_GT(curve.points[j].threshold, curve.points[j - 1].threshold);
            EXPECT_LE(curve.points[j].recall, curve.points[j - 1].recall);
        }
    }
}

TEST(PrCurve, NoSkillIsPositiveProportion) {
    std::mt19937_64 rng(5);
    std::vector<std::vector<float>> scores{tied_scores(50, rng), tied_scores(70, rng)};
    std::vector<std::vector<std::uint8_t>> truths{random_mask(50, 0.1, rng), random_mask(70, 0.3, rng)};
    truths[1][0] = 1;
    std::size_t pos = 0;
    for (const auto& t : truths) pos += static_cast<std::size_t>(std::count(t.begin(), t.end(), 1));
    EXPECT_EQ(pr_curve(scores, truths).no_skill_precision, static_cast<double>(pos) / 120.0);
}

TEST(PrCurve, PerfectAndConstantScorers) {
    const std::vector<std::vector<std::uint8_t>> truth{{0, 1, 1, 0, 0, 1, 0, 0}};
    const std::vector<std::vector<float>> perfect{{0, 1, 1, 0, 0, 1, 0, 0}};
    const PrCurve p = pr_curve(perfect, truth);
    ASSERT_EQ(p.points.size(), 2u);
    EXPECT_EQ(p.points.back().precision, 1.0);
    EXPECT_EQ(p.points.back().recall, 1.0);
    EXPECT_FALSE(p.saturated);

    const std::vector<std::vector<float>> constant{std::vector<float>(8, 0.3f)};
    const PrCurve c = pr_curve(constant, truth);
    ASSERT_EQ(c.points.size(), 1u);
    EXPECT_EQ(c.points[0].precision, c.no_skill_precision);
    EXPECT_EQ(c.points[0].recall, 1.0);
}

TEST(PrCurve, SaturationFromTiedMaxima) {
    // Five pixels tie at 1.0, two of them false positives.
    const std::vector<std::vector<std::uint8_t>> truth{{1, 1, 1, 0, 0, 1, 0, 0, 0, 0}};
    const std::vector<std::vector<float>> scores{{1, 1, 1, 1, 1, 0.5f, 0.2f, 0, 0, 0}};
    const PrCurve c = pr_curve(scores, truth);
    EXPECT_TRUE(c.saturated);
    EXPECT_DOUBLE_EQ(c.terminal_precision, 0.6);
    EXPECT_EQ(c.points.back().threshold, 1.0);
    EXPECT_DOUBLE_EQ(c.points.back().recall, 0.75);
}

TEST(PrCurve, Errors) {
    const std::vector<std::vector<float>> s{{0.1f, 0.2f}};
    EXPECT_THROW(pr_curve(s, std::vector<std::vector<std::uint8_t>>{{0, 0}}), DataError);
    EXPECT_THROW(pr_curve(s, std::vector<std::vector<std::uint8_t>>{{0, 1, 1}}), ShapeError);
    EXPECT_THROW(pr_curve(s, std::vector<std::vector<std::uint8_t>>{}), ShapeError);
}

TEST(RawLrpScores, AffineToUnitInterval) {
    RelevanceMap m(1, 3);
    m.values = {-2.0f, 0.0f, 2.0f};
    EXPECT_EQ(raw_lrp_scores(m).values, (std::vector<float>{0.0f, 0.5f, 1.0f}));
    std::mt19937_64 rng(6);
    RelevanceMap r(8, 8);
    r.values = oracle::random_vector(64, rng, -3.0f, 5.0f);
    const RelevanceMap s = raw_lrp_scores(r);
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j)
            if (r.values[i] < r.values[j]) EXPECT_LE(s.values[i], s.values[j]);
    EXPECT_THROW(raw_lrp_scores(RelevanceMap(2, 2, 1.0f)), DataError);
}

TEST(Report, CsvHasPooledSummaryRow) {
    const std::vector<MetricRow> rows{{"a", {2, 1, 1, 6}}, {"b", {0, 0, 3, 7}}};
    const std::string csv = metrics_csv(rows);
    std::istringstream in(csv);
    std::string line, last;
    std::getline(in, line);
    EXPECT_EQ(line, "name,tp,fp,fn,tn,iou,precision,recall");
    std::getline(in, line);
    EXPECT_EQ(line, "a,2,1,1,6,0.500000,0.666667,0.666667");
    std::getline(in, line);
    EXPECT_EQ(line, "b,0,0,3,7,0.000000,nan,0.000000");
    std::getline(in, last);
    EXPECT_EQ(last, "summary,2,1,4,13,0.285714,0.666667,0.333333");
    const std::string table = summary_table(rows);
    EXPECT_NE(table.find("Precision"), std::string::npos);
    EXPECT_NE(table.find("0.500000"), std::string::npos);
}

TEST(Report, PrCsv) {
    PrCurve c;
    c.points = {{0.0, 0.25, 1.0}, {1.0, 1.0, 0.5}};
    EXPECT_EQ(pr_curve_csv(c), "threshold,precision,recall\n0,0.25,1\n1,1,0.5\n");
}
