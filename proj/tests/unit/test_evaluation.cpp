#include <tracegrow/evaluation.h>

#include "oracles.h"

#include <doctest.h>

using namespace tracegrow;

TEST_SUITE("iou") {

TEST_CASE("identical masks score 1 for every category") {
    std::mt19937_64 gen(1);
    const LabelMask m = oracle::randomMask(8, 8, 4, 0.1, gen);
    const IouReport r = iou(m, m, {0, 1, 2, 3});
    CHECK(r.meanIou == 1.0);
    for (const auto& [c, v] : r.perCategoryIou) CHECK(v == 1.0);
}

TEST_CASE("disjoint labels score 0") {
    const LabelMask pred(4, 4, std::uint8_t{1});
    const LabelMask gt(4, 4, std::uint8_t{2});
    const IouReport r = iou(pred, gt, {1, 2});
    CHECK(r.perCategoryIou.at(1) == 0.0);
    CHECK(r.perCategoryIou.at(2) == 0.0);
    CHECK(r.meanIou == 0.0);
}

TEST_CASE("categories absent from both masks are left out of the mean") {
    LabelMask pred(2, 1, std::uint8_t{0});
    LabelMask gt(2, 1, std::uint8_t{0});
    pred[1] = 1;
    const IouReport r = iou(pred, gt, {0, 1, 5});
    CHECK(r.categoriesEvaluated == std::set<std::uint8_t>{0, 1});
    CHECK(r.perCategoryIou.count(5) == 0);
    CHECK(r.meanIou == (0.5 + 0.0) / 2);
}

TEST_CASE("void ground truth is excluded from both sides") {
    LabelMask pred(3, 1, std::uint8_t{1});
    LabelMask gt(3, 1, std::uint8_t{1});
    gt[2] = kUnlabeled;
    pred[2] = 2;
    const IouReport r = iou(pred, gt, {1, 2});
    CHECK(r.perCategoryIou.at(1) == 1.0);
    CHECK(r.perCategoryIou.count(2) == 0);
}

TEST_CASE("random 8x8 pairs match exhaustive counting") {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int nc = 2 + trial % 4;
        const LabelMask pred = oracle::randomMask(8, 8, nc, 0.1, gen);
        const LabelMask gt = oracle::randomMask(8, 8, nc, 0.2, gen);
        std::set<std::uint8_t> cats;
        for (int c = 0; c < nc; ++c) cats.insert(std::uint8_t(c));
        IouAccumulator acc(cats);
        acc.add(pred, gt);
        const auto want = oracle::overlapCounts(pred, gt, cats);
        for (const auto& [c, k] : want) {
            CHECK(acc.counts().at(c).intersection == k.intersection);
            CHECK(acc.counts().at(c).unionCount == k.unionCount);
        }
        const auto [sum, n] = oracle::meanIou(want);
        const IouReport r = acc.report();
        CHECK(static_cast<int>(r.categoriesEvaluated.size()) == n);
        CHECK(r.meanIou == (n ? sum / n : 0.0));
    }
}

TEST_CASE("swapping prediction and ground truth keeps IoU when nothing is void") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
        const LabelMask a = oracle::randomMask(6, 6, 3, 0.0, gen);
        const LabelMask b = oracle::randomMask(6, 6, 3, 0.0, gen);
        CHECK(iou(a, b, {0, 1, 2}).perCategoryIou == iou(b, a, {0, 1, 2}).perCategoryIou);
    }
}

TEST_CASE("pooled counts add up across images") {
    std::mt19937_64 gen(4);
    std::map<std::uint8_t, oracle::Counts> total;
    IouAccumulator acc({0, 1, 2});
    for (int i = 0; i < 10; ++i) {
        const LabelMask p = oracle::randomMask(5, 7, 3, 0.0, gen);
        const LabelMask g = oracle::randomMask(5, 7, 3, 0.3, gen);
        acc.add(p, g);
        for (const auto& [c, k] : oracle::overlapCounts(p, g, {0, 1, 2})) {
            total[c].intersection += k.intersection;
            total[c].unionCount += k.unionCount;
        }
    }
    for (const auto& [c, k] : total) {
        CHECK(acc.counts().at(c).intersection == k.intersection);
        CHECK(acc.counts().at(c).unionCount == k.unionCount);
    }
}

TEST_CASE("iou preconditions") {
    CHECK_THROWS_AS(iou(LabelMask(2, 2), LabelMask(3, 2), {0}), Error);
    CHECK_THROWS_AS(iou(LabelMask(2, 2), LabelMask(2, 2), {}), Error);
}

TEST_CASE("present categories ignore void") {
    LabelMask a(3, 1, std::vector<std::uint8_t>{0, 4, 255});
    LabelMask b(3, 1, std::vector<std::uint8_t>{7, 255, 255});
    CHECK(presentCategories(a, b) == std::set<std::uint8_t>{0, 4, 7});
}

}

TEST_SUITE("score") {

TEST_CASE("expected time grows by 30 s per extra object") {
    CHECK(expectedTime(1) == 60.0);
    CHECK(expectedTime(2) == 90.0);
    CHECK(expectedTime(3) == 120.0);
    CHECK_THROWS_AS(expectedTime(0), Error);
}

TEST_CASE("bonus anchors") {
    for (int n : {1, 2, 5}) {
        const double T = expectedTime(n);
        CHECK(bonus(T, n) == 2.0);
        CHECK(bonus(2 * T, n) == 1.0);
        CHECK(bonus(1.5 * T, n) == 1.5);
        CHECK(bonus(10 * T, n) == 1.0);
        CHECK(bonus(0.0, n) == 2.0);
        CHECK(bonus(0.25 * T, n) == 2.0);
    }
    CHECK(bonus(180.0, 3) == 1.5);
    CHECK_THROWS_AS(bonus(-1.0, 1), Error);
    CHECK_THROWS_AS(bonus(10.0, 0), Error);
}

TEST_CASE("bonus is continuous, non-increasing and within [1, 2]") {
    for (int n : {1, 2, 3, 7}) {
        double prev = bonus(0.0, n);
        for (double t = 0.0; t <= 4 * expectedTime(n); t += 0.5) {
            const double b = bonus(t, n);
            CHECK(b <= prev);
            CHECK(prev - b <= 0.5 / expectedTime(n) + 1e-12);
            CHECK(b >= 1.0);
            CHECK(b <= 2.0);
            prev = b;
        }
    }
}

TEST_CASE("base score is the rounded cube") {
    CHECK(baseScore(1.0) == 100);
    CHECK(baseScore(0.0) == 0);
    CHECK(baseScore(0.9) == 73);
    CHECK_THROWS_AS(baseScore(1.01), Error);
    CHECK_THROWS_AS(baseScore(-0.1), Error);
}

TEST_CASE("final score composes base score and bonus with floor") {
    CHECK(finalScore({1.0, 60.0, 1}).finalScore == 200);
    CHECK(finalScore({1.0, 120.0, 1}).finalScore == 100);
    CHECK(finalScore({1.0, 500.0, 1}).finalScore == 100);
    const ScoreReport r = finalScore({0.9, 135.0, 2});
    CHECK(r.baseScore == 73);
    CHECK(r.bonus == 1.5);
    CHECK(r.finalScore == 109);
    CHECK(r.expectedTime == 90.0);
}

TEST_CASE("final score never drops as accuracy rises") {
    for (int n : {1, 4}) {
        for (double t : {0.0, 75.0, 140.0, 1000.0}) {
            int prev = -1;
            for (int i = 0; i <= 1000; ++i) {
                const int s = finalScore({i / 1000.0, t, n}).finalScore;
                CHECK(s >= prev);
                prev = s;
            }
        }
    }
}

TEST_CASE("checkpoint gate is inclusive at the threshold") {
    IouReport r;
    r.meanIou = 0.70;
    CHECK(checkpointGate(r));
    r.meanIou = 0.69;
    CHECK_FALSE(checkpointGate(r));
    r.meanIou = 0.955;
    CHECK(checkpointGate(r));
    CHECK_THROWS_AS(checkpointGate(r, 0.0), Error);
    CHECK_THROWS_AS(checkpointGate(r, 1.0), Error);
}

TEST_CASE("CSV reports have stable headers") {
    const std::string score = toCsv(ScoreInput{1.0, 60.0, 1}, finalScore({1.0, 60.0, 1}));
    CHECK(score.rfind("meanIou,elapsedSeconds,objectCount,expectedTime,baseScore,bonus,"
                      "finalScore\n",
                      0) == 0);
    CHECK(score.find(",200\n") != std::string::npos);
    LabelMask m(2, 1, std::vector<std::uint8_t>{0, 1});
    const std::string table = toCsv(iou(m, m, {0, 1}));
    CHECK(table == "category,iou\n0,1.000000\n1,1.000000\nmean,1.000000\n");
}

}

TEST_SUITE("consensus") {

TEST_CASE("a single mask is its own majority") {
    std::mt19937_64 gen(5);
    const std::vector<LabelMask> one{oracle::randomMask(6, 6, 3, 0.0, gen)};
    CHECK(consensusMajority(one) == one[0]);
    const ConsensusMap c = consensusCounts(one, 1);
    CHECK(c.annotatorTotal == 1);
    for (std::size_t i = 0; i < c.counts.size(); ++i) {
        CHECK(c.counts[i] == (one[0][i] == 1 ? 1 : 0));
    }
}

TEST_CASE("identical masks agree everywhere") {
    std::mt19937_64 gen(6);
    const LabelMask m = oracle::randomMask(5, 5, 3, 0.0, gen);
    const std::vector<LabelMask> eight(8, m);
    const ConsensusMap c = consensusCounts(eight, 2);
    for (auto v : c.counts.values()) CHECK((v == 0 || v == 8));
    CHECK(consensusMajority(eight) == m);
}

TEST_CASE("random stacks match the per-pixel tally") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<LabelMask> masks;
        for (int i = 0; i < 5; ++i) masks.push_back(oracle::randomMask(4, 4, 3, 0.1, gen));
        CHECK(consensusMajority(masks) == oracle::majority(masks));
        const ConsensusMap c = consensusCounts(masks, 1);
        for (std::size_t p = 0; p < c.counts.size(); ++p) {
            int n = 0;
            for (const auto& m : masks) n += m[p] == 1;
            CHECK(c.counts[p] == n);
            CHECK(c.counts[p] <= c.annotatorTotal);
        }
    }
}

TEST_CASE("a mask repeated in a majority of an odd stack wins") {
    std::mt19937_64 gen(8);
    const LabelMask target = oracle::randomMask(6, 6, 4, 0.0, gen);
    std::vector<LabelMask> masks(3, target);
    masks.push_back(oracle::randomMask(6, 6, 4, 0.0, gen));
    masks.push_back(oracle::randomMask(6, 6, 4, 0.0, gen));
    CHECK(consensusMajority(masks) == target);
}

TEST_CASE("consensus preconditions") {
    CHECK_THROWS_AS(consensusMajority(std::vector<LabelMask>{}), Error);
    CHECK_THROWS_AS(consensusCounts(std::vector<LabelMask>{LabelMask(2, 2), LabelMask(3, 2)}, 0),
                    Error);
}

}
