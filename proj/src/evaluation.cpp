#include <tracegrow/evaluation.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace tracegrow {

IouAccumulator::IouAccumulator(std::set<std::uint8_t> categories)
    : categories_(std::move(categories)) {
    if (categories_.empty()) {
        throw Error(ErrorCode::EmptyCategorySet, "IoU needs at least one category");
    }
    for (const std::uint8_t c : categories_) {
        counts_[c] = OverlapCounts{};
    }
}

void IouAccumulator::add(const LabelMask& pred, const LabelMask& gt) {
    requireSameShape(pred, gt, "iou");
    // Per-value histograms of the pixel pair, then one pass over the categories.
    std::array<std::uint64_t, 256> predCount{};
    std::array<std::uint64_t, 256> gtCount{};
    std::array<std::uint64_t, 256> both{};
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const std::uint8_t g = gt[i];
        if (g == kUnlabeled) {
            continue;
        }
        const std::uint8_t p = pred[i];
        ++predCount[p];
        ++gtCount[g];
        if (p == g) {
            ++both[g];
        }
    }
    for (const std::uint8_t c : categories_) {
        OverlapCounts& oc = counts_[c];
        oc.intersection += both[c];
        oc.unionCount += predCount[c] + gtCount[c] - both[c];
    }
}

IouReport IouAccumulator::report() const {
    IouReport r;
    double sum = 0.0;
    for (const auto& [c, oc] : counts_) {
        if (oc.unionCount == 0) {
            continue;
        }
        const double value = static_cast<double>(oc.intersection) / static_cast<double>(oc.unionCount);
        r.perCategoryIou[c] = value;
        r.categoriesEvaluated.insert(c);
        sum += value;
    }
    if (!r.categoriesEvaluated.empty()) {
        r.meanIou = sum / static_cast<double>(r.categoriesEvaluated.size());
    }
    return r;
}

IouReport iou(const LabelMask& pred, const LabelMask& gt, const std::set<std::uint8_t>& categories) {
    IouAccumulator acc(categories);
    acc.add(pred, gt);
    return acc.report();
}

double expectedTime(int objectCount) {
    if (objectCount < 1) {
        throw Error(ErrorCode::InvalidObjectCount,
                    "object count must be at least 1, got " + std::to_string(objectCount));
    }
    return 60.0 + 30.0 * (objectCount - 1);
}

double bonus(double elapsedSeconds, int objectCount) {
    const double T = expectedTime(objectCount);
    if (!(elapsedSeconds >= 0.0)) {
        throw Error(ErrorCode::OutOfRange, "elapsed time must be non-negative");
    }
    const double raw = std::max(2.0 + (T - elapsedSeconds) / T, 1.0);
    // The printed formula exceeds 2 for t < T; the bonus is advertised as at most 2x.
    return std::min(raw, 2.0);
}

int baseScore(double meanIou) {
    if (!(meanIou >= 0.0 && meanIou <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "meanIou must lie in [0, 1]");
    }
    return static_cast<int>(std::lround(100.0 * meanIou * meanIou * meanIou));
}

ScoreReport finalScore(const ScoreInput& input) {
    ScoreReport r;
    r.expectedTime = expectedTime(input.objectCount);
    r.baseScore = baseScore(input.meanIou);
    r.bonus = bonus(input.elapsedSeconds, input.objectCount);
    r.finalScore = static_cast<int>(std::floor(r.baseScore * r.bonus));
    return r;
}

bool checkpointGate(const IouReport& report, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::OutOfRange, "checkpoint threshold must lie in (0, 1)");
    }
    return report.meanIou >= threshold;
}

namespace {

void requireStack(std::span<const LabelMask> masks) {
    if (masks.empty()) {
        throw Error(ErrorCode::EmptyList, "consensus needs at least one mask");
    }
    for (const LabelMask& m : masks) {
        requireSameShape(masks.front(), m, "consensus");
    }
}

} // namespace

ConsensusMap consensusCounts(std::span<const LabelMask> masks, std::uint8_t category) {
    requireStack(masks);
    ConsensusMap out{Plane<std::uint16_t>(masks.front().width(), masks.front().height(), 0),
                     static_cast<int>(masks.size())};
    for (const LabelMask& m : masks) {
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] == category) {
                ++out.counts[i];
            }
        }
    }
    return out;
}

LabelMask consensusMajority(std::span<const LabelMask> masks) {
    requireStack(masks);
    LabelMask out(masks.front().width(), masks.front().height(), 0);
    std::array<std::uint32_t, 256> tally{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (const LabelMask& m : masks) {
            ++tally[m[i]];
        }
        std::uint32_t best = 0;
        for (std::size_t c = 0; c < tally.size(); ++c) {
            if (tally[c] > best) {
                best = tally[c];
                out[i] = static_cast<std::uint8_t>(c);
            }
        }
        for (const LabelMask& m : masks) {
            tally[m[i]] = 0;
        }
    }
    return out;
}

std::set<std::uint8_t> presentCategories(const LabelMask& a, const LabelMask& b) {
    std::array<bool, 256> seen{};
    for (const std::uint8_t v : a.values()) seen[v] = true;
    for (const std::uint8_t v : b.values()) seen[v] = true;
    std::set<std::uint8_t> out;
    for (std::size_t c = 0; c < kUnlabeled; ++c) {
        if (seen[c]) {
            out.insert(static_cast<std::uint8_t>(c));
        }
    }
    return out;
}

std::string toCsv(const IouReport& report) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << "category,iou\n";
    for (const auto& [c, v] : report.perCategoryIou) {
        out << int(c) << ',' << v << '\n';
    }
    out << "mean," << report.meanIou << '\n';
    return out.str();
}

std::string toCsv(const ScoreInput& input, const ScoreReport& report) {
    std::ostringstream out;
    out << "meanIou,elapsedSeconds,objectCount,expectedTime,baseScore,bonus,finalScore\n";
    out << input.meanIou << ',' << input.elapsedSeconds << ',' << input.objectCount << ','
        << report.expectedTime << ',' << report.baseScore << ',' << report.bonus << ','
        << report.finalScore << '\n';
    return out.str();
}

} // namespace tracegrow
