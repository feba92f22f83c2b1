#pragma once

// Mask quality and annotator scoring.
//
// IoU follows the PASCAL VOC convention: ground-truth void pixels (255) are
// excluded from both prediction and ground truth, and a category absent from
// both masks is left out of the mean instead of counting as a perfect match.

#include <tracegrow/image.h>

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tracegrow {

struct IouReport {
    std::map<std::uint8_t, double> perCategoryIou;
    /// Arithmetic mean over categoriesEvaluated; 0 when nothing was evaluated.
    double meanIou = 0.0;
    std::set<std::uint8_t> categoriesEvaluated;
};

struct OverlapCounts {
    std::uint64_t intersection = 0;
    std::uint64_t unionCount = 0;
};

/// Pools intersection/union counts over many image pairs (dataset-level IoU).
class IouAccumulator {
public:
    explicit IouAccumulator(std::set<std::uint8_t> categories);

    void add(const LabelMask& pred, const LabelMask& gt);
    IouReport report() const;
    const std::map<std::uint8_t, OverlapCounts>& counts() const noexcept { return counts_; }

private:
    std::set<std::uint8_t> categories_;
    std::map<std::uint8_t, OverlapCounts> counts_;
};

IouReport iou(const LabelMask& pred, const LabelMask& gt, const std::set<std::uint8_t>& categories);

/// Expected annotation time T = 60 + 30 (N - 1) seconds for N objects.
double expectedTime(int objectCount);

/// Time bonus max(2 + (T - t) / T, 1), additionally capped at 2.
double bonus(double elapsedSeconds, int objectCount);

/// round(100 * meanIou^3): strictly increasing and convex on [0, 1].
int baseScore(double meanIou);

struct ScoreInput {
    double meanIou = 0.0;
    double elapsedSeconds = 0.0;
    int objectCount = 1;
};

struct ScoreReport {
    int baseScore = 0;
    double bonus = 1.0;
    /// floor(baseScore * bonus)
    int finalScore = 0;
    double expectedTime = 60.0;
};

ScoreReport finalScore(const ScoreInput& input);

inline constexpr double kDefaultCheckpointThreshold = 0.70;

/// Passes iff meanIou >= threshold; threshold must lie in (0, 1).
bool checkpointGate(const IouReport& report, double threshold = kDefaultCheckpointThreshold);

struct ConsensusMap {
    Plane<std::uint16_t> counts;
    int annotatorTotal = 0;
};

ConsensusMap consensusCounts(std::span<const LabelMask> masks, std::uint8_t category);

/// Per-pixel mode across masks; ties toward the smaller category id.
LabelMask consensusMajority(std::span<const LabelMask> masks);

/// Categories present in either mask, ignoring void.
std::set<std::uint8_t> presentCategories(const LabelMask& a, const LabelMask& b);

/// "category,iou" rows preceded by a header, then a "mean" row.
std::string toCsv(const IouReport& report);
std::string toCsv(const ScoreInput& input, const ScoreReport& report);

} // namespace tracegrow
