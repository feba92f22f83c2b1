#pragma once

// Monte Carlo region growing refinement: turns a sparse TraceRaster into a
// dense LabelMask.
//
// Each iteration samples a subset of the labeled trace pixels as seeds, grows
// one cluster per seed over the whole image (class agnostic, priority-queue
// flood on a joint spatial/colour distance), then labels every cluster by
// majority vote of the trace pixels it contains. The per-pixel vote counts
// over all iterations form the likelihood tensor; the output mask is its
// per-pixel argmax.

#include <tracegrow/image.h>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace tracegrow {

struct RgrConfig {
    /// Fraction of labeled trace pixels used as seeds in each iteration.
    double seedFraction = 0.75;
    int mcIterations = 8;
    /// Lab distance that weighs the same as one spatial scale unit.
    double colorScale = 20.0;
    /// Pixels; unset means max(width, height) / 4.
    std::optional<double> spatialScale;
    std::uint64_t rngSeed = 0;
    /// Worker threads for the Monte Carlo iterations. Results do not depend on it.
    int workerThreads = 1;

    double resolvedSpatialScale(int width, int height) const;
    void validate() const;
};

struct Seed {
    int x = 0;
    int y = 0;
    std::uint8_t label = 0;

    friend bool operator==(const Seed&, const Seed&) = default;
};

using SeedSet = std::vector<Seed>;

struct ClusterMap {
    Plane<std::uint32_t> clusterId;
    std::uint32_t clusterCount = 0;
};

/// Per-pixel, per-category vote counts over the Monte Carlo iterations.
class LikelihoodTensor {
public:
    LikelihoodTensor() = default;
    LikelihoodTensor(int width, int height, int numCategories, int iterations);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int numCategories() const noexcept { return numCategories_; }
    int iterations() const noexcept { return iterations_; }

    std::uint16_t count(int x, int y, int category) const noexcept {
        return counts_[offset(x, y) + static_cast<std::size_t>(category)];
    }
    /// Fraction of iterations that labeled (x, y) as category.
    double value(int x, int y, int category) const noexcept {
        return static_cast<double>(count(x, y, category)) / iterations_;
    }

    /// All counts, pixel-major: index (y * width + x) * numCategories + category.
    std::span<const std::uint16_t> counts() const noexcept { return counts_; }

    /// Adds one vote per pixel. Pixels labeled kUnlabeled or out of range are rejected.
    void accumulate(const LabelMask& iterationLabels);

    /// Argmax per pixel, ties toward the smaller category id.
    LabelMask argmax() const;

    friend bool operator==(const LikelihoodTensor&, const LikelihoodTensor&) = default;

private:
    std::size_t offset(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(numCategories_);
    }

    int width_ = 0;
    int height_ = 0;
    int numCategories_ = 0;
    int iterations_ = 0;
    std::vector<std::uint16_t> counts_;
};

struct Refinement {
    LikelihoodTensor likelihood;
    LabelMask mask;
};

/// sRGB (D65) to CIELab.
Lab toLab(Rgb color) noexcept;
LabColorPlane toLab(const RgbImage& image);

/// Seed count drawn from labeledCount pixels: max(1, round(fraction * labeledCount)).
std::size_t seedCount(std::size_t labeledCount, double fraction);

/// Independent random stream for Monte Carlo iteration `iteration`.
std::uint64_t iterationStreamSeed(std::uint64_t rngSeed, std::uint64_t iteration) noexcept;

/// Uniform subset of the labeled trace pixels, without replacement, in raster order.
SeedSet sampleSeeds(const TraceRaster& trace, double fraction, std::mt19937_64& rng);

/// Grows one cluster per seed until every pixel is claimed. Cluster ids follow
/// the order of `seeds`.
ClusterMap growClusters(const LabColorPlane& lab, std::span<const Seed> seeds,
                        const RgrConfig& config);

/// Labels each cluster with the category holding most trace pixels inside it
/// (ties toward the smaller id). Clusters without any trace pixel stay kUnlabeled.
LabelMask voteClusters(const ClusterMap& clusters, const TraceRaster& trace);

/// Full pipeline. numCategories == 0 means "largest trace label + 1".
Refinement refine(const RgbImage& image, const TraceRaster& trace, const RgrConfig& config,
                  int numCategories = 0);

} // namespace tracegrow
