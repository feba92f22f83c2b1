#include <tracegrow/rgr.h>

#include "random_util.h"
#include "rgr_internal.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <queue>
#include <thread>
#include <tuple>

namespace tracegrow {

namespace {

constexpr std::uint32_t kUncommitted = std::numeric_limits<std::uint32_t>::max();

using detail::splitmix64;
using detail::uniformBelow;

std::vector<std::uint32_t> labeledPixels(const TraceRaster& trace) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace[i] != kUnlabeled) {
            out.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return out;
}

SeedSet sampleFromLabeled(const TraceRaster& trace, std::span<const std::uint32_t> labeled,
                          double fraction, std::mt19937_64& rng) {
    if (labeled.empty()) {
        throw Error(ErrorCode::EmptyTrace, "trace has no labeled pixels");
    }
    const std::size_t k = seedCount(labeled.size(), fraction);

    // Partial Fisher-Yates: the first k slots end up as a uniform k-subset.
    std::vector<std::uint32_t> pool(labeled.begin(), labeled.end());
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(uniformBelow(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());

    SeedSet seeds;
    seeds.reserve(k);
    const auto width = static_cast<std::uint32_t>(trace.width());
    for (const std::uint32_t idx : pool) {
        seeds.push_back(Seed{static_cast<int>(idx % width), static_cast<int>(idx / width),
                             trace[idx]});
    }
    return seeds;
}

struct QueueEntry {
    double distance;
    std::uint32_t cluster;
    std::uint32_t pixel;
};

// Min-heap order: distance, then cluster id, then pixel index.
struct PopsLater {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const noexcept {
        return std::tie(a.distance, a.cluster, a.pixel) > std::tie(b.distance, b.cluster, b.pixel);
    }
};

struct Centroid {
    double x = 0, y = 0, L = 0, a = 0, b = 0;
    double count = 0;
};

} // namespace

double RgrConfig::resolvedSpatialScale(int width, int height) const {
    return spatialScale ? *spatialScale : static_cast<double>(std::max(width, height)) / 4.0;
}

void RgrConfig::validate() const {
    if (!(seedFraction > 0.0 && seedFraction <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "seedFraction must lie in (0, 1]");
    }
    if (mcIterations < 1 || mcIterations > std::numeric_limits<std::uint16_t>::max()) {
        throw Error(ErrorCode::OutOfRange, "mcIterations must lie in [1, 65535]");
    }
    if (!(colorScale > 0.0)) {
        throw Error(ErrorCode::OutOfRange, "colorScale must be positive");
    }
    if (spatialScale && !(*spatialScale > 0.0)) {
        throw Error(ErrorCode::OutOfRange, "spatialScale must be positive");
    }
    if (workerThreads < 1) {
        throw Error(ErrorCode::OutOfRange, "workerThreads must be at least 1");
    }
}

std::size_t seedCount(std::size_t labeledCount, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "seed fraction must lie in (0, 1]");
    }
    const auto rounded =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labeledCount)));
    return std::min(labeledCount, std::max<std::size_t>(1, rounded));
}

std::uint64_t iterationStreamSeed(std::uint64_t rngSeed, std::uint64_t iteration) noexcept {
    return splitmix64(rngSeed ^ splitmix64(iteration));
}

SeedSet sampleSeeds(const TraceRaster& trace, double fraction, std::mt19937_64& rng) {
    const auto labeled = labeledPixels(trace);
    return sampleFromLabeled(trace, labeled, fraction, rng);
}

ClusterMap detail::growClusters(const LabColorPlane& lab, std::span<const Seed> seeds,
                                const RgrConfig& config, CentroidMode mode) {
    config.validate();
    if (seeds.empty()) {
        throw Error(ErrorCode::NoSeeds, "growClusters needs at least one seed");
    }
    const int width = lab.width();
    const int height = lab.height();
    const double invSpatial = 1.0 / config.resolvedSpatialScale(width, height);
    const double invColor = 1.0 / config.colorScale;

    Plane<std::uint32_t> ids(width, height, kUncommitted);
    std::vector<Centroid> centroids(seeds.size());
    std::vector<QueueEntry> storage;
    storage.reserve(seeds.size() + lab.size());
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, PopsLater> queue(PopsLater{},
                                                                             std::move(storage));

    std::vector<char> isSeed(lab.size(), 0);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const Seed& s = seeds[k];
        if (!lab.contains(s.x, s.y)) {
            throw Error(ErrorCode::OutOfRange, "seed outside the image");
        }
        const std::size_t idx = lab.index(s.x, s.y);
        if (isSeed[idx]) {
            throw Error(ErrorCode::InvalidArgument, "duplicate seed position");
        }
        isSeed[idx] = 1;
        const Lab& c = lab[idx];
        centroids[k] = Centroid{double(s.x), double(s.y), c.L, c.a, c.b, 1.0};
        queue.push(QueueEntry{0.0, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(idx)});
    }
    // Online mode accumulates sums; the seed itself is added when it is committed.
    if (mode == detail::CentroidMode::Online) {
        for (auto& c : centroids) {
            c = Centroid{};
        }
    }

    const auto distance = [&](std::size_t idx, int x, int y, std::uint32_t k) {
        const Centroid& c = centroids[k];
        double cx = c.x, cy = c.y, cL = c.L, ca = c.a, cb = c.b;
        if (mode == detail::CentroidMode::Online) {
            const double inv = 1.0 / c.count;
            cx *= inv, cy *= inv, cL *= inv, ca *= inv, cb *= inv;
        }
        const Lab& p = lab[idx];
        const double dx = x - cx, dy = y - cy;
        const double dL = p.L - cL, da = p.a - ca, db = p.b - cb;
        const double spatial = (dx * dx + dy * dy) * invSpatial * invSpatial;
        const double color = (dL * dL + da * da + db * db) * invColor * invColor;
        return std::sqrt(spatial + color);
    };

    const auto uwidth = static_cast<std::uint32_t>(width);
    while (!queue.empty()) {
        const QueueEntry top = queue.top();
        queue.pop();
        if (ids[top.pixel] != kUncommitted) {
            continue;
        }
        ids[top.pixel] = top.cluster;
        const int x = static_cast<int>(top.pixel % uwidth);
        const int y = static_cast<int>(top.pixel / uwidth);

        if (mode == detail::CentroidMode::Online) {
            Centroid& c = centroids[top.cluster];
            const Lab& p = lab[top.pixel];
            c.x += x, c.y += y, c.L += p.L, c.a += p.a, c.b += p.b;
            c.count += 1.0;
        }

        const auto visit = [&](int nx, int ny) {
            const std::size_t n = lab.index(nx, ny);
            if (ids[n] == kUncommitted) {
                queue.push(QueueEntry{distance(n, nx, ny, top.cluster), top.cluster,
                                      static_cast<std::uint32_t>(n)});
            }
        };
        if (x > 0) visit(x - 1, y);
        if (x + 1 < width) visit(x + 1, y);
        if (y > 0) visit(x, y - 1);
        if (y + 1 < height) visit(x, y + 1);
    }

    return ClusterMap{std::move(ids), static_cast<std::uint32_t>(seeds.size())};
}

ClusterMap growClusters(const LabColorPlane& lab, std::span<const Seed> seeds,
                        const RgrConfig& config) {
    return detail::growClusters(lab, seeds, config, detail::CentroidMode::Online);
}

LabelMask voteClusters(const ClusterMap& clusters, const TraceRaster& trace) {
    requireSameShape(clusters.clusterId, trace, "voteClusters");

    int numCategories = 0;
    for (const std::uint8_t v : trace.values()) {
        if (v != kUnlabeled) {
            numCategories = std::max(numCategories, int(v) + 1);
        }
    }
    LabelMask out(trace.width(), trace.height(), kUnlabeled);
    if (numCategories == 0) {
        return out;
    }

    const auto nc = static_cast<std::size_t>(numCategories);
    std::vector<std::uint32_t> tally(static_cast<std::size_t>(clusters.clusterCount) * nc, 0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const std::uint8_t v = trace[i];
        if (v == kUnlabeled) {
            continue;
        }
        const std::uint32_t k = clusters.clusterId[i];
        if (k >= clusters.clusterCount) {
            throw Error(ErrorCode::InvalidArgument, "cluster id out of range");
        }
        ++tally[k * nc + v];
    }

    std::vector<std::uint8_t> winner(clusters.clusterCount, kUnlabeled);
    for (std::size_t k = 0; k < clusters.clusterCount; ++k) {
        std::uint32_t best = 0;
        for (std::size_t c = 0; c < nc; ++c) {
            // Strict comparison keeps the smaller category on ties.
            if (tally[k * nc + c] > best) {
                best = tally[k * nc + c];
                winner[k] = static_cast<std::uint8_t>(c);
            }
        }
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t k = clusters.clusterId[i];
        if (k >= clusters.clusterCount) {
            throw Error(ErrorCode::InvalidArgument, "cluster id out of range");
        }
        out[i] = winner[k];
    }
    return out;
}

LikelihoodTensor::LikelihoodTensor(int width, int height, int numCategories, int iterations)
    : width_(width), height_(height), numCategories_(numCategories), iterations_(iterations) {
    if (width < 1 || height < 1 || numCategories < 1 || numCategories > 255 || iterations < 1) {
        throw Error(ErrorCode::InvalidArgument, "invalid likelihood tensor shape");
    }
    counts_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                       static_cast<std::size_t>(numCategories),
                   0);
}

void LikelihoodTensor::accumulate(const LabelMask& iterationLabels) {
    if (iterationLabels.width() != width_ || iterationLabels.height() != height_) {
        throw Error(ErrorCode::DimensionMismatch, "likelihood accumulate: shape mismatch");
    }
    const auto nc = static_cast<std::size_t>(numCategories_);
    for (std::size_t i = 0; i < iterationLabels.size(); ++i) {
        const std::uint8_t c = iterationLabels[i];
        if (c >= numCategories_) {
            throw Error(ErrorCode::InvalidArgument, "iteration label outside category range");
        }
        ++counts_[i * nc + c];
    }
}

LabelMask LikelihoodTensor::argmax() const {
    LabelMask out(width_, height_, kUnlabeled);
    const auto nc = static_cast<std::size_t>(numCategories_);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint16_t* row = counts_.data() + i * nc;
        std::uint16_t best = 0;
        for (std::size_t c = 0; c < nc; ++c) {
            if (row[c] > best) {
                best = row[c];
                out[i] = static_cast<std::uint8_t>(c);
            }
        }
    }
    return out;
}

Refinement refine(const RgbImage& image, const TraceRaster& trace, const RgrConfig& config,
                  int numCategories) {
    config.validate();
    requireSameShape(image, trace, "refine");

    const auto labeled = labeledPixels(trace);
    if (labeled.empty()) {
        throw Error(ErrorCode::EmptyTrace, "trace has no labeled pixels");
    }
    int maxLabel = 0;
    for (const std::uint32_t idx : labeled) {
        maxLabel = std::max(maxLabel, int(trace[idx]));
    }
    if (numCategories == 0) {
        numCategories = maxLabel + 1;
    } else if (maxLabel >= numCategories) {
        throw Error(ErrorCode::OutOfRange, "trace label " + std::to_string(maxLabel) +
                                               " exceeds category count " +
                                               std::to_string(numCategories));
    }

    const LabColorPlane lab = toLab(image);
    const auto iterations = static_cast<std::size_t>(config.mcIterations);
    std::vector<LabelMask> perIteration(iterations);

    const auto runIteration = [&](std::size_t i) {
        std::mt19937_64 rng(iterationStreamSeed(config.rngSeed, i));
        const SeedSet seeds = sampleFromLabeled(trace, labeled, config.seedFraction, rng);
        const ClusterMap clusters = growClusters(lab, seeds, config);
        perIteration[i] = voteClusters(clusters, trace);
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workerThreads),
                                               iterations);
    if (workers <= 1) {
        for (std::size_t i = 0; i < iterations; ++i) {
            runIteration(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t i = next++; i < iterations; i = next++) {
                            runIteration(i);
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    Refinement result{LikelihoodTensor(image.width(), image.height(), numCategories,
                                       config.mcIterations),
                      LabelMask{}};
    for (const LabelMask& labels : perIteration) {
        result.likelihood.accumulate(labels);
    }
    result.mask = result.likelihood.argmax();
    return result;
}

} // namespace tracegrow
