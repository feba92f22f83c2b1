#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace oracle {

Plane<std::uint32_t> frozenCentroidLabels(const LabColorPlane& lab, std::span<const Seed> seeds,
                                          double spatialScale, double colorScale) {
    constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    const int w = lab.width();
    const int h = lab.height();
    Plane<std::uint32_t> label(w, h, kNone);
    Plane<double> level(w, h, 0.0);

    auto dist = [&](int x, int y, std::size_t k) {
        const Seed& s = seeds[k];
        const Lab& c = lab.at(s.x, s.y);
        const Lab& v = lab.at(x, y);
        const double ds = std::hypot(double(x - s.x), double(y - s.y)) / spatialScale;
        const double dl =
            std::sqrt((v.L - c.L) * (v.L - c.L) + (v.a - c.a) * (v.a - c.a) +
                      (v.b - c.b) * (v.b - c.b)) /
            colorScale;
        return std::sqrt(ds * ds + dl * dl);
    };

    // Seeds are committed first, in cluster order, at cost zero.
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (label.at(seeds[k].x, seeds[k].y) == kNone) {
            label.at(seeds[k].x, seeds[k].y) = static_cast<std::uint32_t>(k);
        }
    }

    const int dx[] = {1, -1, 0, 0};
    const int dy[] = {0, 0, 1, -1};
    while (true) {
        using Key = std::tuple<double, double, std::uint32_t, std::size_t>;
        std::optional<Key> best;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (label.at(x, y) != kNone) continue;
                // Cheapest committed neighbour per cluster.
                std::map<std::uint32_t, double> reach;
                for (int n = 0; n < 4; ++n) {
                    const int qx = x + dx[n], qy = y + dy[n];
                    if (!label.contains(qx, qy) || label.at(qx, qy) == kNone) continue;
                    const std::uint32_t k = label.at(qx, qy);
                    const double lv = level.at(qx, qy);
                    auto it = reach.find(k);
                    if (it == reach.end() || lv < it->second) reach[k] = lv;
                }
                for (const auto& [k, lv] : reach) {
                    const double d = dist(x, y, k);
                    const Key key{std::max(d, lv), d, k, label.index(x, y)};
                    if (!best || key < *best) best = key;
                }
            }
        }
        if (!best) break;
        const auto [cost, d, k, idx] = *best;
        label[idx] = k;
        level[idx] = cost;
    }
    return label;
}

std::map<std::uint8_t, Counts> overlapCounts(const LabelMask& pred, const LabelMask& gt,
                                             const std::set<std::uint8_t>& categories) {
    std::map<std::uint8_t, Counts> out;
    for (const std::uint8_t c : categories) {
        Counts k;
        for (int y = 0; y < gt.height(); ++y) {
            for (int x = 0; x < gt.width(); ++x) {
                if (gt.at(x, y) == 255) continue;
                const bool p = pred.at(x, y) == c;
                const bool g = gt.at(x, y) == c;
                k.intersection += (p && g) ? 1 : 0;
                k.unionCount += (p || g) ? 1 : 0;
            }
        }
        out[c] = k;
    }
    return out;
}

std::pair<double, int> meanIou(const std::map<std::uint8_t, Counts>& counts) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [c, k] : counts) {
        if (k.unionCount == 0) continue;
        sum += double(k.intersection) / double(k.unionCount);
        ++n;
    }
    return {sum, n};
}

LabelMask majority(std::span<const LabelMask> masks) {
    const LabelMask& first = masks.front();
    LabelMask out(first.width(), first.height(), std::uint8_t{0});
    for (int y = 0; y < first.height(); ++y) {
        for (int x = 0; x < first.width(); ++x) {
            int hist[256] = {};
            for (const LabelMask& m : masks) ++hist[m.at(x, y)];
            int bestValue = 0;
            for (int v = 1; v < 256; ++v) {
                if (hist[v] > hist[bestValue]) bestValue = v;
            }
            out.at(x, y) = static_cast<std::uint8_t>(bestValue);
        }
    }
    return out;
}

std::set<std::pair<int, int>> stampCover(const std::vector<std::pair<int, int>>& path,
                                         int thickness, int width, int height) {
    std::set<std::pair<int, int>> out;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (const auto& [px, py] : path) {
                if (x >= px && x < px + thickness && y >= py && y < py + thickness) {
                    out.insert({x, y});
                    break;
                }
            }
        }
    }
    return out;
}

RgbImage randomImage(int width, int height, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> channel(0, 255);
    RgbImage img(width, height);
    for (auto& px : img.values()) {
        px = Rgb{std::uint8_t(channel(rng)), std::uint8_t(channel(rng)),
                 std::uint8_t(channel(rng))};
    }
    return img;
}

LabelMask randomMask(int width, int height, int categories, double voidFraction,
                     std::mt19937_64& rng) {
    std::uniform_int_distribution<int> cat(0, categories - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LabelMask m(width, height, std::uint8_t{0});
    for (auto& v : m.values()) {
        v = u(rng) < voidFraction ? std::uint8_t{255} : static_cast<std::uint8_t>(cat(rng));
    }
    return m;
}

TraceRaster randomTrace(int width, int height, int categories, double density,
                        std::mt19937_64& rng) {
    std::uniform_int_distribution<int> cat(0, categories - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TraceRaster t(width, height);
    for (auto& v : t.values()) {
        if (u(rng) < density) v = static_cast<std::uint8_t>(cat(rng));
    }
    if (t.labeledCount() == 0) {
        std::uniform_int_distribution<int> px(0, width * height - 1);
        t[static_cast<std::size_t>(px(rng))] = static_cast<std::uint8_t>(cat(rng));
    }
    return t;
}

} // namespace oracle
