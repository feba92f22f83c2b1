#include "fixtures.h"

#include <tracegrow/image_io.h>

#include <atomic>
#include <random>

#include <unistd.h>

namespace fixture {

namespace {

constexpr Rgb kStripeColors[kStripes] = {
    {20, 40, 160}, {230, 220, 30}, {30, 170, 60}, {200, 30, 120}};

} // namespace

TempDir::TempDir(const std::string& prefix) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(rd()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

RgbImage stripeImage() {
    RgbImage img(kStripeWidth * kStripes, kStripeHeight);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            img.at(x, y) = kStripeColors[x / kStripeWidth];
        }
    }
    return img;
}

LabelMask stripeGroundTruth() {
    constexpr std::uint8_t perStripe[kStripes] = {0, 0, 1, 255};
    LabelMask m(kStripeWidth * kStripes, kStripeHeight, std::uint8_t{0});
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            m.at(x, y) = perStripe[x / kStripeWidth];
        }
    }
    return m;
}

std::vector<Stroke> stripeStrokes(const std::vector<std::uint8_t>& perStripe) {
    std::vector<Stroke> out;
    for (int s = 0; s < kStripes; ++s) {
        const int x0 = s * kStripeWidth + 4;
        const int y = kStripeHeight / 2;
        out.push_back(Stroke{Tool::Pencil, perStripe[static_cast<std::size_t>(s)], 2,
                             {Point{x0, y}, Point{x0 + 6, y}}});
    }
    return out;
}

std::vector<Stroke> passingStrokes() { return stripeStrokes({0, 0, 1, 1}); }

// pred A -> 0, B..D -> 1: IoU(0) = |A| / |A u B| = 1/2, IoU(1) = |C| / |B u C| = 1/2.
std::vector<Stroke> failingStrokes() { return stripeStrokes({0, 1, 1, 1}); }

void writeStripeDataset(const fs::path& root, const DatasetSpec& spec) {
    const fs::path dir = root / spec.id;
    const Bytes image = encodeRgbPng(stripeImage());
    service::json images = service::json::array();
    for (int i = 0; i < spec.referenceImages; ++i) {
        const std::string id = "ref" + std::to_string(i);
        writeFile(dir / "images" / (id + ".png"), image);
        writeFile(dir / "gt" / (id + ".png"),
                  encodeMaskPng(stripeGroundTruth(), Palette::pascalVoc(2)));
        images.push_back({{"id", id},
                          {"file", "images/" + id + ".png"},
                          {"groundTruth", "gt/" + id + ".png"},
                          {"objectCount", 1}});
    }
    for (int i = 0; i < spec.plainImages; ++i) {
        const std::string id = "img" + std::to_string(i);
        writeFile(dir / "images" / (id + ".png"), image);
        images.push_back({{"id", id}, {"file", "images/" + id + ".png"}, {"objectCount", 2}});
    }
    const service::json manifest = {
        {"datasetId", spec.id},
        {"categories",
         {{{"id", 0}, {"name", "background"}, {"color", {0, 0, 0}}},
          {{"id", 1}, {"name", "object"}, {"color", {128, 0, 0}}}}},
        {"images", images},
        {"checkpoint",
         {{"batchSize", spec.batchSize},
          {"groundTruthPerBatch", spec.groundTruthPerBatch},
          {"threshold", spec.threshold}}}};
    writeFile(dir / "manifest.json", manifest.dump(2));
}

service::ServiceConfig serviceConfig(const fs::path& root, const ManualClock& clock,
                                     std::uint64_t seed) {
    service::ServiceConfig cfg;
    cfg.dataRoot = root;
    cfg.rngSeed = seed;
    cfg.clock = clock.clock();
    return cfg;
}

} // namespace fixture
