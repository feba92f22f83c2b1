#pragma once

#include <tracegrow/service.h>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fixture {

using namespace tracegrow;
namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "tracegrow");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
};

/// Manually advanced clock for the service.
struct ManualClock {
    std::shared_ptr<double> seconds = std::make_shared<double>(1000.0);
    service::Clock clock() const {
        return [s = seconds] { return *s; };
    }
    void advance(double dt) const { *seconds += dt; }
};

// Four vertical stripes A, B, C, D of distinct, Lab-distant colours.
inline constexpr int kStripeWidth = 16;
inline constexpr int kStripeHeight = 24;
inline constexpr int kStripes = 4;

RgbImage stripeImage();
/// Ground truth: A, B -> 0; C -> 1; D -> void.
LabelMask stripeGroundTruth();
/// One short horizontal pencil stroke per stripe, with the given categories.
std::vector<Stroke> stripeStrokes(const std::vector<std::uint8_t>& perStripe);
/// Strokes whose refined mask scores mean IoU 1.0 against stripeGroundTruth().
std::vector<Stroke> passingStrokes();
/// Strokes whose refined mask scores mean IoU 0.5 (IoU 0.5 for both categories).
std::vector<Stroke> failingStrokes();

struct DatasetSpec {
    std::string id = "stripes";
    int referenceImages = 3;
    int plainImages = 6;
    int batchSize = 3;
    int groundTruthPerBatch = 1;
    double threshold = 0.70;
};

/// Writes manifest.json, images/ and gt/ under root/spec.id. Image ids are
/// "ref<i>" (with ground truth) and "img<i>".
void writeStripeDataset(const fs::path& root, const DatasetSpec& spec = {});

service::ServiceConfig serviceConfig(const fs::path& root, const ManualClock& clock,
                                     std::uint64_t seed = 7);

} // namespace fixture
