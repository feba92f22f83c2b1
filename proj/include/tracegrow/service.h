#pragma once

// Annotation sessions over datasets stored as flat directory trees:
//
//   <dataRoot>/<datasetId>/manifest.json
//   <dataRoot>/<datasetId>/images/...       source images (PNG or JPEG)
//   <dataRoot>/<datasetId>/gt/...           indexed-PNG ground truth
//   <dataRoot>/<datasetId>/submissions/...  accepted masks
//   <dataRoot>/<datasetId>/submissions.log  one JSON record per line, append-only
//
// Annotators work through batches. A batch mixes images that have ground
// truth with images that do not; which is which is never exposed to clients.
// Submitting a batch checks every ground-truth image against the checkpoint
// threshold: one failure re-issues the same images with cleared traces, a pass
// persists all masks as submission records.

#include <tracegrow/evaluation.h>
#include <tracegrow/image_io.h>
#include <tracegrow/rgr.h>
#include <tracegrow/trace.h>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace tracegrow::service {

using nlohmann::json;

struct CategoryInfo {
    std::uint8_t id = 0;
    std::string name;
    Rgb color;
};

struct BoundingBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

struct ImageEntry {
    std::string id;
    std::filesystem::path file;  ///< relative to the dataset directory
    std::optional<std::filesystem::path> groundTruth;
    int objectCount = 1;
    std::vector<BoundingBox> boxes;
};

struct CheckpointPolicy {
    int batchSize = 3;
    int groundTruthPerBatch = 1;
    double threshold = kDefaultCheckpointThreshold;
};

struct DatasetManifest {
    std::string datasetId;
    std::vector<CategoryInfo> categories;
    std::vector<ImageEntry> images;
    CheckpointPolicy checkpoint;
    std::filesystem::path directory;

    /// Parses manifest.json text; `directory` anchors relative paths.
    static DatasetManifest parse(std::string_view text, std::filesystem::path directory);
    json toJson() const;

    Palette palette() const;
    const ImageEntry& image(const std::string& imageId) const;
    /// Throws if any referenced file is missing or a ground truth falls outside the palette.
    void validateFiles() const;
};

struct DatasetSummary {
    std::string datasetId;
    std::size_t imageCount = 0;
    std::vector<CategoryInfo> categories;
};

enum class BatchStatus { InProgress, Passed, Failed };

std::string_view toString(BatchStatus status) noexcept;

struct ImageProgress {
    std::string imageId;
    int objectCount = 1;
    std::vector<BoundingBox> boxes;
    std::vector<Stroke> strokes;
    std::optional<TraceRaster> trace;
    std::optional<LabelMask> mask;
    int refineCount = 0;
    /// Annotation time of closed intervals; an interval opens at the first
    /// trace after (re)issue and closes at batch submission.
    double accumulatedSeconds = 0.0;
    std::optional<double> intervalStart;
    std::optional<double> firstTraceAt;
};

struct SessionState {
    std::string sessionId;
    std::string userId;
    std::string datasetId;
    std::uint64_t rngSeed = 0;
    int batchNumber = 0;
    int attempt = 1;
    BatchStatus status = BatchStatus::InProgress;
    std::vector<ImageProgress> batch;
    /// Parallel to `batch`. Server-side only.
    std::vector<bool> hasReference;

    double elapsedSeconds(std::size_t slot, double now) const;
};

/// Everything a client may see about a session.
json clientView(const SessionState& session, double now);

struct LikelihoodSummary {
    /// Mean over pixels of the winning category's likelihood.
    double meanConfidence = 0.0;
    /// Fraction of pixels assigned to each category.
    std::map<std::uint8_t, double> coverage;
};

struct RefineResult {
    std::string imageId;
    LabelMask mask;
    Bytes maskPng;
    LikelihoodSummary likelihood;
    int refineCount = 0;
};

struct ScoredImage {
    IouReport iou;
    ScoreInput input;
    ScoreReport score;
    bool passed = false;
};

struct BatchVerdict {
    bool passed = false;
    BatchStatus status = BatchStatus::InProgress;
    /// Only images with ground truth are scored. Kept in batch order internally;
    /// clients receive them without image ids.
    std::vector<ScoredImage> scores;
    std::vector<std::string> imageIds;
    int attempt = 1;
};

struct SubmissionRecord {
    std::uint64_t seq = 0;
    std::string sessionId;
    std::string userId;
    std::string imageId;
    std::string maskFile;  ///< relative to the dataset directory
    double elapsedSeconds = 0.0;
    int refineCount = 0;
    double submittedAt = 0.0;
    std::optional<double> firstTraceAt;
    std::optional<IouReport> iou;
    std::optional<ScoreReport> score;

    json toJson() const;
    static SubmissionRecord fromJson(const json& j);
};

/// Seconds since some fixed origin.
using Clock = std::function<double()>;

Clock systemClock();

struct ServiceConfig {
    std::filesystem::path dataRoot;
    /// Fixes batch assembly and every session's refinement seed. Unset: random.
    std::optional<std::uint64_t> rngSeed;
    RgrConfig rgr;
    Clock clock;
};

class AnnotationService {
public:
    /// Loads every <dataRoot>/*/manifest.json. Unreadable or invalid datasets
    /// are skipped and reported through loadErrors(). Throws Io if dataRoot
    /// is not a directory.
    explicit AnnotationService(ServiceConfig config);

    std::vector<DatasetSummary> listDatasets() const;
    const DatasetManifest& dataset(const std::string& datasetId) const;
    const std::vector<std::string>& loadErrors() const noexcept { return loadErrors_; }

    /// Raw bytes of a source image; searches all datasets unless one is named.
    Bytes imageBytes(const std::string& imageId,
                     const std::optional<std::string>& datasetId = std::nullopt) const;

    SessionState createSession(const std::string& userId, const std::string& datasetId,
                               std::optional<std::uint64_t> rngSeed = std::nullopt);
    SessionState session(const std::string& sessionId) const;

    /// Replaces the image's stroke list and rasterizes it.
    std::size_t putTrace(const std::string& sessionId, const std::string& imageId,
                         std::vector<Stroke> strokes);
    RefineResult refineImage(const std::string& sessionId, const std::string& imageId);
    BatchVerdict submitBatch(const std::string& sessionId);
    /// Assigns a fresh batch after a pass.
    SessionState nextBatch(const std::string& sessionId);

    /// ustar archive of masks/<file>.png plus submissions.log. Empty when
    /// nothing was submitted.
    Bytes exportMasks(const std::string& datasetId) const;
    std::vector<SubmissionRecord> submissions(const std::string& datasetId) const;

    double now() const { return config_.clock(); }

private:
    struct SessionSlot {
        std::mutex mutex;
        SessionState state;
    };
    struct DatasetRuntime {
        DatasetManifest manifest;
        std::mutex logMutex;
        std::uint64_t nextSeq = 0;
    };

    std::shared_ptr<SessionSlot> slot(const std::string& sessionId) const;
    DatasetRuntime& runtime(const std::string& datasetId) const;
    std::shared_ptr<const RgbImage> loadImage(const DatasetManifest& ds,
                                              const ImageEntry& entry) const;
    void assignBatch(SessionState& state);
    static std::size_t slotOf(const SessionState& state, const std::string& imageId);
    void persist(DatasetRuntime& ds, const SessionState& state,
                 const std::vector<std::optional<ScoredImage>>& scored, double now);

    ServiceConfig config_;
    std::map<std::string, std::unique_ptr<DatasetRuntime>> datasets_;
    std::vector<std::string> loadErrors_;

    mutable std::shared_mutex sessionsMutex_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::uint64_t sessionCounter_ = 0;

    std::mutex assignMutex_;
    std::mt19937_64 assignRng_;
    /// (datasetId, userId) -> image ids already handed to that user.
    std::map<std::pair<std::string, std::string>, std::set<std::string>> assigned_;

    mutable std::mutex imageCacheMutex_;
    mutable std::map<std::string, std::shared_ptr<const RgbImage>> imageCache_;
};

json toJson(const IouReport& report);
json toJson(const ScoreReport& report);
json toJson(const DatasetSummary& summary);
json toJson(const RefineResult& result);
/// Scores without image ids, so the reply does not reveal which images were checked.
json clientView(const BatchVerdict& verdict);

} // namespace tracegrow::service
