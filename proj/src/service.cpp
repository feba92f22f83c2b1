#include <tracegrow/service.h>

#include <tracegrow/tar.h>

#include "random_util.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace tracegrow::service {

namespace fs = std::filesystem;

namespace {

Rgb parseColor(const json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "colour must be [r, g, b]");
    }
    const auto channel = [](const json& v) {
        const int c = v.get<int>();
        if (c < 0 || c > 255) {
            throw Error(ErrorCode::InvalidArgument, "colour channel out of range");
        }
        return static_cast<std::uint8_t>(c);
    };
    return Rgb{channel(j[0]), channel(j[1]), channel(j[2])};
}

json colorJson(Rgb c) { return json::array({c.r, c.g, c.b}); }

// Keeps ids usable as file-name fragments.
std::string sanitize(std::string_view id) {
    std::string out;
    for (const char ch : id) {
        const bool safe = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                          (ch >= '0' && ch <= '9') || ch == '-' || ch == '.';
        out += safe ? ch : '_';
    }
    return out.substr(0, 32);
}

std::string readText(const fs::path& path) {
    const Bytes bytes = readFile(path);
    return std::string(bytes.begin(), bytes.end());
}

IouReport iouFromJson(const json& j) {
    IouReport r;
    r.meanIou = j.at("meanIou").get<double>();
    for (const auto& [key, value] : j.at("perCategory").items()) {
        const auto c = static_cast<std::uint8_t>(std::stoi(key));
        r.perCategoryIou[c] = value.get<double>();
        r.categoriesEvaluated.insert(c);
    }
    return r;
}

ScoreReport scoreFromJson(const json& j) {
    ScoreReport s;
    s.baseScore = j.at("baseScore").get<int>();
    s.bonus = j.at("bonus").get<double>();
    s.finalScore = j.at("finalScore").get<int>();
    s.expectedTime = j.at("expectedTime").get<double>();
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest DatasetManifest::parse(std::string_view text, fs::path directory) {
    DatasetManifest m;
    m.directory = std::move(directory);
    try {
        const json doc = json::parse(text);
        m.datasetId = doc.value("datasetId", m.directory.filename().string());
        if (m.datasetId.empty()) {
            throw Error(ErrorCode::InvalidArgument, "manifest has an empty datasetId");
        }

        for (const json& c : doc.at("categories")) {
            CategoryInfo info;
            const int id = c.at("id").get<int>();
            if (id != static_cast<int>(m.categories.size())) {
                throw Error(ErrorCode::InvalidArgument,
                            "category ids must be 0, 1, 2, ... in order");
            }
            info.id = static_cast<std::uint8_t>(id);
            info.name = c.value("name", std::to_string(id));
            info.color = parseColor(c.at("color"));
            m.categories.push_back(std::move(info));
            if (m.categories.size() > 254) {
                throw Error(ErrorCode::InvalidArgument, "at most 254 categories");
            }
        }
        if (m.categories.empty()) {
            throw Error(ErrorCode::InvalidArgument, "manifest lists no categories");
        }

        std::set<std::string> ids;
        for (const json& e : doc.at("images")) {
            ImageEntry img;
            img.id = e.at("id").get<std::string>();
            if (img.id.empty() || !ids.insert(img.id).second) {
                throw Error(ErrorCode::InvalidArgument, "image ids must be unique and non-empty");
            }
            img.file = e.at("file").get<std::string>();
            if (e.contains("groundTruth") && !e["groundTruth"].is_null()) {
                img.groundTruth = fs::path(e["groundTruth"].get<std::string>());
            }
            img.objectCount = e.value("objectCount", 1);
            if (img.objectCount < 1) {
                throw Error(ErrorCode::InvalidObjectCount, "objectCount must be at least 1");
            }
            for (const json& b : e.value("boxes", json::array())) {
                img.boxes.push_back(BoundingBox{b.at(0).get<int>(), b.at(1).get<int>(),
                                                b.at(2).get<int>(), b.at(3).get<int>()});
            }
            m.images.push_back(std::move(img));
        }

        if (doc.contains("checkpoint")) {
            const json& cp = doc["checkpoint"];
            m.checkpoint.batchSize = cp.value("batchSize", m.checkpoint.batchSize);
            m.checkpoint.groundTruthPerBatch =
                cp.value("groundTruthPerBatch", m.checkpoint.groundTruthPerBatch);
            m.checkpoint.threshold = cp.value("threshold", m.checkpoint.threshold);
        }
        const CheckpointPolicy& cp = m.checkpoint;
        if (cp.batchSize < 1 || cp.groundTruthPerBatch < 1 ||
            cp.groundTruthPerBatch > cp.batchSize) {
            throw Error(ErrorCode::InvalidArgument,
                        "checkpoint policy needs 1 <= groundTruthPerBatch <= batchSize");
        }
        if (!(cp.threshold > 0.0 && cp.threshold < 1.0)) {
            throw Error(ErrorCode::OutOfRange, "checkpoint threshold must lie in (0, 1)");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("manifest: ") + e.what());
    }
    m.palette();  // colour uniqueness
    return m;
}

json DatasetManifest::toJson() const {
    json cats = json::array();
    for (const auto& c : categories) {
        cats.push_back({{"id", c.id}, {"name", c.name}, {"color", colorJson(c.color)}});
    }
    json imgs = json::array();
    for (const auto& i : images) {
        json boxes = json::array();
        for (const auto& b : i.boxes) {
            boxes.push_back({b.x, b.y, b.width, b.height});
        }
        json e = {{"id", i.id}, {"file", i.file.generic_string()},
                  {"objectCount", i.objectCount}, {"boxes", boxes}};
        if (i.groundTruth) {
            e["groundTruth"] = i.groundTruth->generic_string();
        }
        imgs.push_back(std::move(e));
    }
    return {{"datasetId", datasetId},
            {"categories", cats},
            {"images", imgs},
            {"checkpoint",
             {{"batchSize", checkpoint.batchSize},
              {"groundTruthPerBatch", checkpoint.groundTruthPerBatch},
              {"threshold", checkpoint.threshold}}}};
}

Palette DatasetManifest::palette() const {
    std::vector<Rgb> colors;
    for (const auto& c : categories) {
        colors.push_back(c.color);
    }
    return Palette(std::move(colors));
}

const ImageEntry& DatasetManifest::image(const std::string& imageId) const {
    for (const auto& i : images) {
        if (i.id == imageId) {
            return i;
        }
    }
    throw Error(ErrorCode::UnknownImage, "no image '" + imageId + "' in " + datasetId);
}

void DatasetManifest::validateFiles() const {
    const Palette pal = palette();
    for (const auto& i : images) {
        if (!fs::is_regular_file(directory / i.file)) {
            throw Error(ErrorCode::Io, "missing image file " + (directory / i.file).string());
        }
        if (i.groundTruth) {
            requirePaletteValues(loadMaskPng(directory / *i.groundTruth), pal);
        }
    }
}

// ---------------------------------------------------------------------------
// Session state

std::string_view toString(BatchStatus status) noexcept {
    switch (status) {
        case BatchStatus::InProgress: return "in-progress";
        case BatchStatus::Passed:     return "passed";
        case BatchStatus::Failed:     return "failed";
    }
    return "in-progress";
}

double SessionState::elapsedSeconds(std::size_t slot, double now) const {
    const ImageProgress& p = batch.at(slot);
    return p.accumulatedSeconds + (p.intervalStart ? std::max(0.0, now - *p.intervalStart) : 0.0);
}

json clientView(const SessionState& s, double now) {
    json images = json::array();
    for (std::size_t i = 0; i < s.batch.size(); ++i) {
        const ImageProgress& p = s.batch[i];
        json boxes = json::array();
        for (const auto& b : p.boxes) {
            boxes.push_back({b.x, b.y, b.width, b.height});
        }
        images.push_back({{"imageId", p.imageId},
                          {"objectCount", p.objectCount},
                          {"boxes", boxes},
                          {"strokeCount", p.strokes.size()},
                          {"refined", p.mask.has_value()},
                          {"refineCount", p.refineCount},
                          {"elapsedSeconds", s.elapsedSeconds(i, now)}});
    }
    return {{"sessionId", s.sessionId},   {"userId", s.userId},
            {"datasetId", s.datasetId},   {"rngSeed", s.rngSeed},
            {"batchNumber", s.batchNumber}, {"attempt", s.attempt},
            {"status", toString(s.status)}, {"images", images}};
}

json toJson(const IouReport& r) {
    json per = json::object();
    for (const auto& [c, v] : r.perCategoryIou) {
        per[std::to_string(c)] = v;
    }
    return {{"meanIou", r.meanIou}, {"perCategory", per}};
}

json toJson(const ScoreReport& s) {
    return {{"baseScore", s.baseScore},
            {"bonus", s.bonus},
            {"finalScore", s.finalScore},
            {"expectedTime", s.expectedTime}};
}

json toJson(const DatasetSummary& d) {
    json cats = json::array();
    for (const auto& c : d.categories) {
        cats.push_back({{"id", c.id}, {"name", c.name}, {"color", colorJson(c.color)}});
    }
    return {{"datasetId", d.datasetId}, {"imageCount", d.imageCount}, {"categories", cats}};
}

json toJson(const RefineResult& r) {
    json coverage = json::object();
    for (const auto& [c, v] : r.likelihood.coverage) {
        coverage[std::to_string(c)] = v;
    }
    return {{"imageId", r.imageId},
            {"width", r.mask.width()},
            {"height", r.mask.height()},
            {"mask", base64Encode(r.maskPng)},
            {"maskEncoding", "png+base64"},
            {"refineCount", r.refineCount},
            {"likelihood", {{"meanConfidence", r.likelihood.meanConfidence},
                            {"coverage", coverage}}}};
}

json clientView(const BatchVerdict& v) {
    json scores = json::array();
    for (const ScoredImage& s : v.scores) {
        json item = toJson(s.score);
        item["meanIou"] = s.iou.meanIou;
        item["elapsedSeconds"] = s.input.elapsedSeconds;
        item["passed"] = s.passed;
        scores.push_back(std::move(item));
    }
    return {{"passed", v.passed},
            {"status", toString(v.status)},
            {"attempt", v.attempt},
            {"imageIds", v.imageIds},
            {"scores", scores}};
}

json SubmissionRecord::toJson() const {
    json j = {{"seq", seq},
              {"sessionId", sessionId},
              {"userId", userId},
              {"imageId", imageId},
              {"mask", maskFile},
              {"elapsedSeconds", elapsedSeconds},
              {"refineCount", refineCount},
              {"submittedAt", submittedAt}};
    if (firstTraceAt) {
        j["firstTraceAt"] = *firstTraceAt;
    }
    if (iou) {
        j["iou"] = service::toJson(*iou);
    }
    if (score) {
        j["score"] = service::toJson(*score);
    }
    return j;
}

SubmissionRecord SubmissionRecord::fromJson(const json& j) {
    SubmissionRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.sessionId = j.at("sessionId").get<std::string>();
    r.userId = j.at("userId").get<std::string>();
    r.imageId = j.at("imageId").get<std::string>();
    r.maskFile = j.at("mask").get<std::string>();
    r.elapsedSeconds = j.value("elapsedSeconds", 0.0);
    r.refineCount = j.value("refineCount", 0);
    r.submittedAt = j.value("submittedAt", 0.0);
    if (j.contains("firstTraceAt")) {
        r.firstTraceAt = j["firstTraceAt"].get<double>();
    }
    if (j.contains("iou")) {
        r.iou = iouFromJson(j["iou"]);
    }
    if (j.contains("score")) {
        r.score = scoreFromJson(j["score"]);
    }
    return r;
}

Clock systemClock() {
    return [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };
}

// ---------------------------------------------------------------------------
// Service

AnnotationService::AnnotationService(ServiceConfig config) : config_(std::move(config)) {
    if (!config_.clock) {
        config_.clock = systemClock();
    }
    config_.rgr.validate();
    if (!fs::is_directory(config_.dataRoot)) {
        throw Error(ErrorCode::Io, "data root is not a directory: " + config_.dataRoot.string());
    }
    assignRng_.seed(config_.rngSeed ? *config_.rngSeed : std::random_device{}());

    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(config_.dataRoot)) {
        if (entry.is_directory() && fs::is_regular_file(entry.path() / "manifest.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());

    for (const fs::path& dir : dirs) {
        try {
            auto rt = std::make_unique<DatasetRuntime>();
            rt->manifest = DatasetManifest::parse(readText(dir / "manifest.json"), dir);
            rt->manifest.validateFiles();
            if (datasets_.count(rt->manifest.datasetId)) {
                throw Error(ErrorCode::InvalidArgument,
                            "duplicate datasetId " + rt->manifest.datasetId);
            }
            const fs::path log = dir / "submissions.log";
            if (fs::exists(log)) {
                std::ifstream in(log);
                std::string line;
                while (std::getline(in, line)) {
                    if (!line.empty()) {
                        rt->nextSeq = std::max(
                            rt->nextSeq, json::parse(line).at("seq").get<std::uint64_t>() + 1);
                    }
                }
            }
            const std::string id = rt->manifest.datasetId;
            datasets_.emplace(id, std::move(rt));
        } catch (const std::exception& e) {
            loadErrors_.push_back(dir.filename().string() + ": " + e.what());
            std::clog << "tracegrow: skipping dataset " << dir << ": " << e.what() << '\n';
        }
    }
}

std::vector<DatasetSummary> AnnotationService::listDatasets() const {
    std::vector<DatasetSummary> out;
    for (const auto& [id, rt] : datasets_) {
        out.push_back(DatasetSummary{id, rt->manifest.images.size(), rt->manifest.categories});
    }
    return out;
}

AnnotationService::DatasetRuntime& AnnotationService::runtime(const std::string& datasetId) const {
    const auto it = datasets_.find(datasetId);
    if (it == datasets_.end()) {
        throw Error(ErrorCode::UnknownDataset, "unknown dataset '" + datasetId + "'");
    }
    return *it->second;
}

const DatasetManifest& AnnotationService::dataset(const std::string& datasetId) const {
    return runtime(datasetId).manifest;
}

Bytes AnnotationService::imageBytes(const std::string& imageId,
                                    const std::optional<std::string>& datasetId) const {
    if (datasetId) {
        const DatasetManifest& m = dataset(*datasetId);
        return readFile(m.directory / m.image(imageId).file);
    }
    const DatasetManifest* found = nullptr;
    const ImageEntry* entry = nullptr;
    for (const auto& [id, rt] : datasets_) {
        for (const auto& img : rt->manifest.images) {
            if (img.id == imageId) {
                if (found) {
                    throw Error(ErrorCode::InvalidArgument,
                                "image id '" + imageId + "' is ambiguous; name the dataset");
                }
                found = &rt->manifest;
                entry = &img;
            }
        }
    }
    if (!found) {
        throw Error(ErrorCode::UnknownImage, "unknown image '" + imageId + "'");
    }
    return readFile(found->directory / entry->file);
}

std::shared_ptr<const RgbImage> AnnotationService::loadImage(const DatasetManifest& ds,
                                                             const ImageEntry& entry) const {
    const std::string key = ds.datasetId + '\n' + entry.id;
    {
        std::lock_guard lock(imageCacheMutex_);
        if (const auto it = imageCache_.find(key); it != imageCache_.end()) {
            return it->second;
        }
    }
    auto image = std::make_shared<const RgbImage>(loadRgbImage(ds.directory / entry.file));
    std::lock_guard lock(imageCacheMutex_);
    return imageCache_.emplace(key, std::move(image)).first->second;
}

std::shared_ptr<AnnotationService::SessionSlot> AnnotationService::slot(
    const std::string& sessionId) const {
    std::shared_lock lock(sessionsMutex_);
    const auto it = sessions_.find(sessionId);
    if (it == sessions_.end()) {
        throw Error(ErrorCode::UnknownSession, "unknown session '" + sessionId + "'");
    }
    return it->second;
}

std::size_t AnnotationService::slotOf(const SessionState& state, const std::string& imageId) {
    for (std::size_t i = 0; i < state.batch.size(); ++i) {
        if (state.batch[i].imageId == imageId) {
            return i;
        }
    }
    throw Error(ErrorCode::NotInSession,
                "image '" + imageId + "' is not in the current batch of " + state.sessionId);
}

void AnnotationService::assignBatch(SessionState& state) {
    const DatasetManifest& m = dataset(state.datasetId);
    const CheckpointPolicy& policy = m.checkpoint;

    std::lock_guard lock(assignMutex_);
    auto& used = assigned_[{state.datasetId, state.userId}];
    std::vector<const ImageEntry*> withReference;
    std::vector<const ImageEntry*> without;
    for (const auto& img : m.images) {
        if (used.count(img.id)) {
            continue;
        }
        (img.groundTruth ? withReference : without).push_back(&img);
    }
    const auto needReference = static_cast<std::size_t>(policy.groundTruthPerBatch);
    const auto needPlain = static_cast<std::size_t>(policy.batchSize - policy.groundTruthPerBatch);
    if (withReference.size() < needReference || without.size() < needPlain) {
        throw Error(ErrorCode::InsufficientImages,
                    "dataset '" + m.datasetId + "' has too few unassigned images for user '" +
                        state.userId + "'");
    }
    detail::shuffle(withReference, assignRng_);
    detail::shuffle(without, assignRng_);

    std::vector<std::size_t> positions(static_cast<std::size_t>(policy.batchSize));
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = i;
    }
    detail::shuffle(positions, assignRng_);
    std::vector<bool> flags(positions.size(), false);
    for (std::size_t i = 0; i < needReference; ++i) {
        flags[positions[i]] = true;
    }

    std::vector<ImageProgress> batch;
    std::size_t nextRef = 0, nextPlain = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        const ImageEntry* e = flags[i] ? withReference[nextRef++] : without[nextPlain++];
        ImageProgress p;
        p.imageId = e->id;
        p.objectCount = e->objectCount;
        p.boxes = e->boxes;
        batch.push_back(std::move(p));
        used.insert(e->id);
    }
    state.batch = std::move(batch);
    state.hasReference = std::move(flags);
    state.status = BatchStatus::InProgress;
    state.attempt = 1;
    ++state.batchNumber;
}

SessionState AnnotationService::createSession(const std::string& userId,
                                              const std::string& datasetId,
                                              std::optional<std::uint64_t> rngSeed) {
    if (userId.empty()) {
        throw Error(ErrorCode::InvalidArgument, "userId must not be empty");
    }
    dataset(datasetId);

    auto s = std::make_shared<SessionSlot>();
    s->state.userId = userId;
    s->state.datasetId = datasetId;
    {
        std::lock_guard lock(assignMutex_);
        s->state.rngSeed = rngSeed ? *rngSeed
                                   : (config_.rngSeed ? *config_.rngSeed : assignRng_());
        std::ostringstream id;
        id << 's' << std::hex << std::setw(16) << std::setfill('0')
           << detail::splitmix64(assignRng_() ^ ++sessionCounter_);
        s->state.sessionId = id.str();
    }
    assignBatch(s->state);

    std::unique_lock lock(sessionsMutex_);
    sessions_.emplace(s->state.sessionId, s);
    return s->state;
}

SessionState AnnotationService::session(const std::string& sessionId) const {
    auto s = slot(sessionId);
    std::lock_guard lock(s->mutex);
    return s->state;
}

std::size_t AnnotationService::putTrace(const std::string& sessionId, const std::string& imageId,
                                        std::vector<Stroke> strokes) {
    auto s = slot(sessionId);
    std::lock_guard lock(s->mutex);
    SessionState& st = s->state;
    if (st.status == BatchStatus::Passed) {
        throw Error(ErrorCode::BatchClosed, "batch already passed; request a new batch");
    }
    const std::size_t i = slotOf(st, imageId);
    const DatasetManifest& m = dataset(st.datasetId);
    for (const Stroke& stroke : strokes) {
        stroke.validate();
        if (stroke.tool != Tool::Eraser && stroke.category >= m.categories.size()) {
            throw Error(ErrorCode::UnknownCategoryValue,
                        "category " + std::to_string(stroke.category) + " not in dataset");
        }
    }
    const auto image = loadImage(m, m.image(imageId));
    TraceRaster raster = rasterFromStrokes(image->width(), image->height(), strokes);
    const std::size_t labeled = raster.labeledCount();

    ImageProgress& p = st.batch[i];
    p.strokes = std::move(strokes);
    p.trace = std::move(raster);
    const double t = now();
    if (!p.intervalStart) {
        p.intervalStart = t;
    }
    if (!p.firstTraceAt) {
        p.firstTraceAt = t;
    }
    if (st.status == BatchStatus::Failed) {
        st.status = BatchStatus::InProgress;
    }
    return labeled;
}

RefineResult AnnotationService::refineImage(const std::string& sessionId,
                                            const std::string& imageId) {
    auto s = slot(sessionId);
    std::lock_guard lock(s->mutex);
    SessionState& st = s->state;
    if (st.status == BatchStatus::Passed) {
        throw Error(ErrorCode::BatchClosed, "batch already passed; request a new batch");
    }
    ImageProgress& p = st.batch[slotOf(st, imageId)];
    if (!p.trace || p.trace->labeledCount() == 0) {
        throw Error(ErrorCode::EmptyTrace, "no traces drawn on '" + imageId + "'");
    }
    const DatasetManifest& m = dataset(st.datasetId);
    const auto image = loadImage(m, m.image(imageId));

    RgrConfig cfg = config_.rgr;
    cfg.rngSeed = st.rngSeed;
    Refinement r = refine(*image, *p.trace, cfg, static_cast<int>(m.categories.size()));

    RefineResult out;
    out.imageId = imageId;
    out.maskPng = encodeMaskPng(r.mask, m.palette());

    const LikelihoodTensor& lt = r.likelihood;
    const auto counts = lt.counts();
    const auto nc = static_cast<std::size_t>(lt.numCategories());
    std::uint64_t winnerVotes = 0;
    std::vector<std::uint64_t> perCategory(nc, 0);
    for (std::size_t i = 0; i < r.mask.size(); ++i) {
        winnerVotes += counts[i * nc + r.mask[i]];
        ++perCategory[r.mask[i]];
    }
    const auto pixels = static_cast<double>(r.mask.size());
    out.likelihood.meanConfidence =
        static_cast<double>(winnerVotes) / (pixels * lt.iterations());
    for (std::size_t c = 0; c < nc; ++c) {
        if (perCategory[c] > 0) {
            out.likelihood.coverage[static_cast<std::uint8_t>(c)] =
                static_cast<double>(perCategory[c]) / pixels;
        }
    }

    p.mask = r.mask;
    out.mask = std::move(r.mask);
    out.refineCount = ++p.refineCount;
    return out;
}

BatchVerdict AnnotationService::submitBatch(const std::string& sessionId) {
    auto s = slot(sessionId);
    std::lock_guard lock(s->mutex);
    SessionState& st = s->state;
    if (st.status == BatchStatus::Passed) {
        throw Error(ErrorCode::BatchClosed, "batch already passed; request a new batch");
    }
    std::string missing;
    for (const ImageProgress& p : st.batch) {
        if (!p.mask) {
            missing += (missing.empty() ? "" : ", ") + p.imageId;
        }
    }
    if (!missing.empty()) {
        throw Error(ErrorCode::IncompleteBatch, "images without a refined mask: " + missing);
    }

    const double t = now();
    for (ImageProgress& p : st.batch) {
        if (p.intervalStart) {
            p.accumulatedSeconds += std::max(0.0, t - *p.intervalStart);
            p.intervalStart.reset();
        }
    }

    DatasetRuntime& ds = runtime(st.datasetId);
    const DatasetManifest& m = ds.manifest;
    std::set<std::uint8_t> categories;
    for (const auto& c : m.categories) {
        categories.insert(c.id);
    }

    BatchVerdict verdict;
    verdict.passed = true;
    std::vector<std::optional<ScoredImage>> scored(st.batch.size());
    for (std::size_t i = 0; i < st.batch.size(); ++i) {
        verdict.imageIds.push_back(st.batch[i].imageId);
        if (!st.hasReference[i]) {
            continue;
        }
        const ImageEntry& entry = m.image(st.batch[i].imageId);
        const LabelMask reference = loadMaskPng(m.directory / *entry.groundTruth);
        ScoredImage si;
        si.iou = iou(*st.batch[i].mask, reference, categories);
        si.input = ScoreInput{si.iou.meanIou, st.batch[i].accumulatedSeconds, entry.objectCount};
        si.score = finalScore(si.input);
        // Every checked image must clear the threshold on its own.
        si.passed = checkpointGate(si.iou, m.checkpoint.threshold);
        verdict.passed = verdict.passed && si.passed;
        verdict.scores.push_back(si);
        scored[i] = si;
    }

    if (verdict.passed) {
        persist(ds, st, scored, t);
        st.status = BatchStatus::Passed;
    } else {
        st.status = BatchStatus::Failed;
        ++st.attempt;
        for (ImageProgress& p : st.batch) {
            p.strokes.clear();
            p.trace.reset();
            p.mask.reset();
        }
    }
    verdict.status = st.status;
    verdict.attempt = st.attempt;
    return verdict;
}

void AnnotationService::persist(DatasetRuntime& ds, const SessionState& st,
                                const std::vector<std::optional<ScoredImage>>& scored,
                                double now) {
    const Palette palette = ds.manifest.palette();
    std::lock_guard lock(ds.logMutex);
    std::ofstream log(ds.manifest.directory / "submissions.log", std::ios::app);
    if (!log) {
        throw Error(ErrorCode::Io, "cannot open submission log for " + ds.manifest.datasetId);
    }
    for (std::size_t i = 0; i < st.batch.size(); ++i) {
        const ImageProgress& p = st.batch[i];
        SubmissionRecord r;
        r.seq = ds.nextSeq++;
        std::ostringstream name;
        name << "submissions/" << std::setw(6) << std::setfill('0') << r.seq << '_'
             << sanitize(st.userId) << '_' << sanitize(p.imageId) << ".png";
        r.sessionId = st.sessionId;
        r.userId = st.userId;
        r.imageId = p.imageId;
        r.maskFile = name.str();
        r.elapsedSeconds = p.accumulatedSeconds;
        r.refineCount = p.refineCount;
        r.submittedAt = now;
        r.firstTraceAt = p.firstTraceAt;
        if (scored[i]) {
            r.iou = scored[i]->iou;
            r.score = scored[i]->score;
        }
        writeFile(ds.manifest.directory / r.maskFile, encodeMaskPng(*p.mask, palette));
        log << r.toJson().dump() << '\n';
        log.flush();
    }
}

SessionState AnnotationService::nextBatch(const std::string& sessionId) {
    auto s = slot(sessionId);
    std::lock_guard lock(s->mutex);
    if (s->state.status != BatchStatus::Passed) {
        throw Error(ErrorCode::BatchClosed, "the current batch has not passed yet");
    }
    SessionState next = s->state;
    assignBatch(next);
    s->state = std::move(next);
    return s->state;
}

namespace {

std::vector<SubmissionRecord> parseLog(std::string_view text) {
    std::vector<SubmissionRecord> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(SubmissionRecord::fromJson(json::parse(line)));
        }
    }
    return out;
}

} // namespace

std::vector<SubmissionRecord> AnnotationService::submissions(const std::string& datasetId) const {
    DatasetRuntime& ds = runtime(datasetId);
    std::lock_guard lock(ds.logMutex);
    const fs::path log = ds.manifest.directory / "submissions.log";
    return fs::exists(log) ? parseLog(readText(log)) : std::vector<SubmissionRecord>{};
}

Bytes AnnotationService::exportMasks(const std::string& datasetId) const {
    DatasetRuntime& ds = runtime(datasetId);
    std::lock_guard lock(ds.logMutex);
    const fs::path log = ds.manifest.directory / "submissions.log";
    std::vector<TarEntry> entries;
    if (!fs::exists(log)) {
        return writeTar(entries);
    }
    Bytes logBytes = readFile(log);
    for (const SubmissionRecord& r : parseLog(std::string(logBytes.begin(), logBytes.end()))) {
        entries.push_back(TarEntry{"masks/" + fs::path(r.maskFile).filename().string(),
                                   readFile(ds.manifest.directory / r.maskFile)});
    }
    if (!entries.empty()) {
        entries.push_back(TarEntry{"submissions.log", std::move(logBytes)});
    }
    return writeTar(entries);
}

} // namespace tracegrow::service
