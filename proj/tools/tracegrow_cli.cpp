// tracegrow: headless access to scribble refinement, evaluation and the
// annotation service.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error,
// 5 the service port is already in use.

#include <atomic>
#include <tracegrow/evaluation.h>
#include <tracegrow/http_server.h>
#include <tracegrow/image_io.h>
#include <tracegrow/rgr.h>
#include <tracegrow/service.h>
#include <tracegrow/trace.h>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>

namespace fs = std::filesystem;
using namespace tracegrow;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kInternal = 4, kPortInUse = 5 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void requireFile(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
        throw Error(ErrorCode::Io, std::string(what) + " not found: " + p.string());
    }
}

void requireDir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) {
        throw Error(ErrorCode::Io, std::string(what) + " is not a directory: " + p.string());
    }
}

std::vector<fs::path> pngFiles(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void validateConfig(const RgrConfig& cfg) {
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------------------

struct RefineArgs {
    fs::path image;
    fs::path trace;
    fs::path strokes;
    fs::path out;
    fs::path likelihoodDir;
    int categories = 0;
    RgrConfig rgr;
    double spatialScale = 0.0;
};

int runRefine(RefineArgs& a) {
    if (a.trace.empty() == a.strokes.empty()) {
        throw UsageError("give exactly one of --trace or --strokes");
    }
    if (a.spatialScale > 0.0) {
        a.rgr.spatialScale = a.spatialScale;
    }
    validateConfig(a.rgr);
    requireFile(a.image, "image");
    requireFile(a.trace.empty() ? a.strokes : a.trace, "trace");

    const RgbImage image = loadRgbImage(a.image);
    TraceRaster trace;
    if (!a.trace.empty()) {
        trace = TraceRaster(loadMaskPng(a.trace));
    } else {
        const Bytes text = readFile(a.strokes);
        const auto strokes = parseStrokeList(std::string(text.begin(), text.end()));
        trace = rasterFromStrokes(image.width(), image.height(), strokes);
    }

    const Refinement r = refine(image, trace, a.rgr, a.categories);
    const int nc = r.likelihood.numCategories();
    writeFile(a.out, encodeMaskPng(r.mask, Palette::pascalVoc(std::max(nc, 21))));

    if (!a.likelihoodDir.empty()) {
        const int iterations = r.likelihood.iterations();
        for (int c = 0; c < nc; ++c) {
            Plane<std::uint16_t> plane(image.width(), image.height(), 0);
            for (int y = 0; y < image.height(); ++y) {
                for (int x = 0; x < image.width(); ++x) {
                    plane.at(x, y) = static_cast<std::uint16_t>(
                        (65535u * r.likelihood.count(x, y, c) + iterations / 2) / iterations);
                }
            }
            writeFile(a.likelihoodDir / ("likelihood_" + std::to_string(c) + ".png"),
                      encodeGray16Png(plane));
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct RasterizeArgs {
    fs::path strokes;
    fs::path image;
    int width = 0;
    int height = 0;
    fs::path out;
};

int runRasterize(const RasterizeArgs& a) {
    requireFile(a.strokes, "stroke list");
    int width = a.width, height = a.height;
    if (!a.image.empty()) {
        requireFile(a.image, "image");
        const RgbImage img = loadRgbImage(a.image);
        width = img.width();
        height = img.height();
    }
    if (width < 1 || height < 1) {
        throw UsageError("give --image or a positive --width and --height");
    }
    const Bytes text = readFile(a.strokes);
    const auto strokes = parseStrokeList(std::string(text.begin(), text.end()));
    const TraceRaster raster = rasterFromStrokes(width, height, strokes);
    int maxLabel = 0;
    for (const auto v : raster.values()) {
        if (v != kUnlabeled) maxLabel = std::max(maxLabel, int(v));
    }
    writeFile(a.out, encodeMaskPng(raster, Palette::pascalVoc(std::max(maxLabel + 1, 21))));
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    fs::path pred;
    fs::path gt;
    int numCategories = 0;
    std::optional<double> threshold;
    fs::path out;
};

std::set<std::uint8_t> categoryRange(int n) {
    std::set<std::uint8_t> out;
    for (int c = 0; c < n; ++c) out.insert(static_cast<std::uint8_t>(c));
    return out;
}

void appendRows(std::ostream& os, const std::string& name, const IouReport& r) {
    for (const auto& [c, v] : r.perCategoryIou) {
        os << name << ',' << int(c) << ',' << v << '\n';
    }
    os << name << ",mean," << r.meanIou << '\n';
}

int runEval(const EvalArgs& a) {
    requireDir(a.pred, "prediction directory");
    requireDir(a.gt, "ground-truth directory");
    if (a.numCategories < 0 || a.numCategories > 255) {
        throw UsageError("--num-categories must lie in [0, 255]");
    }
    if (a.threshold && !(*a.threshold > 0.0 && *a.threshold < 1.0)) {
        throw UsageError("--threshold must lie in (0, 1)");
    }

    struct Pair {
        std::string name;
        LabelMask pred, gt;
    };
    std::vector<Pair> pairs;
    for (const fs::path& p : pngFiles(a.pred)) {
        const fs::path g = a.gt / p.filename();
        requireFile(g, "ground truth");
        pairs.push_back(Pair{p.filename().string(), loadMaskPng(p), loadMaskPng(g)});
    }
    if (pairs.empty()) {
        throw Error(ErrorCode::EmptyList, "no PNG masks in " + a.pred.string());
    }

    std::set<std::uint8_t> all = categoryRange(a.numCategories);
    if (a.numCategories == 0) {
        for (const Pair& p : pairs) {
            all.merge(presentCategories(p.pred, p.gt));
        }
    }
    if (all.empty()) {
        throw Error(ErrorCode::EmptyCategorySet, "masks contain no categories");
    }

    std::ostringstream os;
    os.precision(6);
    os << std::fixed << "image,category,iou\n";
    IouAccumulator total(all);
    for (const Pair& p : pairs) {
        const auto cats = a.numCategories ? all : presentCategories(p.pred, p.gt);
        if (cats.empty()) {
            os << p.name << ",mean," << 0.0 << '\n';
        } else {
            appendRows(os, p.name, iou(p.pred, p.gt, cats));
        }
        total.add(p.pred, p.gt);
    }
    const IouReport overall = total.report();
    appendRows(os, "ALL", overall);
    if (a.threshold) {
        os << "ALL,gate," << (checkpointGate(overall, *a.threshold) ? "pass" : "fail") << '\n';
    }

    if (a.out.empty()) {
        std::cout << os.str();
    } else {
        writeFile(a.out, os.str());
    }
    return kOk;
}

// ---------------------------------------------------------------------------

int runScore(const ScoreInput& in) {
    const ScoreReport r = finalScore(in);
    std::cout << toCsv(in, r);
    return kOk;
}

// ---------------------------------------------------------------------------

struct ConsensusArgs {
    fs::path masks;
    int category = 1;
    fs::path outDir;
};

int runConsensus(const ConsensusArgs& a) {
    requireDir(a.masks, "mask directory");
    if (a.category < 0 || a.category > 254) {
        throw UsageError("--category must lie in [0, 254]");
    }
    std::vector<LabelMask> masks;
    for (const fs::path& p : pngFiles(a.masks)) {
        masks.push_back(loadMaskPng(p));
    }
    const ConsensusMap counts = consensusCounts(masks, static_cast<std::uint8_t>(a.category));
    const LabelMask majority = consensusMajority(masks);

    if (counts.annotatorTotal <= 255) {
        Plane<std::uint8_t> narrow(counts.counts.width(), counts.counts.height(), 0);
        for (std::size_t i = 0; i < narrow.size(); ++i) {
            narrow[i] = static_cast<std::uint8_t>(counts.counts[i]);
        }
        writeFile(a.outDir / "counts.png", encodeGray8Png(narrow));
    } else {
        writeFile(a.outDir / "counts.png", encodeGray16Png(counts.counts));
    }
    int maxLabel = 0;
    for (const auto v : majority.values()) {
        if (v != kUnlabeled) maxLabel = std::max(maxLabel, int(v));
    }
    writeFile(a.outDir / "majority.png",
              encodeMaskPng(majority, Palette::pascalVoc(std::max(maxLabel + 1, 21))));
    std::cout << "annotators," << counts.annotatorTotal << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    fs::path config;
    std::optional<int> port;
    std::optional<fs::path> dataRoot;
    std::optional<std::uint64_t> rngSeed;
};

int runServe(const ServeArgs& a) {
    service::ServerSettings settings;
    if (!a.config.empty()) {
        requireFile(a.config, "config file");
        settings = service::loadServerSettings(a.config);
    }
    service::applyEnvironment(settings);
    if (a.port) settings.port = *a.port;
    if (a.dataRoot) settings.dataRoot = *a.dataRoot;
    if (a.rngSeed) settings.rngSeed = *a.rngSeed;
    if (settings.dataRoot.empty()) {
        throw UsageError("no data root: set dataRoot, --data-root or TRACEGROW_DATA_ROOT");
    }
    validateConfig(settings.rgr);
    requireDir(settings.dataRoot, "data root");

    // Route SIGINT/SIGTERM to a waiter thread; worker threads inherit the mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    service::AnnotationService svc(service::ServiceConfig{
        settings.dataRoot, settings.rngSeed, settings.rgr, service::systemClock()});
    service::HttpServer server(svc);
    const int port = server.bind(settings.host, settings.port);
    std::cout << "listening on " << settings.host << ':' << port << std::endl;

    std::atomic<bool> done{false};
    std::thread waiter([&] {
        const timespec tick{0, 200'000'000};
        while (!done) {
            if (sigtimedwait(&signals, nullptr, &tick) > 0) {
                server.stop();
                return;
            }
        }
    });
    server.listen();
    done = true;
    waiter.join();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grow freehand scribbles into segmentation masks, score annotations, serve "
                 "annotation sessions"};
    app.require_subcommand(1);

    RefineArgs refineArgs;
    auto* refineCmd = app.add_subcommand("refine", "Grow a trace into a dense mask");
    refineCmd->add_option("--image", refineArgs.image, "RGB image (PNG or JPEG)")->required();
    refineCmd->add_option("--trace", refineArgs.trace, "Indexed-PNG trace raster (255 = none)");
    refineCmd->add_option("--strokes", refineArgs.strokes, "Stroke-list JSON document");
    refineCmd->add_option("--out", refineArgs.out, "Output mask PNG")->required();
    refineCmd->add_option("--likelihood-dir", refineArgs.likelihoodDir,
                          "Write one 16-bit likelihood PNG per category here");
    refineCmd->add_option("--categories", refineArgs.categories,
                          "Category count (default: largest trace label + 1)");
    refineCmd->add_option("--seed-fraction", refineArgs.rgr.seedFraction);
    refineCmd->add_option("--iterations", refineArgs.rgr.mcIterations);
    refineCmd->add_option("--rng-seed", refineArgs.rgr.rngSeed);
    refineCmd->add_option("--color-scale", refineArgs.rgr.colorScale);
    refineCmd->add_option("--spatial-scale", refineArgs.spatialScale);
    refineCmd->add_option("--threads", refineArgs.rgr.workerThreads);

    RasterizeArgs rasterArgs;
    auto* rasterCmd = app.add_subcommand("rasterize", "Replay a stroke list into a trace PNG");
    rasterCmd->add_option("--strokes", rasterArgs.strokes)->required();
    rasterCmd->add_option("--image", rasterArgs.image, "Take the canvas size from this image");
    rasterCmd->add_option("--width", rasterArgs.width);
    rasterCmd->add_option("--height", rasterArgs.height);
    rasterCmd->add_option("--out", rasterArgs.out)->required();

    EvalArgs evalArgs;
    auto* evalCmd = app.add_subcommand("eval", "Per-image and pooled IoU of mask directories");
    evalCmd->add_option("--pred", evalArgs.pred)->required();
    evalCmd->add_option("--gt", evalArgs.gt)->required();
    evalCmd->add_option("--num-categories", evalArgs.numCategories,
                        "Evaluate categories 0..N-1 (default: those present)");
    evalCmd->add_option("--threshold", evalArgs.threshold,
                        "Append a pass/fail row for the pooled mean IoU");
    evalCmd->add_option("--out", evalArgs.out, "CSV output (default: stdout)");

    ScoreInput scoreArgs;
    auto* scoreCmd = app.add_subcommand("score", "Annotation score from accuracy and time");
    scoreCmd->add_option("--mean-iou", scoreArgs.meanIou)->required();
    scoreCmd->add_option("--elapsed", scoreArgs.elapsedSeconds, "Seconds")->required();
    scoreCmd->add_option("--objects", scoreArgs.objectCount)->default_val(1);

    ConsensusArgs consensusArgs;
    auto* consensusCmd = app.add_subcommand("consensus", "Agreement counts and majority mask");
    consensusCmd->add_option("--masks", consensusArgs.masks)->required();
    consensusCmd->add_option("--category", consensusArgs.category)->required();
    consensusCmd->add_option("--out-dir", consensusArgs.outDir)->required();

    ServeArgs serveArgs;
    std::string serveDataRoot;
    auto* serveCmd = app.add_subcommand("serve", "Run the annotation service");
    serveCmd->add_option("--config", serveArgs.config, "JSON config file");
    serveCmd->add_option("--port", serveArgs.port);
    serveCmd->add_option("--data-root", serveDataRoot);
    serveCmd->add_option("--rng-seed", serveArgs.rngSeed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (!serveDataRoot.empty()) {
        serveArgs.dataRoot = fs::path(serveDataRoot);
    }

    try {
        if (*refineCmd) return runRefine(refineArgs);
        if (*rasterCmd) return runRasterize(rasterArgs);
        if (*evalCmd) return runEval(evalArgs);
        if (*scoreCmd) return runScore(scoreArgs);
        if (*consensusCmd) return runConsensus(consensusArgs);
        if (*serveCmd) return runServe(serveArgs);
    } catch (const UsageError& e) {
        std::cerr << "tracegrow: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "tracegrow: " << toString(e.code()) << ": " << e.what() << '\n';
        return e.code() == ErrorCode::PortInUse ? kPortInUse : kData;
    } catch (const std::exception& e) {
        std::cerr << "tracegrow: internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
