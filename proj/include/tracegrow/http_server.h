#pragma once

#include <tracegrow/service.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace tracegrow::service {

struct ServerSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path dataRoot;
    std::optional<std::uint64_t> rngSeed;
    RgrConfig rgr;
};

inline constexpr const char* kEnvPort = "TRACEGROW_PORT";
inline constexpr const char* kEnvDataRoot = "TRACEGROW_DATA_ROOT";
inline constexpr const char* kEnvRngSeed = "TRACEGROW_RNG_SEED";

/// JSON config file: {"host", "port", "dataRoot", "rngSeed",
/// "refine": {"seedFraction", "iterations", "colorScale", "spatialScale", "workerThreads"}}.
/// Relative dataRoot paths resolve against the config file's directory.
ServerSettings loadServerSettings(const std::filesystem::path& configFile);

/// Overrides port, data root and rng seed from TRACEGROW_* variables when set.
void applyEnvironment(ServerSettings& settings);

/// REST front end for AnnotationService. Routes:
///   GET  /health
///   GET  /datasets
///   GET  /datasets/{id}/export
///   GET  /images/{id}[?dataset=...]
///   POST /sessions                                 {"userId", "datasetId"[, "rngSeed"]}
///   GET  /sessions/{id}
///   POST /sessions/{id}/batches
///   PUT  /sessions/{id}/images/{imageId}/trace     stroke list document
///   POST /sessions/{id}/images/{imageId}/refine    [?format=png for a binary body]
///   POST /sessions/{id}/submit
class HttpServer {
public:
    explicit HttpServer(AnnotationService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Port 0 picks a free port. Throws Error(PortInUse) when binding fails.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    bool running() const;

private:
    AnnotationService& service_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace tracegrow::service
