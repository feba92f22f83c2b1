#include <tracegrow/http_server.h>

#include <httplib.h>

#include <cstdlib>

namespace tracegrow::service {

namespace {

int httpStatus(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownDataset:
        case ErrorCode::UnknownImage:
        case ErrorCode::UnknownSession:
            return 404;
        case ErrorCode::NotInSession:
            return 403;
        case ErrorCode::InsufficientImages:
        case ErrorCode::IncompleteBatch:
        case ErrorCode::BatchClosed:
            return 409;
        case ErrorCode::Io:
        case ErrorCode::PortInUse:
            return 500;
        default:
            return 400;
    }
}

void reply(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void replyError(httplib::Response& res, ErrorCode code, const std::string& message) {
    reply(res, json{{"error", toString(code)}, {"message", message}}, httpStatus(code));
}

json parseBody(const httplib::Request& req) {
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body: ") + e.what());
    }
}

std::string imageContentType(const Bytes& bytes) {
    if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
        return "image/jpeg";
    }
    return "image/png";
}

std::uint64_t parseSeed(const std::string& text) {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) {
        throw Error(ErrorCode::InvalidArgument, "rng seed must be an integer: " + text);
    }
    return v;
}

} // namespace

ServerSettings loadServerSettings(const std::filesystem::path& configFile) {
    const Bytes bytes = readFile(configFile);
    ServerSettings s;
    try {
        const json doc = json::parse(bytes.begin(), bytes.end());
        s.host = doc.value("host", s.host);
        s.port = doc.value("port", s.port);
        if (doc.contains("dataRoot")) {
            std::filesystem::path root = doc["dataRoot"].get<std::string>();
            s.dataRoot = root.is_relative() ? configFile.parent_path() / root : root;
        }
        if (doc.contains("rngSeed")) {
            s.rngSeed = doc["rngSeed"].get<std::uint64_t>();
        }
        if (doc.contains("refine")) {
            const json& r = doc["refine"];
            s.rgr.seedFraction = r.value("seedFraction", s.rgr.seedFraction);
            s.rgr.mcIterations = r.value("iterations", s.rgr.mcIterations);
            s.rgr.colorScale = r.value("colorScale", s.rgr.colorScale);
            if (r.contains("spatialScale")) {
                s.rgr.spatialScale = r["spatialScale"].get<double>();
            }
            s.rgr.workerThreads = r.value("workerThreads", s.rgr.workerThreads);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "config " + configFile.string() + ": " + e.what());
    }
    return s;
}

void applyEnvironment(ServerSettings& settings) {
    if (const char* port = std::getenv(kEnvPort)) {
        try {
            settings.port = std::stoi(port);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, std::string(kEnvPort) + " is not a number");
        }
    }
    if (const char* root = std::getenv(kEnvDataRoot)) {
        settings.dataRoot = root;
    }
    if (const char* seed = std::getenv(kEnvRngSeed)) {
        try {
            settings.rngSeed = parseSeed(seed);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, std::string(kEnvRngSeed) + " is not a number");
        }
    }
}

HttpServer::HttpServer(AnnotationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& svr = *server_;

    // The library default adds SO_REUSEPORT, which lets a second server share
    // a busy port instead of failing.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                 std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            replyError(res, e.code(), e.what());
        } catch (const std::exception& e) {
            reply(res, json{{"error", "Internal"}, {"message", e.what()}}, 500);
        } catch (...) {
            reply(res, json{{"error", "Internal"}, {"message", "unknown failure"}}, 500);
        }
    });

    svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        reply(res, json{{"status", "ok"}});
    });

    svr.Get("/datasets", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& d : service_.listDatasets()) {
            out.push_back(toJson(d));
        }
        reply(res, out);
    });

    svr.Get(R"(/datasets/([^/]+)/export)", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
        const Bytes archive = service_.exportMasks(req.matches[1]);
        res.set_header("Content-Disposition",
                       "attachment; filename=\"" + std::string(req.matches[1]) + ".tar\"");
        res.set_content(std::string(archive.begin(), archive.end()), "application/x-tar");
    });

    svr.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> ds;
        if (req.has_param("dataset")) {
            ds = req.get_param_value("dataset");
        }
        const Bytes bytes = service_.imageBytes(req.matches[1], ds);
        res.set_content(std::string(bytes.begin(), bytes.end()), imageContentType(bytes));
    });

    svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = parseBody(req);
        if (!body.contains("userId") || !body.contains("datasetId")) {
            throw Error(ErrorCode::InvalidArgument, "userId and datasetId are required");
        }
        std::optional<std::uint64_t> seed;
        if (body.contains("rngSeed")) {
            seed = body["rngSeed"].get<std::uint64_t>();
        }
        const SessionState s = service_.createSession(body["userId"].get<std::string>(),
                                                      body["datasetId"].get<std::string>(), seed);
        reply(res, clientView(s, service_.now()), 201);
    });

    svr.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, clientView(service_.session(req.matches[1]), service_.now()));
    });

    svr.Post(R"(/sessions/([^/]+)/batches)", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
        reply(res, clientView(service_.nextBatch(req.matches[1]), service_.now()), 201);
    });

    svr.Put(R"(/sessions/([^/]+)/images/([^/]+)/trace)", [this](const httplib::Request& req,
                                                                httplib::Response& res) {
        auto strokes = parseStrokeList(req.body);
        const std::size_t count = strokes.size();
        const std::size_t labeled =
            service_.putTrace(req.matches[1], req.matches[2], std::move(strokes));
        reply(res, json{{"accepted", true}, {"strokes", count}, {"labeledPixels", labeled}});
    });

    svr.Post(R"(/sessions/([^/]+)/images/([^/]+)/refine)", [this](const httplib::Request& req,
                                                                   httplib::Response& res) {
        const RefineResult r = service_.refineImage(req.matches[1], req.matches[2]);
        if (req.get_param_value("format") == "png") {
            res.set_content(std::string(r.maskPng.begin(), r.maskPng.end()), "image/png");
            return;
        }
        reply(res, toJson(r));
    });

    svr.Post(R"(/sessions/([^/]+)/submit)", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
        reply(res, clientView(service_.submitBatch(req.matches[1])));
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound <= 0) {
            throw Error(ErrorCode::PortInUse, "cannot bind any port on " + host);
        }
        return bound;
    }
    if (!server_->bind_to_port(host, port)) {
        throw Error(ErrorCode::PortInUse,
                    "cannot bind " + host + ":" + std::to_string(port) + " (in use?)");
    }
    return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
    if (server_) {
        server_->stop();
    }
}

bool HttpServer::running() const { return server_->is_running(); }

} // namespace tracegrow::service
