// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/server.hpp>

#include <segwild/feature_field.hpp>
#include <segwild/image_io.hpp>
#include <segwild/io.hpp>
#include <segwild/metrics.hpp>
#include <segwild/pca.hpp>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <thread>

namespace segwild {

namespace {

using json = nlohmann::json;

// Failures that carry their own HTTP status rather than an ErrorCode.
struct HttpError {
    int status;
    std::string code;
    std::string message;
};

int
statusFor(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Io:
    case ErrorCode::Runtime: return 500;
    default: return 400;
    }
}

void
sendError(httplib::Response &res, int status, const std::string &code, const std::string &message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(),
                    "application/json");
}

void
sendJson(httplib::Response &res, const json &j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void
sendPng(httplib::Response &res, const Image8 &img) {
    const std::vector<std::uint8_t> bytes = encodePng(img);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

json
parseBody(const httplib::Request &req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw HttpError{400, "invalid_argument", "request body must be a JSON object"};
    }
    return j;
}

std::vector<Vec2>
pointsFromJson(const json &j) {
    std::vector<Vec2> out;
    for (const json &p : j) {
        if (!p.is_array() || p.size() != 2) {
            throw HttpError{400, "invalid_argument", "points must be [u, v] pairs"};
        }
        out.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return out;
}

struct StoredSegmentation {
    SegmentationResult result;
    PromptSet prompts;
    std::optional<SgcResult> sgc;

    // The scene that renders this segmentation: the cut subset when SGC ran.
    GaussianScene
    predicted(const GaussianScene &scene) const {
        return sgc ? sgc->scene : scene.subset(result.selected);
    }
};

struct TrainJob {
    std::string state = "idle"; // idle, running, done, failed, cancelled
    int iteration = 0, iterations = 0;
    LossRecord last;
    std::string error;
};

struct Session {
    std::shared_mutex mutex;
    std::optional<GaussianScene> scene;
    std::string scenePath;
    std::map<std::string, Camera> cameras;
    std::map<std::string, Bitmap> masks;
    std::map<std::string, PromptSet> prompts;
    std::map<std::string, StoredSegmentation> segmentations;
    int nextId = 0;

    std::mutex jobMutex;
    TrainJob job;
    std::atomic<bool> training{false};
    std::jthread trainer;

    std::string
    newId(const char *prefix) {
        return prefix + std::to_string(++nextId);
    }

    const GaussianScene &
    requireScene() const {
        if (!scene) {
            throw HttpError{409, "conflict", "no scene loaded in this session"};
        }
        return *scene;
    }

    const Camera &
    requireCamera(const std::string &id) const {
        auto it = cameras.find(id);
        if (it == cameras.end()) {
            throw HttpError{404, "not_found", "unknown camera '" + id + "'"};
        }
        return it->second;
    }

    const StoredSegmentation &
    requireSegmentation(const std::string &id) const {
        auto it = segmentations.find(id);
        if (it == segmentations.end()) {
            throw HttpError{404, "not_found", "unknown segmentation '" + id + "'"};
        }
        return it->second;
    }
};

} // namespace

ServerConfig
ServerConfig::fromEnvironment() {
    ServerConfig c;
    if (const char *root = std::getenv("SEGWILD_DATA_ROOT"); root && *root) {
        c.dataRoot = root;
    }
    if (const char *port = std::getenv("SEGWILD_PORT"); port && *port) {
        c.port = std::atoi(port);
    }
    return c;
}

ServerConfig
ServerConfig::fromJson(const nlohmann::json &j, ServerConfig base) {
    check(j.is_object(), ErrorCode::InvalidArgument, "server config must be a JSON object");
    try {
        base.host             = j.value("host", base.host);
        base.port             = j.value("port", base.port);
        base.dataRoot         = j.value("data_root", base.dataRoot.string());
        base.renderDeadlineMs = j.value("render_deadline_ms", base.renderDeadlineMs);
        base.defaultTau       = j.value("tau", base.defaultTau);
        base.sgc.samples      = j.value("sgc_samples", base.sgc.samples);
        base.sgc.dropRatio    = j.value("sgc_drop_ratio", base.sgc.dropRatio);
        base.threads          = j.value("threads", base.threads);
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::InvalidArgument, std::string("malformed server config: ") + e.what());
    }
    check(base.port >= 0 && base.port <= 65535, ErrorCode::InvalidArgument, "port out of range");
    check(base.renderDeadlineMs >= 0, ErrorCode::InvalidArgument,
          "render_deadline_ms must be >= 0");
    check(base.sgc.samples >= 2, ErrorCode::InvalidArgument, "sgc_samples must be >= 2");
    return base;
}

struct Server::Impl {
    ServerConfig config;
    fs::path root;
    httplib::Server http;
    int boundPort = -1;

    std::mutex sessionsMutex;
    std::map<std::string, std::shared_ptr<Session>> sessions;

    std::atomic<std::uint64_t> requests{0}, renders{0}, segmentations{0}, trains{0}, errors{0};

    explicit Impl(ServerConfig c) : config(std::move(c)) {
        std::error_code ec;
        root = fs::weakly_canonical(fs::absolute(config.dataRoot), ec);
        check(!ec, ErrorCode::Io, "cannot resolve data root");
        routes();
    }

    ~Impl() {
        http.stop();
        std::lock_guard lk(sessionsMutex);
        for (auto &[name, s] : sessions) {
            s->trainer.request_stop();
            if (s->trainer.joinable()) {
                s->trainer.join();
            }
        }
    }

    RenderOptions renderOptions() const { return RenderOptions{config.threads}; }

    std::shared_ptr<Session>
    session(const std::string &name) {
        std::lock_guard lk(sessionsMutex);
        auto &s = sessions[name.empty() ? "default" : name];
        if (!s) {
            s = std::make_shared<Session>();
        }
        return s;
    }

    static std::string
    sessionName(const httplib::Request &req, const json *body = nullptr) {
        if (body && body->contains("session")) {
            return body->at("session").get<std::string>();
        }
        return req.has_param("session") ? req.get_param_value("session") : "default";
    }

    /// Resolves a client path inside the data root.
    fs::path
    resolve(const std::string &p) const {
        const fs::path candidate = fs::weakly_canonical(root / fs::path(p));
        const fs::path rel       = candidate.lexically_relative(root);
        if (rel.empty() || *rel.begin() == "..") {
            throw HttpError{403, "forbidden", "path escapes the data root"};
        }
        return candidate;
    }

    fs::path
    resolveExisting(const std::string &p) const {
        fs::path path = resolve(p);
        if (!fs::exists(path)) {
            throw HttpError{404, "not_found", "no such file: " + p};
        }
        return path;
    }

    template <class F>
    httplib::Server::Handler
    guard(F f) {
        return [this, f](const httplib::Request &req, httplib::Response &res) {
            ++requests;
            try {
                f(req, res);
                return;
            } catch (const HttpError &e) {
                sendError(res, e.status, e.code, e.message);
            } catch (const Error &e) {
                sendError(res, statusFor(e.code()), errorCodeName(e.code()), e.what());
            } catch (const json::exception &e) {
                sendError(res, 400, "invalid_argument", e.what());
            } catch (const std::exception &e) {
                sendError(res, 500, "runtime", e.what());
            }
            ++errors;
        };
    }

    static std::unique_lock<std::shared_mutex>
    lockForMutation(Session &s) {
        std::unique_lock lk(s.mutex, std::try_to_lock);
        if (!lk.owns_lock()) {
            throw HttpError{409, "conflict", "another mutation is in flight for this session"};
        }
        return lk;
    }

    Camera
    cameraFor(Session &s, const httplib::Request &req) const {
        if (req.has_param("pose")) {
            const json j = json::parse(req.get_param_value("pose"), nullptr, false);
            if (j.is_discarded()) {
                throw HttpError{400, "invalid_argument", "pose is not valid JSON"};
            }
            return cameraFromJson(j);
        }
        if (!req.has_param("camera")) {
            throw HttpError{400, "invalid_argument", "camera or pose is required"};
        }
        return s.requireCamera(req.get_param_value("camera"));
    }

    Image8
    renderImage(Session &s, const httplib::Request &req, const Camera &cam) const {
        const GaussianScene &scene = s.requireScene();
        const std::string mode     = req.has_param("mode") ? req.get_param_value("mode") : "color";
        if (mode == "color") {
            return colorToImage(renderPayload(scene, cam, PayloadSelector::color(), renderOptions()).payload);
        }
        if (mode == "depth") {
            const FeatureMap depth = centerDepthMap(scene, cam);
            const auto [lo, hi] = std::minmax_element(depth.data().begin(), depth.data().end());
            return scalarToImage(depth, *lo, *hi);
        }
        if (mode == "feature_pca") {
            const FeatureMap fe =
                renderPayload(scene, cam, PayloadSelector::affinity(), renderOptions()).payload;
            const FeatureMap maps[] = {fe};
            const Eigen::MatrixXd samples = samplePixels(maps);
            const int out = std::min<int>(3, std::min<Eigen::Index>(samples.rows(), samples.cols()));
            FeatureMap rgb(fe.height(), fe.width(), 3);
            if (out >= 1) {
                const FeatureMap code = compressFeatureMap(fitPca(samples, out), fe);
                for (int c = 0; c < out; ++c) {
                    float lo = INFINITY, hi = -INFINITY;
                    for (std::size_t p = 0; p < code.pixelCount(); ++p) {
                        lo = std::min(lo, code.data()[p * out + c]);
                        hi = std::max(hi, code.data()[p * out + c]);
                    }
                    const float span = hi > lo ? hi - lo : 1.f;
                    for (std::size_t p = 0; p < code.pixelCount(); ++p) {
                        rgb.data()[p * 3 + c] = (code.data()[p * out + c] - lo) / span;
                    }
                }
            }
            return colorToImage(rgb);
        }
        if (mode == "overlay") {
            if (!req.has_param("segmentation")) {
                throw HttpError{400, "invalid_argument", "overlay needs a segmentation id"};
            }
            const StoredSegmentation &seg = s.requireSegmentation(req.get_param_value("segmentation"));
            Image8 img = colorToImage(
                renderPayload(scene, cam, PayloadSelector::color(), renderOptions()).payload);
            const Bitmap mask =
                alphaMask(seg.predicted(scene), cam, kDefaultAlphaCut, renderOptions());
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    if (mask.get(y, x)) {
                        std::uint8_t *px = &img.pixels[(std::size_t(y) * img.width + x) * 3];
                        px[0] = std::uint8_t((px[0] + 255) / 2);
                        px[1] = std::uint8_t(px[1] / 2);
                        px[2] = std::uint8_t(px[2] / 2);
                    }
                }
            }
            return img;
        }
        throw HttpError{400, "invalid_argument", "unknown render mode '" + mode + "'"};
    }

    void
    routes() {
        http.Get("/health", guard([](const httplib::Request &, httplib::Response &res) {
                     sendJson(res, {{"status", "ok"}, {"version", SEGWILD_VERSION}});
                 }));

        http.Get("/session", guard([this](const httplib::Request &req, httplib::Response &res) {
                     auto s = session(sessionName(req));
                     std::shared_lock lk(s->mutex);
                     json j = {{"scene_loaded", s->scene.has_value()},
                               {"scene_path", s->scenePath},
                               {"gaussians", s->scene ? s->scene->size() : 0},
                               {"feature_dim", s->scene ? s->scene->featureDim() : 0},
                               {"training", s->training.load()},
                               {"tau", config.defaultTau},
                               {"cameras", json::array()},
                               {"masks", json::array()},
                               {"prompts", json::object()},
                               {"segmentations", json::object()}};
                     for (const auto &kv : s->cameras) j["cameras"].push_back(kv.first);
                     for (const auto &kv : s->masks) j["masks"].push_back(kv.first);
                     // Enough for a client to restore its prompt list and slider.
                     for (const auto &[id, ps] : s->prompts) {
                         json pts = json::array();
                         for (const Vec2 &p : ps.points) pts.push_back({p.x(), p.y()});
                         j["prompts"][id] = {{"points", pts}};
                     }
                     for (const auto &[id, seg] : s->segmentations) {
                         j["segmentations"][id] = {{"prompt_set", seg.result.promptId},
                                                   {"tau", seg.result.tau},
                                                   {"use_sgc", seg.sgc.has_value()},
                                                   {"selected", seg.result.selected.size()}};
                     }
                     sendJson(res, j);
                 }));

        http.Post("/scene/load", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      if (s->training) {
                          throw HttpError{409, "conflict", "training is running"};
                      }
                      const fs::path path = resolveExisting(body.at("path").get<std::string>());
                      std::map<std::string, Camera> cams;
                      if (body.contains("cameras")) {
                          for (const auto &[id, p] : body.at("cameras").items()) {
                              cams[id] = loadCamera(resolveExisting(p.get<std::string>()));
                          }
                      }
                      GaussianScene scene = loadScene(path);
                      auto lk             = lockForMutation(*s);
                      s->scene            = std::move(scene);
                      s->scenePath        = body.at("path").get<std::string>();
                      s->cameras          = std::move(cams);
                      s->prompts.clear();
                      s->segmentations.clear();
                      json ids = json::array();
                      for (const auto &kv : s->cameras) ids.push_back(kv.first);
                      sendJson(res, {{"gaussians", s->scene->size()},
                                     {"feature_dim", s->scene->featureDim()},
                                     {"cameras", ids}});
                  }));

        http.Post("/cameras", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      const std::string id = body.at("id").get<std::string>();
                      Camera cam = body.contains("path")
                                       ? loadCamera(resolveExisting(body.at("path").get<std::string>()))
                                       : cameraFromJson(body.at("camera"));
                      auto lk = lockForMutation(*s);
                      s->cameras[id] = cam;
                      sendJson(res, {{"id", id}}, 201);
                  }));

        http.Get("/render", guard([this](const httplib::Request &req, httplib::Response &res) {
                     auto s = session(sessionName(req));
                     std::shared_lock lk(s->mutex);
                     s->requireScene();
                     const Camera cam = cameraFor(*s, req);
                     int deadline     = config.renderDeadlineMs;
                     if (req.has_param("deadline_ms")) {
                         deadline = std::min(deadline, std::stoi(req.get_param_value("deadline_ms")));
                     }
                     const auto t0   = std::chrono::steady_clock::now();
                     const Image8 img = renderImage(*s, req, cam);
                     const auto us   = std::chrono::duration_cast<std::chrono::microseconds>(
                                         std::chrono::steady_clock::now() - t0)
                                         .count();
                     ++renders;
                     if (us > std::int64_t(deadline) * 1000) {
                         throw HttpError{504, "deadline_exceeded",
                                         "render took " + std::to_string(us / 1000) + " ms"};
                     }
                     sendPng(res, img);
                 }));

        http.Post("/masks", guard([this](const httplib::Request &req, httplib::Response &res) {
                      auto s = session(sessionName(req));
                      const Image8 gray =
                          decodePng(std::vector<std::uint8_t>(req.body.begin(), req.body.end()), 1);
                      Bitmap mask = bitmapFromImage(gray);
                      auto lk     = lockForMutation(*s);
                      const std::string id = s->newId("mask_");
                      s->masks[id]         = std::move(mask);
                      sendJson(res, {{"mask_id", id}, {"width", gray.width}, {"height", gray.height}},
                               201);
                  }));

        http.Post("/prompts", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      auto lk         = lockForMutation(*s);
                      PromptSet ps;
                      ps.view   = s->requireCamera(body.at("camera").get<std::string>());
                      ps.points = pointsFromJson(body.at("points"));
                      ps.id     = body.contains("id") ? body.at("id").get<std::string>()
                                                          : s->newId("prompts_");
                      ps.validate();
                      s->prompts[ps.id] = ps;
                      sendJson(res, {{"id", ps.id}, {"n_prompts", ps.points.size()}}, 201);
                  }));

        http.Post("/segment", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      auto lk         = lockForMutation(*s);
                      const GaussianScene &scene = s->requireScene();
                      const std::string pid      = body.at("prompt_set").get<std::string>();
                      auto pit                   = s->prompts.find(pid);
                      if (pit == s->prompts.end()) {
                          throw HttpError{404, "not_found", "unknown prompt set '" + pid + "'"};
                      }
                      PromptSet ps = pit->second;
                      const Camera &cam = ps.view;
                      const std::string source = body.value("mask_source", "none");
                      if (source == "bitmap") {
                          auto mit = s->masks.find(body.at("mask_id").get<std::string>());
                          if (mit == s->masks.end()) {
                              throw HttpError{404, "not_found", "unknown mask id"};
                          }
                          ps.mask = mit->second;
                      } else if (source == "mask_bank") {
                          const MaskBank bank =
                              loadMaskBank(resolveExisting(body.at("mask_bank").get<std::string>()));
                          ps.mask = maskFromBank(bank, ps.points);
                      } else if (source == "polygon") {
                          const std::vector<Vec2> poly = pointsFromJson(body.at("vertices"));
                          ps.mask = rasterizePolygon(cam.height, cam.width, poly);
                      } else if (source != "none") {
                          throw HttpError{400, "invalid_argument",
                                          "mask_source must be bitmap, mask_bank, polygon or none"};
                      }
                      ps.maskSource = source;
                      ps.validate();

                      const double tau  = body.value("tau", config.defaultTau);
                      const bool useSgc = body.value("use_sgc", false);
                      if (useSgc && !ps.mask) {
                          throw HttpError{400, "invalid_argument", "use_sgc needs a mask_source"};
                      }
                      StoredSegmentation stored{segment(scene, ps, tau, renderOptions()), ps, {}};
                      if (useSgc) {
                          stored.sgc = applySgc(scene, stored.result, ps, config.sgc);
                      }
                      const std::string id = s->newId("seg_");
                      json out             = stored.result.toJson();
                      out["id"]            = id;
                      out["use_sgc"]       = useSgc;
                      if (stored.sgc) {
                          out["cuts"] = stored.sgc->cutsJson();
                      }
                      s->segmentations[id] = std::move(stored);
                      ++segmentations;
                      sendJson(res, out, 201);
                  }));

        http.Get(R"(/segmentation/([^/]+)/mask\.png)",
                 guard([this](const httplib::Request &req, httplib::Response &res) {
                     auto s = session(sessionName(req));
                     std::shared_lock lk(s->mutex);
                     const StoredSegmentation &seg = s->requireSegmentation(req.matches[1]);
                     const Camera cam = req.has_param("camera") || req.has_param("pose")
                                            ? cameraFor(*s, req)
                                            : seg.prompts.view;
                     sendPng(res, bitmapToImage(alphaMask(seg.predicted(s->requireScene()), cam,
                                                          kDefaultAlphaCut, renderOptions())));
                 }));

        http.Get(R"(/segmentation/([^/]+)\.json)",
                 guard([this](const httplib::Request &req, httplib::Response &res) {
                     auto s = session(sessionName(req));
                     std::shared_lock lk(s->mutex);
                     const StoredSegmentation &seg = s->requireSegmentation(req.matches[1]);
                     json out                      = seg.result.toJson();
                     out["id"]                     = std::string(req.matches[1]);
                     out["use_sgc"]                = seg.sgc.has_value();
                     if (seg.sgc) {
                         out["cuts"] = seg.sgc->cutsJson();
                     }
                     sendJson(res, out);
                 }));

        http.Post("/export", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      auto lk         = lockForMutation(*s);
                      const StoredSegmentation &seg =
                          s->requireSegmentation(body.at("segmentation").get<std::string>());
                      const fs::path out = resolve(body.at("path").get<std::string>());
                      const GaussianScene pred = seg.predicted(s->requireScene());
                      saveScene(pred, out);
                      sendJson(res, {{"path", body.at("path")}, {"gaussians", pred.size()}});
                  }));

        http.Get("/metrics", guard([this](const httplib::Request &req, httplib::Response &res) {
                     json j = {{"requests", requests.load()},
                               {"renders", renders.load()},
                               {"segmentations", segmentations.load()},
                               {"trains", trains.load()},
                               {"errors", errors.load()}};
                     if (req.has_param("segmentation")) {
                         auto s = session(sessionName(req));
                         std::shared_lock lk(s->mutex);
                         const StoredSegmentation &seg =
                             s->requireSegmentation(req.get_param_value("segmentation"));
                         const Camera cam = cameraFor(*s, req);
                         if (!req.has_param("gt")) {
                             throw HttpError{400, "invalid_argument", "gt mask path required"};
                         }
                         const Bitmap gt = loadMaskPng(resolveExisting(req.get_param_value("gt")));
                         const Bitmap pred = alphaMask(seg.predicted(s->requireScene()), cam,
                                                       kDefaultAlphaCut, renderOptions());
                         j["iou"] = iou(pred, gt);
                         j["acc"] = accuracy(pred, gt);
                     }
                     sendJson(res, j);
                 }));

        http.Post("/train", guard([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parseBody(req);
                      auto s          = session(sessionName(req, &body));
                      TrainConfig cfg = TrainConfig::fromJson(body.value("config", json::object()));
                      if (!body.contains("config") || !body["config"].contains("threads")) {
                          cfg.threads = config.threads;
                      }
                      std::optional<PcaModel> pca;
                      if (body.contains("pca")) {
                          pca = loadPca(resolveExisting(body.at("pca").get<std::string>()));
                      }
                      std::vector<TrainingView> views = loadTrainingViews(
                          resolveExisting(body.at("views").get<std::string>()), pca ? &*pca : nullptr);

                      auto lk = lockForMutation(*s);
                      bool expected = false;
                      if (!s->training.compare_exchange_strong(expected, true)) {
                          throw HttpError{409, "conflict", "training is already running"};
                      }
                      GaussianScene scene = s->requireScene();
                      if (s->trainer.joinable()) {
                          s->trainer.join();
                      }
                      {
                          std::lock_guard jl(s->jobMutex);
                          s->job = TrainJob{"running", 0, cfg.iterations, {}, {}};
                      }
                      ++trains;
                      Session *raw = s.get();
                      s->trainer   = std::jthread([raw, scene = std::move(scene),
                                                 views = std::move(views),
                                                 cfg](std::stop_token stop) mutable {
                          std::string state = "done", error;
                          try {
                              TrainResult r = trainFeatureField(
                                  scene, std::move(views), cfg, [&](const LossRecord &rec) {
                                      std::lock_guard jl(raw->jobMutex);
                                      raw->job.iteration = rec.iteration + 1;
                                      raw->job.last      = rec;
                                      return !stop.stop_requested();
                                  });
                              if (stop.stop_requested()) {
                                  state = "cancelled";
                              } else {
                                  std::unique_lock wl(raw->mutex);
                                  if (raw->scene && raw->scene->size() == r.scene.size()) {
                                      raw->scene = std::move(r.scene);
                                      raw->segmentations.clear();
                                  }
                              }
                          } catch (const std::exception &e) {
                              state = "failed";
                              error = e.what();
                          }
                          {
                              std::lock_guard jl(raw->jobMutex);
                              raw->job.state = state;
                              raw->job.error = error;
                          }
                          raw->training = false;
                      });
                      sendJson(res, {{"state", "running"}, {"iterations", cfg.iterations}}, 202);
                  }));

        http.Get("/train/status", guard([this](const httplib::Request &req, httplib::Response &res) {
                     auto s = session(sessionName(req));
                     std::lock_guard jl(s->jobMutex);
                     sendJson(res, {{"state", s->job.state},
                                    {"iteration", s->job.iteration},
                                    {"iterations", s->job.iterations},
                                    {"loss_fe", s->job.last.lossFe},
                                    {"loss_com", s->job.last.lossCom},
                                    {"total", s->job.last.total},
                                    {"error", s->job.error}});
                 }));

        http.Post("/train/cancel", guard([this](const httplib::Request &req, httplib::Response &res) {
                      auto s = session(sessionName(req));
                      // /train reassigns the trainer under the exclusive lock.
                      std::shared_lock lk(s->mutex);
                      const bool running = s->training;
                      s->trainer.request_stop();
                      sendJson(res, {{"cancelled", running}});
                  }));

        http.set_error_handler([](const httplib::Request &, httplib::Response &res) {
            if (res.body.empty()) {
                sendError(res, res.status, res.status == 404 ? "not_found" : "http_error",
                          "no route for this request");
            }
        });
    }
};

Server::Server(ServerConfig config) : mImpl(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() = default;

int
Server::bind() {
    if (mImpl->boundPort >= 0) {
        return mImpl->boundPort;
    }
    const auto &c = mImpl->config;
    if (c.port == 0) {
        mImpl->boundPort = mImpl->http.bind_to_any_port(c.host);
    } else if (mImpl->http.bind_to_port(c.host, c.port)) {
        mImpl->boundPort = c.port;
    }
    check(mImpl->boundPort > 0, ErrorCode::Io, "cannot bind the HTTP port");
    return mImpl->boundPort;
}

void
Server::listen() {
    bind();
    mImpl->http.listen_after_bind();
}

void
Server::waitUntilReady() const {
    mImpl->http.wait_until_ready();
}

void
Server::stop() {
    mImpl->http.stop();
}

int
Server::port() const {
    return mImpl->boundPort;
}

} // namespace segwild
