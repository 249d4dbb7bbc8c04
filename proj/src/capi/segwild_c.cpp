// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/segwild.h>

#include <segwild/benchmark.hpp>
#include <segwild/image_io.hpp>
#include <segwild/io.hpp>
#include <segwild/metrics.hpp>
#include <segwild/pca.hpp>
#include <segwild/sasm.hpp>
#include <segwild/server.hpp>
#include <segwild/sgc.hpp>
#include <segwild/synthetic.hpp>

#include <atomic>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <thread>

using namespace segwild;
using json = nlohmann::json;

struct sw_scene {
    GaussianScene scene;
};

struct sw_camera {
    Camera camera;
};

struct sw_segmentation {
    SegmentationResult result;
    PromptSet prompts;
    std::optional<SgcResult> sgc;
};

struct sw_server {
    std::unique_ptr<Server> server;
    std::thread loop;
};

namespace {

thread_local std::string tLastError;
std::atomic<unsigned> gThreads{0};

RenderOptions
renderOptions() {
    return RenderOptions{gThreads.load()};
}

sw_status
toStatus(ErrorCode code) {
    return static_cast<sw_status>(static_cast<int>(code));
}

// Runs f, translating exceptions into a status and the thread's last error.
template <class F>
sw_status
guarded(F &&f) noexcept {
    try {
        tLastError.clear();
        f();
        return SW_OK;
    } catch (const Error &e) {
        tLastError = e.what();
        return toStatus(e.code());
    } catch (const json::exception &e) {
        tLastError = std::string("malformed JSON: ") + e.what();
        return SW_ERR_INVALID_ARGUMENT;
    } catch (const std::bad_alloc &) {
        tLastError = "out of memory";
        return SW_ERR_RUNTIME;
    } catch (const std::exception &e) {
        tLastError = e.what();
        return SW_ERR_RUNTIME;
    }
}

void
require(const void *p, const char *what) {
    if (!p) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
    }
}

char *
copyString(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json
parseJson(const char *text) {
    if (!text) {
        return json::object();
    }
    json j = json::parse(text, nullptr, false);
    check(!j.is_discarded() && j.is_object(), ErrorCode::InvalidArgument,
          "expected a JSON object");
    return j;
}

std::vector<Vec2>
pairs(const double *xy, std::size_t n) {
    std::vector<Vec2> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.emplace_back(xy[2 * i], xy[2 * i + 1]);
    }
    return out;
}

GaussianScene
predicted(const GaussianScene &scene, const sw_segmentation &seg) {
    return seg.sgc ? seg.sgc->scene : scene.subset(seg.result.selected);
}

} // namespace

extern "C" {

const char *
sw_version(void) {
    return SEGWILD_VERSION;
}

const char *
sw_status_name(sw_status status) {
    if (status == SW_OK) {
        return "ok";
    }
    if (status < SW_ERR_INVALID_ARGUMENT || status > SW_ERR_RUNTIME) {
        return "unknown";
    }
    return errorCodeName(static_cast<ErrorCode>(status));
}

const char *
sw_last_error(void) {
    return tLastError.c_str();
}

void
sw_string_free(char *s) {
    std::free(s);
}

void
sw_set_threads(unsigned threads) {
    gThreads = threads;
}

sw_status
sw_scene_load(const char *path, sw_scene **out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new sw_scene{loadScene(path)};
    });
}

sw_status
sw_scene_save(const sw_scene *scene, const char *path) {
    return guarded([&] {
        require(scene, "scene");
        require(path, "path");
        saveScene(scene->scene, path);
    });
}

sw_status
sw_scene_info(const sw_scene *scene, size_t *count, size_t *featureDim) {
    return guarded([&] {
        require(scene, "scene");
        if (count) {
            *count = scene->scene.size();
        }
        if (featureDim) {
            *featureDim = scene->scene.featureDim();
        }
    });
}

void
sw_scene_free(sw_scene *scene) {
    delete scene;
}

sw_status
sw_camera_load(const char *path, sw_camera **out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new sw_camera{loadCamera(path)};
    });
}

sw_status
sw_camera_from_json(const char *text, sw_camera **out) {
    return guarded([&] {
        require(text, "json");
        require(out, "out");
        *out = new sw_camera{cameraFromJson(parseJson(text))};
    });
}

sw_status
sw_camera_size(const sw_camera *camera, int *width, int *height) {
    return guarded([&] {
        require(camera, "camera");
        if (width) {
            *width = camera->camera.width;
        }
        if (height) {
            *height = camera->camera.height;
        }
    });
}

void
sw_camera_free(sw_camera *camera) {
    delete camera;
}

sw_status
sw_render_png(const sw_scene *scene, const sw_camera *camera, const char *mode, const char *path) {
    return guarded([&] {
        require(scene, "scene");
        require(camera, "camera");
        require(path, "png_path");
        const std::string m = mode ? mode : "color";
        const Camera &cam   = camera->camera;
        if (m == "color") {
            writePng(colorToImage(
                         renderPayload(scene->scene, cam, PayloadSelector::color(), renderOptions())
                             .payload),
                     path);
        } else if (m == "alpha") {
            writePng(scalarToImage(renderPayload(scene->scene, cam, PayloadSelector::constant(),
                                                 renderOptions())
                                       .alpha,
                                   0.0, 1.0),
                     path);
        } else if (m == "depth") {
            const FeatureMap depth = centerDepthMap(scene->scene, cam);
            const auto [lo, hi] = std::minmax_element(depth.data().begin(), depth.data().end());
            writePng(scalarToImage(depth, *lo, *hi), path);
        } else {
            fail(ErrorCode::InvalidArgument, "render mode must be color, depth or alpha");
        }
    });
}

sw_status
sw_render_fmap(const sw_scene *scene, const sw_camera *camera, const char *path) {
    return guarded([&] {
        require(scene, "scene");
        require(camera, "camera");
        require(path, "fmap_path");
        saveFeatureMap(renderPayload(scene->scene, camera->camera, PayloadSelector::affinity(),
                                     renderOptions())
                           .payload,
                       path);
    });
}

sw_status
sw_pca_fit(const char *manifest, int outputDim, const char *path) {
    return guarded([&] {
        require(manifest, "views_manifest");
        require(path, "pca_path");
        const std::vector<TrainingView> views = loadTrainingViews(manifest);
        std::vector<FeatureMap> teachers;
        for (const TrainingView &v : views) {
            teachers.push_back(v.teacher);
        }
        savePca(fitPca(samplePixels(teachers), outputDim), path);
    });
}

sw_status
sw_train_features(const sw_scene *scene, const char *manifest, const char *configJson,
                  const char *pcaPath, const char *lossCsv, sw_scene **out) {
    return guarded([&] {
        require(scene, "scene");
        require(manifest, "views_manifest");
        require(out, "out");
        TrainConfig base;
        base.threads = gThreads;
        const TrainConfig cfg = TrainConfig::fromJson(parseJson(configJson), base);
        std::optional<PcaModel> pca;
        if (pcaPath) {
            pca = loadPca(pcaPath);
        }
        TrainResult r = trainFeatureField(scene->scene, loadTrainingViews(manifest, pca ? &*pca : nullptr),
                                          cfg);
        if (lossCsv) {
            writeLossTraceCsv(r.trace, lossCsv);
        }
        *out = new sw_scene{std::move(r.scene)};
    });
}

sw_status
sw_plan_prompts(const sw_scene *scene, const char *manifest, int maxPoints, char **jsonOut) {
    return guarded([&] {
        require(scene, "scene");
        require(manifest, "plan_manifest");
        require(jsonOut, "json_out");
        const json j      = readJsonFile(manifest);
        const fs::path base = fs::path(manifest).parent_path();
        std::vector<PlanView> views;
        for (const json &v : j.at("views")) {
            PlanView pv{v.at("id").get<std::string>(),
                        loadCamera(base / v.at("camera").get<std::string>()), std::nullopt};
            if (v.contains("sky")) {
                pv.sky = loadMaskPng(base / v.at("sky").get<std::string>());
            }
            views.push_back(std::move(pv));
        }
        json out = json::array();
        for (const PromptPointMap &m : planPrompts(scene->scene, views, maxPoints)) {
            out.push_back(m.toJson());
        }
        *jsonOut = copyString(out.dump());
    });
}

void
sw_prompt_spec_init(sw_prompt_spec *spec) {
    if (spec) {
        *spec     = sw_prompt_spec{};
        spec->tau = kDefaultTau;
    }
}

sw_status
sw_segment(const sw_scene *scene, const sw_camera *camera, const sw_prompt_spec *spec,
           sw_segmentation **out) {
    return guarded([&] {
        require(scene, "scene");
        require(camera, "camera");
        require(spec, "spec");
        require(out, "out");
        check(spec->n_points == 0 || spec->points, ErrorCode::InvalidArgument,
              "points must not be NULL");
        const int sources = (spec->mask_png != nullptr) + (spec->mask_bank != nullptr) +
                            (spec->polygon != nullptr);
        check(sources <= 1, ErrorCode::InvalidArgument, "at most one mask source may be given");

        PromptSet ps;
        ps.id     = spec->id ? spec->id : "prompts";
        ps.view   = camera->camera;
        ps.points = pairs(spec->points, spec->n_points);
        if (spec->mask_png) {
            ps.mask       = loadMaskPng(spec->mask_png);
            ps.maskSource = "bitmap";
        } else if (spec->mask_bank) {
            ps.mask       = maskFromBank(loadMaskBank(spec->mask_bank), ps.points);
            ps.maskSource = "mask_bank";
        } else if (spec->polygon) {
            ps.mask = rasterizePolygon(ps.view.height, ps.view.width,
                                       pairs(spec->polygon, spec->n_polygon));
            ps.maskSource = "polygon";
        }
        ps.validate();
        auto seg     = std::make_unique<sw_segmentation>();
        seg->result  = segment(scene->scene, ps, spec->tau, renderOptions());
        seg->prompts = std::move(ps);
        *out         = seg.release();
    });
}

sw_status
sw_sgc_apply(const sw_scene *scene, sw_segmentation *seg, int samples, double dropRatio) {
    return guarded([&] {
        require(scene, "scene");
        require(seg, "segmentation");
        check(seg->prompts.mask.has_value(), ErrorCode::InvalidArgument,
              "the cutter needs a segmentation made with a mask");
        seg->sgc = applySgc(scene->scene, seg->result, seg->prompts, SgcConfig{samples, dropRatio});
    });
}

sw_status
sw_segmentation_count(const sw_segmentation *seg, size_t *count) {
    return guarded([&] {
        require(seg, "segmentation");
        require(count, "count");
        *count = seg->result.selected.size();
    });
}

sw_status
sw_segmentation_indices(const sw_segmentation *seg, size_t *indices, size_t capacity) {
    return guarded([&] {
        require(seg, "segmentation");
        check(indices || capacity == 0, ErrorCode::InvalidArgument, "indices must not be NULL");
        const auto &sel = seg->result.selected;
        std::copy_n(sel.begin(), std::min(capacity, sel.size()), indices);
    });
}

sw_status
sw_segmentation_json(const sw_segmentation *seg, char **jsonOut) {
    return guarded([&] {
        require(seg, "segmentation");
        require(jsonOut, "json_out");
        json j       = seg->result.toJson();
        j["use_sgc"] = seg->sgc.has_value();
        if (seg->sgc) {
            j["cuts"] = seg->sgc->cutsJson();
        }
        *jsonOut = copyString(j.dump());
    });
}

sw_status
sw_segmentation_mask_png(const sw_scene *scene, const sw_segmentation *seg,
                         const sw_camera *camera, const char *path) {
    return guarded([&] {
        require(scene, "scene");
        require(seg, "segmentation");
        require(path, "png_path");
        const Camera &cam = camera ? camera->camera : seg->prompts.view;
        saveMaskPng(alphaMask(predicted(scene->scene, *seg), cam, kDefaultAlphaCut, renderOptions()),
                    path);
    });
}

sw_status
sw_segmentation_export(const sw_scene *scene, const sw_segmentation *seg, const char *path) {
    return guarded([&] {
        require(scene, "scene");
        require(seg, "segmentation");
        require(path, "ply_path");
        saveScene(predicted(scene->scene, *seg), path);
    });
}

void
sw_segmentation_free(sw_segmentation *seg) {
    delete seg;
}

sw_status
sw_eval_run(const char *manifest, int forceSgc, int withTiming, const char *csvPath,
            char **jsonOut) {
    return guarded([&] {
        require(manifest, "manifest");
        require(jsonOut, "json_out");
        check(forceSgc >= -1 && forceSgc <= 1, ErrorCode::InvalidArgument,
              "force_sgc must be -1, 0 or 1");
        BenchmarkOptions opts;
        if (forceSgc >= 0) {
            opts.forceSgc = forceSgc == 1;
        }
        opts.render                  = renderOptions();
        const BenchmarkReport report = runBenchmark(manifest, opts);
        if (csvPath) {
            std::ofstream csv(csvPath, std::ios::trunc);
            check(bool(csv), ErrorCode::Io, "cannot open CSV report for writing");
            csv << report.toCsv();
        }
        *jsonOut = copyString(report.toJson(withTiming != 0).dump(2));
    });
}

sw_status
sw_synth_generate(const char *outDir, const char *specJson) {
    return guarded([&] {
        require(outDir, "out_dir");
        const json j        = parseJson(specJson);
        SyntheticSpec spec  = SyntheticSpec::twoCluster(j.value("seed", std::uint64_t(7)),
                                                        j.value("spikes", 0));
        spec.views          = j.value("views", spec.views);
        spec.width          = j.value("width", spec.width);
        spec.height         = j.value("height", spec.height);
        SyntheticWriteOptions opts;
        opts.train                   = j.value("train", true);
        opts.useSgc                  = j.value("use_sgc", true);
        opts.trainConfig.iterations  = j.value("iterations", opts.trainConfig.iterations);
        opts.trainConfig.rngSeed     = spec.seed;
        opts.trainConfig.threads     = gThreads;
        opts.trainConfig.validate();
        writeSyntheticBenchmark(spec, outDir, opts);
    });
}

sw_status
sw_server_start(const char *configJson, sw_server **out) {
    return guarded([&] {
        require(out, "out");
        ServerConfig cfg = ServerConfig::fromEnvironment();
        if (configJson) {
            cfg = ServerConfig::fromJson(parseJson(configJson), cfg);
        }
        if (cfg.threads == 0) {
            cfg.threads = gThreads;
        }
        auto s    = std::make_unique<sw_server>();
        s->server = std::make_unique<Server>(cfg);
        s->server->bind();
        Server *raw = s->server.get();
        s->loop     = std::thread([raw] { raw->listen(); });
        raw->waitUntilReady();
        *out        = s.release();
    });
}

int
sw_server_port(const sw_server *server) {
    return server ? server->server->port() : -1;
}

sw_status
sw_server_wait(sw_server *server) {
    return guarded([&] {
        require(server, "server");
        if (server->loop.joinable()) {
            server->loop.join();
        }
    });
}

void
sw_server_stop(sw_server *server) {
    if (server) {
        server->server->stop();
    }
}

void
sw_server_free(sw_server *server) {
    if (!server) {
        return;
    }
    server->server->stop();
    if (server->loop.joinable()) {
        server->loop.join();
    }
    delete server;
}

} // extern "C"
