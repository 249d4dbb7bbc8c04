// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the library only through segwild.h.
// Exit status: 0 success, 1 runtime failure, 2 usage error.
//
#include <segwild/segwild.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

struct Failure {
    sw_status status;
    std::string message;
};

struct UsageError {
    std::string message;
};

void
ok(sw_status s) {
    if (s != SW_OK) {
        throw Failure{s, sw_last_error()};
    }
}

// Owning wrappers so every exit path frees its handles.
template <class T, void (*Free)(T *)> struct Deleter {
    void operator()(T *p) const { Free(p); }
};
using Scene   = std::unique_ptr<sw_scene, Deleter<sw_scene, sw_scene_free>>;
using Cam     = std::unique_ptr<sw_camera, Deleter<sw_camera, sw_camera_free>>;
using Seg     = std::unique_ptr<sw_segmentation, Deleter<sw_segmentation, sw_segmentation_free>>;
using ServerH = std::unique_ptr<sw_server, Deleter<sw_server, sw_server_free>>;
using CString = std::unique_ptr<char, Deleter<char, sw_string_free>>;

Scene
loadScene(const std::string &path) {
    sw_scene *s = nullptr;
    ok(sw_scene_load(path.c_str(), &s));
    return Scene(s);
}

Cam
loadCamera(const std::string &path) {
    sw_camera *c = nullptr;
    ok(sw_camera_load(path.c_str(), &c));
    return Cam(c);
}

std::string
readText(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Failure{SW_ERR_IO, "cannot read " + path};
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void
writeText(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::trunc);
    out << text << '\n';
    if (!out) {
        throw Failure{SW_ERR_IO, "cannot write " + path};
    }
}

// "u,v" -> two doubles appended to xy.
void
parsePairs(const std::vector<std::string> &items, std::vector<double> &xy) {
    for (const std::string &item : items) {
        double u = 0.0, v = 0.0;
        char tail = 0;
        if (std::sscanf(item.c_str(), "%lf,%lf%c", &u, &v, &tail) != 2) {
            throw UsageError{"expected u,v but got '" + item + "'"};
        }
        xy.push_back(u);
        xy.push_back(v);
    }
}

struct Output {
    bool asJson = false;

    void
    emit(const json &j, const std::string &human) const {
        if (asJson) {
            std::cout << j.dump(2) << '\n';
        } else if (!human.empty()) {
            std::cout << human << '\n';
        }
    }
};

struct SegmentArgs {
    std::string scene, camera, mask, maskBank, outJson, outMask, exportPly, id;
    std::vector<std::string> points, polygon;
    double tau = 0.5;
    int samples = 64;
    double dropRatio = 0.05;
    bool sgc = false;
};

void
addSegmentOptions(CLI::App *cmd, SegmentArgs &a) {
    cmd->add_option("--scene", a.scene, "Scene PLY")->required();
    cmd->add_option("--camera", a.camera, "Prompt camera JSON")->required();
    cmd->add_option("--point", a.points, "Prompt click u,v (repeatable)")->required();
    cmd->add_option("--tau", a.tau, "Selection threshold")->capture_default_str();
    auto *mask = cmd->add_option("--mask", a.mask, "2D mask PNG gating the selection");
    auto *bank = cmd->add_option("--mask-bank", a.maskBank, "Mask bank; the mask under the clicks is used");
    auto *poly = cmd->add_option("--polygon", a.polygon, "Polygon vertex u,v (repeatable)");
    mask->excludes(bank)->excludes(poly);
    bank->excludes(poly);
    cmd->add_option("--id", a.id, "Prompt set id");
    cmd->add_option("--out-json", a.outJson, "Write the segmentation JSON here");
    cmd->add_option("--out-mask", a.outMask, "Write the rendered selection mask (prompt view)");
    cmd->add_option("--export", a.exportPly, "Write the selected Gaussians as PLY");
    cmd->add_option("--samples", a.samples, "Cutter samples along the axis")->capture_default_str();
    cmd->add_option("--drop-ratio", a.dropRatio, "Cutter drop ratio")->capture_default_str();
}

void
runSegment(const SegmentArgs &a, const Output &out) {
    Scene scene = loadScene(a.scene);
    Cam cam     = loadCamera(a.camera);
    std::vector<double> points, polygon;
    parsePairs(a.points, points);
    parsePairs(a.polygon, polygon);

    sw_prompt_spec spec;
    sw_prompt_spec_init(&spec);
    spec.points   = points.data();
    spec.n_points = points.size() / 2;
    spec.tau      = a.tau;
    spec.id       = a.id.empty() ? nullptr : a.id.c_str();
    if (!a.mask.empty()) {
        spec.mask_png = a.mask.c_str();
    } else if (!a.maskBank.empty()) {
        spec.mask_bank = a.maskBank.c_str();
    } else if (!polygon.empty()) {
        spec.polygon   = polygon.data();
        spec.n_polygon = polygon.size() / 2;
    }
    if (a.sgc && !spec.mask_png && !spec.mask_bank && !spec.polygon) {
        throw UsageError{"the cutter needs --mask, --mask-bank or --polygon"};
    }

    sw_segmentation *raw = nullptr;
    ok(sw_segment(scene.get(), cam.get(), &spec, &raw));
    Seg seg(raw);
    if (a.sgc) {
        ok(sw_sgc_apply(scene.get(), seg.get(), a.samples, a.dropRatio));
    }
    char *text = nullptr;
    ok(sw_segmentation_json(seg.get(), &text));
    const json result = json::parse(CString(text).get());
    if (!a.outJson.empty()) {
        writeText(a.outJson, result.dump(2));
    }
    if (!a.outMask.empty()) {
        ok(sw_segmentation_mask_png(scene.get(), seg.get(), nullptr, a.outMask.c_str()));
    }
    if (!a.exportPly.empty()) {
        ok(sw_segmentation_export(scene.get(), seg.get(), a.exportPly.c_str()));
    }
    std::string human = "selected " + std::to_string(result.at("indices").size()) + " Gaussians";
    if (a.sgc) {
        human += ", " + std::to_string(result.at("cuts").size()) + " cut records";
    }
    out.emit(result, human);
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"Interactive 3D segmentation of splat scenes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sw_version()));
    Output out;
    unsigned threads = 0;
    app.add_flag("--json", out.asJson, "Machine-readable output on stdout");
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    // render
    std::string rScene, rCamera, rMode = "color", rOut, rFmap;
    auto *render = app.add_subcommand("render", "Render a view to PNG and/or features to FMAP");
    render->add_option("--scene", rScene)->required();
    render->add_option("--camera", rCamera)->required();
    render->add_option("--mode", rMode, "color, depth or alpha")
        ->check(CLI::IsMember({"color", "depth", "alpha"}))
        ->capture_default_str();
    render->add_option("--out", rOut, "Output PNG");
    render->add_option("--features", rFmap, "Output FMAP of rendered affinities");

    // train-features
    std::string tScene, tViews, tOut, tConfig, tPca, tLoss, tPcaOut;
    std::optional<int> tIterations, tPcaFit;
    std::optional<std::uint64_t> tSeed;
    auto *train = app.add_subcommand("train-features", "Distil affinity features from teacher maps");
    train->add_option("--scene", tScene)->required();
    train->add_option("--views", tViews, "Views manifest {views:[{camera, teacher, masks}]}")->required();
    train->add_option("--out", tOut, "Trained scene PLY")->required();
    train->add_option("--config", tConfig, "Training config JSON file");
    train->add_option("--iterations", tIterations);
    train->add_option("--seed", tSeed);
    train->add_option("--pca", tPca, "Compress teachers with this model");
    train->add_option("--pca-fit", tPcaFit, "Fit a compressor of this width first");
    train->add_option("--pca-out", tPcaOut, "Where --pca-fit stores its model");
    train->add_option("--loss-csv", tLoss, "Per-iteration loss trace");

    // prompts
    std::string pScene, pPlan, pOut;
    int pMax = 20;
    auto *prompts = app.add_subcommand("prompts", "Plan scale-adaptive prompt points");
    prompts->add_option("--scene", pScene)->required();
    prompts->add_option("--plan", pPlan, "Plan manifest {views:[{id, camera, sky?}]}")->required();
    prompts->add_option("--max-points", pMax)->capture_default_str()->check(CLI::PositiveNumber);
    prompts->add_option("--out", pOut, "Output JSON");

    SegmentArgs segArgs;
    auto *segment = app.add_subcommand("segment", "Select Gaussians from prompt clicks");
    addSegmentOptions(segment, segArgs);
    segment->add_flag("--sgc", segArgs.sgc, "Cut Gaussians that leave the mask");

    SegmentArgs sgcArgs;
    sgcArgs.sgc = true;
    auto *sgc = app.add_subcommand("sgc", "Segment, then cut Gaussians that leave the 2D mask");
    addSegmentOptions(sgc, sgcArgs);

    // eval
    std::string eManifest, eOut, eCsv;
    bool eSgc = false, eNoSgc = false, eNoTiming = false;
    auto *eval = app.add_subcommand("eval", "Run a benchmark manifest");
    eval->add_option("--manifest", eManifest)->required();
    auto *fs = eval->add_flag("--sgc", eSgc, "Force the cutter on");
    eval->add_flag("--no-sgc", eNoSgc, "Force the cutter off")->excludes(fs);
    eval->add_flag("--no-timing", eNoTiming, "Omit runtimes so reports compare byte for byte");
    eval->add_option("--out", eOut, "Report JSON");
    eval->add_option("--csv", eCsv, "Per-view CSV");

    // synth
    std::string sOut;
    std::uint64_t sSeed = 7;
    int sSpikes = 0, sIterations = 2000;
    bool sNoTrain = false, sNoSgc = false;
    auto *synth = app.add_subcommand("synth", "Write a seeded synthetic benchmark");
    synth->add_option("--out", sOut, "Output directory")->required();
    synth->add_option("--seed", sSeed)->capture_default_str();
    synth->add_option("--spikes", sSpikes, "Spiky Gaussians per cluster")->capture_default_str();
    synth->add_option("--iterations", sIterations)->capture_default_str();
    synth->add_flag("--no-train", sNoTrain, "Keep zero affinities");
    synth->add_flag("--no-sgc", sNoSgc, "Write cases without the cutter");

    // serve
    std::string vConfig, vHost, vRoot;
    std::optional<int> vPort;
    auto *serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
    serve->add_option("--config", vConfig, "Server config JSON file");
    serve->add_option("--host", vHost);
    serve->add_option("--port", vPort);
    serve->add_option("--data-root", vRoot);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    sw_set_threads(threads);

    try {
        if (*render) {
            if (rOut.empty() && rFmap.empty()) {
                throw UsageError{"render needs --out and/or --features"};
            }
            Scene scene = loadScene(rScene);
            Cam cam     = loadCamera(rCamera);
            if (!rOut.empty()) {
                ok(sw_render_png(scene.get(), cam.get(), rMode.c_str(), rOut.c_str()));
            }
            if (!rFmap.empty()) {
                ok(sw_render_fmap(scene.get(), cam.get(), rFmap.c_str()));
            }
            out.emit({{"png", rOut}, {"features", rFmap}}, "rendered");
        } else if (*train) {
            json cfg = tConfig.empty() ? json::object() : json::parse(readText(tConfig));
            if (tIterations) cfg["iterations"] = *tIterations;
            if (tSeed) cfg["seed"] = *tSeed;
            if (tPcaFit) {
                if (tPcaOut.empty()) {
                    throw UsageError{"--pca-fit needs --pca-out"};
                }
                ok(sw_pca_fit(tViews.c_str(), *tPcaFit, tPcaOut.c_str()));
                tPca = tPcaOut;
            }
            Scene scene      = loadScene(tScene);
            sw_scene *trained = nullptr;
            const std::string cfgText = cfg.dump();
            ok(sw_train_features(scene.get(), tViews.c_str(), cfgText.c_str(),
                                 tPca.empty() ? nullptr : tPca.c_str(),
                                 tLoss.empty() ? nullptr : tLoss.c_str(), &trained));
            Scene result(trained);
            ok(sw_scene_save(result.get(), tOut.c_str()));
            out.emit({{"scene", tOut}, {"loss_csv", tLoss}}, "wrote " + tOut);
        } else if (*prompts) {
            Scene scene = loadScene(pScene);
            char *text  = nullptr;
            ok(sw_plan_prompts(scene.get(), pPlan.c_str(), pMax, &text));
            const json maps = json::parse(CString(text).get());
            if (!pOut.empty()) {
                writeText(pOut, maps.dump(2));
            }
            std::size_t total = 0;
            for (const json &m : maps) {
                total += m.at("points").size();
            }
            out.emit(maps, std::to_string(total) + " prompt points over " +
                               std::to_string(maps.size()) + " views");
        } else if (*segment) {
            runSegment(segArgs, out);
        } else if (*sgc) {
            runSegment(sgcArgs, out);
        } else if (*eval) {
            char *text = nullptr;
            ok(sw_eval_run(eManifest.c_str(), eSgc ? 1 : eNoSgc ? 0 : -1, eNoTiming ? 0 : 1,
                           eCsv.empty() ? nullptr : eCsv.c_str(), &text));
            const json report = json::parse(CString(text).get());
            if (!eOut.empty()) {
                writeText(eOut, report.dump(2));
            }
            char line[96];
            std::snprintf(line, sizeof(line), "mean IoU %.4f  mean Acc %.4f  (%zu cases)",
                          report.at("mean_iou").get<double>(), report.at("mean_acc").get<double>(),
                          report.at("cases").size());
            out.emit(report, line);
        } else if (*synth) {
            const json spec = {{"seed", sSeed},
                               {"spikes", sSpikes},
                               {"iterations", sIterations},
                               {"train", !sNoTrain},
                               {"use_sgc", !sNoSgc}};
            ok(sw_synth_generate(sOut.c_str(), spec.dump().c_str()));
            out.emit({{"dir", sOut}, {"manifest", sOut + "/manifest.json"}},
                     "wrote " + sOut + "/manifest.json");
        } else if (*serve) {
            json cfg = vConfig.empty() ? json::object() : json::parse(readText(vConfig));
            if (!vHost.empty()) cfg["host"] = vHost;
            if (vPort) cfg["port"] = *vPort;
            if (!vRoot.empty()) cfg["data_root"] = vRoot;
            sw_server *raw = nullptr;
            ok(sw_server_start(cfg.empty() ? nullptr : cfg.dump().c_str(), &raw));
            ServerH server(raw);
            out.emit({{"port", sw_server_port(raw)}},
                     "listening on port " + std::to_string(sw_server_port(raw)));
            std::cout.flush();
            ok(sw_server_wait(raw));
        }
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.message << '\n';
        return 2;
    } catch (const Failure &e) {
        if (out.asJson) {
            std::cout << json{{"error", {{"code", sw_status_name(e.status)}, {"message", e.message}}}}
                             .dump(2)
                      << '\n';
        }
        std::cerr << "error (" << sw_status_name(e.status) << "): " << e.message << '\n';
        return 1;
    } catch (const json::exception &e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
