// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/benchmark.hpp>

#include <segwild/image_io.hpp>
#include <segwild/io.hpp>
#include <segwild/metrics.hpp>
#include <segwild/sgc.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

namespace segwild {

namespace {

using Clock = std::chrono::steady_clock;

double
elapsedMs(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

fs::path
resolve(const fs::path &base, const nlohmann::json &j, const char *what) {
    check(j.is_string(), ErrorCode::Format, what);
    const fs::path p = base / j.get<std::string>();
    if (!fs::exists(p)) {
        fail(ErrorCode::NotFound, "unresolved manifest path: " + p.string());
    }
    return p;
}

CaseReport
runCase(const nlohmann::json &jc, const fs::path &base, const BenchmarkOptions &options,
        std::map<fs::path, GaussianScene> &scenes) {
    const auto start = Clock::now();
    CaseReport rep;
    rep.name = jc.value("name", std::string("case"));

    const fs::path scenePath = resolve(base, jc.at("scene"), "case scene must be a path");
    auto it                  = scenes.find(scenePath);
    if (it == scenes.end()) {
        it = scenes.emplace(scenePath, loadScene(scenePath)).first;
    }
    const GaussianScene &scene = it->second;

    std::map<std::string, Camera> cameras;
    for (const auto &[id, path] : jc.at("cameras").items()) {
        cameras[id] = loadCamera(resolve(base, path, "camera entry must be a path"));
    }
    const auto camera = [&](const nlohmann::json &id) -> const Camera & {
        const auto found = cameras.find(id.get<std::string>());
        if (found == cameras.end()) {
            fail(ErrorCode::NotFound, "unknown camera id " + id.get<std::string>());
        }
        return found->second;
    };

    const nlohmann::json &jp = jc.at("prompts");
    PromptSet prompts;
    prompts.id   = jp.at("camera").get<std::string>();
    prompts.view = camera(jp.at("camera"));
    for (const auto &pt : jp.at("points")) {
        prompts.points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    }
    if (jp.contains("mask_png")) {
        prompts.mask       = loadMaskPng(resolve(base, jp.at("mask_png"), "mask_png must be a path"));
        prompts.maskSource = "bitmap";
    }

    const double tau = jc.value("tau", kDefaultTau);
    rep.usedSgc      = options.forceSgc.value_or(jc.value("use_sgc", false));
    const SegmentationResult res = segment(scene, prompts, tau, options.render);
    rep.selected                 = res.selected.size();

    GaussianScene predicted = scene.subset(res.selected);
    if (rep.usedSgc && prompts.mask) {
        SgcResult cut = applySgc(scene, res, prompts);
        rep.cut       = cut.cuts.size();
        rep.dropped   = static_cast<std::size_t>(std::count_if(
            cut.cuts.begin(), cut.cuts.end(), [](const CutRecord &c) { return c.dropped; }));
        predicted = std::move(cut.scene);
    }

    for (const auto &jg : jc.at("gt")) {
        const Camera &cam = camera(jg.at("camera"));
        const Bitmap gt   = loadMaskPng(resolve(base, jg.at("mask_png"), "gt mask must be a path"));
        const Bitmap pred = alphaMask(predicted, cam, kDefaultAlphaCut, options.render);
        rep.views.push_back({jg.at("camera").get<std::string>(), iou(pred, gt), accuracy(pred, gt)});
    }
    check(!rep.views.empty(), ErrorCode::Validation, "benchmark case without ground truth");
    for (const ViewScore &v : rep.views) {
        rep.meanIou += v.iou / double(rep.views.size());
        rep.meanAcc += v.acc / double(rep.views.size());
    }
    rep.runtimeMs = elapsedMs(start);
    return rep;
}

} // namespace

nlohmann::json
BenchmarkReport::toJson(bool withTiming) const {
    nlohmann::json jc = nlohmann::json::array();
    for (const CaseReport &c : cases) {
        nlohmann::json views = nlohmann::json::array();
        for (const ViewScore &v : c.views) {
            views.push_back({{"camera", v.camera}, {"iou", v.iou}, {"acc", v.acc}});
        }
        nlohmann::json j = {{"name", c.name},         {"views", views},
                            {"mean_iou", c.meanIou},  {"mean_acc", c.meanAcc},
                            {"selected", c.selected}, {"cut", c.cut},
                            {"dropped", c.dropped},   {"use_sgc", c.usedSgc}};
        if (withTiming) {
            j["runtime_ms"] = c.runtimeMs;
        }
        jc.push_back(std::move(j));
    }
    nlohmann::json out = {{"cases", jc}, {"mean_iou", meanIou}, {"mean_acc", meanAcc}};
    if (withTiming) {
        out["runtime_ms"] = runtimeMs;
    }
    return out;
}

std::string
BenchmarkReport::toCsv() const {
    std::ostringstream out;
    out.precision(10);
    out << "case,camera,iou,acc\n";
    for (const CaseReport &c : cases) {
        for (const ViewScore &v : c.views) {
            out << c.name << ',' << v.camera << ',' << v.iou << ',' << v.acc << '\n';
        }
    }
    return out.str();
}

BenchmarkReport
runBenchmark(const fs::path &manifest, const BenchmarkOptions &options) {
    const auto start       = Clock::now();
    const nlohmann::json j = readJsonFile(manifest);
    const fs::path base    = manifest.parent_path();
    check(j.contains("cases") && j.at("cases").is_array(), ErrorCode::Format,
          "manifest needs a cases array");

    BenchmarkReport report;
    std::map<fs::path, GaussianScene> scenes;
    try {
        for (const auto &jc : j.at("cases")) {
            report.cases.push_back(runCase(jc, base, options, scenes));
        }
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::Format, std::string("malformed manifest: ") + e.what());
    }
    std::stable_sort(report.cases.begin(), report.cases.end(),
                     [](const CaseReport &a, const CaseReport &b) { return a.name < b.name; });
    for (const CaseReport &c : report.cases) {
        report.meanIou += c.meanIou / double(report.cases.size());
        report.meanAcc += c.meanAcc / double(report.cases.size());
    }
    report.runtimeMs = elapsedMs(start);
    return report;
}

} // namespace segwild
