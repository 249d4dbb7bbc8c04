// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Manifest-driven evaluation. Manifest schema (paths relative to the
// manifest file):
//   {cases: [{name, scene, cameras: {id: path},
//             prompts: {camera, points: [[u, v], ...], mask_png?},
//             gt: [{camera, mask_png}], tau?, use_sgc?}]}
// Each case segments from its prompts (plus SGC when requested), renders
// the selection into every ground-truth view and scores IoU and accuracy.
//
#pragma once

#include <segwild/render.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace segwild {

struct ViewScore {
    std::string camera;
    double iou = 0.0, acc = 0.0;
};

struct CaseReport {
    std::string name;
    std::vector<ViewScore> views;
    double meanIou = 0.0, meanAcc = 0.0;
    std::size_t selected = 0, cut = 0, dropped = 0;
    bool usedSgc = false;
    double runtimeMs = 0.0;
};

struct BenchmarkReport {
    std::vector<CaseReport> cases;
    double meanIou = 0.0, meanAcc = 0.0;
    double runtimeMs = 0.0;

    /// Runtimes are omitted when `withTiming` is false so reports compare
    /// byte for byte.
    nlohmann::json toJson(bool withTiming = true) const;
    std::string toCsv() const;
};

struct BenchmarkOptions {
    /// Overrides every case's use_sgc flag.
    std::optional<bool> forceSgc;
    RenderOptions render;
};

BenchmarkReport runBenchmark(const std::filesystem::path &manifest,
                             const BenchmarkOptions &options = {});

} // namespace segwild
