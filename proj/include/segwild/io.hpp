// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// File formats:
//   splat PLY   binary little-endian; x y z f_dc_0..2 opacity(logit)
//               scale_0..2(log) rot_0..3(w x y z); extra properties ignored
//   .affn       "AFFN" u32 N u32 C, float32[N*C]
//   .fmap       "FMAP" u32 H u32 W u32 C, float32[H*W*C]
//   camera      JSON {fx, fy, cx, cy, width, height, R[9] row-major, t[3]}
//   mask bank   JSON manifest {image_id, masks:[{file, confidence}]} next to
//               8-bit PNG masks (0/255)
//
#pragma once

#include <segwild/scene.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>

namespace segwild {

namespace fs = std::filesystem;

inline constexpr float kOpacityLogitClamp = 15.f;

/// Path of the affinity sidecar belonging to a PLY path (extension ".affn").
fs::path affinitySidecarPath(const fs::path &plyPath);

GaussianScene loadScene(const fs::path &path);
void saveScene(const GaussianScene &scene, const fs::path &path);

FeatureMap loadFeatureMap(const fs::path &path);
void saveFeatureMap(const FeatureMap &map, const fs::path &path);

Camera cameraFromJson(const nlohmann::json &j);
nlohmann::json cameraToJson(const Camera &cam);
Camera loadCamera(const fs::path &path);
void saveCamera(const Camera &cam, const fs::path &path);

/// `path` is the manifest JSON or a directory holding manifest.json.
MaskBank loadMaskBank(const fs::path &path);
/// Writes manifest.json plus one PNG per mask into `dir`.
void saveMaskBank(const MaskBank &bank, const fs::path &dir);

nlohmann::json readJsonFile(const fs::path &path);
void writeJsonFile(const nlohmann::json &j, const fs::path &path);

} // namespace segwild
