// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Scale-adaptive prompt planning. Each image gets a SegS x SegS grid whose
// cells receive NPP x NPP prompt points, NPP growing with the cell's mean
// (normalized, sky-filtered) depth so distant content is sampled densely.
//
#pragma once

#include <segwild/scene.hpp>

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segwild {

namespace sasm {
inline constexpr int kScaleAtNear = 8; // SegS at norm(d) = 0
inline constexpr int kScaleAtFar  = 4; // SegS at norm(d) = 1
inline constexpr int kDegenerateScale = 6;
inline constexpr int kDefaultMaxPoints = 20;
} // namespace sasm

/// Mean projection of the Gaussian centers onto the optical axis, measured
/// from the camera center.
double meanAxisDistance(const GaussianScene &scene, const Camera &cam);

/// Requires dMin <= d <= dMax; dMin == dMax yields the midpoint scale.
int segmentationScale(double d, double dMin, double dMax);

/// DM' = (1 - SM) DM + SM min(DM).
FeatureMap skyFilter(const FeatureMap &depth, const Bitmap &sky);

/// Maps [lo, hi] linearly onto [0, maxValue], clamping outside values.
/// A degenerate range maps everything to 0.
FeatureMap normalizeDepth(const FeatureMap &depth, double lo, double hi, double maxValue);

struct CellRect {
    int x0, y0, width, height;
};

/// Cell (row, col) of a SegS x SegS grid; the last row and column absorb
/// the remainder pixels.
CellRect gridCell(int imageWidth, int imageHeight, int segScale, int row, int col);

/// Row-major SegS x SegS cell means.
std::vector<double> gridMeanDepth(const FeatureMap &depth, int segScale);

/// min(maxPoints, max(1, floor(d))).
int promptCount(double cellDepth, int maxPoints = sasm::kDefaultMaxPoints);

struct PromptPointMap {
    std::string imageId;
    int segScale = 0;
    std::vector<Vec2> points;
    /// Row-major SegS x SegS NPP values.
    std::vector<int> perCellCounts;

    nlohmann::json toJson() const;
};

/// Centers of an npp x npp sub-grid of the cell, row by row.
std::vector<Vec2> cellPromptPoints(const CellRect &cell, int npp);

/// Full pipeline for one image with a given grid scale.
PromptPointMap generatePromptPoints(const GaussianScene &scene, const Camera &cam,
                                    const Bitmap *sky, int segScale,
                                    int maxPoints = sasm::kDefaultMaxPoints,
                                    std::string imageId = {});

struct PlanView {
    std::string imageId;
    Camera camera;
    std::optional<Bitmap> sky;
};

/// Plans every view; d_min and d_max are taken over the whole collection.
std::vector<PromptPointMap> planPrompts(const GaussianScene &scene, std::span<const PlanView> views,
                                        int maxPoints = sasm::kDefaultMaxPoints);

} // namespace segwild
