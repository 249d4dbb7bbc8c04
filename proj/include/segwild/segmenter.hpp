// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Click-driven selection: each prompt's rendered feature is compared with
// every Gaussian's affinity feature, the per-prompt cosines are fused with
// a softmax over prompts, and the fused score is thresholded and gated by
// an optional 2D mask.
//
#pragma once

#include <segwild/render.hpp>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segwild {

inline constexpr double kDefaultTau = 0.5;

struct PromptSet {
    std::string id;
    Camera view;
    std::vector<Vec2> points;
    std::optional<Bitmap> mask;
    /// Where the mask came from ("bitmap", "mask_bank", "polygon", "none").
    std::string maskSource = "none";

    void validate() const;
};

/// Rows are the distinct prompt pixels in click order, columns Gaussians.
Eigen::MatrixXd promptSimilarity(const GaussianScene &scene, const PromptSet &prompts,
                                 const RenderOptions &options = {});

/// Per Gaussian: sum_i softmax_i(s[., g]) s[i, g].
std::vector<double> fuseSimilarity(const Eigen::MatrixXd &s);

struct SegmentationResult {
    std::vector<std::size_t> selected;
    std::vector<double> fused;
    double tau = kDefaultTau;
    std::string promptId;
    std::string maskSource = "none";
    std::size_t promptCount = 0;

    nlohmann::json toJson() const;
};

SegmentationResult selectGaussians(const GaussianScene &scene, const PromptSet &prompts,
                                   std::span<const double> fused, double tau = kDefaultTau);

/// promptSimilarity, fuseSimilarity and selectGaussians in sequence.
SegmentationResult segment(const GaussianScene &scene, const PromptSet &prompts,
                           double tau = kDefaultTau, const RenderOptions &options = {});

/// The bank mask containing the most prompts (ties: smaller area, then
/// lower index). Empty bitmap when no mask contains any prompt.
Bitmap maskFromBank(const MaskBank &bank, std::span<const Vec2> points);

/// Even-odd fill of a polygon in pixel coordinates, tested at pixel centers.
Bitmap rasterizePolygon(int height, int width, std::span<const Vec2> vertices);

} // namespace segwild
