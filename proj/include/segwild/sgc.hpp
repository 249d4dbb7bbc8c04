// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Cutter for spiky Gaussians: a selected Gaussian whose projected long axis
// leaves the 2D mask is shrunk by the axis coverage ratio r and recentered
// toward the covered side by (1 - r) sqrt(lambda_max).
//
#pragma once

#include <segwild/segmenter.hpp>

#include <nlohmann/json.hpp>

#include <vector>

namespace segwild {

struct AxisSegment {
    Vec2 center    = Vec2::Zero();
    Vec2 uv1       = Vec2::Zero();
    Vec2 uv2       = Vec2::Zero();
    double lambdaMax = 0.0;
    /// Unit eigenvector of lambdaMax; uv2 = center + 1.5 sqrt(lambdaMax) v.
    Vec2 direction = Vec2::UnitX();
};

/// Isotropic covariances resolve to direction (1, 0). Throws Validation for
/// a non-SPD matrix.
AxisSegment principalAxis(const Mat2 &cov, const Vec2 &center);

/// Fraction of n evenly spaced samples on [uv1, uv2] (endpoints included)
/// whose nearest pixel is set in the mask; off-image samples count 0.
double coverageRatio(const AxisSegment &axis, const Bitmap &mask, int nSamples);

/// Flips the axis so `direction` points at the better-covered half.
AxisSegment orientTowardMask(const AxisSegment &axis, const Bitmap &mask, int nSamples);

struct CutRecord {
    std::size_t index = 0;
    double r          = 1.0;
    Vec3 newCenter    = Vec3::Zero();
    Vec3 newScale     = Vec3::Zero();
    bool dropped      = false;

    nlohmann::json toJson() const;
};

/// center' = back-projection of uv + (1 - r) sqrt(lambdaMax) v at the
/// original camera depth; scale' = r scale.
CutRecord cutGaussian(const Gaussian &g, std::size_t index, const AxisSegment &axis, double r,
                      const Camera &cam);

struct SgcConfig {
    int samples      = 64;
    double dropRatio = 0.05;
};

struct SgcResult {
    /// Selected Gaussians only, cut in place, dropped ones removed.
    GaussianScene scene;
    std::vector<std::size_t> sourceIndices;
    std::vector<CutRecord> cuts;

    nlohmann::json cutsJson() const;
};

/// Requires prompts.mask.
SgcResult applySgc(const GaussianScene &scene, const SegmentationResult &result,
                   const PromptSet &prompts, const SgcConfig &cfg = {});

} // namespace segwild
