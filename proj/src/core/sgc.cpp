// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/sgc.hpp>

#include <cmath>

namespace segwild {

namespace {

constexpr double kHalfLengthSigmas = 1.5;

Vec2
axisSample(const AxisSegment &axis, int j, int n) {
    const double t = double(j) / double(n - 1);
    return axis.uv1 + t * (axis.uv2 - axis.uv1);
}

} // namespace

AxisSegment
principalAxis(const Mat2 &cov, const Vec2 &center) {
    const double a = cov(0, 0), b = 0.5 * (cov(0, 1) + cov(1, 0)), c = cov(1, 1);
    check(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && a > 0.0 &&
              a * c - b * b > 0.0,
          ErrorCode::Validation, "axis covariance is not positive definite");

    // Rotation angle of the major axis; atan2(0, 0) = 0 gives the (1, 0) tie.
    const double theta = 0.5 * std::atan2(2.0 * b, a - c);
    const double mean  = 0.5 * (a + c);
    const double rad   = std::sqrt(0.25 * (a - c) * (a - c) + b * b);

    AxisSegment axis;
    axis.center    = center;
    axis.lambdaMax = mean + rad;
    axis.direction = Vec2(std::cos(theta), std::sin(theta));
    const Vec2 half = kHalfLengthSigmas * std::sqrt(axis.lambdaMax) * axis.direction;
    axis.uv1        = center - half;
    axis.uv2        = center + half;
    return axis;
}

double
coverageRatio(const AxisSegment &axis, const Bitmap &mask, int nSamples) {
    check(nSamples >= 2, ErrorCode::InvalidArgument, "coverage needs at least two samples");
    int hits = 0;
    for (int j = 0; j < nSamples; ++j) {
        const Vec2 s = axisSample(axis, j, nSamples);
        hits += mask.contains(nearestPixel(s.x(), s.y())) ? 1 : 0;
    }
    return double(hits) / double(nSamples);
}

AxisSegment
orientTowardMask(const AxisSegment &axis, const Bitmap &mask, int nSamples) {
    check(nSamples >= 2, ErrorCode::InvalidArgument, "coverage needs at least two samples");
    int first = 0, second = 0;
    for (int j = 0; j < nSamples; ++j) {
        const Vec2 s  = axisSample(axis, j, nSamples);
        const int hit = mask.contains(nearestPixel(s.x(), s.y())) ? 1 : 0;
        // The midpoint sample (odd n) belongs to neither half.
        if (2 * j < nSamples - 1) {
            first += hit;
        } else if (2 * j > nSamples - 1) {
            second += hit;
        }
    }
    if (first <= second) {
        return axis;
    }
    AxisSegment flipped = axis;
    flipped.direction   = -axis.direction;
    std::swap(flipped.uv1, flipped.uv2);
    return flipped;
}

nlohmann::json
CutRecord::toJson() const {
    return {{"index", index},
            {"r", r},
            {"new_center", {newCenter.x(), newCenter.y(), newCenter.z()}},
            {"new_scale", {newScale.x(), newScale.y(), newScale.z()}},
            {"dropped", dropped}};
}

CutRecord
cutGaussian(const Gaussian &g, std::size_t index, const AxisSegment &axis, double r,
            const Camera &cam) {
    check(r >= 0.0 && r <= 1.0, ErrorCode::InvalidArgument, "coverage ratio outside [0, 1]");
    const Vec3 p  = g.position.cast<double>();
    const Vec3 pc = cam.toCamera(p);
    check(pc.z() > render::kNearPlane, ErrorCode::InvalidArgument,
          "cannot cut a Gaussian behind the camera");

    CutRecord rec;
    rec.index = index;
    rec.r     = r;
    if (r == 1.0) {
        rec.newCenter = p;
        rec.newScale  = g.scale.cast<double>();
        return rec;
    }
    const Vec2 uvNew = axis.center + (1.0 - r) * std::sqrt(axis.lambdaMax) * axis.direction;
    rec.newCenter    = cam.backProject(uvNew, pc.z());
    rec.newScale     = r * g.scale.cast<double>();
    return rec;
}

nlohmann::json
SgcResult::cutsJson() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const CutRecord &c : cuts) {
        arr.push_back(c.toJson());
    }
    return arr;
}

SgcResult
applySgc(const GaussianScene &scene, const SegmentationResult &result, const PromptSet &prompts,
         const SgcConfig &cfg) {
    check(prompts.mask.has_value(), ErrorCode::InvalidArgument, "SGC requires a 2D mask");
    check(cfg.samples >= 2, ErrorCode::InvalidArgument, "SGC needs at least two samples");
    const Bitmap &mask = *prompts.mask;
    const Camera &cam  = prompts.view;
    const double cutBelow = 1.0 - 1.0 / double(cfg.samples);

    SgcResult out{GaussianScene(scene.featureDim()), {}, {}};
    out.scene.metadata = scene.metadata;
    out.scene.reserve(result.selected.size());
    for (std::size_t idx : result.selected) {
        check(idx < scene.size(), ErrorCode::InvalidArgument, "selected index out of range");
        Gaussian g   = scene[idx];
        const auto pg = projectGaussian(g, cam, idx);
        if (pg) {
            const AxisSegment axis = orientTowardMask(principalAxis(pg->cov2d, pg->uv), mask,
                                                      cfg.samples);
            const double r = coverageRatio(axis, mask, cfg.samples);
            if (r < cutBelow) {
                CutRecord rec = cutGaussian(g, idx, axis, r, cam);
                rec.dropped   = r < cfg.dropRatio;
                out.cuts.push_back(rec);
                if (rec.dropped) {
                    continue;
                }
                g.position = rec.newCenter.cast<float>();
                g.scale    = rec.newScale.cast<float>();
            }
        }
        out.scene.add(std::move(g));
        out.sourceIndices.push_back(idx);
    }
    return out;
}

} // namespace segwild
