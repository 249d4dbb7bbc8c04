// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/sasm.hpp>

#include <segwild/render.hpp>

#include <algorithm>
#include <cmath>

namespace segwild {

double
meanAxisDistance(const GaussianScene &scene, const Camera &cam) {
    check(!scene.empty(), ErrorCode::InvalidArgument, "mean axis distance of an empty scene");
    const Vec3 cc   = cam.center();
    const Vec3 axis = cam.opticalAxis();
    double sum      = 0.0;
    for (const Gaussian &g : scene.gaussians()) {
        sum += (g.position.cast<double>() - cc).dot(axis);
    }
    return sum / double(scene.size());
}

int
segmentationScale(double d, double dMin, double dMax) {
    check(dMin <= dMax, ErrorCode::InvalidArgument, "d_min must not exceed d_max");
    if (dMax == dMin) {
        check(d == dMin, ErrorCode::InvalidArgument, "distance outside [d_min, d_max]");
        return sasm::kDegenerateScale;
    }
    check(d >= dMin && d <= dMax, ErrorCode::InvalidArgument, "distance outside [d_min, d_max]");
    const double norm = (d - dMin) / (dMax - dMin);
    const double raw  = sasm::kScaleAtNear + norm * (sasm::kScaleAtFar - sasm::kScaleAtNear);
    return std::clamp(static_cast<int>(std::floor(raw + 0.5)), sasm::kScaleAtFar,
                      sasm::kScaleAtNear);
}

FeatureMap
skyFilter(const FeatureMap &depth, const Bitmap &sky) {
    check(depth.channels() == 1, ErrorCode::DimensionMismatch, "depth map must have one channel");
    check(sky.height() == depth.height() && sky.width() == depth.width(),
          ErrorCode::DimensionMismatch, "sky mask size differs from the depth map");
    FeatureMap out = depth;
    if (depth.data().empty()) {
        return out;
    }
    const float lo = *std::min_element(depth.data().begin(), depth.data().end());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (sky.get(y, x)) {
                out.at(y, x) = lo;
            }
        }
    }
    return out;
}

FeatureMap
normalizeDepth(const FeatureMap &depth, double lo, double hi, double maxValue) {
    FeatureMap out(depth.height(), depth.width(), depth.channels());
    const double span = hi - lo;
    for (std::size_t k = 0; k < depth.data().size(); ++k) {
        const double v = span > 0.0 ? (depth.data()[k] - lo) / span * maxValue : 0.0;
        out.data()[k]  = static_cast<float>(std::clamp(v, 0.0, maxValue));
    }
    return out;
}

CellRect
gridCell(int imageWidth, int imageHeight, int segScale, int row, int col) {
    check(segScale >= 1 && imageWidth >= segScale && imageHeight >= segScale,
          ErrorCode::InvalidArgument, "image smaller than the segmentation grid");
    check(row >= 0 && row < segScale && col >= 0 && col < segScale, ErrorCode::InvalidArgument,
          "grid cell out of range");
    const int cw = imageWidth / segScale;
    const int ch = imageHeight / segScale;
    CellRect r{col * cw, row * ch, cw, ch};
    if (col == segScale - 1) {
        r.width = imageWidth - r.x0;
    }
    if (row == segScale - 1) {
        r.height = imageHeight - r.y0;
    }
    return r;
}

std::vector<double>
gridMeanDepth(const FeatureMap &depth, int segScale) {
    check(depth.channels() == 1, ErrorCode::DimensionMismatch, "depth map must have one channel");
    std::vector<double> means(std::size_t(segScale) * segScale, 0.0);
    for (int i = 0; i < segScale; ++i) {
        for (int j = 0; j < segScale; ++j) {
            const CellRect r = gridCell(depth.width(), depth.height(), segScale, i, j);
            double sum       = 0.0;
            for (int y = r.y0; y < r.y0 + r.height; ++y) {
                for (int x = r.x0; x < r.x0 + r.width; ++x) {
                    sum += depth.at(y, x);
                }
            }
            means[std::size_t(i) * segScale + j] = sum / (double(r.width) * r.height);
        }
    }
    return means;
}

int
promptCount(double cellDepth, int maxPoints) {
    check(cellDepth >= 0.0, ErrorCode::InvalidArgument, "cell depth must be non-negative");
    const double f = std::floor(cellDepth);
    return static_cast<int>(std::min<double>(maxPoints, std::max(1.0, f)));
}

std::vector<Vec2>
cellPromptPoints(const CellRect &cell, int npp) {
    check(npp >= 1, ErrorCode::InvalidArgument, "NPP must be >= 1");
    std::vector<Vec2> pts;
    pts.reserve(std::size_t(npp) * npp);
    for (int n = 0; n < npp; ++n) {
        for (int m = 0; m < npp; ++m) {
            pts.emplace_back(cell.x0 + (2.0 * m + 1.0) / (2.0 * npp) * cell.width,
                             cell.y0 + (2.0 * n + 1.0) / (2.0 * npp) * cell.height);
        }
    }
    return pts;
}

nlohmann::json
PromptPointMap::toJson() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const Vec2 &p : points) {
        pts.push_back({p.x(), p.y()});
    }
    return {{"image_id", imageId},
            {"seg_scale", segScale},
            {"points", pts},
            {"per_cell_counts", perCellCounts}};
}

PromptPointMap
generatePromptPoints(const GaussianScene &scene, const Camera &cam, const Bitmap *sky,
                     int segScale, int maxPoints, std::string imageId) {
    check(maxPoints >= 1, ErrorCode::InvalidArgument, "npp_max must be >= 1");
    FeatureMap depth = centerDepthMap(scene, cam);
    if (sky) {
        depth = skyFilter(depth, *sky);
    }
    const auto [lo, hi] = std::minmax_element(depth.data().begin(), depth.data().end());
    depth               = normalizeDepth(depth, *lo, *hi, maxPoints);

    PromptPointMap ppm;
    ppm.imageId  = std::move(imageId);
    ppm.segScale = segScale;
    const auto means = gridMeanDepth(depth, segScale);
    for (int i = 0; i < segScale; ++i) {
        for (int j = 0; j < segScale; ++j) {
            const int npp = promptCount(means[std::size_t(i) * segScale + j], maxPoints);
            ppm.perCellCounts.push_back(npp);
            const auto pts = cellPromptPoints(gridCell(cam.width, cam.height, segScale, i, j), npp);
            ppm.points.insert(ppm.points.end(), pts.begin(), pts.end());
        }
    }
    return ppm;
}

std::vector<PromptPointMap>
planPrompts(const GaussianScene &scene, std::span<const PlanView> views, int maxPoints) {
    std::vector<double> d;
    d.reserve(views.size());
    for (const PlanView &v : views) {
        d.push_back(meanAxisDistance(scene, v.camera));
    }
    std::vector<PromptPointMap> out;
    if (views.empty()) {
        return out;
    }
    const auto [dMin, dMax] = std::minmax_element(d.begin(), d.end());
    for (std::size_t k = 0; k < views.size(); ++k) {
        const int s = segmentationScale(d[k], *dMin, *dMax);
        out.push_back(generatePromptPoints(scene, views[k].camera,
                                           views[k].sky ? &*views[k].sky : nullptr, s, maxPoints,
                                           views[k].imageId));
    }
    return out;
}

} // namespace segwild
