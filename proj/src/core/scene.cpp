// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/scene.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <numeric>

namespace segwild {

GaussianScene::GaussianScene(std::size_t featureDim) : mFeatureDim(featureDim) {
    check(featureDim >= 1, ErrorCode::InvalidArgument, "feature dimension must be positive");
}

void
GaussianScene::add(Gaussian g) {
    if (g.affinity.empty()) {
        g.affinity.assign(mFeatureDim, 0.f);
    }
    check(g.affinity.size() == mFeatureDim, ErrorCode::DimensionMismatch,
          "affinity feature length differs from the scene feature dimension");
    mGaussians.push_back(std::move(g));
}

GaussianScene
GaussianScene::subset(std::span<const std::size_t> indices) const {
    GaussianScene out(mFeatureDim);
    out.metadata = metadata;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        check(i < mGaussians.size(), ErrorCode::InvalidArgument, "subset index out of range");
        out.mGaussians.push_back(mGaussians[i]);
    }
    return out;
}

void
GaussianScene::validate() const {
    for (const Gaussian &g : mGaussians) {
        check(g.position.allFinite() && g.rotation.allFinite() && g.scale.allFinite() &&
                  std::isfinite(g.opacity) && g.baseColor.allFinite(),
              ErrorCode::Validation, "non-finite Gaussian attribute");
        check(std::abs(g.rotation.cast<double>().norm() - 1.0) <= kQuaternionTolerance,
              ErrorCode::Validation, "rotation quaternion is not unit length");
        check((g.scale.array() > 0.f).all(), ErrorCode::Validation, "scale must be positive");
        check(g.opacity >= 0.f && g.opacity <= 1.f, ErrorCode::Validation,
              "opacity outside [0, 1]");
        check(g.affinity.size() == mFeatureDim, ErrorCode::DimensionMismatch,
              "affinity feature length differs from the scene feature dimension");
        check(std::all_of(g.affinity.begin(), g.affinity.end(),
                          [](float v) { return std::isfinite(v); }),
              ErrorCode::Validation, "non-finite affinity feature");
    }
}

Vec3
Camera::backProject(const Vec2 &uv, double depth) const {
    const Vec3 pc((uv.x() - cx) / fx * depth, (uv.y() - cy) / fy * depth, depth);
    return R.transpose() * (pc - t);
}

void
Camera::validate() const {
    check(width >= 1 && height >= 1, ErrorCode::Validation, "camera image size must be >= 1");
    check(fx > 0.0 && fy > 0.0, ErrorCode::Validation, "focal lengths must be positive");
    check(std::isfinite(cx) && std::isfinite(cy) && R.allFinite() && t.allFinite(),
          ErrorCode::Validation, "non-finite camera parameter");
    const double err = (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    check(err <= 1e-5, ErrorCode::Validation, "camera rotation is not orthonormal");
    check(R.determinant() > 0.0, ErrorCode::Validation, "camera rotation is a reflection");
}

Camera
Camera::lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
               int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right         = forward.cross(up);
    check(right.norm() > 1e-9, ErrorCode::InvalidArgument, "up vector parallel to view direction");
    right.normalize();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.fx = cam.fy = focal;
    cam.width       = width;
    cam.height      = height;
    cam.cx          = 0.5 * (width - 1);
    cam.cy          = 0.5 * (height - 1);
    cam.R.row(0)    = right.transpose();
    cam.R.row(1)    = down.transpose();
    cam.R.row(2)    = forward.transpose();
    cam.t           = -cam.R * eye;
    return cam;
}

std::size_t
Bitmap::count() const noexcept {
    return static_cast<std::size_t>(std::count(mBits.begin(), mBits.end(), std::uint8_t{1}));
}

void
MaskBank::assignPixels() {
    areas.resize(masks.size());
    for (std::size_t m = 0; m < masks.size(); ++m) {
        check(masks[m].height() == height && masks[m].width() == width,
              ErrorCode::DimensionMismatch, "mask bitmaps have inconsistent sizes");
        areas[m] = masks[m].count();
    }
    if (confidence.size() != masks.size()) {
        confidence.resize(masks.size(), 1.f);
    }

    // Preference order: smaller area, higher confidence, lower index.
    std::vector<int> order(masks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (areas[a] != areas[b]) {
            return areas[a] < areas[b];
        }
        return confidence[a] > confidence[b];
    });

    assignment.assign(static_cast<std::size_t>(height) * width, kNone);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int m : order) {
                if (masks[m].get(y, x)) {
                    assignment[static_cast<std::size_t>(y) * width + x] = m;
                    break;
                }
            }
        }
    }
}

MaskBank
makeMaskBank(std::string imageId, std::vector<Bitmap> masks, std::vector<float> confidence) {
    MaskBank bank;
    bank.imageId = std::move(imageId);
    if (!masks.empty()) {
        bank.height = masks.front().height();
        bank.width  = masks.front().width();
    }
    bank.masks      = std::move(masks);
    bank.confidence = std::move(confidence);
    check(bank.confidence.empty() || bank.confidence.size() == bank.masks.size(),
          ErrorCode::DimensionMismatch, "one confidence value per mask expected");
    bank.assignPixels();
    return bank;
}

Mat3
quaternionToMatrix(const Quat &q) {
    const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    return quat.normalized().toRotationMatrix();
}

Mat3
covarianceFromRotationScale(const Quat &q, const Vec3 &scale) {
    check(std::abs(q.norm() - 1.0) <= kQuaternionTolerance, ErrorCode::Validation,
          "rotation quaternion is not unit length");
    check((scale.array() > 0.0).all(), ErrorCode::Validation, "scale must be positive");
    const Mat3 M = quaternionToMatrix(q) * scale.asDiagonal();
    return M * M.transpose();
}

} // namespace segwild
