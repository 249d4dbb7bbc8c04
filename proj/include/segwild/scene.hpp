// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Core domain types: splat scenes, pinhole cameras, dense feature grids,
// binary bitmaps and per-image mask banks.
//
#pragma once

#include <segwild/error.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace segwild {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
/// Quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;

inline constexpr std::size_t kDefaultFeatureDim = 64;

/// Integer pixel address; x is the column (u), y the row (v).
struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel &, const Pixel &) = default;
};

/// Nearest pixel to a continuous image coordinate. Pixel (x, y) has its
/// center at the continuous coordinate (x, y).
inline Pixel
nearestPixel(double u, double v) {
    return {static_cast<int>(std::floor(u + 0.5)), static_cast<int>(std::floor(v + 0.5))};
}

/// Image-plane prompts live in [-0.5, W] x [-0.5, H]: pixel footprints plus
/// the far edges, where grid-cell sub-points can land.
inline bool
promptInImage(double u, double v, int width, int height) {
    return u >= -0.5 && v >= -0.5 && u <= width && v <= height;
}

/// Nearest pixel clamped to the image.
inline Pixel
promptPixel(double u, double v, int width, int height) {
    const Pixel p = nearestPixel(u, v);
    return {std::clamp(p.x, 0, width - 1), std::clamp(p.y, 0, height - 1)};
}

struct Gaussian {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    Eigen::Vector4f rotation{1.f, 0.f, 0.f, 0.f}; // w, x, y, z
    Eigen::Vector3f scale    = Eigen::Vector3f::Ones();
    float opacity            = 1.f;
    Eigen::Vector3f baseColor = Eigen::Vector3f::Constant(0.5f);
    std::vector<float> affinity;
};

class GaussianScene {
  public:
    explicit GaussianScene(std::size_t featureDim = kDefaultFeatureDim);

    std::size_t
    featureDim() const noexcept {
        return mFeatureDim;
    }
    std::size_t
    size() const noexcept {
        return mGaussians.size();
    }
    bool
    empty() const noexcept {
        return mGaussians.empty();
    }

    const Gaussian &
    operator[](std::size_t i) const {
        return mGaussians[i];
    }
    Gaussian &
    operator[](std::size_t i) {
        return mGaussians[i];
    }

    const std::vector<Gaussian> &
    gaussians() const noexcept {
        return mGaussians;
    }

    /// Appends g; an empty affinity vector is zero-filled to featureDim.
    void add(Gaussian g);
    void reserve(std::size_t n) { mGaussians.reserve(n); }

    /// Copy holding only the listed indices, in the given order.
    GaussianScene subset(std::span<const std::size_t> indices) const;

    /// Throws Validation if any Gaussian breaks the type invariants.
    void validate() const;

    std::map<std::string, std::string> metadata;

  private:
    std::size_t mFeatureDim;
    std::vector<Gaussian> mGaussians;
};

/// Pinhole camera with a world-to-camera pose (x_cam = R * x_world + t).
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3
    toCamera(const Vec3 &world) const {
        return R * world + t;
    }
    /// Camera center in world coordinates.
    Vec3
    center() const {
        return -R.transpose() * t;
    }
    /// Unit optical axis (+z of the camera) in world coordinates.
    Vec3
    opticalAxis() const {
        return R.row(2).transpose();
    }
    Vec2
    projectCamera(const Vec3 &pc) const {
        return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
    }
    /// World point on the ray through (u, v) at camera-space depth z.
    Vec3 backProject(const Vec2 &uv, double depth) const;

    void validate() const;

    /// Camera at `eye` looking at `target`, image y axis pointing along -up.
    static Camera lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal,
                         int width, int height);
};

/// H x W x C grid stored row-major as (h, w, c).
template <class T> class BasicFeatureMap {
  public:
    BasicFeatureMap() = default;
    BasicFeatureMap(int height, int width, int channels, T fill = T(0))
        : mHeight(height), mWidth(width), mChannels(channels),
          mData(static_cast<std::size_t>(height) * width * channels, fill) {
        check(height >= 0 && width >= 0 && channels >= 1, ErrorCode::InvalidArgument,
              "feature map dimensions must be non-negative with at least one channel");
    }

    int height() const noexcept { return mHeight; }
    int width() const noexcept { return mWidth; }
    int channels() const noexcept { return mChannels; }
    std::size_t pixelCount() const noexcept { return static_cast<std::size_t>(mHeight) * mWidth; }

    std::size_t
    offset(int y, int x, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * mWidth + x) * mChannels + c;
    }
    T &at(int y, int x, int c = 0) { return mData[offset(y, x, c)]; }
    const T &at(int y, int x, int c = 0) const { return mData[offset(y, x, c)]; }

    std::span<T> pixel(int y, int x) { return {mData.data() + offset(y, x), std::size_t(mChannels)}; }
    std::span<const T>
    pixel(int y, int x) const {
        return {mData.data() + offset(y, x), std::size_t(mChannels)};
    }

    std::vector<T> &data() noexcept { return mData; }
    const std::vector<T> &data() const noexcept { return mData; }

    bool
    sameShape(const auto &other) const noexcept {
        return mHeight == other.height() && mWidth == other.width() &&
               mChannels == other.channels();
    }

    template <class U>
    BasicFeatureMap<U>
    cast() const {
        BasicFeatureMap<U> out(mHeight, mWidth, mChannels);
        for (std::size_t i = 0; i < mData.size(); ++i) {
            out.data()[i] = static_cast<U>(mData[i]);
        }
        return out;
    }

  private:
    int mHeight = 0, mWidth = 0, mChannels = 1;
    std::vector<T> mData;
};

using FeatureMap  = BasicFeatureMap<float>;
using FeatureMapD = BasicFeatureMap<double>;

/// Binary H x W bitmap.
class Bitmap {
  public:
    Bitmap() = default;
    Bitmap(int height, int width, bool fill = false)
        : mHeight(height), mWidth(width),
          mBits(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

    int height() const noexcept { return mHeight; }
    int width() const noexcept { return mWidth; }

    bool
    inBounds(Pixel p) const noexcept {
        return p.x >= 0 && p.y >= 0 && p.x < mWidth && p.y < mHeight;
    }
    bool get(int y, int x) const { return mBits[static_cast<std::size_t>(y) * mWidth + x] != 0; }
    void set(int y, int x, bool v) { mBits[static_cast<std::size_t>(y) * mWidth + x] = v ? 1 : 0; }
    /// Out-of-bounds pixels read as 0.
    bool
    contains(Pixel p) const noexcept {
        return inBounds(p) && get(p.y, p.x);
    }
    std::size_t count() const noexcept;

    const std::vector<std::uint8_t> &bits() const noexcept { return mBits; }

    friend bool operator==(const Bitmap &, const Bitmap &) = default;

  private:
    int mHeight = 0, mWidth = 0;
    std::vector<std::uint8_t> mBits;
};

/// Masks of one image plus the finest-mask assignment of every pixel.
struct MaskBank {
    static constexpr int kNone = -1;

    std::string imageId;
    std::vector<Bitmap> masks;
    std::vector<float> confidence;
    std::vector<std::size_t> areas;
    /// Row-major H x W; mask index or kNone.
    std::vector<int> assignment;
    int height = 0, width = 0;

    /// Recomputes areas and the assignment: smallest containing mask, ties
    /// by higher confidence, then by lower index.
    void assignPixels();

    int
    maskAt(Pixel p) const {
        return assignment[static_cast<std::size_t>(p.y) * width + p.x];
    }
};

/// Builds a bank from masks of equal size (confidence defaults to 1).
MaskBank makeMaskBank(std::string imageId, std::vector<Bitmap> masks,
                      std::vector<float> confidence = {});

/// Sigma = R S S^T R^T. Throws Validation for a non-unit quaternion.
Mat3 covarianceFromRotationScale(const Quat &q, const Vec3 &scale);

/// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 quaternionToMatrix(const Quat &q);

inline constexpr double kQuaternionTolerance = 1e-5;

} // namespace segwild
