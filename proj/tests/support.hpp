// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Shared generators and oracles for the test suites and the acceptance run.
// Oracles here are written independently of the library code they check.
//
#pragma once

#include <segwild/scene.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace segwild::testing {

class Gen {
  public:
    explicit Gen(std::uint64_t seed) : mRng(seed) {}

    double
    uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(mRng);
    }
    int
    integer(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(mRng);
    }
    double
    normal(double sigma = 1.0) {
        return std::normal_distribution<double>(0.0, sigma)(mRng);
    }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

    Quat
    unitQuaternion() {
        Quat q(normal(), normal(), normal(), normal());
        return q / q.norm();
    }

    Vec3 scale(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }

    std::mt19937_64 &engine() { return mRng; }

  private:
    std::mt19937_64 mRng;
};

/// Identity-pose camera looking down +z with the principal point centered.
inline Camera
frontCamera(double focal, int width, int height) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx          = 0.5 * (width - 1);
    cam.cy          = 0.5 * (height - 1);
    cam.width       = width;
    cam.height      = height;
    return cam;
}

/// Camera at a random position on a sphere around the origin, looking at it.
inline Camera
orbitCamera(Gen &gen, double distance, double focal, int width, int height) {
    Vec3 dir(gen.normal(), gen.normal(), gen.normal());
    dir.normalize();
    if (std::abs(dir.y()) > 0.9) {
        dir = Vec3(dir.x(), 0.3, dir.z()).normalized();
    }
    return Camera::lookAt(distance * dir, Vec3::Zero(), Vec3::UnitY(), focal, width, height);
}

inline Gaussian
randomGaussian(Gen &gen, std::size_t featureDim, double spread, double scaleLo, double scaleHi) {
    Gaussian g;
    g.position  = Vec3(gen.uniform(-spread, spread), gen.uniform(-spread, spread),
                       gen.uniform(-spread, spread))
                     .cast<float>();
    g.rotation  = gen.unitQuaternion().cast<float>();
    g.scale     = gen.scale(scaleLo, scaleHi).cast<float>();
    g.opacity   = float(gen.uniform(0.05, 0.99));
    g.baseColor = Vec3(gen.uniform(0, 1), gen.uniform(0, 1), gen.uniform(0, 1)).cast<float>();
    g.affinity.resize(featureDim);
    for (float &a : g.affinity) {
        a = float(gen.normal());
    }
    return g;
}

/// Scene of n Gaussians around the origin.
inline GaussianScene
randomScene(Gen &gen, int n, std::size_t featureDim = 4, double spread = 0.6,
            double scaleLo = 0.05, double scaleHi = 0.35) {
    GaussianScene scene(featureDim);
    for (int i = 0; i < n; ++i) {
        scene.add(randomGaussian(gen, featureDim, spread, scaleLo, scaleHi));
    }
    return scene;
}

inline Bitmap
randomBitmap(Gen &gen, int height, int width, double p = 0.5) {
    Bitmap b(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            b.set(y, x, gen.coin(p));
        }
    }
    return b;
}

/// Rotation matrix of a unit quaternion via Rodrigues' formula on its
/// axis-angle form.
inline Mat3
rodriguesRotation(const Quat &q) {
    const double w     = std::clamp(q[0], -1.0, 1.0);
    const Vec3 v(q[1], q[2], q[3]);
    const double s     = v.norm();
    if (s < 1e-15) {
        return Mat3::Identity();
    }
    const double theta = 2.0 * std::atan2(s, w);
    const Vec3 k       = v / s;
    Mat3 K;
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    return Mat3::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        mPath = std::filesystem::temp_directory_path() /
                ("segwild_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir &)            = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return mPath; }
    std::filesystem::path operator/(const std::string &name) const { return mPath / name; }

  private:
    std::filesystem::path mPath;
};

} // namespace segwild::testing
