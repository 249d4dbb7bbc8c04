// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// CPU splatting: EWA projection of 3D Gaussians and front-to-back alpha
// compositing of arbitrary per-Gaussian payloads.
//
// Compositing contract (both backends):
//   alpha_i(p) = opacity_i * exp(-0.5 d^T S_i^-1 d)  if d^T S_i^-1 d <= 9, else 0
//   out(p)     = sum_i payload_i alpha_i(p) prod_{j<i} (1 - alpha_j(p))
// with S_i = J W Sigma_i W^T J^T + 0.3 I, Gaussians ordered by camera depth
// (ties by scene index).
//
#pragma once

#include <segwild/scene.hpp>

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace segwild {

namespace render {
inline constexpr double kNearPlane            = 0.01;
inline constexpr double kGuardBand            = 1.3;
inline constexpr double kCovarianceBlur       = 0.3;
inline constexpr int kTileSize                = 16;
inline constexpr double kTransmittanceCutoff  = 1e-4;
inline constexpr double kSupportMahalanobisSq = 9.0;
inline constexpr std::size_t kBruteForceMaxGaussians = 4096;
} // namespace render

struct ProjectedGaussian {
    std::size_t index = 0;
    Vec2 uv           = Vec2::Zero();
    double depth      = 0.0;
    /// Regularized screen-space covariance (pixel^2).
    Mat2 cov2d = Mat2::Identity();
    Mat2 conic = Mat2::Identity();
    double opacity = 0.0;
    /// Half extents of the 3-sigma ellipse's axis-aligned bounding box.
    Vec2 halfExtent = Vec2::Zero();
};

/// 2x3 Jacobian of the pinhole projection at camera-space point pc.
Eigen::Matrix<double, 2, 3> perspectiveJacobian(const Camera &cam, const Vec3 &pc);

/// J W Sigma W^T J^T without regularization.
Mat2 screenCovariance(const Gaussian &g, const Camera &cam);

/// nullopt when the Gaussian is behind the near plane or its footprint
/// misses the guard band around the image.
std::optional<ProjectedGaussian> projectGaussian(const Gaussian &g, const Camera &cam,
                                                 std::size_t index = 0);

/// Footprint opacity at continuous pixel coordinate (u, v).
double footprintAlpha(const ProjectedGaussian &pg, double u, double v);

/// What each Gaussian contributes to the composited image.
class PayloadSelector {
  public:
    enum class Kind { Color, Affinity, Selection, Constant };

    static PayloadSelector color() { return PayloadSelector(Kind::Color); }
    static PayloadSelector affinity() { return PayloadSelector(Kind::Affinity); }
    /// 1 for Gaussians flagged in `indicator`, 0 otherwise.
    static PayloadSelector selection(std::vector<std::uint8_t> indicator);
    static PayloadSelector constant(float value = 1.f);

    Kind kind() const noexcept { return mKind; }
    int channels(const GaussianScene &scene) const;
    void write(const GaussianScene &scene, std::size_t index, float *out) const;

  private:
    explicit PayloadSelector(Kind k) : mKind(k) {}
    Kind mKind;
    std::vector<std::uint8_t> mIndicator;
    float mConstant = 1.f;
};

struct RenderOutput {
    FeatureMap payload;
    /// Accumulated opacity 1 - prod(1 - alpha), C = 1.
    FeatureMap alpha;
};

struct RenderOptions {
    /// 0 selects std::thread::hardware_concurrency().
    unsigned threads = 0;
};

/// Tile-based renderer (16x16 tiles, early termination).
RenderOutput renderPayload(const GaussianScene &scene, const Camera &cam,
                           const PayloadSelector &selector, const RenderOptions &options = {});

/// Per-pixel loop over every Gaussian, no tiling and no early termination.
/// Throws InvalidArgument above kBruteForceMaxGaussians.
RenderOutput bruteForceRender(const GaussianScene &scene, const Camera &cam,
                              const PayloadSelector &selector);

/// Minimum camera depth of the Gaussian centers landing on each pixel.
/// Uncovered pixels hold the largest covered depth (0 if none is covered).
FeatureMap centerDepthMap(const GaussianScene &scene, const Camera &cam);

/// Compositing weights w_i(p) = alpha_i(p) prod_{j<i}(1 - alpha_j(p)) in
/// CSR layout over pixels (row-major), produced by the tile renderer.
struct PixelWeights {
    int height = 0, width = 0;
    std::vector<std::size_t> offsets; // pixelCount + 1
    std::vector<std::uint32_t> gaussian;
    std::vector<double> weight;

    std::size_t pixelIndex(Pixel p) const { return static_cast<std::size_t>(p.y) * width + p.x; }
};

PixelWeights computePixelWeights(const GaussianScene &scene, const Camera &cam,
                                 const RenderOptions &options = {});

} // namespace segwild
