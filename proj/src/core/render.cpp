// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/render.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace segwild {

namespace {

// Screen-space splat in the layout the inner compositing loop reads.
struct Splat {
    double u, v;
    double ca, cb, cc; // conic (inverse covariance) entries
    double opacity;
    std::uint32_t index;
};

struct Prepared {
    std::vector<Splat> splats; // sorted by (depth, index)
    int tilesX = 0, tilesY = 0;
    std::vector<std::vector<std::uint32_t>> tiles; // positions into `splats`
};

inline double
evalAlpha(const Splat &s, double px, double py) {
    const double dx    = px - s.u;
    const double dy    = py - s.v;
    const double power = s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
    if (power > render::kSupportMahalanobisSq) {
        return 0.0;
    }
    return s.opacity * std::exp(-0.5 * power);
}

Prepared
prepare(const GaussianScene &scene, const Camera &cam) {
    std::vector<ProjectedGaussian> projected;
    projected.reserve(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (auto pg = projectGaussian(scene[i], cam, i)) {
            projected.push_back(*pg);
        }
    }
    std::sort(projected.begin(), projected.end(),
              [](const ProjectedGaussian &a, const ProjectedGaussian &b) {
                  return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
              });

    Prepared P;
    P.tilesX = (cam.width + render::kTileSize - 1) / render::kTileSize;
    P.tilesY = (cam.height + render::kTileSize - 1) / render::kTileSize;
    P.tiles.resize(static_cast<std::size_t>(P.tilesX) * P.tilesY);
    P.splats.reserve(projected.size());

    for (const ProjectedGaussian &pg : projected) {
        const int x0 = std::max(0, static_cast<int>(std::ceil(pg.uv.x() - pg.halfExtent.x())));
        const int x1 = std::min(cam.width - 1,
                                static_cast<int>(std::floor(pg.uv.x() + pg.halfExtent.x())));
        const int y0 = std::max(0, static_cast<int>(std::ceil(pg.uv.y() - pg.halfExtent.y())));
        const int y1 = std::min(cam.height - 1,
                                static_cast<int>(std::floor(pg.uv.y() + pg.halfExtent.y())));
        if (x0 > x1 || y0 > y1) {
            continue;
        }
        const auto slot = static_cast<std::uint32_t>(P.splats.size());
        P.splats.push_back({pg.uv.x(), pg.uv.y(), pg.conic(0, 0), pg.conic(0, 1), pg.conic(1, 1),
                            pg.opacity, static_cast<std::uint32_t>(pg.index)});
        for (int ty = y0 / render::kTileSize; ty <= y1 / render::kTileSize; ++ty) {
            for (int tx = x0 / render::kTileSize; tx <= x1 / render::kTileSize; ++tx) {
                P.tiles[static_cast<std::size_t>(ty) * P.tilesX + tx].push_back(slot);
            }
        }
    }
    return P;
}

unsigned
resolveThreads(unsigned requested, std::size_t work) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

template <class Fn>
void
forEachTile(std::size_t tileCount, unsigned threads, Fn &&fn) {
    threads = resolveThreads(threads, tileCount);
    if (threads <= 1) {
        for (std::size_t t = 0; t < tileCount; ++t) {
            fn(t);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < tileCount; t = next++) {
                fn(t);
            }
        });
    }
}

// Composites one pixel; `contribute(slot, weight)` sees every non-zero
// footprint in depth order. Returns the accumulated opacity.
template <class Contribute>
inline double
compositePixel(const Prepared &P, const std::vector<std::uint32_t> &list, double px, double py,
               Contribute &&contribute) {
    double T = 1.0;
    for (std::uint32_t slot : list) {
        const double alpha = evalAlpha(P.splats[slot], px, py);
        if (alpha <= 0.0) {
            continue;
        }
        contribute(slot, alpha * T);
        T *= 1.0 - alpha;
        if (T < render::kTransmittanceCutoff) {
            break;
        }
    }
    return 1.0 - T;
}

struct TileBounds {
    int x0, x1, y0, y1; // half-open
};

TileBounds
tileBounds(const Prepared &P, const Camera &cam, std::size_t tile) {
    const int tx = static_cast<int>(tile % P.tilesX);
    const int ty = static_cast<int>(tile / P.tilesX);
    return {tx * render::kTileSize, std::min(cam.width, (tx + 1) * render::kTileSize),
            ty * render::kTileSize, std::min(cam.height, (ty + 1) * render::kTileSize)};
}

} // namespace

Eigen::Matrix<double, 2, 3>
perspectiveJacobian(const Camera &cam, const Vec3 &pc) {
    const double invZ  = 1.0 / pc.z();
    const double invZ2 = invZ * invZ;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * invZ, 0.0, -cam.fx * pc.x() * invZ2, //
        0.0, cam.fy * invZ, -cam.fy * pc.y() * invZ2;
    return J;
}

Mat2
screenCovariance(const Gaussian &g, const Camera &cam) {
    const Vec3 pc    = cam.toCamera(g.position.cast<double>());
    const Mat3 sigma = covarianceFromRotationScale(g.rotation.cast<double>().normalized(),
                                                   g.scale.cast<double>());
    const Eigen::Matrix<double, 2, 3> JW = perspectiveJacobian(cam, pc) * cam.R;
    return JW * sigma * JW.transpose();
}

std::optional<ProjectedGaussian>
projectGaussian(const Gaussian &g, const Camera &cam, std::size_t index) {
    const Vec3 pc = cam.toCamera(g.position.cast<double>());
    if (!(pc.z() > render::kNearPlane)) {
        return std::nullopt;
    }
    ProjectedGaussian pg;
    pg.index   = index;
    pg.uv      = cam.projectCamera(pc);
    pg.depth   = pc.z();
    pg.opacity = g.opacity;
    pg.cov2d   = screenCovariance(g, cam) + render::kCovarianceBlur * Mat2::Identity();

    // Slightly inflated so boundary pixels of the ellipse never fall outside.
    const double inflate = 3.0 * (1.0 + 1e-9);
    pg.halfExtent = Vec2(inflate * std::sqrt(pg.cov2d(0, 0)), inflate * std::sqrt(pg.cov2d(1, 1)));

    const double marginX = 0.5 * (render::kGuardBand - 1.0) * cam.width;
    const double marginY = 0.5 * (render::kGuardBand - 1.0) * cam.height;
    const double loX = -0.5 - marginX, hiX = cam.width - 0.5 + marginX;
    const double loY = -0.5 - marginY, hiY = cam.height - 0.5 + marginY;
    if (pg.uv.x() + pg.halfExtent.x() < loX || pg.uv.x() - pg.halfExtent.x() > hiX ||
        pg.uv.y() + pg.halfExtent.y() < loY || pg.uv.y() - pg.halfExtent.y() > hiY ||
        !pg.uv.allFinite()) {
        return std::nullopt;
    }
    pg.conic = pg.cov2d.inverse();
    return pg;
}

double
footprintAlpha(const ProjectedGaussian &pg, double u, double v) {
    const Splat s{pg.uv.x(), pg.uv.y(), pg.conic(0, 0), pg.conic(0, 1), pg.conic(1, 1), pg.opacity,
                  0};
    return evalAlpha(s, u, v);
}

PayloadSelector
PayloadSelector::selection(std::vector<std::uint8_t> indicator) {
    PayloadSelector s(Kind::Selection);
    s.mIndicator = std::move(indicator);
    return s;
}

PayloadSelector
PayloadSelector::constant(float value) {
    PayloadSelector s(Kind::Constant);
    s.mConstant = value;
    return s;
}

int
PayloadSelector::channels(const GaussianScene &scene) const {
    switch (mKind) {
    case Kind::Color: return 3;
    case Kind::Affinity: return static_cast<int>(scene.featureDim());
    case Kind::Selection:
    case Kind::Constant: return 1;
    }
    return 1;
}

void
PayloadSelector::write(const GaussianScene &scene, std::size_t index, float *out) const {
    const Gaussian &g = scene[index];
    switch (mKind) {
    case Kind::Color:
        out[0] = g.baseColor[0];
        out[1] = g.baseColor[1];
        out[2] = g.baseColor[2];
        break;
    case Kind::Affinity: std::copy(g.affinity.begin(), g.affinity.end(), out); break;
    case Kind::Selection:
        out[0] = index < mIndicator.size() && mIndicator[index] ? 1.f : 0.f;
        break;
    case Kind::Constant: out[0] = mConstant; break;
    }
}

RenderOutput
renderPayload(const GaussianScene &scene, const Camera &cam, const PayloadSelector &selector,
              const RenderOptions &options) {
    cam.validate();
    const int C = selector.channels(scene);
    const Prepared P = prepare(scene, cam);

    std::vector<float> payload(P.splats.size() * C);
    for (std::size_t k = 0; k < P.splats.size(); ++k) {
        selector.write(scene, P.splats[k].index, payload.data() + k * C);
    }

    RenderOutput out{FeatureMap(cam.height, cam.width, C), FeatureMap(cam.height, cam.width, 1)};
    forEachTile(P.tiles.size(), options.threads, [&](std::size_t tile) {
        const TileBounds b = tileBounds(P, cam, tile);
        const auto &list   = P.tiles[tile];
        std::vector<double> acc(C);
        for (int y = b.y0; y < b.y1; ++y) {
            for (int x = b.x0; x < b.x1; ++x) {
                std::fill(acc.begin(), acc.end(), 0.0);
                const double alpha = compositePixel(P, list, x, y, [&](std::uint32_t slot, double w) {
                    const float *src = payload.data() + std::size_t(slot) * C;
                    for (int c = 0; c < C; ++c) {
                        acc[c] += w * src[c];
                    }
                });
                float *dst = &out.payload.at(y, x);
                for (int c = 0; c < C; ++c) {
                    dst[c] = static_cast<float>(acc[c]);
                }
                out.alpha.at(y, x) = static_cast<float>(alpha);
            }
        }
    });
    return out;
}

RenderOutput
bruteForceRender(const GaussianScene &scene, const Camera &cam, const PayloadSelector &selector) {
    check(scene.size() <= render::kBruteForceMaxGaussians, ErrorCode::InvalidArgument,
          "scene too large for the brute-force renderer");
    cam.validate();
    const int C = selector.channels(scene);

    struct Entry {
        double depth;
        std::size_t index;
        Vec2 uv;
        Mat2 conic;
        double opacity;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Gaussian &g = scene[i];
        const Vec3 pc     = cam.R * g.position.cast<double>() + cam.t;
        if (pc.z() <= render::kNearPlane) {
            continue;
        }
        const Mat3 rot = quaternionToMatrix(g.rotation.cast<double>());
        const Mat3 S   = g.scale.cast<double>().asDiagonal();
        const Mat3 sigmaWorld = rot * S * S.transpose() * rot.transpose();
        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx / pc.z(), 0.0, -cam.fx * pc.x() / (pc.z() * pc.z()), //
            0.0, cam.fy / pc.z(), -cam.fy * pc.y() / (pc.z() * pc.z());
        const Mat2 cov = J * cam.R * sigmaWorld * cam.R.transpose() * J.transpose() +
                         render::kCovarianceBlur * Mat2::Identity();
        entries.push_back({pc.z(), i,
                           Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy),
                           cov.inverse(), double(g.opacity)});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });

    std::vector<float> payload(C);
    RenderOutput out{FeatureMap(cam.height, cam.width, C), FeatureMap(cam.height, cam.width, 1)};
    std::vector<double> acc(C);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            std::fill(acc.begin(), acc.end(), 0.0);
            double T = 1.0;
            for (const Entry &e : entries) {
                const Vec2 d       = Vec2(x, y) - e.uv;
                const double power = d.dot(e.conic * d);
                if (power > render::kSupportMahalanobisSq) {
                    continue;
                }
                const double alpha = e.opacity * std::exp(-0.5 * power);
                selector.write(scene, e.index, payload.data());
                for (int c = 0; c < C; ++c) {
                    acc[c] += payload[c] * alpha * T;
                }
                T *= 1.0 - alpha;
            }
            for (int c = 0; c < C; ++c) {
                out.payload.at(y, x, c) = static_cast<float>(acc[c]);
            }
            out.alpha.at(y, x) = static_cast<float>(1.0 - T);
        }
    }
    return out;
}

FeatureMap
centerDepthMap(const GaussianScene &scene, const Camera &cam) {
    cam.validate();
    constexpr float kUncovered = std::numeric_limits<float>::infinity();
    FeatureMap depth(cam.height, cam.width, 1, kUncovered);
    for (const Gaussian &g : scene.gaussians()) {
        const Vec3 pc = cam.toCamera(g.position.cast<double>());
        if (!(pc.z() > render::kNearPlane)) {
            continue;
        }
        const Vec2 uv = cam.projectCamera(pc);
        const Pixel p = nearestPixel(uv.x(), uv.y());
        if (p.x < 0 || p.y < 0 || p.x >= cam.width || p.y >= cam.height) {
            continue;
        }
        float &d = depth.at(p.y, p.x);
        d        = std::min(d, static_cast<float>(pc.z()));
    }

    float fill = 0.f;
    for (float d : depth.data()) {
        if (d != kUncovered) {
            fill = std::max(fill, d);
        }
    }
    for (float &d : depth.data()) {
        if (d == kUncovered) {
            d = fill;
        }
    }
    return depth;
}

PixelWeights
computePixelWeights(const GaussianScene &scene, const Camera &cam, const RenderOptions &options) {
    cam.validate();
    const Prepared P = prepare(scene, cam);

    struct Item {
        std::uint32_t pixel;
        std::uint32_t gaussian;
        double weight;
    };
    std::vector<std::vector<Item>> perTile(P.tiles.size());
    forEachTile(P.tiles.size(), options.threads, [&](std::size_t tile) {
        const TileBounds b = tileBounds(P, cam, tile);
        auto &items        = perTile[tile];
        for (int y = b.y0; y < b.y1; ++y) {
            for (int x = b.x0; x < b.x1; ++x) {
                const auto pixel = static_cast<std::uint32_t>(y * cam.width + x);
                compositePixel(P, P.tiles[tile], x, y, [&](std::uint32_t slot, double w) {
                    items.push_back({pixel, P.splats[slot].index, w});
                });
            }
        }
    });

    PixelWeights W;
    W.height = cam.height;
    W.width  = cam.width;
    const std::size_t pixels = static_cast<std::size_t>(cam.height) * cam.width;
    W.offsets.assign(pixels + 1, 0);
    for (const auto &items : perTile) {
        for (const Item &it : items) {
            ++W.offsets[it.pixel + 1];
        }
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        W.offsets[p + 1] += W.offsets[p];
    }
    W.gaussian.resize(W.offsets.back());
    W.weight.resize(W.offsets.back());
    std::vector<std::size_t> cursor(W.offsets.begin(), W.offsets.end() - 1);
    for (const auto &items : perTile) {
        for (const Item &it : items) {
            const std::size_t k = cursor[it.pixel]++;
            W.gaussian[k]       = it.gaussian;
            W.weight[k]         = it.weight;
        }
    }
    return W;
}

} // namespace segwild
