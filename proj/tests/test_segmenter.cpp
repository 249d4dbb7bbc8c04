// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include <segwild/segmenter.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace segwild {
namespace {

using testing::Gen;

Camera
viewCamera(int size = 24) {
    return Camera::lookAt(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), size * 1.5, size, size);
}

PromptSet
randomPrompts(Gen &gen, const Camera &cam, int n) {
    PromptSet ps;
    ps.id   = "view";
    ps.view = cam;
    for (int i = 0; i < n; ++i) {
        ps.points.emplace_back(gen.integer(0, cam.width - 1), gen.integer(0, cam.height - 1));
    }
    return ps;
}

double
cosine(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
    const double n = a.norm() * b.norm();
    return n == 0.0 ? 0.0 : a.dot(b) / n;
}

TEST(Fusion, SoftmaxExample) {
    Eigen::MatrixXd s(2, 1);
    s << 1.0, 0.0;
    EXPECT_NEAR(fuseSimilarity(s)[0], 0.7311, 5e-5);
    const double e = std::exp(1.0);
    EXPECT_NEAR(fuseSimilarity(s)[0], e / (e + 1.0), 1e-12);
}

TEST(Fusion, SinglePromptIsIdentity) {
    Eigen::MatrixXd s(1, 3);
    s << 0.2, -0.4, 0.9;
    const auto f = fuseSimilarity(s);
    for (int g = 0; g < 3; ++g) {
        EXPECT_NEAR(f[g], s(0, g), 1e-15);
    }
}

TEST(Fusion, BoundedByPromptRangeAndOrderFree) {
    Gen gen(71);
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = gen.integer(1, 6), cols = gen.integer(1, 10);
        Eigen::MatrixXd s(rows, cols);
        for (int i = 0; i < rows; ++i) {
            for (int g = 0; g < cols; ++g) {
                s(i, g) = gen.uniform(-1, 1);
            }
        }
        const auto f = fuseSimilarity(s);
        Eigen::MatrixXd flipped = s.colwise().reverse();
        const auto f2           = fuseSimilarity(flipped);
        for (int g = 0; g < cols; ++g) {
            EXPECT_GE(f[g], s.col(g).minCoeff() - 1e-12);
            EXPECT_LE(f[g], s.col(g).maxCoeff() + 1e-12);
            EXPECT_NEAR(f[g], f2[g], 1e-12);
        }
    }
    EXPECT_THROW(fuseSimilarity(Eigen::MatrixXd(0, 3)), Error);
}

TEST(PromptSimilarity, MatchesBruteForceCosines) {
    Gen gen(72);
    for (int trial = 0; trial < 10; ++trial) {
        const GaussianScene scene = testing::randomScene(gen, 5, 6, 0.4);
        const Camera cam          = viewCamera(16);
        const PromptSet ps        = randomPrompts(gen, cam, 3);
        const Eigen::MatrixXd s   = promptSimilarity(scene, ps);
        const RenderOutput ref    = bruteForceRender(scene, cam, PayloadSelector::affinity());

        std::vector<Pixel> seen;
        for (const Vec2 &p : ps.points) {
            const Pixel px = nearestPixel(p.x(), p.y());
            if (std::find(seen.begin(), seen.end(), px) != seen.end()) {
                continue;
            }
            seen.push_back(px);
            Eigen::VectorXd f(6);
            for (int c = 0; c < 6; ++c) {
                f[c] = ref.payload.at(px.y, px.x, c);
            }
            for (std::size_t g = 0; g < scene.size(); ++g) {
                Eigen::VectorXd a(6);
                for (int c = 0; c < 6; ++c) {
                    a[c] = scene[g].affinity[c];
                }
                EXPECT_NEAR(s(Eigen::Index(seen.size() - 1), Eigen::Index(g)), cosine(f, a), 1e-5);
            }
        }
        EXPECT_EQ(s.rows(), Eigen::Index(seen.size()));
    }
}

TEST(Segment, DuplicatePromptChangesNothing) {
    Gen gen(73);
    for (int trial = 0; trial < 10; ++trial) {
        const GaussianScene scene = testing::randomScene(gen, 20, 4, 0.5);
        const PromptSet ps        = randomPrompts(gen, viewCamera(), 3);
        PromptSet dup             = ps;
        dup.points.push_back(ps.points[gen.integer(0, 2)]);
        const auto a = segment(scene, ps, 0.3);
        const auto b = segment(scene, dup, 0.3);
        EXPECT_EQ(a.selected, b.selected);
        EXPECT_EQ(a.fused, b.fused);
    }
}

TEST(Segment, HigherTauSelectsSubset) {
    Gen gen(74);
    for (int trial = 0; trial < 10; ++trial) {
        const GaussianScene scene = testing::randomScene(gen, 40, 4, 0.5);
        const PromptSet ps        = randomPrompts(gen, viewCamera(), 2);
        const auto fused          = fuseSimilarity(promptSimilarity(scene, ps));
        std::vector<std::size_t> previous;
        for (int k = 9; k >= 1; --k) {
            const auto r = selectGaussians(scene, ps, fused, 0.1 * k);
            EXPECT_TRUE(std::includes(r.selected.begin(), r.selected.end(), previous.begin(),
                                      previous.end()));
            previous = r.selected;
        }
    }
}

TEST(Select, ThresholdIsStrict) {
    GaussianScene scene(2);
    for (int i = 0; i < 4; ++i) {
        Gaussian g;
        g.affinity = {1.f, 0.f};
        scene.add(g);
    }
    PromptSet ps;
    ps.view            = viewCamera();
    ps.id              = "v";
    ps.points          = {Vec2(1, 1)};
    const double f[]   = {0.4, 0.5, 0.6, 0.9};
    const auto r       = selectGaussians(scene, ps, f, 0.5);
    EXPECT_EQ(r.selected, (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(r.maskSource, "none");
    EXPECT_EQ(r.toJson().at("indices"), nlohmann::json({2, 3}));
    EXPECT_THROW(selectGaussians(scene, ps, f, 0.0), Error);
    EXPECT_THROW(selectGaussians(scene, ps, f, 1.0), Error);
    EXPECT_THROW(selectGaussians(scene, ps, std::span(f, 3), 0.5), Error);
}

TEST(Select, MaskGateKeepsOnlyCentersInsideTheMask) {
    Gen gen(75);
    for (int trial = 0; trial < 10; ++trial) {
        const GaussianScene scene = testing::randomScene(gen, 60, 4, 0.8);
        PromptSet ps              = randomPrompts(gen, viewCamera(), 2);
        const std::vector<double> fused(scene.size(), 0.9);

        ps.mask       = testing::randomBitmap(gen, 24, 24, 0.5);
        ps.maskSource = "bitmap";
        const auto r  = selectGaussians(scene, ps, fused, 0.5);
        EXPECT_EQ(r.maskSource, "bitmap");
        for (std::size_t g = 0; g < scene.size(); ++g) {
            const Vec3 pc    = ps.view.toCamera(scene[g].position.cast<double>());
            const Vec2 uv    = ps.view.projectCamera(pc);
            const Pixel px   = nearestPixel(uv.x(), uv.y());
            const bool in    = px.x >= 0 && px.y >= 0 && px.x < 24 && px.y < 24 && ps.mask->get(px.y, px.x);
            const bool taken = std::binary_search(r.selected.begin(), r.selected.end(), g);
            EXPECT_EQ(taken, in) << "gaussian " << g;
        }

        ps.mask = Bitmap(24, 24);
        EXPECT_TRUE(selectGaussians(scene, ps, fused, 0.5).selected.empty());
    }
}

TEST(Prompts, PointsOutsideTheImageAreRejected) {
    PromptSet ps;
    ps.view   = viewCamera(8);
    ps.points = {Vec2(8.0, 3.0)};
    EXPECT_NO_THROW(ps.validate());
    ps.points = {Vec2(8.2, 3.0)};
    EXPECT_THROW(ps.validate(), Error);
    ps.points = {Vec2(-0.6, 3.0)};
    EXPECT_THROW(ps.validate(), Error);
    ps.points.clear();
    EXPECT_THROW(ps.validate(), Error);
    ps.points = {Vec2(1, 1)};
    ps.mask   = Bitmap(4, 8);
    EXPECT_THROW(ps.validate(), Error);
    EXPECT_EQ(promptPixel(8.0, -0.5, 8, 8), (Pixel{7, 0}));
}

Bitmap
rect(int h, int w, int x0, int y0, int x1, int y1) {
    Bitmap b(h, w);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            b.set(y, x, true);
        }
    }
    return b;
}

TEST(MaskFromBank, MostHitsThenSmallerArea) {
    const MaskBank bank = makeMaskBank(
        "b", {rect(10, 10, 0, 0, 10, 10), rect(10, 10, 0, 0, 4, 4), rect(10, 10, 0, 0, 5, 5)});
    const Vec2 inner[] = {Vec2(1, 1), Vec2(2, 2)};
    EXPECT_EQ(maskFromBank(bank, inner).bits(), bank.masks[1].bits());
    const Vec2 spread[] = {Vec2(1, 1), Vec2(8, 8)};
    EXPECT_EQ(maskFromBank(bank, spread).bits(), bank.masks[0].bits());
    const Vec2 edge[] = {Vec2(4, 4), Vec2(1, 1)};
    EXPECT_EQ(maskFromBank(bank, edge).bits(), bank.masks[2].bits());

    const MaskBank sparse = makeMaskBank("s", {rect(10, 10, 0, 0, 2, 2)});
    const Vec2 far[]      = {Vec2(9, 9)};
    EXPECT_EQ(maskFromBank(sparse, far).count(), 0u);
}

TEST(Polygon, AxisAlignedSquare) {
    const Vec2 square[] = {Vec2(0.5, 0.5), Vec2(3.5, 0.5), Vec2(3.5, 2.5), Vec2(0.5, 2.5)};
    const Bitmap m      = rasterizePolygon(5, 6, square);
    EXPECT_EQ(m.bits(), rect(5, 6, 1, 1, 4, 3).bits());
    const Vec2 line[] = {Vec2(0, 0), Vec2(1, 1)};
    EXPECT_THROW(rasterizePolygon(4, 4, line), Error);
}

// Point-in-triangle by the signs of edge cross products.
bool
insideTriangle(const Vec2 &p, const Vec2 &a, const Vec2 &b, const Vec2 &c) {
    auto cross = [](const Vec2 &o, const Vec2 &u, const Vec2 &v) {
        return (u.x() - o.x()) * (v.y() - o.y()) - (u.y() - o.y()) * (v.x() - o.x());
    };
    const double d1 = cross(a, b, p), d2 = cross(b, c, p), d3 = cross(c, a, p);
    return (d1 > 0 && d2 > 0 && d3 > 0) || (d1 < 0 && d2 < 0 && d3 < 0);
}

TEST(Polygon, TrianglesMatchEdgeSignOracle) {
    Gen gen(76);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec2 tri[] = {Vec2(gen.uniform(-2, 18), gen.uniform(-2, 14)),
                            Vec2(gen.uniform(-2, 18), gen.uniform(-2, 14)),
                            Vec2(gen.uniform(-2, 18), gen.uniform(-2, 14))};
        const Bitmap m   = rasterizePolygon(12, 16, tri);
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 16; ++x) {
                EXPECT_EQ(m.get(y, x), insideTriangle(Vec2(x, y), tri[0], tri[1], tri[2]));
            }
        }
    }
}

} // namespace
} // namespace segwild
