// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include <segwild/sgc.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace segwild {
namespace {

using testing::Gen;

Bitmap
columnsUpTo(int h, int w, int lastColumn) {
    Bitmap b(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x <= std::min(lastColumn, w - 1); ++x) {
            b.set(y, x, true);
        }
    }
    return b;
}

Bitmap
full(int h, int w) {
    return columnsUpTo(h, w, w - 1);
}

/// Needle along the camera x axis, centered on the optical axis at depth 4.
Gaussian
needle(float length = 0.6f) {
    Gaussian g;
    g.position = Eigen::Vector3f(0, 0, 4);
    g.scale    = Eigen::Vector3f(length, 0.03f, 0.03f);
    g.opacity  = 0.9f;
    g.affinity.assign(2, 1.f);
    return g;
}

TEST(PrincipalAxis, DiagonalExample) {
    Mat2 cov;
    cov << 4, 0, 0, 1;
    const AxisSegment a = principalAxis(cov, Vec2(10, 10));
    EXPECT_DOUBLE_EQ(a.lambdaMax, 4.0);
    EXPECT_NEAR((a.uv1 - Vec2(7, 10)).norm(), 0.0, 1e-12);
    EXPECT_NEAR((a.uv2 - Vec2(13, 10)).norm(), 0.0, 1e-12);
}

TEST(PrincipalAxis, IsotropicTieUsesXAxis) {
    const AxisSegment a = principalAxis(Mat2::Identity() * 2.0, Vec2(0, 0));
    EXPECT_EQ(a.direction, Vec2(1, 0));
    EXPECT_DOUBLE_EQ(a.lambdaMax, 2.0);
}

TEST(PrincipalAxis, MatchesQuadraticFormula) {
    Gen gen(81);
    for (int trial = 0; trial < 500; ++trial) {
        const double a = gen.uniform(0.1, 10), c = gen.uniform(0.1, 10);
        const double b = gen.uniform(-0.99, 0.99) * std::sqrt(a * c);
        Mat2 cov;
        cov << a, b, b, c;
        const double tr = a + c, det = a * c - b * b;
        const double lambda = 0.5 * (tr + std::sqrt(tr * tr - 4 * det));
        // (b, lambda - a) solves (cov - lambda I) v = 0 unless b = 0.
        Vec2 v = std::abs(b) > 1e-9 ? Vec2(b, lambda - a) : (a >= c ? Vec2(1, 0) : Vec2(0, 1));
        v.normalize();
        const AxisSegment axis = principalAxis(cov, Vec2(3, -2));
        EXPECT_NEAR(axis.lambdaMax, lambda, 1e-9 * lambda);
        EXPECT_NEAR(std::abs(axis.direction.dot(v)), 1.0, 1e-9);
        EXPECT_NEAR(axis.direction.norm(), 1.0, 1e-12);
        EXPECT_NEAR((axis.uv2 - axis.uv1).norm(), 3.0 * std::sqrt(lambda), 1e-9);
    }
}

TEST(PrincipalAxis, RejectsIndefinite) {
    Mat2 bad;
    bad << 1, 2, 2, 1;
    EXPECT_THROW(principalAxis(bad, Vec2::Zero()), Error);
}

TEST(Coverage, Examples) {
    Mat2 cov;
    cov << 4, 0, 0, 1;
    const AxisSegment a = principalAxis(cov, Vec2(10, 10));
    // Samples at x = 7, 9, 11, 13; the mask holds columns up to 10.
    EXPECT_DOUBLE_EQ(coverageRatio(a, columnsUpTo(20, 20, 10), 4), 0.5);
    EXPECT_DOUBLE_EQ(coverageRatio(a, full(20, 20), 64), 1.0);
    const AxisSegment off = principalAxis(cov, Vec2(100, 100));
    EXPECT_DOUBLE_EQ(coverageRatio(off, full(20, 20), 64), 0.0);
    EXPECT_THROW(coverageRatio(a, full(20, 20), 1), Error);
}

TEST(Orient, PointsAtTheCoveredHalf) {
    Mat2 cov;
    cov << 4, 0, 0, 1;
    const AxisSegment a = principalAxis(cov, Vec2(10, 10));
    const AxisSegment left = orientTowardMask(a, columnsUpTo(20, 20, 9), 16);
    EXPECT_LT(left.direction.x(), 0.0);
    EXPECT_EQ(left.uv2, a.uv1);
    Bitmap right(20, 20);
    for (int y = 0; y < 20; ++y) {
        for (int x = 11; x < 20; ++x) {
            right.set(y, x, true);
        }
    }
    EXPECT_GT(orientTowardMask(a, right, 16).direction.x(), 0.0);
}

TEST(Cut, RatioOneIsIdentity) {
    const Camera cam = testing::frontCamera(40, 40, 40);
    const Gaussian g = needle();
    const auto pg    = projectGaussian(g, cam, 0);
    ASSERT_TRUE(pg);
    const CutRecord rec = cutGaussian(g, 0, principalAxis(pg->cov2d, pg->uv), 1.0, cam);
    EXPECT_EQ(rec.newCenter, g.position.cast<double>());
    EXPECT_EQ(rec.newScale, g.scale.cast<double>());
}

TEST(Cut, ShiftAndScaleFollowTheRatio) {
    Gen gen(82);
    const Camera cam = testing::frontCamera(40, 40, 40);
    for (int trial = 0; trial < 50; ++trial) {
        Gaussian g          = needle();
        g.position          = Eigen::Vector3f(float(gen.uniform(-0.5, 0.5)), float(gen.uniform(-0.5, 0.5)),
                                              float(gen.uniform(3, 6)));
        g.rotation          = gen.unitQuaternion().cast<float>();
        const auto pg       = projectGaussian(g, cam, 0);
        ASSERT_TRUE(pg);
        const AxisSegment a = principalAxis(pg->cov2d, pg->uv);
        const double r      = gen.uniform(0.0, 1.0);
        const CutRecord rec = cutGaussian(g, 3, a, r, cam);
        EXPECT_EQ(rec.index, 3u);
        EXPECT_NEAR((rec.newScale - r * g.scale.cast<double>()).norm(), 0.0, 1e-6);

        // The new center keeps its camera depth and lands on the shifted
        // image point.
        const Vec3 pc = cam.toCamera(rec.newCenter);
        EXPECT_NEAR(pc.z(), cam.toCamera(g.position.cast<double>()).z(), 1e-6);
        const Vec2 expected = pg->uv + (1 - r) * std::sqrt(a.lambdaMax) * a.direction;
        EXPECT_NEAR((cam.projectCamera(pc) - expected).norm(), 0.0, 1e-6);
    }
}

TEST(Cut, RatioZeroShrinksToAPoint) {
    const Camera cam    = testing::frontCamera(40, 40, 40);
    const Gaussian g    = needle();
    const auto pg       = projectGaussian(g, cam, 0);
    const AxisSegment a = principalAxis(pg->cov2d, pg->uv);
    const CutRecord rec = cutGaussian(g, 0, a, 0.0, cam);
    EXPECT_EQ(rec.newScale, Vec3::Zero());
    EXPECT_NEAR((cam.projectCamera(cam.toCamera(rec.newCenter)) - pg->uv).norm(),
                std::sqrt(a.lambdaMax), 1e-6);
    EXPECT_THROW(cutGaussian(g, 0, a, 1.5, cam), Error);
}

PromptSet
maskedPrompt(const Camera &cam, Bitmap mask) {
    PromptSet ps;
    ps.id         = "v";
    ps.view       = cam;
    ps.points     = {Vec2(cam.cx, cam.cy)};
    ps.mask       = std::move(mask);
    ps.maskSource = "bitmap";
    return ps;
}

SegmentationResult
selectAll(const GaussianScene &scene) {
    SegmentationResult r;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        r.selected.push_back(i);
    }
    return r;
}

TEST(ApplySgc, FullCoverageChangesNothing) {
    Gen gen(83);
    const Camera cam = Camera::lookAt(Vec3(0, 0, -4), Vec3::Zero(), Vec3::UnitY(), 40, 48, 48);
    const GaussianScene scene = testing::randomScene(gen, 30, 2, 0.3, 0.02, 0.08);
    const SgcResult out       = applySgc(scene, selectAll(scene), maskedPrompt(cam, full(48, 48)));
    EXPECT_TRUE(out.cuts.empty());
    ASSERT_EQ(out.scene.size(), scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_EQ(out.scene[i].position, scene[i].position);
        EXPECT_EQ(out.scene[i].scale, scene[i].scale);
    }
}

TEST(ApplySgc, StraddlingNeedleIsCutTowardTheMask) {
    const Camera cam = testing::frontCamera(40, 41, 41);
    GaussianScene scene(2);
    scene.add(needle());
    const Bitmap mask    = columnsUpTo(41, 41, 20);
    const SgcResult out  = applySgc(scene, selectAll(scene), maskedPrompt(cam, mask));
    ASSERT_EQ(out.cuts.size(), 1u);
    const CutRecord &cut = out.cuts[0];
    EXPECT_GT(cut.r, 0.3);
    EXPECT_LT(cut.r, 0.7);
    EXPECT_FALSE(cut.dropped);
    // Shifted toward the covered (left) side.
    EXPECT_LT(cut.newCenter.x(), 0.0);

    // Accumulated opacity outside the mask strictly drops.
    auto outside = [&](const GaussianScene &s) {
        const RenderOutput ro = renderPayload(s, cam, PayloadSelector::constant());
        double sum            = 0.0;
        for (int y = 0; y < 41; ++y) {
            for (int x = 0; x < 41; ++x) {
                sum += mask.get(y, x) ? 0.0 : ro.alpha.at(y, x);
            }
        }
        return sum;
    };
    EXPECT_LT(outside(out.scene), outside(scene));
}

TEST(ApplySgc, BarelyCoveredGaussiansAreDropped) {
    const Camera cam = testing::frontCamera(40, 41, 41);
    GaussianScene scene(2);
    scene.add(needle());
    // Only the last column on the far right is covered.
    Bitmap mask(41, 41);
    for (int y = 0; y < 41; ++y) {
        mask.set(y, 40, true);
    }
    const SgcResult out = applySgc(scene, selectAll(scene), maskedPrompt(cam, mask), SgcConfig{64, 0.1});
    ASSERT_EQ(out.cuts.size(), 1u);
    EXPECT_TRUE(out.cuts[0].dropped);
    EXPECT_EQ(out.scene.size(), 0u);
    EXPECT_TRUE(out.cutsJson()[0].at("dropped").get<bool>());
}

TEST(ApplySgc, SecondPassLeavesCoveredResultAlone) {
    const Camera cam = testing::frontCamera(40, 41, 41);
    GaussianScene scene(2);
    scene.add(needle());
    const PromptSet ps  = maskedPrompt(cam, columnsUpTo(41, 41, 20));
    const SgcResult one = applySgc(scene, selectAll(scene), ps);
    ASSERT_EQ(one.scene.size(), 1u);
    const SgcResult two = applySgc(one.scene, selectAll(one.scene), ps);
    // The shortened needle is (nearly) inside the mask, so it shrinks far
    // less the second time.
    const double r2 = two.cuts.empty() ? 1.0 : two.cuts[0].r;
    EXPECT_GT(r2, one.cuts[0].r);
}

TEST(ApplySgc, RequiresMask) {
    GaussianScene scene(2);
    scene.add(needle());
    PromptSet ps = maskedPrompt(testing::frontCamera(40, 41, 41), full(41, 41));
    ps.mask.reset();
    EXPECT_THROW(applySgc(scene, selectAll(scene), ps), Error);
}

} // namespace
} // namespace segwild
