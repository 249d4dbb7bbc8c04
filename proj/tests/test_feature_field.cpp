// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include <segwild/feature_field.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace segwild {
namespace {

using testing::Gen;

Bitmap
rectMask(int h, int w, int x0, int y0, int x1, int y1) {
    Bitmap b(h, w);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            b.set(y, x, true);
        }
    }
    return b;
}

FeatureMap
mapFrom(int h, int w, int c, std::initializer_list<float> values) {
    FeatureMap fm(h, w, c);
    std::copy(values.begin(), values.end(), fm.data().begin());
    return fm;
}

/// Small scene in front of a camera at z = -3 with random teachers and masks.
struct Fixture {
    GaussianScene scene;
    std::vector<TrainingView> views;
};

Fixture
makeFixture(Gen &gen, int gaussians, int viewCount, int size = 12, std::size_t dim = 3) {
    Fixture f{testing::randomScene(gen, gaussians, dim, 0.4, 0.1, 0.3), {}};
    for (int v = 0; v < viewCount; ++v) {
        TrainingView tv;
        const double a = 0.3 * v;
        tv.camera      = Camera::lookAt(Vec3(3 * std::sin(a), 0.2, -3 * std::cos(a)), Vec3::Zero(),
                                        Vec3::UnitY(), size * 1.5, size, size);
        tv.teacher     = FeatureMap(size, size, int(dim));
        for (float &x : tv.teacher.data()) {
            x = float(gen.normal());
        }
        tv.masks = makeMaskBank("v" + std::to_string(v),
                                {rectMask(size, size, 0, 0, size / 2, size),
                                 rectMask(size, size, size / 3, size / 3, size, size),
                                 testing::randomBitmap(gen, size, size, 0.3)});
        f.views.push_back(std::move(tv));
    }
    return f;
}

TEST(MaskIou, WorkedExamples) {
    // Both pixels resolve to the same 2x2 mask.
    {
        const MaskBank bank = makeMaskBank("a", {rectMask(4, 4, 0, 0, 2, 2), rectMask(4, 4, 0, 0, 2, 2)});
        EXPECT_NEAR(maskIouSimilarity(bank, {0, 0}, {1, 1}), 4.0 / (4.0 + 1e-5), 1e-12);
    }
    {
        // Disjoint masks: intersection 0.
        const MaskBank bank = makeMaskBank("b", {rectMask(4, 4, 0, 0, 1, 1), rectMask(4, 4, 2, 2, 4, 4)});
        EXPECT_EQ(maskIouSimilarity(bank, {0, 0}, {3, 3}), 0.0);
    }
    {
        // One pixel inside a 7-pixel mask: IoU of {1 px} with {7 px} is 1/7.
        Bitmap big(4, 4);
        for (int x = 0; x < 4; ++x) {
            big.set(0, x, true);
        }
        for (int x = 0; x < 3; ++x) {
            big.set(1, x, true);
        }
        const MaskBank bank = makeMaskBank("c", {rectMask(4, 4, 0, 0, 1, 1), big});
        EXPECT_NEAR(maskIouSimilarity(bank, {0, 0}, {3, 0}), 1.0 / (7.0 + 1e-5), 1e-12);
    }
    {
        const MaskBank bank = makeMaskBank("d", {rectMask(4, 4, 0, 0, 2, 2)});
        EXPECT_EQ(maskIouSimilarity(bank, {0, 0}, {3, 3}), 0.0);
        EXPECT_EQ(maskIouSimilarity(bank, {3, 3}, {3, 2}), 0.0);
    }
}

TEST(MaskIou, SymmetricAndBounded) {
    Gen gen(51);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Bitmap> masks;
        for (int k = 0; k < 4; ++k) {
            masks.push_back(testing::randomBitmap(gen, 8, 8, 0.4));
        }
        const MaskBank bank = makeMaskBank("r", masks);
        const Pixel a{gen.integer(0, 7), gen.integer(0, 7)}, b{gen.integer(0, 7), gen.integer(0, 7)};
        const double s = maskIouSimilarity(bank, a, b);
        EXPECT_GE(s, 0.0);
        EXPECT_LT(s, 1.0);
        EXPECT_EQ(s, maskIouSimilarity(bank, b, a));
    }
}

TEST(FeatureCosine, Examples) {
    const FeatureMap fm = mapFrom(1, 4, 2, {1, 2, 2, 4, -2, 1, -1, -2});
    EXPECT_NEAR(featureCosine(fm, {0, 0}, {1, 0}), 1.0, 1e-12);
    EXPECT_NEAR(featureCosine(fm, {0, 0}, {2, 0}), 0.0, 1e-12);
    EXPECT_EQ(featureCosine(fm, {0, 0}, {3, 0}), 0.0);
    const FeatureMap zero(1, 2, 2);
    EXPECT_EQ(featureCosine(zero, {0, 0}, {1, 0}), 0.0);
}

TEST(LossFe, Examples) {
    Gen gen(52);
    FeatureMap a(3, 4, 5);
    for (float &x : a.data()) {
        x = float(gen.normal());
    }
    EXPECT_EQ(lossFe(a, a), 0.0);
    FeatureMap b = a;
    for (float &x : b.data()) {
        x += 0.1f;
    }
    EXPECT_NEAR(lossFe(a, b), 0.1, 1e-6);

    FeatureMap c(3, 4, 5);
    for (float &x : c.data()) {
        x = float(gen.normal());
    }
    double oracle = 0.0;
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) {
            for (int k = 0; k < 5; ++k) {
                oracle += std::abs(double(a.at(y, x, k)) - double(c.at(y, x, k)));
            }
        }
    }
    EXPECT_NEAR(lossFe(a, c), oracle / 60.0, 1e-9);
    EXPECT_EQ(lossFe(a, c), lossFe(c, a));
    EXPECT_THROW(lossFe(a, FeatureMap(3, 4, 4)), Error);
}

TEST(LossCom, Examples) {
    const FeatureMap fm = mapFrom(1, 3, 2, {1, 0, 1, 0, 0, 1});
    const PixelPair same{0, {0, 0}, {1, 0}, 1.0};
    const PixelPair orthoSame{0, {0, 0}, {2, 0}, 1.0};
    const PixelPair half{0, {0, 0}, {1, 0}, 0.5};
    EXPECT_EQ(lossCom(fm, std::vector{same}), 0.0);
    EXPECT_EQ(lossCom(fm, std::vector{orthoSame}), 1.0);
    EXPECT_NEAR(lossCom(fm, std::vector{half}), 0.5, 1e-12);
    EXPECT_NEAR(lossCom(fm, std::vector{same, orthoSame}), 0.5, 1e-12);
}

TEST(LossCom, BoundedInUnitInterval) {
    Gen gen(53);
    for (int trial = 0; trial < 200; ++trial) {
        FeatureMap fm(2, 2, 3);
        for (float &x : fm.data()) {
            x = float(gen.normal());
        }
        const PixelPair pp{0, {gen.integer(0, 1), gen.integer(0, 1)},
                           {gen.integer(0, 1), gen.integer(0, 1)}, gen.uniform(0, 1)};
        const double l = lossCom(fm, std::vector{pp});
        EXPECT_GE(l, 0.0);
        EXPECT_LE(l, 1.0 + 1e-12);
    }
}

TEST(Resample, IdentityAndConstant) {
    Gen gen(54);
    FeatureMap fm(5, 7, 2);
    for (float &x : fm.data()) {
        x = float(gen.normal());
    }
    EXPECT_EQ(resampleBilinear(fm, 5, 7).data(), fm.data());
    FeatureMap flat(4, 4, 1);
    std::fill(flat.data().begin(), flat.data().end(), 0.25f);
    const FeatureMap big = resampleBilinear(flat, 9, 13);
    for (float x : big.data()) {
        EXPECT_FLOAT_EQ(x, 0.25f);
    }
    // A 2x upsample of a linear ramp stays a ramp between pixel centers.
    FeatureMap ramp(1, 2, 1);
    ramp.at(0, 0) = 0.f;
    ramp.at(0, 1) = 1.f;
    const FeatureMap up = resampleBilinear(ramp, 1, 4);
    EXPECT_FLOAT_EQ(up.at(0, 0), 0.f);
    EXPECT_FLOAT_EQ(up.at(0, 1), 0.25f);
    EXPECT_FLOAT_EQ(up.at(0, 2), 0.75f);
    EXPECT_FLOAT_EQ(up.at(0, 3), 1.f);
}

TEST(Objective, LossMatchesIndependentRender) {
    Gen gen(55);
    Fixture f = makeFixture(gen, 6, 2);
    TrainConfig cfg;
    const FeatureObjective obj(f.scene, f.views, cfg);
    std::mt19937_64 rng(1);
    const auto pairs = obj.samplePairs(rng, 64);
    const auto ev    = obj.evaluate(flattenAffinity(f.scene), pairs, false);

    double fe = 0.0, com = 0.0;
    for (std::size_t v = 0; v < f.views.size(); ++v) {
        const RenderOutput out =
            bruteForceRender(f.scene, f.views[v].camera, PayloadSelector::affinity());
        fe += lossFe(f.views[v].teacher, out.payload) / double(f.views.size());
        for (const PixelPair &pp : pairs) {
            if (pp.view == int(v)) {
                const double S = maskIouSimilarity(f.views[v].masks, pp.a, pp.b);
                EXPECT_EQ(S, pp.similarity);
                const double C = featureCosine(out.payload, pp.a, pp.b);
                com += (S * (1 - C) + (1 - S) * C) / double(pairs.size());
            }
        }
    }
    EXPECT_NEAR(ev.lossFe, fe, 1e-5);
    EXPECT_NEAR(ev.lossCom, com, 1e-5);
    EXPECT_NEAR(ev.total, 0.7 * ev.lossFe + 0.3 * ev.lossCom, 1e-12);
}

// Central differences, h = 1e-4; the relative error is measured on the whole
// gradient vector.
double
gradientRelativeError(const FeatureObjective &obj, std::vector<double> x,
                      std::span<const PixelPair> pairs) {
    const auto ev = obj.evaluate(x, pairs);
    const double h = 1e-4;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double x0 = x[k];
        x[k]            = x0 + h;
        const double lp = obj.evaluate(x, pairs, false).total;
        x[k]            = x0 - h;
        const double lm = obj.evaluate(x, pairs, false).total;
        x[k]            = x0;
        const double fd = (lp - lm) / (2 * h);
        num += (fd - ev.gradient[k]) * (fd - ev.gradient[k]);
        den = std::max(den, std::max(fd * fd, ev.gradient[k] * ev.gradient[k]));
    }
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num) / std::sqrt(den * double(x.size()));
}

TEST(Objective, GradientMatchesFiniteDifferences) {
    Gen gen(56);
    for (int trial = 0; trial < 5; ++trial) {
        Fixture f = makeFixture(gen, gen.integer(2, 6), 2, 10);
        const FeatureObjective obj(f.scene, f.views, TrainConfig());
        std::mt19937_64 rng(trial);
        const auto pairs = obj.samplePairs(rng, 32);
        ASSERT_GT(obj.weights(0).weight.size(), 20u);
        EXPECT_LT(gradientRelativeError(obj, flattenAffinity(f.scene), pairs), 1e-4) << "trial " << trial;
    }
}

TEST(Objective, NothingCoveredMeansZeroGradient) {
    Gen gen(57);
    Fixture f = makeFixture(gen, 4, 1);
    // Turn the camera around so nothing projects.
    f.views[0].camera = Camera::lookAt(Vec3(0, 0, -3), Vec3(0, 0, -6), Vec3::UnitY(), 18, 12, 12);
    const FeatureObjective obj(f.scene, f.views, TrainConfig());
    std::mt19937_64 rng(2);
    const auto pairs = obj.samplePairs(rng, 16);
    const auto ev    = obj.evaluate(flattenAffinity(f.scene), pairs);
    for (double g : ev.gradient) {
        EXPECT_EQ(g, 0.0);
    }
}

TEST(Training, ZeroIterationsIsANoOp) {
    Gen gen(58);
    Fixture f = makeFixture(gen, 5, 1);
    TrainConfig cfg;
    cfg.iterations          = 0;
    const TrainResult r     = trainFeatureField(f.scene, f.views, cfg);
    EXPECT_TRUE(r.trace.empty());
    EXPECT_EQ(flattenAffinity(r.scene), flattenAffinity(f.scene));
}

TEST(Training, SameSeedGivesIdenticalTrace) {
    Gen gen(59);
    Fixture f = makeFixture(gen, 8, 2);
    TrainConfig cfg;
    cfg.iterations   = 30;
    cfg.pairsPerIter = 64;
    cfg.rngSeed      = 99;
    cfg.learningRate = 0.02;
    const TrainResult a = trainFeatureField(f.scene, f.views, cfg);
    cfg.threads         = 1;
    const TrainResult b = trainFeatureField(f.scene, f.views, cfg);
    ASSERT_EQ(a.trace.size(), 30u);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].total, b.trace[i].total);
    }
    EXPECT_EQ(flattenAffinity(a.scene), flattenAffinity(b.scene));
    EXPECT_LT(a.trace.back().total, a.trace.front().total);
}

TEST(Training, ProgressCallbackStopsEarly) {
    Gen gen(60);
    Fixture f = makeFixture(gen, 4, 1);
    TrainConfig cfg;
    cfg.iterations      = 50;
    cfg.pairsPerIter    = 16;
    const TrainResult r = trainFeatureField(f.scene, f.views, cfg,
                                            [](const LossRecord &rec) { return rec.iteration < 9; });
    EXPECT_EQ(r.trace.size(), 10u);
}

TEST(TrainConfig, FromJsonAndValidation) {
    const TrainConfig c = TrainConfig::fromJson(
        nlohmann::json{{"iterations", 12}, {"learning_rate", 0.01}, {"seed", 5}});
    EXPECT_EQ(c.iterations, 12);
    EXPECT_EQ(c.learningRate, 0.01);
    EXPECT_EQ(c.rngSeed, 5u);
    EXPECT_EQ(c.lambdaFe, 0.7);
    EXPECT_THROW(TrainConfig::fromJson(nlohmann::json{{"iterations", -1}}), Error);
    EXPECT_THROW(TrainConfig::fromJson(nlohmann::json{{"iterations", "many"}}), Error);
}

} // namespace
} // namespace segwild
