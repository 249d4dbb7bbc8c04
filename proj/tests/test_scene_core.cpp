// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include <segwild/image_io.hpp>
#include <segwild/io.hpp>

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

namespace segwild {
namespace {

using testing::Gen;
using testing::TempDir;

// Hand-written splat PLY; `extra` adds trailing SH properties that the
// loader must skip.
void
writeRawPly(const fs::path &path, const std::vector<std::array<float, 14>> &rows, int extra = 0) {
    std::ofstream out(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\ncomment hand written\nelement vertex "
        << rows.size() << "\n";
    for (const char *n : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                          "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        out << "property float " << n << "\n";
    }
    for (int e = 0; e < extra; ++e) {
        out << "property float f_rest_" << e << "\n";
    }
    out << "end_header\n";
    for (const auto &r : rows) {
        out.write(reinterpret_cast<const char *>(r.data()), sizeof(r));
        for (int e = 0; e < extra; ++e) {
            const float junk = 123.f + e;
            out.write(reinterpret_cast<const char *>(&junk), sizeof(junk));
        }
    }
}

void
writeSidecar(const fs::path &path, std::uint32_t n, std::uint32_t c) {
    std::ofstream out(path, std::ios::binary);
    out.write("AFFN", 4);
    out.write(reinterpret_cast<const char *>(&n), 4);
    out.write(reinterpret_cast<const char *>(&c), 4);
    const std::vector<float> values(std::size_t(n) * c, 0.25f);
    out.write(reinterpret_cast<const char *>(values.data()), values.size() * sizeof(float));
}

ErrorCode
errorOf(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::Runtime;
}

TEST(Covariance, IdentityAndAxisAligned) {
    EXPECT_TRUE(covarianceFromRotationScale(Quat(1, 0, 0, 0), Vec3(1, 1, 1)).isApprox(Mat3::Identity()));
    const Mat3 d = covarianceFromRotationScale(Quat(1, 0, 0, 0), Vec3(2, 1, 1));
    EXPECT_TRUE(d.isApprox(Vec3(4, 1, 1).asDiagonal().toDenseMatrix()));
}

TEST(Covariance, MatchesRodriguesOracle) {
    Gen gen(11);
    for (int k = 0; k < 500; ++k) {
        const Quat q = gen.unitQuaternion();
        const Vec3 s = gen.scale(0.01, 3.0);
        const Mat3 R = testing::rodriguesRotation(q);
        const Mat3 expected = R * s.asDiagonal() * s.asDiagonal() * R.transpose();
        const Mat3 got      = covarianceFromRotationScale(q, s);
        EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, expected.norm()));
    }
}

TEST(Covariance, AlwaysSpd) {
    Gen gen(12);
    for (int k = 0; k < 10000; ++k) {
        const Mat3 cov = covarianceFromRotationScale(gen.unitQuaternion(), gen.scale(0.01, 2.0));
        ASSERT_TRUE(cov.isApprox(cov.transpose()));
        ASSERT_EQ(Eigen::LLT<Mat3>(cov).info(), Eigen::Success);
    }
}

TEST(Covariance, RejectsNonUnitQuaternion) {
    EXPECT_EQ(errorOf([] { covarianceFromRotationScale(Quat(1.1, 0, 0, 0), Vec3(1, 1, 1)); }),
              ErrorCode::Validation);
}

TEST(SceneIo, ActivationsOnLoad) {
    TempDir dir("ply");
    writeRawPly(dir / "one.ply", {{0, 0, 0, 0, 0, 0, 0.f, 0, 0, 0, 1, 0, 0, 0}}, 45);
    const GaussianScene scene = loadScene(dir / "one.ply");
    ASSERT_EQ(scene.size(), 1u);
    EXPECT_FLOAT_EQ(scene[0].opacity, 0.5f);
    EXPECT_TRUE(scene[0].scale.isApprox(Eigen::Vector3f::Ones()));
    EXPECT_EQ(scene.featureDim(), kDefaultFeatureDim);
    for (float a : scene[0].affinity) {
        EXPECT_EQ(a, 0.f);
    }
}

TEST(SceneIo, QuaternionNormalizedOnLoad) {
    TempDir dir("ply");
    writeRawPly(dir / "q.ply", {{0, 0, 0, 0, 0, 0, 0.f, 0, 0, 0, 2, 0, 0, 2}});
    const GaussianScene scene = loadScene(dir / "q.ply");
    EXPECT_NEAR(scene[0].rotation.cast<double>().norm(), 1.0, 1e-6);
}

TEST(SceneIo, SidecarCountMismatch) {
    TempDir dir("ply");
    std::vector<std::array<float, 14>> rows(100, {0, 0, 0, 0, 0, 0, 0.f, 0, 0, 0, 1, 0, 0, 0});
    writeRawPly(dir / "s.ply", rows);
    writeSidecar(affinitySidecarPath(dir / "s.ply"), 99, 8);
    EXPECT_EQ(errorOf([&] { loadScene(dir / "s.ply"); }), ErrorCode::Format);
    writeSidecar(affinitySidecarPath(dir / "s.ply"), 100, 8);
    const GaussianScene scene = loadScene(dir / "s.ply");
    EXPECT_EQ(scene.featureDim(), 8u);
    EXPECT_EQ(scene[99].affinity[7], 0.25f);
}

TEST(SceneIo, NonFiniteRejected) {
    TempDir dir("ply");
    writeRawPly(dir / "n.ply", {{NAN, 0, 0, 0, 0, 0, 0.f, 0, 0, 0, 1, 0, 0, 0}});
    EXPECT_EQ(errorOf([&] { loadScene(dir / "n.ply"); }), ErrorCode::Format);
}

TEST(SceneIo, MalformedHeader) {
    TempDir dir("ply");
    std::ofstream(dir / "bad.ply") << "ply\nformat ascii 1.0\nelement vertex 1\nend_header\n";
    EXPECT_EQ(errorOf([&] { loadScene(dir / "bad.ply"); }), ErrorCode::Format);
    EXPECT_EQ(errorOf([&] { loadScene(dir / "missing.ply"); }), ErrorCode::NotFound);
}

TEST(SceneIo, EmptySceneRoundTrip) {
    TempDir dir("ply");
    saveScene(GaussianScene(16), dir / "empty.ply");
    const GaussianScene back = loadScene(dir / "empty.ply");
    EXPECT_EQ(back.size(), 0u);
    EXPECT_EQ(back.featureDim(), 16u);
}

TEST(SceneIo, OpacityLogitClampedOnSave) {
    TempDir dir("ply");
    GaussianScene scene(2);
    Gaussian g;
    g.opacity = 1.f;
    scene.add(g);
    saveScene(scene, dir / "a.ply");
    std::ifstream in(dir / "a.ply", std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    const std::size_t body = text.find("end_header\n") + std::strlen("end_header\n");
    float logit = 0.f;
    std::memcpy(&logit, text.data() + body + 6 * sizeof(float), sizeof(float));
    EXPECT_EQ(logit, kOpacityLogitClamp);
    const GaussianScene back = loadScene(dir / "a.ply");
    EXPECT_TRUE(std::isfinite(back[0].opacity));
    EXPECT_GT(back[0].opacity, 0.999f);
}

TEST(SceneIo, RoundTripWithinTolerance) {
    Gen gen(13);
    TempDir dir("ply");
    for (int trial = 0; trial < 20; ++trial) {
        const GaussianScene scene = testing::randomScene(gen, gen.integer(1, 50), 5, 3.0, 0.01, 2.0);
        saveScene(scene, dir / "r.ply");
        const GaussianScene back = loadScene(dir / "r.ply");
        ASSERT_EQ(back.size(), scene.size());
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const Gaussian &a = scene[i], &b = back[i];
            EXPECT_LE((a.position - b.position).cwiseAbs().maxCoeff(), 1e-6f);
            EXPECT_LE((a.scale - b.scale).cwiseAbs().maxCoeff(), 1e-6f);
            EXPECT_LE((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-6f);
            EXPECT_LE((a.baseColor - b.baseColor).cwiseAbs().maxCoeff(), 1e-6f);
            EXPECT_NEAR(a.opacity, b.opacity, 1e-6f);
            for (std::size_t c = 0; c < a.affinity.size(); ++c) {
                EXPECT_EQ(a.affinity[c], b.affinity[c]);
            }
        }
    }
}

TEST(FeatureMapIo, IndexingContract) {
    TempDir dir("fmap");
    FeatureMap m(2, 2, 1);
    m.data() = {1, 2, 3, 4};
    saveFeatureMap(m, dir / "m.fmap");
    const FeatureMap back = loadFeatureMap(dir / "m.fmap");
    EXPECT_EQ(back.at(1, 1, 0), 4.f);
    EXPECT_EQ(back.at(0, 1, 0), 2.f);

    std::ofstream(dir / "bad.fmap", std::ios::binary) << "FMAQ";
    EXPECT_EQ(errorOf([&] { loadFeatureMap(dir / "bad.fmap"); }), ErrorCode::Format);
}

TEST(FeatureMapIo, DimensionOverflowRejected) {
    TempDir dir("fmap");
    std::ofstream out(dir / "huge.fmap", std::ios::binary);
    out.write("FMAP", 4);
    const std::uint32_t dims[3] = {0xFFFFFFFFu, 0xFFFFFFFFu, 64};
    out.write(reinterpret_cast<const char *>(dims), sizeof(dims));
    out.close();
    EXPECT_EQ(errorOf([&] { loadFeatureMap(dir / "huge.fmap"); }), ErrorCode::Format);
}

TEST(CameraIo, RejectsNonOrthonormalRotation) {
    Camera cam = testing::frontCamera(50, 32, 32);
    nlohmann::json j = cameraToJson(cam);
    j["R"][0]        = 1.01;
    EXPECT_EQ(errorOf([&] { cameraFromJson(j); }), ErrorCode::Validation);
    j["R"][0] = 1.0;
    EXPECT_NO_THROW(cameraFromJson(j));
}

TEST(CameraIo, RoundTrip) {
    Gen gen(14);
    TempDir dir("cam");
    const Camera cam = testing::orbitCamera(gen, 4.0, 60, 40, 30);
    saveCamera(cam, dir / "c.json");
    const Camera back = loadCamera(dir / "c.json");
    EXPECT_TRUE(back.R.isApprox(cam.R, 1e-12));
    EXPECT_TRUE(back.t.isApprox(cam.t, 1e-12));
    EXPECT_EQ(back.width, 40);
    EXPECT_EQ(back.height, 30);
}

TEST(MaskBank, SmallestContainingMaskWins) {
    Bitmap big(4, 4, true), small(4, 4);
    small.set(1, 1, true);
    small.set(1, 2, true);
    const MaskBank bank = makeMaskBank("img", {big, small});
    EXPECT_EQ(bank.maskAt({1, 1}), 1);
    EXPECT_EQ(bank.maskAt({0, 0}), 0);
}

TEST(MaskBank, TiesByConfidenceThenIndex) {
    Bitmap a(3, 3), b(3, 3), c(3, 3);
    a.set(0, 0, true);
    b.set(0, 0, true);
    c.set(0, 0, true);
    EXPECT_EQ(makeMaskBank("i", {a, b, c}, {0.5f, 0.9f, 0.9f}).maskAt({0, 0}), 1);
    EXPECT_EQ(makeMaskBank("i", {a, b}, {0.5f, 0.5f}).maskAt({0, 0}), 0);
}

TEST(MaskBank, AssignmentConsistentOnRandomBanks) {
    Gen gen(15);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = gen.integer(1, 12), w = gen.integer(1, 12);
        std::vector<Bitmap> masks;
        std::vector<float> conf;
        for (int m = gen.integer(0, 5); m > 0; --m) {
            masks.push_back(testing::randomBitmap(gen, h, w, gen.uniform(0.05, 0.6)));
            conf.push_back(float(gen.uniform(0, 1)));
        }
        if (masks.empty()) {
            continue;
        }
        const MaskBank bank = makeMaskBank("r", masks, conf);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int m = bank.maskAt({x, y});
                bool covered = false;
                for (const Bitmap &b : masks) {
                    covered = covered || b.get(y, x);
                }
                if (!covered) {
                    EXPECT_EQ(m, MaskBank::kNone);
                    continue;
                }
                ASSERT_NE(m, MaskBank::kNone);
                EXPECT_TRUE(masks[m].get(y, x));
                // No containing mask is strictly smaller.
                for (const Bitmap &b : masks) {
                    if (b.get(y, x)) {
                        EXPECT_GE(b.count(), masks[m].count());
                    }
                }
            }
        }
    }
}

TEST(MaskBank, RoundTripThroughPngs) {
    Gen gen(16);
    TempDir dir("bank");
    const MaskBank bank = makeMaskBank("v", {testing::randomBitmap(gen, 9, 7), testing::randomBitmap(gen, 9, 7)},
                                       {0.3f, 0.8f});
    saveMaskBank(bank, dir / "bank");
    const MaskBank back = loadMaskBank(dir / "bank");
    EXPECT_EQ(back.imageId, "v");
    ASSERT_EQ(back.masks.size(), 2u);
    EXPECT_EQ(back.masks[0], bank.masks[0]);
    EXPECT_EQ(back.masks[1], bank.masks[1]);
    EXPECT_EQ(back.assignment, bank.assignment);
}

TEST(MaskBank, InconsistentSizesRejected) {
    EXPECT_THROW(makeMaskBank("x", {Bitmap(3, 3), Bitmap(3, 4)}), Error);
}

TEST(Png, MaskRoundTrip) {
    Gen gen(17);
    TempDir dir("png");
    const Bitmap m = testing::randomBitmap(gen, 13, 21);
    saveMaskPng(m, dir / "m.png");
    EXPECT_EQ(loadMaskPng(dir / "m.png"), m);
}

} // namespace
} // namespace segwild
