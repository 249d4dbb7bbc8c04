// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/synthetic.hpp>

#include <segwild/image_io.hpp>
#include <segwild/io.hpp>
#include <segwild/metrics.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace segwild {

namespace {

Eigen::Vector4f
randomRotation(std::mt19937_64 &rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Quat q(n01(rng), n01(rng), n01(rng), n01(rng));
    q.normalize();
    return q.cast<float>();
}

// Rotation about +z taking the local x axis to angle phi.
Eigen::Vector4f
rotationAboutZ(double phi) {
    return Eigen::Vector4f(float(std::cos(0.5 * phi)), 0.f, 0.f, float(std::sin(0.5 * phi)));
}

std::string
viewId(int k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "view_%02d", k);
    return buf;
}

Vec2
promptFor(const SyntheticCluster &cl, const Camera &cam, const Bitmap &gt) {
    const Vec2 uv = cam.projectCamera(cam.toCamera(cl.center));
    const Pixel p = nearestPixel(uv.x(), uv.y());
    if (gt.contains(p)) {
        return Vec2(p.x, p.y);
    }
    double best = std::numeric_limits<double>::infinity();
    Vec2 out    = Vec2(p.x, p.y);
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const double d = (Vec2(x, y) - uv).squaredNorm();
            if (gt.get(y, x) && d < best) {
                best = d;
                out  = Vec2(x, y);
            }
        }
    }
    return out;
}

} // namespace

void
SyntheticSpec::validate() const {
    check(!clusters.empty(), ErrorCode::InvalidArgument, "synthetic spec has no clusters");
    std::set<int> labels;
    for (const SyntheticCluster &c : clusters) {
        check(c.count >= 1 && c.spikes >= 0, ErrorCode::InvalidArgument,
              "cluster counts must be >= 1");
        check(c.spread > 0.0, ErrorCode::InvalidArgument, "cluster spread must be positive");
        check(c.label >= 0 && c.label < featureDim, ErrorCode::InvalidArgument,
              "cluster label must index a feature channel");
        check(labels.insert(c.label).second, ErrorCode::InvalidArgument,
              "cluster labels must be distinct");
    }
    check(views >= 1 && width >= 8 && height >= 8 && focal > 0.0 && distance > 0.0,
          ErrorCode::InvalidArgument, "invalid synthetic camera parameters");
    check(noiseSigma >= 0.0 && opacity > 0.0 && opacity <= 1.0 && gaussianScale > 0.0 &&
              bankAlphaCut >= 0.0 && bankAlphaCut < 1.0,
          ErrorCode::InvalidArgument, "invalid synthetic Gaussian parameters");
}

SyntheticSpec
SyntheticSpec::twoCluster(std::uint64_t seed, int spikesPerCluster) {
    SyntheticSpec s;
    s.seed     = seed;
    s.clusters = {{Vec3(-1.0, 0.0, 0.0), 0.6, 30, 0, spikesPerCluster},
                  {Vec3(1.0, 0.0, 0.0), 0.6, 30, 1, spikesPerCluster}};
    return s;
}

std::vector<std::size_t>
SyntheticData::labelIndices(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t>
SyntheticData::coreIndices(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label && !spike[i]) {
            out.push_back(i);
        }
    }
    return out;
}

SyntheticData
generateSynthetic(const SyntheticSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u11(-1.0, 1.0);
    std::uniform_real_distribution<double> jitter(0.8, 1.25);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    SyntheticData data{GaussianScene(spec.featureDim), {}, {}, {}, {}, {}, {}};
    data.scene.metadata["generator"] = "synthetic";
    data.scene.metadata["seed"]      = std::to_string(spec.seed);
    for (const SyntheticCluster &cl : spec.clusters) {
        for (int k = 0; k < cl.count; ++k) {
            // Rejection-sampled point in a disk-shaped ellipsoid facing +z.
            Vec3 d;
            do {
                d = Vec3(u11(rng), u11(rng), u11(rng));
            } while (d.squaredNorm() > 1.0);
            Gaussian g;
            g.position  = (cl.center + cl.spread * Vec3(d.x(), d.y(), 0.3 * d.z())).cast<float>();
            g.rotation  = randomRotation(rng);
            g.scale     = Eigen::Vector3f(float(spec.gaussianScale * jitter(rng)),
                                          float(spec.gaussianScale * jitter(rng)),
                                          float(spec.gaussianScale * jitter(rng)));
            g.opacity   = float(spec.opacity);
            g.baseColor = Eigen::Vector3f(cl.label % 2 ? 0.2f : 0.9f, 0.5f, cl.label % 2 ? 0.9f : 0.2f);
            data.scene.add(std::move(g));
            data.labels.push_back(cl.label);
            data.spike.push_back(0);
        }
        for (int k = 0; k < cl.spikes; ++k) {
            const double phi = angle(rng);
            const Vec3 dir(std::cos(phi), std::sin(phi), 0.0);
            Gaussian g;
            g.position  = (cl.center + 0.9 * cl.spread * dir).cast<float>();
            g.rotation  = rotationAboutZ(phi);
            g.scale     = Eigen::Vector3f(float(cl.spread), float(0.3 * spec.gaussianScale),
                                          float(0.3 * spec.gaussianScale));
            g.opacity   = float(spec.opacity);
            g.baseColor = Eigen::Vector3f(1.f, 0.f, 0.f);
            data.scene.add(std::move(g));
            data.labels.push_back(cl.label);
            data.spike.push_back(1);
        }
    }

    Vec3 target = Vec3::Zero();
    for (const SyntheticCluster &cl : spec.clusters) {
        target += cl.center;
    }
    target /= double(spec.clusters.size());

    // One-hot label features drive the teacher render.
    GaussianScene oneHot = data.scene;
    for (std::size_t i = 0; i < oneHot.size(); ++i) {
        std::fill(oneHot[i].affinity.begin(), oneHot[i].affinity.end(), 0.f);
        oneHot[i].affinity[data.labels[i]] = 1.f;
    }

    std::normal_distribution<double> noise(0.0, spec.noiseSigma);
    const double arc = spec.arcDegrees * std::numbers::pi / 180.0;
    for (int v = 0; v < spec.views; ++v) {
        const double theta = spec.views == 1 ? 0.0 : -0.5 * arc + arc * v / (spec.views - 1);
        const Vec3 eye = target + spec.distance * Vec3(0.0, std::sin(theta), std::cos(theta));
        TrainingView tv;
        tv.camera = Camera::lookAt(eye, target, Vec3::UnitY(), spec.focal, spec.width, spec.height);
        tv.teacher = renderPayload(oneHot, tv.camera, PayloadSelector::affinity(), RenderOptions{1}).payload;
        if (spec.noiseSigma > 0.0) {
            for (float &f : tv.teacher.data()) {
                f += static_cast<float>(noise(rng));
            }
        }

        // Priors see spikes as part of their cluster, like the teacher does;
        // ground truth and the prompt masks cover the core only.
        std::vector<Bitmap> masks, priors;
        for (const SyntheticCluster &cl : spec.clusters) {
            const GaussianScene core = data.scene.subset(data.coreIndices(cl.label));
            const GaussianScene full = data.scene.subset(data.labelIndices(cl.label));
            masks.push_back(alphaMask(core, tv.camera, kDefaultAlphaCut, RenderOptions{1}));
            priors.push_back(alphaMask(full, tv.camera, spec.bankAlphaCut, RenderOptions{1}));
            if (v == 0) {
                data.promptMasks.push_back(
                    alphaMask(core, tv.camera, spec.bankAlphaCut, RenderOptions{1}));
            }
        }
        data.viewIds.push_back(viewId(v));
        tv.masks = makeMaskBank(data.viewIds.back(), std::move(priors));
        data.gtMasks.push_back(std::move(masks));
        data.views.push_back(std::move(tv));
    }
    return data;
}

nlohmann::json
writeSyntheticBenchmark(const SyntheticSpec &spec, const std::filesystem::path &dir,
                        const SyntheticWriteOptions &options) {
    namespace fs = std::filesystem;
    const SyntheticData data = generateSynthetic(spec);
    fs::create_directories(dir / "cameras");
    fs::create_directories(dir / "teacher");
    fs::create_directories(dir / "masks");
    fs::create_directories(dir / "gt");
    fs::create_directories(dir / "prompts");

    GaussianScene scene = data.scene;
    if (options.train) {
        TrainResult trained = trainFeatureField(data.scene, data.views, options.trainConfig);
        writeLossTraceCsv(trained.trace, dir / "loss_trace.csv");
        scene = std::move(trained.scene);
    }
    saveScene(scene, dir / "scene.ply");

    nlohmann::json cameras = nlohmann::json::object();
    nlohmann::json views   = nlohmann::json::array();
    for (std::size_t v = 0; v < data.views.size(); ++v) {
        const std::string &id = data.viewIds[v];
        views.push_back({{"camera", "cameras/" + id + ".json"},
                         {"teacher", "teacher/" + id + ".fmap"},
                         {"masks", "masks/" + id}});
        saveCamera(data.views[v].camera, dir / "cameras" / (id + ".json"));
        saveFeatureMap(data.views[v].teacher, dir / "teacher" / (id + ".fmap"));
        saveMaskBank(data.views[v].masks, dir / "masks" / id);
        cameras[id] = "cameras/" + id + ".json";
        for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
            saveMaskPng(data.gtMasks[v][c], dir / "gt" /
                                                ("label_" + std::to_string(spec.clusters[c].label) +
                                                 "_" + id + ".png"));
        }
    }

    writeJsonFile({{"views", views}}, dir / "views.json");

    nlohmann::json cases = nlohmann::json::array();
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
        const std::string label = std::to_string(spec.clusters[c].label);
        saveMaskPng(data.promptMasks[c], dir / "prompts" / ("label_" + label + ".png"));
        const std::string ref   = data.viewIds.front();
        const Vec2 click = promptFor(spec.clusters[c], data.views.front().camera, data.gtMasks[0][c]);
        nlohmann::json gt = nlohmann::json::array();
        for (const std::string &id : data.viewIds) {
            gt.push_back({{"camera", id}, {"mask_png", "gt/label_" + label + "_" + id + ".png"}});
        }
        cases.push_back({{"name", "label_" + label},
                         {"scene", "scene.ply"},
                         {"cameras", cameras},
                         {"prompts",
                          {{"camera", ref},
                           {"points", {{click.x(), click.y()}}},
                           {"mask_png", "prompts/label_" + label + ".png"}}},
                         {"gt", gt},
                         {"tau", kDefaultTau},
                         {"use_sgc", options.useSgc}});
    }
    nlohmann::json manifest = {{"cases", cases},
                               {"seed", spec.seed},
                               {"trained", options.train}};
    writeJsonFile(manifest, dir / "manifest.json");
    return manifest;
}

} // namespace segwild
