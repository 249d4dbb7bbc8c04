// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/feature_field.hpp>

#include <segwild/io.hpp>
#include <segwild/pca.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace segwild {

void
TrainConfig::validate() const {
    check(iterations >= 0, ErrorCode::InvalidArgument, "iterations must be >= 0");
    check(lambdaFe >= 0.0 && lambdaCom >= 0.0, ErrorCode::InvalidArgument,
          "loss weights must be non-negative");
    check(pairsPerIter >= 1, ErrorCode::InvalidArgument, "pairs_per_iter must be >= 1");
    check(learningRate > 0.0 && epsilon > 0.0, ErrorCode::InvalidArgument,
          "learning rate and epsilon must be positive");
    check(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::InvalidArgument,
          "Adam betas must lie in [0, 1)");
}

TrainConfig
TrainConfig::fromJson(const nlohmann::json &j, TrainConfig base) {
    check(j.is_object(), ErrorCode::InvalidArgument, "training config must be a JSON object");
    try {
        base.iterations   = j.value("iterations", base.iterations);
        base.learningRate = j.value("learning_rate", base.learningRate);
        base.lambdaFe     = j.value("lambda_fe", base.lambdaFe);
        base.lambdaCom    = j.value("lambda_com", base.lambdaCom);
        base.pairsPerIter = j.value("pairs_per_iter", base.pairsPerIter);
        base.rngSeed      = j.value("seed", base.rngSeed);
        base.threads      = j.value("threads", base.threads);
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::InvalidArgument, std::string("malformed training config: ") + e.what());
    }
    base.validate();
    return base;
}

double
maskIouSimilarity(const MaskBank &bank, Pixel a, Pixel b) {
    const int ma = bank.maskAt(a);
    const int mb = bank.maskAt(b);
    if (ma == MaskBank::kNone || mb == MaskBank::kNone) {
        return 0.0;
    }
    if (ma == mb) {
        const double area = double(bank.areas[ma]);
        return area / (area + kMaskIouEpsilon);
    }
    const auto &A = bank.masks[ma].bits();
    const auto &B = bank.masks[mb].bits();
    std::size_t inter = 0;
    for (std::size_t k = 0; k < A.size(); ++k) {
        inter += A[k] & B[k];
    }
    const double uni = double(bank.areas[ma] + bank.areas[mb] - inter);
    return double(inter) / (uni + kMaskIouEpsilon);
}

template <class T>
double
featureCosine(const BasicFeatureMap<T> &fe, Pixel a, Pixel b) {
    const auto fa = fe.pixel(a.y, a.x);
    const auto fb = fe.pixel(b.y, b.x);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < fe.channels(); ++c) {
        dot += double(fa[c]) * fb[c];
        na += double(fa[c]) * fa[c];
        nb += double(fb[c]) * fb[c];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::max(0.0, dot / std::sqrt(na * nb));
}

template double featureCosine<float>(const FeatureMap &, Pixel, Pixel);
template double featureCosine<double>(const FeatureMapD &, Pixel, Pixel);

double
lossFe(const FeatureMap &teacher, const FeatureMap &rendered) {
    check(teacher.sameShape(rendered), ErrorCode::DimensionMismatch,
          "feature maps differ in shape");
    if (teacher.data().empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < teacher.data().size(); ++k) {
        sum += std::abs(double(teacher.data()[k]) - double(rendered.data()[k]));
    }
    return sum / double(teacher.data().size());
}

double
lossCom(const FeatureMap &rendered, std::span<const PixelPair> pairs) {
    check(!pairs.empty(), ErrorCode::InvalidArgument, "compactness loss needs at least one pair");
    double sum = 0.0;
    for (const PixelPair &pp : pairs) {
        const double C = featureCosine(rendered, pp.a, pp.b);
        sum += pp.similarity * (1.0 - C) + (1.0 - pp.similarity) * C;
    }
    return sum / double(pairs.size());
}

FeatureMap
resampleBilinear(const FeatureMap &map, int height, int width) {
    check(height >= 1 && width >= 1 && map.height() >= 1 && map.width() >= 1,
          ErrorCode::InvalidArgument, "resampling needs non-empty maps");
    if (map.height() == height && map.width() == width) {
        return map;
    }
    const int C = map.channels();
    FeatureMap out(height, width, C);
    const double sy = double(map.height()) / height;
    const double sx = double(map.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(map.height() - 1));
        const int y0    = static_cast<int>(std::floor(fy));
        const int y1    = std::min(y0 + 1, map.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(map.width() - 1));
            const int x0    = static_cast<int>(std::floor(fx));
            const int x1    = std::min(x0 + 1, map.width() - 1);
            const double tx = fx - x0;
            for (int c = 0; c < C; ++c) {
                const double top = (1 - tx) * map.at(y0, x0, c) + tx * map.at(y0, x1, c);
                const double bot = (1 - tx) * map.at(y1, x0, c) + tx * map.at(y1, x1, c);
                out.at(y, x, c)  = static_cast<float>((1 - ty) * top + ty * bot);
            }
        }
    }
    return out;
}

FeatureObjective::FeatureObjective(const GaussianScene &scene, std::vector<TrainingView> views,
                                   const TrainConfig &cfg)
    : mGaussians(scene.size()), mChannels(scene.featureDim()), mLambdaFe(cfg.lambdaFe),
      mLambdaCom(cfg.lambdaCom), mViews(std::move(views)) {
    cfg.validate();
    check(!mViews.empty(), ErrorCode::InvalidArgument, "training needs at least one view");
    mWeights.reserve(mViews.size());
    for (TrainingView &v : mViews) {
        v.camera.validate();
        check(std::size_t(v.teacher.channels()) == mChannels, ErrorCode::DimensionMismatch,
              "teacher feature channels differ from the scene feature dimension");
        v.teacher = resampleBilinear(v.teacher, v.camera.height, v.camera.width);
        check(v.masks.height == v.camera.height && v.masks.width == v.camera.width,
              ErrorCode::DimensionMismatch, "mask bank size differs from its camera");
        mWeights.push_back(computePixelWeights(scene, v.camera, RenderOptions{cfg.threads}));
    }
}

FeatureMapD
FeatureObjective::render(std::span<const double> affinity, std::size_t view) const {
    check(affinity.size() == mGaussians * mChannels, ErrorCode::DimensionMismatch,
          "affinity vector length mismatch");
    const PixelWeights &W = mWeights[view];
    const int C           = static_cast<int>(mChannels);
    FeatureMapD fe(W.height, W.width, C);
    double *dst = fe.data().data();
    for (std::size_t p = 0; p + 1 < W.offsets.size(); ++p, dst += C) {
        for (std::size_t k = W.offsets[p]; k < W.offsets[p + 1]; ++k) {
            const double w    = W.weight[k];
            const double *src = affinity.data() + std::size_t(W.gaussian[k]) * C;
            for (int c = 0; c < C; ++c) {
                dst[c] += w * src[c];
            }
        }
    }
    return fe;
}

std::vector<PixelPair>
FeatureObjective::samplePairs(std::mt19937_64 &rng, int count) const {
    std::vector<PixelPair> pairs;
    pairs.reserve(std::max(count, 0));
    std::uniform_int_distribution<std::size_t> pickView(0, mViews.size() - 1);
    for (int k = 0; k < count; ++k) {
        PixelPair pp;
        pp.view           = static_cast<int>(pickView(rng));
        const Camera &cam = mViews[pp.view].camera;
        std::uniform_int_distribution<int> px(0, cam.width - 1), py(0, cam.height - 1);
        pp.a.x         = px(rng);
        pp.a.y         = py(rng);
        pp.b.x         = px(rng);
        pp.b.y         = py(rng);
        pp.similarity  = maskIouSimilarity(mViews[pp.view].masks, pp.a, pp.b);
        pairs.push_back(pp);
    }
    return pairs;
}

FeatureObjective::Evaluation
FeatureObjective::evaluate(std::span<const double> affinity, std::span<const PixelPair> pairs,
                           bool withGradient) const {
    const int C = static_cast<int>(mChannels);
    Evaluation ev;
    if (withGradient) {
        ev.gradient.assign(mGaussians * mChannels, 0.0);
    }
    const double viewNorm = 1.0 / double(mViews.size());
    const double pairNorm = pairs.empty() ? 0.0 : 1.0 / double(pairs.size());

    for (std::size_t v = 0; v < mViews.size(); ++v) {
        const FeatureMapD fe    = render(affinity, v);
        const FeatureMap &teach = mViews[v].teacher;
        const std::size_t n     = fe.data().size();
        const double feNorm     = viewNorm / double(n);

        // dL/dfe, accumulated densely then pulled back through the weights.
        std::vector<double> G(withGradient ? n : 0, 0.0);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double d = fe.data()[k] - double(teach.data()[k]);
            sum += std::abs(d);
            if (withGradient && d != 0.0) {
                G[k] = mLambdaFe * feNorm * (d > 0.0 ? 1.0 : -1.0);
            }
        }
        ev.lossFe += sum * feNorm;

        for (const PixelPair &pp : pairs) {
            if (pp.view != static_cast<int>(v)) {
                continue;
            }
            const auto a = fe.pixel(pp.a.y, pp.a.x);
            const auto b = fe.pixel(pp.b.y, pp.b.x);
            double dot = 0.0, na2 = 0.0, nb2 = 0.0;
            for (int c = 0; c < C; ++c) {
                dot += a[c] * b[c];
                na2 += a[c] * a[c];
                nb2 += b[c] * b[c];
            }
            const double S = pp.similarity;
            if (na2 == 0.0 || nb2 == 0.0) {
                ev.lossCom += S * pairNorm;
                continue;
            }
            const double inv = 1.0 / std::sqrt(na2 * nb2);
            const double cos = dot * inv;
            const double Cc  = std::max(0.0, cos);
            ev.lossCom += (S * (1.0 - Cc) + (1.0 - S) * Cc) * pairNorm;
            if (!withGradient || cos <= 0.0) {
                continue;
            }
            const double g = mLambdaCom * pairNorm * (1.0 - 2.0 * S);
            double *ga     = G.data() + fe.offset(pp.a.y, pp.a.x);
            double *gb     = G.data() + fe.offset(pp.b.y, pp.b.x);
            for (int c = 0; c < C; ++c) {
                ga[c] += g * (b[c] * inv - cos * a[c] / na2);
                gb[c] += g * (a[c] * inv - cos * b[c] / nb2);
            }
        }

        if (withGradient) {
            const PixelWeights &W = mWeights[v];
            const double *src     = G.data();
            for (std::size_t p = 0; p + 1 < W.offsets.size(); ++p, src += C) {
                for (std::size_t k = W.offsets[p]; k < W.offsets[p + 1]; ++k) {
                    const double w = W.weight[k];
                    double *dst    = ev.gradient.data() + std::size_t(W.gaussian[k]) * C;
                    for (int c = 0; c < C; ++c) {
                        dst[c] += w * src[c];
                    }
                }
            }
        }
    }
    ev.total = mLambdaFe * ev.lossFe + (pairs.empty() ? 0.0 : mLambdaCom * ev.lossCom);
    return ev;
}

std::vector<double>
flattenAffinity(const GaussianScene &scene) {
    std::vector<double> out;
    out.reserve(scene.size() * scene.featureDim());
    for (const Gaussian &g : scene.gaussians()) {
        out.insert(out.end(), g.affinity.begin(), g.affinity.end());
    }
    return out;
}

void
assignAffinity(GaussianScene &scene, std::span<const double> affinity) {
    const std::size_t C = scene.featureDim();
    check(affinity.size() == scene.size() * C, ErrorCode::DimensionMismatch,
          "affinity vector length mismatch");
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto &af = scene[i].affinity;
        for (std::size_t c = 0; c < C; ++c) {
            af[c] = static_cast<float>(affinity[i * C + c]);
        }
    }
}

TrainResult
trainFeatureField(const GaussianScene &scene, std::vector<TrainingView> views,
                  const TrainConfig &cfg, const TrainProgress &progress) {
    cfg.validate();
    TrainResult result{scene, {}};
    if (cfg.iterations == 0) {
        return result;
    }
    const FeatureObjective objective(scene, std::move(views), cfg);
    std::mt19937_64 rng(cfg.rngSeed);

    std::vector<double> x = flattenAffinity(scene);
    std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
    double b1t = 1.0, b2t = 1.0;
    result.trace.reserve(cfg.iterations);
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto pairs = objective.samplePairs(rng, cfg.pairsPerIter);
        const auto ev    = objective.evaluate(x, pairs);
        result.trace.push_back({it, ev.lossFe, ev.lossCom, ev.total});

        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        const double stepScale = cfg.learningRate / (1.0 - b1t);
        const double vScale    = 1.0 / (1.0 - b2t);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double g = ev.gradient[k];
            m[k]           = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k]           = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            x[k] -= stepScale * m[k] / (std::sqrt(v[k] * vScale) + cfg.epsilon);
        }
        if (progress && !progress(result.trace.back())) {
            break;
        }
    }
    assignAffinity(result.scene, x);
    return result;
}

std::vector<TrainingView>
loadTrainingViews(const std::filesystem::path &manifest, const PcaModel *pca) {
    const nlohmann::json j = readJsonFile(manifest);
    const auto base        = manifest.parent_path();
    std::vector<TrainingView> views;
    try {
        for (const auto &jv : j.at("views")) {
            TrainingView v;
            v.camera  = loadCamera(base / jv.at("camera").get<std::string>());
            v.teacher = loadFeatureMap(base / jv.at("teacher").get<std::string>());
            if (pca) {
                v.teacher = compressFeatureMap(*pca, v.teacher);
            }
            v.masks = loadMaskBank(base / jv.at("masks").get<std::string>());
            views.push_back(std::move(v));
        }
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorCode::Format, std::string("malformed views manifest: ") + e.what());
    }
    return views;
}

void
writeLossTraceCsv(std::span<const LossRecord> trace, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    check(bool(out), ErrorCode::Io, "cannot open loss trace for writing");
    out.precision(10);
    out << "iteration,loss_fe,loss_com,total\n";
    for (const LossRecord &r : trace) {
        out << r.iteration << ',' << r.lossFe << ',' << r.lossCom << ',' << r.total << '\n';
    }
    check(bool(out), ErrorCode::Io, "failed writing loss trace");
}

} // namespace segwild
