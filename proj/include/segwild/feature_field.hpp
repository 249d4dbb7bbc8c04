// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Affinity-feature distillation. Geometry is frozen, so rendered features
// are linear in the affinities: fe(p) = sum_i w_i(p) af_i with the
// compositing weights of the tile renderer. The objective is
//
//   L   = lambdaFe * L_FE + lambdaCom * L_Com
//   L_FE  = mean over views of mean_{p,c} |fe(p,c) - teacher(p,c)|
//   L_Com = mean over sampled pairs of S (1 - C) + (1 - S) C
//
// with S the mask IoU similarity and C = max(0, cos(fe(p_i), fe(p_j))).
//
#pragma once

#include <segwild/render.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace segwild {

inline constexpr double kMaskIouEpsilon = 1e-5;

struct TrainConfig {
    int iterations      = 2000;
    double learningRate = 2.5e-3;
    double lambdaFe     = 0.7;
    double lambdaCom    = 0.3;
    int pairsPerIter    = 4096;
    std::uint64_t rngSeed = 0;
    double beta1   = 0.9;
    double beta2   = 0.999;
    double epsilon = 1e-8;
    unsigned threads = 0;

    void validate() const;

    /// Keys: iterations, learning_rate, lambda_fe, lambda_com,
    /// pairs_per_iter, seed, threads. Missing keys keep `base` values.
    static TrainConfig fromJson(const nlohmann::json &j, TrainConfig base);
    static TrainConfig fromJson(const nlohmann::json &j) { return fromJson(j, TrainConfig()); }
};

struct TrainingView {
    Camera camera;
    FeatureMap teacher;
    MaskBank masks;
};

struct PixelPair {
    int view = 0;
    Pixel a, b;
    double similarity = 0.0;
};

/// |M_a n M_b| / (|M_a u M_b| + eps) over the finest masks assigned to the
/// two pixels; 0 when either pixel is unassigned.
double maskIouSimilarity(const MaskBank &bank, Pixel a, Pixel b);

/// max(0, cos) of the feature vectors at two pixels; 0 for a zero vector.
template <class T> double featureCosine(const BasicFeatureMap<T> &fe, Pixel a, Pixel b);

/// Mean absolute difference over all pixel-channels.
double lossFe(const FeatureMap &teacher, const FeatureMap &rendered);

/// Pairs are read from `rendered` regardless of their view index.
double lossCom(const FeatureMap &rendered, std::span<const PixelPair> pairs);

/// Bilinear resampling with pixel-center alignment.
FeatureMap resampleBilinear(const FeatureMap &map, int height, int width);

struct LossRecord {
    int iteration = 0;
    double lossFe = 0.0, lossCom = 0.0, total = 0.0;
};

/// Objective over fixed views with precomputed compositing weights.
/// Affinities are passed flat, Gaussian-major (N x C).
class FeatureObjective {
  public:
    FeatureObjective(const GaussianScene &scene, std::vector<TrainingView> views,
                     const TrainConfig &cfg);

    std::size_t gaussianCount() const noexcept { return mGaussians; }
    std::size_t featureDim() const noexcept { return mChannels; }
    std::size_t viewCount() const noexcept { return mViews.size(); }
    const TrainingView &view(std::size_t v) const { return mViews[v]; }
    const PixelWeights &weights(std::size_t v) const { return mWeights[v]; }

    FeatureMapD render(std::span<const double> affinity, std::size_t view) const;

    /// pairsPerIter pairs: a uniform view, then two uniform pixels in it.
    std::vector<PixelPair> samplePairs(std::mt19937_64 &rng, int count) const;

    struct Evaluation {
        double lossFe = 0.0, lossCom = 0.0, total = 0.0;
        std::vector<double> gradient;
    };
    /// Loss and its exact gradient w.r.t. every affinity component. An empty
    /// pair set drops the L_Com term.
    Evaluation evaluate(std::span<const double> affinity, std::span<const PixelPair> pairs,
                        bool withGradient = true) const;

  private:
    std::size_t mGaussians = 0, mChannels = 0;
    double mLambdaFe = 0.0, mLambdaCom = 0.0;
    std::vector<TrainingView> mViews;
    std::vector<PixelWeights> mWeights;
};

std::vector<double> flattenAffinity(const GaussianScene &scene);
void assignAffinity(GaussianScene &scene, std::span<const double> affinity);

struct TrainResult {
    GaussianScene scene;
    std::vector<LossRecord> trace;
};

/// Called after every iteration; returning false stops training early.
using TrainProgress = std::function<bool(const LossRecord &)>;

/// Adam on the affinities only; deterministic for a given rngSeed.
TrainResult trainFeatureField(const GaussianScene &scene, std::vector<TrainingView> views,
                              const TrainConfig &cfg, const TrainProgress &progress = {});

struct PcaModel;

/// Views manifest: {views: [{camera, teacher, masks}]} with paths relative to
/// the manifest. Teachers are compressed with `pca` when given.
std::vector<TrainingView> loadTrainingViews(const std::filesystem::path &manifest,
                                            const PcaModel *pca = nullptr);

void writeLossTraceCsv(std::span<const LossRecord> trace, const std::filesystem::path &path);

} // namespace segwild
