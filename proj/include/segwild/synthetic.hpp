// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic scenes with known labels: flat Gaussian clusters viewed
// from an arc of cameras that never lets one cluster hide another. Teacher
// features are the rendered one-hot label plus Gaussian noise; each view's
// mask bank holds the rendered coverage of every label. Optional "spikes"
// are elongated Gaussians that carry a cluster's label in the teacher and
// the priors but poke out of its ground-truth and prompt masks.
//
#pragma once

#include <segwild/feature_field.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace segwild {

struct SyntheticCluster {
    Vec3 center   = Vec3::Zero();
    double spread = 0.6;
    int count     = 30;
    int label     = 0;
    int spikes    = 0;
};

struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::vector<SyntheticCluster> clusters;
    int featureDim = 16;
    int views      = 4;
    int width = 64, height = 64;
    double focal      = 64.0;
    double distance   = 4.0;
    /// Total elevation sweep of the camera arc, centered on the +z axis.
    double arcDegrees = 60.0;
    double noiseSigma = 0.01;
    double opacity    = 0.6;
    double gaussianScale = 0.07;
    /// Alpha cut of the mask-bank priors. Low enough that every covered
    /// pixel belongs to its cluster's mask, as a full-object mask would.
    double bankAlphaCut = 0.005;

    void validate() const;

    /// Two clusters side by side along x.
    static SyntheticSpec twoCluster(std::uint64_t seed = 7, int spikesPerCluster = 0);
};

struct SyntheticData {
    GaussianScene scene;
    /// Label of every Gaussian (spikes included).
    std::vector<int> labels;
    std::vector<std::uint8_t> spike;
    std::vector<std::string> viewIds;
    std::vector<TrainingView> views;
    /// gtMasks[view][cluster]: core Gaussians of the cluster rendered and
    /// cut at alpha 0.5.
    std::vector<std::vector<Bitmap>> gtMasks;
    /// Per cluster: coverage of its core in the first view, the 2D mask used
    /// to gate selection and drive the cutter.
    std::vector<Bitmap> promptMasks;

    std::vector<std::size_t> labelIndices(int label) const;
    /// Indices of the non-spike Gaussians of a label.
    std::vector<std::size_t> coreIndices(int label) const;
};

SyntheticData generateSynthetic(const SyntheticSpec &spec);

struct SyntheticWriteOptions {
    bool train = true;
    TrainConfig trainConfig;
    bool useSgc = true;
};

/// Writes the scene (trained when requested), cameras, teacher maps, mask
/// banks, ground truth, a views.json training manifest and a benchmark
/// manifest with one single-click case per cluster. Returns the manifest.
nlohmann::json writeSyntheticBenchmark(const SyntheticSpec &spec, const std::filesystem::path &dir,
                                       const SyntheticWriteOptions &options = {});

} // namespace segwild
