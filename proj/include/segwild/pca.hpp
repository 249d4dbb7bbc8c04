// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// Linear compression of teacher features. The decoder is the transpose map
// mean + basis * code, which is the optimal linear decoder for the fit.
//
// PCAM file: "PCAM" u32 in u32 out u32 flags, float64 mean[in],
// float64 basis[in*out] column-major, float64 variance[out].
//
#pragma once

#include <segwild/scene.hpp>

#include <Eigen/Core>

#include <filesystem>

namespace segwild {

struct PcaModel {
    Eigen::VectorXd mean;
    /// in x out, orthonormal columns ordered by decreasing variance.
    Eigen::MatrixXd basis;
    /// Per-component variance (1/n normalization).
    Eigen::VectorXd variance;
    /// Fewer than `out` directions carried variance; the basis tail is an
    /// arbitrary orthonormal completion.
    bool rankDeficient = false;

    int inputDim() const { return static_cast<int>(basis.rows()); }
    int outputDim() const { return static_cast<int>(basis.cols()); }
};

/// One sample per row. Requires at least outputDim samples.
PcaModel fitPca(const Eigen::MatrixXd &samples, int outputDim = static_cast<int>(kDefaultFeatureDim));

Eigen::VectorXd compress(const PcaModel &model, const Eigen::VectorXd &x);
Eigen::VectorXd decompress(const PcaModel &model, const Eigen::VectorXd &code);

/// Applies compress to every pixel.
FeatureMap compressFeatureMap(const PcaModel &model, const FeatureMap &map);

/// Stacks up to maxSamples pixels drawn with a fixed stride across maps.
Eigen::MatrixXd samplePixels(std::span<const FeatureMap> maps, std::size_t maxSamples = 100000);

void savePca(const PcaModel &model, const std::filesystem::path &path);
PcaModel loadPca(const std::filesystem::path &path);

} // namespace segwild
