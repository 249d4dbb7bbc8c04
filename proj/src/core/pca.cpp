// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/pca.hpp>

#include <Eigen/Eigenvalues>

#include <cstring>
#include <fstream>

namespace segwild {

namespace {

constexpr std::uint32_t kRankDeficientFlag = 1;

// Eigenvalues below this fraction of the largest count as zero variance.
constexpr double kRankTolerance = 1e-10;

void
writeU32(std::ostream &out, std::uint32_t v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(v));
}

std::uint32_t
readU32(std::istream &in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char *>(&v), sizeof(v));
    check(in.gcount() == sizeof(v), ErrorCode::Format, "truncated PCA header");
    return v;
}

} // namespace

PcaModel
fitPca(const Eigen::MatrixXd &samples, int outputDim) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();
    check(outputDim >= 1 && outputDim <= d, ErrorCode::InvalidArgument,
          "PCA output dimension must lie in [1, input dimension]");
    check(n >= outputDim, ErrorCode::InvalidArgument,
          "PCA needs at least as many samples as output dimensions");
    check(samples.allFinite(), ErrorCode::Validation, "non-finite PCA sample");

    PcaModel model;
    model.mean                   = samples.colwise().mean().transpose();
    const Eigen::MatrixXd center = samples.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov    = (center.transpose() * center) / double(n);

    // Ascending eigenvalues; the columns taken from the back are orthonormal
    // even where the spectrum is zero, which is the completion we report.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    check(solver.info() == Eigen::Success, ErrorCode::Runtime, "PCA eigensolver failed");
    model.basis.resize(d, outputDim);
    model.variance.resize(outputDim);
    for (int k = 0; k < outputDim; ++k) {
        model.basis.col(k)  = solver.eigenvectors().col(d - 1 - k);
        model.variance[k]   = std::max(0.0, solver.eigenvalues()[d - 1 - k]);
    }
    const double top    = std::max(solver.eigenvalues()[d - 1], 0.0);
    model.rankDeficient = top <= 0.0 || model.variance[outputDim - 1] <= kRankTolerance * top;
    return model;
}

Eigen::VectorXd
compress(const PcaModel &model, const Eigen::VectorXd &x) {
    check(x.size() == model.inputDim(), ErrorCode::DimensionMismatch, "PCA input dimension mismatch");
    return model.basis.transpose() * (x - model.mean);
}

Eigen::VectorXd
decompress(const PcaModel &model, const Eigen::VectorXd &code) {
    check(code.size() == model.outputDim(), ErrorCode::DimensionMismatch,
          "PCA code dimension mismatch");
    return model.mean + model.basis * code;
}

FeatureMap
compressFeatureMap(const PcaModel &model, const FeatureMap &map) {
    check(map.channels() == model.inputDim(), ErrorCode::DimensionMismatch,
          "feature map channels differ from the PCA input dimension");
    FeatureMap out(map.height(), map.width(), model.outputDim());
    Eigen::VectorXd x(model.inputDim());
    for (int y = 0; y < map.height(); ++y) {
        for (int xx = 0; xx < map.width(); ++xx) {
            const auto px = map.pixel(y, xx);
            for (int c = 0; c < model.inputDim(); ++c) {
                x[c] = px[c];
            }
            const Eigen::VectorXd code = compress(model, x);
            auto dst                   = out.pixel(y, xx);
            for (int c = 0; c < model.outputDim(); ++c) {
                dst[c] = static_cast<float>(code[c]);
            }
        }
    }
    return out;
}

Eigen::MatrixXd
samplePixels(std::span<const FeatureMap> maps, std::size_t maxSamples) {
    check(!maps.empty(), ErrorCode::InvalidArgument, "no feature maps to sample");
    const int channels = maps.front().channels();
    std::size_t total  = 0;
    for (const FeatureMap &m : maps) {
        check(m.channels() == channels, ErrorCode::DimensionMismatch,
              "feature maps disagree on channel count");
        total += m.pixelCount();
    }
    const std::size_t stride = std::max<std::size_t>(1, (total + maxSamples - 1) / maxSamples);

    Eigen::MatrixXd rows((total + stride - 1) / stride, channels);
    std::size_t global = 0, row = 0;
    for (const FeatureMap &m : maps) {
        for (std::size_t p = 0; p < m.pixelCount(); ++p, ++global) {
            if (global % stride != 0) {
                continue;
            }
            for (int c = 0; c < channels; ++c) {
                rows(row, c) = m.data()[p * channels + c];
            }
            ++row;
        }
    }
    return rows.topRows(row);
}

void
savePca(const PcaModel &model, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(bool(out), ErrorCode::Io, "cannot open PCA file for writing");
    out.write("PCAM", 4);
    writeU32(out, static_cast<std::uint32_t>(model.inputDim()));
    writeU32(out, static_cast<std::uint32_t>(model.outputDim()));
    writeU32(out, model.rankDeficient ? kRankDeficientFlag : 0u);
    out.write(reinterpret_cast<const char *>(model.mean.data()),
              static_cast<std::streamsize>(model.mean.size() * sizeof(double)));
    out.write(reinterpret_cast<const char *>(model.basis.data()),
              static_cast<std::streamsize>(model.basis.size() * sizeof(double)));
    out.write(reinterpret_cast<const char *>(model.variance.data()),
              static_cast<std::streamsize>(model.variance.size() * sizeof(double)));
    check(bool(out), ErrorCode::Io, "failed writing PCA file");
}

PcaModel
loadPca(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::NotFound, "cannot open PCA file " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    check(in.gcount() == 4 && std::memcmp(magic, "PCAM", 4) == 0, ErrorCode::Format,
          "bad magic in PCA file");
    const std::uint32_t d     = readU32(in);
    const std::uint32_t k     = readU32(in);
    const std::uint32_t flags = readU32(in);
    check(d >= 1 && k >= 1 && k <= d && d <= (1u << 16), ErrorCode::Format,
          "invalid PCA dimensions");

    PcaModel model;
    model.mean.resize(d);
    model.basis.resize(d, k);
    model.variance.resize(k);
    model.rankDeficient = (flags & kRankDeficientFlag) != 0;
    const auto readDoubles = [&](double *dst, std::size_t count) {
        in.read(reinterpret_cast<char *>(dst), static_cast<std::streamsize>(count * sizeof(double)));
        check(static_cast<std::size_t>(in.gcount()) == count * sizeof(double), ErrorCode::Format,
              "truncated PCA payload");
    };
    readDoubles(model.mean.data(), d);
    readDoubles(model.basis.data(), std::size_t(d) * k);
    readDoubles(model.variance.data(), k);
    return model;
}

} // namespace segwild
