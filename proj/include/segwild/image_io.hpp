// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <segwild/scene.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segwild {

/// 8-bit image, interleaved channels (1 = gray, 3 = RGB).
struct Image8 {
    int width = 0, height = 0, channels = 1;
    std::vector<std::uint8_t> pixels;
};

Image8 readPng(const std::filesystem::path &path, int channels);
void writePng(const Image8 &img, const std::filesystem::path &path);
std::vector<std::uint8_t> encodePng(const Image8 &img);
Image8 decodePng(const std::vector<std::uint8_t> &bytes, int channels);

/// Grayscale values >= threshold*255 become 1.
Bitmap bitmapFromImage(const Image8 &gray, double threshold = 0.5);
Image8 bitmapToImage(const Bitmap &mask);

Bitmap loadMaskPng(const std::filesystem::path &path, double threshold = 0.5);
void saveMaskPng(const Bitmap &mask, const std::filesystem::path &path);

/// Color map (C = 3, values in [0, 1]) to RGB, clamped.
Image8 colorToImage(const FeatureMap &color);
/// Single channel mapped linearly from [lo, hi] to gray.
Image8 scalarToImage(const FeatureMap &map, double lo, double hi);

} // namespace segwild
