// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/image_io.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace segwild {

namespace {

png_uint_32
pngFormat(int channels) {
    switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    }
    fail(ErrorCode::InvalidArgument, "PNG channel count must be 1, 3 or 4");
}

Image8
finishRead(png_image &image, int channels) {
    image.format = pngFormat(channels);
    Image8 img;
    img.width    = static_cast<int>(image.width);
    img.height   = static_cast<int>(image.height);
    img.channels = channels;
    img.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::Format, "PNG decode failed: " + msg);
    }
    return img;
}

} // namespace

Image8
readPng(const std::filesystem::path &path, int channels) {
    if (!std::filesystem::exists(path)) {
        fail(ErrorCode::NotFound, "file not found: " + path.string());
    }
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        fail(ErrorCode::Format, "cannot read PNG " + path.string() + ": " + image.message);
    }
    return finishRead(image, channels);
}

Image8
decodePng(const std::vector<std::uint8_t> &bytes, int channels) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        fail(ErrorCode::Format, std::string("cannot decode PNG: ") + image.message);
    }
    return finishRead(image, channels);
}

std::vector<std::uint8_t>
encodePng(const Image8 &img) {
    check(img.pixels.size() == std::size_t(img.width) * img.height * img.channels,
          ErrorCode::InvalidArgument, "image buffer size mismatch");
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width   = static_cast<png_uint_32>(img.width);
    image.height  = static_cast<png_uint_32>(img.height);
    image.format  = pngFormat(img.channels);

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
        fail(ErrorCode::Runtime, std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
        fail(ErrorCode::Runtime, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

void
writePng(const Image8 &img, const std::filesystem::path &path) {
    const auto bytes = encodePng(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::Io, "cannot write " + path.string());
    }
}

Bitmap
bitmapFromImage(const Image8 &gray, double threshold) {
    check(gray.channels == 1, ErrorCode::InvalidArgument, "mask image must be grayscale");
    Bitmap mask(gray.height, gray.width);
    const double cut = threshold * 255.0;
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            mask.set(y, x, gray.pixels[std::size_t(y) * gray.width + x] >= cut);
        }
    }
    return mask;
}

Image8
bitmapToImage(const Bitmap &mask) {
    Image8 img{mask.width(), mask.height(), 1, {}};
    img.pixels.resize(mask.bits().size());
    std::transform(mask.bits().begin(), mask.bits().end(), img.pixels.begin(),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
    return img;
}

Bitmap
loadMaskPng(const std::filesystem::path &path, double threshold) {
    return bitmapFromImage(readPng(path, 1), threshold);
}

void
saveMaskPng(const Bitmap &mask, const std::filesystem::path &path) {
    writePng(bitmapToImage(mask), path);
}

Image8
colorToImage(const FeatureMap &color) {
    check(color.channels() == 3, ErrorCode::DimensionMismatch, "color map must have 3 channels");
    Image8 img{color.width(), color.height(), 3, {}};
    img.pixels.resize(color.data().size());
    for (std::size_t i = 0; i < color.data().size(); ++i) {
        const double v = std::clamp(double(color.data()[i]), 0.0, 1.0);
        img.pixels[i]  = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

Image8
scalarToImage(const FeatureMap &map, double lo, double hi) {
    check(map.channels() == 1, ErrorCode::DimensionMismatch, "scalar map must have 1 channel");
    Image8 img{map.width(), map.height(), 1, {}};
    img.pixels.resize(map.data().size());
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < map.data().size(); ++i) {
        const double v = std::clamp((double(map.data()[i]) - lo) / span, 0.0, 1.0);
        img.pixels[i]  = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

} // namespace segwild
