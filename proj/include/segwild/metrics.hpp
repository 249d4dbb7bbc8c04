// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <segwild/segmenter.hpp>

namespace segwild {

inline constexpr double kDefaultAlphaCut = 0.5;

/// |pred n gt| / |pred u gt|; 1 when both masks are empty.
double iou(const Bitmap &pred, const Bitmap &gt);

/// Fraction of pixels on which the masks agree.
double accuracy(const Bitmap &pred, const Bitmap &gt);

/// Pixels where the accumulated opacity of `scene` exceeds alphaCut.
Bitmap alphaMask(const GaussianScene &scene, const Camera &cam,
                 double alphaCut = kDefaultAlphaCut, const RenderOptions &options = {});

/// alphaMask of the selected subset.
Bitmap segmentationToMask(const GaussianScene &scene, const SegmentationResult &result,
                          const Camera &cam, double alphaCut = kDefaultAlphaCut,
                          const RenderOptions &options = {});

} // namespace segwild
