// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/metrics.hpp>

namespace segwild {

namespace {

void
checkSameSize(const Bitmap &a, const Bitmap &b) {
    check(a.height() == b.height() && a.width() == b.width(), ErrorCode::DimensionMismatch,
          "masks differ in size");
}

} // namespace

double
iou(const Bitmap &pred, const Bitmap &gt) {
    checkSameSize(pred, gt);
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < pred.bits().size(); ++k) {
        inter += pred.bits()[k] & gt.bits()[k];
        uni += pred.bits()[k] | gt.bits()[k];
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

double
accuracy(const Bitmap &pred, const Bitmap &gt) {
    checkSameSize(pred, gt);
    if (pred.bits().empty()) {
        return 1.0;
    }
    std::size_t same = 0;
    for (std::size_t k = 0; k < pred.bits().size(); ++k) {
        same += pred.bits()[k] == gt.bits()[k] ? 1 : 0;
    }
    return double(same) / double(pred.bits().size());
}

Bitmap
alphaMask(const GaussianScene &scene, const Camera &cam, double alphaCut,
          const RenderOptions &options) {
    const RenderOutput out = renderPayload(scene, cam, PayloadSelector::constant(), options);
    Bitmap mask(cam.height, cam.width);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            mask.set(y, x, out.alpha.at(y, x) > alphaCut);
        }
    }
    return mask;
}

Bitmap
segmentationToMask(const GaussianScene &scene, const SegmentationResult &result, const Camera &cam,
                   double alphaCut, const RenderOptions &options) {
    return alphaMask(scene.subset(result.selected), cam, alphaCut, options);
}

} // namespace segwild
