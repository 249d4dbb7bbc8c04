// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
#include <segwild/segmenter.hpp>

#include <algorithm>
#include <cmath>

namespace segwild {

void
PromptSet::validate() const {
    view.validate();
    check(!points.empty(), ErrorCode::InvalidArgument, "prompt set has no points");
    for (const Vec2 &p : points) {
        check(promptInImage(p.x(), p.y(), view.width, view.height), ErrorCode::InvalidArgument, "prompt point outside the image");
    }
    if (mask) {
        check(mask->height() == view.height && mask->width() == view.width,
              ErrorCode::DimensionMismatch, "prompt mask size differs from the view");
    }
}

Eigen::MatrixXd
promptSimilarity(const GaussianScene &scene, const PromptSet &prompts,
                 const RenderOptions &options) {
    prompts.validate();
    const int C           = static_cast<int>(scene.featureDim());
    const RenderOutput fe = renderPayload(scene, prompts.view, PayloadSelector::affinity(), options);

    // Clicks on the same pixel query the same feature; keeping both would
    // double that prompt's softmax weight.
    std::vector<Pixel> pixels;
    for (const Vec2 &p : prompts.points) {
        const Pixel px = promptPixel(p.x(), p.y(), prompts.view.width, prompts.view.height);
        if (std::find(pixels.begin(), pixels.end(), px) == pixels.end()) {
            pixels.push_back(px);
        }
    }

    Eigen::MatrixXd query(pixels.size(), C);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const auto f = fe.payload.pixel(pixels[i].y, pixels[i].x);
        for (int c = 0; c < C; ++c) {
            query(i, c) = f[c];
        }
        const double n = query.row(i).norm();
        if (n > 0.0) {
            query.row(i) /= n;
        }
    }

    Eigen::MatrixXd af(C, scene.size());
    for (std::size_t g = 0; g < scene.size(); ++g) {
        for (int c = 0; c < C; ++c) {
            af(c, g) = scene[g].affinity[c];
        }
        const double n = af.col(g).norm();
        if (n > 0.0) {
            af.col(g) /= n;
        }
    }
    return query * af;
}

std::vector<double>
fuseSimilarity(const Eigen::MatrixXd &s) {
    check(s.rows() >= 1, ErrorCode::InvalidArgument, "fusion needs at least one prompt");
    std::vector<double> fused(s.cols());
    for (Eigen::Index g = 0; g < s.cols(); ++g) {
        const double top = s.col(g).maxCoeff();
        double z = 0.0, acc = 0.0;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            const double e = std::exp(s(i, g) - top);
            z += e;
            acc += e * s(i, g);
        }
        fused[g] = acc / z;
    }
    return fused;
}

nlohmann::json
SegmentationResult::toJson() const {
    return {{"indices", selected},
            {"tau", tau},
            {"prompt_view", promptId},
            {"n_prompts", promptCount},
            {"mask_source", maskSource}};
}

SegmentationResult
selectGaussians(const GaussianScene &scene, const PromptSet &prompts, std::span<const double> fused,
                double tau) {
    check(tau > 0.0 && tau < 1.0, ErrorCode::InvalidArgument, "tau must lie in (0, 1)");
    check(fused.size() == scene.size(), ErrorCode::DimensionMismatch,
          "one fused score per Gaussian expected");
    SegmentationResult res;
    res.fused.assign(fused.begin(), fused.end());
    res.tau         = tau;
    res.promptId    = prompts.id;
    res.maskSource  = prompts.mask ? prompts.maskSource : "none";
    res.promptCount = prompts.points.size();
    for (std::size_t g = 0; g < scene.size(); ++g) {
        if (!(fused[g] > tau)) {
            continue;
        }
        if (prompts.mask) {
            const Vec3 pc = prompts.view.toCamera(scene[g].position.cast<double>());
            if (!(pc.z() > render::kNearPlane)) {
                continue;
            }
            const Vec2 uv = prompts.view.projectCamera(pc);
            if (!prompts.mask->contains(nearestPixel(uv.x(), uv.y()))) {
                continue;
            }
        }
        res.selected.push_back(g);
    }
    return res;
}

SegmentationResult
segment(const GaussianScene &scene, const PromptSet &prompts, double tau,
        const RenderOptions &options) {
    const auto fused = fuseSimilarity(promptSimilarity(scene, prompts, options));
    return selectGaussians(scene, prompts, fused, tau);
}

Bitmap
maskFromBank(const MaskBank &bank, std::span<const Vec2> points) {
    int best = MaskBank::kNone;
    std::size_t bestHits = 0;
    for (std::size_t m = 0; m < bank.masks.size(); ++m) {
        std::size_t hits = 0;
        for (const Vec2 &p : points) {
            hits += promptInImage(p.x(), p.y(), bank.width, bank.height) &&
                            bank.masks[m].contains(promptPixel(p.x(), p.y(), bank.width, bank.height))
                        ? 1
                        : 0;
        }
        if (hits == 0) {
            continue;
        }
        if (best == MaskBank::kNone || hits > bestHits ||
            (hits == bestHits && bank.areas[m] < bank.areas[best])) {
            best     = static_cast<int>(m);
            bestHits = hits;
        }
    }
    if (best == MaskBank::kNone) {
        return Bitmap(bank.height, bank.width);
    }
    return bank.masks[best];
}

Bitmap
rasterizePolygon(int height, int width, std::span<const Vec2> vertices) {
    check(vertices.size() >= 3, ErrorCode::InvalidArgument, "polygon needs at least 3 vertices");
    Bitmap mask(height, width);
    const std::size_t n = vertices.size();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            bool inside = false;
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const Vec2 &a = vertices[i];
                const Vec2 &b = vertices[j];
                if ((a.y() > y) != (b.y() > y) &&
                    x < (b.x() - a.x()) * (y - a.y()) / (b.y() - a.y()) + a.x()) {
                    inside = !inside;
                }
            }
            mask.set(y, x, inside);
        }
    }
    return mask;
}

} // namespace segwild
