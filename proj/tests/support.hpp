#pragma once

// Shared helpers for the test binaries: random inputs and independent
// direct-loop oracles that do not go through the library kernels.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mtlprune/model.hpp"
#include "mtlprune/multitask.hpp"
#include "mtlprune/tensor.hpp"

namespace mtlprune::testing {

template <typename Real>
Tensor<Real> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<Real> t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
    return t;
}

// Quadruple loop cross-correlation in double.
template <typename Real>
std::vector<double> naive_conv2d(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b, int stride,
                                 int pad, int dil, std::size_t& ho, std::size_t& wo) {
    const long n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0), k = w.dim(2);
    ho = static_cast<std::size_t>((h + 2 * pad - dil * (k - 1) - 1) / stride + 1);
    wo = static_cast<std::size_t>((wd + 2 * pad - dil * (k - 1) - 1) / stride + 1);
    std::vector<double> out(static_cast<std::size_t>(n * cout) * ho * wo);
    for (long i = 0; i < n; ++i)
        for (long co = 0; co < cout; ++co)
            for (long oh = 0; oh < static_cast<long>(ho); ++oh)
                for (long ow = 0; ow < static_cast<long>(wo); ++ow) {
                    double acc = b[static_cast<std::size_t>(co)];
                    for (long ci = 0; ci < cin; ++ci)
                        for (long ki = 0; ki < k; ++ki)
                            for (long kj = 0; kj < k; ++kj) {
                                const long ih = oh * stride - pad + ki * dil;
                                const long iw = ow * stride - pad + kj * dil;
                                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                                acc += static_cast<double>(x.at(i, ci, ih, iw)) *
                                       w.at(co, ci, ki, kj);
                            }
                    out[((i * cout + co) * ho + oh) * wo + ow] = acc;
                }
    return out;
}

// Random batch with valid labels for every task kind.
template <typename Real>
Batch<Real> random_batch(std::size_t n, std::size_t h, std::size_t w, int classes, std::mt19937_64& rng) {
    Batch<Real> b;
    b.images = random_tensor<Real>({n, 3, h, w}, rng, 0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, classes - 1);
    b.seg.resize(n * h * w);
    for (auto& v : b.seg) v = cls(rng);
    b.depth = random_tensor<Real>({n, 1, h, w}, rng, 0.1, 1.0);
    b.normals = Tensor<Real>({n, 3, h, w});
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < h * w; ++p) {
            double v[3] = {g(rng), g(rng), std::abs(g(rng)) + 0.5};
            const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            for (std::size_t k = 0; k < 3; ++k) b.normals[(i * 3 + k) * h * w + p] = static_cast<Real>(v[k] / norm);
        }
    return b;
}

// Small three-task model used where the desk model would make finite differences slow.
inline ModelSpec tiny_model_spec(bool normalization = false) {
    ModelSpec spec;
    spec.backbone.input_channels = 3;
    spec.backbone.layers = {ConvLayerSpec{3, 3, 1, 1, 1, true}, ConvLayerSpec{4, 3, 1, 1, 1, false}};
    spec.heads = {HeadSpec{TaskKind::segmentation, {1, 2}, 2, 3}, HeadSpec{TaskKind::depth, {1, 2}, 2, 1},
                  HeadSpec{TaskKind::normals, {1, 2}, 2, 3}};
    spec.input_height = 8;
    spec.input_width = 8;
    spec.normalization = normalization;
    return spec;
}

}  // namespace mtlprune::testing
