#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mtlprune/autodiff.hpp"

namespace mtlprune {

struct ConvGeometry {
    int stride = 1;
    int padding = 0;
    int dilation = 1;
};

/// Output extent of a convolution along one axis; throws ShapeError when it is not positive.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, const ConvGeometry& geometry);

/// Cross-correlation of [N,Cin,H,W] input with [Cout,Cin,k,k] weights plus per-channel bias.
template <typename Real>
Var<Real> conv2d(Var<Real> input, Var<Real> weight, Var<Real> bias, const ConvGeometry& geometry);

template <typename Real>
Var<Real> relu(Var<Real> x);

/// Windowed max over [N,C,H,W]. Backward routes to the first maximal element in the window.
template <typename Real>
Var<Real> maxpool2d(Var<Real> x, int kernel, int stride);

/// Per-channel batch normalization using the statistics of this batch.
/// Writes the batch mean and biased variance to the optional outputs.
template <typename Real>
Var<Real> batch_norm_train(Var<Real> x, Var<Real> gamma, Var<Real> beta, double eps,
                           std::vector<Real>* batch_mean = nullptr, std::vector<Real>* batch_var = nullptr);

/// Per-channel affine normalization with fixed statistics (inference mode).
template <typename Real>
Var<Real> batch_norm_eval(Var<Real> x, Var<Real> gamma, Var<Real> beta, std::span<const Real> mean,
                          std::span<const Real> var, double eps);

template <typename Real>
Var<Real> concat_channels(std::span<const Var<Real>> parts);

/// Nearest-neighbour upsampling of [N,C,H,W] by an integer factor.
template <typename Real>
Var<Real> upsample_nearest(Var<Real> x, int factor);

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b);

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor);

/// Sum of all elements, as a shape-[1] scalar.
template <typename Real>
Var<Real> sum(Var<Real> x);

/// Elementwise product of two recorded values.
template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b);

/// Elementwise product with a constant tensor.
template <typename Real>
Var<Real> mul_const(Var<Real> x, const Tensor<Real>& c);

}  // namespace mtlprune
