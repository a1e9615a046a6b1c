#include "mtlprune/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mtlprune/error.hpp"

namespace mtlprune {

namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
    if (shape.size() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(shape));
    }
}

struct ConvDims {
    std::size_t n, cin, h, w, cout, k, ho, wo;
    ConvGeometry g;
    std::size_t rows() const { return cin * k * k; }
    std::size_t pixels() const { return ho * wo; }
};

// cols[r, p] with r = (c*k + ki)*k + kj and p = oh*wo + ow.
template <typename Real>
void im2col(const Real* image, const ConvDims& d, Real* cols) {
    const long stride = d.g.stride, pad = d.g.padding, dil = d.g.dilation;
    for (std::size_t c = 0; c < d.cin; ++c) {
        const Real* plane = image + c * d.h * d.w;
        for (std::size_t ki = 0; ki < d.k; ++ki) {
            for (std::size_t kj = 0; kj < d.k; ++kj) {
                Real* row = cols + ((c * d.k + ki) * d.k + kj) * d.pixels();
                for (std::size_t oh = 0; oh < d.ho; ++oh) {
                    const long ih = static_cast<long>(oh) * stride - pad + static_cast<long>(ki) * dil;
                    Real* out = row + oh * d.wo;
                    if (ih < 0 || ih >= static_cast<long>(d.h)) {
                        std::fill(out, out + d.wo, Real(0));
                        continue;
                    }
                    const Real* in_row = plane + ih * d.w;
                    for (std::size_t ow = 0; ow < d.wo; ++ow) {
                        const long iw = static_cast<long>(ow) * stride - pad + static_cast<long>(kj) * dil;
                        out[ow] = (iw < 0 || iw >= static_cast<long>(d.w)) ? Real(0) : in_row[iw];
                    }
                }
            }
        }
    }
}

// Transposed layout colsT[p, r], used for the weight gradient.
template <typename Real>
void im2col_transposed(const Real* image, const ConvDims& d, Real* cols_t) {
    const long stride = d.g.stride, pad = d.g.padding, dil = d.g.dilation;
    const std::size_t rows = d.rows();
    for (std::size_t oh = 0; oh < d.ho; ++oh) {
        for (std::size_t ow = 0; ow < d.wo; ++ow) {
            Real* out = cols_t + (oh * d.wo + ow) * rows;
            std::size_t r = 0;
            for (std::size_t c = 0; c < d.cin; ++c) {
                const Real* plane = image + c * d.h * d.w;
                for (std::size_t ki = 0; ki < d.k; ++ki) {
                    const long ih = static_cast<long>(oh) * stride - pad + static_cast<long>(ki) * dil;
                    const bool row_ok = ih >= 0 && ih < static_cast<long>(d.h);
                    for (std::size_t kj = 0; kj < d.k; ++kj, ++r) {
                        const long iw = static_cast<long>(ow) * stride - pad + static_cast<long>(kj) * dil;
                        out[r] = (row_ok && iw >= 0 && iw < static_cast<long>(d.w)) ? plane[ih * d.w + iw]
                                                                                    : Real(0);
                    }
                }
            }
        }
    }
}

template <typename Real>
void col2im_add(const Real* cols, const ConvDims& d, Real* image_grad) {
    const long stride = d.g.stride, pad = d.g.padding, dil = d.g.dilation;
    for (std::size_t c = 0; c < d.cin; ++c) {
        Real* plane = image_grad + c * d.h * d.w;
        for (std::size_t ki = 0; ki < d.k; ++ki) {
            for (std::size_t kj = 0; kj < d.k; ++kj) {
                const Real* row = cols + ((c * d.k + ki) * d.k + kj) * d.pixels();
                for (std::size_t oh = 0; oh < d.ho; ++oh) {
                    const long ih = static_cast<long>(oh) * stride - pad + static_cast<long>(ki) * dil;
                    if (ih < 0 || ih >= static_cast<long>(d.h)) continue;
                    Real* out_row = plane + ih * d.w;
                    const Real* in = row + oh * d.wo;
                    for (std::size_t ow = 0; ow < d.wo; ++ow) {
                        const long iw = static_cast<long>(ow) * stride - pad + static_cast<long>(kj) * dil;
                        if (iw >= 0 && iw < static_cast<long>(d.w)) out_row[iw] += in[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, const ConvGeometry& g) {
    if (kernel < 1) throw ShapeError("conv2d: kernel size must be >= 1");
    if (g.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (g.dilation < 1) throw ShapeError("conv2d: dilation must be >= 1");
    if (g.padding < 0) throw ShapeError("conv2d: padding must be >= 0");
    const long span = static_cast<long>(in) + 2L * g.padding - static_cast<long>(g.dilation) * (static_cast<long>(kernel) - 1) - 1;
    if (span < 0) {
        throw ShapeError("conv2d: spatial extent " + std::to_string(in) + " too small for kernel " +
                         std::to_string(kernel) + " with dilation " + std::to_string(g.dilation));
    }
    return static_cast<std::size_t>(span / g.stride) + 1;
}

template <typename Real>
Var<Real> conv2d(Var<Real> input, Var<Real> weight, Var<Real> bias, const ConvGeometry& geometry) {
    Tape<Real>& tape = *input.tape;
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    require_rank(xs, 4, "conv2d input");
    require_rank(ws, 4, "conv2d weight");
    if (ws[1] != xs[1]) {
        throw ShapeError("conv2d: input channel dimension (dim 1) is " + std::to_string(xs[1]) +
                         " but weight expects " + std::to_string(ws[1]));
    }
    if (ws[2] != ws[3]) throw ShapeError("conv2d: kernel must be square, got " + shape_to_string(ws));
    if (bias.shape() != Shape{ws[0]}) {
        throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()) + " does not match " +
                         std::to_string(ws[0]) + " output channels");
    }
    ConvDims d{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], 0, 0, geometry};
    d.ho = conv_output_extent(d.h, d.k, geometry);
    d.wo = conv_output_extent(d.w, d.k, geometry);

    const Real* x = input.value().data().data();
    const Real* w = weight.value().data().data();
    const Real* b = bias.value().data().data();
    Tensor<Real> out({d.n, d.cout, d.ho, d.wo});
    std::vector<Real> cols(d.rows() * d.pixels());
    const std::size_t rows = d.rows(), pixels = d.pixels();
    for (std::size_t n = 0; n < d.n; ++n) {
        im2col(x + n * d.cin * d.h * d.w, d, cols.data());
        Real* o = out.data().data() + n * d.cout * pixels;
        for (std::size_t co = 0; co < d.cout; ++co) {
            Real* orow = o + co * pixels;
            std::fill(orow, orow + pixels, b[co]);
            const Real* wrow = w + co * rows;
            for (std::size_t r = 0; r < rows; ++r) {
                const Real wv = wrow[r];
                const Real* crow = cols.data() + r * pixels;
                for (std::size_t p = 0; p < pixels; ++p) orow[p] += wv * crow[p];
            }
        }
    }

    auto backward = [d, input, weight](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        const std::size_t rows = d.rows(), pixels = d.pixels();
        const Real* x = input.value().data().data();
        const Real* w = weight.value().data().data();
        Tensor<Real>* gx = grads[0];
        Tensor<Real>* gw = grads[1];
        Tensor<Real>* gb = grads[2];
        std::vector<Real> cols;
        if (gw) cols.resize(rows * pixels);
        std::vector<Real> gcols;
        if (gx) gcols.resize(rows * pixels);
        // weight and bias gradients sum over the whole batch; accumulate wide to keep float runs accurate
        std::vector<double> gw_acc(gw ? d.cout * rows : 0), gb_acc(gb ? d.cout : 0);
        for (std::size_t n = 0; n < d.n; ++n) {
            const Real* g = go.data().data() + n * d.cout * pixels;
            if (gb) {
                for (std::size_t co = 0; co < d.cout; ++co) {
                    double acc = 0;
                    const Real* grow = g + co * pixels;
                    for (std::size_t p = 0; p < pixels; ++p) acc += grow[p];
                    gb_acc[co] += acc;
                }
            }
            if (gw) {
                im2col_transposed(x + n * d.cin * d.h * d.w, d, cols.data());
                for (std::size_t co = 0; co < d.cout; ++co) {
                    double* gwrow = gw_acc.data() + co * rows;
                    const Real* grow = g + co * pixels;
                    for (std::size_t p = 0; p < pixels; ++p) {
                        const double gv = grow[p];
                        if (gv == 0.0) continue;
                        const Real* crow = cols.data() + p * rows;
                        for (std::size_t r = 0; r < rows; ++r) gwrow[r] += gv * crow[r];
                    }
                }
            }
            if (gx) {
                std::fill(gcols.begin(), gcols.end(), Real(0));
                for (std::size_t co = 0; co < d.cout; ++co) {
                    const Real* wrow = w + co * rows;
                    const Real* grow = g + co * pixels;
                    for (std::size_t r = 0; r < rows; ++r) {
                        const Real wv = wrow[r];
                        Real* crow = gcols.data() + r * pixels;
                        for (std::size_t p = 0; p < pixels; ++p) crow[p] += wv * grow[p];
                    }
                }
                col2im_add(gcols.data(), d, gx->data().data() + n * d.cin * d.h * d.w);
            }
        }
        for (std::size_t i = 0; i < gw_acc.size(); ++i) (*gw)[i] += static_cast<Real>(gw_acc[i]);
        for (std::size_t i = 0; i < gb_acc.size(); ++i) (*gb)[i] += static_cast<Real>(gb_acc[i]);
    };
    return tape.record(std::move(out), {input.id, weight.id, bias.id}, std::move(backward));
}

template <typename Real>
Var<Real> relu(Var<Real> x) {
    Tensor<Real> out = x.value();
    for (auto& v : out.data()) v = v > Real(0) ? v : Real(0);
    auto backward = [x](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        const auto in = x.value().data();
        auto g = grads[0]->data();
        for (std::size_t i = 0; i < in.size(); ++i) {
            if (in[i] > Real(0)) g[i] += go[i];
        }
    };
    return x.tape->record(std::move(out), {x.id}, std::move(backward));
}

template <typename Real>
Var<Real> maxpool2d(Var<Real> x, int kernel, int stride) {
    const Shape& s = x.shape();
    require_rank(s, 4, "maxpool2d");
    if (kernel < 1 || stride < 1) throw ShapeError("maxpool2d: kernel and stride must be >= 1");
    const std::size_t k = static_cast<std::size_t>(kernel), st = static_cast<std::size_t>(stride);
    if (s[2] < k || s[3] < k) {
        throw ShapeError("maxpool2d: window " + std::to_string(k) + " larger than input " + shape_to_string(s));
    }
    const std::size_t ho = (s[2] - k) / st + 1, wo = (s[3] - k) / st + 1;
    Tensor<Real> out({s[0], s[1], ho, wo});
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
    const Real* in = x.value().data().data();
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < s[0] * s[1]; ++plane) {
        const Real* p = in + plane * s[2] * s[3];
        for (std::size_t oh = 0; oh < ho; ++oh) {
            for (std::size_t ow = 0; ow < wo; ++ow, ++o) {
                std::size_t best = (oh * st) * s[3] + ow * st;
                for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t idx = (oh * st + i) * s[3] + ow * st + j;
                        if (p[idx] > p[best]) best = idx;
                    }
                }
                out[o] = p[best];
                (*argmax)[o] = static_cast<std::uint32_t>(plane * s[2] * s[3] + best);
            }
        }
    }
    auto backward = [argmax](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        auto g = grads[0]->data();
        for (std::size_t i = 0; i < go.numel(); ++i) g[(*argmax)[i]] += go[i];
    };
    return x.tape->record(std::move(out), {x.id}, std::move(backward));
}

template <typename Real>
Var<Real> batch_norm_train(Var<Real> x, Var<Real> gamma, Var<Real> beta, double eps, std::vector<Real>* batch_mean,
                           std::vector<Real>* batch_var) {
    const Shape& s = x.shape();
    require_rank(s, 4, "batch_norm");
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
        throw ShapeError("batch_norm: affine parameters must have shape [" + std::to_string(c) + "]");
    }
    const double m = static_cast<double>(n * hw);
    auto xhat = std::make_shared<Tensor<Real>>(s);
    auto inv_std = std::make_shared<std::vector<double>>(c);
    Tensor<Real> out(s);
    const Real* in = x.value().data().data();
    if (batch_mean) batch_mean->assign(c, Real(0));
    if (batch_var) batch_var->assign(c, Real(0));
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) mean += in[(i * c + ch) * hw + p];
        mean /= m;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
                const double dv = in[(i * c + ch) * hw + p] - mean;
                var += dv * dv;
            }
        var /= m;
        (*inv_std)[ch] = 1.0 / std::sqrt(var + eps);
        if (batch_mean) (*batch_mean)[ch] = static_cast<Real>(mean);
        if (batch_var) (*batch_var)[ch] = static_cast<Real>(var);
        const double gmm = gamma.value()[ch], bt = beta.value()[ch];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t idx = (i * c + ch) * hw + p;
                const double xh = (in[idx] - mean) * (*inv_std)[ch];
                (*xhat)[idx] = static_cast<Real>(xh);
                out[idx] = static_cast<Real>(gmm * xh + bt);
            }
    }
    auto backward = [xhat, inv_std, gamma, n, c, hw, m](const Tensor<Real>& go,
                                                       std::span<Tensor<Real>* const> grads) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < hw; ++p) {
                    const std::size_t idx = (i * c + ch) * hw + p;
                    sum_g += go[idx];
                    sum_gx += static_cast<double>(go[idx]) * (*xhat)[idx];
                }
            if (grads[1]) (*grads[1])[ch] += static_cast<Real>(sum_gx);
            if (grads[2]) (*grads[2])[ch] += static_cast<Real>(sum_g);
            if (grads[0]) {
                const double k = gamma.value()[ch] * (*inv_std)[ch] / m;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t p = 0; p < hw; ++p) {
                        const std::size_t idx = (i * c + ch) * hw + p;
                        (*grads[0])[idx] += static_cast<Real>(k * (m * go[idx] - sum_g - (*xhat)[idx] * sum_gx));
                    }
            }
        }
    };
    return x.tape->record(std::move(out), {x.id, gamma.id, beta.id}, std::move(backward));
}

template <typename Real>
Var<Real> batch_norm_eval(Var<Real> x, Var<Real> gamma, Var<Real> beta, std::span<const Real> mean,
                          std::span<const Real> var, double eps) {
    const Shape& s = x.shape();
    require_rank(s, 4, "batch_norm");
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || mean.size() != c || var.size() != c) {
        throw ShapeError("batch_norm: per-channel parameters must have length " + std::to_string(c));
    }
    auto shift = std::make_shared<std::vector<Real>>(mean.begin(), mean.end());
    auto inv_std = std::make_shared<std::vector<Real>>(c);
    for (std::size_t ch = 0; ch < c; ++ch) (*inv_std)[ch] = static_cast<Real>(1.0 / std::sqrt(var[ch] + eps));
    Tensor<Real> out(s);
    const auto in = x.value().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < hw; ++p) {
                const std::size_t idx = (i * c + ch) * hw + p;
                out[idx] = gamma.value()[ch] * (in[idx] - (*shift)[ch]) * (*inv_std)[ch] + beta.value()[ch];
            }
    auto backward = [x, gamma, shift, inv_std, n, c, hw](const Tensor<Real>& go,
                                                        std::span<Tensor<Real>* const> grads) {
        const auto in = x.value().data();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p) {
                    const std::size_t idx = (i * c + ch) * hw + p;
                    const Real xh = (in[idx] - (*shift)[ch]) * (*inv_std)[ch];
                    if (grads[0]) (*grads[0])[idx] += go[idx] * gamma.value()[ch] * (*inv_std)[ch];
                    if (grads[1]) (*grads[1])[ch] += go[idx] * xh;
                    if (grads[2]) (*grads[2])[ch] += go[idx];
                }
    };
    return x.tape->record(std::move(out), {x.id, gamma.id, beta.id}, std::move(backward));
}

template <typename Real>
Var<Real> concat_channels(std::span<const Var<Real>> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Shape& first = parts[0].shape();
    require_rank(first, 4, "concat_channels");
    std::size_t channels = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        require_rank(s, 4, "concat_channels");
        if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
            throw ShapeError("concat_channels: " + shape_to_string(s) + " incompatible with " + shape_to_string(first));
        }
        channels += s[1];
        ids.push_back(p.id);
        widths.push_back(s[1]);
    }
    const std::size_t n = first[0], hw = first[2] * first[3];
    Tensor<Real> out({n, channels, first[2], first[3]});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Real* src = parts[k].value().data().data();
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(src + i * widths[k] * hw, widths[k] * hw, out.data().data() + (i * channels + offset) * hw);
        }
        offset += widths[k];
    }
    auto backward = [widths, n, hw, channels](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (grads[k]) {
                Real* dst = grads[k]->data().data();
                for (std::size_t i = 0; i < n; ++i) {
                    const Real* src = go.data().data() + (i * channels + offset) * hw;
                    Real* d = dst + i * widths[k] * hw;
                    for (std::size_t j = 0; j < widths[k] * hw; ++j) d[j] += src[j];
                }
            }
            offset += widths[k];
        }
    };
    return parts[0].tape->record(std::move(out), std::move(ids), std::move(backward));
}

template <typename Real>
Var<Real> upsample_nearest(Var<Real> x, int factor) {
    const Shape& s = x.shape();
    require_rank(s, 4, "upsample_nearest");
    if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
    const std::size_t f = static_cast<std::size_t>(factor);
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
    Tensor<Real> out({s[0], s[1], h * f, w * f});
    const Real* in = x.value().data().data();
    for (std::size_t pl = 0; pl < planes; ++pl)
        for (std::size_t oh = 0; oh < h * f; ++oh)
            for (std::size_t ow = 0; ow < w * f; ++ow)
                out[(pl * h * f + oh) * w * f + ow] = in[(pl * h + oh / f) * w + ow / f];
    auto backward = [planes, h, w, f](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        Real* g = grads[0]->data().data();
        for (std::size_t pl = 0; pl < planes; ++pl)
            for (std::size_t oh = 0; oh < h * f; ++oh)
                for (std::size_t ow = 0; ow < w * f; ++ow)
                    g[(pl * h + oh / f) * w + ow / f] += go[(pl * h * f + oh) * w * f + ow];
    };
    return x.tape->record(std::move(out), {x.id}, std::move(backward));
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor<Real> out = a.value();
    out += b.value();
    auto backward = [](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        if (grads[0]) *grads[0] += go;
        if (grads[1]) *grads[1] += go;
    };
    return a.tape->record(std::move(out), {a.id, b.id}, std::move(backward));
}

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor) {
    Tensor<Real> out = x.value();
    out *= factor;
    auto backward = [factor](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        auto g = grads[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * go[i];
    };
    return x.tape->record(std::move(out), {x.id}, std::move(backward));
}

template <typename Real>
Var<Real> sum(Var<Real> x) {
    Real total = 0;
    for (Real v : x.value().data()) total += v;
    auto backward = [](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        for (auto& g : grads[0]->data()) g += go[0];
    };
    return x.tape->record(Tensor<Real>({1}, total), {x.id}, std::move(backward));
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
    auto backward = [a, b](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        for (std::size_t i = 0; i < go.numel(); ++i) {
            if (grads[0]) (*grads[0])[i] += go[i] * b.value()[i];
            if (grads[1]) (*grads[1])[i] += go[i] * a.value()[i];
        }
    };
    return a.tape->record(std::move(out), {a.id, b.id}, std::move(backward));
}

template <typename Real>
Var<Real> mul_const(Var<Real> x, const Tensor<Real>& c) {
    require_same_shape(x.shape(), c.shape(), "mul_const");
    Tensor<Real> out = x.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c[i];
    auto backward = [c](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        auto g = grads[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * c[i];
    };
    return x.tape->record(std::move(out), {x.id}, std::move(backward));
}

#define MTLPRUNE_INSTANTIATE_OPS(Real)                                                                        \
    template Var<Real> conv2d(Var<Real>, Var<Real>, Var<Real>, const ConvGeometry&);                          \
    template Var<Real> relu(Var<Real>);                                                                       \
    template Var<Real> maxpool2d(Var<Real>, int, int);                                                        \
    template Var<Real> batch_norm_train(Var<Real>, Var<Real>, Var<Real>, double, std::vector<Real>*,          \
                                        std::vector<Real>*);                                                  \
    template Var<Real> batch_norm_eval(Var<Real>, Var<Real>, Var<Real>, std::span<const Real>,               \
                                       std::span<const Real>, double);                                        \
    template Var<Real> concat_channels(std::span<const Var<Real>>);                                           \
    template Var<Real> upsample_nearest(Var<Real>, int);                                                      \
    template Var<Real> add(Var<Real>, Var<Real>);                                                             \
    template Var<Real> scale(Var<Real>, Real);                                                                \
    template Var<Real> sum(Var<Real>);                                                                        \
    template Var<Real> mul(Var<Real>, Var<Real>);                                                             \
    template Var<Real> mul_const(Var<Real>, const Tensor<Real>&);

MTLPRUNE_INSTANTIATE_OPS(float)
MTLPRUNE_INSTANTIATE_OPS(double)

}  // namespace mtlprune
