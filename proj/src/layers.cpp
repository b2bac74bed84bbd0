#include "hashnet/layers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hashnet {

namespace {

std::string dims_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    return os.str();
}

void require_rank4(const Tensor& x, const char* who) {
    if (x.rank() != 4) {
        throw Error(std::string(who) + ": expected a [batch,channels,height,width] input, got " +
                    dims_str(x.shape()));
    }
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t padding, const std::string& who) {
    const std::size_t padded = in + 2 * padding;
    if (padded < kernel) {
        throw Error(who + ": non-positive output extent for input extent " + std::to_string(in));
    }
    return (padded - kernel) / stride + 1;
}

} // namespace

std::vector<const Tensor*> Layer::parameters() const {
    std::vector<const Tensor*> out;
    for (Tensor* t : const_cast<Layer*>(this)->parameters()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> Layer::state_tensors() const {
    std::vector<const Tensor*> out;
    for (Tensor* t : const_cast<Layer*>(this)->state_tensors()) out.push_back(t);
    return out;
}

const char* conv_kind_name(ConvKind kind) {
    switch (kind) {
        case ConvKind::standard: return "conv";
        case ConvKind::depthwise: return "conv_dw";
        case ConvKind::pointwise: return "conv_pw";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

ConvLayer::ConvLayer(ConvKind kind, Shape4 shape, std::size_t stride, std::size_t padding)
    : kind_(kind), shape_(shape), stride_(stride), padding_(padding) {
    if (shape_.out_channels == 0 || shape_.in_channels == 0 || shape_.kernel == 0) {
        throw Error("conv: all filter extents must be >= 1");
    }
    if (stride_ != 1 && stride_ != 2) {
        throw Error("conv: stride must be 1 or 2, got " + std::to_string(stride_));
    }
    if (kind_ == ConvKind::pointwise && shape_.kernel != 1) {
        throw Error("conv_pw: kernel extent must be 1");
    }
    if (kind_ == ConvKind::depthwise && shape_.out_channels != shape_.in_channels) {
        throw Error("conv_dw: output channel count must equal input channel count");
    }
    if (kind_ == ConvKind::depthwise) {
        weights_ = Tensor({shape_.in_channels, 1, shape_.kernel, shape_.kernel});
    } else {
        weights_ = Tensor({shape_.out_channels, shape_.in_channels, shape_.kernel, shape_.kernel});
    }
}

std::string ConvLayer::describe() const {
    std::ostringstream os;
    os << conv_kind_name(kind_) << " ";
    if (kind_ == ConvKind::depthwise) {
        os << shape_.kernel << "x" << shape_.kernel << "x" << shape_.in_channels;
    } else if (kind_ == ConvKind::pointwise) {
        os << shape_.in_channels << "x" << shape_.out_channels;
    } else {
        os << shape_.kernel << "x" << shape_.kernel << "x" << shape_.in_channels << "x"
           << shape_.out_channels;
    }
    os << " /s" << stride_;
    return os.str();
}

ChwDims ConvLayer::output_dims(const ChwDims& in) const {
    if (in.channels != shape_.in_channels) {
        throw Error(describe() + ": input has " + std::to_string(in.channels) +
                    " channels, expected " + std::to_string(shape_.in_channels));
    }
    const std::string who = describe();
    return {shape_.out_channels, conv_out_extent(in.height, shape_.kernel, stride_, padding_, who),
            conv_out_extent(in.width, shape_.kernel, stride_, padding_, who)};
}

Tensor ConvLayer::run(const Tensor& x) const {
    require_rank4(x, describe().c_str());
    const std::size_t batch = x.extent(0);
    const ChwDims out = output_dims({x.extent(1), x.extent(2), x.extent(3)});
    const std::size_t m_ch = shape_.in_channels, n_ch = shape_.out_channels;
    const std::size_t h = x.extent(2), w = x.extent(3);
    const std::size_t oh = out.height, ow = out.width;
    const std::size_t k = shape_.kernel;
    const long pad = static_cast<long>(padding_);
    const std::size_t s = stride_;

    Tensor y({batch, n_ch, oh, ow});
    const double* xp = x.data();
    const double* wp = weights_.data();
    double* yp = y.data();

    if (kind_ == ConvKind::pointwise) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t n = 0; n < n_ch; ++n) {
                double* yrow = yp + (b * n_ch + n) * oh * ow;
                for (std::size_t m = 0; m < m_ch; ++m) {
                    const double wv = wp[n * m_ch + m];
                    const double* xplane = xp + (b * m_ch + m) * h * w;
                    if (s == 1) {
                        for (std::size_t i = 0; i < oh * ow; ++i) yrow[i] += wv * xplane[i];
                    } else {
                        for (std::size_t r = 0; r < oh; ++r) {
                            const double* xr = xplane + (r * s) * w;
                            double* yr = yrow + r * ow;
                            for (std::size_t c = 0; c < ow; ++c) yr[c] += wv * xr[c * s];
                        }
                    }
                }
            }
        }
        return y;
    }

    if (kind_ == ConvKind::depthwise) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < m_ch; ++c) {
                const double* xplane = xp + (b * m_ch + c) * h * w;
                const double* wk = wp + c * k * k;
                double* yplane = yp + (b * m_ch + c) * oh * ow;
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t cc = 0; cc < ow; ++cc) {
                        double acc = 0.0;
                        for (std::size_t kh = 0; kh < k; ++kh) {
                            const long ih = static_cast<long>(r * s + kh) - pad;
                            if (ih < 0 || ih >= static_cast<long>(h)) continue;
                            const double* xr = xplane + ih * w;
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const long iw = static_cast<long>(cc * s + kw) - pad;
                                if (iw < 0 || iw >= static_cast<long>(w)) continue;
                                acc += xr[iw] * wk[kh * k + kw];
                            }
                        }
                        yplane[r * ow + cc] = acc;
                    }
                }
            }
        }
        return y;
    }

    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t n = 0; n < n_ch; ++n) {
            double* yplane = yp + (b * n_ch + n) * oh * ow;
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t cc = 0; cc < ow; ++cc) {
                    double acc = 0.0;
                    for (std::size_t m = 0; m < m_ch; ++m) {
                        const double* xplane = xp + (b * m_ch + m) * h * w;
                        const double* wk = wp + (n * m_ch + m) * k * k;
                        for (std::size_t kh = 0; kh < k; ++kh) {
                            const long ih = static_cast<long>(r * s + kh) - pad;
                            if (ih < 0 || ih >= static_cast<long>(h)) continue;
                            const double* xr = xplane + ih * w;
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const long iw = static_cast<long>(cc * s + kw) - pad;
                                if (iw < 0 || iw >= static_cast<long>(w)) continue;
                                acc += xr[iw] * wk[kh * k + kw];
                            }
                        }
                    }
                    yplane[r * ow + cc] = acc;
                }
            }
        }
    }
    return y;
}

Tensor ConvLayer::forward(const Tensor& x, LayerContext& ctx) {
    ctx.saved.clear();
    ctx.saved.push_back(x);
    return run(x);
}

Tensor ConvLayer::infer(const Tensor& x) const { return run(x); }

Tensor ConvLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                           std::vector<Tensor>& param_grads) const {
    if (ctx.saved.empty()) {
        throw Error(describe() + ": backward called without a forward record");
    }
    const Tensor& x = ctx.saved[0];
    const std::size_t batch = x.extent(0);
    const std::size_t m_ch = shape_.in_channels, n_ch = shape_.out_channels;
    const std::size_t h = x.extent(2), w = x.extent(3);
    const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
    const std::size_t k = shape_.kernel;
    const long pad = static_cast<long>(padding_);
    const std::size_t s = stride_;

    Tensor gx(x.shape());
    Tensor gw(weights_.shape());
    const double* xp = x.data();
    const double* wp = weights_.data();
    const double* gp = grad_out.data();
    double* gxp = gx.data();
    double* gwp = gw.data();

    if (kind_ == ConvKind::pointwise) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t n = 0; n < n_ch; ++n) {
                const double* grow = gp + (b * n_ch + n) * oh * ow;
                for (std::size_t m = 0; m < m_ch; ++m) {
                    const double wv = wp[n * m_ch + m];
                    const double* xplane = xp + (b * m_ch + m) * h * w;
                    double* gxplane = gxp + (b * m_ch + m) * h * w;
                    double wacc = 0.0;
                    if (s == 1) {
                        for (std::size_t i = 0; i < oh * ow; ++i) {
                            const double go = grow[i];
                            wacc += xplane[i] * go;
                            gxplane[i] += wv * go;
                        }
                    } else {
                        for (std::size_t r = 0; r < oh; ++r) {
                            for (std::size_t c = 0; c < ow; ++c) {
                                const double go = grow[r * ow + c];
                                const std::size_t idx = (r * s) * w + c * s;
                                wacc += xplane[idx] * go;
                                gxplane[idx] += wv * go;
                            }
                        }
                    }
                    gwp[n * m_ch + m] += wacc;
                }
            }
        }
    } else if (kind_ == ConvKind::depthwise) {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < m_ch; ++c) {
                const double* xplane = xp + (b * m_ch + c) * h * w;
                double* gxplane = gxp + (b * m_ch + c) * h * w;
                const double* wk = wp + c * k * k;
                double* gwk = gwp + c * k * k;
                const double* gplane = gp + (b * m_ch + c) * oh * ow;
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t cc = 0; cc < ow; ++cc) {
                        const double go = gplane[r * ow + cc];
                        if (go == 0.0) continue;
                        for (std::size_t kh = 0; kh < k; ++kh) {
                            const long ih = static_cast<long>(r * s + kh) - pad;
                            if (ih < 0 || ih >= static_cast<long>(h)) continue;
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const long iw = static_cast<long>(cc * s + kw) - pad;
                                if (iw < 0 || iw >= static_cast<long>(w)) continue;
                                const std::size_t xi = ih * w + iw;
                                gwk[kh * k + kw] += xplane[xi] * go;
                                gxplane[xi] += wk[kh * k + kw] * go;
                            }
                        }
                    }
                }
            }
        }
    } else {
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t n = 0; n < n_ch; ++n) {
                const double* gplane = gp + (b * n_ch + n) * oh * ow;
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t cc = 0; cc < ow; ++cc) {
                        const double go = gplane[r * ow + cc];
                        if (go == 0.0) continue;
                        for (std::size_t m = 0; m < m_ch; ++m) {
                            const double* xplane = xp + (b * m_ch + m) * h * w;
                            double* gxplane = gxp + (b * m_ch + m) * h * w;
                            const double* wk = wp + (n * m_ch + m) * k * k;
                            double* gwk = gwp + (n * m_ch + m) * k * k;
                            for (std::size_t kh = 0; kh < k; ++kh) {
                                const long ih = static_cast<long>(r * s + kh) - pad;
                                if (ih < 0 || ih >= static_cast<long>(h)) continue;
                                for (std::size_t kw = 0; kw < k; ++kw) {
                                    const long iw = static_cast<long>(cc * s + kw) - pad;
                                    if (iw < 0 || iw >= static_cast<long>(w)) continue;
                                    const std::size_t xi = ih * w + iw;
                                    gwk[kh * k + kw] += xplane[xi] * go;
                                    gxplane[xi] += wk[kh * k + kw] * go;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    param_grads.push_back(std::move(gw));
    return gx;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

BatchNormLayer::BatchNormLayer(std::size_t channels, double epsilon, double momentum)
    : channels_(channels), epsilon_(epsilon), momentum_(momentum) {
    if (channels_ == 0) throw Error("batchnorm: channel count must be >= 1");
    if (epsilon_ <= 0.0) throw Error("batchnorm: epsilon must be positive");
    gamma_ = Tensor::full({channels_}, 1.0);
    beta_ = Tensor({channels_});
    running_mean_ = Tensor({channels_});
    running_var_ = Tensor::full({channels_}, 1.0);
}

std::string BatchNormLayer::describe() const {
    return "batchnorm " + std::to_string(channels_);
}

ChwDims BatchNormLayer::output_dims(const ChwDims& in) const {
    if (in.channels != channels_) {
        throw Error(describe() + ": input has " + std::to_string(in.channels) +
                    " channels, expected " + std::to_string(channels_));
    }
    return in;
}

Tensor BatchNormLayer::forward(const Tensor& x, LayerContext& ctx) {
    require_rank4(x, "batchnorm");
    if (x.extent(1) != channels_) {
        throw Error(describe() + ": input has " + std::to_string(x.extent(1)) + " channels");
    }
    const std::size_t batch = x.extent(0);
    const std::size_t hw = x.extent(2) * x.extent(3);
    const double count = static_cast<double>(batch * hw);
    const double* xp = x.data();

    std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double* plane = xp + (b * channels_ + c) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += plane[i];
            mean[c] += s;
        }
    }
    for (std::size_t c = 0; c < channels_; ++c) mean[c] /= count;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double* plane = xp + (b * channels_ + c) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
                const double d = plane[i] - mean[c];
                s += d * d;
            }
            var[c] += s;
        }
    }
    for (std::size_t c = 0; c < channels_; ++c) var[c] /= count;

    Tensor inv_std({channels_});
    for (std::size_t c = 0; c < channels_; ++c) {
        inv_std[c] = 1.0 / std::sqrt(var[c] + epsilon_);
    }

    Tensor xhat(x.shape());
    Tensor y(x.shape());
    double* hp = xhat.data();
    double* yp = y.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double* plane = xp + (b * channels_ + c) * hw;
            double* hplane = hp + (b * channels_ + c) * hw;
            double* yplane = yp + (b * channels_ + c) * hw;
            const double mu = mean[c], is = inv_std[c];
            const double g = gamma_[c], be = beta_[c];
            for (std::size_t i = 0; i < hw; ++i) {
                const double h = (plane[i] - mu) * is;
                hplane[i] = h;
                yplane[i] = g * h + be;
            }
        }
    }

    // Running statistics stay on the float32 grid like every other stored
    // tensor, so checkpoints round-trip bit-exactly.
    for (std::size_t c = 0; c < channels_; ++c) {
        running_mean_[c] = to_f32(momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c]);
        running_var_[c] = to_f32(momentum_ * running_var_[c] + (1.0 - momentum_) * var[c]);
    }

    ctx.saved.clear();
    ctx.saved.push_back(std::move(xhat));
    ctx.saved.push_back(std::move(inv_std));
    return y;
}

Tensor BatchNormLayer::infer(const Tensor& x) const {
    require_rank4(x, "batchnorm");
    if (x.extent(1) != channels_) {
        throw Error(describe() + ": input has " + std::to_string(x.extent(1)) + " channels");
    }
    const std::size_t batch = x.extent(0);
    const std::size_t hw = x.extent(2) * x.extent(3);
    Tensor y(x.shape());
    const double* xp = x.data();
    double* yp = y.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double is = 1.0 / std::sqrt(running_var_[c] + epsilon_);
            const double mu = running_mean_[c];
            const double g = gamma_[c], be = beta_[c];
            const double* plane = xp + (b * channels_ + c) * hw;
            double* yplane = yp + (b * channels_ + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                yplane[i] = g * (plane[i] - mu) * is + be;
            }
        }
    }
    return y;
}

Tensor BatchNormLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                                std::vector<Tensor>& param_grads) const {
    if (ctx.saved.size() != 2) {
        throw Error("batchnorm: backward called without a forward record");
    }
    const Tensor& xhat = ctx.saved[0];
    const Tensor& inv_std = ctx.saved[1];
    const std::size_t batch = xhat.extent(0);
    const std::size_t hw = xhat.extent(2) * xhat.extent(3);
    const double count = static_cast<double>(batch * hw);

    Tensor dgamma({channels_});
    Tensor dbeta({channels_});
    const double* hp = xhat.data();
    const double* gp = grad_out.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double* hplane = hp + (b * channels_ + c) * hw;
            const double* gplane = gp + (b * channels_ + c) * hw;
            double sg = 0.0, sgh = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
                sg += gplane[i];
                sgh += gplane[i] * hplane[i];
            }
            dbeta[c] += sg;
            dgamma[c] += sgh;
        }
    }

    Tensor gx(xhat.shape());
    double* gxp = gx.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const double* hplane = hp + (b * channels_ + c) * hw;
            const double* gplane = gp + (b * channels_ + c) * hw;
            double* gxplane = gxp + (b * channels_ + c) * hw;
            const double scale = gamma_[c] * inv_std[c];
            const double mg = dbeta[c] / count;
            const double mgh = dgamma[c] / count;
            for (std::size_t i = 0; i < hw; ++i) {
                gxplane[i] = scale * (gplane[i] - mg - hplane[i] * mgh);
            }
        }
    }

    param_grads.push_back(std::move(dgamma));
    param_grads.push_back(std::move(dbeta));
    return gx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor ReluLayer::forward(const Tensor& x, LayerContext& ctx) {
    ctx.saved.clear();
    ctx.saved.push_back(x);
    return infer(x);
}

Tensor ReluLayer::infer(const Tensor& x) const {
    Tensor y = x;
    double* p = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (p[i] < 0.0) p[i] = 0.0;
    }
    return y;
}

Tensor ReluLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                           std::vector<Tensor>& param_grads) const {
    (void)param_grads;
    if (ctx.saved.empty()) throw Error("relu: backward called without a forward record");
    const Tensor& x = ctx.saved[0];
    Tensor gx = grad_out;
    double* gp = gx.data();
    const double* xp = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
        if (xp[i] <= 0.0) gp[i] = 0.0;
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Global average pooling
// ---------------------------------------------------------------------------

ChwDims GlobalAvgPoolLayer::output_dims(const ChwDims& in) const {
    if (in.height != in.width) {
        throw Error("avgpool: spatial input must be square, got " + std::to_string(in.height) +
                    "x" + std::to_string(in.width));
    }
    return {in.channels, 1, 1};
}

Tensor GlobalAvgPoolLayer::forward(const Tensor& x, LayerContext& ctx) {
    ctx.saved.clear();
    ctx.saved_shapes.clear();
    ctx.saved_shapes.push_back(x.shape());
    return infer(x);
}

Tensor GlobalAvgPoolLayer::infer(const Tensor& x) const {
    require_rank4(x, "avgpool");
    output_dims({x.extent(1), x.extent(2), x.extent(3)});
    const std::size_t batch = x.extent(0), ch = x.extent(1);
    const std::size_t hw = x.extent(2) * x.extent(3);
    Tensor y({batch, ch, 1, 1});
    const double* xp = x.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            const double* plane = xp + (b * ch + c) * hw;
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += plane[i];
            y(b, c, 0, 0) = s / static_cast<double>(hw);
        }
    }
    return y;
}

Tensor GlobalAvgPoolLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                                    std::vector<Tensor>& param_grads) const {
    (void)param_grads;
    if (ctx.saved_shapes.empty()) {
        throw Error("avgpool: backward called without a forward record");
    }
    const std::vector<std::size_t>& in_shape = ctx.saved_shapes[0];
    const std::size_t batch = in_shape[0], ch = in_shape[1];
    const std::size_t hw = in_shape[2] * in_shape[3];
    Tensor gx(in_shape);
    double* gp = gx.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            const double g = grad_out(b, c, 0, 0) / static_cast<double>(hw);
            double* plane = gp + (b * ch + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) plane[i] = g;
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
    if (in_dim_ == 0 || out_dim_ == 0) throw Error("dense: dims must be >= 1");
    weights_ = Tensor({in_dim_, out_dim_});
    bias_ = Tensor({out_dim_});
}

std::string DenseLayer::describe() const {
    return "dense " + std::to_string(in_dim_) + "x" + std::to_string(out_dim_);
}

ChwDims DenseLayer::output_dims(const ChwDims& in) const {
    const std::size_t flat = in.channels * in.height * in.width;
    if (flat != in_dim_) {
        throw Error(describe() + ": input flattens to " + std::to_string(flat) +
                    " values, expected " + std::to_string(in_dim_));
    }
    return {out_dim_, 1, 1};
}

Tensor DenseLayer::run(const Tensor& x) const {
    if (x.rank() < 2) throw Error(describe() + ": input must carry a batch extent");
    const std::size_t batch = x.extent(0);
    std::size_t flat = 1;
    for (std::size_t a = 1; a < x.rank(); ++a) flat *= x.extent(a);
    if (flat != in_dim_) {
        throw Error(describe() + ": input flattens to " + std::to_string(flat) +
                    " values, expected " + std::to_string(in_dim_));
    }
    Tensor y({batch, out_dim_});
    const double* xp = x.data();
    const double* wp = weights_.data();
    double* yp = y.data();
    for (std::size_t b = 0; b < batch; ++b) {
        double* yrow = yp + b * out_dim_;
        for (std::size_t o = 0; o < out_dim_; ++o) yrow[o] = bias_[o];
        const double* xrow = xp + b * in_dim_;
        for (std::size_t i = 0; i < in_dim_; ++i) {
            const double xv = xrow[i];
            if (xv == 0.0) continue;
            const double* wrow = wp + i * out_dim_;
            for (std::size_t o = 0; o < out_dim_; ++o) yrow[o] += xv * wrow[o];
        }
    }
    return y;
}

Tensor DenseLayer::forward(const Tensor& x, LayerContext& ctx) {
    ctx.saved.clear();
    ctx.saved.push_back(x);
    return run(x);
}

Tensor DenseLayer::infer(const Tensor& x) const { return run(x); }

Tensor DenseLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                            std::vector<Tensor>& param_grads) const {
    if (ctx.saved.empty()) throw Error("dense: backward called without a forward record");
    const Tensor& x = ctx.saved[0];
    const std::size_t batch = x.extent(0);
    if (grad_out.rank() != 2 || grad_out.extent(0) != batch || grad_out.extent(1) != out_dim_) {
        throw Error(describe() + ": gradient shape mismatch");
    }
    Tensor gw(weights_.shape());
    Tensor gb(bias_.shape());
    Tensor gx(x.shape());
    const double* xp = x.data();
    const double* gp = grad_out.data();
    const double* wp = weights_.data();
    double* gwp = gw.data();
    double* gxp = gx.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xrow = xp + b * in_dim_;
        const double* grow = gp + b * out_dim_;
        double* gxrow = gxp + b * in_dim_;
        for (std::size_t o = 0; o < out_dim_; ++o) gb[o] += grow[o];
        for (std::size_t i = 0; i < in_dim_; ++i) {
            const double* wrow = wp + i * out_dim_;
            double* gwrow = gwp + i * out_dim_;
            const double xv = xrow[i];
            double acc = 0.0;
            for (std::size_t o = 0; o < out_dim_; ++o) {
                gwrow[o] += xv * grow[o];
                acc += wrow[o] * grow[o];
            }
            gxrow[i] = acc;
        }
    }
    param_grads.push_back(std::move(gw));
    param_grads.push_back(std::move(gb));
    return gx;
}

// ---------------------------------------------------------------------------
// Sigmoid
// ---------------------------------------------------------------------------

namespace {

// Clamped into the open interval so downstream thresholding never sees an
// exact 0 or 1 from saturation.
double sigmoid_scalar(double z) {
    const double y = 1.0 / (1.0 + std::exp(-z));
    if (y <= 0.0) return std::numeric_limits<double>::denorm_min();
    if (y >= 1.0) return std::nextafter(1.0, 0.0);
    return y;
}

} // namespace

Tensor SigmoidLayer::forward(const Tensor& x, LayerContext& ctx) {
    Tensor y = infer(x);
    ctx.saved.clear();
    ctx.saved.push_back(y);
    return y;
}

Tensor SigmoidLayer::infer(const Tensor& x) const {
    Tensor y = x;
    double* p = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) p[i] = sigmoid_scalar(p[i]);
    return y;
}

Tensor SigmoidLayer::backward(const LayerContext& ctx, const Tensor& grad_out,
                              std::vector<Tensor>& param_grads) const {
    (void)param_grads;
    if (ctx.saved.empty()) throw Error("sigmoid: backward called without a forward record");
    const Tensor& y = ctx.saved[0];
    Tensor gx = grad_out;
    double* gp = gx.data();
    const double* yp = y.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
        gp[i] *= yp[i] * (1.0 - yp[i]);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1) throw Error("softmax_cross_entropy: logits must be rank 1");
    const std::size_t classes = logits.extent(0);
    if (label >= classes) {
        throw Error("softmax_cross_entropy: label " + std::to_string(label) +
                    " out of range for " + std::to_string(classes) + " classes");
    }
    double mx = logits[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits[c]);
    double z = 0.0;
    Tensor grad({classes});
    for (std::size_t c = 0; c < classes; ++c) {
        grad[c] = std::exp(logits[c] - mx);
        z += grad[c];
    }
    for (std::size_t c = 0; c < classes; ++c) grad[c] /= z;
    const double loss = std::log(z) - (logits[label] - mx);
    grad[label] -= 1.0;
    return {loss, std::move(grad)};
}

std::pair<double, Tensor> softmax_cross_entropy_batch(const Tensor& logits,
                                                      const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) throw Error("softmax_cross_entropy_batch: logits must be [B,C]");
    const std::size_t batch = logits.extent(0);
    const std::size_t classes = logits.extent(1);
    if (labels.size() != batch) {
        throw Error("softmax_cross_entropy_batch: " + std::to_string(labels.size()) +
                    " labels for batch of " + std::to_string(batch));
    }
    Tensor grad({batch, classes});
    double total = 0.0;
    const double* lp = logits.data();
    double* gp = grad.data();
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t label = labels[b];
        if (label >= classes) {
            throw Error("softmax_cross_entropy_batch: label " + std::to_string(label) +
                        " out of range for " + std::to_string(classes) + " classes");
        }
        const double* row = lp + b * classes;
        double* grow = gp + b * classes;
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            grow[c] = std::exp(row[c] - mx);
            z += grow[c];
        }
        total += std::log(z) - (row[label] - mx);
        for (std::size_t c = 0; c < classes; ++c) grow[c] = grow[c] / z * inv_batch;
        grow[label] -= inv_batch;
    }
    return {total * inv_batch, std::move(grad)};
}

} // namespace hashnet
