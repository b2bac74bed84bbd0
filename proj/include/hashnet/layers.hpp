#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hashnet/tensor.hpp"

namespace hashnet {

/// Channel/height/width extents of a feature map (per image).
struct ChwDims {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    friend bool operator==(const ChwDims&, const ChwDims&) = default;
};

/// Values cached by a training-mode forward pass for the matching backward
/// pass. Contexts are call-local: the layer objects themselves stay
/// read-shared during forward/backward.
struct LayerContext {
    std::vector<Tensor> saved;
    std::vector<std::vector<std::size_t>> saved_shapes;
};

/// One stage of the network. Inputs and outputs are batched: [B,C,H,W] for
/// spatial layers, [B,D] after the first dense layer.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string describe() const = 0;

    /// Training-mode forward; fills `ctx` with what backward() needs.
    virtual Tensor forward(const Tensor& x, LayerContext& ctx) = 0;

    /// Inference-mode forward (batchnorm uses running statistics).
    virtual Tensor infer(const Tensor& x) const = 0;

    /// Gradient of the scalar loss w.r.t. the layer input. Parameter
    /// gradients are appended to `param_grads` aligned with parameters().
    /// Gradient accumulation is sequential in batch-major order, so results
    /// are deterministic for a fixed input.
    virtual Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                            std::vector<Tensor>& param_grads) const = 0;

    /// Trainable parameters, updated by SGD.
    virtual std::vector<Tensor*> parameters() { return {}; }
    std::vector<const Tensor*> parameters() const;

    /// Everything persisted in checkpoints; a superset of parameters()
    /// (batchnorm adds its running statistics).
    virtual std::vector<Tensor*> state_tensors() { return parameters(); }
    std::vector<const Tensor*> state_tensors() const;

    /// Per-image output dims given per-image input dims; validates shape
    /// compatibility.
    virtual ChwDims output_dims(const ChwDims& in) const = 0;
};

enum class ConvKind { standard, depthwise, pointwise };

const char* conv_kind_name(ConvKind kind);

/// Convolution without bias (the following batchnorm shift plays that
/// role). Weight layout: [N,M,K,K] for standard and pointwise kinds,
/// [M,1,K,K] for depthwise (filter i applies to input channel i only).
class ConvLayer final : public Layer {
public:
    ConvLayer(ConvKind kind, Shape4 shape, std::size_t stride, std::size_t padding);

    std::string describe() const override;
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    std::vector<Tensor*> parameters() override { return {&weights_}; }
    ChwDims output_dims(const ChwDims& in) const override;

    ConvKind kind() const { return kind_; }
    const Shape4& filter_shape() const { return shape_; }
    std::size_t stride() const { return stride_; }
    std::size_t padding() const { return padding_; }
    Tensor& weights() { return weights_; }
    const Tensor& weights() const { return weights_; }

private:
    Tensor run(const Tensor& x) const;

    ConvKind kind_;
    Shape4 shape_;
    std::size_t stride_;
    std::size_t padding_;
    Tensor weights_;
};

/// Per-channel batch normalization over batch and spatial positions.
/// Training mode normalizes with batch statistics and folds them into the
/// running estimates; inference mode uses the running estimates.
class BatchNormLayer final : public Layer {
public:
    explicit BatchNormLayer(std::size_t channels, double epsilon = 1e-5,
                            double momentum = 0.9);

    std::string describe() const override;
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    std::vector<Tensor*> parameters() override { return {&gamma_, &beta_}; }
    std::vector<Tensor*> state_tensors() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }
    ChwDims output_dims(const ChwDims& in) const override;

    std::size_t channels() const { return channels_; }
    double epsilon() const { return epsilon_; }
    Tensor& gamma() { return gamma_; }
    Tensor& beta() { return beta_; }
    const Tensor& running_mean() const { return running_mean_; }
    const Tensor& running_var() const { return running_var_; }

private:
    std::size_t channels_;
    double epsilon_;
    double momentum_;
    Tensor gamma_, beta_, running_mean_, running_var_;
};

class ReluLayer final : public Layer {
public:
    std::string describe() const override { return "relu"; }
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    ChwDims output_dims(const ChwDims& in) const override { return in; }
};

/// Global average pooling: per-channel mean over all spatial positions of a
/// square feature map, leaving a 1x1 spatial extent.
class GlobalAvgPoolLayer final : public Layer {
public:
    std::string describe() const override { return "avgpool"; }
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    ChwDims output_dims(const ChwDims& in) const override;
};

/// Fully connected layer y = x.W + bias with W sized [in,out]. A 4-D input
/// is flattened to [B, C*H*W] first.
class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in_dim, std::size_t out_dim);

    std::string describe() const override;
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    std::vector<Tensor*> parameters() override { return {&weights_, &bias_}; }
    ChwDims output_dims(const ChwDims& in) const override;

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }
    Tensor& weights() { return weights_; }
    Tensor& bias() { return bias_; }

private:
    Tensor run(const Tensor& x) const;

    std::size_t in_dim_, out_dim_;
    Tensor weights_, bias_;
};

/// Logistic sigmoid; outputs lie strictly inside (0,1).
class SigmoidLayer final : public Layer {
public:
    std::string describe() const override { return "sigmoid"; }
    Tensor forward(const Tensor& x, LayerContext& ctx) override;
    Tensor infer(const Tensor& x) const override;
    Tensor backward(const LayerContext& ctx, const Tensor& grad_out,
                    std::vector<Tensor>& param_grads) const override;
    ChwDims output_dims(const ChwDims& in) const override { return in; }
};

/// Loss head. Loss is -log softmax(logits)[label], stabilized by max
/// subtraction; the gradient is softmax(logits) - one_hot(label).
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, std::size_t label);

/// Batched mean loss over rows of [B,C] logits; the returned gradient is
/// already scaled by 1/B.
std::pair<double, Tensor> softmax_cross_entropy_batch(const Tensor& logits,
                                                      const std::vector<std::size_t>& labels);

} // namespace hashnet
