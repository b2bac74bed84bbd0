#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hashnet/layers.hpp"

namespace hashnet {

enum class LayerKind {
    conv_standard,
    conv_dw,
    conv_pw,
    batchnorm,
    relu,
    avgpool_global,
    dense,
    sigmoid,
    softmax,
};

const char* layer_kind_name(LayerKind kind);

/// One declarative row of a network description.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t stride = 1;        // conv kinds only
    std::size_t out_channels = 0;  // conv_standard, conv_pw, dense
    std::size_t kernel = 0;        // conv_standard, conv_dw
    std::size_t repeat = 1;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputSpec {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

/// Declarative description of a full network. `hash_bits` is the latent
/// code width K; configs without a hash head (pure classifiers used for
/// cost accounting) carry hash_bits == 0 and no sigmoid row.
struct NetworkConfig {
    std::string name;
    InputSpec input;
    std::size_t hash_bits = 0;
    std::size_t num_classes = 0;
    std::vector<LayerSpec> layers;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// One instantiated row of the validated shape chain. `config_row` is the
/// 1-based index into NetworkConfig::layers; rows with repeat > 1 expand
/// into consecutive entries sharing that index.
struct ShapeChainRow {
    std::size_t config_row = 0;
    std::size_t repeat_index = 0;
    LayerSpec spec;
    ChwDims in;
    ChwDims out;
};

/// Validates the whole config (shape chaining, stride/kind invariants, head
/// structure) and returns the expanded per-layer chain. Errors name the
/// offending row.
std::vector<ShapeChainRow> shape_chain(const NetworkConfig& config);

/// Text form of a config, one layer per line with `input`/`bits`/`classes`
/// header lines. The exact grammar is documented in the README; this is
/// also the representation embedded in checkpoints.
std::string config_to_text(const NetworkConfig& config);
NetworkConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
NetworkConfig load_config_file(const std::string& path);

/// Built-in configurations: "table1-verbatim", "mobilenet-standard", "toy".
NetworkConfig builtin_config(const std::string& name);
bool is_builtin_config(const std::string& name);
std::vector<std::string> builtin_config_names();

/// Accepts a built-in name or a path to a config file.
NetworkConfig resolve_config(const std::string& name_or_path);

/// Rewrites the hash head of a config for a different code width. Only
/// valid for configs that have a hash head.
NetworkConfig with_hash_bits(const NetworkConfig& config, std::size_t bits);

/// An instantiated layer stack with parameters. The stack runs input
/// through every row except the trailing softmax marker, so forward output
/// is the class logits. Networks with a hash head expose the pooled
/// features and the latent sigmoid activations as taps.
class Network {
public:
    Network(NetworkConfig config, std::vector<ShapeChainRow> chain);

    const NetworkConfig& config() const { return config_; }
    const std::vector<ShapeChainRow>& chain() const { return chain_; }
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

    bool has_hash_head() const { return latent_layer_ != npos; }
    std::size_t hash_bits() const { return config_.hash_bits; }
    std::size_t num_classes() const { return config_.num_classes; }

    /// Iteration counter maintained by the trainer and persisted in
    /// checkpoints.
    std::uint64_t step = 0;

    /// Training-mode forward; `contexts` is resized to the layer count.
    Tensor forward(const Tensor& batch, std::vector<LayerContext>& contexts);

    /// Inference-mode forward to logits.
    Tensor infer(const Tensor& batch) const;

    struct Taps {
        Tensor logits;   // [B, classes]
        Tensor pooled;   // [B, C, 1, 1] output of the global pooling layer
        Tensor latent;   // [B, K] sigmoid activations; empty without a hash head
    };
    Taps infer_with_taps(const Tensor& batch) const;

    /// Backpropagates d(loss)/d(logits); appends one gradient list per
    /// layer (aligned with parameters()) into `param_grads`.
    void backward(const std::vector<LayerContext>& contexts, const Tensor& grad_logits,
                  std::vector<std::vector<Tensor>>& param_grads) const;

    std::vector<Tensor*> parameters();

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    void check_input(const Tensor& batch) const;

    NetworkConfig config_;
    std::vector<ShapeChainRow> chain_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::size_t pool_layer_ = npos;
    std::size_t latent_layer_ = npos;
};

/// Instantiates a config with deterministic fan-in uniform initialization:
/// same seed and config give bit-identical parameters.
Network build(const NetworkConfig& config, std::uint64_t seed);

} // namespace hashnet
