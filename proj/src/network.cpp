#include "hashnet/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hashnet {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv_standard: return "conv";
        case LayerKind::conv_dw: return "conv_dw";
        case LayerKind::conv_pw: return "conv_pw";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::avgpool_global: return "avgpool";
        case LayerKind::dense: return "dense";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

namespace {

bool is_conv_kind(LayerKind kind) {
    return kind == LayerKind::conv_standard || kind == LayerKind::conv_dw ||
           kind == LayerKind::conv_pw;
}

// 3x3 kernels pad by 1 ("same" at stride 1, halving at stride 2); 1x1
// kernels pad by 0.
std::size_t conv_padding(std::size_t kernel) { return (kernel - 1) / 2; }

std::string spec_label(const LayerSpec& spec) {
    std::ostringstream os;
    os << layer_kind_name(spec.kind);
    if (is_conv_kind(spec.kind)) os << " /s" << spec.stride;
    if (spec.kind == LayerKind::conv_standard) {
        os << " " << spec.kernel << "x" << spec.kernel << "->" << spec.out_channels;
    } else if (spec.kind == LayerKind::conv_dw) {
        os << " " << spec.kernel << "x" << spec.kernel;
    } else if (spec.kind == LayerKind::conv_pw) {
        os << " ->" << spec.out_channels;
    } else if (spec.kind == LayerKind::dense) {
        os << " ->" << spec.out_channels;
    }
    return os.str();
}

std::string row_label(const NetworkConfig& config, std::size_t row_1based,
                      const LayerSpec& spec) {
    std::ostringstream os;
    os << "config '" << config.name << "', row " << row_1based << " (" << spec_label(spec)
       << ")";
    return os.str();
}

std::size_t chain_conv_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                              std::size_t padding, const std::string& who) {
    const std::size_t padded = in + 2 * padding;
    if (padded < kernel) {
        throw Error(who + ": non-positive output extent for input extent " + std::to_string(in));
    }
    return (padded - kernel) / stride + 1;
}

void validate_spec_fields(const NetworkConfig& config, std::size_t row, const LayerSpec& spec) {
    const std::string who = row_label(config, row, spec);
    if (spec.repeat < 1) throw Error(who + ": repeat must be >= 1");
    if (is_conv_kind(spec.kind)) {
        if (spec.stride != 1 && spec.stride != 2) {
            throw Error(who + ": stride must be 1 or 2");
        }
    } else if (spec.stride != 1) {
        throw Error(who + ": stride applies to conv rows only");
    }
    switch (spec.kind) {
        case LayerKind::conv_standard:
            if (spec.kernel < 1) throw Error(who + ": kernel extent must be >= 1");
            if (spec.out_channels < 1) throw Error(who + ": output channels must be >= 1");
            break;
        case LayerKind::conv_dw:
            if (spec.kernel < 1) throw Error(who + ": kernel extent must be >= 1");
            break;
        case LayerKind::conv_pw:
        case LayerKind::dense:
            if (spec.out_channels < 1) throw Error(who + ": output width must be >= 1");
            break;
        default:
            break;
    }
}

ChwDims chain_step(const NetworkConfig& config, std::size_t row, const LayerSpec& spec,
                   const ChwDims& in) {
    const std::string who = row_label(config, row, spec);
    switch (spec.kind) {
        case LayerKind::conv_standard: {
            const std::size_t pad = conv_padding(spec.kernel);
            return {spec.out_channels,
                    chain_conv_extent(in.height, spec.kernel, spec.stride, pad, who),
                    chain_conv_extent(in.width, spec.kernel, spec.stride, pad, who)};
        }
        case LayerKind::conv_dw: {
            const std::size_t pad = conv_padding(spec.kernel);
            return {in.channels,
                    chain_conv_extent(in.height, spec.kernel, spec.stride, pad, who),
                    chain_conv_extent(in.width, spec.kernel, spec.stride, pad, who)};
        }
        case LayerKind::conv_pw:
            return {spec.out_channels,
                    chain_conv_extent(in.height, 1, spec.stride, 0, who),
                    chain_conv_extent(in.width, 1, spec.stride, 0, who)};
        case LayerKind::batchnorm:
        case LayerKind::relu:
        case LayerKind::sigmoid:
        case LayerKind::softmax:
            return in;
        case LayerKind::avgpool_global:
            if (in.height != in.width) {
                throw Error(who + ": spatial input must be square, got " +
                            std::to_string(in.height) + "x" + std::to_string(in.width));
            }
            return {in.channels, 1, 1};
        case LayerKind::dense:
            return {spec.out_channels, 1, 1};
    }
    throw Error("unreachable layer kind");
}

} // namespace

std::vector<ShapeChainRow> shape_chain(const NetworkConfig& config) {
    if (config.input.channels < 1 || config.input.height < 1 || config.input.width < 1) {
        throw Error("config '" + config.name + "': input extents must be >= 1");
    }
    if (config.layers.empty()) {
        throw Error("config '" + config.name + "': no layers");
    }
    if (config.num_classes < 2) {
        throw Error("config '" + config.name + "': class count must be >= 2");
    }

    std::vector<ShapeChainRow> rows;
    ChwDims cur{config.input.channels, config.input.height, config.input.width};
    std::size_t sigmoid_count = 0, softmax_count = 0;
    bool pool_seen = false, pool_before_sigmoid = false;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& spec = config.layers[i];
        validate_spec_fields(config, i + 1, spec);
        for (std::size_t rep = 0; rep < spec.repeat; ++rep) {
            ChwDims out = chain_step(config, i + 1, spec, cur);
            rows.push_back({i + 1, rep, spec, cur, out});
            cur = out;
        }
        if (spec.kind == LayerKind::avgpool_global) pool_seen = true;
        if (spec.kind == LayerKind::sigmoid) {
            sigmoid_count += spec.repeat;
            pool_before_sigmoid = pool_seen;
        }
        if (spec.kind == LayerKind::softmax) softmax_count += spec.repeat;
    }

    const std::string who = "config '" + config.name + "'";
    if (softmax_count != 1 || rows.back().spec.kind != LayerKind::softmax) {
        throw Error(who + ": the layer stack must end with exactly one softmax classifier row");
    }
    const std::size_t n = rows.size();
    if (n < 2 || rows[n - 2].spec.kind != LayerKind::dense ||
        rows[n - 2].spec.out_channels != config.num_classes) {
        throw Error(who + ": the softmax row must follow a dense layer of width " +
                    std::to_string(config.num_classes));
    }
    if (config.hash_bits > 0) {
        if (sigmoid_count != 1) {
            throw Error(who + ": expected exactly one sigmoid hash latent row, found " +
                        std::to_string(sigmoid_count));
        }
        if (n < 4 || rows[n - 3].spec.kind != LayerKind::sigmoid ||
            rows[n - 4].spec.kind != LayerKind::dense) {
            throw Error(who +
                        ": hash head must be dense -> sigmoid -> dense -> softmax at the top");
        }
        if (rows[n - 4].spec.out_channels != config.hash_bits) {
            throw Error(who + ": latent dense width " +
                        std::to_string(rows[n - 4].spec.out_channels) +
                        " does not match hash bit count " + std::to_string(config.hash_bits));
        }
        if (!pool_before_sigmoid) {
            throw Error(who + ": hash head requires a global average pooling row before it");
        }
    } else if (sigmoid_count != 0) {
        throw Error(who + ": sigmoid rows require a nonzero hash bit count");
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Config text format
// ---------------------------------------------------------------------------

std::string config_to_text(const NetworkConfig& config) {
    std::ostringstream os;
    os << "name " << (config.name.empty() ? "unnamed" : config.name) << "\n";
    os << "input " << config.input.channels << " " << config.input.height << " "
       << config.input.width << "\n";
    os << "bits " << config.hash_bits << "\n";
    os << "classes " << config.num_classes << "\n";
    for (const LayerSpec& spec : config.layers) {
        switch (spec.kind) {
            case LayerKind::conv_standard:
                os << "conv s" << spec.stride << " " << spec.out_channels << " " << spec.kernel;
                break;
            case LayerKind::conv_dw:
                os << "conv_dw s" << spec.stride << " " << spec.kernel;
                break;
            case LayerKind::conv_pw:
                os << "conv_pw s" << spec.stride << " " << spec.out_channels;
                break;
            case LayerKind::dense:
                os << "dense " << spec.out_channels;
                break;
            default:
                os << layer_kind_name(spec.kind);
                break;
        }
        if (spec.repeat != 1) os << " " << spec.repeat;
        os << "\n";
    }
    return os.str();
}

namespace {

struct LineParser {
    std::string origin;
    std::size_t line_no = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(origin + ", line " + std::to_string(line_no) + ": " + msg);
    }

    std::size_t parse_count(const std::string& tok, const char* what) const {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &pos);
        } catch (const std::exception&) {
            fail(std::string("expected ") + what + ", got '" + tok + "'");
        }
        if (pos != tok.size()) fail(std::string("expected ") + what + ", got '" + tok + "'");
        return static_cast<std::size_t>(v);
    }

    std::size_t parse_stride(const std::string& tok) const {
        if (tok == "s1") return 1;
        if (tok == "s2") return 2;
        fail("expected stride token s1 or s2, got '" + tok + "'");
    }
};

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

} // namespace

NetworkConfig parse_config_text(const std::string& text, const std::string& origin) {
    NetworkConfig config;
    config.name = "unnamed";
    LineParser lp{origin, 0};
    std::istringstream is(text);
    std::string raw;
    bool saw_input = false, saw_classes = false;
    while (std::getline(is, raw)) {
        ++lp.line_no;
        const std::size_t hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        std::vector<std::string> toks = split_tokens(line);
        if (toks.empty()) continue;
        const std::string& head = toks[0];

        auto expect_args = [&](std::size_t lo, std::size_t hi) {
            if (toks.size() - 1 < lo || toks.size() - 1 > hi) {
                lp.fail("wrong argument count for '" + head + "'");
            }
        };

        if (head == "name") {
            expect_args(1, 1);
            config.name = toks[1];
        } else if (head == "input") {
            expect_args(3, 3);
            config.input = {lp.parse_count(toks[1], "channel count"),
                            lp.parse_count(toks[2], "height"),
                            lp.parse_count(toks[3], "width")};
            saw_input = true;
        } else if (head == "bits") {
            expect_args(1, 1);
            config.hash_bits = lp.parse_count(toks[1], "bit count");
        } else if (head == "classes") {
            expect_args(1, 1);
            config.num_classes = lp.parse_count(toks[1], "class count");
            saw_classes = true;
        } else if (head == "conv") {
            expect_args(3, 4);
            LayerSpec spec{LayerKind::conv_standard, lp.parse_stride(toks[1]),
                           lp.parse_count(toks[2], "output channel count"),
                           lp.parse_count(toks[3], "kernel extent"), 1};
            if (toks.size() == 5) spec.repeat = lp.parse_count(toks[4], "repeat count");
            config.layers.push_back(spec);
        } else if (head == "conv_dw") {
            expect_args(2, 3);
            LayerSpec spec{LayerKind::conv_dw, lp.parse_stride(toks[1]), 0,
                           lp.parse_count(toks[2], "kernel extent"), 1};
            if (toks.size() == 4) spec.repeat = lp.parse_count(toks[3], "repeat count");
            config.layers.push_back(spec);
        } else if (head == "conv_pw") {
            expect_args(2, 3);
            LayerSpec spec{LayerKind::conv_pw, lp.parse_stride(toks[1]),
                           lp.parse_count(toks[2], "output channel count"), 1, 1};
            if (toks.size() == 4) spec.repeat = lp.parse_count(toks[3], "repeat count");
            config.layers.push_back(spec);
        } else if (head == "dense") {
            expect_args(1, 2);
            LayerSpec spec{LayerKind::dense, 1, lp.parse_count(toks[1], "output width"), 0, 1};
            if (toks.size() == 3) spec.repeat = lp.parse_count(toks[2], "repeat count");
            config.layers.push_back(spec);
        } else if (head == "batchnorm" || head == "relu" || head == "avgpool" ||
                   head == "sigmoid" || head == "softmax") {
            expect_args(0, 1);
            LayerKind kind = head == "batchnorm"  ? LayerKind::batchnorm
                             : head == "relu"     ? LayerKind::relu
                             : head == "avgpool"  ? LayerKind::avgpool_global
                             : head == "sigmoid"  ? LayerKind::sigmoid
                                                  : LayerKind::softmax;
            LayerSpec spec{kind, 1, 0, 0, 1};
            if (toks.size() == 2) spec.repeat = lp.parse_count(toks[1], "repeat count");
            config.layers.push_back(spec);
        } else {
            lp.fail("unknown layer kind '" + head + "'");
        }
    }
    if (!saw_input) throw Error(origin + ": missing 'input' header line");
    if (!saw_classes) throw Error(origin + ": missing 'classes' header line");
    shape_chain(config);  // full validation
    return config;
}

NetworkConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Built-in configurations
// ---------------------------------------------------------------------------

namespace {

void push_conv(std::vector<LayerSpec>& v, LayerKind kind, std::size_t stride,
               std::size_t out_ch, std::size_t kernel) {
    v.push_back({kind, stride, out_ch, kernel, 1});
    v.push_back({LayerKind::batchnorm, 1, 0, 0, 1});
    v.push_back({LayerKind::relu, 1, 0, 0, 1});
}

// One depthwise-separable block: 3x3 depthwise at the given stride, then a
// pointwise projection to out_ch, each followed by batchnorm + relu.
void push_separable(std::vector<LayerSpec>& v, std::size_t dw_stride, std::size_t out_ch) {
    push_conv(v, LayerKind::conv_dw, dw_stride, 0, 3);
    push_conv(v, LayerKind::conv_pw, 1, out_ch, 1);
}

// Backbone for 224x224x3 inputs ending at the 7x7x1024 stage. The last
// depthwise block keeps the 7x7 extent (stride 1), matching the printed
// input-size progression of the architecture; `block_512_repeat`
// distinguishes the verbatim single 512 block from the standard fivefold
// stack.
std::vector<LayerSpec> backbone_224(std::size_t block_512_repeat) {
    std::vector<LayerSpec> v;
    push_conv(v, LayerKind::conv_standard, 2, 32, 3);  // 224 -> 112
    push_separable(v, 1, 64);                          // 112
    push_separable(v, 2, 128);                         // 112 -> 56
    push_separable(v, 1, 128);                         // 56
    push_separable(v, 2, 256);                         // 56 -> 28
    push_separable(v, 1, 256);                         // 28
    push_separable(v, 2, 512);                         // 28 -> 14
    for (std::size_t i = 0; i < block_512_repeat; ++i) push_separable(v, 1, 512);
    push_separable(v, 2, 1024);                        // 14 -> 7
    push_separable(v, 1, 1024);                        // 7
    return v;
}

NetworkConfig make_table1_verbatim() {
    NetworkConfig c;
    c.name = "table1-verbatim";
    c.input = {3, 224, 224};
    c.hash_bits = 64;
    c.num_classes = 162;
    c.layers = backbone_224(1);
    c.layers.push_back({LayerKind::avgpool_global, 1, 0, 0, 1});
    c.layers.push_back({LayerKind::dense, 1, 64, 0, 1});
    c.layers.push_back({LayerKind::sigmoid, 1, 0, 0, 1});
    c.layers.push_back({LayerKind::dense, 1, 162, 0, 1});
    c.layers.push_back({LayerKind::softmax, 1, 0, 0, 1});
    return c;
}

NetworkConfig make_mobilenet_standard() {
    NetworkConfig c;
    c.name = "mobilenet-standard";
    c.input = {3, 224, 224};
    c.hash_bits = 0;
    c.num_classes = 1000;
    c.layers = backbone_224(5);
    c.layers.push_back({LayerKind::avgpool_global, 1, 0, 0, 1});
    c.layers.push_back({LayerKind::dense, 1, 1000, 0, 1});
    c.layers.push_back({LayerKind::softmax, 1, 0, 0, 1});
    return c;
}

// Desk-scale variant: 32x32 inputs, all channel widths divided by 8,
// 16-bit codes over 5 classes.
NetworkConfig make_toy() {
    NetworkConfig c;
    c.name = "toy";
    c.input = {3, 32, 32};
    c.hash_bits = 16;
    c.num_classes = 5;
    std::vector<LayerSpec>& v = c.layers;
    push_conv(v, LayerKind::conv_standard, 2, 4, 3);  // 32 -> 16
    push_separable(v, 1, 8);                          // 16
    push_separable(v, 2, 16);                         // 16 -> 8
    push_separable(v, 1, 16);                         // 8
    push_separable(v, 2, 32);                         // 8 -> 4
    push_separable(v, 1, 32);                         // 4
    push_separable(v, 2, 64);                         // 4 -> 2
    push_separable(v, 1, 64);                         // 2
    push_separable(v, 2, 128);                        // 2 -> 1
    push_separable(v, 1, 128);                        // 1
    v.push_back({LayerKind::avgpool_global, 1, 0, 0, 1});
    v.push_back({LayerKind::dense, 1, 16, 0, 1});
    v.push_back({LayerKind::sigmoid, 1, 0, 0, 1});
    v.push_back({LayerKind::dense, 1, 5, 0, 1});
    v.push_back({LayerKind::softmax, 1, 0, 0, 1});
    return c;
}

} // namespace

std::vector<std::string> builtin_config_names() {
    return {"table1-verbatim", "mobilenet-standard", "toy"};
}

bool is_builtin_config(const std::string& name) {
    for (const std::string& n : builtin_config_names()) {
        if (n == name) return true;
    }
    return false;
}

NetworkConfig builtin_config(const std::string& name) {
    if (name == "table1-verbatim") return make_table1_verbatim();
    if (name == "mobilenet-standard") return make_mobilenet_standard();
    if (name == "toy") return make_toy();
    throw Error("unknown built-in config '" + name + "'");
}

NetworkConfig resolve_config(const std::string& name_or_path) {
    if (is_builtin_config(name_or_path)) return builtin_config(name_or_path);
    return load_config_file(name_or_path);
}

NetworkConfig with_hash_bits(const NetworkConfig& config, std::size_t bits) {
    if (config.hash_bits == 0) {
        throw Error("config '" + config.name + "' has no hash head to resize");
    }
    if (bits == 0) throw Error("hash bit count must be >= 1");
    NetworkConfig out = config;
    out.hash_bits = bits;
    for (std::size_t i = 0; i + 1 < out.layers.size(); ++i) {
        if (out.layers[i].kind == LayerKind::dense &&
            out.layers[i + 1].kind == LayerKind::sigmoid) {
            out.layers[i].out_channels = bits;
            return out;
        }
    }
    throw Error("config '" + config.name + "': latent dense row not found");
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(NetworkConfig config, std::vector<ShapeChainRow> chain)
    : config_(std::move(config)), chain_(std::move(chain)) {
    for (const ShapeChainRow& row : chain_) {
        switch (row.spec.kind) {
            case LayerKind::conv_standard:
                layers_.push_back(std::make_unique<ConvLayer>(
                    ConvKind::standard,
                    Shape4{row.spec.out_channels, row.in.channels, row.spec.kernel},
                    row.spec.stride, conv_padding(row.spec.kernel)));
                break;
            case LayerKind::conv_dw:
                layers_.push_back(std::make_unique<ConvLayer>(
                    ConvKind::depthwise,
                    Shape4{row.in.channels, row.in.channels, row.spec.kernel},
                    row.spec.stride, conv_padding(row.spec.kernel)));
                break;
            case LayerKind::conv_pw:
                layers_.push_back(std::make_unique<ConvLayer>(
                    ConvKind::pointwise, Shape4{row.spec.out_channels, row.in.channels, 1},
                    row.spec.stride, 0));
                break;
            case LayerKind::batchnorm:
                layers_.push_back(std::make_unique<BatchNormLayer>(row.in.channels));
                break;
            case LayerKind::relu:
                layers_.push_back(std::make_unique<ReluLayer>());
                break;
            case LayerKind::avgpool_global:
                layers_.push_back(std::make_unique<GlobalAvgPoolLayer>());
                pool_layer_ = layers_.size() - 1;
                break;
            case LayerKind::dense:
                layers_.push_back(std::make_unique<DenseLayer>(
                    row.in.channels * row.in.height * row.in.width, row.spec.out_channels));
                break;
            case LayerKind::sigmoid:
                layers_.push_back(std::make_unique<SigmoidLayer>());
                latent_layer_ = layers_.size() - 1;
                break;
            case LayerKind::softmax:
                // Classifier marker: the stack output is the logits and the
                // softmax lives in the loss.
                break;
        }
    }
}

void Network::check_input(const Tensor& batch) const {
    if (batch.rank() != 4 || batch.extent(1) != config_.input.channels ||
        batch.extent(2) != config_.input.height || batch.extent(3) != config_.input.width) {
        std::ostringstream os;
        os << "config '" << config_.name << "': expected input batch [B," << config_.input.channels
           << "," << config_.input.height << "," << config_.input.width << "]";
        throw Error(os.str());
    }
}

Tensor Network::forward(const Tensor& batch, std::vector<LayerContext>& contexts) {
    check_input(batch);
    contexts.assign(layers_.size(), LayerContext{});
    Tensor cur = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        cur = layers_[i]->forward(cur, contexts[i]);
    }
    return cur;
}

Tensor Network::infer(const Tensor& batch) const {
    check_input(batch);
    Tensor cur = batch;
    for (const auto& layer : layers_) cur = layer->infer(cur);
    return cur;
}

Network::Taps Network::infer_with_taps(const Tensor& batch) const {
    check_input(batch);
    Taps taps;
    Tensor cur = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        cur = layers_[i]->infer(cur);
        if (i == pool_layer_) taps.pooled = cur;
        if (i == latent_layer_) taps.latent = cur;
    }
    taps.logits = std::move(cur);
    return taps;
}

void Network::backward(const std::vector<LayerContext>& contexts, const Tensor& grad_logits,
                       std::vector<std::vector<Tensor>>& param_grads) const {
    if (contexts.size() != layers_.size()) {
        throw Error("backward: context list does not match layer count");
    }
    param_grads.assign(layers_.size(), {});
    Tensor grad = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        grad = layers_[i]->backward(contexts[i], grad, param_grads[i]);
    }
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
        for (Tensor* t : layer->parameters()) out.push_back(t);
    }
    return out;
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void init_uniform_fan_in(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    double* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        p[i] = to_f32((2.0 * uniform01(rng) - 1.0) * bound);
    }
}

} // namespace

Network build(const NetworkConfig& config, std::uint64_t seed) {
    std::vector<ShapeChainRow> chain = shape_chain(config);
    Network net(config, std::move(chain));
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        if (auto* conv = dynamic_cast<ConvLayer*>(&net.layer(i))) {
            const Shape4& s = conv->filter_shape();
            std::size_t fan_in = 0;
            switch (conv->kind()) {
                case ConvKind::standard: fan_in = s.in_channels * s.kernel * s.kernel; break;
                case ConvKind::depthwise: fan_in = s.kernel * s.kernel; break;
                case ConvKind::pointwise: fan_in = s.in_channels; break;
            }
            init_uniform_fan_in(conv->weights(), fan_in, rng);
        } else if (auto* dense = dynamic_cast<DenseLayer*>(&net.layer(i))) {
            init_uniform_fan_in(dense->weights(), dense->in_dim(), rng);
            dense->bias().fill(0.0);
        }
        // Batchnorm keeps its constructed defaults: gamma 1, beta 0,
        // running mean 0, running variance 1.
    }
    return net;
}

} // namespace hashnet
