#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "doctest.h"

#include "hashnet/error.hpp"
#include "hashnet/network.hpp"
#include "hashnet/tensor.hpp"

#include "support/gradcheck.hpp"
#include "support/test_util.hpp"

using hashnet::ChwDims;
using hashnet::Error;
using hashnet::InputSpec;
using hashnet::LayerKind;
using hashnet::LayerSpec;
using hashnet::Network;
using hashnet::NetworkConfig;
using hashnet::ShapeChainRow;
using hashnet::Tensor;

namespace {

LayerSpec row(LayerKind kind, std::size_t stride = 1, std::size_t out = 0,
              std::size_t kernel = 0, std::size_t repeat = 1) {
    return {kind, stride, out, kernel, repeat};
}

/// Minimal valid hash-head config over tiny inputs, used by shape and
/// gradient tests.
NetworkConfig tiny_hash_config() {
    NetworkConfig c;
    c.name = "tiny";
    c.input = {2, 4, 4};
    c.hash_bits = 4;
    c.num_classes = 3;
    c.layers = {
        row(LayerKind::conv_standard, 2, 3, 3),
        row(LayerKind::batchnorm),
        row(LayerKind::relu),
        row(LayerKind::avgpool_global),
        row(LayerKind::dense, 1, 4),
        row(LayerKind::sigmoid),
        row(LayerKind::dense, 1, 3),
        row(LayerKind::softmax),
    };
    return c;
}

NetworkConfig tiny_plain_config() {
    NetworkConfig c;
    c.name = "tiny-plain";
    c.input = {3, 1, 1};
    c.hash_bits = 0;
    c.num_classes = 4;
    c.layers = {
        row(LayerKind::dense, 1, 4),
        row(LayerKind::softmax),
    };
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// Shape chain
// ---------------------------------------------------------------------------

TEST_CASE("toy preset chains 32x32 down to 1x1") {
    const NetworkConfig toy = hashnet::builtin_config("toy");
    const std::vector<ShapeChainRow> chain = hashnet::shape_chain(toy);

    CHECK(chain.front().in == ChwDims{3, 32, 32});
    CHECK(chain.front().out == ChwDims{4, 16, 16});

    // Strided rows halve the spatial extent: 32 -> 16 -> 8 -> 4 -> 2 -> 1.
    std::vector<std::size_t> strided_heights;
    for (const ShapeChainRow& r : chain) {
        if (r.spec.stride == 2) strided_heights.push_back(r.out.height);
    }
    CHECK(strided_heights == std::vector<std::size_t>{16, 8, 4, 2, 1});

    // Head: ... avgpool -> dense 16 -> sigmoid -> dense 5 -> softmax.
    const std::size_t n = chain.size();
    CHECK(chain[n - 1].spec.kind == LayerKind::softmax);
    CHECK(chain[n - 2].spec.kind == LayerKind::dense);
    CHECK(chain[n - 2].out.channels == 5);
    CHECK(chain[n - 3].spec.kind == LayerKind::sigmoid);
    CHECK(chain[n - 4].spec.kind == LayerKind::dense);
    CHECK(chain[n - 4].out.channels == 16);
    CHECK(chain[n - 5].spec.kind == LayerKind::avgpool_global);
    CHECK(chain[n - 5].out == ChwDims{128, 1, 1});
}

TEST_CASE("224 presets reproduce the published spatial progression") {
    for (const char* name : {"table1-verbatim", "mobilenet-standard"}) {
        const NetworkConfig c = hashnet::builtin_config(name);
        const std::vector<ShapeChainRow> chain = hashnet::shape_chain(c);
        CHECK(chain.front().in == ChwDims{3, 224, 224});
        CHECK(chain.front().out == ChwDims{32, 112, 112});

        std::vector<std::size_t> strided_heights;
        for (const ShapeChainRow& r : chain) {
            if (r.spec.stride == 2) strided_heights.push_back(r.out.height);
        }
        CHECK(strided_heights == std::vector<std::size_t>{112, 56, 28, 14, 7});

        // The deepest feature map is 7x7x1024 before pooling.
        for (const ShapeChainRow& r : chain) {
            if (r.spec.kind == LayerKind::avgpool_global) {
                CHECK(r.in == ChwDims{1024, 7, 7});
                CHECK(r.out == ChwDims{1024, 1, 1});
            }
        }
    }

    const NetworkConfig verbatim = hashnet::builtin_config("table1-verbatim");
    CHECK(verbatim.hash_bits == 64);
    CHECK(verbatim.num_classes == 162);

    const NetworkConfig standard = hashnet::builtin_config("mobilenet-standard");
    CHECK(standard.hash_bits == 0);
    CHECK(standard.num_classes == 1000);
    for (const LayerSpec& s : standard.layers) CHECK(s.kind != LayerKind::sigmoid);
}

TEST_CASE("repeat rows expand into consecutive chain entries") {
    NetworkConfig c = tiny_plain_config();
    c.input = {3, 8, 8};
    c.layers = {
        row(LayerKind::conv_dw, 1, 0, 3, 3),
        row(LayerKind::avgpool_global),
        row(LayerKind::dense, 1, 4),
        row(LayerKind::softmax),
    };
    const std::vector<ShapeChainRow> chain = hashnet::shape_chain(c);
    REQUIRE(chain.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(chain[i].config_row == 1);
        CHECK(chain[i].repeat_index == i);
        CHECK(chain[i].spec.kind == LayerKind::conv_dw);
    }
    CHECK(chain[3].config_row == 2);
}

TEST_CASE("shape chain rejects malformed configs") {
    // Zero input extent.
    NetworkConfig c = tiny_plain_config();
    c.input.channels = 0;
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // Fewer than two classes.
    c = tiny_plain_config();
    c.num_classes = 1;
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // Softmax must be last...
    c = tiny_plain_config();
    c.layers = {row(LayerKind::softmax), row(LayerKind::dense, 1, 4)};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // ...and appear exactly once.
    c = tiny_plain_config();
    c.layers = {row(LayerKind::dense, 1, 4), row(LayerKind::softmax),
                row(LayerKind::softmax)};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);
    c.layers = {row(LayerKind::dense, 1, 4)};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // The row before softmax must be a dense layer with `classes` outputs.
    c = tiny_plain_config();
    c.layers = {row(LayerKind::dense, 1, 5), row(LayerKind::softmax)};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // A hash config needs dense(K) -> sigmoid -> dense(classes) -> softmax.
    c = tiny_hash_config();
    c.layers[4].out_channels = 5;  // latent width != hash_bits
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    c = tiny_hash_config();
    c.layers.erase(c.layers.begin() + 5);  // drop the sigmoid
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // Sigmoid rows are reserved for the hash head.
    c = tiny_plain_config();
    c.layers = {row(LayerKind::sigmoid), row(LayerKind::dense, 1, 4),
                row(LayerKind::softmax)};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);

    // Pooling a non-square feature map.
    c = tiny_hash_config();
    c.input = {2, 4, 6};
    CHECK_THROWS_AS(hashnet::shape_chain(c), Error);
}

TEST_CASE("shape chain errors point at the offending row") {
    NetworkConfig c = tiny_plain_config();
    c.layers = {row(LayerKind::dense, 1, 0), row(LayerKind::softmax)};
    CHECK_THROWS_WITH_AS(hashnet::shape_chain(c),
                         doctest::Contains("row 1"), Error);
}

// ---------------------------------------------------------------------------
// Config text round trip
// ---------------------------------------------------------------------------

TEST_CASE("config text round-trips every builtin") {
    for (const std::string& name : hashnet::builtin_config_names()) {
        const NetworkConfig c = hashnet::builtin_config(name);
        const std::string text = hashnet::config_to_text(c);
        const NetworkConfig back = hashnet::parse_config_text(text, "roundtrip");
        CHECK(back == c);
    }
}

TEST_CASE("config text round-trips repeat counts") {
    NetworkConfig c = tiny_plain_config();
    c.input = {3, 8, 8};
    c.layers = {
        row(LayerKind::conv_dw, 1, 0, 3, 3),
        row(LayerKind::avgpool_global),
        row(LayerKind::dense, 1, 4),
        row(LayerKind::softmax),
    };
    CHECK(hashnet::parse_config_text(hashnet::config_to_text(c)) == c);
}

TEST_CASE("config parser accepts comments and blank lines") {
    const std::string text =
        "# a classifier head on raw pixels\n"
        "name tiny-plain\n"
        "input 3 1 1\n"
        "bits 0\n"
        "\n"
        "classes 4\n"
        "dense 4\n"
        "softmax\n";
    const NetworkConfig c = hashnet::parse_config_text(text);
    CHECK(c == tiny_plain_config());
}

TEST_CASE("config parser rejects malformed text") {
    auto bad = [](const std::string& text) {
        CHECK_THROWS_AS(hashnet::parse_config_text(text, "bad"), Error);
    };
    bad("");                                                 // empty
    bad("classes 4\ndense 4\nsoftmax\n");                    // missing input
    bad("input 3 1 1\ndense 4\nsoftmax\n");                  // missing classes
    bad("input 3 1 1\nclasses 4\nwarp 4\nsoftmax\n");        // unknown kind
    bad("input 3 1 1\nclasses 4\nconv x2 8 3\nsoftmax\n");   // bad stride token
    bad("input 3 1 1\nclasses 4\ndense\nsoftmax\n");         // missing arg
    bad("input 3 1 1\nclasses 4\ndense 4 9 9\nsoftmax\n");   // extra args
    bad("input 3 1 1\nclasses 4\ndense four\nsoftmax\n");    // non-numeric
    bad("input 3 1\nclasses 4\ndense 4\nsoftmax\n");         // short header
}

TEST_CASE("config parse errors carry the origin and line number") {
    try {
        hashnet::parse_config_text("input 3 1 1\nclasses 4\nwarp 1\nsoftmax\n", "my.cfg");
        FAIL("expected an Error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("my.cfg") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
}

TEST_CASE("config files load from disk and resolve by name or path") {
    testutil::TempDir dir;
    const NetworkConfig toy = hashnet::builtin_config("toy");
    const std::string path = dir.file("net.cfg");
    testutil::write_file(path, hashnet::config_to_text(toy));

    CHECK(hashnet::load_config_file(path) == toy);
    CHECK(hashnet::resolve_config(path) == toy);
    CHECK(hashnet::resolve_config("toy") == toy);
    CHECK(hashnet::is_builtin_config("toy"));
    CHECK_FALSE(hashnet::is_builtin_config("net.cfg"));
    CHECK_THROWS_AS(hashnet::load_config_file(dir.file("absent.cfg")), Error);
    CHECK_THROWS_AS(hashnet::builtin_config("absent"), Error);
}

TEST_CASE("with_hash_bits rewrites the latent width") {
    const NetworkConfig toy = hashnet::builtin_config("toy");
    const NetworkConfig narrow = hashnet::with_hash_bits(toy, 8);
    CHECK(narrow.hash_bits == 8);
    CHECK_NOTHROW(hashnet::shape_chain(narrow));

    std::size_t latent = 0;
    for (std::size_t i = 0; i + 1 < narrow.layers.size(); ++i) {
        if (narrow.layers[i].kind == LayerKind::dense &&
            narrow.layers[i + 1].kind == LayerKind::sigmoid) {
            latent = narrow.layers[i].out_channels;
        }
    }
    CHECK(latent == 8);

    CHECK_THROWS_AS(hashnet::with_hash_bits(toy, 0), Error);
    CHECK_THROWS_AS(
        hashnet::with_hash_bits(hashnet::builtin_config("mobilenet-standard"), 16), Error);
}

// ---------------------------------------------------------------------------
// Instantiated networks
// ---------------------------------------------------------------------------

TEST_CASE("build is deterministic per seed and keeps parameters on the f32 grid") {
    const NetworkConfig toy = hashnet::builtin_config("toy");
    Network a = hashnet::build(toy, 7);
    Network b = hashnet::build(toy, 7);
    Network c = hashnet::build(toy, 8);

    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    REQUIRE(pa.size() == pc.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(*pa[i] == *pb[i]);
        if (!(*pa[i] == *pc[i])) any_diff = true;

        Tensor quantized = *pa[i];
        hashnet::quantize_f32(quantized);
        CHECK(quantized == *pa[i]);
    }
    CHECK(any_diff);
    CHECK(a.step == 0);
}

TEST_CASE("initialization respects fan-in bounds and zero biases") {
    Network net = hashnet::build(tiny_hash_config(), 3);
    // Layer 0 is the 3x3 standard conv over 2 input channels: fan-in 18.
    const auto* conv = dynamic_cast<const hashnet::ConvLayer*>(&net.layer(0));
    REQUIRE(conv != nullptr);
    const double bound = std::sqrt(6.0 / 18.0);
    double spread = 0.0;
    for (std::size_t i = 0; i < conv->weights().size(); ++i) {
        const double v = conv->weights()[i];
        CHECK(std::fabs(v) <= bound);
        spread = std::max(spread, std::fabs(v));
    }
    CHECK(spread > 0.0);

    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        if (auto* dense = dynamic_cast<hashnet::DenseLayer*>(&net.layer(i))) {
            for (std::size_t j = 0; j < dense->bias().size(); ++j) {
                CHECK(dense->bias()[j] == 0.0);
            }
        }
    }
}

TEST_CASE("network forward produces logits and validates input shape") {
    std::mt19937_64 rng(401);
    Network net = hashnet::build(tiny_hash_config(), 5);
    Tensor x = testutil::random_tensor({2, 2, 4, 4}, rng, 0.0, 1.0);

    Tensor logits = net.infer(x);
    CHECK(logits.shape() == std::vector<std::size_t>{2, 3});

    CHECK_THROWS_AS(net.infer(Tensor({2, 3, 4, 4})), Error);
    CHECK_THROWS_AS(net.infer(Tensor({2, 2, 5, 4})), Error);
    CHECK_THROWS_AS(net.infer(Tensor({2, 4, 4})), Error);
}

TEST_CASE("taps expose pooled features and latent activations") {
    std::mt19937_64 rng(402);
    Network net = hashnet::build(hashnet::builtin_config("toy"), 5);
    CHECK(net.has_hash_head());
    CHECK(net.hash_bits() == 16);
    CHECK(net.num_classes() == 5);

    Tensor x = testutil::random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0);
    const Network::Taps taps = net.infer_with_taps(x);
    CHECK(taps.logits.shape() == std::vector<std::size_t>{2, 5});
    CHECK(taps.pooled.shape() == std::vector<std::size_t>{2, 128, 1, 1});
    CHECK(taps.latent.shape() == std::vector<std::size_t>{2, 16});
    for (std::size_t i = 0; i < taps.latent.size(); ++i) {
        CHECK(taps.latent[i] > 0.0);
        CHECK(taps.latent[i] < 1.0);
    }

    Network plain = hashnet::build(tiny_plain_config(), 5);
    CHECK_FALSE(plain.has_hash_head());
    const Network::Taps plain_taps =
        plain.infer_with_taps(testutil::random_tensor({1, 3, 1, 1}, rng));
    CHECK(plain_taps.latent.empty());
}

TEST_CASE("networks without batch statistics infer exactly like they train") {
    std::mt19937_64 rng(403);
    Network net = hashnet::build(tiny_plain_config(), 9);
    Tensor x = testutil::random_tensor({3, 3, 1, 1}, rng);
    std::vector<hashnet::LayerContext> ctxs;
    CHECK(net.forward(x, ctxs) == net.infer(x));
}

TEST_CASE("end-to-end parameter gradients match central differences") {
    std::mt19937_64 rng(404);
    Network net = hashnet::build(tiny_hash_config(), 11);
    Tensor x = testutil::random_tensor({3, 2, 4, 4}, rng, 0.0, 1.0);
    const std::vector<std::size_t> labels = {0, 2, 1};

    std::vector<hashnet::LayerContext> ctxs;
    Tensor logits = net.forward(x, ctxs);
    auto [loss, grad_logits] = hashnet::softmax_cross_entropy_batch(logits, labels);
    CHECK(std::isfinite(loss));

    std::vector<std::vector<Tensor>> param_grads;
    net.backward(ctxs, grad_logits, param_grads);

    std::vector<Tensor> flat_grads;
    for (auto& per_layer : param_grads) {
        for (Tensor& g : per_layer) flat_grads.push_back(std::move(g));
    }
    const std::vector<Tensor*> params = net.parameters();
    REQUIRE(params.size() == flat_grads.size());

    const auto loss_now = [&]() {
        std::vector<hashnet::LayerContext> scratch;
        return hashnet::softmax_cross_entropy_batch(net.forward(x, scratch), labels).first;
    };
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p]->size(); ++i) {
            const double saved = (*params[p])[i];
            (*params[p])[i] = saved + h;
            const double hi = loss_now();
            (*params[p])[i] = saved - h;
            const double lo = loss_now();
            (*params[p])[i] = saved;
            worst = std::max(worst,
                             gradcheck::rel_err(flat_grads[p][i], (hi - lo) / (2.0 * h)));
        }
    }
    CHECK(worst < 1e-4);
}
