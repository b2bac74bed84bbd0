#include "hashnet/trainer.hpp"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <random>
#include <sstream>

namespace hashnet {

void validate(const TrainConfig& config) {
    if (!(config.initial_lr > 0.0)) throw Error("train config: initial learning rate must be > 0");
    if (!(config.decay_factor > 0.0 && config.decay_factor <= 1.0)) {
        throw Error("train config: decay factor must be in (0,1]");
    }
    if (config.decay_interval < 1) throw Error("train config: decay interval must be >= 1");
    if (config.batch_size < 1) throw Error("train config: batch size must be >= 1");
    if (config.log_every < 1) throw Error("train config: log interval must be >= 1");
    if (config.momentum < 0.0 || config.momentum >= 1.0) {
        throw Error("train config: momentum must be in [0,1)");
    }
}

double lr_at(const TrainConfig& config, std::size_t iteration) {
    const std::size_t decays = iteration / config.decay_interval;
    return config.initial_lr * std::pow(config.decay_factor, static_cast<double>(decays));
}

namespace {

/// p <- p - lr * g, rounded back onto the f32 grid. With momentum, g is
/// first folded into the velocity buffer (kept in doubles; momentum is an
/// off-by-default extension and the velocity is not checkpointed).
void apply_update(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr,
                  double momentum, std::vector<Tensor>* velocity) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (g.shape() != p.shape()) {
            throw Error("sgd update: gradient shape mismatch on parameter " +
                        std::to_string(i));
        }
        double* pv = p.data();
        const double* gv = g.data();
        if (momentum > 0.0) {
            double* vv = (*velocity)[i].data();
            for (std::size_t j = 0; j < p.size(); ++j) {
                vv[j] = momentum * vv[j] + gv[j];
                pv[j] = to_f32(pv[j] - lr * vv[j]);
            }
        } else {
            for (std::size_t j = 0; j < p.size(); ++j) {
                pv[j] = to_f32(pv[j] - lr * gv[j]);
            }
        }
    }
}

std::vector<Tensor> flatten_grads(std::vector<std::vector<Tensor>>& per_layer) {
    std::vector<Tensor> flat;
    for (auto& layer_grads : per_layer) {
        for (Tensor& g : layer_grads) flat.push_back(std::move(g));
    }
    return flat;
}

double run_step(Network& net, const Tensor& batch, const std::vector<std::size_t>& labels,
                double lr, double momentum, std::vector<Tensor>* velocity) {
    std::vector<LayerContext> contexts;
    const Tensor logits = net.forward(batch, contexts);
    auto [loss, grad_logits] = softmax_cross_entropy_batch(logits, labels);
    if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite training loss (" << loss << ")";
        throw DivergenceError(os.str());
    }
    std::vector<std::vector<Tensor>> param_grads;
    net.backward(contexts, grad_logits, param_grads);
    std::vector<Tensor*> params = net.parameters();
    std::vector<Tensor> grads = flatten_grads(param_grads);
    if (grads.size() != params.size()) {
        throw Error("sgd update: gradient count mismatch");
    }
    apply_update(params, grads, lr, momentum, velocity);
    return loss;
}

void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

double sgd_step(Network& net, const Tensor& batch, const std::vector<std::size_t>& labels,
                double lr) {
    return run_step(net, batch, labels, lr, 0.0, nullptr);
}

std::string TrainLog::to_text() const {
    std::ostringstream os;
    os << "# iter lr loss\n";
    for (const LogEntry& e : entries) {
        os << "iter " << e.iteration << " lr " << e.lr << " loss " << std::fixed
           << std::setprecision(6) << e.mean_loss << std::defaultfloat << "\n";
    }
    return os.str();
}

TrainLog train(Network& net, const Dataset& data, const TrainConfig& config) {
    validate(config);
    if (data.items.empty()) throw Error("train: empty dataset");
    const InputSpec& in = net.config().input;
    for (const ImageRecord& item : data.items) {
        if (item.chw.rank() != 3 || item.chw.extent(0) != in.channels ||
            item.chw.extent(1) != in.height || item.chw.extent(2) != in.width) {
            throw Error("train: image '" + item.id + "' does not match the network input " +
                        std::to_string(in.channels) + "x" + std::to_string(in.height) + "x" +
                        std::to_string(in.width));
        }
        if (item.label >= net.num_classes()) {
            throw Error("train: image '" + item.id + "' has label " +
                        std::to_string(item.label) + ", network has " +
                        std::to_string(net.num_classes()) + " classes");
        }
    }

    TrainLog log;
    if (config.max_iterations == 0) return log;

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t pos = order.size();  // forces a shuffle before the first draw

    std::vector<Tensor> velocity;
    std::vector<Tensor*> params = net.parameters();
    if (config.momentum > 0.0) {
        velocity.reserve(params.size());
        for (const Tensor* p : params) velocity.push_back(Tensor::zeros(p->shape()));
    }

    const std::size_t pixels = in.channels * in.height * in.width;
    Tensor batch = Tensor::zeros({config.batch_size, in.channels, in.height, in.width});
    std::vector<std::size_t> labels(config.batch_size);

    double window_loss = 0.0;
    std::size_t window_count = 0;
    for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            if (pos == order.size()) {
                fisher_yates(order, rng);
                pos = 0;
            }
            const ImageRecord& item = data.items[order[pos++]];
            std::memcpy(batch.data() + b * pixels, item.chw.data(), pixels * sizeof(double));
            labels[b] = item.label;
        }
        const double lr = lr_at(config, iter);
        double loss = 0.0;
        try {
            loss = run_step(net, batch, labels, lr, config.momentum,
                            velocity.empty() ? nullptr : &velocity);
        } catch (const DivergenceError& e) {
            throw DivergenceError("iteration " + std::to_string(iter) + ": " + e.what());
        }
        net.step += 1;
        window_loss += loss;
        window_count += 1;
        if ((iter + 1) % config.log_every == 0 || iter + 1 == config.max_iterations) {
            log.entries.push_back({iter, lr, window_loss / static_cast<double>(window_count)});
            window_loss = 0.0;
            window_count = 0;
        }
    }
    return log;
}

double classify_accuracy(const Network& net, const Dataset& data) {
    if (data.items.empty()) throw Error("classify_accuracy: empty dataset");
    const InputSpec& in = net.config().input;
    const std::size_t pixels = in.channels * in.height * in.width;
    std::size_t correct = 0;
    const std::size_t chunk = 32;
    for (std::size_t start = 0; start < data.items.size(); start += chunk) {
        const std::size_t count = std::min(chunk, data.items.size() - start);
        Tensor batch = Tensor::zeros({count, in.channels, in.height, in.width});
        for (std::size_t b = 0; b < count; ++b) {
            std::memcpy(batch.data() + b * pixels, data.items[start + b].chw.data(),
                        pixels * sizeof(double));
        }
        const Tensor logits = net.infer(batch);
        for (std::size_t b = 0; b < count; ++b) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.extent(1); ++c) {
                if (logits(b, c) > logits(b, best)) best = c;
            }
            if (best == data.items[start + b].label) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.items.size());
}

} // namespace hashnet
