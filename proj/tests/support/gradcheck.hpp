#pragma once

// Central-difference gradient checking for Layer implementations.
//
// The scalar probe loss is L(y) = sum_i w[i] * y[i] with fixed random
// weights w, so dL/dy = w and every output element contributes a distinct
// gradient signal. Analytic derivatives come from one forward/backward
// pass; numeric ones perturb each input and parameter element in place
// with a symmetric step. With double-precision arithmetic and h = 1e-5 the
// truncation and roundoff errors both sit far below the 1e-4 acceptance
// threshold used by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "hashnet/layers.hpp"
#include "hashnet/tensor.hpp"

#include "test_util.hpp"

namespace gradcheck {

struct Result {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    const double scale =
        std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
    return std::fabs(analytic - numeric) / scale;
}

inline double weighted_sum(const hashnet::Tensor& y, const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += w[i] * y[i];
    return acc;
}

/// Compares analytic gradients of L = w . layer(x) against central
/// differences for every element of x and of every trainable parameter.
inline Result check_layer(hashnet::Layer& layer, hashnet::Tensor x,
                          std::mt19937_64& rng, double h = 1e-5) {
    hashnet::LayerContext ctx;
    const hashnet::Tensor y = layer.forward(x, ctx);

    std::vector<double> w(y.size());
    for (double& v : w) v = testutil::uniform(rng, -1.0, 1.0);

    hashnet::Tensor grad_out(y.shape());
    std::copy(w.begin(), w.end(), grad_out.data());

    std::vector<hashnet::Tensor> param_grads;
    const hashnet::Tensor gx = layer.backward(ctx, grad_out, param_grads);

    const auto loss_at = [&](const hashnet::Tensor& input) {
        hashnet::LayerContext scratch;
        return weighted_sum(layer.forward(input, scratch), w);
    };

    Result result;
    const auto probe = [&](double* slot, double analytic) {
        const double saved = *slot;
        *slot = saved + h;
        const double hi = loss_at(x);
        *slot = saved - h;
        const double lo = loss_at(x);
        *slot = saved;
        const double numeric = (hi - lo) / (2.0 * h);
        result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, numeric));
        ++result.checked;
    };

    for (std::size_t i = 0; i < x.size(); ++i) probe(&x.data()[i], gx[i]);

    const std::vector<hashnet::Tensor*> params = layer.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p]->size(); ++i) {
            probe(&params[p]->data()[i], param_grads[p][i]);
        }
    }
    return result;
}

} // namespace gradcheck
