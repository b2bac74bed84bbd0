#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hashnet/network.hpp"

namespace hashnet {

/// Multiply-accumulate count of a standard convolution: dk*dk kernel over
/// m input channels producing n output channels at a df x df output extent.
std::uint64_t standard_conv_multiadds(std::uint64_t dk, std::uint64_t m, std::uint64_t n,
                                      std::uint64_t df);

/// Cost of the factorized pair replacing the standard convolution above:
/// a dk x dk depthwise pass over m channels plus a 1x1 pointwise
/// projection from m to n channels, both at a df x df output extent.
std::uint64_t separable_conv_multiadds(std::uint64_t dk, std::uint64_t m, std::uint64_t n,
                                       std::uint64_t df);

/// Exact rational value, kept unreduced for cross-multiplication checks.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// separable/standard cost quotient in exact arithmetic. The m and df
/// factors cancel algebraically, leaving (dk^2 + n) / (dk^2 * n),
/// i.e. 1/n + 1/dk^2.
Ratio reduction_ratio_exact(std::uint64_t dk, std::uint64_t n);

/// The same quotient evaluated numerically from the two cost formulas.
double reduction_ratio(std::uint64_t dk, std::uint64_t m, std::uint64_t n, std::uint64_t df);

/// Per-layer cost accounting for one expanded chain row.
struct LayerCost {
    std::size_t config_row = 0;  // 1-based row in the config
    std::string label;
    ChwDims in;
    ChwDims out;
    std::uint64_t params = 0;
    std::uint64_t multiadds = 0;
};

/// One depthwise + pointwise pair together with the standard convolution
/// it replaces (same kernel, channels and output extent).
struct PairReduction {
    std::size_t dw_index = 0;  // indices into CostReport::rows
    std::size_t pw_index = 0;
    std::uint64_t separable = 0;
    std::uint64_t standard = 0;
    Ratio ratio;  // exact separable/standard quotient
};

struct CostReport {
    std::string config_name;
    std::vector<LayerCost> rows;
    std::vector<PairReduction> pairs;
    std::uint64_t total_params = 0;
    std::uint64_t total_multiadds = 0;
};

/// Walks the validated shape chain and accounts every layer. Parameter
/// counts: conv dk*dk*m*n (standard), dk*dk*m (depthwise), m*n (pointwise);
/// batchnorm 2 per channel (scale/shift; running stats not counted); dense
/// in*out + out. Multiply-adds: conv formulas at each layer's own output
/// extent, dense in*out, everything else 0.
CostReport cost_report(const NetworkConfig& config);

std::uint64_t count_params(const NetworkConfig& config);
std::uint64_t count_multiadds(const NetworkConfig& config);

/// Human-readable aligned table, one line per chain row plus pair and
/// total summaries.
std::string cost_table(const CostReport& report);

/// Machine-readable `key value` lines (totals, per-row and per-pair).
std::string cost_keyvalues(const CostReport& report);

} // namespace hashnet
