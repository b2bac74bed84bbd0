#include "hashnet/cost.hpp"

#include <iomanip>
#include <sstream>

namespace hashnet {

std::uint64_t standard_conv_multiadds(std::uint64_t dk, std::uint64_t m, std::uint64_t n,
                                      std::uint64_t df) {
    return dk * dk * m * n * df * df;
}

std::uint64_t separable_conv_multiadds(std::uint64_t dk, std::uint64_t m, std::uint64_t n,
                                       std::uint64_t df) {
    return dk * dk * m * df * df + m * n * df * df;
}

Ratio reduction_ratio_exact(std::uint64_t dk, std::uint64_t n) {
    return Ratio{dk * dk + n, dk * dk * n};
}

double reduction_ratio(std::uint64_t dk, std::uint64_t m, std::uint64_t n, std::uint64_t df) {
    return static_cast<double>(separable_conv_multiadds(dk, m, n, df)) /
           static_cast<double>(standard_conv_multiadds(dk, m, n, df));
}

namespace {

std::string dims_str(const ChwDims& d) {
    std::ostringstream os;
    os << d.height << "x" << d.width << "x" << d.channels;
    return os.str();
}

std::uint64_t row_params(const ShapeChainRow& row) {
    const std::uint64_t k = row.spec.kernel;
    const std::uint64_t m = row.in.channels;
    const std::uint64_t n = row.out.channels;
    switch (row.spec.kind) {
        case LayerKind::conv_standard: return k * k * m * n;
        case LayerKind::conv_dw: return k * k * m;
        case LayerKind::conv_pw: return m * n;
        case LayerKind::batchnorm: return 2 * m;
        case LayerKind::dense: {
            const std::uint64_t in = static_cast<std::uint64_t>(row.in.channels) *
                                     row.in.height * row.in.width;
            return in * n + n;
        }
        default: return 0;
    }
}

std::uint64_t row_multiadds(const ShapeChainRow& row) {
    const std::uint64_t k = row.spec.kernel;
    const std::uint64_t m = row.in.channels;
    const std::uint64_t n = row.out.channels;
    const std::uint64_t spatial = static_cast<std::uint64_t>(row.out.height) * row.out.width;
    switch (row.spec.kind) {
        case LayerKind::conv_standard: return k * k * m * n * spatial;
        case LayerKind::conv_dw: return k * k * m * spatial;
        case LayerKind::conv_pw: return m * n * spatial;
        case LayerKind::dense:
            return static_cast<std::uint64_t>(row.in.channels) * row.in.height * row.in.width * n;
        default: return 0;
    }
}

std::string row_label_str(const ShapeChainRow& row) {
    std::ostringstream os;
    os << layer_kind_name(row.spec.kind);
    switch (row.spec.kind) {
        case LayerKind::conv_standard:
            os << " /s" << row.spec.stride << " " << row.spec.kernel << "x" << row.spec.kernel
               << "->" << row.spec.out_channels;
            break;
        case LayerKind::conv_dw:
            os << " /s" << row.spec.stride << " " << row.spec.kernel << "x" << row.spec.kernel;
            break;
        case LayerKind::conv_pw:
            os << " /s" << row.spec.stride << " ->" << row.spec.out_channels;
            break;
        case LayerKind::dense:
            os << " ->" << row.spec.out_channels;
            break;
        default:
            break;
    }
    return os.str();
}

} // namespace

CostReport cost_report(const NetworkConfig& config) {
    const std::vector<ShapeChainRow> chain = shape_chain(config);
    CostReport report;
    report.config_name = config.name;
    report.rows.reserve(chain.size());
    for (const ShapeChainRow& row : chain) {
        LayerCost cost;
        cost.config_row = row.config_row;
        cost.label = row_label_str(row);
        cost.in = row.in;
        cost.out = row.out;
        cost.params = row_params(row);
        cost.multiadds = row_multiadds(row);
        report.total_params += cost.params;
        report.total_multiadds += cost.multiadds;
        report.rows.push_back(std::move(cost));
    }

    // Pair each depthwise row with the next conv row when that row is a
    // stride-1 pointwise projection; the standard equivalent is a single
    // conv with the depthwise kernel, the depthwise input channels, the
    // pointwise output channels and the pair's final output extent.
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (chain[i].spec.kind != LayerKind::conv_dw) continue;
        for (std::size_t j = i + 1; j < chain.size(); ++j) {
            const LayerKind kind = chain[j].spec.kind;
            if (kind == LayerKind::batchnorm || kind == LayerKind::relu) continue;
            if (kind == LayerKind::conv_pw && chain[j].spec.stride == 1 &&
                chain[j].in == chain[i].out) {
                PairReduction pair;
                pair.dw_index = i;
                pair.pw_index = j;
                pair.separable = report.rows[i].multiadds + report.rows[j].multiadds;
                const std::uint64_t k = chain[i].spec.kernel;
                const std::uint64_t m = chain[i].in.channels;
                const std::uint64_t n = chain[j].out.channels;
                const std::uint64_t spatial =
                    static_cast<std::uint64_t>(chain[j].out.height) * chain[j].out.width;
                pair.standard = k * k * m * n * spatial;
                pair.ratio = reduction_ratio_exact(k, n);
                report.pairs.push_back(pair);
            }
            break;
        }
    }
    return report;
}

std::uint64_t count_params(const NetworkConfig& config) {
    return cost_report(config).total_params;
}

std::uint64_t count_multiadds(const NetworkConfig& config) {
    return cost_report(config).total_multiadds;
}

std::string cost_table(const CostReport& report) {
    std::ostringstream os;
    os << "config " << report.config_name << "\n";
    os << std::left << std::setw(5) << "row" << std::setw(26) << "layer" << std::setw(14)
       << "input" << std::setw(14) << "output" << std::right << std::setw(12) << "params"
       << std::setw(14) << "multi-adds" << "\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const LayerCost& r = report.rows[i];
        os << std::left << std::setw(5) << (i + 1) << std::setw(26) << r.label << std::setw(14)
           << dims_str(r.in) << std::setw(14) << dims_str(r.out) << std::right << std::setw(12)
           << r.params << std::setw(14) << r.multiadds << "\n";
    }
    os << std::left << std::setw(5) << "" << std::setw(26) << "total" << std::setw(14) << ""
       << std::setw(14) << "" << std::right << std::setw(12) << report.total_params
       << std::setw(14) << report.total_multiadds << "\n";
    if (!report.pairs.empty()) {
        os << "\nseparable pairs (multi-adds vs the standard conv they replace):\n";
        for (const PairReduction& p : report.pairs) {
            os << "  rows " << (p.dw_index + 1) << "+" << (p.pw_index + 1) << ": " << p.separable
               << " / " << p.standard << "  ratio " << p.ratio.num << "/" << p.ratio.den << " = "
               << std::fixed << std::setprecision(6) << p.ratio.value()
               << std::defaultfloat << "\n";
        }
    }
    os << "\ntotals: " << std::fixed << std::setprecision(3)
       << static_cast<double>(report.total_params) / 1e6 << "M params, "
       << static_cast<double>(report.total_multiadds) / 1e6 << "M multi-adds\n";
    return os.str();
}

std::string cost_keyvalues(const CostReport& report) {
    std::ostringstream os;
    os << "config " << report.config_name << "\n";
    os << "rows " << report.rows.size() << "\n";
    os << "total_params " << report.total_params << "\n";
    os << "total_multiadds " << report.total_multiadds << "\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const LayerCost& r = report.rows[i];
        os << "row." << (i + 1) << ".label " << r.label << "\n";
        os << "row." << (i + 1) << ".in " << dims_str(r.in) << "\n";
        os << "row." << (i + 1) << ".out " << dims_str(r.out) << "\n";
        os << "row." << (i + 1) << ".params " << r.params << "\n";
        os << "row." << (i + 1) << ".multiadds " << r.multiadds << "\n";
    }
    for (std::size_t i = 0; i < report.pairs.size(); ++i) {
        const PairReduction& p = report.pairs[i];
        os << "pair." << (i + 1) << ".rows " << (p.dw_index + 1) << "+" << (p.pw_index + 1)
           << "\n";
        os << "pair." << (i + 1) << ".separable " << p.separable << "\n";
        os << "pair." << (i + 1) << ".standard " << p.standard << "\n";
        os << "pair." << (i + 1) << ".ratio " << p.ratio.num << "/" << p.ratio.den << "\n";
    }
    return os.str();
}

} // namespace hashnet
