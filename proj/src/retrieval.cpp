#include "hashnet/retrieval.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

namespace hashnet {

namespace {

std::size_t thread_count() {
    const char* env = std::getenv("HASHNET_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || v < 1) {
        throw Error("HASHNET_THREADS must be a positive integer");
    }
    return std::min<std::size_t>(static_cast<std::size_t>(v), 64);
}

/// Runs fn(i) for i in [0,n); each index writes only its own output slot,
/// so the result does not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t threads = std::min(thread_count(), n == 0 ? std::size_t{1} : n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (std::thread& th : pool) th.join();
}

} // namespace

RetrievalResult query(const CodeBook& book, const BinaryCode& q, std::size_t k) {
    if (book.codes.empty()) throw Error("query: empty codebook");
    if (k < 1) throw Error("query: k must be >= 1");
    if (q.bits.bit_count() != book.bits) {
        throw Error("query: code width " + std::to_string(q.bits.bit_count()) +
                    " does not match codebook width " + std::to_string(book.bits));
    }

    RetrievalResult result;
    result.query_id = q.image_id;
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (distance, index)
    ranked.reserve(book.codes.size());
    for (std::size_t i = 0; i < book.codes.size(); ++i) {
        const BinaryCode& c = book.codes[i];
        if (c.image_id == q.image_id) continue;  // leave-one-out
        ranked.emplace_back(hamming(c.bits, q.bits), i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t take = std::min(k, ranked.size());
    result.items.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const BinaryCode& c = book.codes[ranked[r].second];
        result.items.push_back({c.image_id, c.label, ranked[r].first, ranked[r].second});
    }
    return result;
}

std::string result_to_text(const RetrievalResult& result, const CodeBook& book) {
    std::ostringstream os;
    os << "query " << result.query_id << "\n";
    for (std::size_t r = 0; r < result.items.size(); ++r) {
        const RankedItem& item = result.items[r];
        os << (r + 1) << " " << item.image_id << " " << item.distance << " ";
        if (item.label < book.label_names.size()) {
            os << book.label_names[item.label];
        } else {
            os << item.label;
        }
        os << "\n";
    }
    return os.str();
}

const char* ap_norm_name(ApNorm norm) {
    switch (norm) {
        case ApNorm::min_rk: return "min_rk";
        case ApNorm::by_k: return "k";
        case ApNorm::by_r: return "r";
    }
    return "?";
}

ApNorm parse_ap_norm(const std::string& name) {
    if (name == "min_rk") return ApNorm::min_rk;
    if (name == "k") return ApNorm::by_k;
    if (name == "r") return ApNorm::by_r;
    throw Error("unknown AP normalization '" + name + "' (expected min_rk, k or r)");
}

double average_precision(const RetrievalResult& result, std::size_t query_label,
                         std::size_t relevant_in_db, std::size_t k, ApNorm norm) {
    if (relevant_in_db == 0) {
        throw Error("average_precision: query '" + result.query_id +
                    "' has no relevant item in the database");
    }
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < result.items.size(); ++i) {
        if (result.items[i].label != query_label) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    std::size_t denom = 0;
    switch (norm) {
        case ApNorm::min_rk: denom = std::min(relevant_in_db, k); break;
        case ApNorm::by_k: denom = k; break;
        case ApNorm::by_r: denom = relevant_in_db; break;
    }
    return sum / static_cast<double>(denom);
}

std::string EvalReport::to_keyvalues() const {
    std::ostringstream os;
    os << "# leave-one-out retrieval evaluation\n";
    os << "# AP = sum over relevant hits i of (hits_so_far / i), divided by ";
    switch (norm) {
        case ApNorm::min_rk: os << "min(R, k)"; break;
        case ApNorm::by_k: os << "k"; break;
        case ApNorm::by_r: os << "R"; break;
    }
    os << "\n";
    os << std::fixed << std::setprecision(6);
    os << "map=" << map << "\n";
    os << "k=" << k << "\n";
    os << "K=" << bits << "\n";
    os << "num_queries=" << num_queries << "\n";
    os << "num_excluded=" << num_excluded << "\n";
    os << "ap_norm=" << ap_norm_name(norm) << "\n";
    return os.str();
}

std::string EvalReport::per_query_csv() const {
    std::ostringstream os;
    os << "id,label,relevant,ap,excluded\n";
    os << std::fixed << std::setprecision(6);
    for (const QueryEval& q : per_query) {
        os << q.image_id << "," << q.label << "," << q.relevant << ",";
        if (q.excluded) {
            os << ",1\n";
        } else {
            os << q.ap << ",0\n";
        }
    }
    return os.str();
}

EvalReport evaluate_map(const CodeBook& book, std::size_t k, ApNorm norm) {
    validate(book);
    if (book.codes.empty()) throw Error("evaluate_map: empty codebook");
    if (k < 1) throw Error("evaluate_map: k must be >= 1");

    std::vector<std::size_t> class_counts;
    for (const BinaryCode& c : book.codes) {
        if (class_counts.size() <= c.label) class_counts.resize(c.label + 1, 0);
        ++class_counts[c.label];
    }

    EvalReport report;
    report.k = k;
    report.bits = book.bits;
    report.norm = norm;
    report.per_query.resize(book.codes.size());

    parallel_for(book.codes.size(), [&](std::size_t i) {
        const BinaryCode& q = book.codes[i];
        QueryEval& out = report.per_query[i];
        out.image_id = q.image_id;
        out.label = q.label;
        out.relevant = class_counts[q.label] - 1;
        if (out.relevant == 0) {
            out.excluded = true;
            return;
        }
        const RetrievalResult result = query(book, q, k);
        out.ap = average_precision(result, q.label, out.relevant, k, norm);
    });

    double sum = 0.0;
    for (const QueryEval& q : report.per_query) {
        if (q.excluded) {
            ++report.num_excluded;
        } else {
            ++report.num_queries;
            sum += q.ap;
        }
    }
    if (report.num_queries == 0) {
        throw Error("evaluate_map: every query was excluded (all classes are singletons)");
    }
    report.map = sum / static_cast<double>(report.num_queries);
    return report;
}

std::pair<double, double> mean_intra_inter_hamming(const CodeBook& book) {
    double intra_sum = 0.0, inter_sum = 0.0;
    std::size_t intra_n = 0, inter_n = 0;
    for (std::size_t i = 0; i < book.codes.size(); ++i) {
        for (std::size_t j = i + 1; j < book.codes.size(); ++j) {
            const std::size_t d = hamming(book.codes[i].bits, book.codes[j].bits);
            if (book.codes[i].label == book.codes[j].label) {
                intra_sum += static_cast<double>(d);
                ++intra_n;
            } else {
                inter_sum += static_cast<double>(d);
                ++inter_n;
            }
        }
    }
    if (intra_n == 0 || inter_n == 0) {
        throw Error("mean_intra_inter_hamming: need both same-label and cross-label pairs");
    }
    return {intra_sum / static_cast<double>(intra_n), inter_sum / static_cast<double>(inter_n)};
}

CodeBook encode_dataset(const Network& net, const Dataset& data) {
    if (!net.has_hash_head()) {
        throw Error("encode_dataset: config '" + net.config().name + "' has no hash head");
    }
    if (data.items.empty()) throw Error("encode_dataset: empty dataset");
    const InputSpec& in = net.config().input;
    const std::size_t pixels = in.channels * in.height * in.width;

    CodeBook book;
    book.bits = net.hash_bits();
    book.label_names = data.label_names;
    book.codes.reserve(data.items.size());

    const std::size_t chunk = 32;
    for (std::size_t start = 0; start < data.items.size(); start += chunk) {
        const std::size_t count = std::min(chunk, data.items.size() - start);
        Tensor batch = Tensor::zeros({count, in.channels, in.height, in.width});
        for (std::size_t b = 0; b < count; ++b) {
            const ImageRecord& item = data.items[start + b];
            if (item.chw.size() != pixels) {
                throw Error("encode_dataset: image '" + item.id +
                            "' does not match the network input");
            }
            std::memcpy(batch.data() + b * pixels, item.chw.data(), pixels * sizeof(double));
        }
        const Network::Taps taps = net.infer_with_taps(batch);
        if (taps.latent.rank() != 2 || taps.latent.extent(1) != book.bits) {
            throw Error("encode_dataset: latent tap has unexpected shape");
        }
        for (std::size_t b = 0; b < count; ++b) {
            const ImageRecord& item = data.items[start + b];
            const double* row = taps.latent.data() + b * book.bits;
            book.codes.push_back(
                {item.id, item.label, binarize({row, book.bits}, book.bits)});
        }
    }
    validate(book);
    return book;
}

} // namespace hashnet
