#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hashnet/dataset.hpp"
#include "hashnet/hash_codes.hpp"
#include "hashnet/network.hpp"

namespace hashnet {

struct RankedItem {
    std::string image_id;
    std::size_t label = 0;
    std::size_t distance = 0;
    std::size_t book_index = 0;
};

/// Ranked retrieval list for one query: distances are non-decreasing and
/// ties keep the codebook insertion order (stable).
struct RetrievalResult {
    std::string query_id;
    std::vector<RankedItem> items;
};

/// Top-k entries of `book` by Hamming distance from `q`. Entries whose
/// image_id equals the query's are excluded (leave-one-out); k larger than
/// the candidate count returns everything ranked.
RetrievalResult query(const CodeBook& book, const BinaryCode& q, std::size_t k);

/// `rank image_id distance label` lines.
std::string result_to_text(const RetrievalResult& result, const CodeBook& book);

/// Truncated-AP normalization: the precision-at-hit sum is divided by
/// min(R,k) (default; a perfect ranking scores 1 regardless of R vs k),
/// by k, or by R.
enum class ApNorm { min_rk, by_k, by_r };

const char* ap_norm_name(ApNorm norm);
ApNorm parse_ap_norm(const std::string& name);

/// Average precision of a ranked list: sum over relevant hits i of
/// (hits so far / i), normalized per `norm`. `relevant_in_db` is R, the
/// number of same-label items in the database excluding the query itself;
/// R == 0 is an error (such queries are excluded upstream).
double average_precision(const RetrievalResult& result, std::size_t query_label,
                         std::size_t relevant_in_db, std::size_t k, ApNorm norm);

struct QueryEval {
    std::string image_id;
    std::size_t label = 0;
    std::size_t relevant = 0;  // R
    double ap = 0.0;
    bool excluded = false;  // no relevant item exists; not counted in MAP
};

struct EvalReport {
    std::size_t k = 0;
    std::size_t bits = 0;
    ApNorm norm = ApNorm::min_rk;
    std::size_t num_queries = 0;   // queries contributing to MAP
    std::size_t num_excluded = 0;  // queries with R == 0
    double map = 0.0;
    std::vector<QueryEval> per_query;

    /// `key=value` lines (map, k, K, num_queries, num_excluded) preceded
    /// by comment lines stating the protocol and AP normalization.
    std::string to_keyvalues() const;

    /// CSV `id,label,relevant,ap,excluded`.
    std::string per_query_csv() const;
};

/// Leave-one-out MAP over the whole codebook: every entry queries the
/// rest. Parallelizes across queries when HASHNET_THREADS > 1; the report
/// is independent of the thread count.
EvalReport evaluate_map(const CodeBook& book, std::size_t k = 100,
                        ApNorm norm = ApNorm::min_rk);

/// Mean Hamming distance over same-label pairs and over different-label
/// pairs.
std::pair<double, double> mean_intra_inter_hamming(const CodeBook& book);

/// Runs inference over the dataset, taps the latent sigmoid activations
/// and binarizes them. Codebook order equals dataset order.
CodeBook encode_dataset(const Network& net, const Dataset& data);

} // namespace hashnet
