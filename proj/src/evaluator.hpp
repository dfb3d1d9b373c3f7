#pragma once

#include <map>
#include <string>
#include <vector>

#include "artifact.hpp"

namespace ordrec {

struct EvalReport {
    std::int64_t n_cases = 0;
    std::int64_t n_outputs = 0;
    double mean_rank = 0;
    double median_rank = 0;
    double mean_rank_percentile = 0;  // mean_rank / |I'|
    double random_baseline_rank = 0;  // |I'| / 2
    std::map<int, double> hit_at;     // keyed by k, ascending
    std::map<int, double> ndcg_at;
    double wilcoxon_statistic = 0;
    double wilcoxon_p = 1.0;
    bool wilcoxon_exact = false;
    std::uint64_t baseline_seed = 0;
};

namespace evaluator {

// 1-based rank of the true item under the serving tie order: 1 + #strictly
// greater + #equal with a smaller dense index (= smaller item id).
std::int64_t rank_of_true(const std::vector<float>& probs, std::int32_t true_index);

// Single-relevant-item NDCG: 1/log2(1+rank) if rank <= k, else 0.
double ndcg_at_k(std::int64_t rank_of_relevant, int k);

struct WilcoxonResult {
    double w = 0;       // sum of positive-difference ranks (d = baseline - model)
    double p = 1.0;     // one-sided, alternative "model ranks are smaller"
    bool exact = false;
    int n_nonzero = 0;
};

// Paired one-sided signed-rank test. Zero differences are dropped; |d| ranks
// average over ties. Exact p enumerates all 2^n sign assignments for
// n <= exact_max_n, larger n uses the normal approximation with tie and
// continuity corrections. All differences zero -> DataError("degenerate").
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::int64_t>& model_ranks,
                                    const std::vector<std::int64_t>& baseline_ranks,
                                    int exact_max_n = 20);

// Scores every window, collects ranks, pairs them with seeded uniform baseline
// ranks in [1, |I'|] for the test. Throws DataError on an empty test set.
EvalReport evaluate(const ModelArtifact& art, const std::vector<TrainingWindow>& windows,
                    const std::vector<int>& k_list, std::uint64_t baseline_seed,
                    int exact_wilcoxon_max_n = 20);

// Flat key/value JSON document, deterministic key order, no timestamps.
std::string report_to_json(const EvalReport& r);

}  // namespace evaluator
}  // namespace ordrec
