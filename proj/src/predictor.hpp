#pragma once

#include <string>
#include <vector>

#include "artifact.hpp"

namespace ordrec {

struct ItemProb {
    std::int64_t item = 0;
    double prob = 0.0;
};

struct PredictionRequest {
    std::string row_id;
    std::vector<std::int64_t> history;  // most-recent-last
};

struct PredictionResult {
    std::string row_id;
    std::vector<ItemProb> top_k;  // prob descending, ties by ascending item id
};

struct ScoreStats {
    std::vector<std::int64_t> loads_per_worker;
};

namespace predictor {

// Left-zero-pads (or truncates to the most recent seq_len_in items), runs the
// model, returns the top-k of the output distribution. Ties break toward the
// smaller item id, which gives every distribution a total order.
PredictionResult predict_next(const ModelArtifact& art,
                              const std::vector<std::int64_t>& history, int k);

PredictionResult predict_from_seed(const ModelArtifact& art, std::int64_t seed_item,
                                   int k);

// Iterative multi-order prediction: each step's top-1 item is appended to the
// history and the window slides. Step 1 equals predict_next.
std::vector<PredictionResult> rollout(const ModelArtifact& art,
                                      const std::vector<std::int64_t>& history,
                                      int horizon, int k_per_step);

// Parallel sharded scoring. Requests are split into contiguous chunks, one per
// worker; each worker lazily loads its own model snapshot (at most once, from
// a uniquely named scratch copy of the artifact) and scores its chunk. Results
// come back in input order, byte-identical to a single-worker run. Any worker
// failure fails the whole batch.
std::vector<PredictionResult> score_batch(const std::string& artifact_path,
                                          const std::vector<PredictionRequest>& requests,
                                          int n_workers, int k,
                                          ScoreStats* stats = nullptr);

std::vector<PredictionRequest> parse_requests(const std::string& path);
std::string format_result(const PredictionResult& r);
void write_results(const std::vector<PredictionResult>& rs, const std::string& path);

}  // namespace predictor
}  // namespace ordrec
