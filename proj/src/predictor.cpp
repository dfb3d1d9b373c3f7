#include "predictor.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

namespace ordrec::predictor {

namespace {

std::vector<std::int64_t> pad_history(const std::vector<std::int64_t>& history,
                                      const ModelArtifact& art) {
    if (history.empty()) throw UsageError("empty history");
    for (auto item : history) {
        if (item == kPaddingItem)
            throw DataError("item id 0 is the reserved padding id");
        if (!art.vocab.contains(item))
            throw DataError("item " + std::to_string(item) + " not in vocabulary");
    }
    const std::size_t T = std::size_t(art.cfg.seq_len_in);
    std::vector<std::int64_t> padded(T, kPaddingItem);
    const std::size_t keep = std::min(history.size(), T);
    std::copy(history.end() - std::ptrdiff_t(keep), history.end(),
              padded.end() - std::ptrdiff_t(keep));
    return padded;
}

std::vector<ItemProb> top_k_of(const std::vector<float>& probs,
                               const Vocabulary& vocab, int k) {
    if (k < 1) throw UsageError("k must be >= 1");
    const std::size_t n = probs.size();
    const std::size_t m = std::min(std::size_t(k), n);
    std::vector<std::int32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    // dense index order is ascending item id, so index asc == id asc
    std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(m), idx.end(),
                      [&](std::int32_t a, std::int32_t b) {
                          if (probs[std::size_t(a)] != probs[std::size_t(b)])
                              return probs[std::size_t(a)] > probs[std::size_t(b)];
                          return a < b;
                      });
    std::vector<ItemProb> out(m);
    for (std::size_t i = 0; i < m; ++i)
        out[i] = {vocab.output_items[std::size_t(idx[i])], double(probs[std::size_t(idx[i])])};
    return out;
}

}  // namespace

PredictionResult predict_next(const ModelArtifact& art,
                              const std::vector<std::int64_t>& history, int k) {
    auto padded = pad_history(history, art);
    auto x = embedding::featurize_items(padded, art.features, art.vocab);
    auto probs = lstm::forward(art.params, std::span<const float>(x));
    PredictionResult r;
    r.top_k = top_k_of(probs, art.vocab, k);
    return r;
}

PredictionResult predict_from_seed(const ModelArtifact& art, std::int64_t seed_item,
                                   int k) {
    return predict_next(art, {seed_item}, k);
}

std::vector<PredictionResult> rollout(const ModelArtifact& art,
                                      const std::vector<std::int64_t>& history,
                                      int horizon, int k_per_step) {
    if (horizon < 1) throw UsageError("horizon must be >= 1");
    std::vector<PredictionResult> steps;
    steps.reserve(std::size_t(horizon));
    std::vector<std::int64_t> h = history;
    for (int s = 0; s < horizon; ++s) {
        PredictionResult r = predict_next(art, h, k_per_step);
        h.push_back(r.top_k.front().item);
        steps.push_back(std::move(r));
    }
    return steps;
}

namespace {

std::atomic<std::uint64_t> g_scratch_counter{0};

// Supplement-style lazy load: pull the artifact to a uniquely named local
// scratch path, deserialize, then drop the scratch copy.
ModelArtifact load_via_scratch(const std::string& artifact_path, int worker) {
    namespace fs = std::filesystem;
    std::ostringstream name;
    name << "ordrec." << ::getpid() << "." << worker << "."
         << g_scratch_counter.fetch_add(1) << ".model";
    const fs::path scratch = fs::temp_directory_path() / name.str();
    fs::copy_file(artifact_path, scratch, fs::copy_options::overwrite_existing);
    try {
        ModelArtifact art = artifact::load(scratch.string());
        fs::remove(scratch);
        return art;
    } catch (...) {
        std::error_code ec;
        fs::remove(scratch, ec);
        throw;
    }
}

}  // namespace

std::vector<PredictionResult> score_batch(const std::string& artifact_path,
                                          const std::vector<PredictionRequest>& requests,
                                          int n_workers, int k, ScoreStats* stats) {
    if (n_workers < 1) throw UsageError("worker count must be >= 1");
    std::vector<std::int64_t> loads(std::size_t(n_workers), 0);
    if (requests.empty()) {
        if (stats) stats->loads_per_worker = loads;
        return {};
    }

    // Fail before spawning anything if the artifact is unreadable; this read
    // is an integrity check, not a worker's model load.
    artifact::verify(artifact_path);

    const std::size_t n = requests.size();
    std::vector<PredictionResult> results(n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
    std::vector<std::thread> workers;
    workers.reserve(std::size_t(n_workers));

    for (int w = 0; w < n_workers; ++w) {
        const std::size_t lo = n * std::size_t(w) / std::size_t(n_workers);
        const std::size_t hi = n * std::size_t(w + 1) / std::size_t(n_workers);
        workers.emplace_back([&, w, lo, hi]() {
            try {
                std::unique_ptr<ModelArtifact> model;  // lazy: first row only
                for (std::size_t i = lo; i < hi; ++i) {
                    if (!model) {
                        model = std::make_unique<ModelArtifact>(
                            load_via_scratch(artifact_path, w));
                        loads[std::size_t(w)] += 1;
                    }
                    results[i] = predict_next(*model, requests[i].history, k);
                    results[i].row_id = requests[i].row_id;
                }
            } catch (...) {
                errors[std::size_t(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);  // all-or-nothing

    if (stats) stats->loads_per_worker = loads;
    return results;
}

std::vector<PredictionRequest> parse_requests(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<PredictionRequest> reqs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            throw DataError(path + " line " + std::to_string(lineno) +
                            ": expected row_id<TAB>history");
        PredictionRequest r;
        r.row_id = line.substr(0, tab);
        std::istringstream is(line.substr(tab + 1));
        std::string tok;
        while (std::getline(is, tok, ',')) {
            try {
                std::size_t used = 0;
                r.history.push_back(std::stoll(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw DataError(path + " line " + std::to_string(lineno) +
                                ": bad item id '" + tok + "'");
            }
        }
        if (r.history.empty())
            throw DataError(path + " line " + std::to_string(lineno) + ": empty history");
        reqs.push_back(std::move(r));
    }
    return reqs;
}

std::string format_result(const PredictionResult& r) {
    std::string out = r.row_id;
    out += '\t';
    char buf[48];
    for (std::size_t i = 0; i < r.top_k.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s%lld:%.6f", i ? "," : "",
                      (long long)r.top_k[i].item, r.top_k[i].prob);
        out += buf;
    }
    return out;
}

void write_results(const std::vector<PredictionResult>& rs, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& r : rs) out << format_result(r) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace ordrec::predictor
