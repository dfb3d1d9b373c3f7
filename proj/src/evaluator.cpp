#include "evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace ordrec::evaluator {

std::int64_t rank_of_true(const std::vector<float>& probs, std::int32_t true_index) {
    if (true_index < 0 || std::size_t(true_index) >= probs.size())
        throw UsageError("true index out of range");
    const float pt = probs[std::size_t(true_index)];
    std::int64_t rank = 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > pt) ++rank;
        else if (probs[i] == pt && std::int32_t(i) < true_index) ++rank;
    }
    return rank;
}

double ndcg_at_k(std::int64_t rank_of_relevant, int k) {
    if (k < 1) throw UsageError("k must be >= 1");
    if (rank_of_relevant > k) return 0.0;
    return 1.0 / std::log2(1.0 + double(rank_of_relevant));
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::int64_t>& model_ranks,
                                    const std::vector<std::int64_t>& baseline_ranks,
                                    int exact_max_n) {
    if (model_ranks.size() != baseline_ranks.size())
        throw UsageError("paired samples must have equal length");
    if (model_ranks.empty()) throw UsageError("empty paired sample");

    // one-sided alternative "model ranks are smaller", so d > 0 is evidence
    std::vector<std::int64_t> d;
    for (std::size_t i = 0; i < model_ranks.size(); ++i) {
        const std::int64_t di = baseline_ranks[i] - model_ranks[i];
        if (di != 0) d.push_back(di);
    }
    if (d.empty()) throw DataError("degenerate: all paired differences are zero");
    const int n = int(d.size());

    // average ranks of |d|; doubled to stay integral through .5 averages
    std::vector<int> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::llabs(d[std::size_t(a)]) < std::llabs(d[std::size_t(b)]);
    });
    std::vector<std::int64_t> rank2(d.size(), 0);
    std::vector<std::int64_t> tie_sizes;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && std::llabs(d[std::size_t(order[j])]) ==
                                       std::llabs(d[std::size_t(order[i])]))
            ++j;
        const std::int64_t avg2 = std::int64_t(i + 1) + std::int64_t(j);  // 2 * mean rank
        for (std::size_t t = i; t < j; ++t) rank2[std::size_t(order[t])] = avg2;
        tie_sizes.push_back(std::int64_t(j - i));
        i = j;
    }

    std::int64_t w2 = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) w2 += rank2[i];

    WilcoxonResult res;
    res.n_nonzero = n;
    res.w = double(w2) / 2.0;

    if (n <= exact_max_n) {
        // null distribution: every sign assignment equally likely
        std::int64_t ge = 0;
        const std::uint64_t total = 1ULL << n;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            std::int64_t s2 = 0;
            for (int b = 0; b < n; ++b)
                if (mask & (1ULL << b)) s2 += rank2[std::size_t(b)];
            if (s2 >= w2) ++ge;
        }
        res.p = double(ge) / double(total);
        res.exact = true;
        return res;
    }

    if (n < 5)
        throw UsageError("normal approximation needs n >= 5; raise the exact limit");
    const double dn = double(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
    for (auto t : tie_sizes) var -= double(t * t * t - t) / 48.0;
    const double z = (res.w - mean - 0.5) / std::sqrt(var);
    res.p = 0.5 * std::erfc(z / std::sqrt(2.0));  // P(W >= w_obs)
    res.exact = false;
    return res;
}

EvalReport evaluate(const ModelArtifact& art, const std::vector<TrainingWindow>& windows,
                    const std::vector<int>& k_list, std::uint64_t baseline_seed,
                    int exact_wilcoxon_max_n) {
    if (windows.empty()) throw DataError("empty test set");
    if (k_list.empty()) throw UsageError("need at least one k");
    for (int k : k_list)
        if (k < 1) throw UsageError("k values must be >= 1");

    const std::int64_t n_out = art.vocab.n_outputs();
    std::vector<std::int64_t> ranks;
    ranks.reserve(windows.size());
    for (const auto& w : windows) {
        auto it = art.vocab.output_index.find(w.label);
        if (it == art.vocab.output_index.end())
            throw DataError("label " + std::to_string(w.label) +
                            " not in the model's output vocabulary");
        auto x = embedding::featurize_items(w.inputs, art.features, art.vocab);
        auto probs = lstm::forward(art.params, std::span<const float>(x));
        ranks.push_back(rank_of_true(probs, it->second));
    }

    EvalReport rep;
    rep.n_cases = std::int64_t(ranks.size());
    rep.n_outputs = n_out;
    rep.baseline_seed = baseline_seed;
    rep.random_baseline_rank = double(n_out) / 2.0;

    double sum = 0;
    for (auto r : ranks) sum += double(r);
    rep.mean_rank = sum / double(ranks.size());
    rep.mean_rank_percentile = rep.mean_rank / double(n_out);

    std::vector<std::int64_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    rep.median_rank = m % 2 ? double(sorted[m / 2])
                            : 0.5 * double(sorted[m / 2 - 1] + sorted[m / 2]);

    for (int k : k_list) {
        std::int64_t hits = 0;
        double ndcg = 0;
        for (auto r : ranks) {
            if (r <= k) ++hits;
            ndcg += ndcg_at_k(r, k);
        }
        rep.hit_at[k] = double(hits) / double(ranks.size());
        rep.ndcg_at[k] = ndcg / double(ranks.size());
    }

    Rng rng(splitmix64(baseline_seed ^ 0x62617365726e6bULL));  // "basernk"
    std::vector<std::int64_t> baseline(ranks.size());
    for (auto& b : baseline) b = rng.next_range(1, n_out);
    const auto wil = wilcoxon_signed_rank(ranks, baseline, exact_wilcoxon_max_n);
    rep.wilcoxon_statistic = wil.w;
    rep.wilcoxon_p = wil.p;
    rep.wilcoxon_exact = wil.exact;
    return rep;
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n_cases"] = r.n_cases;
    j["n_outputs"] = r.n_outputs;
    j["mean_rank"] = r.mean_rank;
    j["median_rank"] = r.median_rank;
    j["mean_rank_percentile"] = r.mean_rank_percentile;
    j["random_baseline_rank"] = r.random_baseline_rank;
    for (const auto& [k, v] : r.hit_at) j["hit_at_" + std::to_string(k)] = v;
    for (const auto& [k, v] : r.ndcg_at) j["ndcg_at_" + std::to_string(k)] = v;
    j["wilcoxon_statistic"] = r.wilcoxon_statistic;
    j["wilcoxon_p"] = r.wilcoxon_p;
    j["wilcoxon_exact"] = r.wilcoxon_exact;
    j["baseline_seed"] = r.baseline_seed;
    return j.dump(2) + "\n";
}

}  // namespace ordrec::evaluator
