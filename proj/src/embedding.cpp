#include "embedding.hpp"

#include <algorithm>
#include <map>

namespace ordrec::embedding {

std::vector<double> negative_sampling_cdf(const std::vector<std::int64_t>& counts) {
    std::vector<double> cdf(counts.size());
    double total = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += std::pow(double(counts[i]), 0.75);
        cdf[i] = total;
    }
    for (auto& x : cdf) x /= total;
    return cdf;
}

namespace {

std::size_t sample_cdf(const std::vector<double>& cdf, double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return std::size_t(it - cdf.begin());
}

}  // namespace

Word2VecModel train_word2vec(const std::vector<PurchaseSequence>& view_seqs,
                             const Word2VecConfig& cfg) {
    if (cfg.window < 1 || cfg.dim < 1 || cfg.negatives < 1)
        throw UsageError("word2vec config: window, dim and negatives must be >= 1");
    if (view_seqs.empty()) throw DataError("no view sequences");

    // Frequency pass; ordered map so rows come out in ascending item id.
    std::map<std::int64_t, std::int64_t> freq;
    for (const auto& s : view_seqs)
        for (auto item : s.items) ++freq[item];

    Word2VecModel m;
    m.cfg = cfg;
    std::vector<std::int64_t> counts;
    for (const auto& [item, c] : freq) {
        if (c < cfg.min_count) continue;
        m.index.emplace(item, std::int32_t(m.items.size()));
        m.items.push_back(item);
        counts.push_back(c);
    }
    if (m.items.empty()) throw DataError("no training pairs");

    // min_count-filtered items drop out of the sentences entirely.
    std::vector<std::vector<std::int32_t>> sentences;
    sentences.reserve(view_seqs.size());
    std::int64_t pairs_per_epoch = 0;
    for (const auto& s : view_seqs) {
        std::vector<std::int32_t> sent;
        sent.reserve(s.items.size());
        for (auto item : s.items) {
            auto it = m.index.find(item);
            if (it != m.index.end()) sent.push_back(it->second);
        }
        const std::int64_t n = std::int64_t(sent.size());
        for (std::int64_t p = 0; p < n; ++p) {
            std::int64_t lo = std::max<std::int64_t>(0, p - cfg.window);
            std::int64_t hi = std::min<std::int64_t>(n - 1, p + cfg.window);
            pairs_per_epoch += hi - lo;  // excludes the center itself
        }
        if (!sent.empty()) sentences.push_back(std::move(sent));
    }
    if (pairs_per_epoch == 0) throw DataError("no training pairs");

    const std::size_t d = std::size_t(cfg.dim);
    const std::size_t n_rows = m.items.size();
    m.input_vectors.resize(n_rows * d);
    m.context_vectors.assign(n_rows * d, 0.0f);
    Rng init_rng(splitmix64(cfg.seed));
    for (auto& x : m.input_vectors)
        x = float((init_rng.next_double() - 0.5) / double(cfg.dim));

    const auto cdf = negative_sampling_cdf(counts);
    Rng rng(splitmix64(cfg.seed ^ 0x5eedf00dULL));
    const double total_pairs = double(pairs_per_epoch) * std::max(cfg.epochs, 1);
    std::int64_t done = 0;
    std::vector<float> dv(d);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& sent : sentences) {
            const std::int64_t n = std::int64_t(sent.size());
            for (std::int64_t p = 0; p < n; ++p) {
                std::int64_t lo = std::max<std::int64_t>(0, p - cfg.window);
                std::int64_t hi = std::min<std::int64_t>(n - 1, p + cfg.window);
                for (std::int64_t q = lo; q <= hi; ++q) {
                    if (q == p) continue;
                    const float alpha =
                        float(cfg.initial_lr *
                              std::max(1e-4, 1.0 - double(done) / total_pairs));
                    ++done;
                    const std::int32_t center = sent[std::size_t(p)];
                    const std::int32_t ctx = sent[std::size_t(q)];
                    float* v = m.input_vectors.data() + std::size_t(center) * d;
                    std::fill(dv.begin(), dv.end(), 0.0f);
                    // positive target then sampled negatives; a negative that
                    // collides with the context is skipped, as in word2vec
                    for (int k = 0; k <= cfg.negatives; ++k) {
                        std::int32_t target;
                        float label;
                        if (k == 0) {
                            target = ctx;
                            label = 1.0f;
                        } else {
                            target = std::int32_t(sample_cdf(cdf, rng.next_double()));
                            label = 0.0f;
                            if (target == ctx) continue;
                        }
                        float* u = m.context_vectors.data() + std::size_t(target) * d;
                        float s = 0;
                        for (std::size_t i = 0; i < d; ++i) s += u[i] * v[i];
                        const float g = (label - sigmoid(s)) * alpha;
                        for (std::size_t i = 0; i < d; ++i) {
                            dv[i] += g * u[i];
                            u[i] += g * v[i];
                        }
                    }
                    for (std::size_t i = 0; i < d; ++i) v[i] += dv[i];
                }
            }
        }
    }
    return m;
}

std::vector<float> build_feature(std::int64_t item_id, const Word2VecModel& w2v,
                                 const Vocabulary& vocab) {
    const std::size_t D = 2 + std::size_t(w2v.cfg.dim);
    std::vector<float> f(D, 0.0f);
    if (item_id == kPaddingItem) return f;
    if (!vocab.contains(item_id))
        throw DataError("item " + std::to_string(item_id) + " not in vocabulary");
    f[1] = float(double(item_id) / double(vocab.max_item_id));
    if (const float* v = w2v.vec(item_id)) {
        f[0] = 1.0f;
        std::copy(v, v + w2v.cfg.dim, f.begin() + 2);
    }
    return f;
}

FeatureTable build_feature_table(const Word2VecModel& w2v, const Vocabulary& vocab) {
    FeatureTable t;
    t.feature_dim = 2 + w2v.cfg.dim;
    t.rows.reserve(vocab.items.size() * std::size_t(t.feature_dim));
    for (auto item : vocab.items) {
        auto f = build_feature(item, w2v, vocab);
        t.rows.insert(t.rows.end(), f.begin(), f.end());
    }
    return t;
}

std::vector<float> featurize_window(const TrainingWindow& w, const Word2VecModel& w2v,
                                    const Vocabulary& vocab) {
    const std::size_t D = 2 + std::size_t(w2v.cfg.dim);
    std::vector<float> x;
    x.reserve(w.inputs.size() * D);
    for (auto item : w.inputs) {
        auto f = build_feature(item, w2v, vocab);
        x.insert(x.end(), f.begin(), f.end());
    }
    return x;
}

std::vector<float> featurize_items(std::span<const std::int64_t> padded_items,
                                   const FeatureTable& table, const Vocabulary& vocab) {
    const std::size_t D = std::size_t(table.feature_dim);
    std::vector<float> x(padded_items.size() * D, 0.0f);
    for (std::size_t j = 0; j < padded_items.size(); ++j) {
        const std::int64_t item = padded_items[j];
        if (item == kPaddingItem) continue;
        auto it = vocab.item_index.find(item);
        if (it == vocab.item_index.end())
            throw DataError("item " + std::to_string(item) + " not in vocabulary");
        const float* r = table.row(it->second);
        std::copy(r, r + D, x.begin() + std::ptrdiff_t(j * D));
    }
    return x;
}

}  // namespace ordrec::embedding
