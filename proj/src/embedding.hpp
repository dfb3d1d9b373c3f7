#pragma once

// Skip-gram-with-negative-sampling item embeddings trained on view sequences,
// and the per-item feature vector fed to the sequence model:
//   [0] has-embedding flag, [1] item id / max id, [2..] embedding (or zeros).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"

namespace ordrec {

struct Word2VecConfig {
    int window = 5;
    int dim = 100;
    int negatives = 5;
    int epochs = 5;
    double initial_lr = 0.025;
    int min_count = 1;
    std::uint64_t seed = 1;
};

struct Word2VecModel {
    Word2VecConfig cfg;
    std::vector<std::int64_t> items;  // ascending id; row = position
    std::unordered_map<std::int64_t, std::int32_t> index;
    std::vector<float> input_vectors;    // n x dim, row-major
    std::vector<float> context_vectors;  // n x dim, row-major

    // nullptr when the item has no embedding
    const float* vec(std::int64_t item) const {
        auto it = index.find(item);
        if (it == index.end()) return nullptr;
        return input_vectors.data() + std::size_t(it->second) * std::size_t(cfg.dim);
    }
    std::int64_t n_items() const { return std::int64_t(items.size()); }
};

// Precomputed feature rows for every vocabulary item, dense-index order.
struct FeatureTable {
    std::int32_t feature_dim = 0;  // 2 + embedding dim
    std::vector<float> rows;       // |I| x feature_dim, row-major

    const float* row(std::int32_t dense_index) const {
        return rows.data() + std::size_t(dense_index) * std::size_t(feature_dim);
    }
};

namespace embedding {

template <class T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// SGNS objective for one (center, positive-context, negatives) example:
//   -log s(u_pos . v) - sum_k log s(-u_neg_k . v)
template <class T>
T sgns_pair_loss(std::span<const T> v, std::span<const T> u_pos,
                 const std::vector<std::span<const T>>& u_negs) {
    auto dot = [&](std::span<const T> u) {
        T s = 0;
        for (std::size_t i = 0; i < v.size(); ++i) s += u[i] * v[i];
        return s;
    };
    T loss = -std::log(sigmoid(dot(u_pos)));
    for (const auto& u : u_negs) loss += -std::log(sigmoid(-dot(u)));
    return loss;
}

// Analytic gradients of sgns_pair_loss, all evaluated at the same point.
template <class T>
void sgns_pair_grad(std::span<const T> v, std::span<const T> u_pos,
                    const std::vector<std::span<const T>>& u_negs,
                    std::span<T> dv, std::span<T> du_pos,
                    std::vector<std::span<T>>& du_negs) {
    const std::size_t d = v.size();
    for (std::size_t i = 0; i < d; ++i) dv[i] = 0;
    auto accum = [&](std::span<const T> u, std::span<T> du, T label) {
        T s = 0;
        for (std::size_t i = 0; i < d; ++i) s += u[i] * v[i];
        T g = sigmoid(s) - label;  // d loss / d (u.v)
        for (std::size_t i = 0; i < d; ++i) {
            dv[i] += g * u[i];
            du[i] = g * v[i];
        }
    };
    accum(u_pos, du_pos, T(1));
    for (std::size_t k = 0; k < u_negs.size(); ++k)
        accum(u_negs[k], du_negs[k], T(0));
}

Word2VecModel train_word2vec(const std::vector<PurchaseSequence>& view_seqs,
                             const Word2VecConfig& cfg);

template <class T>
double cosine(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw DataError("cosine: length mismatch");
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * b[i];
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
    }
    if (aa == 0 || bb == 0) throw DataError("undefined cosine of zero vector");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Feature vector for one item; item 0 yields all zeros.
std::vector<float> build_feature(std::int64_t item_id, const Word2VecModel& w2v,
                                 const Vocabulary& vocab);

FeatureTable build_feature_table(const Word2VecModel& w2v, const Vocabulary& vocab);

// (seq_len-1) x feature_dim row-major input matrix for one window.
std::vector<float> featurize_window(const TrainingWindow& w, const Word2VecModel& w2v,
                                    const Vocabulary& vocab);

// Same matrix built from the precomputed table; used by training and serving.
std::vector<float> featurize_items(std::span<const std::int64_t> padded_items,
                                   const FeatureTable& table, const Vocabulary& vocab);

// Exposed for the sampler distribution test: cumulative unigram^0.75 table.
std::vector<double> negative_sampling_cdf(const std::vector<std::int64_t>& counts);

}  // namespace embedding
}  // namespace ordrec
