#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace ordrec {

UserSplit split_by_user(const std::vector<TrainingWindow>& windows, double fraction,
                        std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0)
        throw UsageError("validation fraction must be in [0, 1)");

    UserSplit split;
    if (fraction == 0.0) {
        split.train_idx.resize(windows.size());
        for (std::size_t i = 0; i < windows.size(); ++i) split.train_idx[i] = i;
        std::map<std::string, int> users;
        for (const auto& w : windows) users[w.source_user] = 1;
        split.n_train_users = users.size();
        return split;
    }

    // std::map keeps users sorted, so the shuffle below sees a canonical order
    // regardless of window order.
    std::map<std::string, int> seen;
    for (const auto& w : windows) seen[w.source_user] = 1;
    std::vector<std::string> users;
    users.reserve(seen.size());
    for (const auto& [u, _] : seen) users.push_back(u);

    Rng rng(splitmix64(seed ^ 0x76616c5f73706c74ULL));  // "val_splt"
    rng.shuffle(users);
    const std::size_t n_val = std::size_t(std::llround(double(users.size()) * fraction));
    if (n_val == 0 || n_val == users.size())
        throw DataError("validation fraction " + std::to_string(fraction) + " leaves " +
                        (n_val == 0 ? "no validation users" : "no training users") +
                        " out of " + std::to_string(users.size()));

    std::map<std::string, bool> is_val;
    for (std::size_t i = 0; i < users.size(); ++i) is_val[users[i]] = i < n_val;
    for (std::size_t i = 0; i < windows.size(); ++i)
        (is_val[windows[i].source_user] ? split.val_idx : split.train_idx).push_back(i);
    split.n_val_users = n_val;
    split.n_train_users = users.size() - n_val;
    return split;
}

namespace {

std::vector<int> label_indices(const std::vector<TrainingWindow>& windows,
                               const Vocabulary& vocab) {
    std::vector<int> idx(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        auto it = vocab.output_index.find(windows[i].label);
        if (it == vocab.output_index.end())
            throw DataError("window label " + std::to_string(windows[i].label) +
                            " not in the output vocabulary");
        idx[i] = it->second;
    }
    return idx;
}

}  // namespace

std::vector<std::size_t> epoch_order(std::uint64_t shuffle_seed, int epoch,
                                     std::vector<std::size_t> idx) {
    Rng rng(splitmix64(splitmix64(shuffle_seed) + std::uint64_t(epoch)));
    rng.shuffle(idx);
    return idx;
}

std::vector<std::pair<std::size_t, std::size_t>> batch_extents(std::size_t n, int batch_size) {
    if (batch_size < 1) throw UsageError("batch size must be at least 1");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < n; start += std::size_t(batch_size))
        out.emplace_back(start, std::min(n, start + std::size_t(batch_size)));
    return out;
}

double mean_loss(const lstm::ModelParams<float>& params, const FeatureTable& features,
                 const Vocabulary& vocab, const std::vector<TrainingWindow>& windows,
                 const std::vector<std::size_t>& idx) {
    if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0;
    lstm::ForwardCache<float> cache;
    for (std::size_t i : idx) {
        const auto& w = windows[i];
        auto x = embedding::featurize_items(w.inputs, features, vocab);
        lstm::forward(params, std::span<const float>(x), &cache);
        const int label = vocab.output_index.at(w.label);
        sum += double(lstm::cross_entropy_from_logits<float>(cache.logits, label));
    }
    return sum / double(idx.size());
}

ModelArtifact train_model(const std::vector<TrainingWindow>& windows,
                          const Vocabulary& vocab, const FeatureTable& features,
                          int seq_len, const TrainConfig& cfg, TrainReport* report,
                          const EpochCallback& on_epoch) {
    if (cfg.batch_size < 1) throw UsageError("batch size must be >= 1");
    if (cfg.epochs < 0) throw UsageError("epochs must be >= 0");
    if (cfg.learning_rate <= 0) throw UsageError("learning rate must be positive");
    if (cfg.hidden1 < 1 || cfg.hidden2 < 1) throw UsageError("hidden sizes must be >= 1");
    if (seq_len < 2) throw UsageError("seq_len must be >= 2");
    if (vocab.n_outputs() < 1) throw DataError("empty output vocabulary");
    for (const auto& w : windows)
        if (int(w.inputs.size()) != seq_len - 1)
            throw DataError("window for user " + w.source_user + " has " +
                            std::to_string(w.inputs.size()) + " inputs, expected " +
                            std::to_string(seq_len - 1));

    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig mc;
    mc.seq_len_in = seq_len - 1;
    mc.feature_dim = features.feature_dim;
    mc.hidden1 = cfg.hidden1;
    mc.hidden2 = cfg.hidden2;
    mc.n_outputs = int(vocab.n_outputs());
    mc.seed = cfg.model_seed;

    UserSplit split = split_by_user(windows, cfg.validation_fraction, cfg.shuffle_seed);
    if (cfg.epochs > 0 && split.train_idx.empty())
        throw DataError("no training windows");
    const auto labels = label_indices(windows, vocab);

    auto params = lstm::make_initialized<float>(mc);
    lstm::AdamState<float> adam(params.n_params(), cfg.learning_rate, cfg.beta1,
                                cfg.beta2, cfg.epsilon);

    TrainReport local_report;
    TrainReport& rep = report ? *report : local_report;
    rep.history.clear();
    rep.n_windows = std::int64_t(windows.size());
    rep.n_train_windows = std::int64_t(split.train_idx.size());
    rep.n_val_windows = std::int64_t(split.val_idx.size());
    rep.n_train_users = split.n_train_users;
    rep.n_val_users = split.n_val_users;

    lstm::ForwardCache<float> cache;
    lstm::ModelParams<float> grads(mc);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = epoch_order(cfg.shuffle_seed, epoch, split.train_idx);

        double epoch_loss = 0;
        const std::size_t n = order.size();
        std::int64_t batch_no = 0;
        for (const auto& [start, stop] : batch_extents(n, cfg.batch_size)) {
            ++batch_no;
            const auto nb = float(stop - start);

            try {
                grads.for_each_tensor([](std::vector<float>& t) {
                    std::fill(t.begin(), t.end(), 0.0f);
                });
                for (std::size_t k = start; k < stop; ++k) {
                    const auto& w = windows[order[k]];
                    auto x = embedding::featurize_items(w.inputs, features, vocab);
                    lstm::forward(params, std::span<const float>(x), &cache);
                    const float loss = lstm::cross_entropy_from_logits<float>(
                        cache.logits, labels[order[k]]);
                    if (!std::isfinite(loss))
                        throw NumericError("diverged: non-finite loss");
                    epoch_loss += double(loss);
                    lstm::backward(params, cache, labels[order[k]], grads);
                }
                grads.for_each_tensor([&](std::vector<float>& t) {
                    for (auto& g : t) g /= nb;
                });
                lstm::adam_step(params, grads, adam);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + " batch " +
                                   std::to_string(batch_no));
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = epoch_loss / double(n);
        st.n_train = std::int64_t(n);
        st.n_val = std::int64_t(split.val_idx.size());
        if (!split.val_idx.empty())
            st.val_loss = mean_loss(params, features, vocab, windows, split.val_idx);
        rep.history.push_back(st);
        if (on_epoch) on_epoch(st);
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ModelArtifact art;
    art.cfg = mc;
    art.vocab = vocab;
    art.features = features;
    art.params = std::move(params);
    art.meta.shuffle_seed = cfg.shuffle_seed;
    art.meta.model_seed = cfg.model_seed;
    art.meta.epochs_run = cfg.epochs;
    art.meta.batch_size = cfg.batch_size;
    art.meta.learning_rate = cfg.learning_rate;
    art.meta.final_train_loss = rep.history.empty()
                                    ? std::numeric_limits<double>::quiet_NaN()
                                    : rep.history.back().train_loss;
    art.meta.final_val_loss = rep.history.empty()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : rep.history.back().val_loss;
    return art;
}

}  // namespace ordrec
