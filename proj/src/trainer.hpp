#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "artifact.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "lstm.hpp"

namespace ordrec {

struct TrainConfig {
    int hidden1 = 600;
    int hidden2 = 600;
    int batch_size = 4;
    int epochs = 10;           // 0 allowed: artifact with initial weights, no history
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.0;  // 0 disables validation
    std::uint64_t shuffle_seed = 1;
    std::uint64_t model_seed = 1;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    std::int64_t n_train = 0, n_val = 0;
};

struct TrainReport {
    std::vector<EpochStats> history;
    std::int64_t n_windows = 0, n_train_windows = 0, n_val_windows = 0;
    std::size_t n_train_users = 0, n_val_users = 0;
    double wall_seconds = 0.0;
};

// Per-user holdout: users sorted, seeded shuffle, first n_val go to validation.
// Every window of a user lands on one side; no user straddles the split.
struct UserSplit {
    std::vector<std::size_t> train_idx, val_idx;  // indices into the window list
    std::size_t n_train_users = 0, n_val_users = 0;
};
UserSplit split_by_user(const std::vector<TrainingWindow>& windows, double fraction,
                        std::uint64_t seed);

// Visit order for one epoch: seeded shuffle of the given indices, a pure
// function of (shuffle_seed, epoch). Same inputs, same order.
std::vector<std::size_t> epoch_order(std::uint64_t shuffle_seed, int epoch,
                                     std::vector<std::size_t> idx);

// Contiguous [start, stop) batch extents; the final batch may be short.
std::vector<std::pair<std::size_t, std::size_t>> batch_extents(std::size_t n,
                                                               int batch_size);

using EpochCallback = std::function<void(const EpochStats&)>;

// Full pipeline step: windows + feature table -> trained model artifact.
// Throws NumericError("diverged: ...") naming epoch/batch if loss or gradients
// go non-finite.
ModelArtifact train_model(const std::vector<TrainingWindow>& windows,
                          const Vocabulary& vocab, const FeatureTable& features,
                          int seq_len, const TrainConfig& cfg, TrainReport* report,
                          const EpochCallback& on_epoch = nullptr);

// Mean cross-entropy of `params` over `idx` (no gradient); used for validation.
double mean_loss(const lstm::ModelParams<float>& params, const FeatureTable& features,
                 const Vocabulary& vocab, const std::vector<TrainingWindow>& windows,
                 const std::vector<std::size_t>& idx);

}  // namespace ordrec
