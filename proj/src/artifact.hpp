#pragma once

// On-disk formats. The model artifact and the embeddings file share one
// single-file container: a text manifest (version line, meta lines, named
// tensor descriptors with byte offsets), the raw little-endian tensor blocks
// in manifest order, then an 8-byte FNV-1a checksum over everything before it.
// Float data is f32; vocabulary id lists are i64 blocks. Vocab and window
// intermediates are line-delimited text so they stay inspectable.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "lstm.hpp"

namespace ordrec {

struct TrainMeta {
    std::uint64_t shuffle_seed = 0;
    std::uint64_t model_seed = 0;
    int epochs_run = 0;
    int batch_size = 0;
    double learning_rate = 0;
    double final_train_loss = 0;
    double final_val_loss = 0;  // NaN when validation was disabled
};

struct ModelArtifact {
    int format_version = 1;
    ModelConfig cfg;
    Vocabulary vocab;
    FeatureTable features;  // |I| x feature_dim
    lstm::ModelParams<float> params;
    TrainMeta meta;
};

namespace artifact {

inline constexpr const char* kModelMagic = "ordrec.model.v1";
inline constexpr const char* kEmbeddingsMagic = "ordrec.embeddings.v1";

void save(const ModelArtifact& a, const std::string& path);
ModelArtifact load(const std::string& path);

// Integrity check (checksum + manifest) without building the artifact.
void verify(const std::string& path);

void save_word2vec(const Word2VecModel& m, const std::string& path);
Word2VecModel load_word2vec(const std::string& path);

// Manifest plus the L2 norm of every tensor, for the inspect subcommand.
std::string describe(const std::string& path);

void save_vocab(const Vocabulary& v, const std::string& path);
Vocabulary load_vocab(const std::string& path);

void save_windows(const std::vector<TrainingWindow>& ws, int seq_len,
                  const std::string& path);
std::vector<TrainingWindow> load_windows(const std::string& path, int* seq_len = nullptr);

}  // namespace artifact
}  // namespace ordrec
