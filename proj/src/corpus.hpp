#pragma once

// Ingestion: order/view events -> per-user purchase sequences -> vocabularies
// -> fixed-length training windows.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace ordrec {

// Item id 0 is the padding sentinel everywhere; real items are >= 1.
constexpr std::int64_t kPaddingItem = 0;

struct OrderEvent {
    std::string user_id;
    std::int64_t timestamp_ms = 0;
    std::int64_t item_id = 0;
};

struct PurchaseSequence {
    std::string user_id;
    std::vector<std::int64_t> items;  // position = purchase-time rank - 1
};

struct TrainingWindow {
    std::vector<std::int64_t> inputs;  // seq_len-1 slots, zero-padded prefix
    std::int64_t label = 0;
    std::string source_user;
    std::int64_t window_index = 0;
};

struct Vocabulary {
    // Ascending item id; dense index = position in the vector.
    std::vector<std::int64_t> items;
    std::vector<std::int64_t> output_items;
    std::int64_t max_item_id = 0;
    std::unordered_map<std::int64_t, std::int32_t> item_index;
    std::unordered_map<std::int64_t, std::int32_t> output_index;

    bool contains(std::int64_t item) const { return item_index.count(item) != 0; }
    bool is_output(std::int64_t item) const { return output_index.count(item) != 0; }
    std::int64_t n_items() const { return std::int64_t(items.size()); }
    std::int64_t n_outputs() const { return std::int64_t(output_items.size()); }
};

struct CorpusConfig {
    int seq_len = 12;  // window = seq_len-1 inputs + 1 label
    std::optional<std::int64_t> cutoff_ms;
    std::uint64_t tie_break_seed = 0;
};

namespace corpus {

// Reads `user<TAB>timestamp_ms<TAB>item` lines. `#` lines and blank lines are
// skipped. Events after the cutoff are dropped. Malformed rows throw DataError
// naming the line number.
std::vector<OrderEvent> parse_orders(const std::string& path,
                                     std::optional<std::int64_t> cutoff_ms);

// One sequence per user, items ordered by (timestamp, seeded tie rank).
// Output is sorted by user id and invariant under permutation of `events`.
std::vector<PurchaseSequence> group_ordered(const std::vector<OrderEvent>& events,
                                            const CorpusConfig& cfg);

// Drops single-purchase users, keeps relative order.
std::vector<PurchaseSequence> filter_min_length(std::vector<PurchaseSequence> seqs);

// Full vocabulary = every item seen; output vocabulary = items that appear at
// position >= 2 of some sequence (the label set).
Vocabulary build_vocab(const std::vector<PurchaseSequence>& seqs);

// Moving-window standardization of one sequence. Windows whose label is not in
// the output vocabulary are dropped and counted into *dropped_labels.
std::vector<TrainingWindow> windowize(const PurchaseSequence& seq,
                                      const CorpusConfig& cfg,
                                      const Vocabulary& vocab,
                                      std::size_t* dropped_labels = nullptr);

std::vector<TrainingWindow> windowize_all(const std::vector<PurchaseSequence>& seqs,
                                          const CorpusConfig& cfg,
                                          const Vocabulary& vocab,
                                          std::size_t* dropped_labels = nullptr);

}  // namespace corpus
}  // namespace ordrec
