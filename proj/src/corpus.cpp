#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <tuple>

namespace ordrec::corpus {

namespace {

bool parse_i64(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::vector<OrderEvent> parse_orders(const std::string& path,
                                     std::optional<std::int64_t> cutoff_ms) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open orders file: " + path);

    std::vector<OrderEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError("line " + std::to_string(lineno) +
                            ": expected 3 tab-separated fields");
        }
        OrderEvent ev;
        ev.user_id = line.substr(0, t1);
        std::string_view ts_field(line.data() + t1 + 1, t2 - t1 - 1);
        std::string_view item_field(line.data() + t2 + 1, line.size() - t2 - 1);
        if (ev.user_id.empty())
            throw DataError("line " + std::to_string(lineno) + ": empty user id");
        if (!parse_i64(ts_field, ev.timestamp_ms))
            throw DataError("line " + std::to_string(lineno) + ": bad timestamp");
        if (!parse_i64(item_field, ev.item_id) || ev.item_id < 0)
            throw DataError("line " + std::to_string(lineno) + ": bad item id");
        if (ev.item_id == kPaddingItem)
            throw DataError("line " + std::to_string(lineno) +
                            ": item id 0 is the reserved padding id");
        if (cutoff_ms && ev.timestamp_ms > *cutoff_ms) continue;
        events.push_back(std::move(ev));
    }
    return events;
}

std::vector<PurchaseSequence> group_ordered(const std::vector<OrderEvent>& events,
                                            const CorpusConfig& cfg) {
    if (events.empty()) throw DataError("no events to group");

    // std::map keeps users in ascending id order.
    std::map<std::string, std::vector<std::pair<std::int64_t, std::int64_t>>> by_user;
    for (const auto& ev : events)
        by_user[ev.user_id].emplace_back(ev.timestamp_ms, ev.item_id);

    std::vector<PurchaseSequence> out;
    out.reserve(by_user.size());
    for (auto& [user, evs] : by_user) {
        // Canonicalize before assigning occurrence counters so that the
        // result does not depend on the order events arrived in. Duplicate
        // (timestamp, item) rows get counters 0,1,... within their run.
        std::sort(evs.begin(), evs.end());
        struct Keyed {
            std::int64_t ts;
            std::uint64_t tie;
            std::int64_t item;
            std::int64_t occ;
        };
        std::vector<Keyed> keyed;
        keyed.reserve(evs.size());
        for (std::size_t i = 0; i < evs.size(); ++i) {
            // occ = how many identical (ts, item) rows precede this one
            std::int64_t occ = 0;
            for (std::size_t j = i; j > 0 && evs[j - 1] == evs[i]; --j) ++occ;
            keyed.push_back({evs[i].first,
                             keyed_hash(cfg.tie_break_seed, user, evs[i].second, occ),
                             evs[i].second, occ});
        }
        std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
            return std::tie(a.ts, a.tie, a.item, a.occ) <
                   std::tie(b.ts, b.tie, b.item, b.occ);
        });
        PurchaseSequence seq;
        seq.user_id = user;
        seq.items.reserve(keyed.size());
        for (const auto& k : keyed) seq.items.push_back(k.item);
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<PurchaseSequence> filter_min_length(std::vector<PurchaseSequence> seqs) {
    std::erase_if(seqs, [](const PurchaseSequence& s) { return s.items.size() < 2; });
    return seqs;
}

Vocabulary build_vocab(const std::vector<PurchaseSequence>& seqs) {
    Vocabulary v;
    std::vector<std::int64_t> all, labels;
    for (const auto& s : seqs) {
        for (std::size_t i = 0; i < s.items.size(); ++i) {
            all.push_back(s.items[i]);
            if (i >= 1) labels.push_back(s.items[i]);
        }
    }
    auto dedup_sorted = [](std::vector<std::int64_t>& xs) {
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    };
    dedup_sorted(all);
    dedup_sorted(labels);
    if (labels.empty()) throw DataError("no trainable labels");

    v.items = std::move(all);
    v.output_items = std::move(labels);
    v.max_item_id = v.items.back();
    v.item_index.reserve(v.items.size());
    for (std::size_t i = 0; i < v.items.size(); ++i)
        v.item_index.emplace(v.items[i], std::int32_t(i));
    v.output_index.reserve(v.output_items.size());
    for (std::size_t i = 0; i < v.output_items.size(); ++i)
        v.output_index.emplace(v.output_items[i], std::int32_t(i));
    return v;
}

std::vector<TrainingWindow> windowize(const PurchaseSequence& seq,
                                      const CorpusConfig& cfg,
                                      const Vocabulary& vocab,
                                      std::size_t* dropped_labels) {
    const std::int64_t m = std::int64_t(seq.items.size());
    const std::int64_t L = cfg.seq_len;
    if (L < 2) throw DataError("seq_len must be >= 2");
    if (m < 2)
        throw DataError("sequence for user " + seq.user_id +
                        " has fewer than 2 items; run filter_min_length first");

    std::vector<TrainingWindow> out;
    std::int64_t emitted = 0;
    auto push = [&](std::int64_t first, std::int64_t pad) {
        TrainingWindow w;
        w.inputs.assign(std::size_t(L - 1), kPaddingItem);
        for (std::int64_t j = 0; j < L - 1 - pad; ++j)
            w.inputs[std::size_t(pad + j)] = seq.items[std::size_t(first + j)];
        w.label = seq.items[std::size_t(first + L - 1 - pad)];
        w.source_user = seq.user_id;
        if (!vocab.is_output(w.label)) {
            if (dropped_labels) ++*dropped_labels;
            return;
        }
        w.window_index = emitted++;
        out.push_back(std::move(w));
    };

    if (m >= L) {
        for (std::int64_t k = 0; k <= m - L; ++k) push(k, 0);
    } else {
        push(0, L - m);
    }
    return out;
}

std::vector<TrainingWindow> windowize_all(const std::vector<PurchaseSequence>& seqs,
                                          const CorpusConfig& cfg,
                                          const Vocabulary& vocab,
                                          std::size_t* dropped_labels) {
    std::vector<TrainingWindow> out;
    for (const auto& s : seqs) {
        auto ws = windowize(s, cfg, vocab, dropped_labels);
        out.insert(out.end(), std::make_move_iterator(ws.begin()),
                   std::make_move_iterator(ws.end()));
    }
    return out;
}

}  // namespace ordrec::corpus
