#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "corpus.hpp"
#include "doctest.h"

using namespace ordrec;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / ("ordrec_test_" + name);
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

std::vector<OrderEvent> ev(std::initializer_list<OrderEvent> rows) { return rows; }

}  // namespace

TEST_CASE("parse_orders reads tab-separated rows") {
    auto p = write_tmp("parse_basic.tsv",
                       "alice\t100\t7\n"
                       "# comment\n"
                       "\n"
                       "bob\t200\t9\r\n");
    auto rows = corpus::parse_orders(p.string(), std::nullopt);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].user_id == "alice");
    CHECK(rows[0].timestamp_ms == 100);
    CHECK(rows[0].item_id == 7);
    CHECK(rows[1].user_id == "bob");  // CR stripped
    CHECK(rows[1].item_id == 9);
    fs::remove(p);
}

TEST_CASE("parse_orders cutoff keeps events at or before the cutoff") {
    auto p = write_tmp("parse_cutoff.tsv",
                       "u\t5\t1\n"
                       "u\t10\t2\n"
                       "u\t15\t3\n");
    auto rows = corpus::parse_orders(p.string(), 10);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].timestamp_ms == 5);
    CHECK(rows[1].timestamp_ms == 10);
    fs::remove(p);
}

TEST_CASE("parse_orders rejects malformed rows with the line number") {
    auto p = write_tmp("parse_bad.tsv",
                       "u\t1\t1\n"
                       "u\tnot_a_number\t2\n");
    CHECK_THROWS_WITH_AS(corpus::parse_orders(p.string(), std::nullopt),
                         doctest::Contains("line 2"), DataError);
    fs::remove(p);

    p = write_tmp("parse_fields.tsv", "only_two\t5\n");
    CHECK_THROWS_AS(corpus::parse_orders(p.string(), std::nullopt), DataError);
    fs::remove(p);

    CHECK_THROWS_AS(corpus::parse_orders("/nonexistent/path.tsv", std::nullopt),
                    DataError);
}

TEST_CASE("parse_orders rejects the padding id") {
    auto p = write_tmp("parse_zero.tsv", "u\t1\t0\n");
    CHECK_THROWS_WITH_AS(corpus::parse_orders(p.string(), std::nullopt),
                         doctest::Contains("reserved padding id"), DataError);
    fs::remove(p);
}

TEST_CASE("group_ordered sorts a user's events by timestamp") {
    CorpusConfig cfg;
    auto seqs = corpus::group_ordered(ev({{"u", 3, 30}, {"u", 1, 10}, {"u", 2, 20}}), cfg);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].items == std::vector<std::int64_t>{10, 20, 30});
}

TEST_CASE("group_ordered sorts users by id") {
    CorpusConfig cfg;
    auto seqs = corpus::group_ordered(
        ev({{"zed", 1, 1}, {"amy", 1, 2}, {"mia", 1, 3}, {"amy", 2, 4}}), cfg);
    REQUIRE(seqs.size() == 3);
    CHECK(seqs[0].user_id == "amy");
    CHECK(seqs[1].user_id == "mia");
    CHECK(seqs[2].user_id == "zed");
    CHECK(seqs[0].items == std::vector<std::int64_t>{2, 4});
}

TEST_CASE("group_ordered is invariant under input permutation") {
    // Includes timestamp ties across items and a duplicate (ts, item) row.
    std::vector<OrderEvent> events;
    for (int u = 0; u < 4; ++u) {
        std::string user = "user" + std::to_string(u);
        for (int i = 1; i <= 6; ++i)
            events.push_back({user, 100 + (i / 2) * 10, std::int64_t(i)});
        events.push_back({user, 100, 1});  // exact duplicate of an earlier row
    }
    CorpusConfig cfg;
    cfg.tie_break_seed = 99;
    auto baseline = corpus::group_ordered(events, cfg);

    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        auto shuffled = events;
        rng.shuffle(shuffled);
        auto got = corpus::group_ordered(shuffled, cfg);
        REQUIRE(got.size() == baseline.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].user_id == baseline[i].user_id);
            CHECK(got[i].items == baseline[i].items);
        }
    }
}

TEST_CASE("group_ordered tie order depends on the tie seed") {
    std::vector<OrderEvent> events;
    for (int i = 1; i <= 10; ++i) events.push_back({"u", 500, std::int64_t(i)});
    CorpusConfig a, b;
    a.tie_break_seed = 1;
    b.tie_break_seed = 2;
    auto sa = corpus::group_ordered(events, a);
    auto sb = corpus::group_ordered(events, b);
    auto sa2 = corpus::group_ordered(events, a);
    CHECK(sa[0].items == sa2[0].items);  // same seed, same order
    CHECK(sa[0].items != sb[0].items);   // different seed reshuffles the tie
    auto sorted_a = sa[0].items;
    std::sort(sorted_a.begin(), sorted_a.end());
    CHECK(sorted_a == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("filter_min_length drops single-purchase users") {
    std::vector<PurchaseSequence> seqs{{"a", {5}}, {"b", {5, 6}}, {"c", {7}}};
    auto kept = corpus::filter_min_length(seqs);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].user_id == "b");
}

TEST_CASE("build_vocab collects items and the label set") {
    std::vector<PurchaseSequence> seqs{{"A", {9, 3}}, {"B", {3, 7}}};
    auto v = corpus::build_vocab(seqs);
    CHECK(v.items == std::vector<std::int64_t>{3, 7, 9});
    CHECK(v.output_items == std::vector<std::int64_t>{3, 7});
    CHECK(v.max_item_id == 9);
    CHECK(v.n_items() == 3);
    CHECK(v.n_outputs() == 2);
    CHECK(v.contains(9));
    CHECK(!v.is_output(9));  // 9 never appears as a label
    CHECK(v.is_output(3));
    CHECK(v.item_index.at(3) == 0);
    CHECK(v.output_index.at(7) == 1);
}

TEST_CASE("build_vocab label set excludes first-position-only items") {
    std::vector<PurchaseSequence> seqs{{"u", {1, 2, 3}}};
    auto v = corpus::build_vocab(seqs);
    CHECK(v.output_items == std::vector<std::int64_t>{2, 3});
}

TEST_CASE("build_vocab max id handles sparse large ids") {
    std::vector<PurchaseSequence> seqs{{"u", {3, 500000, 7}}};
    auto v = corpus::build_vocab(seqs);
    CHECK(v.max_item_id == 500000);
}

TEST_CASE("build_vocab with no labels is an error") {
    std::vector<PurchaseSequence> seqs{{"a", {1}}, {"b", {2}}};
    CHECK_THROWS_WITH_AS(corpus::build_vocab(seqs),
                         doctest::Contains("no trainable labels"), DataError);
    CHECK_THROWS_AS(corpus::build_vocab({}), DataError);
}

namespace {

PurchaseSequence runway(int m) {
    PurchaseSequence s;
    s.user_id = "u";
    for (int i = 0; i < m; ++i) s.items.push_back(100 + i);
    return s;
}

Vocabulary vocab_for(const PurchaseSequence& s) { return corpus::build_vocab({s}); }

}  // namespace

TEST_CASE("windowize: long sequence slides one step at a time") {
    auto s = runway(15);
    CorpusConfig cfg;  // seq_len 12
    auto w = corpus::windowize(s, cfg, vocab_for(s));
    REQUIRE(w.size() == 4);
    for (int k = 0; k < 4; ++k) {
        REQUIRE(w[k].inputs.size() == 11);
        for (int j = 0; j < 11; ++j) CHECK(w[k].inputs[j] == 100 + k + j);
        CHECK(w[k].label == 100 + k + 11);
        CHECK(w[k].window_index == k);
        CHECK(w[k].source_user == "u");
    }
}

TEST_CASE("windowize: exact-length sequence yields one window") {
    auto s = runway(12);
    CorpusConfig cfg;
    auto w = corpus::windowize(s, cfg, vocab_for(s));
    REQUIRE(w.size() == 1);
    CHECK(w[0].inputs.front() == 100);
    CHECK(w[0].label == 111);
}

TEST_CASE("windowize: two-item sequence is zero-padded") {
    PurchaseSequence s{"u", {41, 42}};
    CorpusConfig cfg;
    auto w = corpus::windowize(s, cfg, vocab_for(s));
    REQUIRE(w.size() == 1);
    REQUIRE(w[0].inputs.size() == 11);
    for (int j = 0; j < 10; ++j) CHECK(w[0].inputs[j] == kPaddingItem);
    CHECK(w[0].inputs[10] == 41);
    CHECK(w[0].label == 42);
}

TEST_CASE("windowize: exhaustive window arithmetic for m in [2, 40]") {
    CorpusConfig cfg;  // seq_len 12 -> 11 inputs
    const int L = cfg.seq_len;
    for (int m = 2; m <= 40; ++m) {
        CAPTURE(m);
        auto s = runway(m);
        auto w = corpus::windowize(s, cfg, vocab_for(s));
        const std::size_t expect = std::size_t(std::max(1, m - (L - 1)));
        REQUIRE(w.size() == expect);
        for (std::size_t k = 0; k < w.size(); ++k) {
            REQUIRE(w[k].inputs.size() == std::size_t(L - 1));
            // Padding, if any, is a contiguous prefix of the first window only.
            std::size_t pad = 0;
            while (pad < w[k].inputs.size() && w[k].inputs[pad] == kPaddingItem) ++pad;
            if (m >= L) CHECK(pad == 0);
            else CHECK(pad == std::size_t(L - m));
            for (std::size_t j = pad; j < w[k].inputs.size(); ++j)
                CHECK(w[k].inputs[j] != kPaddingItem);
            // Inputs are the items immediately preceding the label.
            const int label_pos = (m >= L) ? int(k) + L - 1 : m - 1;
            CHECK(w[k].label == s.items[label_pos]);
            for (std::size_t j = pad; j < w[k].inputs.size(); ++j)
                CHECK(w[k].inputs[j] == s.items[label_pos - (L - 1) + j]);
            // Consecutive windows shift by exactly one.
            if (k > 0)
                for (int j = 0; j < L - 2; ++j)
                    CHECK(w[k].inputs[j] == w[k - 1].inputs[j + 1]);
        }
    }
}

TEST_CASE("windowize honors a custom window length") {
    PurchaseSequence s{"u", {7, 8}};
    CorpusConfig cfg;
    cfg.seq_len = 3;
    auto w = corpus::windowize(s, cfg, vocab_for(s));
    REQUIRE(w.size() == 1);
    CHECK(w[0].inputs == std::vector<std::int64_t>{0, 7});
    CHECK(w[0].label == 8);

    auto s4 = runway(4);
    auto w4 = corpus::windowize(s4, cfg, vocab_for(s4));
    REQUIRE(w4.size() == 2);
    CHECK(w4[0].inputs == std::vector<std::int64_t>{100, 101});
    CHECK(w4[0].label == 102);
    CHECK(w4[1].inputs == std::vector<std::int64_t>{101, 102});
    CHECK(w4[1].label == 103);
}

TEST_CASE("windowize drops windows whose label is outside the output set") {
    // Vocabulary built from a different corpus: only 2 is a valid label.
    auto v = corpus::build_vocab({{"other", {1, 2}}});
    CorpusConfig cfg;
    cfg.seq_len = 3;
    PurchaseSequence s{"u", {1, 2, 1, 2}};  // window labels: 1 (dropped), 2 (kept)
    std::size_t dropped = 0;
    auto w = corpus::windowize(s, cfg, v, &dropped);
    REQUIRE(w.size() == 1);
    CHECK(dropped == 1);
    CHECK(w[0].label == 2);
    // window_index counts emitted windows, not considered ones.
    CHECK(w[0].window_index == 0);
}

TEST_CASE("windowize_all aggregates users and the dropped counter") {
    std::vector<PurchaseSequence> seqs{{"a", {1, 2, 3}}, {"b", {2, 3}}};
    auto v = corpus::build_vocab(seqs);
    CorpusConfig cfg;
    cfg.seq_len = 2;  // a -> (1)->2, (2)->3; b -> (2)->3
    std::size_t dropped = 0;
    auto w = corpus::windowize_all(seqs, cfg, v, &dropped);
    REQUIRE(w.size() == 3);
    CHECK(dropped == 0);
    CHECK(w[0].source_user == "a");
    CHECK(w[2].source_user == "b");
    std::set<std::int64_t> labels;
    for (const auto& x : w) labels.insert(x.label);
    CHECK(labels == std::set<std::int64_t>{2, 3});
}
