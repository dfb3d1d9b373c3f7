#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "artifact.hpp"
#include "doctest.h"
#include "trainer.hpp"

using namespace ordrec;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
    return fs::temp_directory_path() / ("ordrec_artifact_" + name);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spew(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

// Independent re-implementation of the trailer hash (FNV-1a, 64-bit).
std::uint64_t ref_fnv1a(const char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= std::uint64_t(static_cast<unsigned char>(data[i]));
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Rewrites the trailing checksum so doctored headers stay "valid".
void reseal(const fs::path& p) {
    std::string bytes = slurp(p);
    REQUIRE(bytes.size() >= 8);
    const std::uint64_t sum = ref_fnv1a(bytes.data(), bytes.size() - 8);
    std::memcpy(bytes.data() + bytes.size() - 8, &sum, 8);
    spew(p, bytes);
}

ModelArtifact small_artifact() {
    ModelArtifact a;
    a.vocab = corpus::build_vocab({{"u1", {1, 2, 3}}, {"u2", {2, 3}}});

    Word2VecConfig wc;
    wc.dim = 4;
    wc.epochs = 1;
    wc.seed = 5;
    std::vector<PurchaseSequence> views;
    for (int r = 0; r < 10; ++r) views.push_back({"v" + std::to_string(r), {1, 2, 3, 1, 2, 3}});
    auto w2v = embedding::train_word2vec(views, wc);
    a.features = embedding::build_feature_table(w2v, a.vocab);

    a.cfg.seq_len_in = 3;
    a.cfg.feature_dim = a.features.feature_dim;
    a.cfg.hidden1 = 4;
    a.cfg.hidden2 = 3;
    a.cfg.n_outputs = int(a.vocab.n_outputs());
    a.cfg.seed = 99;
    a.params = lstm::make_initialized<float>(a.cfg);

    a.meta.shuffle_seed = 17;
    a.meta.model_seed = 99;
    a.meta.epochs_run = 2;
    a.meta.batch_size = 8;
    a.meta.learning_rate = 0.00125;
    a.meta.final_train_loss = 0.642;
    a.meta.final_val_loss = std::numeric_limits<double>::quiet_NaN();
    return a;
}

}  // namespace

TEST_CASE("model artifact round-trips every field") {
    auto a = small_artifact();
    auto p = tmp("roundtrip.model");
    artifact::save(a, p.string());
    auto b = artifact::load(p.string());

    CHECK(b.cfg.seq_len_in == a.cfg.seq_len_in);
    CHECK(b.cfg.feature_dim == a.cfg.feature_dim);
    CHECK(b.cfg.hidden1 == a.cfg.hidden1);
    CHECK(b.cfg.hidden2 == a.cfg.hidden2);
    CHECK(b.cfg.n_outputs == a.cfg.n_outputs);
    CHECK(b.cfg.seed == a.cfg.seed);
    CHECK(b.vocab.items == a.vocab.items);
    CHECK(b.vocab.output_items == a.vocab.output_items);
    CHECK(b.vocab.max_item_id == 3);
    CHECK(b.vocab.output_index.at(3) == 1);
    CHECK(b.features.feature_dim == a.features.feature_dim);
    CHECK(b.features.rows == a.features.rows);
    CHECK(b.params.l1.W.a == a.params.l1.W.a);
    CHECK(b.params.l1.U.a == a.params.l1.U.a);
    CHECK(b.params.l1.b == a.params.l1.b);
    CHECK(b.params.l2.W.a == a.params.l2.W.a);
    CHECK(b.params.out.W.a == a.params.out.W.a);
    CHECK(b.params.out.b == a.params.out.b);
    CHECK(b.meta.shuffle_seed == 17);
    CHECK(b.meta.epochs_run == 2);
    CHECK(b.meta.batch_size == 8);
    CHECK(b.meta.learning_rate == 0.00125);
    CHECK(b.meta.final_train_loss == 0.642);
    CHECK(std::isnan(b.meta.final_val_loss));
    fs::remove(p);
}

TEST_CASE("saving twice produces byte-identical files") {
    auto a = small_artifact();
    auto p1 = tmp("bytes1.model"), p2 = tmp("bytes2.model");
    artifact::save(a, p1.string());
    artifact::save(a, p2.string());
    CHECK(slurp(p1) == slurp(p2));

    // save(load(x)) is also byte-stable
    auto b = artifact::load(p1.string());
    auto p3 = tmp("bytes3.model");
    artifact::save(b, p3.string());
    CHECK(slurp(p1) == slurp(p3));
    fs::remove(p1);
    fs::remove(p2);
    fs::remove(p3);
}

TEST_CASE("the trailer is FNV-1a over everything before it") {
    auto a = small_artifact();
    auto p = tmp("trailer.model");
    artifact::save(a, p.string());
    std::string bytes = slurp(p);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    CHECK(stored == ref_fnv1a(bytes.data(), bytes.size() - 8));
    fs::remove(p);
}

TEST_CASE("corruption and truncation are caught by the checksum") {
    auto a = small_artifact();
    auto p = tmp("corrupt.model");
    artifact::save(a, p.string());
    std::string bytes = slurp(p);

    auto q = tmp("corrupt2.model");
    spew(q, bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_WITH_AS(artifact::load(q.string()),
                         doctest::Contains("checksum mismatch"), DataError);
    CHECK_THROWS_AS(artifact::verify(q.string()), DataError);

    std::string flipped = bytes;
    flipped[flipped.size() / 2] = char(flipped[flipped.size() / 2] ^ 0x40);
    spew(q, flipped);
    CHECK_THROWS_WITH_AS(artifact::load(q.string()),
                         doctest::Contains("corrupt or truncated"), DataError);

    spew(q, "abc");  // shorter than the trailer itself
    CHECK_THROWS_AS(artifact::load(q.string()), DataError);
    CHECK_THROWS_AS(artifact::load((q.string() + ".missing")), DataError);

    artifact::verify(p.string());  // the pristine file stays acceptable
    fs::remove(p);
    fs::remove(q);
}

TEST_CASE("a version mismatch names both versions") {
    auto p = tmp("version.model");
    std::string header = "ordrec.model.v9\nend\n";
    const std::uint64_t sum = ref_fnv1a(header.data(), header.size());
    std::string bytes = header + std::string(reinterpret_cast<const char*>(&sum), 8);
    spew(p, bytes);
    CHECK_THROWS_WITH_AS(artifact::load(p.string()),
                         doctest::Contains("ordrec.model.v9"), DataError);
    CHECK_THROWS_WITH_AS(artifact::load(p.string()),
                         doctest::Contains("ordrec.model.v1"), DataError);
    fs::remove(p);
}

TEST_CASE("a declared-count mismatch names the offending tensor") {
    auto a = small_artifact();  // n_outputs is 2
    auto p = tmp("shape.model");
    artifact::save(a, p.string());
    std::string bytes = slurp(p);
    const std::string needle = "meta n_outputs 2\n";
    auto at = bytes.find(needle);
    REQUIRE(at != std::string::npos);
    bytes.replace(at, needle.size(), "meta n_outputs 3\n");
    spew(p, bytes);
    reseal(p);
    CHECK_THROWS_WITH_AS(artifact::load(p.string()),
                         doctest::Contains("vocab.output_items"), DataError);
    fs::remove(p);
}

TEST_CASE("word2vec container round-trips") {
    Word2VecConfig wc;
    wc.dim = 6;
    wc.epochs = 2;
    wc.seed = 12;
    std::vector<PurchaseSequence> views;
    for (int r = 0; r < 10; ++r) views.push_back({"v" + std::to_string(r), {4, 7, 4, 7}});
    auto m = embedding::train_word2vec(views, wc);

    auto p = tmp("w2v.bin");
    artifact::save_word2vec(m, p.string());
    auto n = artifact::load_word2vec(p.string());
    CHECK(n.items == m.items);
    CHECK(n.cfg.dim == 6);
    CHECK(n.cfg.seed == 12);
    CHECK(n.input_vectors == m.input_vectors);
    CHECK(n.context_vectors == m.context_vectors);
    CHECK(n.index.at(7) == m.index.at(7));

    // A model reader refuses an embeddings container and vice versa.
    CHECK_THROWS_WITH_AS(artifact::load(p.string()),
                         doctest::Contains("unsupported container version"), DataError);
    auto a = small_artifact();
    auto pm = tmp("kind.model");
    artifact::save(a, pm.string());
    CHECK_THROWS_AS(artifact::load_word2vec(pm.string()), DataError);
    fs::remove(p);
    fs::remove(pm);
}

TEST_CASE("describe lists meta and per-tensor norms") {
    auto a = small_artifact();
    auto p = tmp("describe.model");
    artifact::save(a, p.string());
    auto text = artifact::describe(p.string());
    CHECK(text.find("ordrec.model.v1") != std::string::npos);
    CHECK(text.find("meta hidden1 = 4") != std::string::npos);
    CHECK(text.find("tensor lstm1.W") != std::string::npos);
    CHECK(text.find("tensor out.b") != std::string::npos);
    CHECK(text.find("l2=") != std::string::npos);

    // The vocab.items norm is checkable by hand: sqrt(1 + 4 + 9).
    double want = std::sqrt(14.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "l2=%.6g", want);
    CHECK(text.find(buf) != std::string::npos);
    fs::remove(p);
}

TEST_CASE("vocab text file round-trips") {
    auto v = corpus::build_vocab({{"u1", {10, 20, 30}}, {"u2", {5, 20}}});
    auto p = tmp("vocab.tsv");
    artifact::save_vocab(v, p.string());
    auto w = artifact::load_vocab(p.string());
    CHECK(w.items == v.items);
    CHECK(w.output_items == v.output_items);
    CHECK(w.max_item_id == v.max_item_id);
    CHECK(w.item_index.at(20) == v.item_index.at(20));
    CHECK(w.output_index.size() == v.output_index.size());
    fs::remove(p);
}

TEST_CASE("vocab loader rejects malformed files") {
    auto p = tmp("vocab_bad.tsv");
    spew(p, "not a vocab\n1\t0\n");
    CHECK_THROWS_WITH_AS(artifact::load_vocab(p.string()),
                         doctest::Contains("header"), DataError);
    spew(p, "ordrec.vocab.v1\n5\t1\n3\t1\n");
    CHECK_THROWS_WITH_AS(artifact::load_vocab(p.string()),
                         doctest::Contains("line 3"), DataError);
    spew(p, "ordrec.vocab.v1\nbogus\n");
    CHECK_THROWS_AS(artifact::load_vocab(p.string()), DataError);
    spew(p, "ordrec.vocab.v1\n");
    CHECK_THROWS_WITH_AS(artifact::load_vocab(p.string()), doctest::Contains("empty"),
                         DataError);
    fs::remove(p);
}

TEST_CASE("windows text file round-trips with its window length") {
    std::vector<PurchaseSequence> seqs{{"amy", {1, 2, 3, 4}}, {"bob", {2, 4}}};
    auto v = corpus::build_vocab(seqs);
    CorpusConfig cfg;
    cfg.seq_len = 3;
    auto ws = corpus::windowize_all(seqs, cfg, v);
    REQUIRE(!ws.empty());

    auto p = tmp("windows.tsv");
    artifact::save_windows(ws, cfg.seq_len, p.string());
    int seq_len = 0;
    auto back = artifact::load_windows(p.string(), &seq_len);
    CHECK(seq_len == 3);
    REQUIRE(back.size() == ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(back[i].source_user == ws[i].source_user);
        CHECK(back[i].window_index == ws[i].window_index);
        CHECK(back[i].inputs == ws[i].inputs);
        CHECK(back[i].label == ws[i].label);
    }
    fs::remove(p);
}

TEST_CASE("windows loader rejects malformed files") {
    auto p = tmp("windows_bad.tsv");
    spew(p, "nope\n");
    CHECK_THROWS_WITH_AS(artifact::load_windows(p.string()),
                         doctest::Contains("header"), DataError);
    spew(p, "ordrec.windows.v1 seq_len=3\nu\t0\t1,2,3\t4\n");  // 3 inputs, want 2
    CHECK_THROWS_WITH_AS(artifact::load_windows(p.string()),
                         doctest::Contains("expected 2 input items"), DataError);
    spew(p, "ordrec.windows.v1 seq_len=3\nu\t0\t1,x\t4\n");
    CHECK_THROWS_WITH_AS(artifact::load_windows(p.string()),
                         doctest::Contains("line 2"), DataError);
    spew(p, "ordrec.windows.v1 seq_len=3\nu\t0\n");
    CHECK_THROWS_AS(artifact::load_windows(p.string()), DataError);
    fs::remove(p);
}
