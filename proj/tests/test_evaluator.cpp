#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "evaluator.hpp"
#include "json.hpp"
#include "trainer.hpp"

using namespace ordrec;

TEST_CASE("rank_of_true closed cases") {
    CHECK(evaluator::rank_of_true({0.1f, 0.5f, 0.2f}, 1) == 1);
    // Uniform scores: the tie order is ascending index.
    std::vector<float> u(4, 0.25f);
    CHECK(evaluator::rank_of_true(u, 0) == 1);
    CHECK(evaluator::rank_of_true(u, 3) == 4);
    // One strictly greater, one equal at a smaller index.
    CHECK(evaluator::rank_of_true({0.3f, 0.2f, 0.2f}, 2) == 3);
}

TEST_CASE("rank_of_true agrees with a full sort") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + int(rng.next_below(30));
        std::vector<float> probs(static_cast<std::size_t>(n));
        // Quantize hard so duplicates are common.
        for (auto& p : probs) p = float(rng.next_below(5)) / 4.0f;

        std::vector<std::int32_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
            if (probs[std::size_t(a)] != probs[std::size_t(b)])
                return probs[std::size_t(a)] > probs[std::size_t(b)];
            return a < b;
        });
        for (int i = 0; i < n; ++i) {
            const std::int32_t true_idx = order[std::size_t(i)];
            CHECK(evaluator::rank_of_true(probs, true_idx) == i + 1);
        }
    }
}

TEST_CASE("single-relevant ndcg closed cases") {
    CHECK(evaluator::ndcg_at_k(1, 10) == doctest::Approx(1.0));
    CHECK(evaluator::ndcg_at_k(2, 10) == doctest::Approx(1.0 / std::log2(3.0)));
    CHECK(evaluator::ndcg_at_k(10, 10) == doctest::Approx(1.0 / std::log2(11.0)));
    CHECK(evaluator::ndcg_at_k(11, 10) == 0.0);
}

namespace {

// Independent oracle: average ranks by grouped positions, then a recursive
// walk over all sign assignments. The library uses doubled-integer ranks and a
// bitmask sweep, so agreement is meaningful.
struct OracleOut {
    double w = 0, p = 1;
    int n = 0;
};

OracleOut oracle_wilcoxon(const std::vector<std::int64_t>& model,
                          const std::vector<std::int64_t>& baseline) {
    std::vector<double> d;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double x = double(baseline[i]) - double(model[i]);
        if (x != 0) d.push_back(x);
    }
    const int n = int(d.size());
    std::vector<int> ord(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
        return std::fabs(d[std::size_t(a)]) < std::fabs(d[std::size_t(b)]);
    });
    std::vector<double> rank(static_cast<std::size_t>(n));
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && std::fabs(d[std::size_t(ord[std::size_t(j + 1)])]) ==
                                std::fabs(d[std::size_t(ord[std::size_t(i)])]))
            ++j;
        double avg = 0;
        for (int t = i; t <= j; ++t) avg += t + 1;
        avg /= double(j - i + 1);
        for (int t = i; t <= j; ++t) rank[std::size_t(ord[std::size_t(t)])] = avg;
        i = j + 1;
    }
    OracleOut out;
    out.n = n;
    for (int t = 0; t < n; ++t)
        if (d[std::size_t(t)] > 0) out.w += rank[std::size_t(t)];

    long long ge = 0;
    std::function<void(int, double)> rec = [&](int t, double w) {
        if (t == n) {
            if (w >= out.w) ++ge;
            return;
        }
        rec(t + 1, w);
        rec(t + 1, w + rank[std::size_t(t)]);
    };
    rec(0, 0.0);
    out.p = double(ge) / std::ldexp(1.0, n);
    return out;
}

}  // namespace

TEST_CASE("wilcoxon all-positive differences at n=5") {
    // baseline - model is positive everywhere: W takes its maximum 15 and the
    // inclusive exact tail holds exactly one of the 32 sign assignments.
    std::vector<std::int64_t> model{1, 2, 3, 4, 5}, base{10, 12, 14, 16, 18};
    auto r = evaluator::wilcoxon_signed_rank(model, base, 20);
    CHECK(r.exact);
    CHECK(r.n_nonzero == 5);
    CHECK(r.w == doctest::Approx(15.0));
    CHECK(r.p == doctest::Approx(1.0 / 32).epsilon(1e-12));
}

TEST_CASE("wilcoxon all-negative differences at n=5") {
    // W = 0 and every sign assignment reaches at least 0, so the inclusive
    // tail is the whole space.
    std::vector<std::int64_t> model{10, 12, 14, 16, 18}, base{1, 2, 3, 4, 5};
    auto r = evaluator::wilcoxon_signed_rank(model, base, 20);
    CHECK(r.exact);
    CHECK(r.w == doctest::Approx(0.0));
    CHECK(r.p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("wilcoxon drops zero differences") {
    std::vector<std::int64_t> model{5, 2, 3, 4, 5, 9}, base{5, 7, 8, 9, 10, 9};
    auto r = evaluator::wilcoxon_signed_rank(model, base, 20);
    CHECK(r.n_nonzero == 4);
    CHECK(r.w == doctest::Approx(10.0));  // all positive, ranks 1..4
    CHECK(r.p == doctest::Approx(1.0 / 16).epsilon(1e-12));
}

TEST_CASE("wilcoxon exact matches the recursive oracle with ties and zeros") {
    Rng rng(606);
    int tested = 0;
    while (tested < 30) {
        const int n = 5 + int(rng.next_below(8));  // 5..12 pairs
        std::vector<std::int64_t> model(static_cast<std::size_t>(n)), base(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            model[std::size_t(i)] = 1 + std::int64_t(rng.next_below(6));
            base[std::size_t(i)] = 1 + std::int64_t(rng.next_below(6));
        }
        auto want = oracle_wilcoxon(model, base);
        if (want.n == 0) {
            CHECK_THROWS_AS(evaluator::wilcoxon_signed_rank(model, base, 12), DataError);
            continue;
        }
        auto got = evaluator::wilcoxon_signed_rank(model, base, 12);
        CHECK(got.exact);
        CHECK(got.n_nonzero == want.n);
        CHECK(got.w == doctest::Approx(want.w).epsilon(1e-12));
        CHECK(got.p == doctest::Approx(want.p).epsilon(1e-12));
        ++tested;
    }
}

TEST_CASE("wilcoxon W statistics of the two directions partition the rank sum") {
    std::vector<std::int64_t> model{3, 1, 4, 1, 5, 9, 2, 6}, base{2, 7, 1, 8, 2, 8, 1, 8};
    auto ab = evaluator::wilcoxon_signed_rank(model, base, 20);
    auto ba = evaluator::wilcoxon_signed_rank(base, model, 20);
    const double n = ab.n_nonzero;
    CHECK(ab.w + ba.w == doctest::Approx(n * (n + 1) / 2).epsilon(1e-12));
}

TEST_CASE("wilcoxon normal approximation tracks the exact tail at n=20") {
    Rng rng(99);
    std::vector<std::int64_t> model(20), base(20);
    for (int i = 0; i < 20; ++i) {
        model[std::size_t(i)] = 1 + std::int64_t(rng.next_below(40));
        base[std::size_t(i)] = 5 + std::int64_t(rng.next_below(40));
    }
    auto exact = evaluator::wilcoxon_signed_rank(model, base, 20);
    auto approx = evaluator::wilcoxon_signed_rank(model, base, 0);
    REQUIRE(exact.exact);
    REQUIRE(!approx.exact);
    CHECK(exact.w == approx.w);
    CHECK(std::fabs(exact.p - approx.p) < 0.01);
}

TEST_CASE("wilcoxon input validation") {
    std::vector<std::int64_t> a{1, 2, 3}, b{1, 2};
    CHECK_THROWS_AS(evaluator::wilcoxon_signed_rank(a, b, 20), UsageError);
    CHECK_THROWS_AS(evaluator::wilcoxon_signed_rank({}, {}, 20), UsageError);
    std::vector<std::int64_t> same{4, 5, 6, 7, 8};
    CHECK_THROWS_WITH_AS(evaluator::wilcoxon_signed_rank(same, same, 20),
                         doctest::Contains("degenerate"), DataError);
    // Too few pairs for the normal path.
    std::vector<std::int64_t> m{1, 2, 3, 4}, s{2, 3, 4, 5};
    CHECK_THROWS_AS(evaluator::wilcoxon_signed_rank(m, s, 2), UsageError);
}

namespace {

// Zero-weight model over an 8-item output set: every distribution is uniform,
// so the rank of a label is its dense index + 1 and everything about the
// report has a closed form.
struct EvalFixture {
    ModelArtifact art;
    std::vector<TrainingWindow> windows;

    EvalFixture() {
        std::vector<PurchaseSequence> seqs;
        for (int u = 0; u < 4; ++u) {
            PurchaseSequence s;
            s.user_id = "user" + std::to_string(u);
            for (int i = 0; i < 9; ++i) s.items.push_back(1 + (u * 3 + i) % 8);
            seqs.push_back(s);
        }
        art.vocab = corpus::build_vocab(seqs);
        Word2VecConfig wc;
        wc.dim = 4;
        wc.epochs = 1;
        wc.seed = 2;
        art.features =
            embedding::build_feature_table(embedding::train_word2vec(seqs, wc), art.vocab);
        art.cfg.seq_len_in = 3;
        art.cfg.feature_dim = art.features.feature_dim;
        art.cfg.hidden1 = 4;
        art.cfg.hidden2 = 4;
        art.cfg.n_outputs = int(art.vocab.n_outputs());
        art.params = lstm::ModelParams<float>(art.cfg);  // all zero

        CorpusConfig cc;
        cc.seq_len = 4;
        windows = corpus::windowize_all(seqs, cc, art.vocab);
    }
};

}  // namespace

TEST_CASE("evaluate on a uniform model matches the closed form") {
    EvalFixture f;
    auto rep = evaluator::evaluate(f.art, f.windows, {1, 3, 8}, 42, 20);

    REQUIRE(rep.n_cases == std::int64_t(f.windows.size()));
    CHECK(rep.n_outputs == 8);
    CHECK(rep.random_baseline_rank == doctest::Approx(4.0));

    std::vector<std::int64_t> ranks;
    for (const auto& w : f.windows)
        ranks.push_back(f.art.vocab.output_index.at(w.label) + 1);
    double mean = 0;
    for (auto r : ranks) mean += double(r);
    mean /= double(ranks.size());
    CHECK(rep.mean_rank == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rep.mean_rank_percentile == doctest::Approx(mean / 8.0).epsilon(1e-12));

    auto sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2
                              ? double(sorted[h])
                              : (double(sorted[h - 1]) + double(sorted[h])) / 2.0;
    CHECK(rep.median_rank == doctest::Approx(median).epsilon(1e-12));

    for (int k : {1, 3, 8}) {
        double hit = 0, ndcg = 0;
        for (auto r : ranks) {
            if (r <= k) {
                hit += 1;
                ndcg += 1.0 / std::log2(double(r) + 1.0);
            }
        }
        CHECK(rep.hit_at.at(k) == doctest::Approx(hit / double(ranks.size())).epsilon(1e-12));
        CHECK(rep.ndcg_at.at(k) ==
              doctest::Approx(ndcg / double(ranks.size())).epsilon(1e-12));
    }
    CHECK(rep.hit_at.at(8) == doctest::Approx(1.0));
    CHECK(rep.baseline_seed == 42);
}

TEST_CASE("evaluate gives a concentrated model rank one everywhere") {
    EvalFixture f;
    // Keep only windows labeled with one item and bias the head hard toward it.
    const std::int64_t star = f.windows.front().label;
    std::vector<TrainingWindow> subset;
    for (const auto& w : f.windows)
        if (w.label == star) subset.push_back(w);
    REQUIRE(subset.size() >= 3);
    f.art.params.out.b[std::size_t(f.art.vocab.output_index.at(star))] = 50.0f;

    auto rep = evaluator::evaluate(f.art, subset, {1, 5}, 7, 20);
    CHECK(rep.mean_rank == doctest::Approx(1.0));
    CHECK(rep.median_rank == doctest::Approx(1.0));
    CHECK(rep.hit_at.at(1) == doctest::Approx(1.0));
    CHECK(rep.ndcg_at.at(1) == doctest::Approx(1.0));
    CHECK(rep.mean_rank_percentile == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("evaluate validates its inputs") {
    EvalFixture f;
    CHECK_THROWS_WITH_AS(evaluator::evaluate(f.art, {}, {1}, 1, 20),
                         doctest::Contains("empty test set"), DataError);
    CHECK_THROWS_AS(evaluator::evaluate(f.art, f.windows, {0}, 1, 20), UsageError);
    CHECK_THROWS_AS(evaluator::evaluate(f.art, f.windows, {}, 1, 20), UsageError);
    auto bad = f.windows;
    bad[0].label = 424242;
    CHECK_THROWS_AS(evaluator::evaluate(f.art, bad, {1}, 1, 20), DataError);
}

TEST_CASE("evaluation reports are deterministic in the baseline seed") {
    EvalFixture f;
    auto a = evaluator::evaluate(f.art, f.windows, {1, 8}, 1234, 20);
    auto b = evaluator::evaluate(f.art, f.windows, {1, 8}, 1234, 20);
    CHECK(evaluator::report_to_json(a) == evaluator::report_to_json(b));
    auto c = evaluator::evaluate(f.art, f.windows, {1, 8}, 4321, 20);
    CHECK(a.wilcoxon_statistic != c.wilcoxon_statistic);  // different baseline draw
}

TEST_CASE("the json report carries every metric") {
    EvalFixture f;
    auto rep = evaluator::evaluate(f.art, f.windows, {1, 3}, 9, 20);
    auto j = nlohmann::json::parse(evaluator::report_to_json(rep));
    CHECK(j["n_cases"] == rep.n_cases);
    CHECK(j["n_outputs"] == 8);
    CHECK(j["mean_rank"] == doctest::Approx(rep.mean_rank));
    CHECK(j["median_rank"] == doctest::Approx(rep.median_rank));
    CHECK(j["mean_rank_percentile"] == doctest::Approx(rep.mean_rank_percentile));
    CHECK(j["random_baseline_rank"] == doctest::Approx(4.0));
    CHECK(j["hit_at_1"] == doctest::Approx(rep.hit_at.at(1)));
    CHECK(j["hit_at_3"] == doctest::Approx(rep.hit_at.at(3)));
    CHECK(j["ndcg_at_1"] == doctest::Approx(rep.ndcg_at.at(1)));
    CHECK(j["ndcg_at_3"] == doctest::Approx(rep.ndcg_at.at(3)));
    CHECK(j["wilcoxon_statistic"] == doctest::Approx(rep.wilcoxon_statistic));
    CHECK(j["wilcoxon_p"] == doctest::Approx(rep.wilcoxon_p));
    CHECK(j["wilcoxon_exact"] == rep.wilcoxon_exact);
    CHECK(j["baseline_seed"] == 9);
    CHECK(evaluator::report_to_json(rep).back() == '\n');
}
