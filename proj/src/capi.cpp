#include "ordrec.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "artifact.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "evaluator.hpp"
#include "predictor.hpp"
#include "synthgen.hpp"
#include "trainer.hpp"

using namespace ordrec;

namespace {

thread_local std::string g_errmsg;

template <class F>
int guarded(F&& f) {
    try {
        f();
        return ORDREC_OK;
    } catch (const UsageError& e) {
        g_errmsg = e.what();
        return ORDREC_E_USAGE;
    } catch (const NumericError& e) {
        g_errmsg = e.what();
        return ORDREC_E_NUMERIC;
    } catch (const std::exception& e) {
        g_errmsg = e.what();
        return ORDREC_E_DATA;
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void require(bool ok, const char* what) {
    if (!ok) throw UsageError(what);
}

}  // namespace

struct ordrec_model {
    ModelArtifact art;
};

extern "C" {

const char* ordrec_version(void) { return "ordrec 1.0.0"; }

const char* ordrec_errmsg(void) { return g_errmsg.c_str(); }

void ordrec_free(char* p) { std::free(p); }

int ordrec_gen_data(const ordrec_gen_params* p, const char* out_dir) {
    return guarded([&] {
        require(p && out_dir, "null argument");
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        auto cat = synthgen::gen_catalog(p->teams, p->stages, p->items_per_cell, p->seed);
        GenParams gp;
        gp.n_users = p->users;
        gp.min_orders = p->min_orders;
        gp.max_orders = p->max_orders;
        gp.p_adv = p->p_adv;
        gp.p_switch = p->p_switch;
        gp.views_per_order = p->views_per_order;
        gp.seed = p->seed;
        const fs::path dir(out_dir);
        synthgen::gen_histories(cat, gp, (dir / "orders.tsv").string(),
                                (dir / "views.tsv").string());
        synthgen::save_catalog(cat, (dir / "catalog.tsv").string());
    });
}

int ordrec_prepare(const char* orders_path, const char* views_path, int32_t seq_len,
                   uint64_t tie_seed, int64_t cutoff_ms, const char* out_dir,
                   ordrec_prepare_stats* stats) {
    return guarded([&] {
        require(orders_path && views_path && out_dir, "null argument");
        require(seq_len >= 2, "seq_len must be >= 2");
        namespace fs = std::filesystem;

        CorpusConfig cfg;
        cfg.seq_len = seq_len;
        cfg.tie_break_seed = tie_seed;
        if (cutoff_ms >= 0) cfg.cutoff_ms = cutoff_ms;

        auto orders = corpus::parse_orders(orders_path, cfg.cutoff_ms);
        // views are consumed raw by the embedding stage; validate them here so
        // the failure surfaces at prepare time
        auto views = corpus::parse_orders(views_path, cfg.cutoff_ms);

        auto seqs = corpus::group_ordered(orders, cfg);
        const std::size_t n_users = seqs.size();
        seqs = corpus::filter_min_length(std::move(seqs));
        auto vocab = corpus::build_vocab(seqs);
        std::size_t dropped = 0;
        auto windows = corpus::windowize_all(seqs, cfg, vocab, &dropped);

        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        artifact::save_vocab(vocab, (dir / "vocab.tsv").string());
        artifact::save_windows(windows, seq_len, (dir / "windows.tsv").string());

        if (stats) {
            stats->n_order_events = std::int64_t(orders.size());
            stats->n_view_events = std::int64_t(views.size());
            stats->n_users = std::int64_t(n_users);
            stats->n_sequences_kept = std::int64_t(seqs.size());
            stats->n_windows = std::int64_t(windows.size());
            stats->n_dropped_windows = std::int64_t(dropped);
            stats->n_items = vocab.n_items();
            stats->n_outputs = vocab.n_outputs();
        }
    });
}

int ordrec_train_embeddings(const char* views_path, const ordrec_w2v_params* p,
                            const char* out_path) {
    return guarded([&] {
        require(views_path && p && out_path, "null argument");
        Word2VecConfig cfg;
        cfg.dim = p->dim;
        cfg.window = p->window;
        cfg.negatives = p->negatives;
        cfg.epochs = p->epochs;
        cfg.initial_lr = p->lr;
        cfg.min_count = p->min_count;
        cfg.seed = p->seed;

        auto events = corpus::parse_orders(views_path, std::nullopt);
        CorpusConfig ccfg;  // grouping for views: same order semantics, no windows
        auto seqs = corpus::group_ordered(events, ccfg);
        auto model = embedding::train_word2vec(seqs, cfg);
        artifact::save_word2vec(model, out_path);
    });
}

int ordrec_train(const char* windows_dir, const char* embeddings_path,
                 const ordrec_train_params* p, const char* out_path,
                 const char* report_path, ordrec_epoch_fn on_epoch, void* epoch_ctx) {
    return guarded([&] {
        require(windows_dir && embeddings_path && p && out_path, "null argument");
        namespace fs = std::filesystem;
        const fs::path dir(windows_dir);

        auto vocab = artifact::load_vocab((dir / "vocab.tsv").string());
        int seq_len = 0;
        auto windows = artifact::load_windows((dir / "windows.tsv").string(), &seq_len);
        auto w2v = artifact::load_word2vec(embeddings_path);
        auto features = embedding::build_feature_table(w2v, vocab);

        TrainConfig cfg;
        cfg.hidden1 = p->hidden1;
        cfg.hidden2 = p->hidden2;
        cfg.batch_size = p->batch;
        cfg.epochs = p->epochs;
        cfg.learning_rate = p->lr;
        cfg.validation_fraction = p->val_frac;
        cfg.model_seed = p->seed;
        cfg.shuffle_seed = splitmix64(p->seed ^ 0x736875666665ULL);  // "shuffe"

        std::ofstream report;
        if (report_path) {
            report.open(report_path, std::ios::trunc);
            if (!report) throw DataError(std::string("cannot write ") + report_path);
        }
        auto emit = [&](const EpochStats& st) {
            char line[192];
            if (st.n_val > 0)
                std::snprintf(line, sizeof line,
                              "epoch=%d train_loss=%.6f val_loss=%.6f n_train=%lld n_val=%lld",
                              st.epoch, st.train_loss, st.val_loss,
                              (long long)st.n_train, (long long)st.n_val);
            else
                std::snprintf(line, sizeof line,
                              "epoch=%d train_loss=%.6f n_train=%lld",
                              st.epoch, st.train_loss, (long long)st.n_train);
            if (report.is_open()) report << line << "\n";
            if (on_epoch) on_epoch(epoch_ctx, line);
        };

        TrainReport rep;
        auto art = train_model(windows, vocab, features, seq_len, cfg, &rep, emit);
        artifact::save(art, out_path);
    });
}

int ordrec_evaluate(const char* model_path, const char* windows_dir, const int32_t* ks,
                    int32_t n_ks, int32_t exact_wilcoxon_max_n, uint64_t baseline_seed,
                    const char* out_path, char** out_json) {
    return guarded([&] {
        require(model_path && windows_dir && out_path, "null argument");
        require(n_ks >= 1 && ks, "need at least one k cutoff");
        require(exact_wilcoxon_max_n >= 0 && exact_wilcoxon_max_n <= 30,
                "exact wilcoxon limit must be in 0..30");
        namespace fs = std::filesystem;

        auto art = artifact::load(model_path);
        int seq_len = 0;
        auto windows = artifact::load_windows(
            (fs::path(windows_dir) / "windows.tsv").string(), &seq_len);
        if (seq_len - 1 != art.cfg.seq_len_in)
            throw DataError("windows were built with seq_len " + std::to_string(seq_len) +
                            " but the model expects " +
                            std::to_string(art.cfg.seq_len_in + 1));

        std::vector<int> k_list(ks, ks + n_ks);
        auto rep = evaluator::evaluate(art, windows, k_list, baseline_seed,
                                       exact_wilcoxon_max_n);
        const std::string json = evaluator::report_to_json(rep);
        std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
        if (!out) throw DataError(std::string("cannot write ") + out_path);
        out << json;
        if (!out) throw DataError(std::string("write failed: ") + out_path);
        if (out_json) *out_json = dup_string(json);
    });
}

int ordrec_model_open(const char* path, ordrec_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        auto m = std::make_unique<ordrec_model>();
        m->art = artifact::load(path);
        *out = m.release();
    });
}

void ordrec_model_close(ordrec_model* m) { delete m; }

int ordrec_predict(const ordrec_model* m, const int64_t* history, int32_t n_history,
                   int32_t k, int64_t* items, double* probs, int32_t* out_n) {
    return guarded([&] {
        require(m && history && items && probs && out_n, "null argument");
        require(n_history >= 1, "empty history");
        std::vector<std::int64_t> h(history, history + n_history);
        auto r = predictor::predict_next(m->art, h, k);
        for (std::size_t i = 0; i < r.top_k.size(); ++i) {
            items[i] = r.top_k[i].item;
            probs[i] = r.top_k[i].prob;
        }
        *out_n = std::int32_t(r.top_k.size());
    });
}

int ordrec_rollout(const ordrec_model* m, const int64_t* history, int32_t n_history,
                   int32_t horizon, int32_t k_per_step, int64_t* items, double* probs,
                   int32_t* out_per_step) {
    return guarded([&] {
        require(m && history && items && probs && out_per_step, "null argument");
        require(n_history >= 1, "empty history");
        std::vector<std::int64_t> h(history, history + n_history);
        auto steps = predictor::rollout(m->art, h, horizon, k_per_step);
        const std::size_t per = steps.front().top_k.size();
        for (std::size_t s = 0; s < steps.size(); ++s)
            for (std::size_t i = 0; i < per; ++i) {
                items[s * per + i] = steps[s].top_k[i].item;
                probs[s * per + i] = steps[s].top_k[i].prob;
            }
        *out_per_step = std::int32_t(per);
    });
}

int ordrec_score_batch(const char* model_path, const char* requests_path,
                       int32_t n_workers, int32_t k, const char* out_path,
                       int64_t* load_counts) {
    return guarded([&] {
        require(model_path && requests_path && out_path, "null argument");
        auto requests = predictor::parse_requests(requests_path);
        ScoreStats stats;
        auto results = predictor::score_batch(model_path, requests, n_workers, k, &stats);
        predictor::write_results(results, out_path);
        if (load_counts)
            for (std::size_t w = 0; w < stats.loads_per_worker.size(); ++w)
                load_counts[w] = stats.loads_per_worker[w];
    });
}

int ordrec_inspect(const char* path, char** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = dup_string(artifact::describe(path));
    });
}

}  // extern "C"
