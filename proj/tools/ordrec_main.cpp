// ordrec: one binary, one subcommand per pipeline stage, file handoffs
// between stages. All real work happens behind the C API.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ordrec.h"

namespace {

using nlohmann::json;

int fail(int code, const std::string& msg) {
    std::fprintf(stderr, "code=%d %s\n", code, msg.c_str());
    return code;
}

// nonzero C-API status -> report + exit code
int finish(int rc) {
    if (rc != ORDREC_OK) return fail(rc, ordrec_errmsg());
    return 0;
}

std::vector<std::int64_t> parse_id_list(const std::string& s, const char* what) {
    std::vector<std::int64_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(what) + ": bad value '" + tok + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
    return out;
}

// config file: one JSON object per subcommand, keys = long flag names.
const std::map<std::string, std::set<std::string>> kConfigKeys = {
    {"gen-data",
     {"teams", "stages", "items-per-cell", "users", "min-orders", "max-orders",
      "p-adv", "p-switch", "views-per-order", "seed", "out"}},
    {"prepare", {"orders", "views", "seq-len", "tie-seed", "cutoff", "seed", "out"}},
    {"train-embeddings",
     {"views", "dim", "window", "negatives", "epochs", "lr", "min-count", "seed", "out"}},
    {"train",
     {"windows", "embeddings", "hidden1", "hidden2", "batch", "epochs", "lr",
      "val-frac", "seed", "out"}},
    {"evaluate", {"model", "windows", "k", "exact-wilcoxon-max-n", "seed", "out"}},
    {"predict", {"model", "seed-item", "history", "k", "seed"}},
    {"score-batch", {"model", "requests", "workers", "k", "seed", "out"}},
    {"inspect-model", {"model", "seed"}},
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config file must be a JSON object");
    for (const auto& [section, body] : j.items()) {
        auto it = kConfigKeys.find(section);
        if (it == kConfigKeys.end())
            throw std::runtime_error("config: unknown section '" + section + "'");
        if (!body.is_object())
            throw std::runtime_error("config: section '" + section + "' must be an object");
        for (const auto& [key, _] : body.items())
            if (!it->second.count(key))
                throw std::runtime_error("config: unknown key '" + key + "' in section '" +
                                         section + "'");
    }
    return j;
}

// Pulls a default out of the active config section, if present.
struct Section {
    const json* j = nullptr;

    template <class T>
    void get(const char* key, T& var) const {
        if (j && j->contains(key)) j->at(key).get_to(var);
    }
    bool has(const char* key) const { return j && j->contains(key); }
};

struct EchoLine {
    std::string line;

    explicit EchoLine(const std::string& cmd) : line("config: " + cmd) {}
    EchoLine& kv(const std::string& k, const std::string& v) {
        line += " " + k + "=" + v;
        return *this;
    }
    EchoLine& kv(const std::string& k, std::int64_t v) { return kv(k, std::to_string(v)); }
    EchoLine& kv(const std::string& k, std::uint64_t v) { return kv(k, std::to_string(v)); }
    EchoLine& kv(const std::string& k, int v) { return kv(k, std::to_string(v)); }
    EchoLine& kv(const std::string& k, double v) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%g", v);
        return kv(k, std::string(buf));
    }
    void emit() const { std::fprintf(stderr, "%s\n", line.c_str()); }
};

}  // namespace

int main(int argc, char** argv) {
    // --config must be read before flag parsing so file values become the
    // flag defaults (explicit flags then override).
    std::string config_path, active;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) config_path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
        else if (active.empty() && !a.empty() && a[0] != '-') active = a;
    }
    json config = json::object();
    if (!config_path.empty()) {
        try {
            config = load_config(config_path);
        } catch (const std::exception& e) {
            return fail(1, e.what());
        }
    }
    auto section = [&](const char* name) {
        return Section{config.contains(name) ? &config[name] : nullptr};
    };

    CLI::App app{"sequential item recommender: embeddings + stateless LSTM"};
    app.name("ordrec");
    app.require_subcommand(1);
    app.set_version_flag("--version", ordrec_version());

    int exit_code = 0;
    std::string cfg_flag;  // registered everywhere; consumed in the pre-scan

    // ---- gen-data ----
    auto gsec = section("gen-data");
    ordrec_gen_params gp{20, 3, 10, 5000, 2, 20, 0.3, 0.05, 3, 42};
    std::string g_out = "data";
    gsec.get("teams", gp.teams);
    gsec.get("stages", gp.stages);
    gsec.get("items-per-cell", gp.items_per_cell);
    gsec.get("users", gp.users);
    gsec.get("min-orders", gp.min_orders);
    gsec.get("max-orders", gp.max_orders);
    gsec.get("p-adv", gp.p_adv);
    gsec.get("p-switch", gp.p_switch);
    gsec.get("views-per-order", gp.views_per_order);
    gsec.get("seed", gp.seed);
    gsec.get("out", g_out);
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
    gen->add_option("--teams", gp.teams);
    gen->add_option("--stages", gp.stages);
    gen->add_option("--items-per-cell", gp.items_per_cell);
    gen->add_option("--users", gp.users);
    gen->add_option("--min-orders", gp.min_orders);
    gen->add_option("--max-orders", gp.max_orders);
    gen->add_option("--p-adv", gp.p_adv);
    gen->add_option("--p-switch", gp.p_switch);
    gen->add_option("--views-per-order", gp.views_per_order);
    gen->add_option("--seed", gp.seed);
    gen->add_option("--out", g_out);
    gen->add_option("--config", cfg_flag, "JSON config file");
    gen->callback([&] {
        EchoLine(("gen-data"))
            .kv("teams", gp.teams).kv("stages", gp.stages)
            .kv("items-per-cell", gp.items_per_cell).kv("users", gp.users)
            .kv("min-orders", gp.min_orders).kv("max-orders", gp.max_orders)
            .kv("p-adv", gp.p_adv).kv("p-switch", gp.p_switch)
            .kv("views-per-order", gp.views_per_order).kv("seed", gp.seed)
            .kv("out", g_out).emit();
        exit_code = finish(ordrec_gen_data(&gp, g_out.c_str()));
    });

    // ---- prepare ----
    auto psec = section("prepare");
    std::string p_orders, p_views, p_out = "prepared";
    int p_seq_len = 12;
    std::uint64_t p_tie_seed = 0, p_seed = 0;
    std::int64_t p_cutoff = -1;
    psec.get("orders", p_orders);
    psec.get("views", p_views);
    psec.get("seq-len", p_seq_len);
    psec.get("tie-seed", p_tie_seed);
    psec.get("cutoff", p_cutoff);
    psec.get("seed", p_seed);
    psec.get("out", p_out);
    auto* prep = app.add_subcommand("prepare", "events -> vocab + training windows");
    prep->add_option("--orders", p_orders)->required(!psec.has("orders"));
    prep->add_option("--views", p_views)->required(!psec.has("views"));
    prep->add_option("--seq-len", p_seq_len);
    auto* tie_opt = prep->add_option("--tie-seed", p_tie_seed);
    prep->add_option("--cutoff", p_cutoff, "drop events after this timestamp (ms)");
    auto* prep_seed_opt = prep->add_option("--seed", p_seed);
    prep->add_option("--out", p_out);
    prep->add_option("--config", cfg_flag, "JSON config file");
    prep->callback([&] {
        if (tie_opt->count() == 0 && !psec.has("tie-seed") &&
            (prep_seed_opt->count() > 0 || psec.has("seed")))
            p_tie_seed = p_seed;
        EchoLine("prepare")
            .kv("orders", p_orders).kv("views", p_views).kv("seq-len", p_seq_len)
            .kv("tie-seed", p_tie_seed).kv("cutoff", p_cutoff).kv("out", p_out).emit();
        ordrec_prepare_stats st{};
        exit_code = finish(ordrec_prepare(p_orders.c_str(), p_views.c_str(), p_seq_len,
                                          p_tie_seed, p_cutoff, p_out.c_str(), &st));
        if (exit_code == 0)
            std::printf("events=%" PRId64 " users=%" PRId64 " kept=%" PRId64
                        " windows=%" PRId64 " dropped=%" PRId64 " items=%" PRId64
                        " outputs=%" PRId64 "\n",
                        st.n_order_events, st.n_users, st.n_sequences_kept, st.n_windows,
                        st.n_dropped_windows, st.n_items, st.n_outputs);
    });

    // ---- train-embeddings ----
    auto esec = section("train-embeddings");
    ordrec_w2v_params wp{100, 5, 5, 5, 0.025, 1, 1};
    std::string e_views, e_out = "embeddings.bin";
    esec.get("views", e_views);
    esec.get("dim", wp.dim);
    esec.get("window", wp.window);
    esec.get("negatives", wp.negatives);
    esec.get("epochs", wp.epochs);
    esec.get("lr", wp.lr);
    esec.get("min-count", wp.min_count);
    esec.get("seed", wp.seed);
    esec.get("out", e_out);
    auto* temb = app.add_subcommand("train-embeddings", "skip-gram item embeddings");
    temb->add_option("--views", e_views)->required(!esec.has("views"));
    temb->add_option("--dim", wp.dim);
    temb->add_option("--window", wp.window);
    temb->add_option("--negatives", wp.negatives);
    temb->add_option("--epochs", wp.epochs);
    temb->add_option("--lr", wp.lr);
    temb->add_option("--min-count", wp.min_count);
    temb->add_option("--seed", wp.seed);
    temb->add_option("--out", e_out);
    temb->add_option("--config", cfg_flag, "JSON config file");
    temb->callback([&] {
        EchoLine("train-embeddings")
            .kv("views", e_views).kv("dim", wp.dim).kv("window", wp.window)
            .kv("negatives", wp.negatives).kv("epochs", wp.epochs).kv("lr", wp.lr)
            .kv("min-count", wp.min_count).kv("seed", wp.seed).kv("out", e_out).emit();
        exit_code = finish(ordrec_train_embeddings(e_views.c_str(), &wp, e_out.c_str()));
    });

    // ---- train ----
    auto tsec = section("train");
    ordrec_train_params tp{600, 600, 4, 10, 1e-3, 0.0, 1};
    std::string t_windows, t_embeddings, t_out = "model.bin";
    tsec.get("windows", t_windows);
    tsec.get("embeddings", t_embeddings);
    tsec.get("hidden1", tp.hidden1);
    tsec.get("hidden2", tp.hidden2);
    tsec.get("batch", tp.batch);
    tsec.get("epochs", tp.epochs);
    tsec.get("lr", tp.lr);
    tsec.get("val-frac", tp.val_frac);
    tsec.get("seed", tp.seed);
    tsec.get("out", t_out);
    auto* tr = app.add_subcommand("train", "train the next-item model");
    tr->add_option("--windows", t_windows)->required(!tsec.has("windows"));
    tr->add_option("--embeddings", t_embeddings)->required(!tsec.has("embeddings"));
    tr->add_option("--hidden1", tp.hidden1);
    tr->add_option("--hidden2", tp.hidden2);
    tr->add_option("--batch", tp.batch);
    tr->add_option("--epochs", tp.epochs);
    tr->add_option("--lr", tp.lr);
    tr->add_option("--val-frac", tp.val_frac);
    tr->add_option("--seed", tp.seed);
    tr->add_option("--out", t_out);
    tr->add_option("--config", cfg_flag, "JSON config file");
    tr->callback([&] {
        EchoLine("train")
            .kv("windows", t_windows).kv("embeddings", t_embeddings)
            .kv("hidden1", tp.hidden1).kv("hidden2", tp.hidden2).kv("batch", tp.batch)
            .kv("epochs", tp.epochs).kv("lr", tp.lr).kv("val-frac", tp.val_frac)
            .kv("seed", tp.seed).kv("out", t_out).emit();
        const std::string report = t_out + ".train.txt";
        auto print_line = [](void*, const char* line) { std::printf("%s\n", line); };
        exit_code = finish(ordrec_train(t_windows.c_str(), t_embeddings.c_str(), &tp,
                                        t_out.c_str(), report.c_str(), print_line,
                                        nullptr));
    });

    // ---- evaluate ----
    auto vsec = section("evaluate");
    std::string v_model, v_windows, v_k = "1,10,100", v_out = "report.json";
    int v_exact_max = 20;
    std::uint64_t v_seed = 0;
    vsec.get("model", v_model);
    vsec.get("windows", v_windows);
    if (vsec.has("k")) {
        if (vsec.j->at("k").is_string()) vsec.get("k", v_k);
        else {
            std::vector<std::int64_t> ks = vsec.j->at("k").get<std::vector<std::int64_t>>();
            v_k.clear();
            for (std::size_t i = 0; i < ks.size(); ++i)
                v_k += (i ? "," : "") + std::to_string(ks[i]);
        }
    }
    vsec.get("exact-wilcoxon-max-n", v_exact_max);
    vsec.get("seed", v_seed);
    vsec.get("out", v_out);
    auto* ev = app.add_subcommand("evaluate", "held-out rank metrics + signed-rank test");
    ev->add_option("--model", v_model)->required(!vsec.has("model"));
    ev->add_option("--windows", v_windows)->required(!vsec.has("windows"));
    ev->add_option("--k", v_k, "comma-separated cutoffs");
    ev->add_option("--exact-wilcoxon-max-n", v_exact_max);
    ev->add_option("--seed", v_seed, "baseline rank seed");
    ev->add_option("--out", v_out);
    ev->add_option("--config", cfg_flag, "JSON config file");
    ev->callback([&] {
        EchoLine("evaluate")
            .kv("model", v_model).kv("windows", v_windows).kv("k", v_k)
            .kv("exact-wilcoxon-max-n", v_exact_max).kv("seed", v_seed)
            .kv("out", v_out).emit();
        auto ks64 = parse_id_list(v_k, "--k");
        std::vector<std::int32_t> ks(ks64.begin(), ks64.end());
        char* body = nullptr;
        exit_code = finish(ordrec_evaluate(v_model.c_str(), v_windows.c_str(), ks.data(),
                                           std::int32_t(ks.size()), v_exact_max, v_seed,
                                           v_out.c_str(), &body));
        if (exit_code == 0 && body) std::fputs(body, stdout);
        ordrec_free(body);
    });

    // ---- predict ----
    auto dsec = section("predict");
    std::string d_model, d_history;
    std::int64_t d_seed_item = 0;
    int d_k = 10;
    std::uint64_t d_seed = 0;
    dsec.get("model", d_model);
    dsec.get("history", d_history);
    dsec.get("seed-item", d_seed_item);
    dsec.get("k", d_k);
    dsec.get("seed", d_seed);
    auto* pr = app.add_subcommand("predict", "top-k next items for one input");
    pr->add_option("--model", d_model)->required(!dsec.has("model"));
    auto* seed_item_opt = pr->add_option("--seed-item", d_seed_item);
    auto* history_opt = pr->add_option("--history", d_history, "comma-separated item ids");
    pr->add_option("--k", d_k);
    pr->add_option("--seed", d_seed);
    pr->add_option("--config", cfg_flag, "JSON config file");
    pr->callback([&] {
        const bool have_seed_item = seed_item_opt->count() > 0 || dsec.has("seed-item");
        const bool have_history = history_opt->count() > 0 || dsec.has("history");
        if (have_seed_item == have_history)
            throw CLI::ValidationError("predict needs exactly one of --seed-item/--history");
        EchoLine("predict")
            .kv("model", d_model)
            .kv(have_seed_item ? "seed-item" : "history",
                have_seed_item ? std::to_string(d_seed_item) : d_history)
            .kv("k", d_k).emit();
        std::vector<std::int64_t> history = have_seed_item
                                                ? std::vector<std::int64_t>{d_seed_item}
                                                : parse_id_list(d_history, "--history");
        ordrec_model* m = nullptr;
        exit_code = finish(ordrec_model_open(d_model.c_str(), &m));
        if (exit_code != 0) return;
        std::vector<std::int64_t> items(std::size_t(std::max(d_k, 1)));
        std::vector<double> probs(items.size());
        std::int32_t n = 0;
        exit_code = finish(ordrec_predict(m, history.data(),
                                          std::int32_t(history.size()), d_k, items.data(),
                                          probs.data(), &n));
        if (exit_code == 0)
            for (std::int32_t i = 0; i < n; ++i)
                std::printf("%" PRId64 ":%.6f\n", items[std::size_t(i)],
                            probs[std::size_t(i)]);
        ordrec_model_close(m);
    });

    // ---- score-batch ----
    auto ssec = section("score-batch");
    std::string s_model, s_requests, s_out = "scores.tsv";
    int s_workers = 1, s_k = 10;
    std::uint64_t s_seed = 0;
    ssec.get("model", s_model);
    ssec.get("requests", s_requests);
    ssec.get("workers", s_workers);
    ssec.get("k", s_k);
    ssec.get("seed", s_seed);
    ssec.get("out", s_out);
    auto* sb = app.add_subcommand("score-batch", "parallel sharded batch scoring");
    sb->add_option("--model", s_model)->required(!ssec.has("model"));
    sb->add_option("--requests", s_requests)->required(!ssec.has("requests"));
    sb->add_option("--workers", s_workers);
    sb->add_option("--k", s_k);
    sb->add_option("--seed", s_seed);
    sb->add_option("--out", s_out);
    sb->add_option("--config", cfg_flag, "JSON config file");
    sb->callback([&] {
        EchoLine("score-batch")
            .kv("model", s_model).kv("requests", s_requests).kv("workers", s_workers)
            .kv("k", s_k).kv("out", s_out).emit();
        std::vector<std::int64_t> loads(std::size_t(std::max(s_workers, 1)), 0);
        exit_code = finish(ordrec_score_batch(s_model.c_str(), s_requests.c_str(),
                                              s_workers, s_k, s_out.c_str(),
                                              loads.data()));
        if (exit_code == 0) {
            std::string line = "loads:";
            for (std::size_t w = 0; w < loads.size(); ++w)
                line += " w" + std::to_string(w) + "=" + std::to_string(loads[w]);
            std::fprintf(stderr, "%s\n", line.c_str());
        }
    });

    // ---- inspect-model ----
    auto isec = section("inspect-model");
    std::string i_model;
    std::uint64_t i_seed = 0;
    isec.get("model", i_model);
    isec.get("seed", i_seed);
    auto* insp = app.add_subcommand("inspect-model", "print manifest + tensor norms");
    insp->add_option("--model", i_model)->required(!isec.has("model"));
    insp->add_option("--seed", i_seed);
    insp->add_option("--config", cfg_flag, "JSON config file");
    insp->callback([&] {
        EchoLine("inspect-model").kv("model", i_model).emit();
        char* body = nullptr;
        exit_code = finish(ordrec_inspect(i_model.c_str(), &body));
        if (exit_code == 0 && body) std::fputs(body, stdout);
        ordrec_free(body);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::ostringstream usage;
        usage << e.what() << " (run 'ordrec --help')";
        return fail(1, usage.str());
    }
    return exit_code;
}
