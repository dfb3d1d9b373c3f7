#include "synthgen.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace ordrec::synthgen {

SyntheticCatalog gen_catalog(int n_teams, int n_stages, int items_per_cell,
                             std::uint64_t seed) {
    if (n_teams < 1 || n_stages < 1 || items_per_cell < 1)
        throw UsageError("catalog dimensions must be >= 1");
    const std::int64_t kMaxItems = std::int64_t(1) << 40;
    const std::int64_t cells = std::int64_t(n_teams) * n_stages;  // < 2^62, safe
    if (cells > kMaxItems / items_per_cell)
        throw UsageError("catalog size overflows the id range");
    SyntheticCatalog cat;
    cat.n_teams = n_teams;
    cat.n_stages = n_stages;
    cat.items_per_cell = items_per_cell;
    cat.seed = seed;
    return cat;
}

void gen_histories(const SyntheticCatalog& cat, const GenParams& p,
                   const std::string& orders_path, const std::string& views_path) {
    if (p.n_users < 1) throw UsageError("need at least one user");
    if (p.min_orders < 2) throw UsageError("min orders must be >= 2");
    if (p.max_orders < p.min_orders) throw UsageError("max orders < min orders");
    if (p.p_adv < 0 || p.p_adv > 1 || p.p_switch < 0 || p.p_switch > 1)
        throw UsageError("probabilities must be in [0, 1]");
    if (p.views_per_order < 1) throw UsageError("views per order must be >= 1");

    std::ofstream orders(orders_path, std::ios::trunc);
    if (!orders) throw DataError("cannot write " + orders_path);
    std::ofstream views(views_path, std::ios::trunc);
    if (!views) throw DataError("cannot write " + views_path);

    Rng rng(splitmix64(cat.seed ^ splitmix64(p.seed)));
    char user[32];
    for (int u = 0; u < p.n_users; ++u) {
        std::snprintf(user, sizeof user, "u%06d", u + 1);
        const int n_orders = int(rng.next_range(p.min_orders, p.max_orders));
        int team = int(rng.next_below(std::uint64_t(cat.n_teams)));
        int stage = int(rng.next_below(std::uint64_t(cat.n_stages)));
        std::int64_t ts = 1'000'000;  // per-user clock; uniqueness is per user

        for (int o = 0; o < n_orders; ++o) {
            if (o > 0) {
                if (stage + 1 < cat.n_stages && rng.next_bernoulli(p.p_adv)) ++stage;
                if (cat.n_teams > 1 && rng.next_bernoulli(p.p_switch)) {
                    // jump to a uniformly chosen *other* team
                    int t = int(rng.next_below(std::uint64_t(cat.n_teams - 1)));
                    team = t < team ? t : t + 1;
                }
            }
            const auto slot_of = [&]() {
                return int(rng.next_below(std::uint64_t(cat.items_per_cell)));
            };
            const std::int64_t order_item = cat.item_at(team, stage, slot_of());
            // browsing: same-cell items leading up to the purchase, order last
            for (int v = 0; v < p.views_per_order - 1; ++v) {
                views << user << "\t" << ts << "\t"
                      << cat.item_at(team, stage, slot_of()) << "\n";
                ts += 1000;
            }
            views << user << "\t" << ts << "\t" << order_item << "\n";
            orders << user << "\t" << ts << "\t" << order_item << "\n";
            ts += 1000;
        }
    }
    if (!orders || !views) throw DataError("write failed while generating histories");
}

void save_catalog(const SyntheticCatalog& cat, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "ordrec.catalog.v1 teams=" << cat.n_teams << " stages=" << cat.n_stages
        << " items_per_cell=" << cat.items_per_cell << " seed=" << cat.seed << "\n";
    for (std::int64_t i = 1; i <= cat.n_items(); ++i)
        out << i << "\t" << cat.team_of(i) << "\t" << cat.stage_of(i) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

SyntheticCatalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty catalog file " + path);
    SyntheticCatalog cat;
    std::uint64_t seed = 0;
    if (std::sscanf(header.c_str(),
                    "ordrec.catalog.v1 teams=%d stages=%d items_per_cell=%d seed=%" SCNu64,
                    &cat.n_teams, &cat.n_stages, &cat.items_per_cell, &seed) != 4)
        throw DataError("bad catalog header in " + path);
    cat.seed = seed;
    if (cat.n_teams < 1 || cat.n_stages < 1 || cat.items_per_cell < 1)
        throw DataError("bad catalog dimensions in " + path);
    return cat;
}

}  // namespace ordrec::synthgen
