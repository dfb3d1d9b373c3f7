#pragma once

// Synthetic catalogs and histories with planted structure: item lifecycles
// advance through ordered stages and never regress, and users stick to one
// team almost always. Both properties are what the trained model is later
// checked against.

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace ordrec {

struct SyntheticCatalog {
    int n_teams = 0, n_stages = 0, items_per_cell = 0;
    std::uint64_t seed = 0;

    std::int64_t n_items() const {
        return std::int64_t(n_teams) * n_stages * items_per_cell;
    }
    // dense ids start at 1: item-1 = team*(stages*cell) + stage*cell + slot
    int team_of(std::int64_t item) const {
        return int((item - 1) / (std::int64_t(n_stages) * items_per_cell));
    }
    int stage_of(std::int64_t item) const {
        return int((item - 1) / items_per_cell % n_stages);
    }
    std::int64_t item_at(int team, int stage, int slot) const {
        return 1 + (std::int64_t(team) * n_stages + stage) * items_per_cell + slot;
    }
};

struct GenParams {
    int n_users = 5000;
    int min_orders = 2;  // >= 2 so no user gets filtered out
    int max_orders = 20;
    double p_adv = 0.3;     // stage advance probability per order
    double p_switch = 0.05; // team switch probability per order
    int views_per_order = 3;
    std::uint64_t seed = 42;
};

namespace synthgen {

SyntheticCatalog gen_catalog(int n_teams, int n_stages, int items_per_cell,
                             std::uint64_t seed);

// Writes orders and views files in the ingestion grammar
// (user<TAB>timestamp_ms<TAB>item). Stages never regress; timestamps strictly
// increase per user; each order contributes views_per_order view events from
// the order's cell (the order item last).
void gen_histories(const SyntheticCatalog& cat, const GenParams& p,
                   const std::string& orders_path, const std::string& views_path);

void save_catalog(const SyntheticCatalog& cat, const std::string& path);
SyntheticCatalog load_catalog(const std::string& path);

}  // namespace synthgen
}  // namespace ordrec
