#pragma once

// Island-model DE over surrogates. One meta island follows the adapted
// surrogate of the current environment; each anchor island is replayed from an
// archived environment summary and follows that environment's surrogate.
// Every `migration_interval` generations the anchors' bests are copied into
// the meta island, and the meta best is copied back into an anchor only when
// that anchor's own surrogate prefers it to the anchor's best.

#include "gemea/common.hpp"
#include "gemea/meta_adapt.hpp"
#include "gemea/replay_archive.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gemea {

using SurrogateFn = std::function<double(const Eigen::Ref<const Vector>&)>;

struct DEConfig {
    double F = 0.5;
    double Cr = 0.9;
    int pop_size = 300;
    int anchor_pop_size = 75;
    int max_generations = 50;
    int migration_interval = 10;
    bool reverse_migration = true;
    bool parallel_islands = false;

    void validate() const;
};

enum class IslandRole { meta, anchor };

/// DE population (one individual per row) with its fitness cache under `surrogate`.
struct Island {
    Matrix population;
    Vector fitness;
    SurrogateFn surrogate;
    IslandRole role = IslandRole::meta;
    int anchor_index = -1;

    static Island create(Matrix population, SurrogateFn surrogate, IslandRole role = IslandRole::meta,
                         int anchor_index = -1);

    int size() const { return static_cast<int>(population.rows()); }
    int dim() const { return static_cast<int>(population.cols()); }
    /// Overwrites row i and re-evaluates it.
    void place(int i, const Eigen::Ref<const Vector>& x);
};

struct Elite {
    int index = 0;
    Vector x;
    double value = 0.0;
};

/// Lowest fitness; ties to the lowest index.
Elite best(const Island& island);

/// Indices of the `count` highest-fitness rows, ties to the highest index,
/// never including `protect`.
std::vector<int> worst_indices(const Island& island, int count, int protect);

/// Mirror an out-of-range coordinate back across the violated bound, then clamp.
double reflect_into(double v, double lo, double hi);

/// One DE/current-to-best/1/bin generation with greedy selection.
void de_step(Island& island, const Bounds& bounds, const DEConfig& cfg, Rng& rng);

struct MigrationReport {
    std::vector<int> forward_slots;      // meta rows overwritten, aligned with anchors
    std::vector<bool> reverse_accepted;  // per anchor
};

MigrationReport migrate(Island& meta, std::vector<Island>& anchors, bool reverse = true);

/// Called after each generation with the meta island's current best.
using GenerationObserver = std::function<void(int generation, const Elite& meta_best)>;

struct SearchResult {
    Elite best;
    Island meta_island;
    std::vector<Island> anchors;
    std::vector<double> best_history;  // meta best surrogate value per generation
    int migrations = 0;
};

SearchResult evolve_environment(const ResidualSurrogate& surrogate, const std::vector<const ArchiveEntry*>& anchor_entries,
                                const Bounds& bounds, const DEConfig& cfg, std::uint64_t seed,
                                const GenerationObserver& observer = {});

}  // namespace gemea
