#include "gemea/island_search.hpp"

#include <algorithm>
#include <future>
#include <numeric>

namespace gemea {

void DEConfig::validate() const
{
    if (!(F >= 0.0))
        throw ConfigError("de_f: must be >= 0");
    if (!(Cr >= 0.0 && Cr <= 1.0))
        throw ConfigError("de_cr: must be in [0, 1]");
    if (pop_size < 4)
        throw ConfigError("pop_size: must be >= 4");
    if (anchor_pop_size < 4)
        throw ConfigError("anchor_pop_size: must be >= 4");
    if (max_generations < 1)
        throw ConfigError("generations: must be >= 1");
    if (migration_interval < 1)
        throw ConfigError("migration_interval: must be >= 1");
}

Island Island::create(Matrix population, SurrogateFn surrogate, IslandRole role, int anchor_index)
{
    Island island;
    island.population = std::move(population);
    island.surrogate = std::move(surrogate);
    island.role = role;
    island.anchor_index = anchor_index;
    island.fitness.resize(island.population.rows());
    for (Eigen::Index i = 0; i < island.population.rows(); ++i)
        island.fitness[i] = island.surrogate(island.population.row(i).transpose());
    return island;
}

void Island::place(int i, const Eigen::Ref<const Vector>& x)
{
    population.row(i) = x.transpose();
    fitness[i] = surrogate(x);
}

Elite best(const Island& island)
{
    if (island.size() == 0)
        throw UsageError("best: empty island");
    int idx = 0;
    for (int i = 1; i < island.size(); ++i) {
        if (island.fitness[i] < island.fitness[idx])
            idx = i;
    }
    return {idx, island.population.row(idx).transpose(), island.fitness[idx]};
}

std::vector<int> worst_indices(const Island& island, int count, int protect)
{
    std::vector<int> idx;
    for (int i = 0; i < island.size(); ++i) {
        if (i != protect)
            idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (island.fitness[a] != island.fitness[b])
            return island.fitness[a] > island.fitness[b];
        return a > b;
    });
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(count, 0))));
    return idx;
}

double reflect_into(double v, double lo, double hi)
{
    if (v < lo)
        v = lo + (lo - v);
    else if (v > hi)
        v = hi - (v - hi);
    return std::clamp(v, lo, hi);
}

void de_step(Island& island, const Bounds& bounds, const DEConfig& cfg, Rng& rng)
{
    const int pop = island.size();
    const int d = island.dim();
    if (pop < 4)
        throw ConfigError("pop_size: DE needs at least 4 individuals");

    std::uniform_int_distribution<int> pick(0, pop - 1);
    std::uniform_int_distribution<int> pick_dim(0, d - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Vector xbest = best(island).x;
    Matrix trials(pop, d);
    for (int i = 0; i < pop; ++i) {
        int r1 = pick(rng);
        while (r1 == i)
            r1 = pick(rng);
        int r2 = pick(rng);
        while (r2 == i || r2 == r1)
            r2 = pick(rng);
        const int jrand = pick_dim(rng);
        for (int j = 0; j < d; ++j) {
            const double u = unit(rng);
            const double xi = island.population(i, j);
            if (j == jrand || u < cfg.Cr) {
                const double v = xi + cfg.F * (xbest[j] - xi) +
                                 cfg.F * (island.population(r1, j) - island.population(r2, j));
                trials(i, j) = reflect_into(v, bounds.lo[j], bounds.hi[j]);
            } else {
                trials(i, j) = xi;
            }
        }
    }
    for (int i = 0; i < pop; ++i) {
        const double f = island.surrogate(trials.row(i).transpose());
        if (f < island.fitness[i]) {
            island.population.row(i) = trials.row(i);
            island.fitness[i] = f;
        }
    }
}

MigrationReport migrate(Island& meta, std::vector<Island>& anchors, bool reverse)
{
    MigrationReport report;
    const Elite meta_best = best(meta);
    std::vector<Elite> anchor_best;
    anchor_best.reserve(anchors.size());
    for (const auto& a : anchors)
        anchor_best.push_back(best(a));

    // forward: anchor elites replace the meta island's worst
    report.forward_slots = worst_indices(meta, static_cast<int>(anchors.size()), meta_best.index);
    for (std::size_t k = 0; k < report.forward_slots.size(); ++k)
        meta.place(report.forward_slots[k], anchor_best[k].x);

    // reverse: gated by each anchor's own surrogate
    report.reverse_accepted.assign(anchors.size(), false);
    if (!reverse)
        return report;
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        Island& a = anchors[i];
        if (a.surrogate(meta_best.x) < anchor_best[i].value) {
            const auto slot = worst_indices(a, 1, anchor_best[i].index);
            if (!slot.empty()) {
                a.place(slot.front(), meta_best.x);
                report.reverse_accepted[i] = true;
            }
        }
    }
    return report;
}

SearchResult evolve_environment(const ResidualSurrogate& surrogate, const std::vector<const ArchiveEntry*>& anchor_entries,
                                const Bounds& bounds, const DEConfig& cfg, std::uint64_t seed,
                                const GenerationObserver& observer)
{
    cfg.validate();
    const int d = bounds.dim();

    std::vector<Rng> rngs;
    rngs.push_back(derive_rng(seed, {0}));
    for (std::size_t i = 0; i < anchor_entries.size(); ++i)
        rngs.push_back(derive_rng(seed, {i + 1}));

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix init(cfg.pop_size, d);
    for (int i = 0; i < cfg.pop_size; ++i)
        for (int j = 0; j < d; ++j)
            init(i, j) = bounds.lo[j] + unit(rngs[0]) * (bounds.hi[j] - bounds.lo[j]);

    SearchResult result;
    result.meta_island = Island::create(
        std::move(init), [surrogate](const Eigen::Ref<const Vector>& x) { return surrogate.predict(x); },
        IslandRole::meta);

    for (std::size_t i = 0; i < anchor_entries.size(); ++i) {
        const ArchiveEntry& entry = *anchor_entries[i];
        Matrix pop = generate_anchor_population(entry, cfg.anchor_pop_size, bounds, rngs[i + 1]);
        RbfNet snapshot = entry.surrogate;
        result.anchors.push_back(Island::create(
            std::move(pop), [snapshot](const Eigen::Ref<const Vector>& x) { return snapshot.predict(x); },
            IslandRole::anchor, static_cast<int>(i)));
    }

    for (int g = 1; g <= cfg.max_generations; ++g) {
        if (cfg.parallel_islands && !result.anchors.empty()) {
            std::vector<std::future<void>> jobs;
            for (std::size_t i = 0; i < result.anchors.size(); ++i) {
                jobs.push_back(std::async(std::launch::async, [&, i] {
                    de_step(result.anchors[i], bounds, cfg, rngs[i + 1]);
                }));
            }
            de_step(result.meta_island, bounds, cfg, rngs[0]);
            for (auto& j : jobs)
                j.get();
        } else {
            de_step(result.meta_island, bounds, cfg, rngs[0]);
            for (std::size_t i = 0; i < result.anchors.size(); ++i)
                de_step(result.anchors[i], bounds, cfg, rngs[i + 1]);
        }

        if (g % cfg.migration_interval == 0 && !result.anchors.empty()) {
            migrate(result.meta_island, result.anchors, cfg.reverse_migration);
            ++result.migrations;
        }

        const Elite b = best(result.meta_island);
        result.best_history.push_back(b.value);
        if (observer)
            observer(g, b);
    }
    result.best = best(result.meta_island);
    return result;
}

}  // namespace gemea
