#include "gemea/island_search.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gemea;
using namespace gemea::testing;

namespace {

double sphere(const Eigen::Ref<const Vector>& x)
{
    return x.squaredNorm();
}

Island random_island(int pop, int d, Rng& rng, SurrogateFn f = sphere)
{
    return Island::create(random_matrix(pop, d, rng), std::move(f));
}

ResidualSurrogate sphere_surrogate(int d, Rng& rng)
{
    // net with tiny weights plus a quadratic-free residual keeps the landscape simple
    return ResidualSurrogate(random_net(4, d, rng), Vector::Zero(d), 0.0);
}

ArchiveEntry anchor_entry(int d, Rng& rng, int env_id)
{
    ArchiveEntry e;
    e.env_id = env_id;
    e.surrogate = random_net(4, d, rng);
    e.elite_mean = random_vector(d, rng, -0.5, 0.5);
    e.elite_var = Vector::Constant(d, 0.05);
    e.best_solution = e.elite_mean;
    e.batch = random_batch(5, d, rng, env_id);
    return e;
}

}  // namespace

TEST(DEConfig, Validation)
{
    DEConfig c;
    EXPECT_NO_THROW(c.validate());
    c.Cr = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    DEConfig d;
    d.migration_interval = 0;
    EXPECT_THROW(d.validate(), ConfigError);
    DEConfig e;
    e.pop_size = 3;
    EXPECT_THROW(e.validate(), ConfigError);
}

TEST(Best, TieBreakAndLinearScan)
{
    Island is;
    is.population = Matrix::Zero(3, 1);
    is.fitness = Vector(3);
    is.fitness << 3, 1, 1;
    EXPECT_EQ(best(is).index, 1);

    Island one;
    one.population = Matrix::Constant(1, 2, 0.5);
    one.fitness = Vector::Constant(1, 9.0);
    EXPECT_EQ(best(one).index, 0);

    Rng rng(1);
    const Island r = random_island(50, 3, rng);
    int idx = 0;
    for (int i = 0; i < 50; ++i)
        if (r.fitness[i] < r.fitness[idx])
            idx = i;
    EXPECT_EQ(best(r).index, idx);
    EXPECT_EQ(best(r).value, r.fitness[idx]);
}

TEST(WorstIndices, OrderAndProtection)
{
    Island is;
    is.population = Matrix::Zero(5, 1);
    is.fitness = Vector(5);
    is.fitness << 4, 9, 9, 1, 7;
    EXPECT_EQ(worst_indices(is, 3, 3), (std::vector<int>{2, 1, 4}));
    EXPECT_EQ(worst_indices(is, 2, 2), (std::vector<int>{1, 4}));
    EXPECT_EQ(worst_indices(is, 10, 0).size(), 4u);
}

TEST(ReflectInto, MirrorsThenClamps)
{
    EXPECT_EQ(reflect_into(-1.2, -1.0, 1.0), -0.8);
    EXPECT_EQ(reflect_into(1.5, -1.0, 1.0), 0.5);
    EXPECT_EQ(reflect_into(7.0, -1.0, 1.0), -1.0);
    EXPECT_EQ(reflect_into(0.3, -1.0, 1.0), 0.3);
}

TEST(DeStep, ZeroStepIsFixedPoint)
{
    Rng rng(2);
    Island is = random_island(20, 3, rng);
    const Matrix before = is.population;
    DEConfig cfg;
    cfg.F = 0.0;
    cfg.Cr = 1.0;
    Rng r(3);
    de_step(is, Bounds::uniform(3, -1, 1), cfg, r);
    EXPECT_EQ(is.population, before);
    cfg.Cr = 0.3;
    de_step(is, Bounds::uniform(3, -1, 1), cfg, r);
    EXPECT_EQ(is.population, before);
}

TEST(DeStep, IdenticalPopulationUnchanged)
{
    Vector x(2);
    x << 0.2, -0.4;
    Island is = Island::create(x.transpose().replicate(10, 1), sphere);
    const Matrix before = is.population;
    Rng r(4);
    de_step(is, Bounds::uniform(2, -1, 1), DEConfig{}, r);
    EXPECT_EQ(is.population, before);
}

TEST(DeStep, MatchesScalarReference)
{
    Rng rng(5);
    Island is = random_island(12, 3, rng);
    const Bounds bounds = Bounds::uniform(3, -1, 1);
    const DEConfig cfg;

    // reference: same strategy and draw order, written out with plain arrays
    auto P = is.population;
    auto fit = is.fitness;
    Rng ref(6);
    Rng lib(6);
    {
        const int pop = 12;
        std::uniform_int_distribution<int> pick(0, pop - 1);
        std::uniform_int_distribution<int> pick_dim(0, 2);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        int b = 0;
        for (int i = 1; i < pop; ++i)
            if (fit[i] < fit[b])
                b = i;
        const Vector xb = P.row(b).transpose();
        Matrix T(pop, 3);
        for (int i = 0; i < pop; ++i) {
            int r1;
            do
                r1 = pick(ref);
            while (r1 == i);
            int r2;
            do
                r2 = pick(ref);
            while (r2 == i || r2 == r1);
            const int jr = pick_dim(ref);
            for (int j = 0; j < 3; ++j) {
                const double u = unit(ref);
                double v = P(i, j);
                if (j == jr || u < cfg.Cr) {
                    v = P(i, j) + cfg.F * (xb[j] - P(i, j)) + cfg.F * (P(r1, j) - P(r2, j));
                    if (v < -1)
                        v = -2 - v;
                    if (v > 1)
                        v = 2 - v;
                    v = std::min(1.0, std::max(-1.0, v));
                }
                T(i, j) = v;
            }
        }
        for (int i = 0; i < pop; ++i) {
            const double f = T.row(i).squaredNorm();
            if (f < fit[i]) {
                P.row(i) = T.row(i);
                fit[i] = f;
            }
        }
    }
    const double best_before = best(is).value;
    de_step(is, bounds, cfg, lib);
    EXPECT_EQ(is.population, P);
    EXPECT_EQ(is.fitness, fit);
    EXPECT_LE(best(is).value, best_before);
}

TEST(DeStep, KeepsIndividualsInBoundsAndCacheConsistent)
{
    Rng rng(7);
    const Bounds b = Bounds::uniform(4, -0.5, 0.5);
    Island is = Island::create(random_matrix(30, 4, rng, -0.5, 0.5),
                               [](const Eigen::Ref<const Vector>& x) { return -x.sum(); });
    DEConfig cfg;
    cfg.F = 1.0;
    for (int g = 0; g < 20; ++g) {
        de_step(is, b, cfg, rng);
        for (int i = 0; i < is.size(); ++i) {
            EXPECT_TRUE(b.contains(is.population.row(i).transpose()));
            EXPECT_NEAR(is.fitness[i], -is.population.row(i).sum(), 1e-14);
        }
    }
    Island tiny = random_island(3, 2, rng);
    EXPECT_THROW(de_step(tiny, Bounds::uniform(2, -1, 1), cfg, rng), ConfigError);
}

TEST(Migrate, EqualGateLeavesAnchorUnchanged)
{
    Rng rng(8);
    Island meta = random_island(10, 2, rng);
    // anchor surrogate is constant, so F_i(x*_meta) == F_i(x*_i)
    std::vector<Island> anchors{random_island(6, 2, rng, [](const Eigen::Ref<const Vector>&) { return 1.0; })};
    const Matrix before = anchors[0].population;
    const auto report = migrate(meta, anchors, true);
    EXPECT_FALSE(report.reverse_accepted[0]);
    EXPECT_EQ(anchors[0].population, before);
}

TEST(Migrate, ElitePreservedWhenAnchorsAreWorse)
{
    Rng rng(9);
    Island meta = random_island(10, 2, rng);
    std::vector<Island> anchors;
    for (int k = 0; k < 3; ++k)
        anchors.push_back(Island::create(Matrix::Constant(5, 2, 5.0 + k), sphere));
    const Elite before = best(meta);
    const auto expected_slots = worst_indices(meta, 3, before.index);
    const auto report = migrate(meta, anchors, true);
    EXPECT_EQ(best(meta).index, before.index);
    EXPECT_EQ(best(meta).value, before.value);
    EXPECT_EQ(report.forward_slots, expected_slots);
    for (int s : report.forward_slots)
        EXPECT_GE(meta.fitness[s], 50.0);
}

TEST(Migrate, MatchesRuleReplay)
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const Vector c1 = random_vector(2, rng);
        const Vector c2 = random_vector(2, rng);
        Island meta = random_island(8, 2, rng);
        std::vector<Island> anchors{
            random_island(5, 2, rng, [c1](const Eigen::Ref<const Vector>& x) { return (x - c1).squaredNorm(); }),
            random_island(5, 2, rng, [c2](const Eigen::Ref<const Vector>& x) { return (x - c2).squaredNorm(); })};
        auto pm = oracle::to_plain(meta);
        std::vector<oracle::PlainIsland> pa{oracle::to_plain(anchors[0]), oracle::to_plain(anchors[1])};
        oracle::simulate_migration(pm, pa, true);
        migrate(meta, anchors, true);
        EXPECT_TRUE(oracle::same_state(meta, pm)) << seed;
        EXPECT_TRUE(oracle::same_state(anchors[0], pa[0])) << seed;
        EXPECT_TRUE(oracle::same_state(anchors[1], pa[1])) << seed;
    }
}

TEST(EvolveEnvironment, NoAnchorsIsPlainDe)
{
    Rng rng(10);
    const ResidualSurrogate f = sphere_surrogate(3, rng);
    const Bounds b = Bounds::uniform(3, -1, 1);
    DEConfig cfg;
    cfg.pop_size = 20;
    cfg.max_generations = 7;
    const SearchResult r = evolve_environment(f, {}, b, cfg, 99);

    Rng r0 = derive_rng(99, {0});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix init(20, 3);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 3; ++j)
            init(i, j) = -1.0 + unit(r0) * 2.0;
    Island plain = Island::create(init, [f](const Eigen::Ref<const Vector>& x) { return f.predict(x); });
    for (int g = 0; g < 7; ++g)
        de_step(plain, b, cfg, r0);
    EXPECT_EQ(r.meta_island.population, plain.population);
    EXPECT_EQ(r.migrations, 0);
    EXPECT_EQ(r.best_history.size(), 7u);
}

TEST(EvolveEnvironment, IntervalBeyondHorizonNeverMigrates)
{
    Rng rng(11);
    const ResidualSurrogate f = sphere_surrogate(2, rng);
    const ArchiveEntry e = anchor_entry(2, rng, 0);
    DEConfig cfg;
    cfg.pop_size = 16;
    cfg.anchor_pop_size = 8;
    cfg.max_generations = 5;
    cfg.migration_interval = 6;
    const auto with = evolve_environment(f, {&e}, Bounds::uniform(2, -1, 1), cfg, 5);
    const auto without = evolve_environment(f, {}, Bounds::uniform(2, -1, 1), cfg, 5);
    EXPECT_EQ(with.migrations, 0);
    EXPECT_EQ(with.meta_island.population, without.meta_island.population);
    EXPECT_EQ(with.anchors.size(), 1u);
}

TEST(EvolveEnvironment, MonotoneBestInBoundsAndDeterministic)
{
    Rng rng(12);
    const ResidualSurrogate f = sphere_surrogate(3, rng);
    std::vector<ArchiveEntry> entries;
    for (int k = 0; k < 4; ++k)
        entries.push_back(anchor_entry(3, rng, k));
    std::vector<const ArchiveEntry*> ptrs;
    for (const auto& e : entries)
        ptrs.push_back(&e);
    const Bounds b = Bounds::uniform(3, -1, 1);
    DEConfig cfg;
    cfg.pop_size = 40;
    cfg.anchor_pop_size = 10;
    cfg.max_generations = 25;
    cfg.migration_interval = 5;

    std::vector<double> seen;
    const auto r = evolve_environment(f, ptrs, b, cfg, 17, [&](int, const Elite& e) { seen.push_back(e.value); });
    EXPECT_EQ(seen, r.best_history);
    for (std::size_t g = 1; g < seen.size(); ++g)
        EXPECT_LE(seen[g], seen[g - 1]);
    EXPECT_EQ(r.migrations, 5);
    for (const Island* is : {&r.meta_island, &r.anchors[0], &r.anchors[3]})
        for (int i = 0; i < is->size(); ++i)
            EXPECT_TRUE(b.contains(is->population.row(i).transpose()));

    const auto again = evolve_environment(f, ptrs, b, cfg, 17);
    EXPECT_EQ(again.meta_island.population, r.meta_island.population);
    EXPECT_EQ(again.best_history, r.best_history);

    cfg.parallel_islands = true;
    const auto parallel = evolve_environment(f, ptrs, b, cfg, 17);
    EXPECT_EQ(parallel.meta_island.population, r.meta_island.population);
    for (std::size_t k = 0; k < 4; ++k)
        EXPECT_EQ(parallel.anchors[k].population, r.anchors[k].population);
}

TEST(EvolveEnvironment, AnchorBestNeverWorsensThroughMigration)
{
    Rng rng(13);
    const ResidualSurrogate f = sphere_surrogate(2, rng);
    const ArchiveEntry e1 = anchor_entry(2, rng, 0);
    const ArchiveEntry e2 = anchor_entry(2, rng, 1);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng r(seed);
        Island meta = random_island(12, 2, r, [f](const Eigen::Ref<const Vector>& x) { return f.predict(x); });
        std::vector<Island> anchors;
        for (const ArchiveEntry* e : {&e1, &e2}) {
            RbfNet snap = e->surrogate;
            anchors.push_back(Island::create(generate_anchor_population(*e, 6, Bounds::uniform(2, -1, 1), r),
                                             [snap](const Eigen::Ref<const Vector>& x) { return snap.predict(x); }));
        }
        const double a0 = best(anchors[0]).value;
        const double a1 = best(anchors[1]).value;
        migrate(meta, anchors, true);
        EXPECT_LE(best(anchors[0]).value, a0);
        EXPECT_LE(best(anchors[1]).value, a1);
    }
}
