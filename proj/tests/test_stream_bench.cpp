#include "gemea/stream_bench.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace gemea;

namespace {

ObjectiveSpec spec_of(BaseFunction f, int d, double lo = -5.0, double hi = 5.0)
{
    ObjectiveSpec s;
    s.base_function = f;
    s.bounds = Bounds::uniform(d, lo, hi);
    return s;
}

DriftSchedule schedule(DriftKind k, double magnitude, int count, std::uint64_t seed = 7)
{
    DriftSchedule s;
    s.kind = k;
    s.magnitude = magnitude;
    s.environment_count = count;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Bounds, RejectsEmptyInterval)
{
    EXPECT_THROW(Bounds::uniform(2, 1.0, 1.0), ConfigError);
    EXPECT_THROW(Bounds(Vector::Zero(2), Vector::Zero(3)), ConfigError);
}

TEST(BaseFunction, NamesRoundTrip)
{
    for (auto f : {BaseFunction::sphere, BaseFunction::ellipsoid, BaseFunction::rastrigin, BaseFunction::ackley,
                   BaseFunction::griewank})
        EXPECT_EQ(parse_base_function(to_string(f)), f);
    EXPECT_THROW(parse_base_function("rosenbrock"), ConfigError);
    EXPECT_THROW(parse_drift_kind("teleport"), ConfigError);
}

TEST(BaseFunction, ZeroAtOrigin)
{
    const Vector z = Vector::Zero(4);
    for (auto f : {BaseFunction::sphere, BaseFunction::ellipsoid, BaseFunction::rastrigin, BaseFunction::ackley,
                   BaseFunction::griewank})
        EXPECT_NEAR(base_value(f, z), 0.0, 1e-12) << to_string(f);
}

TEST(BuildStream, ZeroDriftKeepsEveryEnvironmentAtOrigin)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 2), schedule(DriftKind::sudden_shift, 0.0, 5));
    ASSERT_EQ(stream.size(), 5u);
    for (const auto& env : stream) {
        EXPECT_EQ(env.state().optimum_location, Vector::Zero(2));
        EXPECT_EQ(env.state().optimum_value, 0.0);
        EXPECT_EQ(env.evaluate(Vector::Zero(2)), 0.0);
    }
}

TEST(BuildStream, ShiftedSphereMinimumIsTheShift)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 2), schedule(DriftKind::sudden_shift, 1.0, 6));
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto& st = stream[t].state();
        EXPECT_EQ(st.optimum_location, st.shift);
        EXPECT_NEAR(stream[t].evaluate(st.shift), 0.0, 1e-15);
        EXPECT_TRUE(stream[t].spec().bounds.contains(st.shift));
        if (t > 0) {
            const double step = (st.shift - stream[t - 1].state().shift).norm();
            EXPECT_GT(step, 0.0);
            EXPECT_LE(step, 1.0 + 1e-12);
        }
    }
}

TEST(BuildStream, GradualShiftStepsByMagnitudeOverT)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 3), schedule(DriftKind::gradual_shift, 2.0, 10));
    for (std::size_t t = 1; t < stream.size(); ++t)
        EXPECT_LE((stream[t].state().shift - stream[t - 1].state().shift).norm(), 0.2 + 1e-12);
}

TEST(BuildStream, RecurrentShiftCycles)
{
    auto sched = schedule(DriftKind::recurrent_shift, 3.0, 12);
    sched.period = 4;
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 5), sched);
    for (std::size_t t = 4; t < stream.size(); ++t)
        EXPECT_EQ(stream[t].state().shift, stream[t - 4].state().shift);
    EXPECT_NE(stream[0].state().shift, stream[1].state().shift);
}

TEST(BuildStream, RotationKeepsOptimumValueAndOrthogonality)
{
    const auto stream = build_stream(spec_of(BaseFunction::ellipsoid, 3), schedule(DriftKind::rotation, 0.7, 8));
    for (const auto& env : stream) {
        const Matrix& r = env.state().rotation;
        EXPECT_LT((r.transpose() * r - Matrix::Identity(3, 3)).norm(), 1e-10);
        EXPECT_EQ(env.state().optimum_value, 0.0);
        EXPECT_EQ(env.evaluate(env.state().optimum_location), 0.0);
    }
    EXPECT_GT((stream[3].state().rotation - stream[0].state().rotation).norm(), 1e-3);
}

TEST(BuildStream, ScaleAlternates)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 2), schedule(DriftKind::scale, 0.5, 4));
    EXPECT_EQ(stream[0].state().scale, 1.0);
    EXPECT_DOUBLE_EQ(stream[1].state().scale, 1.5);
    EXPECT_DOUBLE_EQ(stream[2].state().scale, 1.0 / 1.5);
    EXPECT_DOUBLE_EQ(stream[3].state().scale, 1.5);
}

TEST(BuildStream, Deterministic)
{
    for (auto k : {DriftKind::sudden_shift, DriftKind::gradual_shift, DriftKind::recurrent_shift, DriftKind::rotation,
                   DriftKind::scale}) {
        const auto a = build_stream(spec_of(BaseFunction::rastrigin, 4), schedule(k, 1.3, 6, 99));
        const auto b = build_stream(spec_of(BaseFunction::rastrigin, 4), schedule(k, 1.3, 6, 99));
        for (std::size_t t = 0; t < a.size(); ++t) {
            EXPECT_EQ(a[t].state().shift, b[t].state().shift);
            EXPECT_EQ(a[t].state().rotation, b[t].state().rotation);
            EXPECT_EQ(a[t].state().scale, b[t].state().scale);
        }
    }
}

TEST(BuildStream, OptimumValueMatchesEvaluation)
{
    for (auto f : {BaseFunction::sphere, BaseFunction::ackley, BaseFunction::griewank}) {
        const auto stream = build_stream(spec_of(f, 3), schedule(DriftKind::rotation, 0.4, 4));
        for (const auto& env : stream)
            EXPECT_EQ(env.state().optimum_value, env.evaluate(env.state().optimum_location));
    }
}

TEST(SampleBatch, LatinHypercubeStructure)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 5), schedule(DriftKind::sudden_shift, 1.0, 1));
    Rng rng(3);
    const DataBatch b = sample_batch(stream[0], 100, rng);
    ASSERT_EQ(b.X.rows(), 100);
    ASSERT_EQ(b.X.cols(), 5);
    for (int j = 0; j < 5; ++j) {
        // one point per stratum of width 0.1 in every column
        std::vector<int> cells;
        for (int i = 0; i < 100; ++i)
            cells.push_back(static_cast<int>(std::floor((b.X(i, j) + 5.0) / 0.1)));
        std::sort(cells.begin(), cells.end());
        for (int i = 0; i < 100; ++i)
            EXPECT_EQ(cells[static_cast<std::size_t>(i)], i);
    }
    for (int i = 0; i < 100; ++i)
        EXPECT_EQ(b.y[i], stream[0].evaluate(b.X.row(i).transpose()));
    EXPECT_GE(b.y.minCoeff(), 0.0);
}

TEST(SampleBatch, SameSeedSameBatch)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 3), schedule(DriftKind::sudden_shift, 1.0, 1));
    Rng a(11);
    Rng b(11);
    EXPECT_EQ(sample_batch(stream[0], 40, a), sample_batch(stream[0], 40, b));
}

TEST(SampleBatch, RejectsTinyBatches)
{
    const auto stream = build_stream(spec_of(BaseFunction::sphere, 3), schedule(DriftKind::sudden_shift, 1.0, 1));
    Rng rng(1);
    EXPECT_THROW(sample_batch(stream[0], 1, rng), ConfigError);
}

TEST(Metrics, OfflineAndOnline)
{
    RunTrace tr;
    EXPECT_THROW(offline_error(tr), UsageError);
    EXPECT_THROW(online_error(tr), UsageError);

    // single environment, gaps {4, 2, 2}
    tr.records = {{1, 0, 1, 0.0, 4.0}, {1, 0, 2, 0.0, 2.0}, {1, 0, 3, 0.0, 2.0}};
    EXPECT_DOUBLE_EQ(online_error(tr), 8.0 / 3.0);
    EXPECT_DOUBLE_EQ(offline_error(tr), 2.0);

    RunTrace two;
    two.records = {{1, 0, 1, 0.0, 5.0}, {1, 0, 2, 0.0, 1.0}, {1, 1, 1, 0.0, 3.0}};
    EXPECT_DOUBLE_EQ(offline_error(two), 2.0);

    RunTrace perfect;
    perfect.records = {{1, 0, 1, 0.0, 0.0}, {1, 1, 1, 0.0, 0.0}, {1, 2, 1, 0.0, 0.0}};
    EXPECT_EQ(offline_error(perfect), 0.0);
    EXPECT_EQ(online_error(perfect), 0.0);
}

TEST(TraceCsv, RoundTripsExactly)
{
    RunTrace tr;
    Rng rng(5);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int t = 0; t < 3; ++t)
        for (int g = 1; g <= 4; ++g)
            tr.records.push_back({42, t, g, u(rng), std::abs(u(rng)) * 1e-7});
    std::stringstream ss;
    write_trace_csv(ss, tr);
    EXPECT_EQ(ss.str().substr(0, kTraceCsvHeader.size()), kTraceCsvHeader);
    const RunTrace back = read_trace_csv(ss);
    ASSERT_EQ(back.records.size(), tr.records.size());
    for (std::size_t i = 0; i < tr.records.size(); ++i) {
        EXPECT_EQ(back.records[i].run_seed, tr.records[i].run_seed);
        EXPECT_EQ(back.records[i].env_id, tr.records[i].env_id);
        EXPECT_EQ(back.records[i].generation, tr.records[i].generation);
        EXPECT_EQ(back.records[i].internal_best, tr.records[i].internal_best);
        EXPECT_EQ(back.records[i].true_gap, tr.records[i].true_gap);
    }
}

TEST(TraceCsv, RejectsMalformedInput)
{
    std::stringstream bad_header("a,b,c\n");
    EXPECT_THROW(read_trace_csv(bad_header), IoError);
    std::stringstream bad_row(std::string(kTraceCsvHeader) + "\n1,0,1,zzz,0.5\n");
    EXPECT_THROW(read_trace_csv(bad_row), IoError);
    EXPECT_THROW(read_trace_csv(std::string("/nonexistent/trace.csv")), IoError);
}
