#include "gemea/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

namespace gemea {

namespace {

constexpr std::uint64_t kBatchTag = 0xba7c4;
constexpr std::uint64_t kSurrogateTag = 0x5a44;
constexpr std::uint64_t kSearchTag = 0x5ea7c4;

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value)
{
    const std::string v = trim(value);
    T out{};
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError(std::string(key) + ": cannot parse '" + v + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    const std::string v = trim(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError(std::string(key) + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Setting {
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

void reshape_bounds(ExperimentConfig& c, int dim, double lo, double hi)
{
    c.objective.bounds = Bounds::uniform(dim, lo, hi);
}

const std::map<std::string, Setting, std::less<>>& settings()
{
    using C = ExperimentConfig;
    static const std::map<std::string, Setting, std::less<>> table = [] {
        std::map<std::string, Setting, std::less<>> t;
        auto num = [&t](const char* key, auto member_ptr) {
            t[key] = {[key, member_ptr](C& c, std::string_view v) {
                          auto& field = std::invoke(member_ptr, c);
                          field = parse_number<std::remove_reference_t<decltype(field)>>(key, v);
                      },
                      [member_ptr](const C& c) {
                          std::ostringstream os;
                          os << std::invoke(member_ptr, c);
                          return os.str();
                      }};
        };
        auto dbl = [&t](const char* key, auto member_ptr) {
            t[key] = {[key, member_ptr](C& c, std::string_view v) {
                          std::invoke(member_ptr, c) = parse_number<double>(key, v);
                      },
                      [member_ptr](const C& c) { return fmt(std::invoke(member_ptr, c)); }};
        };
        auto flag = [&t](const char* key, auto member_ptr) {
            t[key] = {[key, member_ptr](C& c, std::string_view v) { std::invoke(member_ptr, c) = parse_bool(key, v); },
                      [member_ptr](const C& c) { return std::string(std::invoke(member_ptr, c) ? "true" : "false"); }};
        };

        t["function"] = {[](C& c, std::string_view v) { c.objective.base_function = parse_base_function(trim(v)); },
                         [](const C& c) { return to_string(c.objective.base_function); }};
        t["dim"] = {[](C& c, std::string_view v) {
                        reshape_bounds(c, parse_number<int>("dim", v), c.objective.bounds.lo[0], c.objective.bounds.hi[0]);
                    },
                    [](const C& c) { return std::to_string(c.objective.dim()); }};
        t["lower"] = {[](C& c, std::string_view v) {
                          reshape_bounds(c, c.objective.dim(), parse_number<double>("lower", v), c.objective.bounds.hi[0]);
                      },
                      [](const C& c) { return fmt(c.objective.bounds.lo[0]); }};
        t["upper"] = {[](C& c, std::string_view v) {
                          reshape_bounds(c, c.objective.dim(), c.objective.bounds.lo[0], parse_number<double>("upper", v));
                      },
                      [](const C& c) { return fmt(c.objective.bounds.hi[0]); }};
        t["drift"] = {[](C& c, std::string_view v) { c.drift.kind = parse_drift_kind(trim(v)); },
                      [](const C& c) { return to_string(c.drift.kind); }};
        dbl("magnitude", [](auto& c) -> auto& { return c.drift.magnitude; });
        num("period", [](auto& c) -> auto& { return c.drift.period; });
        num("environments", [](auto& c) -> auto& { return c.drift.environment_count; });
        num("stream_seed", [](auto& c) -> auto& { return c.drift.seed; });
        num("samples", [](auto& c) -> auto& { return c.samples; });

        dbl("ridge_lambda", [](auto& c) -> auto& { return c.train.ridge_lambda; });
        num("k_width", [](auto& c) -> auto& { return c.train.k_width; });
        num("kmeans_iters", [](auto& c) -> auto& { return c.train.kmeans_iters; });
        num("centers", [](auto& c) -> auto& { return c.train.center_count; });

        dbl("gamma_mape", [](auto& c) -> auto& { return c.meta.gamma_mape; });
        dbl("gamma_divergence", [](auto& c) -> auto& { return c.meta.gamma_divergence; });
        dbl("inner_lr", [](auto& c) -> auto& { return c.meta.inner_lr; });
        dbl("meta_lr", [](auto& c) -> auto& { return c.meta.meta_lr; });
        num("inner_steps", [](auto& c) -> auto& { return c.meta.inner_steps; });
        num("meta_epochs", [](auto& c) -> auto& { return c.meta.meta_epochs; });
        num("prior_count", [](auto& c) -> auto& { return c.meta.prior_count; });
        dbl("mape_eps", [](auto& c) -> auto& { return c.meta.mape_eps; });
        flag("normalize_discrepancy", [](auto& c) -> auto& { return c.meta.normalize_discrepancy; });

        dbl("de_f", [](auto& c) -> auto& { return c.de.F; });
        dbl("de_cr", [](auto& c) -> auto& { return c.de.Cr; });
        num("pop_size", [](auto& c) -> auto& { return c.de.pop_size; });
        num("anchor_pop_size", [](auto& c) -> auto& { return c.de.anchor_pop_size; });
        num("generations", [](auto& c) -> auto& { return c.de.max_generations; });
        num("migration_interval", [](auto& c) -> auto& { return c.de.migration_interval; });
        flag("parallel_islands", [](auto& c) -> auto& { return c.de.parallel_islands; });

        num("archive_capacity", [](auto& c) -> auto& { return c.archive_capacity; });
        dbl("elite_fraction", [](auto& c) -> auto& { return c.elite_fraction; });
        flag("full_covariance", [](auto& c) -> auto& { return c.full_covariance; });

        t["variant"] = {[](C& c, std::string_view v) { c.variant = parse_variant(trim(v)); },
                        [](const C& c) { return to_string(c.variant); }};
        t["variants"] = {[](C& c, std::string_view v) {
                             std::vector<Variant> out;
                             std::string_view rest = v;
                             for (;;) {
                                 const auto pos = rest.find(',');
                                 const std::string item = trim(rest.substr(0, pos));
                                 if (!item.empty())
                                     out.push_back(parse_variant(item));
                                 if (pos == std::string_view::npos)
                                     break;
                                 rest.remove_prefix(pos + 1);
                             }
                             if (out.empty())
                                 throw ConfigError("variants: list is empty");
                             c.variants = std::move(out);
                         },
                         [](const C& c) {
                             std::string s;
                             for (auto v : c.variants)
                                 s += (s.empty() ? "" : ",") + to_string(v);
                             return s;
                         }};
        num("repetitions", [](auto& c) -> auto& { return c.repetitions; });
        num("seed", [](auto& c) -> auto& { return c.base_seed; });
        t["output_dir"] = {[](C& c, std::string_view v) { c.output_dir = trim(v); },
                           [](const C& c) { return c.output_dir; }};
        return t;
    }();
    return table;
}

}  // namespace

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::gem_ea: return "gem_ea";
    case Variant::no_bml: return "no_bml";
    case Variant::no_ras: return "no_ras";
    case Variant::no_gre: return "no_gre";
    case Variant::scratch: return "scratch";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name)
{
    for (auto v : all_variants()) {
        if (name == to_string(v))
            return v;
    }
    throw ConfigError("variant: unknown variant '" + std::string(name) + "'");
}

std::vector<Variant> all_variants()
{
    return {Variant::gem_ea, Variant::no_bml, Variant::no_ras, Variant::no_gre, Variant::scratch};
}

VariantSwitches switches_for(Variant v)
{
    switch (v) {
    case Variant::gem_ea: return {true, true, true, true};
    case Variant::no_bml: return {true, false, true, true};
    case Variant::no_ras: return {true, true, false, true};
    case Variant::no_gre: return {true, true, true, false};
    case Variant::scratch: return {false, false, true, false};
    }
    throw ConfigError("variant: unknown variant");
}

void ExperimentConfig::validate() const
{
    if (samples < 2)
        throw ConfigError("samples: must be >= 2");
    if (drift.environment_count < 1)
        throw ConfigError("environments: must be >= 1");
    if (drift.kind == DriftKind::recurrent_shift && drift.period < 1)
        throw ConfigError("period: must be >= 1");
    if (!(drift.magnitude >= 0.0))
        throw ConfigError("magnitude: must be >= 0");
    if (train.ridge_lambda < 0.0)
        throw ConfigError("ridge_lambda: must be >= 0");
    if (train.k_width < 1)
        throw ConfigError("k_width: must be >= 1");
    if (train.kmeans_iters < 0)
        throw ConfigError("kmeans_iters: must be >= 0");
    if (train.center_count < 0 || train.center_count > samples)
        throw ConfigError("centers: must be in [0, samples]");
    meta.validate();
    de.validate();
    if (archive_capacity < 1)
        throw ConfigError("archive_capacity: must be >= 1");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
        throw ConfigError("elite_fraction: must be in (0, 1]");
    if (repetitions < 1)
        throw ConfigError("repetitions: must be >= 1");
    if (variants.empty())
        throw ConfigError("variants: list is empty");
}

std::string ExperimentConfig::stream_id() const
{
    return to_string(objective.base_function) + "-d" + std::to_string(objective.dim()) + "-" + to_string(drift.kind);
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value)
{
    const auto& table = settings();
    const auto it = table.find(trim(key));
    if (it == table.end())
        throw ConfigError("unknown config key '" + trim(key) + "'");
    it->second.set(cfg, value);
}

void apply_config_text(ExperimentConfig& cfg, std::istream& in, const std::string& origin)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        if (trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            apply_setting(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path + "'");
    apply_config_text(cfg, in, path);
}

std::string dump_config(const ExperimentConfig& cfg)
{
    std::ostringstream os;
    for (const auto& [key, s] : settings())
        os << key << " = " << s.get(cfg) << '\n';
    return os.str();
}

double RunResult::seconds_per_environment() const
{
    if (environments.empty())
        return 0.0;
    double s = 0.0;
    for (const auto& e : environments)
        s += e.seconds;
    return s / static_cast<double>(environments.size());
}

RunResult run_single(const ExperimentConfig& cfg, Variant variant, std::uint64_t seed)
{
    cfg.validate();
    const VariantSwitches sw = switches_for(variant);
    const Bounds& bounds = cfg.objective.bounds;
    const auto stream = build_stream(cfg.objective, cfg.drift);

    RunResult run;
    run.variant = variant;
    run.seed = seed;
    run.archive = Archive(cfg.archive_capacity);
    const Archive no_archive(1);
    MetaState state;

    AdaptOptions options;
    options.select_priors = sw.archive;
    options.meta_learning = sw.meta_learning;
    options.residual = sw.residual;

    DEConfig de = cfg.de;
    de.reverse_migration = sw.replay;

    for (const Environment& env : stream) {
        const int t = env.state().env_id;
        const auto started = std::chrono::steady_clock::now();

        Rng batch_rng = derive_rng(seed, {kBatchTag, static_cast<std::uint64_t>(t)});
        const DataBatch batch = sample_batch(env, cfg.samples, batch_rng);

        Rng surrogate_rng = derive_rng(seed, {kSurrogateTag, static_cast<std::uint64_t>(t)});
        const Archive& visible = sw.archive ? run.archive : no_archive;
        AdaptResult adapted =
            adapt_environment(visible, batch, bounds, std::move(state), cfg.train, cfg.meta, options, surrogate_rng);
        state = std::move(adapted.state);

        std::vector<const ArchiveEntry*> anchors;
        if (sw.replay) {
            for (auto i : adapted.meta_set.indices)
                anchors.push_back(&visible[i]);
        }

        // oracle stamping: the search only reports its best, the harness scores it
        double running_gap = std::numeric_limits<double>::infinity();
        auto observer = [&](int g, const Elite& b) {
            running_gap = std::min(running_gap, env.gap(b.x));
            run.trace.records.push_back({seed, t, g, b.value, running_gap});
        };
        const std::uint64_t search_seed = derive_rng(seed, {kSearchTag, static_cast<std::uint64_t>(t)})();
        SearchResult found = evolve_environment(adapted.surrogate, anchors, bounds, de, search_seed, observer);

        EnvironmentLog log;
        log.env_id = t;
        log.warm_start = to_string(adapted.warm_start);
        for (std::size_t k = 0; k < adapted.meta_set.indices.size(); ++k) {
            log.meta_set_ids.push_back(visible[adapted.meta_set.indices[k]].env_id);
            log.meta_set_scores.push_back(adapted.meta_set.scores[k]);
        }
        log.anchors = static_cast<int>(anchors.size());

        if (sw.archive) {
            run.archive.update(summarize_environment(found.meta_island.population, found.meta_island.fitness,
                                                     adapted.surrogate.net(), batch, cfg.elite_fraction,
                                                     cfg.full_covariance));
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        run.environments.push_back(std::move(log));
    }
    run.offline = offline_error(run.trace);
    run.online = online_error(run.trace);
    return run;
}

MeanStd mean_std(const std::vector<double>& v)
{
    if (v.empty())
        return {};
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2)
        return {m, 0.0};
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string trace_file_name(Variant v, const std::string& stream_id, std::uint64_t seed)
{
    return "trace_" + to_string(v) + "_" + stream_id + "_s" + std::to_string(seed) + ".csv";
}

namespace {

void write_run_log(const std::string& path, const RunResult& run)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << "env_id,warm_start,anchors,meta_set\n";
    for (const auto& e : run.environments) {
        out << e.env_id << ',' << e.warm_start << ',' << e.anchors << ',';
        for (std::size_t k = 0; k < e.meta_set_ids.size(); ++k)
            out << (k ? ";" : "") << e.meta_set_ids[k] << ':' << fmt(e.meta_set_scores[k]);
        out << '\n';
    }
}

}  // namespace

MatrixResult run_matrix(const ExperimentConfig& cfg, const std::string& out_dir)
{
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

    MatrixResult result;
    const std::string stream = cfg.stream_id();
    auto flush_summary = [&] {
        std::ofstream csv(out_dir + "/summary.csv");
        std::ofstream txt(out_dir + "/summary.txt");
        if (!csv || !txt)
            throw IoError("cannot write summary files in '" + out_dir + "'");
        write_summary_csv(csv, result.rows);
        write_summary_table(txt, result.rows);
    };

    for (Variant v : cfg.variants) {
        std::vector<double> off;
        std::vector<double> on;
        double secs = 0.0;
        for (int r = 0; r < cfg.repetitions; ++r) {
            const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
            RunResult run = run_single(cfg, v, seed);
            const std::string name = trace_file_name(v, stream, seed);
            try {
                write_trace_csv(out_dir + "/" + name, run.trace);
                write_run_log(out_dir + "/" + name.substr(0, name.size() - 4) + ".log", run);
            } catch (const IoError&) {
                flush_summary();
                throw;
            }
            result.trace_files.push_back(name);
            off.push_back(run.offline);
            on.push_back(run.online);
            secs += run.seconds_per_environment();
            run.archive = Archive(1);  // drop retained batches
            result.runs.push_back(std::move(run));
        }
        const MeanStd o = mean_std(off);
        const MeanStd n = mean_std(on);
        result.rows.push_back({to_string(v), stream, cfg.repetitions, o.mean, o.std, n.mean, n.std,
                               secs / cfg.repetitions, cfg.repetitions == 1});
    }
    flush_summary();
    return result;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << "variant,stream,runs,offline_mean,offline_std,online_mean,online_std,seconds_per_env,single_run\n";
    for (const auto& r : rows) {
        out << r.variant << ',' << r.stream << ',' << r.runs << ',' << fmt(r.offline_mean) << ',' << fmt(r.offline_std)
            << ',' << fmt(r.online_mean) << ',' << fmt(r.online_std) << ',' << fmt(r.seconds_per_env) << ','
            << (r.single_run ? "true" : "false") << '\n';
    }
}

void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << std::left << std::setw(10) << "variant" << std::setw(28) << "stream" << std::right << std::setw(6) << "R"
        << std::setw(26) << "E_offline" << std::setw(26) << "E_online" << std::setw(12) << "s/env" << '\n';
    for (const auto& r : rows) {
        std::ostringstream off;
        std::ostringstream on;
        off << std::scientific << std::setprecision(3) << r.offline_mean << " +- " << r.offline_std;
        on << std::scientific << std::setprecision(3) << r.online_mean << " +- " << r.online_std;
        out << std::left << std::setw(10) << r.variant << std::setw(28) << r.stream << std::right << std::setw(6)
            << r.runs << std::setw(26) << off.str() << std::setw(26) << on.str() << std::setw(12) << std::fixed
            << std::setprecision(4) << r.seconds_per_env << std::defaultfloat
            << (r.single_run ? "  (R=1, std not estimable)" : "") << '\n';
    }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw UsageError("loglog_slope: need at least two paired points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TimingReport timing_probe(const std::vector<int>& ns, int center_count, int dim, std::uint64_t seed)
{
    if (ns.size() < 4)
        throw ConfigError("timing: need at least 4 sample sizes");
    if (!std::is_sorted(ns.begin(), ns.end()) || ns.front() < 2)
        throw ConfigError("timing: sample sizes must be ascending and >= 2");

    using clock = std::chrono::steady_clock;
    constexpr double kMinTrialSeconds = 0.02;
    constexpr int kTrials = 5;

    TimingReport report;
    Rng rng = derive_rng(seed, {0x71e});
    std::uniform_real_distribution<double> unit(-5.0, 5.0);
    TrainConfig train;
    for (int n : ns) {
        const int kc = center_count > 0 ? std::min(center_count, n) : default_center_count(n);
        DataBatch batch;
        batch.X.resize(n, dim);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim; ++j)
                batch.X(i, j) = unit(rng);
        batch.y = batch.X.rowwise().squaredNorm();
        const Matrix centers = batch.X.topRows(kc);
        const Vector widths = widths_knn(centers, train.k_width, 1.0);

        double sink = 0.0;
        auto once = [&] {
            Matrix design(n, kc + 1);
            design.leftCols(kc) = activation_matrix(centers, widths, batch.X);
            design.col(kc).setOnes();
            const Vector coef = ridge_solve(design, batch.y, train.ridge_lambda);
            const RbfNet net(centers, widths, coef.head(kc), coef[kc]);
            const LinearResidual lin = fit_residual(net, batch);
            sink += lin.b;
        };

        int reps = 1;
        for (;;) {
            const auto t0 = clock::now();
            for (int r = 0; r < reps; ++r)
                once();
            const double dt = std::chrono::duration<double>(clock::now() - t0).count();
            if (dt >= kMinTrialSeconds)
                break;
            reps *= 2;
        }
        double best = std::numeric_limits<double>::infinity();
        for (int trial = 0; trial < kTrials; ++trial) {
            const auto t0 = clock::now();
            for (int r = 0; r < reps; ++r)
                once();
            best = std::min(best, std::chrono::duration<double>(clock::now() - t0).count() / reps);
        }
        if (!std::isfinite(sink))
            best = std::numeric_limits<double>::infinity();
        report.points.push_back({n, kc, best});
    }
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& p : report.points) {
        x.push_back(p.n);
        y.push_back(p.seconds);
    }
    report.slope = loglog_slope(x, y);
    return report;
}

std::string resolve_output_dir(const std::string& fallback)
{
    if (const char* env = std::getenv("GEMEA_OUT_DIR"); env && *env)
        return env;
    return fallback;
}

}  // namespace gemea
