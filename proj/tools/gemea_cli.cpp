// gemea: experiment runner for surrogate-assisted optimization on drifting streams.
//
//   gemea run     [-c FILE] [-s key=value]... [--variant V] [--seed N]
//   gemea matrix  [-c FILE] [-s key=value]... [--out DIR]
//   gemea timing  [--centers K] [--n N]...
//   gemea replay  TRACE.csv...
//
// Settings resolve CLI > config file > built-in default.

#include "gemea/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
};

gemea::ExperimentConfig load_config(const CommonOptions& opts)
{
    gemea::ExperimentConfig cfg;
    if (!opts.config_path.empty())
        gemea::apply_config_file(cfg, opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw gemea::ConfigError("--set expects key=value, got '" + kv + "'");
        gemea::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts)
{
    cmd->add_option("-c,--config", opts.config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", opts.overrides, "override one setting, key=value (repeatable)");
}

int cmd_run(const CommonOptions& opts, const std::string& variant, std::int64_t seed, const std::string& trace_out,
            bool dump)
{
    auto cfg = load_config(opts);
    if (!variant.empty())
        gemea::apply_setting(cfg, "variant", variant);
    if (dump)
        std::cout << gemea::dump_config(cfg) << '\n';
    const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.base_seed;
    const auto run = gemea::run_single(cfg, cfg.variant, s);
    if (!trace_out.empty())
        gemea::write_trace_csv(trace_out, run.trace);
    std::cout << "variant " << gemea::to_string(run.variant) << "  stream " << cfg.stream_id() << "  seed " << s
              << '\n';
    std::cout << std::left << std::setw(6) << "env" << std::setw(12) << "warm_start" << std::setw(9) << "anchors"
              << "meta_set\n";
    for (const auto& e : run.environments) {
        std::cout << std::left << std::setw(6) << e.env_id << std::setw(12) << e.warm_start << std::setw(9)
                  << e.anchors;
        for (auto id : e.meta_set_ids)
            std::cout << id << ' ';
        std::cout << '\n';
    }
    std::cout << std::scientific << std::setprecision(6) << "E_offline " << run.offline << "\nE_online  "
              << run.online << '\n';
    return 0;
}

int cmd_matrix(const CommonOptions& opts, const std::string& out)
{
    auto cfg = load_config(opts);
    const std::string dir = gemea::resolve_output_dir(out.empty() ? cfg.output_dir : out);
    const auto result = gemea::run_matrix(cfg, dir);
    gemea::write_summary_table(std::cout, result.rows);
    std::cout << "wrote " << result.trace_files.size() << " traces and summary to " << dir << '\n';
    return 0;
}

int cmd_timing(int centers, std::vector<int> ns)
{
    if (ns.empty())
        ns = {200, 400, 800, 1600, 3200};
    auto print = [](const char* label, const gemea::TimingReport& r) {
        std::cout << label << '\n' << std::setw(8) << "N" << std::setw(8) << "K_c" << std::setw(16) << "seconds\n";
        for (const auto& p : r.points)
            std::cout << std::setw(8) << p.n << std::setw(8) << p.centers << std::setw(16) << std::scientific
                      << std::setprecision(4) << p.seconds << std::defaultfloat << '\n';
        std::cout << "log-log slope " << std::fixed << std::setprecision(3) << r.slope << std::defaultfloat << "\n\n";
    };
    print(("fixed K_c = " + std::to_string(centers)).c_str(), gemea::timing_probe(ns, centers));
    print("K_c = floor(sqrt(N))", gemea::timing_probe(ns, 0));
    return 0;
}

int cmd_replay(const std::vector<std::string>& files)
{
    std::vector<double> off;
    std::vector<double> on;
    std::cout << std::left << std::setw(60) << "trace" << std::right << std::setw(16) << "E_offline" << std::setw(16)
              << "E_online" << '\n';
    for (const auto& f : files) {
        const auto trace = gemea::read_trace_csv(f);
        off.push_back(gemea::offline_error(trace));
        on.push_back(gemea::online_error(trace));
        std::cout << std::left << std::setw(60) << f << std::right << std::scientific << std::setprecision(6)
                  << std::setw(16) << off.back() << std::setw(16) << on.back() << std::defaultfloat << '\n';
    }
    const auto o = gemea::mean_std(off);
    const auto n = gemea::mean_std(on);
    std::cout << std::scientific << std::setprecision(6) << "mean +- std over " << files.size()
              << " traces: E_offline " << o.mean << " +- " << o.std << ", E_online " << n.mean << " +- " << n.std
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Surrogate-assisted evolutionary optimization on drifting data streams"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    std::string variant;
    std::int64_t seed = -1;
    std::string trace_out;
    bool dump = false;
    auto* run = app.add_subcommand("run", "single experiment (one variant, one seed)");
    add_common(run, run_opts);
    run->add_option("--variant", variant, "gem_ea | no_bml | no_ras | no_gre | scratch");
    run->add_option("--seed", seed, "run seed (default: config seed)");
    run->add_option("--trace", trace_out, "write the trace CSV here");
    run->add_flag("--dump-config", dump, "print the resolved configuration");

    CommonOptions matrix_opts;
    std::string out_dir;
    auto* matrix = app.add_subcommand("matrix", "all configured variants x repetitions");
    add_common(matrix, matrix_opts);
    matrix->add_option("-o,--out", out_dir, "output directory (GEMEA_OUT_DIR overrides)");

    int centers = 20;
    std::vector<int> ns;
    auto* timing = app.add_subcommand("timing", "wall-clock scaling of the analytic training path");
    timing->add_option("--centers", centers, "fixed center count")->check(CLI::PositiveNumber);
    timing->add_option("--n", ns, "sample sizes, ascending (at least 4)");

    std::vector<std::string> files;
    auto* replay = app.add_subcommand("replay", "recompute metrics from trace CSVs");
    replay->add_option("traces", files, "trace CSV files")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(run_opts, variant, seed, trace_out, dump);
        if (*matrix)
            return cmd_matrix(matrix_opts, out_dir);
        if (*timing)
            return cmd_timing(centers, ns);
        if (*replay)
            return cmd_replay(files);
    } catch (const gemea::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const gemea::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
