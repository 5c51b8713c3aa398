#pragma once

#include "gemea/island_search.hpp"
#include "gemea/meta_adapt.hpp"
#include "gemea/rbfn.hpp"
#include "gemea/stream_bench.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gemea {

/// gem_ea: full method. no_bml: scratch surrogate, keeps residual and replay.
/// no_ras: no linear residual. no_gre: no anchor islands. scratch: scratch
/// surrogate (with residual) and single-island DE, no archive.
enum class Variant { gem_ea, no_bml, no_ras, no_gre, scratch };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);
std::vector<Variant> all_variants();

struct VariantSwitches {
    bool archive = true;        // environments are summarized and archived
    bool meta_learning = true;  // warm start, inner steps, meta update
    bool residual = true;
    bool replay = true;         // anchor islands and migration
};

VariantSwitches switches_for(Variant v);

struct ExperimentConfig {
    ObjectiveSpec objective;
    DriftSchedule drift;
    int samples = 100;

    TrainConfig train;
    MetaConfig meta;
    DEConfig de;
    std::size_t archive_capacity = 50;
    double elite_fraction = 0.1;
    bool full_covariance = false;

    Variant variant = Variant::gem_ea;
    std::vector<Variant> variants = all_variants();
    int repetitions = 10;
    std::uint64_t base_seed = 1;
    std::string output_dir = "results";

    void validate() const;
    std::string stream_id() const;
};

/// Applies one key=value setting. Unknown keys and malformed values throw ConfigError.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` lines, `#` comments, blank lines ignored.
void apply_config_text(ExperimentConfig& cfg, std::istream& in, const std::string& origin = "<config>");
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

/// Every setting with its current value, in `key = value` form.
std::string dump_config(const ExperimentConfig& cfg);

struct EnvironmentLog {
    int env_id = 0;
    std::string warm_start;
    std::vector<int> meta_set_ids;
    std::vector<double> meta_set_scores;
    int anchors = 0;
    double seconds = 0.0;
};

struct RunResult {
    Variant variant = Variant::gem_ea;
    std::uint64_t seed = 0;
    double offline = 0.0;
    double online = 0.0;
    RunTrace trace;
    std::vector<EnvironmentLog> environments;
    Archive archive;

    double seconds_per_environment() const;
};

RunResult run_single(const ExperimentConfig& cfg, Variant variant, std::uint64_t seed);

struct SummaryRow {
    std::string variant;
    std::string stream;
    int runs = 0;
    double offline_mean = 0.0;
    double offline_std = 0.0;
    double online_mean = 0.0;
    double online_std = 0.0;
    double seconds_per_env = 0.0;
    bool single_run = false;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample (n - 1) denominator; 0 for n = 1
};

MeanStd mean_std(const std::vector<double>& v);

std::string trace_file_name(Variant v, const std::string& stream_id, std::uint64_t seed);

struct MatrixResult {
    std::vector<SummaryRow> rows;
    std::vector<RunResult> runs;
    std::vector<std::string> trace_files;
};

/// Every configured variant x repetitions (seeds base_seed + r). Writes traces,
/// per-run logs, summary.csv and summary.txt into `out_dir`.
MatrixResult run_matrix(const ExperimentConfig& cfg, const std::string& out_dir);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);

struct TimingPoint {
    int n = 0;
    int centers = 0;
    double seconds = 0.0;
};

struct TimingReport {
    std::vector<TimingPoint> points;
    double slope = 0.0;  // least-squares fit of log(seconds) on log(n)
};

/// Wall-clock of activation + ridge + residual at each N. center_count = 0 uses floor(sqrt(N)).
TimingReport timing_probe(const std::vector<int>& ns, int center_count, int dim = 5, std::uint64_t seed = 7);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Output directory: the GEMEA_OUT_DIR environment variable wins over `fallback`.
std::string resolve_output_dir(const std::string& fallback);

}  // namespace gemea
