#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "volherd/model.hpp"
#include "volherd/stats.hpp"

namespace volherd {

// What lands in the events file: every step, or only steps where a trade
// happened. TradesOnly streams stay reconstructible because rows carry
// the absolute step index -- gaps are merge-only steps with r = 0.
enum class RecordPolicy : uint8_t { TradesOnly, AllSteps };

// Which dynamics the run executes: the volume-interacting market, or the
// fixed-probability baseline it degenerates to (useful as a sanity
// anchor; its cluster-size statistics are classic).
enum class ModelMode : uint8_t { Interacting, EzBaseline };

// Knobs for the statistics pass. Explicit fit ranges override the
// automatic window search for the corresponding observable.
struct AnalysisConfig {
    int bins_per_decade = 20;
    double min_decades = 2.0;
    double min_r2 = 0.98;
    bool compute_acf = true;
    uint32_t acf_max_lag = 10000;
    uint32_t acf_fit_lo = 1;
    uint32_t acf_fit_hi = 1000;
    double hill_tail_fraction = 0.01;
    double relation_tolerance = 0.5;
    std::optional<std::pair<double, double>> fit_range_V;
    std::optional<std::pair<double, double>> fit_range_N;
    std::optional<std::pair<double, double>> fit_range_r;

    void validate() const;
    bool operator==(const AnalysisConfig&) const = default;
};

struct RunConfig {
    ModelParams params;
    uint64_t warmup_steps = 100000;
    uint64_t measure_steps = 10000000;
    RecordPolicy record_policy = RecordPolicy::TradesOnly;
    std::filesystem::path output_dir;
    std::optional<uint64_t> checkpoint_interval;  // measurement steps
    ModelMode model_mode = ModelMode::Interacting;
    double ez_a = 0.1;  // constant trading probability in EzBaseline mode
    AnalysisConfig analysis;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

// Fitted-tail report for one observable.
struct TailSummary {
    uint64_t samples = 0;
    std::optional<std::pair<double, double>> window;  // selected or override
    std::optional<PowerLawFit> fit;   // engaged when a window was fitted
    std::optional<PowerLawFit> hill;  // engaged when samples allow it
};

struct Summary {
    uint64_t steps = 0;
    uint64_t trades = 0;
    TailSummary V;
    TailSummary N;
    TailSummary absr;
    std::optional<AcfDecayFit> acf;           // when compute_acf
    std::optional<RelationReport> relation;   // when all three fits exist
    double runtime_seconds = 0.0;
};

struct RunArtifacts {
    std::filesystem::path output_dir;
    std::filesystem::path events_path;
    std::filesystem::path summary_path;   // summary.json
    std::filesystem::path metadata_path;  // metadata.json
    Summary summary;
};

// Executes warmup (nothing recorded), then measurement with the event
// stream persisted as it goes, then the statistics pass; writes
// histogram/ACF exports, fit reports, summary.json / summary.txt and
// metadata.json into output_dir. While the run is in flight a
// partial.marker file sits in the directory; it is removed on success.
// With checkpoint_interval set, checkpoint.bin is refreshed atomically
// every interval and removed when the run completes.
RunArtifacts run_simulation(const RunConfig& config);

// Picks up an interrupted run from output_dir (config.json +
// checkpoint.bin). The events file is truncated to the last durable row,
// the market state restored, and the remaining measurement executed; the
// resulting artifacts are byte-identical to an uninterrupted run of the
// same config. Throws when there is nothing to resume or the checkpoint
// belongs to a different config.
RunArtifacts resume_simulation(const std::filesystem::path& output_dir);

// Re-runs the statistics pass purely from persisted outputs (config.json
// + events file), rewriting the derived artifacts. The exponents must
// come out bit-identical to the original run's -- the event stream is
// the source of truth.
Summary analyze(const std::filesystem::path& output_dir);

// One row of a parameter sweep; failed child runs carry the error text
// and leave the remaining rows untouched.
struct SweepRow {
    std::string axis;
    double value = 0.0;
    uint64_t seed = 0;
    std::filesystem::path run_dir;
    bool ok = false;
    std::string error;
    std::optional<Summary> summary;
};

// Independent child runs over axis in {b, c, d, M, A, seed}, one per
// value, executed concurrently (distinct output dirs, distinct derived
// seeds -- children never share an RNG stream). The ACF pass is skipped
// in children; sweeps are about tail exponents.
std::vector<SweepRow> sweep(const RunConfig& base, const std::string& axis,
                            std::span<const double> values);

// Writes the sweep result as aligned key-value text, one block per row.
void write_sweep_table(const std::filesystem::path& file,
                       std::span<const SweepRow> rows);

enum class Figure : uint8_t { Fig1a, Fig1b, Fig2, Fig3, Fig4 };
enum class Scale : uint8_t { Desk, Paper };

// Replaces the per-scale run size (test hook; also how a custom budget
// would be wired in).
struct ScaleOverride {
    uint32_t agents = 0;
    uint64_t warmup_steps = 0;
    uint64_t measure_steps = 0;
};

// Runs the simulations behind one figure and emits plot-ready data files
// (x y text) plus the fit overlays into output_dir. Returns the paths
// written. Desk scale runs the reduced default budget; Paper scale runs
// the full protocol (hours).
std::vector<std::filesystem::path> reproduce_figure(
    Figure figure, Scale scale, const std::filesystem::path& output_dir,
    std::optional<ScaleOverride> override_scale = std::nullopt);

// Round-trips for the on-disk config schema (documented in README).
RunConfig load_run_config(const std::filesystem::path& file);
std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

}  // namespace volherd
