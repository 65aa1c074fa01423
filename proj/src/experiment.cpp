#include "volherd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "volherd/io.hpp"
#include "volherd/kernels.hpp"
#include "volherd/version.hpp"

namespace volherd {

using nlohmann::json;

namespace {

// ---- enum <-> config-file words -------------------------------------

std::string_view kernel_word(Kernel k) {
    return k == Kernel::Rational ? "rational" : "exponential";
}

Kernel kernel_from_word(const std::string& w) {
    if (w == "rational") return Kernel::Rational;
    if (w == "exponential") return Kernel::Exponential;
    throw std::runtime_error("config: unknown kernel '" + w + "'");
}

std::string_view partner_word(PartnerSelection p) {
    return p == PartnerSelection::UniformCluster ? "uniform_cluster"
                                                 : "uniform_agent";
}

PartnerSelection partner_from_word(const std::string& w) {
    if (w == "uniform_cluster") return PartnerSelection::UniformCluster;
    if (w == "uniform_agent") return PartnerSelection::UniformAgent;
    throw std::runtime_error("config: unknown partner_selection '" + w + "'");
}

std::string_view policy_word(RecordPolicy p) {
    return p == RecordPolicy::TradesOnly ? "trades_only" : "all_steps";
}

RecordPolicy policy_from_word(const std::string& w) {
    if (w == "trades_only") return RecordPolicy::TradesOnly;
    if (w == "all_steps") return RecordPolicy::AllSteps;
    throw std::runtime_error("config: unknown record_policy '" + w + "'");
}

std::string_view mode_word(ModelMode m) {
    return m == ModelMode::Interacting ? "interacting" : "ez_baseline";
}

ModelMode mode_from_word(const std::string& w) {
    if (w == "interacting") return ModelMode::Interacting;
    if (w == "ez_baseline") return ModelMode::EzBaseline;
    throw std::runtime_error("config: unknown mode '" + w + "'");
}

// Reject unknown keys so config typos fail loudly instead of silently
// running defaults.
void check_keys(const json& j, const char* ctx,
                std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::runtime_error(std::string("config: unknown key '") +
                                     key + "' in " + ctx);
    }
}

json range_to_json(const std::optional<std::pair<double, double>>& r) {
    if (!r) return nullptr;
    return json::array({r->first, r->second});
}

std::optional<std::pair<double, double>> range_from_json(const json& j,
                                                         const char* what) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 2)
        throw std::runtime_error(std::string("config: ") + what +
                                 " must be null or [lo, hi]");
    return std::make_pair(j[0].get<double>(), j[1].get<double>());
}

// ---- sample collection ----------------------------------------------

struct Samples {
    std::vector<double> V;            // per trade
    std::vector<double> N;            // per trade
    std::vector<double> absr_trades;  // per trade with r != 0
    std::vector<double> absr_steps;   // per measurement step, zeros kept
    uint64_t trades = 0;
};

void record_outcome(const StepOutcome& o, const RunConfig& cfg, Samples& s,
                    EventWriter& events) {
    double ar = 0.0;
    if (o.traded) {
        const TradeRecord& tr = *o.trade;
        s.V.push_back(tr.V);
        s.N.push_back(static_cast<double>(tr.N));
        ar = std::fabs(tr.r);
        if (tr.r != 0.0) s.absr_trades.push_back(ar);
        ++s.trades;
        events.append({o.t, true, tr.V, tr.N, tr.Q, tr.r});
    } else if (cfg.record_policy == RecordPolicy::AllSteps) {
        events.append({o.t, false, 0.0, 0, 0.0, 0.0});
    }
    if (cfg.analysis.compute_acf) s.absr_steps.push_back(ar);
}

std::string market_to_blob(const Market& m) {
    std::ostringstream os(std::ios::binary);
    m.save(os);
    return std::move(os).str();
}

Market market_from_blob(const std::string& blob) {
    std::istringstream is(blob, std::ios::binary);
    return Market::load(is);
}

// Measurement loop from measure_done up to cfg.measure_steps; shared by
// fresh runs and resumed ones.
void run_measurement(const RunConfig& cfg, Market& market, Samples& samples,
                     EventWriter& events, uint64_t measure_done,
                     const std::filesystem::path& checkpoint_path,
                     const std::string& identity) {
    for (uint64_t k = measure_done; k < cfg.measure_steps; ++k) {
        const StepOutcome o = cfg.model_mode == ModelMode::EzBaseline
                                  ? market.ez_step(cfg.ez_a)
                                  : market.step();
        record_outcome(o, cfg, samples, events);
        if (cfg.checkpoint_interval && (k + 1) % *cfg.checkpoint_interval == 0 &&
            k + 1 < cfg.measure_steps) {
            events.flush();
            save_checkpoint(checkpoint_path,
                            {identity, k + 1, events.byte_offset(),
                             market_to_blob(market)});
        }
    }
    events.flush();
}

// Rebuilds the sample set from a (possibly truncated) events file.
// covered_steps says how many measurement steps the stream spans, which
// the gaps in t cannot (trailing merge-only steps leave no rows).
Samples rebuild_samples(const std::vector<EventRecord>& events,
                        const RunConfig& cfg, uint64_t covered_steps) {
    Samples s;
    if (cfg.analysis.compute_acf)
        s.absr_steps.assign(covered_steps, 0.0);
    for (const EventRecord& ev : events) {
        if (ev.t <= cfg.warmup_steps || ev.t > cfg.warmup_steps + covered_steps)
            throw std::runtime_error("events file: step index out of range");
        if (!ev.traded) continue;
        s.V.push_back(ev.V);
        s.N.push_back(static_cast<double>(ev.N));
        const double ar = std::fabs(ev.r);
        if (ev.r != 0.0) s.absr_trades.push_back(ar);
        ++s.trades;
        if (cfg.analysis.compute_acf)
            s.absr_steps[ev.t - cfg.warmup_steps - 1] = ar;
    }
    return s;
}

// ---- analysis & artifacts -------------------------------------------

TailSummary summarize_tail(const std::vector<double>& samples,
                           const AnalysisConfig& a,
                           const std::optional<std::pair<double, double>>&
                               override_range,
                           std::optional<Histogram>& hist_out) {
    TailSummary ts;
    ts.samples = samples.size();
    hist_out.reset();
    if (samples.size() >= 100) {
        hist_out = log_binned_pdf(samples, a.bins_per_decade);
        ts.window = override_range
                        ? override_range
                        : select_power_law_range(*hist_out, a.min_decades,
                                                 a.min_r2);
        if (ts.window)
            ts.fit = fit_power_law_tail(*hist_out, ts.window->first,
                                        ts.window->second);
    }
    if (samples.size() >= 1000) {
        try {
            ts.hill = hill_tail_exponent(samples, a.hill_tail_fraction);
        } catch (const std::runtime_error&) {
            // degenerate tail (all values equal); no Hill estimate
        }
    }
    return ts;
}

void export_histogram(const std::filesystem::path& file,
                      std::string_view header, const Histogram& h) {
    std::vector<double> centers, densities;
    centers.reserve(h.bin_count());
    for (size_t j = 0; j < h.bin_count(); ++j) {
        if (h.counts[j] == 0) continue;
        const double cx = 0.5 * (std::log10(h.bin_edges[j]) +
                                 std::log10(h.bin_edges[j + 1]));
        centers.push_back(std::pow(10.0, cx));
        densities.push_back(h.densities[j]);
    }
    write_xy(file, header, centers, densities);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void export_fit_report(const std::filesystem::path& file,
                       std::string_view observable, const TailSummary& ts) {
    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("observable", std::string(observable));
    rows.emplace_back("samples", std::to_string(ts.samples));
    rows.emplace_back("window_found", ts.window ? "true" : "false");
    if (ts.window) {
        rows.emplace_back("window_lo", fmt_double(ts.window->first));
        rows.emplace_back("window_hi", fmt_double(ts.window->second));
    }
    if (ts.fit) {
        rows.emplace_back("exponent", fmt_double(ts.fit->exponent));
        rows.emplace_back("std_error", fmt_double(ts.fit->std_error));
        rows.emplace_back("r_squared", fmt_double(ts.fit->r_squared));
        rows.emplace_back("intercept", fmt_double(ts.fit->intercept));
        rows.emplace_back("fit_lo", fmt_double(ts.fit->fit_lo));
        rows.emplace_back("fit_hi", fmt_double(ts.fit->fit_hi));
        rows.emplace_back("n_points", std::to_string(ts.fit->n_points));
    }
    if (ts.hill) {
        rows.emplace_back("hill_exponent", fmt_double(ts.hill->exponent));
        rows.emplace_back("hill_std_error", fmt_double(ts.hill->std_error));
    }
    write_keyvalue(file, rows);
}

json fit_to_json(const PowerLawFit& f) {
    return {{"exponent", f.exponent},   {"intercept", f.intercept},
            {"fit_lo", f.fit_lo},       {"fit_hi", f.fit_hi},
            {"std_error", f.std_error}, {"r_squared", f.r_squared},
            {"n_points", f.n_points},
            {"method", f.method == FitMethod::Hill ? "hill"
                                                   : "loglog_least_squares"}};
}

json tail_to_json(const TailSummary& ts) {
    json j;
    j["samples"] = ts.samples;
    j["window"] = range_to_json(ts.window);
    j["fit"] = ts.fit ? fit_to_json(*ts.fit) : json(nullptr);
    j["hill"] = ts.hill ? fit_to_json(*ts.hill) : json(nullptr);
    return j;
}

json summary_to_json(const Summary& s) {
    json j;
    j["steps"] = s.steps;
    j["trades"] = s.trades;
    j["V"] = tail_to_json(s.V);
    j["N"] = tail_to_json(s.N);
    j["abs_r"] = tail_to_json(s.absr);
    if (s.acf) {
        j["acf"] = {{"lambda", s.acf->fit.exponent},
                    {"std_error", s.acf->fit.std_error},
                    {"r_squared", s.acf->fit.r_squared},
                    {"fit_lo", s.acf->fit.fit_lo},
                    {"fit_hi", s.acf->fit.fit_hi},
                    {"excluded_fraction", s.acf->excluded_fraction},
                    {"curvature_delta", s.acf->curvature_delta},
                    {"curvature_flag", s.acf->curvature_flag}};
    } else {
        j["acf"] = nullptr;
    }
    if (s.relation) {
        j["relation"] = {{"xi_V", s.relation->xi_V},
                         {"xi_N", s.relation->xi_N},
                         {"xi_r", s.relation->xi_r},
                         {"dev_N_2V", s.relation->dev_N_2V},
                         {"dev_r_N", s.relation->dev_r_N},
                         {"tolerance", s.relation->tolerance},
                         {"pass", s.relation->pass}};
    } else {
        j["relation"] = nullptr;
    }
    j["runtime_seconds"] = s.runtime_seconds;
    return j;
}

std::string opt_exponent(const std::optional<PowerLawFit>& f) {
    return f ? fmt_double(f->exponent) : "none";
}

void write_summary_text(const std::filesystem::path& file, const Summary& s) {
    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("steps", std::to_string(s.steps));
    rows.emplace_back("trades", std::to_string(s.trades));
    rows.emplace_back("xi_V", opt_exponent(s.V.fit));
    rows.emplace_back("xi_N", opt_exponent(s.N.fit));
    rows.emplace_back("xi_r", opt_exponent(s.absr.fit));
    rows.emplace_back("lambda", s.acf ? fmt_double(s.acf->fit.exponent)
                                      : "none");
    if (s.relation) {
        rows.emplace_back("relation_dev_N_2V", fmt_double(s.relation->dev_N_2V));
        rows.emplace_back("relation_dev_r_N", fmt_double(s.relation->dev_r_N));
        rows.emplace_back("relation_pass", s.relation->pass ? "true" : "false");
    }
    rows.emplace_back("runtime_seconds", fmt_double(s.runtime_seconds));
    write_keyvalue(file, rows);
}

// The statistics pass over collected samples, plus all derived artifact
// files. Everything here is a pure function of the sample set and the
// analysis config, so re-running it from the persisted event stream
// reproduces the numbers bit for bit.
Summary analyze_samples(const Samples& samples, const RunConfig& cfg,
                        const std::filesystem::path& dir) {
    const AnalysisConfig& a = cfg.analysis;
    Summary s;
    s.steps = cfg.measure_steps;
    s.trades = samples.trades;

    std::optional<Histogram> hist;
    s.V = summarize_tail(samples.V, a, a.fit_range_V, hist);
    if (hist) export_histogram(dir / "pdf_V.txt", "P(V): center density", *hist);
    export_fit_report(dir / "fit_V.txt", "V", s.V);

    s.N = summarize_tail(samples.N, a, a.fit_range_N, hist);
    if (hist) export_histogram(dir / "pdf_N.txt", "P(N): center density", *hist);
    export_fit_report(dir / "fit_N.txt", "N", s.N);

    s.absr = summarize_tail(samples.absr_trades, a, a.fit_range_r, hist);
    if (hist)
        export_histogram(dir / "pdf_absr.txt", "P(|r|): center density", *hist);
    export_fit_report(dir / "fit_absr.txt", "|r|", s.absr);

    if (a.compute_acf && !samples.absr_steps.empty()) {
        // honor the precondition n >= 10 * max_lag at reduced test scales
        const uint32_t max_lag = static_cast<uint32_t>(
            std::min<uint64_t>(a.acf_max_lag, samples.absr_steps.size() / 10));
        if (max_lag >= 1) {
            const AcfResult acf = autocorrelation(samples.absr_steps, max_lag);
            std::vector<double> lags(acf.values.size());
            for (size_t i = 0; i < lags.size(); ++i)
                lags[i] = static_cast<double>(i);
            write_xy(dir / "acf.txt", "C(tau) of |r| per step: tau C", lags,
                     acf.values);
            const uint32_t lo = std::min<uint32_t>(a.acf_fit_lo, max_lag);
            const uint32_t hi = std::min<uint32_t>(a.acf_fit_hi, max_lag);
            if (lo >= 1 && lo < hi) {
                try {
                    s.acf = fit_acf_decay(acf, lo, hi);
                    std::vector<std::pair<std::string, std::string>> rows;
                    rows.emplace_back("lambda", fmt_double(s.acf->fit.exponent));
                    rows.emplace_back("std_error",
                                      fmt_double(s.acf->fit.std_error));
                    rows.emplace_back("r_squared",
                                      fmt_double(s.acf->fit.r_squared));
                    rows.emplace_back("fit_lo", fmt_double(s.acf->fit.fit_lo));
                    rows.emplace_back("fit_hi", fmt_double(s.acf->fit.fit_hi));
                    rows.emplace_back("excluded_fraction",
                                      fmt_double(s.acf->excluded_fraction));
                    rows.emplace_back("curvature_delta",
                                      fmt_double(s.acf->curvature_delta));
                    rows.emplace_back("curvature_flag",
                                      s.acf->curvature_flag ? "true" : "false");
                    write_keyvalue(dir / "fit_acf.txt", rows);
                } catch (const std::runtime_error&) {
                    // not enough positive C(tau) in range; ACF exported, no fit
                }
            }
        }
    }

    if (s.V.fit && s.N.fit && s.absr.fit)
        s.relation = exponent_relation_report(
            s.V.fit->exponent, s.N.fit->exponent, s.absr.fit->exponent,
            a.relation_tolerance);

    return s;
}

json config_to_json_obj(const RunConfig& cfg) {
    json model = {{"agents", cfg.params.agents},
                  {"kernel", kernel_word(cfg.params.kernel)},
                  {"b", cfg.params.b},
                  {"c", cfg.params.c},
                  {"d", cfg.params.d},
                  {"A", cfg.params.A},
                  {"seed", cfg.params.seed},
                  {"partner_selection", partner_word(cfg.params.partner)},
                  {"rng_algorithm", cfg.params.rng_algorithm}};
    json analysis = {{"bins_per_decade", cfg.analysis.bins_per_decade},
                     {"min_decades", cfg.analysis.min_decades},
                     {"min_r2", cfg.analysis.min_r2},
                     {"compute_acf", cfg.analysis.compute_acf},
                     {"acf_max_lag", cfg.analysis.acf_max_lag},
                     {"acf_fit_lo", cfg.analysis.acf_fit_lo},
                     {"acf_fit_hi", cfg.analysis.acf_fit_hi},
                     {"hill_tail_fraction", cfg.analysis.hill_tail_fraction},
                     {"relation_tolerance", cfg.analysis.relation_tolerance},
                     {"fit_range_V", range_to_json(cfg.analysis.fit_range_V)},
                     {"fit_range_N", range_to_json(cfg.analysis.fit_range_N)},
                     {"fit_range_r", range_to_json(cfg.analysis.fit_range_r)}};
    json j = {{"model", model},
              {"mode", mode_word(cfg.model_mode)},
              {"ez_a", cfg.ez_a},
              {"warmup_steps", cfg.warmup_steps},
              {"measure_steps", cfg.measure_steps},
              {"record_policy", policy_word(cfg.record_policy)},
              {"output_dir", cfg.output_dir.string()},
              {"checkpoint_interval",
               cfg.checkpoint_interval ? json(*cfg.checkpoint_interval)
                                       : json(nullptr)},
              {"analysis", analysis}};
    return j;
}

void write_metadata(const RunConfig& cfg, const std::filesystem::path& file) {
    json j = {{"version", std::string(kVersion)},
              {"rng_algorithm", cfg.params.rng_algorithm},
              {"kernel_backend", kern::active().name},
              {"config", config_to_json_obj(cfg)}};
    write_text_file(file, j.dump(2) + "\n");
}

RunArtifacts finish_run(const RunConfig& cfg, const Samples& samples,
                        const std::filesystem::path& dir,
                        std::chrono::steady_clock::time_point started) {
    Summary summary = analyze_samples(samples, cfg, dir);
    summary.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    write_text_file(dir / "summary.json",
                    summary_to_json(summary).dump(2) + "\n");
    write_summary_text(dir / "summary.txt", summary);
    std::filesystem::remove(dir / "checkpoint.bin");
    std::filesystem::remove(dir / "partial.marker");
    RunArtifacts art;
    art.output_dir = dir;
    art.events_path = dir / "events.txt";
    art.summary_path = dir / "summary.json";
    art.metadata_path = dir / "metadata.json";
    art.summary = summary;
    return art;
}

}  // namespace

void AnalysisConfig::validate() const {
    if (bins_per_decade < 1)
        throw std::invalid_argument("bins_per_decade must be >= 1");
    if (!(min_decades > 0.0))
        throw std::invalid_argument("min_decades must be positive");
    if (!(min_r2 > 0.0) || min_r2 > 1.0)
        throw std::invalid_argument("min_r2 must be in (0, 1]");
    if (acf_max_lag < 1)
        throw std::invalid_argument("acf_max_lag must be >= 1");
    if (acf_fit_lo < 1 || acf_fit_lo >= acf_fit_hi)
        throw std::invalid_argument("need 1 <= acf_fit_lo < acf_fit_hi");
    if (!(hill_tail_fraction > 0.0) || hill_tail_fraction > 0.5)
        throw std::invalid_argument("hill_tail_fraction must be in (0, 0.5]");
    if (!(relation_tolerance > 0.0))
        throw std::invalid_argument("relation_tolerance must be positive");
    for (const auto& r : {fit_range_V, fit_range_N, fit_range_r})
        if (r && (!(r->first > 0.0) || !(r->first < r->second)))
            throw std::invalid_argument("fit range must satisfy 0 < lo < hi");
}

void RunConfig::validate() const {
    params.validate();
    analysis.validate();
    if (measure_steps < 1)
        throw std::invalid_argument("measure_steps must be >= 1");
    if (output_dir.empty())
        throw std::invalid_argument("output_dir must be set");
    if (checkpoint_interval && *checkpoint_interval < 1)
        throw std::invalid_argument("checkpoint_interval must be >= 1");
    if (model_mode == ModelMode::EzBaseline &&
        (!(ez_a > 0.0) || ez_a > 1.0))
        throw std::invalid_argument("ez_a must be in (0, 1]");
}

std::string run_config_to_json(const RunConfig& config) {
    return config_to_json_obj(config).dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    json j = json::parse(text);  // throws nlohmann parse_error on bad JSON
    check_keys(j, "config root",
               {"model", "mode", "ez_a", "warmup_steps", "measure_steps",
                "record_policy", "output_dir", "checkpoint_interval",
                "analysis"});
    RunConfig cfg;
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model",
                   {"agents", "kernel", "b", "c", "d", "A", "seed",
                    "partner_selection", "rng_algorithm"});
        if (m.contains("agents")) cfg.params.agents = m["agents"].get<uint32_t>();
        if (m.contains("kernel"))
            cfg.params.kernel = kernel_from_word(m["kernel"].get<std::string>());
        if (m.contains("b")) cfg.params.b = m["b"].get<double>();
        if (m.contains("c")) cfg.params.c = m["c"].get<double>();
        if (m.contains("d")) cfg.params.d = m["d"].get<double>();
        if (m.contains("A")) cfg.params.A = m["A"].get<double>();
        if (m.contains("seed")) cfg.params.seed = m["seed"].get<uint64_t>();
        if (m.contains("partner_selection"))
            cfg.params.partner =
                partner_from_word(m["partner_selection"].get<std::string>());
        if (m.contains("rng_algorithm"))
            cfg.params.rng_algorithm = m["rng_algorithm"].get<std::string>();
    }
    if (j.contains("mode"))
        cfg.model_mode = mode_from_word(j["mode"].get<std::string>());
    if (j.contains("ez_a")) cfg.ez_a = j["ez_a"].get<double>();
    if (j.contains("warmup_steps"))
        cfg.warmup_steps = j["warmup_steps"].get<uint64_t>();
    if (j.contains("measure_steps"))
        cfg.measure_steps = j["measure_steps"].get<uint64_t>();
    if (j.contains("record_policy"))
        cfg.record_policy =
            policy_from_word(j["record_policy"].get<std::string>());
    if (j.contains("output_dir"))
        cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("checkpoint_interval") && !j["checkpoint_interval"].is_null())
        cfg.checkpoint_interval = j["checkpoint_interval"].get<uint64_t>();
    if (j.contains("analysis")) {
        const json& a = j["analysis"];
        check_keys(a, "analysis",
                   {"bins_per_decade", "min_decades", "min_r2", "compute_acf",
                    "acf_max_lag", "acf_fit_lo", "acf_fit_hi",
                    "hill_tail_fraction", "relation_tolerance", "fit_range_V",
                    "fit_range_N", "fit_range_r"});
        AnalysisConfig& ac = cfg.analysis;
        if (a.contains("bins_per_decade"))
            ac.bins_per_decade = a["bins_per_decade"].get<int>();
        if (a.contains("min_decades"))
            ac.min_decades = a["min_decades"].get<double>();
        if (a.contains("min_r2")) ac.min_r2 = a["min_r2"].get<double>();
        if (a.contains("compute_acf"))
            ac.compute_acf = a["compute_acf"].get<bool>();
        if (a.contains("acf_max_lag"))
            ac.acf_max_lag = a["acf_max_lag"].get<uint32_t>();
        if (a.contains("acf_fit_lo"))
            ac.acf_fit_lo = a["acf_fit_lo"].get<uint32_t>();
        if (a.contains("acf_fit_hi"))
            ac.acf_fit_hi = a["acf_fit_hi"].get<uint32_t>();
        if (a.contains("hill_tail_fraction"))
            ac.hill_tail_fraction = a["hill_tail_fraction"].get<double>();
        if (a.contains("relation_tolerance"))
            ac.relation_tolerance = a["relation_tolerance"].get<double>();
        if (a.contains("fit_range_V"))
            ac.fit_range_V = range_from_json(a["fit_range_V"], "fit_range_V");
        if (a.contains("fit_range_N"))
            ac.fit_range_N = range_from_json(a["fit_range_N"], "fit_range_N");
        if (a.contains("fit_range_r"))
            ac.fit_range_r = range_from_json(a["fit_range_r"], "fit_range_r");
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    return run_config_from_json(read_text_file(file));
}

RunArtifacts run_simulation(const RunConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::filesystem::path dir = config.output_dir;
    std::filesystem::create_directories(dir);
    write_text_file(dir / "partial.marker", "run in flight or aborted\n");
    const std::string config_json = run_config_to_json(config);
    write_text_file(dir / "config.json", config_json);
    write_metadata(config, dir / "metadata.json");

    Market market(config.params);
    for (uint64_t k = 0; k < config.warmup_steps; ++k) {
        if (config.model_mode == ModelMode::EzBaseline)
            market.ez_step(config.ez_a);
        else
            market.step();
    }

    Samples samples;
    EventWriter events(dir / "events.txt");
    run_measurement(config, market, samples, events, 0,
                    dir / "checkpoint.bin", config_json);
    return finish_run(config, samples, dir, started);
}

RunArtifacts resume_simulation(const std::filesystem::path& output_dir) {
    const auto started = std::chrono::steady_clock::now();
    const std::filesystem::path config_path = output_dir / "config.json";
    const std::filesystem::path checkpoint_path = output_dir / "checkpoint.bin";
    if (!std::filesystem::exists(config_path))
        throw std::runtime_error("nothing to resume: no config.json in " +
                                 output_dir.string());
    if (!std::filesystem::exists(checkpoint_path))
        throw std::runtime_error("nothing to resume: no checkpoint.bin in " +
                                 output_dir.string());
    const std::string config_json = read_text_file(config_path);
    RunConfig config = run_config_from_json(config_json);
    config.validate();
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.identity_json != config_json)
        throw std::runtime_error(
            "checkpoint does not belong to this run (config mismatch)");
    if (ck.measure_done >= config.measure_steps)
        throw std::runtime_error("checkpoint claims the run already finished");

    Market market = market_from_blob(ck.market_blob);
    if (!(market.params() == config.params))
        throw std::runtime_error("checkpoint market params mismatch");

    // Truncate the stream to the last durable row, then rebuild the
    // sample set from the surviving prefix.
    EventWriter events(output_dir / "events.txt", ck.events_offset);
    const auto prefix = read_events(output_dir / "events.txt");
    Samples samples = rebuild_samples(prefix, config, ck.measure_done);
    if (config.analysis.compute_acf)
        samples.absr_steps.reserve(config.measure_steps);

    run_measurement(config, market, samples, events, ck.measure_done,
                    checkpoint_path, config_json);
    return finish_run(config, samples, output_dir, started);
}

Summary analyze(const std::filesystem::path& output_dir) {
    RunConfig config = load_run_config(output_dir / "config.json");
    config.validate();
    const auto events = read_events(output_dir / "events.txt");
    const Samples samples = rebuild_samples(events, config,
                                            config.measure_steps);
    Summary s = analyze_samples(samples, config, output_dir);
    write_text_file(output_dir / "summary.json",
                    summary_to_json(s).dump(2) + "\n");
    write_summary_text(output_dir / "summary.txt", s);
    return s;
}

std::vector<SweepRow> sweep(const RunConfig& base, const std::string& axis,
                            std::span<const double> values) {
    if (axis != "b" && axis != "c" && axis != "d" && axis != "M" &&
        axis != "A" && axis != "seed")
        throw std::invalid_argument("sweep axis must be one of b c d M A seed");
    std::vector<SweepRow> rows(values.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            SweepRow& row = rows[i];
            row.axis = axis;
            row.value = values[i];
            RunConfig cfg = base;
            cfg.analysis.compute_acf = false;  // sweeps are about tails
            if (axis == "b") cfg.params.b = values[i];
            else if (axis == "c") cfg.params.c = values[i];
            else if (axis == "d") cfg.params.d = values[i];
            else if (axis == "A") cfg.params.A = values[i];
            else if (axis == "M")
                cfg.params.agents = static_cast<uint32_t>(values[i]);
            // Children never share an RNG stream: the seed axis uses the
            // value itself, every other axis derives from base seed + row.
            cfg.params.seed = axis == "seed"
                                  ? static_cast<uint64_t>(values[i])
                                  : derive_seed(base.params.seed, i);
            char leaf[64];
            std::snprintf(leaf, sizeof leaf, "sweep_%s_%02zu", axis.c_str(),
                          i);
            cfg.output_dir = base.output_dir / leaf;
            row.seed = cfg.params.seed;
            row.run_dir = cfg.output_dir;
            try {
                RunArtifacts art = run_simulation(cfg);
                row.summary = art.summary;
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };
    const size_t n_threads = std::min<size_t>(
        values.size(),
        std::max<size_t>(1, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return rows;
}

void write_sweep_table(const std::filesystem::path& file,
                       std::span<const SweepRow> rows) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (size_t i = 0; i < rows.size(); ++i) {
        const SweepRow& row = rows[i];
        const std::string p = "row" + std::to_string(i) + ".";
        kv.emplace_back(p + "axis", row.axis);
        kv.emplace_back(p + "value", fmt_double(row.value));
        kv.emplace_back(p + "seed", std::to_string(row.seed));
        kv.emplace_back(p + "dir", row.run_dir.string());
        kv.emplace_back(p + "status", row.ok ? "ok" : "error");
        if (!row.ok) {
            kv.emplace_back(p + "error", row.error);
            continue;
        }
        const Summary& s = *row.summary;
        kv.emplace_back(p + "trades", std::to_string(s.trades));
        kv.emplace_back(p + "xi_V", opt_exponent(s.V.fit));
        kv.emplace_back(p + "xi_N", opt_exponent(s.N.fit));
        kv.emplace_back(p + "xi_r", opt_exponent(s.absr.fit));
        kv.emplace_back(p + "power_law_V",
                        s.V.window ? "true" : "false");
        kv.emplace_back(p + "power_law_N",
                        s.N.window ? "true" : "false");
    }
    write_keyvalue(file, kv);
}

namespace {

// Fixed seed root for scripted figure reproduction; child runs derive
// from it so repeated calls are bit-identical.
constexpr uint64_t kFigureSeedRoot = 424243;

struct FigureRun {
    std::string label;
    RunConfig cfg;
};

RunConfig figure_base(Scale scale,
                      const std::optional<ScaleOverride>& override_scale) {
    RunConfig cfg;
    if (scale == Scale::Paper) {
        cfg.params.agents = 80000;
        cfg.warmup_steps = 1000000;
        cfg.measure_steps = 100000000;
    } else {
        cfg.params.agents = 40000;
        cfg.warmup_steps = 100000;
        cfg.measure_steps = 10000000;
    }
    if (override_scale) {
        cfg.params.agents = override_scale->agents;
        cfg.warmup_steps = override_scale->warmup_steps;
        cfg.measure_steps = override_scale->measure_steps;
    }
    cfg.analysis.compute_acf = false;
    return cfg;
}

// Sampled line y = 10^intercept * x^slope over the fitted window, for
// plotting on top of the exported points.
void write_fit_overlay(const std::filesystem::path& file,
                       std::string_view header, const PowerLawFit& fit,
                       double slope) {
    const int n = 50;
    std::vector<double> xs(n), ys(n);
    const double llo = std::log10(fit.fit_lo);
    const double lhi = std::log10(fit.fit_hi);
    for (int i = 0; i < n; ++i) {
        const double lx = llo + (lhi - llo) * i / (n - 1);
        xs[i] = std::pow(10.0, lx);
        ys[i] = std::pow(10.0, fit.intercept + slope * lx);
    }
    write_xy(file, header, xs, ys);
}

void copy_if_exists(const std::filesystem::path& from,
                    const std::filesystem::path& to,
                    std::vector<std::filesystem::path>& written) {
    if (!std::filesystem::exists(from)) return;
    std::filesystem::copy_file(
        from, to, std::filesystem::copy_options::overwrite_existing);
    written.push_back(to);
}

}  // namespace

std::vector<std::filesystem::path> reproduce_figure(
    Figure figure, Scale scale, const std::filesystem::path& output_dir,
    std::optional<ScaleOverride> override_scale) {
    std::filesystem::create_directories(output_dir);
    std::vector<FigureRun> runs;
    const RunConfig base = figure_base(scale, override_scale);

    auto add = [&](std::string label, auto&& tweak) {
        RunConfig cfg = base;
        tweak(cfg);
        cfg.params.seed = derive_seed(kFigureSeedRoot, runs.size());
        cfg.output_dir = output_dir / "runs" / label;
        runs.push_back({std::move(label), std::move(cfg)});
    };

    std::string fig;
    switch (figure) {
        case Figure::Fig1a:
        case Figure::Fig1b:
            fig = figure == Figure::Fig1a ? "fig1a" : "fig1b";
            add("b0.30", [](RunConfig& c) { c.params.b = 0.30; });
            add("b0.45", [](RunConfig& c) { c.params.b = 0.45; });
            add("b0.60", [](RunConfig& c) { c.params.b = 0.60; });
            break;
        case Figure::Fig2:
            fig = "fig2";
            add("b0.45", [](RunConfig& c) { c.params.b = 0.45; });
            break;
        case Figure::Fig3:
            fig = "fig3";
            add("exp_c1.0_d2.0", [](RunConfig& c) {
                c.params.kernel = Kernel::Exponential;
                c.params.c = 1.0;
                c.params.d = 2.0;
            });
            break;
        case Figure::Fig4:
            fig = "fig4";
            add("b0.45", [](RunConfig& c) {
                c.params.b = 0.45;
                c.analysis.compute_acf = true;
            });
            break;
    }

    std::vector<std::filesystem::path> written;
    for (const FigureRun& fr : runs) {
        const RunArtifacts art = run_simulation(fr.cfg);
        const auto& dir = art.output_dir;
        const std::string stem = fig + "_" + fr.label;
        if (figure == Figure::Fig1a || figure == Figure::Fig2 ||
            figure == Figure::Fig3) {
            copy_if_exists(dir / "pdf_V.txt",
                           output_dir / (stem + "_pdf_V.txt"), written);
            if (art.summary.V.fit)
                write_fit_overlay(output_dir / (stem + "_fit_V.txt"),
                                  "P(V) fitted power law: x y",
                                  *art.summary.V.fit,
                                  -art.summary.V.fit->exponent - 1.0);
        }
        if (figure == Figure::Fig1b || figure == Figure::Fig3) {
            copy_if_exists(dir / "pdf_N.txt",
                           output_dir / (stem + "_pdf_N.txt"), written);
            if (art.summary.N.fit)
                write_fit_overlay(output_dir / (stem + "_fit_N.txt"),
                                  "P(N) fitted power law: x y",
                                  *art.summary.N.fit,
                                  -art.summary.N.fit->exponent - 1.0);
        }
        if (figure == Figure::Fig2 || figure == Figure::Fig3) {
            copy_if_exists(dir / "pdf_absr.txt",
                           output_dir / (stem + "_pdf_absr.txt"), written);
            if (art.summary.absr.fit)
                write_fit_overlay(output_dir / (stem + "_fit_absr.txt"),
                                  "P(|r|) fitted power law: x y",
                                  *art.summary.absr.fit,
                                  -art.summary.absr.fit->exponent - 1.0);
        }
        if (figure == Figure::Fig4) {
            copy_if_exists(dir / "acf.txt", output_dir / (stem + "_acf.txt"),
                           written);
            if (art.summary.acf)
                write_fit_overlay(output_dir / (stem + "_fit_acf.txt"),
                                  "C(tau) fitted power law: tau C",
                                  art.summary.acf->fit,
                                  -art.summary.acf->fit.exponent);
        }
        // every written overlay is listed; collect them
        for (auto& p : std::filesystem::directory_iterator(output_dir)) {
            if (!p.is_regular_file()) continue;
            const auto path = p.path();
            if (path.filename().string().rfind(stem + "_fit", 0) == 0 &&
                std::find(written.begin(), written.end(), path) ==
                    written.end())
                written.push_back(path);
        }
    }
    return written;
}

}  // namespace volherd
