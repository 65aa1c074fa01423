// volherd -- command-line front end for the volume-interacting herding
// market simulator. Subcommands: simulate, sweep, analyze, reproduce.
//
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "volherd/experiment.hpp"
#include "volherd/io.hpp"
#include "volherd/kernels.hpp"
#include "volherd/version.hpp"

namespace {

using namespace volherd;

struct SimFlags {
    std::string config_path;
    std::string out_dir;
    std::string kernel;
    double b = 0.0, c = 0.0, d = 0.0, A = 0.0;
    uint64_t agents = 0;
    uint64_t seed = 0;
    std::string partner;
    std::string model;
    double ez_a = 0.0;
    uint64_t warmup = 0, steps = 0;
    std::string record;
    uint64_t checkpoint_interval = 0;
    int bins_per_decade = 0;
    double min_decades = 0.0, min_r2 = 0.0;
    bool acf = true;
    uint64_t acf_max_lag = 0, acf_fit_lo = 0, acf_fit_hi = 0;
    double hill_fraction = 0.0, relation_tol = 0.0;
    std::vector<double> fit_V, fit_N, fit_r;

    // option handles, to tell "explicitly set" from "default"
    std::map<std::string, CLI::Option*> opt;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
    auto& o = f.opt;
    o["config"] = cmd->add_option("--config", f.config_path,
                                  "JSON run config; other flags override it")
                      ->check(CLI::ExistingFile);
    o["out"] = cmd->add_option("--out", f.out_dir, "output directory");
    o["kernel"] = cmd->add_option("--kernel", f.kernel,
                                  "trading-probability kernel")
                      ->check(CLI::IsMember({"rational", "exponential"}));
    o["b"] = cmd->add_option("--b", f.b, "rational kernel strength b");
    o["c"] = cmd->add_option("--c", f.c, "exponential kernel amplitude c");
    o["d"] = cmd->add_option("--d", f.d, "exponential kernel rate d");
    o["A"] = cmd->add_option("--A", f.A, "return saturation constant A");
    o["agents"] = cmd->add_option("--agents,--M", f.agents,
                                  "number of agents M");
    o["seed"] = cmd->add_option("--seed", f.seed, "RNG seed");
    o["partner"] =
        cmd->add_option("--partner", f.partner, "merge partner selection")
            ->check(CLI::IsMember({"uniform_cluster", "uniform_agent"}));
    o["model"] = cmd->add_option("--model", f.model, "model variant")
                     ->check(CLI::IsMember({"interacting", "ez_baseline"}));
    o["ez-a"] = cmd->add_option("--ez-a", f.ez_a,
                                "constant trading probability (ez_baseline)");
    o["warmup"] = cmd->add_option("--warmup", f.warmup,
                                  "warmup steps discarded before measuring");
    o["steps"] = cmd->add_option("--steps", f.steps, "measurement steps");
    o["record"] = cmd->add_option("--record", f.record, "event stream policy")
                      ->check(CLI::IsMember({"trades_only", "all_steps"}));
    o["checkpoint-interval"] =
        cmd->add_option("--checkpoint-interval", f.checkpoint_interval,
                        "save a resumable checkpoint every N steps");
    o["bins-per-decade"] = cmd->add_option("--bins-per-decade",
                                           f.bins_per_decade,
                                           "histogram bins per decade");
    o["min-decades"] = cmd->add_option(
        "--min-decades", f.min_decades,
        "minimum decades a power-law window must span");
    o["min-r2"] = cmd->add_option("--min-r2", f.min_r2,
                                  "minimum r^2 for a power-law window");
    o["acf"] = cmd->add_flag("--acf,!--no-acf", f.acf,
                             "compute the |r| autocorrelation (default on)");
    o["acf-max-lag"] = cmd->add_option("--acf-max-lag", f.acf_max_lag,
                                       "largest ACF lag");
    o["acf-fit-lo"] = cmd->add_option("--acf-fit-lo", f.acf_fit_lo,
                                      "ACF fit range lower lag");
    o["acf-fit-hi"] = cmd->add_option("--acf-fit-hi", f.acf_fit_hi,
                                      "ACF fit range upper lag");
    o["hill-fraction"] = cmd->add_option("--hill-fraction", f.hill_fraction,
                                         "tail fraction for the Hill check");
    o["relation-tol"] = cmd->add_option(
        "--relation-tol", f.relation_tol,
        "tolerance for the exponent-relation report");
    o["fit-range-V"] = cmd->add_option("--fit-range-V", f.fit_V,
                                       "fixed fit window for P(V): LO HI")
                           ->expected(2);
    o["fit-range-N"] = cmd->add_option("--fit-range-N", f.fit_N,
                                       "fixed fit window for P(N): LO HI")
                           ->expected(2);
    o["fit-range-r"] = cmd->add_option("--fit-range-r", f.fit_r,
                                       "fixed fit window for P(|r|): LO HI")
                           ->expected(2);
}

bool set(const SimFlags& f, const char* name) {
    auto it = f.opt.find(name);
    return it != f.opt.end() && it->second->count() > 0;
}

RunConfig build_config(const SimFlags& f) {
    RunConfig cfg;
    if (set(f, "config")) cfg = load_run_config(f.config_path);
    if (set(f, "out")) cfg.output_dir = f.out_dir;
    if (set(f, "kernel"))
        cfg.params.kernel =
            f.kernel == "rational" ? Kernel::Rational : Kernel::Exponential;
    if (set(f, "b")) cfg.params.b = f.b;
    if (set(f, "c")) cfg.params.c = f.c;
    if (set(f, "d")) cfg.params.d = f.d;
    if (set(f, "A")) cfg.params.A = f.A;
    if (set(f, "agents")) cfg.params.agents = static_cast<uint32_t>(f.agents);
    if (set(f, "seed")) cfg.params.seed = f.seed;
    if (set(f, "partner"))
        cfg.params.partner = f.partner == "uniform_cluster"
                                 ? PartnerSelection::UniformCluster
                                 : PartnerSelection::UniformAgent;
    if (set(f, "model"))
        cfg.model_mode = f.model == "interacting" ? ModelMode::Interacting
                                                  : ModelMode::EzBaseline;
    if (set(f, "ez-a")) cfg.ez_a = f.ez_a;
    if (set(f, "warmup")) cfg.warmup_steps = f.warmup;
    if (set(f, "steps")) cfg.measure_steps = f.steps;
    if (set(f, "record"))
        cfg.record_policy = f.record == "trades_only"
                                ? RecordPolicy::TradesOnly
                                : RecordPolicy::AllSteps;
    if (set(f, "checkpoint-interval"))
        cfg.checkpoint_interval = f.checkpoint_interval;
    if (set(f, "bins-per-decade"))
        cfg.analysis.bins_per_decade = f.bins_per_decade;
    if (set(f, "min-decades")) cfg.analysis.min_decades = f.min_decades;
    if (set(f, "min-r2")) cfg.analysis.min_r2 = f.min_r2;
    if (set(f, "acf")) cfg.analysis.compute_acf = f.acf;
    if (set(f, "acf-max-lag"))
        cfg.analysis.acf_max_lag = static_cast<uint32_t>(f.acf_max_lag);
    if (set(f, "acf-fit-lo"))
        cfg.analysis.acf_fit_lo = static_cast<uint32_t>(f.acf_fit_lo);
    if (set(f, "acf-fit-hi"))
        cfg.analysis.acf_fit_hi = static_cast<uint32_t>(f.acf_fit_hi);
    if (set(f, "hill-fraction"))
        cfg.analysis.hill_tail_fraction = f.hill_fraction;
    if (set(f, "relation-tol"))
        cfg.analysis.relation_tolerance = f.relation_tol;
    if (set(f, "fit-range-V"))
        cfg.analysis.fit_range_V = std::make_pair(f.fit_V[0], f.fit_V[1]);
    if (set(f, "fit-range-N"))
        cfg.analysis.fit_range_N = std::make_pair(f.fit_N[0], f.fit_N[1]);
    if (set(f, "fit-range-r"))
        cfg.analysis.fit_range_r = std::make_pair(f.fit_r[0], f.fit_r[1]);
    if (cfg.output_dir.empty())
        throw std::invalid_argument("--out (or output_dir in --config) is required");
    cfg.validate();
    return cfg;
}

void print_summary(const Summary& s, bool quiet) {
    if (quiet) return;
    std::printf("steps      %llu\n", (unsigned long long)s.steps);
    std::printf("trades     %llu\n", (unsigned long long)s.trades);
    auto line = [](const char* label, const TailSummary& t) {
        if (t.fit)
            std::printf("%s  %.4f +- %.4f  window [%.4g, %.4g]  r2=%.4f\n",
                        label, t.fit->exponent, t.fit->std_error, t.fit->fit_lo,
                        t.fit->fit_hi, t.fit->r_squared);
        else
            std::printf("%s  no power-law window\n", label);
    };
    line("xi_V ", s.V);
    line("xi_N ", s.N);
    line("xi_r ", s.absr);
    if (s.acf)
        std::printf("lambda %.4f +- %.4f  (tau in [%g, %g], r2=%.4f)\n",
                    s.acf->fit.exponent, s.acf->fit.std_error,
                    s.acf->fit.fit_lo, s.acf->fit.fit_hi,
                    s.acf->fit.r_squared);
    if (s.relation)
        std::printf("relation |xi_N-2xi_V|=%.3f |xi_r-xi_N|=%.3f -> %s\n",
                    s.relation->dev_N_2V, s.relation->dev_r_N,
                    s.relation->pass ? "pass" : "out of tolerance");
    std::printf("runtime    %.1f s\n", s.runtime_seconds);
}

void print_json_file(const std::filesystem::path& p) {
    std::fputs(read_text_file(p).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"volherd -- volume-interacting herding market simulator"};
    app.set_version_flag("--version", std::string(volherd::kVersion));
    app.require_subcommand(1);

    std::string kernel_impl = "auto";
    app.add_option("--kernel-impl", kernel_impl,
                   "arithmetic backend: auto, scalar or avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress human-readable output");

    // simulate ---------------------------------------------------------
    CLI::App* sim = app.add_subcommand("simulate", "run one simulation");
    sim->fallthrough();
    SimFlags sf;
    add_sim_flags(sim, sf);
    bool resume = false;
    sim->add_flag("--resume", resume,
                  "continue an interrupted run from its checkpoint (--out "
                  "names the run directory; other settings come from its "
                  "config.json)");
    bool sim_json = false;
    sim->add_flag("--json-summary", sim_json,
                  "print the JSON summary on stdout");

    // sweep ------------------------------------------------------------
    CLI::App* sw = app.add_subcommand(
        "sweep", "run one simulation per value of a parameter axis");
    sw->fallthrough();
    SimFlags wf;
    add_sim_flags(sw, wf);
    std::string axis;
    sw->add_option("--axis", axis, "swept parameter")
        ->required()
        ->check(CLI::IsMember({"b", "c", "d", "M", "A", "seed"}));
    std::vector<double> values;
    sw->add_option("--values", values, "comma-separated axis values")
        ->required()
        ->delimiter(',');

    // analyze ----------------------------------------------------------
    CLI::App* an = app.add_subcommand(
        "analyze", "re-run statistics on a persisted run directory");
    an->fallthrough();
    std::string input_dir;
    an->add_option("--input", input_dir,
                   "run directory holding config.json and events.txt")
        ->required()
        ->check(CLI::ExistingDirectory);
    bool an_json = false;
    an->add_flag("--json-summary", an_json,
                 "print the JSON summary on stdout");

    // reproduce --------------------------------------------------------
    CLI::App* rp = app.add_subcommand(
        "reproduce", "rerun a scripted figure target and export its data");
    rp->fallthrough();
    std::string figure, scale = "desk", rp_out;
    rp->add_option("--figure", figure, "figure target")
        ->required()
        ->check(CLI::IsMember({"fig1a", "fig1b", "fig2", "fig3", "fig4"}));
    rp->add_option("--scale", scale, "run scale: desk (minutes) or paper (hours)")
        ->check(CLI::IsMember({"desk", "paper"}));
    rp->add_option("--out", rp_out, "output directory")->required();
    uint64_t rp_agents = 0, rp_warmup = 0, rp_steps = 0;
    CLI::Option* oa = rp->add_option("--agents,--M", rp_agents,
                                     "override: number of agents");
    CLI::Option* ow = rp->add_option("--warmup", rp_warmup,
                                     "override: warmup steps");
    CLI::Option* os = rp->add_option("--steps", rp_steps,
                                     "override: measurement steps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help/version or the error
        return code == 0 ? 0 : 2;
    }

    if (!volherd::kern::select(kernel_impl)) {
        std::fprintf(stderr, "usage error: kernel backend '%s' is not available on this machine\n",
                     kernel_impl.c_str());
        return 2;
    }

    try {
        if (sim->parsed()) {
            RunArtifacts art;
            if (resume) {
                for (const auto& [name, opt] : sf.opt)
                    if (name != "out" && opt->count() > 0)
                        throw std::invalid_argument(
                            "--resume takes settings from the run directory; "
                            "--" + name + " conflicts with it");
                if (!set(sf, "out"))
                    throw std::invalid_argument("--resume requires --out");
                try {
                    art = resume_simulation(sf.out_dir);
                } catch (const std::invalid_argument&) {
                    throw;
                } catch (const std::exception& e) {
                    throw std::runtime_error(e.what());
                }
            } else {
                RunConfig cfg;
                try {
                    cfg = build_config(sf);
                } catch (const std::invalid_argument&) {
                    throw;
                } catch (const std::exception& e) {
                    // bad config file contents are a usage problem too
                    throw std::invalid_argument(e.what());
                }
                art = run_simulation(cfg);
            }
            print_summary(art.summary, quiet);
            if (!quiet)
                std::printf("artifacts in %s\n", art.output_dir.c_str());
            if (sim_json) print_json_file(art.summary_path);
        } else if (sw->parsed()) {
            RunConfig base;
            try {
                base = build_config(wf);
            } catch (const std::invalid_argument&) {
                throw;
            } catch (const std::exception& e) {
                throw std::invalid_argument(e.what());
            }
            auto rows = volherd::sweep(base, axis, values);
            write_sweep_table(base.output_dir / "sweep_table.txt", rows);
            bool all_ok = true;
            for (const auto& row : rows) {
                if (!row.ok) {
                    all_ok = false;
                    std::fprintf(stderr, "sweep %s=%g failed: %s\n",
                                 row.axis.c_str(), row.value,
                                 row.error.c_str());
                    continue;
                }
                if (!quiet) {
                    const Summary& s = *row.summary;
                    std::printf(
                        "%s=%-8g seed=%-12llu xi_V=%-8s xi_N=%-8s xi_r=%s\n",
                        row.axis.c_str(), row.value,
                        (unsigned long long)row.seed,
                        s.V.fit ? std::to_string(s.V.fit->exponent).c_str()
                                : "none",
                        s.N.fit ? std::to_string(s.N.fit->exponent).c_str()
                                : "none",
                        s.absr.fit
                            ? std::to_string(s.absr.fit->exponent).c_str()
                            : "none");
                }
            }
            if (!quiet)
                std::printf("table: %s\n",
                            (base.output_dir / "sweep_table.txt").c_str());
            if (!all_ok) throw std::runtime_error("one or more sweep runs failed");
        } else if (an->parsed()) {
            const Summary s = volherd::analyze(input_dir);
            print_summary(s, quiet);
            if (an_json)
                print_json_file(std::filesystem::path(input_dir) /
                                "summary.json");
        } else if (rp->parsed()) {
            static const std::map<std::string, Figure> fig_map = {
                {"fig1a", Figure::Fig1a},
                {"fig1b", Figure::Fig1b},
                {"fig2", Figure::Fig2},
                {"fig3", Figure::Fig3},
                {"fig4", Figure::Fig4}};
            const int n_over =
                (oa->count() ? 1 : 0) + (ow->count() ? 1 : 0) +
                (os->count() ? 1 : 0);
            std::optional<ScaleOverride> over;
            if (n_over == 3)
                over = ScaleOverride{static_cast<uint32_t>(rp_agents),
                                     rp_warmup, rp_steps};
            else if (n_over != 0)
                throw std::invalid_argument(
                    "--agents, --warmup and --steps override the scale "
                    "together; give all three or none");
            const auto files = reproduce_figure(
                fig_map.at(figure),
                scale == "paper" ? Scale::Paper : Scale::Desk, rp_out, over);
            if (!quiet)
                for (const auto& f : files)
                    std::printf("wrote %s\n", f.c_str());
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
