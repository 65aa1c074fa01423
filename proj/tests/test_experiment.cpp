#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "volherd/experiment.hpp"
#include "volherd/io.hpp"
#include "volherd/rng.hpp"

using namespace volherd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("volherd_exp_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// summary.json modulo the wall-clock field
std::string scrub_runtime(std::string s) {
    const auto pos = s.find("\"runtime_seconds\"");
    if (pos != std::string::npos) s.erase(pos, s.find('\n', pos) - pos);
    return s;
}

// small but statistically alive: thousands of trades in a few tens of ms
RunConfig small_config(const fs::path& out) {
    RunConfig cfg;
    cfg.params.agents = 2000;
    cfg.params.b = 0.45;
    cfg.params.seed = 99;
    cfg.warmup_steps = 2000;
    cfg.measure_steps = 50000;
    cfg.output_dir = out;
    cfg.analysis.min_decades = 1.0;
    cfg.analysis.acf_max_lag = 100;
    cfg.analysis.acf_fit_hi = 100;
    return cfg;
}

}  // namespace

TEST_CASE("a run writes the artifact set and twins are byte-identical") {
    TempDir tmp;
    const RunConfig cfg = small_config(tmp.path / "a");
    const RunArtifacts a = run_simulation(cfg);

    for (const char* name :
         {"events.txt", "summary.json", "summary.txt", "metadata.json",
          "config.json", "pdf_V.txt", "pdf_N.txt", "pdf_absr.txt",
          "acf.txt"}) {
        CAPTURE(name);
        CHECK(fs::exists(tmp.path / "a" / name));
    }
    CHECK_FALSE(fs::exists(tmp.path / "a" / "partial.marker"));
    CHECK_FALSE(fs::exists(tmp.path / "a" / "checkpoint.bin"));

    CHECK(a.summary.steps == cfg.measure_steps);
    CHECK(a.summary.trades > 1000);
    CHECK(read_events(a.events_path).size() == a.summary.trades);
    CHECK(a.summary.V.samples == a.summary.trades);

    RunConfig twin = cfg;
    twin.output_dir = tmp.path / "b";
    run_simulation(twin);
    CHECK(slurp(tmp.path / "a" / "events.txt") ==
          slurp(tmp.path / "b" / "events.txt"));
    CHECK(scrub_runtime(slurp(tmp.path / "a" / "summary.json")) ==
          scrub_runtime(slurp(tmp.path / "b" / "summary.json")));
}

TEST_CASE("analyze reproduces the summary from the event stream alone") {
    TempDir tmp;
    const RunConfig cfg = small_config(tmp.path / "run");
    run_simulation(cfg);

    const std::string before = slurp(tmp.path / "run" / "summary.json");
    analyze(tmp.path / "run");
    const std::string after = slurp(tmp.path / "run" / "summary.json");
    CHECK(scrub_runtime(before) == scrub_runtime(after));
}

TEST_CASE("record policy does not change the statistics") {
    TempDir tmp;
    RunConfig trades = small_config(tmp.path / "trades");
    RunConfig all = small_config(tmp.path / "all");
    all.record_policy = RecordPolicy::AllSteps;

    const RunArtifacts at = run_simulation(trades);
    const RunArtifacts aa = run_simulation(all);

    // all-steps stream carries one row per measurement step
    const auto rows = read_events(aa.events_path);
    CHECK(rows.size() == all.measure_steps);
    uint64_t traded = 0;
    for (const auto& row : rows) {
        if (row.traded) {
            ++traded;
        } else {
            CHECK(row.V == 0.0);
            CHECK(row.N == 0);
            CHECK(row.r == 0.0);
        }
    }
    CHECK(traded == aa.summary.trades);
    CHECK(aa.summary.trades == at.summary.trades);

    // same dynamics, same samples: summaries agree bit for bit
    CHECK(scrub_runtime(slurp(tmp.path / "trades" / "summary.json")) ==
          scrub_runtime(slurp(tmp.path / "all" / "summary.json")));

    // and the all-steps stream rebuilds to the same summary on re-analysis
    const std::string before = slurp(tmp.path / "all" / "summary.json");
    analyze(tmp.path / "all");
    CHECK(scrub_runtime(before) ==
          scrub_runtime(slurp(tmp.path / "all" / "summary.json")));
}

TEST_CASE("config json round trip preserves every field") {
    RunConfig cfg;
    cfg.params.agents = 123;
    cfg.params.kernel = Kernel::Exponential;
    cfg.params.b = 0.37;
    cfg.params.c = 0.8;
    cfg.params.d = 1.7;
    cfg.params.A = 30.0;
    cfg.params.seed = 77;
    cfg.params.partner = PartnerSelection::UniformAgent;
    cfg.warmup_steps = 11;
    cfg.measure_steps = 222;
    cfg.record_policy = RecordPolicy::AllSteps;
    cfg.output_dir = "/tmp/somewhere/else";
    cfg.checkpoint_interval = 5000;
    cfg.model_mode = ModelMode::EzBaseline;
    cfg.ez_a = 0.25;
    cfg.analysis.bins_per_decade = 25;
    cfg.analysis.min_decades = 1.5;
    cfg.analysis.min_r2 = 0.95;
    cfg.analysis.compute_acf = false;
    cfg.analysis.acf_max_lag = 500;
    cfg.analysis.acf_fit_lo = 2;
    cfg.analysis.acf_fit_hi = 300;
    cfg.analysis.hill_tail_fraction = 0.02;
    cfg.analysis.relation_tolerance = 0.4;
    cfg.analysis.fit_range_V = {1.0, 100.0};
    cfg.analysis.fit_range_N = {2.0, 50.0};
    cfg.analysis.fit_range_r = {0.5, 20.0};

    const RunConfig back = run_config_from_json(run_config_to_json(cfg));
    CHECK(back == cfg);

    // defaults survive a round trip too
    const RunConfig defaults = run_config_from_json(
        run_config_to_json(RunConfig{}));
    CHECK(defaults == RunConfig{});
}

TEST_CASE("config json rejects unknown keys and bad words") {
    const std::string base = run_config_to_json(RunConfig{});

    auto with = [&](const std::string& needle, const std::string& repl) {
        std::string s = base;
        const auto pos = s.find(needle);
        REQUIRE(pos != std::string::npos);
        s.replace(pos, needle.size(), repl);
        return s;
    };

    // unknown keys at each level of the schema
    CHECK_THROWS_AS(
        run_config_from_json(with("\"mode\"", "\"turbo\": 1, \"mode\"")),
        std::runtime_error);
    CHECK_THROWS_AS(
        run_config_from_json(with("\"agents\"", "\"mass\": 1, \"agents\"")),
        std::runtime_error);
    CHECK_THROWS_AS(
        run_config_from_json(
            with("\"bins_per_decade\"", "\"smoothing\": 1, \"bins_per_decade\"")),
        std::runtime_error);

    // unknown enum words
    CHECK_THROWS_AS(run_config_from_json(with("\"rational\"", "\"cubic\"")),
                    std::runtime_error);
    CHECK_THROWS_AS(
        run_config_from_json(with("\"interacting\"", "\"quantum\"")),
        std::runtime_error);
    CHECK_THROWS_AS(
        run_config_from_json(with("\"trades_only\"", "\"sometimes\"")),
        std::runtime_error);
    CHECK_THROWS_AS(
        run_config_from_json(with("\"uniform_cluster\"", "\"nearest\"")),
        std::runtime_error);

    // not JSON at all
    CHECK_THROWS(run_config_from_json("{not json"));
}

TEST_CASE("config validation rejects out-of-range knobs") {
    const RunConfig good = small_config("/tmp/unused");
    CHECK_NOTHROW(good.validate());

    auto reject = [&](auto&& tweak) {
        RunConfig cfg = good;
        tweak(cfg);
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    };
    reject([](RunConfig& c) { c.measure_steps = 0; });
    reject([](RunConfig& c) { c.output_dir.clear(); });
    reject([](RunConfig& c) { c.checkpoint_interval = 0; });
    reject([](RunConfig& c) {
        c.model_mode = ModelMode::EzBaseline;
        c.ez_a = 0.0;
    });
    reject([](RunConfig& c) {
        c.model_mode = ModelMode::EzBaseline;
        c.ez_a = 1.5;
    });
    reject([](RunConfig& c) { c.analysis.bins_per_decade = 0; });
    reject([](RunConfig& c) { c.analysis.min_decades = 0.0; });
    reject([](RunConfig& c) { c.analysis.min_r2 = 1.5; });
    reject([](RunConfig& c) { c.analysis.acf_fit_lo = 0; });
    reject([](RunConfig& c) {
        c.analysis.acf_fit_lo = 10;
        c.analysis.acf_fit_hi = 10;
    });
    reject([](RunConfig& c) { c.analysis.hill_tail_fraction = 0.6; });
    reject([](RunConfig& c) { c.analysis.relation_tolerance = 0.0; });
    reject([](RunConfig& c) { c.analysis.fit_range_V = {5.0, 2.0}; });
    reject([](RunConfig& c) { c.params.b = -0.1; });
}

TEST_CASE("an interrupted run resumes to byte-identical artifacts") {
    TempDir tmp;
    // uninterrupted reference
    const RunConfig ref = small_config(tmp.path / "ref");
    run_simulation(ref);

    // construct the on-disk state a crash would leave: config written,
    // marker present, a checkpoint at step 1700, and event rows beyond it
    // that never made it into any checkpoint
    RunConfig crash = ref;
    crash.output_dir = tmp.path / "crash";
    crash.checkpoint_interval = 7000;
    fs::create_directories(crash.output_dir);
    const std::string cfg_json = run_config_to_json(crash);
    write_text_file(crash.output_dir / "config.json", cfg_json);
    write_text_file(crash.output_dir / "partial.marker",
                    "run in flight or aborted\n");

    Market market(crash.params);
    for (uint64_t k = 0; k < crash.warmup_steps; ++k) market.step();
    {
        EventWriter events(crash.output_dir / "events.txt");
        for (uint64_t done = 0; done < 2500; ++done) {
            const StepOutcome o = market.step();
            if (o.trade)
                events.append({o.t, true, o.trade->V, o.trade->N, o.trade->Q,
                               o.trade->r});
            if (done + 1 == 1700) {
                events.flush();
                std::ostringstream os(std::ios::binary);
                market.save(os);
                Checkpoint ck;
                ck.identity_json = cfg_json;
                ck.measure_done = 1700;
                ck.events_offset = events.byte_offset();
                ck.market_blob = std::move(os).str();
                save_checkpoint(crash.output_dir / "checkpoint.bin", ck);
            }
        }
        events.flush();
    }

    // copies for the error-path checks below, taken before resuming
    fs::copy(crash.output_dir, tmp.path / "badcfg",
             fs::copy_options::recursive);
    fs::copy(crash.output_dir, tmp.path / "donecfg",
             fs::copy_options::recursive);

    const RunArtifacts res = resume_simulation(crash.output_dir);
    CHECK(res.summary.steps == crash.measure_steps);
    CHECK_FALSE(fs::exists(crash.output_dir / "partial.marker"));
    CHECK_FALSE(fs::exists(crash.output_dir / "checkpoint.bin"));

    // the rows past the checkpoint were truncated and re-simulated; the
    // result is indistinguishable from the run that never crashed
    CHECK(slurp(tmp.path / "ref" / "events.txt") ==
          slurp(crash.output_dir / "events.txt"));
    CHECK(scrub_runtime(slurp(tmp.path / "ref" / "summary.json")) ==
          scrub_runtime(slurp(crash.output_dir / "summary.json")));

    // a finished run has nothing to resume
    CHECK_THROWS_AS(resume_simulation(tmp.path / "ref"), std::runtime_error);

    // a checkpoint only resumes the exact config that produced it
    write_text_file(tmp.path / "badcfg" / "config.json",
                    cfg_json + " ");
    CHECK_THROWS_AS(resume_simulation(tmp.path / "badcfg"),
                    std::runtime_error);

    // a checkpoint that claims completion is refused, not re-finished
    Checkpoint done = load_checkpoint(tmp.path / "donecfg" /
                                      "checkpoint.bin");
    done.measure_done = crash.measure_steps;
    save_checkpoint(tmp.path / "donecfg" / "checkpoint.bin", done);
    CHECK_THROWS_AS(resume_simulation(tmp.path / "donecfg"),
                    std::runtime_error);
}

TEST_CASE("sweep runs independent children with derived seeds") {
    TempDir tmp;
    RunConfig base = small_config(tmp.path / "sweep");
    base.measure_steps = 20000;

    const std::vector<double> bs = {0.30, 0.45};
    const auto rows = sweep(base, "b", bs);
    REQUIRE(rows.size() == 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        CAPTURE(i);
        CHECK(rows[i].ok);
        CHECK(rows[i].axis == "b");
        CHECK(rows[i].value == bs[i]);
        CHECK(rows[i].seed == derive_seed(base.params.seed, i));
        CHECK(fs::exists(rows[i].run_dir / "summary.json"));
        REQUIRE(rows[i].summary.has_value());
        CHECK(rows[i].summary->trades > 100);
        CHECK_FALSE(rows[i].summary->acf.has_value());  // sweeps skip the ACF
    }
    CHECK(rows[0].run_dir != rows[1].run_dir);
    CHECK(rows[0].seed != rows[1].seed);

    // seed axis: the value is the seed itself
    const std::vector<double> seeds = {11.0, 12.0};
    const auto srows = sweep(base, "seed", seeds);
    REQUIRE(srows.size() == 2);
    CHECK(srows[0].seed == 11);
    CHECK(srows[1].seed == 12);
    CHECK(slurp(srows[0].run_dir / "events.txt") !=
          slurp(srows[1].run_dir / "events.txt"));

    write_sweep_table(tmp.path / "table.txt", srows);
    const std::string table = slurp(tmp.path / "table.txt");
    CHECK(table.find("seed") != std::string::npos);

    // a failing child reports its error and leaves the others alone
    const std::vector<double> mixed = {0.45, -0.5};
    const auto mrows = sweep(base, "b", mixed);
    REQUIRE(mrows.size() == 2);
    CHECK(mrows[0].ok);
    CHECK_FALSE(mrows[1].ok);
    CHECK_FALSE(mrows[1].error.empty());

    CHECK_THROWS_AS(sweep(base, "alpha", bs), std::invalid_argument);
}

TEST_CASE("baseline mode runs through the harness") {
    TempDir tmp;
    RunConfig cfg = small_config(tmp.path / "ez");
    cfg.model_mode = ModelMode::EzBaseline;
    cfg.ez_a = 0.05;
    cfg.params.agents = 500;
    cfg.measure_steps = 20000;

    const RunArtifacts a = run_simulation(cfg);
    CHECK(a.summary.trades > 100);
    const auto rows = read_events(a.events_path);
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
        REQUIRE(row.traded);
        CHECK(row.V == static_cast<double>(row.N));  // dissolved size
        CHECK(row.r == row.V);
        CHECK(row.Q == 0.0);
    }
}

TEST_CASE("figure reproduction emits plot-ready files") {
    TempDir tmp;
    const ScaleOverride tiny{2000, 1000, 20000};
    const auto files = reproduce_figure(Figure::Fig1a, Scale::Desk,
                                        tmp.path / "fig", tiny);
    CHECK(files.size() >= 3);
    for (const auto& f : files) {
        CAPTURE(f.string());
        CHECK(fs::exists(f));
    }
    for (const char* label : {"b0.30", "b0.45", "b0.60"}) {
        CAPTURE(label);
        CHECK(fs::exists(tmp.path / "fig" /
                         ("fig1a_" + std::string(label) + "_pdf_V.txt")));
        CHECK(fs::exists(tmp.path / "fig" / "runs" / label / "summary.json"));
    }
}
