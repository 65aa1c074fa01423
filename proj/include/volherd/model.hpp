// Volume-interacting herding market: seeded, deterministic state machine.
//
// Two trading-probability kernels are supported:
//   Rational:     a = 1 / (1 + b * V(t-1) / v_i)
//   Exponential:  a = 1 - c * exp(-d * v_i / V(t-1))
// Both decrease in V(t-1)/v_i: a large market volume suppresses trading
// (information spreads, clusters grow), a large own volume encourages it.
// An agent's trading volume is the reciprocal of its trading probability,
// v_i = 1/a_i, evaluated with the total volume of the previous trade.
//
// Determinism contract: (params, seed) fully determines the trajectory,
// bitwise, independent of the selected kernel backend. All random draws
// happen in a pinned order (documented per operation below); floating-point
// reductions go through the kernels' fixed 4-lane order.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "volherd/partition.hpp"
#include "volherd/rng.hpp"

namespace volherd {

enum class Kernel : uint8_t { Rational = 0, Exponential = 1 };

// How the trade partner cluster is chosen: uniformly over cluster ids
// (default reading of "another randomly selected cluster"), or via a
// uniformly drawn agent, which weights clusters by size. The latter exists
// for sensitivity checks only.
enum class PartnerSelection : uint8_t { UniformCluster = 0, UniformAgent = 1 };

struct ModelParams {
    uint32_t agents = 2;
    Kernel kernel = Kernel::Rational;
    double b = 0.45;  // rational kernel strength
    double c = 1.0;   // exponential kernel amplitude, must stay in (0,1]
    double d = 2.0;   // exponential kernel decay rate
    double A = 50.0;  // price-impact saturation constant
    uint64_t seed = 0;
    PartnerSelection partner = PartnerSelection::UniformCluster;
    std::string rng_algorithm = std::string(kRngAlgorithm);

    // Throws std::invalid_argument on out-of-range values.
    void validate() const;

    bool operator==(const ModelParams&) const = default;
};

// Read-only view of one agent.
struct AgentState {
    int sign = 0;                    // +1 or -1, shared with its cluster
    double last_trade_volume = 1.0;  // v_i at the agent's most recent trade
    ClusterPartition::cluster_id cluster = 0;
};

struct TradeRecord {
    double V = 0.0;   // total trading volume of the event
    uint32_t N = 0;   // number of trading agents
    double Q = 0.0;   // signed volume imbalance
    double r = 0.0;   // price return
};

struct StepOutcome {
    uint64_t t = 0;  // step counter after this step (first step reports 1)
    bool traded = false;
    std::optional<TradeRecord> trade;  // engaged exactly when traded
};

// Trading probability of one agent given the previous total volume. The
// exponential kernel is clamped below at kern::kMinTradingProb so that the
// reciprocal volume stays finite; the op sequence matches the refresh
// kernels bitwise. Throws std::domain_error on non-positive inputs.
double trading_probability(const ModelParams& params, double V_prev,
                           double v_last);

// r = Sign(Q) * (sqrt|Q| / (sqrt|Q| + A)) * sqrt(N), with Sign(0) = 0.
double price_return(double Q, uint32_t N, double A);

class Market {
  public:
    using cluster_id = ClusterPartition::cluster_id;

    // Builds the initial state: M singleton clusters, every volume 1,
    // V_last = 1, t = 0, signs drawn uniformly in agent order.
    explicit Market(const ModelParams& params);

    // One step of the volume-interacting dynamics. Draw order: agent i,
    // then the branch uniform u; the trade branch draws the partner cluster
    // (single index draw, or agent rejection draws under UniformAgent), the
    // merge branch draws agent j. With probability a_i the trade executes;
    // otherwise i's and j's clusters merge (no-op when they coincide).
    // V_last changes only on trades (carry-forward rule).
    StepOutcome step();

    // One step of the plain herding baseline: no signs, no volumes. With
    // probability a the selected cluster trades (its size is the event) and
    // shatters without sign draws; otherwise a merge attempt as in step().
    // Records V = N = |r| = cluster size, Q = 0. Throws std::domain_error
    // unless a is in (0,1].
    StepOutcome ez_step(double a);

    // Executes a trade of clusters ca and cb: refreshes every member's
    // volume from its own trading probability, accumulates V and Q in the
    // pinned per-cluster reduction order, shatters both clusters and draws
    // fresh signs (ca's members first, then cb's, in member order). Pass
    // ca == cb only for the degenerate lone-cluster trade. Does not touch t.
    TradeRecord execute_trade(cluster_id ca, cluster_id cb);

    const ModelParams& params() const { return params_; }
    uint64_t t() const { return t_; }
    // Total volume of the most recent trade, V(t-1) for the next step.
    double last_total_volume() const { return V_last_; }
    uint32_t agent_count() const { return part_.agent_count(); }
    AgentState agent(uint32_t i) const;
    const ClusterPartition& partition() const { return part_; }

    // Versioned binary snapshot: params, counters, volumes, partition and
    // RNG state. load() throws std::runtime_error on malformed input or an
    // RNG algorithm mismatch.
    void save(std::ostream& os) const;
    static Market load(std::istream& is);

    bool operator==(const Market& other) const;

  private:
    ModelParams params_;
    uint64_t t_ = 0;
    double V_last_ = 1.0;
    std::vector<double> volume_;  // per-agent v_i at its last trade
    ClusterPartition part_;
    Xoshiro256pp rng_;

    // Trade scratch, reused across steps; never part of the logical state.
    std::vector<double> vin_, vout_;
    std::vector<cluster_id> fresh_;
};

}  // namespace volherd
