#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace volherd {

// Dynamic partition of agents into clusters, tuned for the merge/shatter
// workload: clusters only ever grow by pairwise merge and dissolve back into
// singletons, so classic union-find (which cannot split) does not apply.
// Each cluster is an explicit member list; merge appends the smaller list
// onto the larger one (amortized O(min) index updates), shatter recycles
// slots through a LIFO free list so member-list capacity is reused.
//
// Live clusters are kept in a dense array for O(1) uniform sampling. All
// internal orderings (member order, live order, slot reuse) are deterministic
// functions of the operation history, which makes trajectories reproducible
// and lets snapshots restore the structure bit for bit.
class ClusterPartition {
public:
    using cluster_id = uint32_t;

    explicit ClusterPartition(uint32_t n_agents);

    uint32_t agent_count() const { return static_cast<uint32_t>(agent_cluster_.size()); }
    uint32_t cluster_count() const { return static_cast<uint32_t>(live_.size()); }

    cluster_id cluster_of(uint32_t agent) const { return agent_cluster_[agent]; }
    uint32_t size(cluster_id c) const { return static_cast<uint32_t>(members_[c].size()); }
    std::span<const uint32_t> members(cluster_id c) const { return members_[c]; }

    int8_t sign(cluster_id c) const { return sign_[c]; }
    void set_sign(cluster_id c, int8_t s) { sign_[c] = s; }

    // Dense live-cluster indexing for uniform sampling.
    cluster_id live_at(uint32_t idx) const { return live_[idx]; }
    uint32_t live_index_of(cluster_id c) const { return live_pos_[c]; }

    // Merges two clusters. The surviving cluster is the larger of the two
    // (first argument on a size tie), and it keeps its sign — callers pass
    // the cluster of the first-selected agent first so the tie-break is
    // "first-selected wins". Returns the surviving cluster id; O(min size)
    // member reassignments. merge(a, a) is a no-op returning a.
    cluster_id merge(cluster_id a, cluster_id b);

    // Dissolves a cluster into singletons. new_cids receives one fresh
    // cluster id per former member, in member order; the new clusters keep
    // the old sign until the caller reassigns it.
    void shatter(cluster_id c, std::vector<cluster_id>& new_cids);

    // Full structural consistency check (test/debug): every agent in exactly
    // one live cluster, sizes sum to the agent count, index maps coherent.
    bool validate() const;

    void save(std::ostream& os) const;
    static ClusterPartition load(std::istream& is);

    // Structural equality: same clusters in the same live order with the
    // same member order, same signs, same slot-recycling stack. Ignores
    // caches that are derivable or dead (live_pos_, freed slots' leftovers).
    bool operator==(const ClusterPartition& other) const;

private:
    ClusterPartition() = default;

    std::vector<std::vector<uint32_t>> members_;  // slot -> member agents
    std::vector<uint32_t> agent_cluster_;         // agent -> slot
    std::vector<int8_t> sign_;                    // slot -> cluster trade sign
    std::vector<cluster_id> live_;                // dense list of live slots
    std::vector<uint32_t> live_pos_;              // slot -> index in live_
    std::vector<cluster_id> free_;                // recycled slots, LIFO

    // shatter() parks the dying member list here so its slot can be recycled
    // mid-loop; always left empty, which keeps the defaulted == honest.
    std::vector<uint32_t> scratch_members_;
};

}  // namespace volherd
