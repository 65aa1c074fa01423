#include "volherd/partition.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace volherd {

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("partition snapshot truncated");
    return v;
}

template <typename T>
void write_vec(std::ostream& os, const std::vector<T>& v) {
    write_pod(os, static_cast<uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vec(std::istream& is) {
    const auto n = read_pod<uint64_t>(is);
    // A length field larger than the bytes actually present is malformed
    // input; check before allocating so garbage cannot ask for gigabytes.
    const auto pos = is.tellg();
    if (pos != std::streampos(-1)) {
        is.seekg(0, std::ios::end);
        const auto end = is.tellg();
        is.seekg(pos);
        if (end != std::streampos(-1) &&
            n > static_cast<uint64_t>(end - pos) / sizeof(T))
            throw std::runtime_error("partition snapshot inconsistent");
    }
    std::vector<T> v(n);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw std::runtime_error("partition snapshot truncated");
    return v;
}

}  // namespace

ClusterPartition::ClusterPartition(uint32_t n_agents)
    : members_(n_agents),
      agent_cluster_(n_agents),
      sign_(n_agents, 0),
      live_(n_agents),
      live_pos_(n_agents) {
    if (n_agents == 0) throw std::invalid_argument("partition needs agents");
    for (uint32_t i = 0; i < n_agents; ++i) {
        members_[i] = {i};
        agent_cluster_[i] = i;
        live_[i] = i;
        live_pos_[i] = i;
    }
}

ClusterPartition::cluster_id ClusterPartition::merge(cluster_id a,
                                                     cluster_id b) {
    if (a == b) return a;  // same cluster, nothing to merge
    cluster_id dst = a, src = b;
    if (members_[b].size() > members_[a].size()) {
        dst = b;
        src = a;
    }
    auto& into = members_[dst];
    auto& from = members_[src];
    into.reserve(into.size() + from.size());
    for (uint32_t agent : from) {
        agent_cluster_[agent] = dst;
        into.push_back(agent);
    }
    from.clear();

    // Remove src from the live list (swap with the tail).
    const uint32_t pos = live_pos_[src];
    const cluster_id tail = live_.back();
    live_[pos] = tail;
    live_pos_[tail] = pos;
    live_.pop_back();
    free_.push_back(src);
    return dst;
}

void ClusterPartition::shatter(cluster_id c, std::vector<cluster_id>& new_cids) {
    // Move the member list out first; the slot is recycled immediately, so
    // with LIFO reuse the first member lands back on the same slot.
    scratch_members_.swap(members_[c]);
    members_[c].clear();

    const uint32_t pos = live_pos_[c];
    const cluster_id tail = live_.back();
    live_[pos] = tail;
    live_pos_[tail] = pos;
    live_.pop_back();
    free_.push_back(c);

    const int8_t old_sign = sign_[c];
    new_cids.clear();
    new_cids.reserve(scratch_members_.size());
    for (uint32_t agent : scratch_members_) {
        const cluster_id slot = free_.back();
        free_.pop_back();
        members_[slot].clear();
        members_[slot].push_back(agent);
        agent_cluster_[agent] = slot;
        sign_[slot] = old_sign;
        live_pos_[slot] = static_cast<uint32_t>(live_.size());
        live_.push_back(slot);
        new_cids.push_back(slot);
    }
    scratch_members_.clear();
}

bool ClusterPartition::validate() const {
    const uint32_t n = agent_count();
    if (live_.size() > n || live_.empty()) return false;
    uint64_t total = 0;
    std::vector<uint8_t> seen(n, 0);
    for (uint32_t idx = 0; idx < live_.size(); ++idx) {
        const cluster_id c = live_[idx];
        if (c >= n || live_pos_[c] != idx) return false;
        if (members_[c].empty()) return false;
        total += members_[c].size();
        for (uint32_t agent : members_[c]) {
            if (agent >= n || seen[agent] || agent_cluster_[agent] != c) {
                return false;
            }
            seen[agent] = 1;
        }
    }
    if (total != n) return false;
    if (live_.size() + free_.size() != n) return false;
    return true;
}

void ClusterPartition::save(std::ostream& os) const {
    write_pod(os, agent_count());
    write_vec(os, agent_cluster_);
    write_vec(os, sign_);
    write_vec(os, live_);
    write_vec(os, free_);
    for (const cluster_id c : live_) write_vec(os, members_[c]);
}

ClusterPartition ClusterPartition::load(std::istream& is) {
    ClusterPartition p;
    const auto n = read_pod<uint32_t>(is);
    p.agent_cluster_ = read_vec<uint32_t>(is);
    p.sign_ = read_vec<int8_t>(is);
    p.live_ = read_vec<cluster_id>(is);
    p.free_ = read_vec<cluster_id>(is);
    if (p.agent_cluster_.size() != n || p.sign_.size() != n) {
        throw std::runtime_error("partition snapshot inconsistent");
    }
    p.members_.resize(n);
    p.live_pos_.resize(n, 0);
    for (uint32_t idx = 0; idx < p.live_.size(); ++idx) {
        const cluster_id c = p.live_[idx];
        if (c >= n) throw std::runtime_error("partition snapshot inconsistent");
        p.live_pos_[c] = idx;
        p.members_[c] = read_vec<uint32_t>(is);
    }
    if (!p.validate()) throw std::runtime_error("partition snapshot inconsistent");
    return p;
}

bool ClusterPartition::operator==(const ClusterPartition& other) const {
    if (agent_cluster_ != other.agent_cluster_ || live_ != other.live_ ||
        free_ != other.free_) {
        return false;
    }
    for (const cluster_id c : live_) {
        if (members_[c] != other.members_[c] || sign_[c] != other.sign_[c])
            return false;
    }
    return true;
}

}  // namespace volherd
