#include "volherd/model.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>

#include "volherd/detail/exp_core.hpp"
#include "volherd/kernels.hpp"

namespace volherd {

void ModelParams::validate() const {
    if (agents < 2) throw std::invalid_argument("agents must be at least 2");
    if (kernel == Kernel::Rational) {
        if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
    } else {
        if (!(c > 0.0) || c > 1.0)
            throw std::invalid_argument("c must be in (0, 1]");
        if (!(d > 0.0)) throw std::invalid_argument("d must be positive");
    }
    if (!(A > 0.0)) throw std::invalid_argument("A must be positive");
    if (rng_algorithm != kRngAlgorithm)
        throw std::invalid_argument("unsupported rng algorithm: " +
                                    rng_algorithm);
}

double trading_probability(const ModelParams& params, double V_prev,
                           double v_last) {
    if (!(V_prev > 0.0) || !(v_last > 0.0))
        throw std::domain_error("trading_probability needs positive volumes");
    double a;
    if (params.kernel == Kernel::Rational) {
        // Same grouping as the rational refresh kernel: the denominator is
        // exactly the volume the agent would trade with.
        const double z = params.b * V_prev;
        a = 1.0 / (1.0 + z / v_last);
    } else {
        const double ratio = v_last / V_prev;
        const double e = kern::detail::exp_core(-(params.d * ratio));
        a = 1.0 - params.c * e;
        if (a < kern::kMinTradingProb) a = kern::kMinTradingProb;
    }
    return a;
}

double price_return(double Q, uint32_t N, double A) {
    if (Q == 0.0) return 0.0;
    const double sq = std::sqrt(std::fabs(Q));
    const double mag = (sq / (sq + A)) * std::sqrt(static_cast<double>(N));
    return Q < 0.0 ? -mag : mag;
}

Market::Market(const ModelParams& params)
    : params_((params.validate(), params)),
      volume_(params.agents, 1.0),
      part_(params.agents),
      rng_(params.seed) {
    // Initial signs, one per singleton cluster, in agent order.
    for (uint32_t i = 0; i < params_.agents; ++i)
        part_.set_sign(i, rng_.next_sign());
}

AgentState Market::agent(uint32_t i) const {
    const cluster_id c = part_.cluster_of(i);
    return AgentState{part_.sign(c), volume_[i], c};
}

TradeRecord Market::execute_trade(cluster_id ca, cluster_id cb) {
    const bool lone = (cb == ca);
    const std::span<const uint32_t> ma = part_.members(ca);
    const std::span<const uint32_t> mb =
        lone ? std::span<const uint32_t>{} : part_.members(cb);
    const size_t na = ma.size();
    const size_t nb = mb.size();

    vin_.resize(na + nb);
    vout_.resize(na + nb);
    for (size_t k = 0; k < na; ++k) vin_[k] = volume_[ma[k]];
    for (size_t k = 0; k < nb; ++k) vin_[na + k] = volume_[mb[k]];

    // Per-cluster block sums: V and Q are then combined from the same two
    // partials, so |Q| <= V holds bitwise, not just in exact arithmetic.
    double Va, Vb = 0.0;
    if (params_.kernel == Kernel::Rational) {
        const double z = params_.b * V_last_;
        Va = kern::refresh_volumes_rational(vin_.data(), vout_.data(), na, z);
        if (nb)
            Vb = kern::refresh_volumes_rational(vin_.data() + na,
                                                vout_.data() + na, nb, z);
    } else {
        Va = kern::refresh_volumes_exponential(vin_.data(), vout_.data(), na,
                                               params_.c, params_.d, V_last_);
        if (nb)
            Vb = kern::refresh_volumes_exponential(vin_.data() + na,
                                                   vout_.data() + na, nb,
                                                   params_.c, params_.d,
                                                   V_last_);
    }

    const double sa = static_cast<double>(part_.sign(ca));
    const double V = lone ? Va : Va + Vb;
    const double Q =
        lone ? sa * Va : sa * Va + static_cast<double>(part_.sign(cb)) * Vb;
    TradeRecord rec;
    rec.V = V;
    rec.N = static_cast<uint32_t>(na + nb);
    rec.Q = Q;
    rec.r = price_return(Q, rec.N, params_.A);

    for (size_t k = 0; k < na; ++k) volume_[ma[k]] = vout_[k];
    for (size_t k = 0; k < nb; ++k) volume_[mb[k]] = vout_[na + k];

    // Shatter and re-sign: ca's members first, then cb's, in member order.
    part_.shatter(ca, fresh_);
    for (cluster_id id : fresh_) part_.set_sign(id, rng_.next_sign());
    if (!lone) {
        part_.shatter(cb, fresh_);
        for (cluster_id id : fresh_) part_.set_sign(id, rng_.next_sign());
    }

    V_last_ = V;
    return rec;
}

StepOutcome Market::step() {
    const uint32_t i = static_cast<uint32_t>(rng_.next_below(params_.agents));
    const cluster_id ca = part_.cluster_of(i);
    const double a = trading_probability(params_, V_last_, volume_[i]);
    const double u = rng_.next_double();

    StepOutcome out;
    if (u < a) {
        cluster_id cb = ca;
        const uint32_t nlive = part_.cluster_count();
        if (nlive > 1) {
            if (params_.partner == PartnerSelection::UniformCluster) {
                // One draw over the other nlive-1 clusters: map a hit on
                // ca's own live index to the last one.
                uint32_t k = static_cast<uint32_t>(rng_.next_below(nlive - 1));
                if (k == part_.live_index_of(ca)) k = nlive - 1;
                cb = part_.live_at(k);
            } else {
                uint32_t j;
                do {
                    j = static_cast<uint32_t>(rng_.next_below(params_.agents));
                } while (part_.cluster_of(j) == ca);
                cb = part_.cluster_of(j);
            }
        }
        out.traded = true;
        out.trade = execute_trade(ca, cb);
    } else {
        const uint32_t j =
            static_cast<uint32_t>(rng_.next_below(params_.agents));
        const cluster_id cj = part_.cluster_of(j);
        if (cj != ca) part_.merge(ca, cj);  // i's cluster first: tie-break
    }
    out.t = ++t_;
    return out;
}

StepOutcome Market::ez_step(double a) {
    if (!(a > 0.0) || a > 1.0)
        throw std::domain_error("ez_step probability must be in (0, 1]");
    const uint32_t i = static_cast<uint32_t>(rng_.next_below(params_.agents));
    const cluster_id ca = part_.cluster_of(i);
    const double u = rng_.next_double();

    StepOutcome out;
    if (u < a) {
        const uint32_t s = part_.size(ca);
        part_.shatter(ca, fresh_);  // baseline mode: no sign draws
        TradeRecord rec;
        rec.V = static_cast<double>(s);
        rec.N = s;
        rec.Q = 0.0;
        rec.r = static_cast<double>(s);
        out.traded = true;
        out.trade = rec;
    } else {
        const uint32_t j =
            static_cast<uint32_t>(rng_.next_below(params_.agents));
        const cluster_id cj = part_.cluster_of(j);
        if (cj != ca) part_.merge(ca, cj);
    }
    out.t = ++t_;
    return out;
}

namespace {

constexpr char kMagic[4] = {'V', 'H', 'M', 'S'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("market snapshot truncated");
}

}  // namespace

void Market::save(std::ostream& os) const {
    os.write(kMagic, sizeof kMagic);
    write_pod(os, kVersion);
    write_pod(os, params_.agents);
    write_pod(os, static_cast<uint8_t>(params_.kernel));
    write_pod(os, static_cast<uint8_t>(params_.partner));
    write_pod(os, params_.b);
    write_pod(os, params_.c);
    write_pod(os, params_.d);
    write_pod(os, params_.A);
    write_pod(os, params_.seed);
    const uint32_t alg_len = static_cast<uint32_t>(params_.rng_algorithm.size());
    write_pod(os, alg_len);
    os.write(params_.rng_algorithm.data(), alg_len);
    write_pod(os, t_);
    write_pod(os, V_last_);
    const uint64_t n = volume_.size();
    write_pod(os, n);
    os.write(reinterpret_cast<const char*>(volume_.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
    part_.save(os);
    rng_.save(os);
    if (!os) throw std::runtime_error("market snapshot write failed");
}

Market Market::load(std::istream& is) {
    char magic[4];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("not a market snapshot");
    uint32_t version;
    read_pod(is, version);
    if (version != kVersion)
        throw std::runtime_error("unsupported market snapshot version");

    ModelParams p;
    read_pod(is, p.agents);
    uint8_t kernel_tag, partner_tag;
    read_pod(is, kernel_tag);
    read_pod(is, partner_tag);
    if (kernel_tag > 1 || partner_tag > 1)
        throw std::runtime_error("market snapshot corrupt");
    p.kernel = static_cast<Kernel>(kernel_tag);
    p.partner = static_cast<PartnerSelection>(partner_tag);
    read_pod(is, p.b);
    read_pod(is, p.c);
    read_pod(is, p.d);
    read_pod(is, p.A);
    read_pod(is, p.seed);
    uint32_t alg_len;
    read_pod(is, alg_len);
    if (alg_len > 256) throw std::runtime_error("market snapshot corrupt");
    p.rng_algorithm.resize(alg_len);
    is.read(p.rng_algorithm.data(), alg_len);
    if (!is) throw std::runtime_error("market snapshot truncated");
    p.validate();

    Market m(p);
    read_pod(is, m.t_);
    read_pod(is, m.V_last_);
    uint64_t n;
    read_pod(is, n);
    if (n != p.agents) throw std::runtime_error("market snapshot corrupt");
    is.read(reinterpret_cast<char*>(m.volume_.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("market snapshot truncated");
    m.part_ = ClusterPartition::load(is);
    if (m.part_.agent_count() != p.agents)
        throw std::runtime_error("market snapshot corrupt");
    m.rng_.load(is);
    return m;
}

bool Market::operator==(const Market& other) const {
    return params_ == other.params_ && t_ == other.t_ &&
           V_last_ == other.V_last_ && volume_ == other.volume_ &&
           part_ == other.part_ && rng_ == other.rng_;
}

}  // namespace volherd
