#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "ehcr/types.hpp"

namespace ehcr {

// ---------------------------------------------------------------------------
// Counter-based PRNG: a splitmix64-style finalizer applied to (seed, stream,
// slot, draw). Every random decision category gets its own stream, so runs
// with matched seeds differ only where the policy makes them differ.
// ---------------------------------------------------------------------------

enum class Stream : std::uint64_t {
    pu_arrival = 1,
    su_arrival = 2,
    energy_arrival = 3,
    sense_decide = 4,
    sense_observe = 5,
    access = 6,
    pu_reception = 7,
    su_reception = 8,
};

struct CounterRng {
    std::uint64_t seed = 0;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform(Stream stream, std::uint64_t slot, std::uint64_t draw = 0) const {
        std::uint64_t z = mix(seed ^ mix(static_cast<std::uint64_t>(stream)));
        z = mix(z ^ mix(slot * 0x2545f4914f6cdd1dULL + draw));
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p, Stream stream, std::uint64_t slot, std::uint64_t draw = 0) const {
        return uniform(stream, slot, draw) < p;
    }
};

// ---------------------------------------------------------------------------
// Simulation configuration and report.
// ---------------------------------------------------------------------------

enum class EnergyModel { exact, md1_approx };
enum class Dominance { none, saturate_secondary, saturate_primary };

struct SimConfig {
    long long num_slots = 1000000;
    std::uint64_t seed = 1;
    bool feedback_enabled = false;
    EnergyModel energy_model = EnergyModel::exact;
    Dominance dominance = Dominance::none;
    long long warmup_slots = -1;  // negative: default 10% of num_slots

    long long effective_warmup() const {
        return warmup_slots >= 0 ? warmup_slots : num_slots / 10;
    }
    void validate() const {
        if (num_slots <= 0) throw std::invalid_argument("sim: num_slots must be positive");
        if (effective_warmup() >= num_slots)
            throw std::invalid_argument("sim: warmup must leave measurement slots");
    }
};

struct SimReport {
    long long slots = 0;
    long long warmup = 0;

    // Service rates: successes per slot with a head-of-line packet (dummy
    // packets from dominance modes count as service opportunities).
    double mu_p = 0.0, mu_s = 0.0;
    double mu_p_ci = 0.0, mu_s_ci = 0.0;  // 95% half-widths
    long long pu_busy_slots = 0, su_data_slots = 0;

    // Real-packet departures per measured slot; dummy packets excluded.
    double throughput_p = 0.0, throughput_s = 0.0;

    // Mean sojourn of real packets, in slots (arrival slot to departure slot).
    double delay_p = 0.0, delay_p_ci = 0.0;
    double delay_s = 0.0, delay_s_ci = 0.0;
    long long departed_p = 0, departed_s = 0;

    double empty_p_freq = 0.0, empty_s_freq = 0.0, empty_e_freq = 0.0;
    double mean_qp = 0.0, mean_qs = 0.0, mean_qe = 0.0;

    double qp_slope = 0.0, qs_slope = 0.0;  // regression over last half
    bool primary_stable = true, secondary_stable = true;

    // Slot-state histogram for feedback runs: queue length at slot start,
    // split by whether the slot is a retransmission slot. Tail lengths share
    // the last bucket.
    std::vector<double> state_freq_first;
    std::vector<double> state_freq_retx;
    long long state_slots = 0;
};

namespace detail {

struct SlopeTracker {
    long long start = 0, stop = 0;
    double n = 0, sum_t = 0, sum_q = 0, sum_tq = 0, sum_tt = 0;

    void observe(long long slot, double q) {
        if (slot < start || slot >= stop) return;
        double t = static_cast<double>(slot - start);
        n += 1;
        sum_t += t;
        sum_q += q;
        sum_tq += t * q;
        sum_tt += t * t;
    }
    double slope() const {
        double denom = n * sum_tt - sum_t * sum_t;
        if (denom <= 0.0) return 0.0;
        return (n * sum_tq - sum_t * sum_q) / denom;
    }
};

inline double ci_bernoulli(double p, double n) {
    if (n <= 0.0) return 0.0;
    return 1.96 * std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
}

}  // namespace detail

// Slot-level simulation of the shared-channel protocol. Per slot: transmit
// decisions from slot-start state, reception draws, feedback, energy
// bookkeeping, then Bernoulli arrivals (late-arrival queue model).
inline SimReport run(const SimConfig& config, const AccessPolicy& policy,
                     const SuccessProbs& probs, const Traffic& traffic) {
    config.validate();
    policy.validate();
    probs.validate();
    traffic.validate();

    CounterRng rng{config.seed};
    const long long warmup = config.effective_warmup();
    const long long measured = config.num_slots - warmup;

    std::deque<long long> qp_arrivals, qs_arrivals;  // arrival slots of real packets
    long long qe = 0;
    bool nack_pending = false;

    SimReport rep;
    rep.slots = config.num_slots;
    rep.warmup = warmup;
    constexpr int kStateBuckets = 64;
    rep.state_freq_first.assign(kStateBuckets, 0.0);
    rep.state_freq_retx.assign(kStateBuckets, 0.0);

    long long pu_success = 0, su_success = 0;
    long long real_dep_p = 0, real_dep_s = 0;
    double sum_delay_p = 0, sum_delay_p2 = 0, sum_delay_s = 0, sum_delay_s2 = 0;
    long long empty_p = 0, empty_s = 0, empty_e = 0;
    double sum_qp = 0, sum_qs = 0, sum_qe = 0;

    detail::SlopeTracker slope_p{config.num_slots / 2, config.num_slots};
    detail::SlopeTracker slope_s{config.num_slots / 2, config.num_slots};

    for (long long slot = 0; slot < config.num_slots; ++slot) {
        const bool measure = slot >= warmup;
        const long long qp = static_cast<long long>(qp_arrivals.size());
        const long long qs = static_cast<long long>(qs_arrivals.size());
        slope_p.observe(slot, static_cast<double>(qp));
        slope_s.observe(slot, static_cast<double>(qs));
        if (measure) {
            sum_qp += static_cast<double>(qp);
            sum_qs += static_cast<double>(qs);
            sum_qe += static_cast<double>(qe);
            if (qp == 0) ++empty_p;
            if (qs == 0) ++empty_s;
            if (qe == 0) ++empty_e;
        }

        // Primary transmit decision.
        const bool pu_has_real = qp > 0;
        const bool pu_transmits =
            pu_has_real || config.dominance == Dominance::saturate_primary;
        const bool retransmission_slot = config.feedback_enabled && nack_pending;

        if (measure && config.feedback_enabled) {
            int bucket = static_cast<int>(std::min<long long>(qp, kStateBuckets - 1));
            if (retransmission_slot) rep.state_freq_retx[bucket] += 1.0;
            else rep.state_freq_first[bucket] += 1.0;
            ++rep.state_slots;
        }

        // Secondary transmit decision: needs data (real or injected) and energy.
        const bool su_has_real = qs > 0;
        const bool su_has_data =
            su_has_real || config.dominance == Dominance::saturate_secondary;
        bool su_transmits = false;
        bool su_sensed = false;  // post-sensing transmission (shorter data phase)
        if (su_has_data && qe > 0) {
            if (retransmission_slot) {
                su_transmits = rng.bernoulli(policy.p_r, Stream::access, slot, 0);
            } else if (rng.bernoulli(policy.p_s, Stream::sense_decide, slot)) {
                su_sensed = true;
                double p_busy_obs = pu_transmits ? 1.0 - traffic.p_md : traffic.p_fa;
                bool observed_busy = rng.bernoulli(p_busy_obs, Stream::sense_observe, slot);
                double p_access = observed_busy ? policy.p_b : policy.p_f;
                su_transmits = rng.bernoulli(p_access, Stream::access, slot, 1);
            } else {
                su_transmits = rng.bernoulli(policy.p_t, Stream::access, slot, 2);
            }
        }

        // Reception draws.
        bool pu_ok = false, su_ok = false;
        if (pu_transmits) {
            double p = su_transmits ? probs.p_p_c : probs.p_p;
            pu_ok = rng.bernoulli(p, Stream::pu_reception, slot);
        }
        if (su_transmits) {
            double p;
            if (su_sensed) p = pu_transmits ? probs.p_1s_c : probs.p_1s;
            else p = pu_transmits ? probs.p_0s_c : probs.p_0s;
            su_ok = rng.bernoulli(p, Stream::su_reception, slot);
        }

        // Feedback: a NACK in this slot makes the next slot a retransmission.
        nack_pending = pu_transmits && !pu_ok;

        // Energy bookkeeping.
        if (config.energy_model == EnergyModel::exact) {
            if (su_transmits) --qe;
        } else {
            if (qe > 0) --qe;
        }

        // Departures and statistics.
        if (pu_transmits && measure) {
            ++rep.pu_busy_slots;
            if (pu_ok) ++pu_success;
        }
        if (pu_ok && pu_has_real) {
            long long sojourn = slot - qp_arrivals.front();
            qp_arrivals.pop_front();
            if (measure) {
                ++real_dep_p;
                sum_delay_p += static_cast<double>(sojourn);
                sum_delay_p2 += static_cast<double>(sojourn) * static_cast<double>(sojourn);
            }
        }
        if (su_has_data && measure) {
            ++rep.su_data_slots;
            if (su_ok) ++su_success;
        }
        if (su_ok && su_has_real) {
            long long sojourn = slot - qs_arrivals.front();
            qs_arrivals.pop_front();
            if (measure) {
                ++real_dep_s;
                sum_delay_s += static_cast<double>(sojourn);
                sum_delay_s2 += static_cast<double>(sojourn) * static_cast<double>(sojourn);
            }
        }

        // Late arrivals: appended after service, eligible from the next slot.
        if (rng.bernoulli(traffic.lambda_p, Stream::pu_arrival, slot)) qp_arrivals.push_back(slot);
        if (rng.bernoulli(traffic.lambda_s, Stream::su_arrival, slot)) qs_arrivals.push_back(slot);
        if (rng.bernoulli(traffic.lambda_e, Stream::energy_arrival, slot)) ++qe;
    }

    const double m = static_cast<double>(measured);
    rep.mu_p = rep.pu_busy_slots > 0 ? static_cast<double>(pu_success) / rep.pu_busy_slots : 0.0;
    rep.mu_s = rep.su_data_slots > 0 ? static_cast<double>(su_success) / rep.su_data_slots : 0.0;
    rep.mu_p_ci = detail::ci_bernoulli(rep.mu_p, static_cast<double>(rep.pu_busy_slots));
    rep.mu_s_ci = detail::ci_bernoulli(rep.mu_s, static_cast<double>(rep.su_data_slots));
    rep.throughput_p = static_cast<double>(real_dep_p) / m;
    rep.throughput_s = static_cast<double>(real_dep_s) / m;
    rep.departed_p = real_dep_p;
    rep.departed_s = real_dep_s;
    if (real_dep_p > 0) {
        double n = static_cast<double>(real_dep_p);
        rep.delay_p = sum_delay_p / n;
        double var = std::max(sum_delay_p2 / n - rep.delay_p * rep.delay_p, 0.0);
        rep.delay_p_ci = 1.96 * std::sqrt(var / n);
    }
    if (real_dep_s > 0) {
        double n = static_cast<double>(real_dep_s);
        rep.delay_s = sum_delay_s / n;
        double var = std::max(sum_delay_s2 / n - rep.delay_s * rep.delay_s, 0.0);
        rep.delay_s_ci = 1.96 * std::sqrt(var / n);
    }
    rep.empty_p_freq = static_cast<double>(empty_p) / m;
    rep.empty_s_freq = static_cast<double>(empty_s) / m;
    rep.empty_e_freq = static_cast<double>(empty_e) / m;
    rep.mean_qp = sum_qp / m;
    rep.mean_qs = sum_qs / m;
    rep.mean_qe = sum_qe / m;
    rep.qp_slope = slope_p.slope();
    rep.qs_slope = slope_s.slope();
    rep.primary_stable = rep.qp_slope <= 1e-3;
    rep.secondary_stable = rep.qs_slope <= 1e-3;
    if (rep.state_slots > 0) {
        for (auto& v : rep.state_freq_first) v /= static_cast<double>(rep.state_slots);
        for (auto& v : rep.state_freq_retx) v /= static_cast<double>(rep.state_slots);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Empirical stability boundary along the secondary arrival axis: bisection on
// lambda_s with a queue-growth test at each probe.
// ---------------------------------------------------------------------------

struct BoundaryResult {
    double rate = 0.0;
    double resolution = 0.0;
    bool conclusive = true;
};

inline BoundaryResult estimate_boundary(const SimConfig& config, const SuccessProbs& probs,
                                        const Traffic& traffic, const AccessPolicy& policy,
                                        double resolution = 5e-3) {
    if (!(resolution > 0.0)) throw std::invalid_argument("boundary: resolution must be positive");
    BoundaryResult out;
    out.resolution = resolution;
    const double slope_threshold = 1e-3;
    auto probe_stable = [&](double lambda_s) {
        Traffic tr = traffic;
        tr.lambda_s = lambda_s;
        SimConfig cfg = config;
        cfg.dominance = config.dominance == Dominance::saturate_primary
                            ? Dominance::saturate_primary
                            : Dominance::none;
        SimReport rep = run(cfg, policy, probs, tr);
        if (std::fabs(rep.qs_slope - slope_threshold) < 0.5 * slope_threshold)
            out.conclusive = false;
        return rep.qs_slope <= slope_threshold;
    };
    double lo = 0.0, hi = 1.0;
    if (probe_stable(1.0)) {
        out.rate = 1.0;
        return out;
    }
    while (hi - lo > resolution) {
        double mid = 0.5 * (lo + hi);
        if (probe_stable(mid)) lo = mid;
        else hi = mid;
    }
    out.rate = lo;
    return out;
}

}  // namespace ehcr
