#pragma once

#include <cmath>
#include <stdexcept>

#include "ehcr/types.hpp"

namespace ehcr {

enum class RateStatus { ok, primary_unstable, secondary_unstable, singular };

struct ServiceRates {
    double mu_p = 0.0;
    double mu_s = 0.0;
    double mu_e = 0.0;
    RateStatus status = RateStatus::ok;
    bool ok() const { return status == RateStatus::ok; }
};

namespace detail {

// Per-slot secondary success probability given energy availability, split by
// the primary queue state. `empty` weights the idle-primary branch.
inline double secondary_branch_idle(const AccessPolicy& a, const SuccessProbs& p,
                                    const Traffic& t) {
    return (1.0 - a.p_s) * a.p_t * p.p_0s +
           a.p_s * a.p_b * t.p_fa * p.p_1s +
           a.p_s * a.p_f * (1.0 - t.p_fa) * p.p_1s;
}

inline double secondary_branch_busy(const AccessPolicy& a, const SuccessProbs& p,
                                    const Traffic& t) {
    return (1.0 - a.p_s) * a.p_t * p.p_0s_c +
           a.p_s * a.p_f * t.p_md * p.p_1s_c +
           a.p_s * a.p_b * (1.0 - t.p_md) * p.p_1s_c;
}

// Probability that the secondary accesses the channel in a slot where the
// primary is transmitting (given data and energy availability).
inline double access_prob_busy(const AccessPolicy& a, const Traffic& t) {
    return (1.0 - a.p_s) * a.p_t + a.p_s * t.p_md * a.p_f + a.p_s * (1.0 - t.p_md) * a.p_b;
}

}  // namespace detail

// Primary service rate in the first dominant system (saturated secondary,
// energy availability lambda_e).
inline double s1_primary_rate(const AccessPolicy& policy, const SuccessProbs& probs,
                              const Traffic& traffic) {
    return probs.p_p -
           traffic.lambda_e * probs.delta_p() * detail::access_prob_busy(policy, traffic);
}

// Stationary distribution of the primary queue birth-death chain.
struct PrimaryChainDist {
    double lambda_p = 0.0;
    double mu_p = 0.0;
    double nu0 = 0.0;
    double ratio = 0.0;  // lambda_p(1-mu_p) / ((1-lambda_p) mu_p)
    bool stable = false;

    // nu_k = nu0 / (1-mu_p) * ratio^k for k >= 1
    double nu(int k) const {
        if (k < 0) throw std::invalid_argument("nu(k): k must be nonnegative");
        if (k == 0) return nu0;
        if (mu_p >= 1.0) return 0.0;  // served every slot, never more than the arrival in flight
        return nu0 / (1.0 - mu_p) * std::pow(ratio, k);
    }
};

inline PrimaryChainDist primary_chain(double lambda_p, double mu_p) {
    require_prob(lambda_p, "lambda_p");
    if (!(mu_p > 0.0) || mu_p > 1.0)
        throw std::invalid_argument("primary_chain: mu_p must lie in (0,1]");
    PrimaryChainDist d;
    d.lambda_p = lambda_p;
    d.mu_p = mu_p;
    d.stable = lambda_p < mu_p;
    if (!d.stable) return d;
    d.nu0 = 1.0 - lambda_p / mu_p;
    d.ratio = (lambda_p < 1.0) ? lambda_p * (1.0 - mu_p) / ((1.0 - lambda_p) * mu_p) : 1.0;
    return d;
}

// Service rates of the first dominant system S1: the secondary queue sends
// dummy packets when empty, the energy queue is approximated by its M/D/1
// occupancy lambda_e. When the primary queue is unstable, mu_p is still
// meaningful and returned; mu_s and mu_e are not.
inline ServiceRates s1_rates(const AccessPolicy& policy, const SuccessProbs& probs,
                             const Traffic& traffic) {
    policy.validate();
    probs.validate();
    traffic.validate();
    ServiceRates r;
    r.mu_p = s1_primary_rate(policy, probs, traffic);
    if (traffic.lambda_p >= r.mu_p || r.mu_p <= 0.0) {
        r.status = RateStatus::primary_unstable;
        return r;
    }
    double busy = traffic.lambda_p / r.mu_p;
    double idle = 1.0 - busy;
    r.mu_s = traffic.lambda_e * (idle * detail::secondary_branch_idle(policy, probs, traffic) +
                                 busy * detail::secondary_branch_busy(policy, probs, traffic));
    // Energy drain with Pr{Qs != 0} = 1 (dominant S1).
    r.mu_e = (1.0 - policy.p_s) * policy.p_t +
             policy.p_s * policy.p_f * (traffic.p_md * busy + (1.0 - traffic.p_fa) * idle) +
             policy.p_s * policy.p_b * (traffic.p_fa * idle + (1.0 - traffic.p_md) * busy);
    return r;
}

// Second dominant system S2: the primary queue sends dummy packets when empty,
// the secondary never senses (p_s* = 0 since the channel is always busy).
inline ServiceRates s2_rates(const AccessPolicy& policy, const SuccessProbs& probs,
                             const Traffic& traffic) {
    policy.validate();
    probs.validate();
    traffic.validate();
    ServiceRates r;
    r.mu_s = policy.p_t * traffic.lambda_e * probs.p_0s_c;
    r.mu_e = policy.p_t;  // always-busy channel, Pr{Qs != 0} = 1 at the boundary
    if (traffic.lambda_s > r.mu_s) {
        r.status = RateStatus::secondary_unstable;
        return r;
    }
    // Pr{Qs != 0} = lambda_s / mu_s; the p_t factors cancel.
    r.mu_p = (probs.p_0s_c > 0.0)
                 ? probs.p_p - traffic.lambda_s / probs.p_0s_c * probs.delta_p()
                 : probs.p_p - (traffic.lambda_s > 0.0 ? probs.delta_p() : 0.0);
    return r;
}

// Mean energy-queue drain for caller-supplied joint occupancy probabilities.
// Kept general; the analytic chain above always substitutes the M/D/1 value.
inline double energy_rate(const AccessPolicy& policy, const Traffic& traffic,
                          double pr_qs_busy_qp_idle, double pr_qs_busy_qp_busy) {
    policy.validate();
    traffic.validate();
    require_prob(pr_qs_busy_qp_idle, "occupancy.qs_busy_qp_idle");
    require_prob(pr_qs_busy_qp_busy, "occupancy.qs_busy_qp_busy");
    if (pr_qs_busy_qp_idle + pr_qs_busy_qp_busy > 1.0 + 1e-12)
        throw std::invalid_argument("occupancy probabilities must sum to at most 1");
    double qs_busy = pr_qs_busy_qp_idle + pr_qs_busy_qp_busy;
    return (1.0 - policy.p_s) * policy.p_t * qs_busy +
           policy.p_s * policy.p_f *
               (traffic.p_md * pr_qs_busy_qp_busy + (1.0 - traffic.p_fa) * pr_qs_busy_qp_idle) +
           policy.p_s * policy.p_b *
               (traffic.p_fa * pr_qs_busy_qp_idle + (1.0 - traffic.p_md) * pr_qs_busy_qp_busy);
}

// Stationary description of the primary chain when the secondary leverages
// ARQ feedback: first-transmission states pi_k and retransmission states
// eps_k, with distinct success probabilities alpha_p and gamma_p.
struct FeedbackChain {
    double lambda_p = 0.0;
    double alpha_p = 0.0;  // success probability, first transmission
    double gamma_p = 0.0;  // success probability, retransmission
    double eta = 0.0;      // lambda_p*alpha_p + (1-lambda_p)*gamma_p
    double pi0 = 0.0;
    double sum_pi = 0.0;   // sum_{k>=1} pi_k = lambda_p
    double sum_eps = 0.0;  // lambda_p (1-alpha_p) / gamma_p
    bool stable = false;

    double tail_ratio() const {
        return (lambda_p < 1.0 && eta > 0.0)
                   ? lambda_p * (1.0 - eta) / ((1.0 - lambda_p) * eta)
                   : 1.0;
    }

    double pi(int k) const {
        if (k < 0) throw std::invalid_argument("pi(k): k must be nonnegative");
        if (k == 0) return pi0;
        if (k == 1)
            return pi0 * lambda_p / (1.0 - lambda_p) *
                   (lambda_p + (1.0 - lambda_p) * gamma_p) / eta;
        if (eta >= 1.0) return 0.0;
        return pi0 * lambda_p * (1.0 - alpha_p) / ((1.0 - eta) * (1.0 - eta)) *
               std::pow(tail_ratio(), k);
    }

    double eps(int k) const {
        if (k < 0) throw std::invalid_argument("eps(k): k must be nonnegative");
        if (k == 0) return 0.0;
        if (k == 1) return pi0 * lambda_p / eta * (1.0 - alpha_p);
        if (eta >= 1.0) return 0.0;
        return pi0 * (1.0 - lambda_p) * (1.0 - alpha_p) / ((1.0 - eta) * (1.0 - eta)) *
               std::pow(tail_ratio(), k);
    }
};

inline FeedbackChain feedback_chain(const AccessPolicy& policy, const SuccessProbs& probs,
                                    const Traffic& traffic) {
    policy.validate();
    probs.validate();
    traffic.validate();
    FeedbackChain c;
    c.lambda_p = traffic.lambda_p;
    c.alpha_p = s1_primary_rate(policy, probs, traffic);
    c.gamma_p = probs.p_p - traffic.lambda_e * probs.delta_p() * policy.p_r;
    c.eta = traffic.lambda_p * c.alpha_p + (1.0 - traffic.lambda_p) * c.gamma_p;
    c.stable = traffic.lambda_p < c.eta && c.gamma_p > 0.0;
    if (!c.stable) return c;
    c.pi0 = (c.eta - traffic.lambda_p) / c.gamma_p;
    c.sum_pi = traffic.lambda_p;
    c.sum_eps = traffic.lambda_p * (1.0 - c.alpha_p) / c.gamma_p;
    return c;
}

// Secondary service rate of the first dominant feedback system S1^f.
inline double sf1_secondary_rate_given(const FeedbackChain& chain, const AccessPolicy& policy,
                                       const SuccessProbs& probs, const Traffic& traffic) {
    return traffic.lambda_e *
           (chain.pi0 * detail::secondary_branch_idle(policy, probs, traffic) +
            chain.sum_pi * detail::secondary_branch_busy(policy, probs, traffic) +
            chain.sum_eps * policy.p_r * probs.p_0s_c);
}

struct SfRateResult {
    double mu_s = 0.0;
    FeedbackChain chain;
    RateStatus status = RateStatus::ok;
};

inline SfRateResult sf1_secondary_rate(const AccessPolicy& policy, const SuccessProbs& probs,
                                       const Traffic& traffic) {
    SfRateResult r;
    r.chain = feedback_chain(policy, probs, traffic);
    if (!r.chain.stable) {
        r.status = RateStatus::primary_unstable;
        return r;
    }
    r.mu_s = sf1_secondary_rate_given(r.chain, policy, probs, traffic);
    return r;
}

struct DelayReport {
    double d_p = 0.0;
    bool feasible = false;
    bool singular = false;  // eta == 1 in the feedback formula
};

// Little's-law queueing delay of the primary in S1 with a saturated SU.
inline DelayReport delay_s1(const AccessPolicy& policy, const SuccessProbs& probs,
                            const Traffic& traffic) {
    DelayReport rep;
    double mu_p = s1_primary_rate(policy, probs, traffic);
    if (traffic.lambda_p >= mu_p || mu_p <= 0.0) return rep;
    rep.feasible = true;
    rep.d_p = (1.0 - traffic.lambda_p) / (mu_p - traffic.lambda_p);
    return rep;
}

inline DelayReport delay_sf1_given(const FeedbackChain& c) {
    DelayReport rep;
    if (!c.stable) return rep;
    if (c.eta >= 1.0) {
        rep.singular = true;  // closed form is 0/0 at eta = 1
        return rep;
    }
    double la = c.lambda_p;
    double num = (c.alpha_p - c.eta) * (c.eta - la) * (c.eta - la) +
                 (1.0 - la) * (1.0 - la) * (1.0 - c.alpha_p) * c.eta;
    double den = (c.eta - la) * (1.0 - la) * (1.0 - c.eta) * c.gamma_p;
    rep.feasible = true;
    rep.d_p = num / den;
    return rep;
}

inline DelayReport delay_sf1(const AccessPolicy& policy, const SuccessProbs& probs,
                             const Traffic& traffic) {
    return delay_sf1_given(feedback_chain(policy, probs, traffic));
}

// Conventional baseline: sense every slot, access only when sensed free.
inline AccessPolicy conventional_policy() {
    return AccessPolicy{.p_s = 1.0, .p_t = 0.0, .p_f = 1.0, .p_b = 0.0, .p_r = 0.0};
}

inline ServiceRates conventional_rates(const SuccessProbs& probs, const Traffic& traffic) {
    return s1_rates(conventional_policy(), probs, traffic);
}

}  // namespace ehcr
