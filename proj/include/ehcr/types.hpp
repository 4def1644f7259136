#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ehcr {

inline bool is_prob(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

inline void require_prob(double v, const char* name) {
    if (!is_prob(v))
        throw std::invalid_argument(std::string(name) + " must lie in [0,1], got " + std::to_string(v));
}

// Decision probabilities of the secondary user. p_r is only meaningful when
// primary feedback is exploited; no-feedback analyses ignore it.
struct AccessPolicy {
    double p_s = 0.0;  // sense the channel
    double p_t = 0.0;  // transmit without sensing
    double p_f = 0.0;  // transmit after sensing free
    double p_b = 0.0;  // transmit after sensing busy
    double p_r = 0.0;  // transmit in a retransmission slot (feedback schemes)

    void validate() const {
        require_prob(p_s, "policy.p_s");
        require_prob(p_t, "policy.p_t");
        require_prob(p_f, "policy.p_f");
        require_prob(p_b, "policy.p_b");
        require_prob(p_r, "policy.p_r");
    }
};

// Mean Bernoulli arrival rates and sensing error probabilities.
struct Traffic {
    double lambda_p = 0.0;
    double lambda_s = 0.0;
    double lambda_e = 0.0;
    double p_fa = 0.0;  // false alarm
    double p_md = 0.0;  // misdetection

    void validate() const {
        require_prob(lambda_p, "traffic.lambda_p");
        require_prob(lambda_s, "traffic.lambda_s");
        require_prob(lambda_e, "traffic.lambda_e");
        require_prob(p_fa, "traffic.p_fa");
        require_prob(p_md, "traffic.p_md");
    }
};

// The six reception-success probabilities that connect the physical layer to
// the queueing analysis: primary alone / under interference, secondary over a
// full slot (i=0) or after a sensing phase (i=1), alone / under interference.
struct SuccessProbs {
    double p_p = 1.0;     // primary, secondary silent
    double p_p_c = 1.0;   // primary, concurrent secondary transmission
    double p_0s = 1.0;    // secondary, full slot, primary silent
    double p_1s = 1.0;    // secondary, shortened slot, primary silent
    double p_0s_c = 1.0;  // secondary, full slot, primary active
    double p_1s_c = 1.0;  // secondary, shortened slot, primary active

    double delta_p() const { return p_p - p_p_c; }

    void validate() const {
        require_prob(p_p, "probs.p_p");
        require_prob(p_p_c, "probs.p_p_c");
        require_prob(p_0s, "probs.p_0s");
        require_prob(p_1s, "probs.p_1s");
        require_prob(p_0s_c, "probs.p_0s_c");
        require_prob(p_1s_c, "probs.p_1s_c");
        if (p_p_c > p_p)
            throw std::invalid_argument("probs: interference must not raise primary success");
        if (p_0s_c > p_0s || p_1s_c > p_1s)
            throw std::invalid_argument("probs: interference must not raise secondary success");
        // The i=1 <= i=0 ordering holds for channel-derived probabilities but is
        // not demanded of hand-set parameter presets, which may model sensing as
        // shrinking only the interference-free success probability.
        if (p_1s > p_0s)
            throw std::invalid_argument("probs: sensing delay must not raise secondary success");
    }
};

}  // namespace ehcr
