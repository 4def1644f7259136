#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ehcr/types.hpp"

namespace ehcr {

enum class Node { primary, secondary };

// Physical parameters of the two links and their cross-interference paths
// under flat Rayleigh fading. The primary transmits at fixed power over the
// whole slot; the secondary spends a fixed energy per packet, so its power
// rises when a sensing phase shortens the transmission time.
struct LinkModel {
    double bits_per_packet = 1.0;     // b
    double slot_duration = 1.0;       // T, seconds
    double bandwidth = 1.0;           // W, Hz
    double sensing_duration = 0.05;   // tau, seconds
    double sigma_p_pd = 1.0;          // mean channel gain, primary -> primary rx
    double sigma_s_sd = 1.0;          // secondary -> secondary rx
    double sigma_s_pd = 1.0;          // secondary -> primary rx (interference)
    double sigma_p_sd = 1.0;          // primary -> secondary rx (interference)
    double noise_pd = 1.0;            // Watts
    double noise_sd = 1.0;
    double primary_power = 1.0;       // Watts over the whole slot
    double secondary_energy = 1.0;    // Joules per packet

    void validate() const {
        auto pos = [](double v, const char* n) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument(std::string("link.") + n + " must be positive");
        };
        pos(slot_duration, "slot_duration");
        pos(bandwidth, "bandwidth");
        pos(sigma_p_pd, "sigma_p_pd");
        pos(sigma_s_sd, "sigma_s_sd");
        pos(sigma_s_pd, "sigma_s_pd");
        pos(sigma_p_sd, "sigma_p_sd");
        pos(noise_pd, "noise_pd");
        pos(noise_sd, "noise_sd");
        pos(primary_power, "primary_power");
        pos(secondary_energy, "secondary_energy");
        if (bits_per_packet < 0.0 || !std::isfinite(bits_per_packet))
            throw std::invalid_argument("link.bits_per_packet must be nonnegative");
        if (!(sensing_duration > 0.0 && sensing_duration < slot_duration))
            throw std::invalid_argument("link: require 0 < tau < T");
    }

    // Mean SNR of the data link of `who` when its transmission starts at i*tau.
    double snr(Node who, int i) const {
        if (who == Node::primary) return primary_power / noise_pd;
        double tx_time = slot_duration * (1.0 - i * sensing_duration / slot_duration);
        return secondary_energy / (tx_time * noise_sd);
    }

    double spectral_efficiency(Node who, int i) const {
        double frac = (who == Node::primary) ? 1.0 : 1.0 - i * sensing_duration / slot_duration;
        return bits_per_packet / (bandwidth * slot_duration * frac);
    }
};

namespace detail {
inline double clamp_prob(double v) { return std::clamp(v, 0.0, 1.0); }
inline double safe_exp(double x) { return std::exp(std::max(x, -690.0)); }  // ~1e-300 floor
inline void check_start_index(int i) {
    if (i != 0 && i != 1) throw std::invalid_argument("start index must be 0 or 1");
}
}  // namespace detail

// Probability that a packet of `sender` is decoded when it transmits alone.
// For the secondary, i=1 models transmission after a sensing phase: the rate
// rises (less time for the same bits) while the fixed-energy power rise only
// partially compensates, so the probability drops with i*tau.
inline double success_alone(const LinkModel& link, Node sender, int i) {
    link.validate();
    detail::check_start_index(i);
    if (sender == Node::primary && i != 0)
        throw std::invalid_argument("the primary always starts at the slot beginning (i=0)");
    double rate = link.spectral_efficiency(sender, i);
    double sigma = (sender == Node::primary) ? link.sigma_p_pd : link.sigma_s_sd;
    double threshold = std::exp2(rate) - 1.0;
    return detail::clamp_prob(detail::safe_exp(-threshold / (link.snr(sender, i) * sigma)));
}

// Success probability of `sender` under concurrent transmission by the other
// node. For a primary victim the secondary's access-delay index n is dropped:
// with tau << T the interferer power change is negligible.
inline double success_interfered(const LinkModel& link, Node sender, Node interferer, int i,
                                 int n = 0) {
    link.validate();
    detail::check_start_index(i);
    detail::check_start_index(n);
    if (sender == interferer)
        throw std::invalid_argument("sender and interferer must be distinct nodes");
    double alone = success_alone(link, sender, i);
    double rate = link.spectral_efficiency(sender, i);
    double threshold = std::exp2(rate) - 1.0;
    double own, cross;
    if (sender == Node::primary) {
        own = link.snr(Node::primary, 0) * link.sigma_p_pd;
        cross = link.secondary_energy / (link.slot_duration * link.noise_pd) * link.sigma_s_pd;
    } else {
        own = link.snr(Node::secondary, i) * link.sigma_s_sd;
        cross = link.primary_power / link.noise_sd * link.sigma_p_sd;
    }
    return detail::clamp_prob(alone / (1.0 + threshold * cross / own));
}

// Maps the link model onto the six reception probabilities consumed by the
// queueing analysis.
inline SuccessProbs derive_success_probs(const LinkModel& link) {
    SuccessProbs p;
    p.p_p = success_alone(link, Node::primary, 0);
    p.p_p_c = success_interfered(link, Node::primary, Node::secondary, 0);
    p.p_0s = success_alone(link, Node::secondary, 0);
    p.p_1s = success_alone(link, Node::secondary, 1);
    p.p_0s_c = success_interfered(link, Node::secondary, Node::primary, 0);
    p.p_1s_c = success_interfered(link, Node::secondary, Node::primary, 1);
    p.validate();
    return p;
}

}  // namespace ehcr
