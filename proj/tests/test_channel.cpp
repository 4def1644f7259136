#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ehcr/channel.hpp"

using namespace ehcr;

namespace {

LinkModel default_link() {
    LinkModel link;  // all gains/powers 1, tau = 0.05
    return link;
}

// Monte Carlo outage estimate with independent Rayleigh draws, used as an
// oracle for the closed-form probabilities.
struct McResult {
    double p;
    double se;
};

McResult mc_success(const LinkModel& link, Node sender, bool interfered, int i, long draws,
                    unsigned seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expd(1.0);
    double rate = link.spectral_efficiency(sender, i);
    double own_snr = link.snr(sender, i);
    double own_sigma = (sender == Node::primary) ? link.sigma_p_pd : link.sigma_s_sd;
    double cross;
    if (sender == Node::primary)
        cross = link.secondary_energy / (link.slot_duration * link.noise_pd) * link.sigma_s_pd;
    else
        cross = link.primary_power / link.noise_sd * link.sigma_p_sd;
    long hits = 0;
    for (long d = 0; d < draws; ++d) {
        double signal = own_snr * own_sigma * expd(rng);
        double denom = 1.0 + (interfered ? cross * expd(rng) : 0.0);
        if (std::log2(1.0 + signal / denom) >= rate) ++hits;
    }
    double p = static_cast<double>(hits) / draws;
    return {p, std::sqrt(std::max(p * (1.0 - p), 1e-12) / draws)};
}

}  // namespace

TEST_CASE("success probabilities match hand-computed values on the unit link") {
    LinkModel link = default_link();
    auto p = derive_success_probs(link);
    CHECK(p.p_p == Catch::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK(p.p_p_c == Catch::Approx(0.18393972058572117).epsilon(1e-12));
    CHECK(p.p_0s == Catch::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK(p.p_1s == Catch::Approx(0.36038059975776215).epsilon(1e-12));
    CHECK(p.p_0s_c == Catch::Approx(0.18393972058572117).epsilon(1e-12));
    CHECK(p.p_1s_c == Catch::Approx(0.1783537393060248).epsilon(1e-12));
}

TEST_CASE("closed forms agree with Monte Carlo fading draws") {
    LinkModel link = default_link();
    link.sigma_s_sd = 2.0;
    link.sigma_p_sd = 0.5;
    link.bits_per_packet = 0.8;
    const long draws = 200000;
    struct Case {
        Node sender;
        bool interfered;
        int i;
        double analytic;
    };
    auto probs = derive_success_probs(link);
    Case cases[] = {
        {Node::primary, false, 0, probs.p_p},    {Node::primary, true, 0, probs.p_p_c},
        {Node::secondary, false, 0, probs.p_0s}, {Node::secondary, false, 1, probs.p_1s},
        {Node::secondary, true, 0, probs.p_0s_c}, {Node::secondary, true, 1, probs.p_1s_c},
    };
    unsigned seed = 11;
    for (const auto& c : cases) {
        auto mc = mc_success(link, c.sender, c.interfered, c.i, draws, seed++);
        INFO("sender=" << (c.sender == Node::primary ? "p" : "s") << " interfered="
                       << c.interfered << " i=" << c.i);
        CHECK(std::fabs(mc.p - c.analytic) <= 4.0 * mc.se);
    }
}

TEST_CASE("ordering invariants hold across link parameters") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.2, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        LinkModel link;
        link.bits_per_packet = uni(rng);
        link.sensing_duration = 0.02 + 0.2 * (uni(rng) - 0.2) / 2.8;
        link.sigma_p_pd = uni(rng);
        link.sigma_s_sd = uni(rng);
        link.sigma_s_pd = uni(rng);
        link.sigma_p_sd = uni(rng);
        link.primary_power = uni(rng);
        link.secondary_energy = uni(rng);
        auto p = derive_success_probs(link);
        CHECK(p.p_p_c <= p.p_p);
        CHECK(p.p_0s_c <= p.p_0s);
        CHECK(p.p_1s_c <= p.p_1s);
        CHECK(p.p_1s <= p.p_0s);
        CHECK(p.p_1s_c <= p.p_0s_c);
    }
}

TEST_CASE("interference only hurts and larger payloads only hurt") {
    LinkModel link = default_link();
    double prev = 1.0;
    for (double b : {0.5, 1.0, 2.0, 4.0}) {
        link.bits_per_packet = b;
        double cur = success_alone(link, Node::secondary, 0);
        CHECK(cur <= prev);
        CHECK(success_interfered(link, Node::secondary, Node::primary, 0) <= cur);
        prev = cur;
    }
}

TEST_CASE("argument validation") {
    LinkModel link = default_link();
    CHECK_THROWS_AS(success_alone(link, Node::primary, 1), std::invalid_argument);
    CHECK_THROWS_AS(success_alone(link, Node::secondary, 2), std::invalid_argument);
    CHECK_THROWS_AS(success_interfered(link, Node::primary, Node::primary, 0),
                    std::invalid_argument);
    link.sensing_duration = 2.0;  // >= slot duration
    CHECK_THROWS_AS(link.validate(), std::invalid_argument);
    LinkModel bad = default_link();
    bad.noise_sd = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("zero-rate packets always succeed") {
    LinkModel link = default_link();
    link.bits_per_packet = 0.0;
    auto p = derive_success_probs(link);
    CHECK(p.p_p == 1.0);
    CHECK(p.p_0s_c == 1.0);
}
