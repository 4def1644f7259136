#pragma once

#include <optional>
#include <string>

#include "ehcr/types.hpp"

namespace ehcr {

// A named parameter set: reception probabilities plus the traffic values that
// belong to it. Arrival rates not pinned by the preset stay caller-supplied.
struct Preset {
    std::string name;
    SuccessProbs probs;
    double lambda_e = 0.0;
    double p_fa = 0.0;
    double p_md = 0.0;
    std::optional<double> lambda_p;  // only fig7 fixes the primary arrival rate
};

inline std::optional<Preset> find_preset(const std::string& name) {
    SuccessProbs base{.p_p = 0.7, .p_p_c = 0.1, .p_0s = 0.8, .p_1s = 0.6,
                      .p_0s_c = 0.1, .p_1s_c = 0.075};
    if (name == "fig3") {
        SuccessProbs p = base;
        p.p_1s_c = 0.3;
        return Preset{name, p, 1.0, 0.01, 0.02, std::nullopt};
    }
    if (name == "fig4" || name == "fig8")
        return Preset{name, base, 0.4, 0.05, 0.01, std::nullopt};
    if (name == "fig5") {
        SuccessProbs p = base;  // delta_0s = delta_1s = 1/8 by default
        p.p_0s_c = p.p_0s / 8.0;
        p.p_1s_c = p.p_1s / 8.0;
        return Preset{name, p, 0.4, 0.05, 0.01, std::nullopt};
    }
    if (name == "fig6")
        return Preset{name, base, 0.8, 0.05, 0.01, std::nullopt};
    if (name == "fig7")
        return Preset{name, base, 0.4, 0.05, 0.01, 0.4};
    return std::nullopt;
}

}  // namespace ehcr
