#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehcr/channel.hpp"
#include "ehcr/presets.hpp"
#include "ehcr/sim.hpp"
#include "ehcr/types.hpp"

namespace ehcr {

struct ConfigError : std::runtime_error {
    int line = 0, column = 0;
    ConfigError(const std::string& msg, int ln, int col)
        : std::runtime_error("line " + std::to_string(ln) + ", column " + std::to_string(col) +
                             ": " + msg),
          line(ln),
          column(col) {}
};

namespace detail {

struct KvEntry {
    std::string value;
    int line = 0, column = 0;
};

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// Flat key=value document with dotted namespaces; '#' starts a comment.
class KvDocument {
  public:
    static KvDocument parse(const std::string& text) {
        KvDocument doc;
        std::istringstream in(text);
        std::string raw;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = raw;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            if (detail::trim(line).empty()) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected 'key = value'", line_no,
                                  static_cast<int>(raw.find_first_not_of(" \t") + 1));
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            int key_col = static_cast<int>(line.find_first_not_of(" \t") + 1);
            if (key.empty()) throw ConfigError("empty key", line_no, key_col);
            if (value.empty())
                throw ConfigError("empty value for key '" + key + "'", line_no,
                                  static_cast<int>(eq + 2));
            if (doc.entries_.count(key))
                throw ConfigError("duplicate key '" + key + "'", line_no, key_col);
            doc.entries_[key] = {value, line_no, key_col};
        }
        return doc;
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> get_string(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second.value;
    }

    std::optional<double> get_number(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        try {
            size_t pos = 0;
            double v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': not a number ('" + it->second.value + "')",
                              it->second.line, it->second.column);
        }
    }

    std::optional<bool> get_bool(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        std::string v = it->second.value;
        std::transform(v.begin(), v.end(), v.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key '" + key + "': expected a boolean", it->second.line,
                          it->second.column);
    }

    double get_prob(const std::string& key, double fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        double v = *get_number(key);
        if (!is_prob(v))
            throw ConfigError("key '" + key + "': value " + it->second.value +
                                  " outside [0, 1]",
                              it->second.line, it->second.column);
        return v;
    }

    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        consumed_.insert(key);
        std::vector<double> out;
        std::istringstream ss(it->second.value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = detail::trim(tok);
            if (tok.empty()) continue;
            try {
                size_t pos = 0;
                out.push_back(std::stod(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "': bad list element '" + tok + "'",
                                  it->second.line, it->second.column);
            }
        }
        if (out.empty())
            throw ConfigError("key '" + key + "': empty list", it->second.line,
                              it->second.column);
        return out;
    }

    void reject_unconsumed() const {
        for (const auto& [key, entry] : entries_)
            if (!consumed_.count(key))
                throw ConfigError("unknown key '" + key + "'", entry.line, entry.column);
    }

    const detail::KvEntry* entry(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

  private:
    std::map<std::string, detail::KvEntry> entries_;
    std::set<std::string> consumed_;
};

// ---------------------------------------------------------------------------
// Scenario: everything a command needs, assembled from a parsed document.
// ---------------------------------------------------------------------------

struct Scenario {
    std::string preset_name;
    SuccessProbs probs;
    std::optional<LinkModel> link;
    Traffic traffic{};
    AccessPolicy policy{};
    bool policy_given = false;

    std::vector<double> lambda_p_grid;
    int ps_points = 101;
    int pr_points = 101;
    double tol = 1e-7;
    bool feedback = false;
    std::vector<double> delay_bounds{2.0, 4.0};

    SimConfig sim;
};

inline Scenario build_scenario(KvDocument& doc) {
    Scenario sc;

    // Success probabilities: preset, explicit values, or a physical link model.
    bool link_given = false;
    for (const char* k :
         {"link.bits", "link.slot_duration", "link.bandwidth", "link.sensing_duration",
          "link.sigma_p_pd", "link.sigma_s_sd", "link.sigma_s_pd", "link.sigma_p_sd",
          "link.noise_pd", "link.noise_sd", "link.primary_power", "link.secondary_energy"})
        if (doc.has(k)) link_given = true;

    if (auto name = doc.get_string("probs.preset")) {
        auto preset = find_preset(*name);
        if (!preset) {
            const auto* e = doc.entry("probs.preset");
            throw ConfigError("key 'probs.preset': unknown preset '" + *name + "'", e->line,
                              e->column);
        }
        sc.preset_name = *name;
        sc.probs = preset->probs;
        sc.traffic.lambda_e = preset->lambda_e;
        sc.traffic.p_fa = preset->p_fa;
        sc.traffic.p_md = preset->p_md;
        if (preset->lambda_p) sc.traffic.lambda_p = *preset->lambda_p;
    } else if (link_given) {
        LinkModel link;
        link.bits_per_packet = doc.get_number("link.bits").value_or(link.bits_per_packet);
        link.slot_duration = doc.get_number("link.slot_duration").value_or(link.slot_duration);
        link.bandwidth = doc.get_number("link.bandwidth").value_or(link.bandwidth);
        link.sensing_duration =
            doc.get_number("link.sensing_duration").value_or(link.sensing_duration);
        link.sigma_p_pd = doc.get_number("link.sigma_p_pd").value_or(link.sigma_p_pd);
        link.sigma_s_sd = doc.get_number("link.sigma_s_sd").value_or(link.sigma_s_sd);
        link.sigma_s_pd = doc.get_number("link.sigma_s_pd").value_or(link.sigma_s_pd);
        link.sigma_p_sd = doc.get_number("link.sigma_p_sd").value_or(link.sigma_p_sd);
        link.noise_pd = doc.get_number("link.noise_pd").value_or(link.noise_pd);
        link.noise_sd = doc.get_number("link.noise_sd").value_or(link.noise_sd);
        link.primary_power = doc.get_number("link.primary_power").value_or(link.primary_power);
        link.secondary_energy =
            doc.get_number("link.secondary_energy").value_or(link.secondary_energy);
        try {
            link.validate();
            sc.probs = derive_success_probs(link);
        } catch (const std::exception& ex) {
            throw ConfigError(std::string("link model: ") + ex.what(), 0, 0);
        }
        sc.link = link;
    } else {
        sc.probs = SuccessProbs{0.7, 0.1, 0.8, 0.6, 0.1, 0.075};  // base numerical defaults
    }
    sc.probs.p_p = doc.get_prob("probs.p_p", sc.probs.p_p);
    sc.probs.p_p_c = doc.get_prob("probs.p_p_c", sc.probs.p_p_c);
    sc.probs.p_0s = doc.get_prob("probs.p_0s", sc.probs.p_0s);
    sc.probs.p_1s = doc.get_prob("probs.p_1s", sc.probs.p_1s);
    sc.probs.p_0s_c = doc.get_prob("probs.p_0s_c", sc.probs.p_0s_c);
    sc.probs.p_1s_c = doc.get_prob("probs.p_1s_c", sc.probs.p_1s_c);
    try {
        sc.probs.validate();
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("probs: ") + ex.what(), 0, 0);
    }

    sc.traffic.lambda_p = doc.get_prob("traffic.lambda_p", sc.traffic.lambda_p);
    sc.traffic.lambda_s = doc.get_prob("traffic.lambda_s", sc.traffic.lambda_s);
    sc.traffic.lambda_e = doc.get_prob("traffic.lambda_e", sc.traffic.lambda_e);
    sc.traffic.p_fa = doc.get_prob("traffic.p_fa", sc.traffic.p_fa);
    sc.traffic.p_md = doc.get_prob("traffic.p_md", sc.traffic.p_md);

    sc.policy_given = doc.has("policy.p_s") || doc.has("policy.p_t") || doc.has("policy.p_f") ||
                      doc.has("policy.p_b") || doc.has("policy.p_r");
    sc.policy.p_s = doc.get_prob("policy.p_s", 0.0);
    sc.policy.p_t = doc.get_prob("policy.p_t", 0.0);
    sc.policy.p_f = doc.get_prob("policy.p_f", 0.0);
    sc.policy.p_b = doc.get_prob("policy.p_b", 0.0);
    sc.policy.p_r = doc.get_prob("policy.p_r", 0.0);

    double lp_min = doc.get_prob("solver.lambda_p_min", 0.0);
    double lp_max = doc.get_prob("solver.lambda_p_max", sc.probs.p_p);
    double lp_steps = doc.get_number("solver.lambda_p_steps").value_or(15.0);
    if (lp_steps < 1 || lp_steps != std::floor(lp_steps)) {
        const auto* e = doc.entry("solver.lambda_p_steps");
        throw ConfigError("key 'solver.lambda_p_steps': must be a positive integer",
                          e ? e->line : 0, e ? e->column : 0);
    }
    int n = static_cast<int>(lp_steps);
    for (int i = 0; i < n; ++i)
        sc.lambda_p_grid.push_back(n == 1 ? lp_min
                                          : lp_min + (lp_max - lp_min) * i / (n - 1));
    sc.ps_points = static_cast<int>(doc.get_number("solver.ps_points").value_or(101.0));
    sc.pr_points = static_cast<int>(doc.get_number("solver.pr_points").value_or(101.0));
    if (sc.ps_points < 1 || sc.pr_points < 1)
        throw ConfigError("solver grid point counts must be positive", 0, 0);
    sc.tol = doc.get_number("solver.tol").value_or(1e-7);
    sc.feedback = doc.get_bool("solver.feedback").value_or(false);
    sc.delay_bounds = doc.get_list("solver.delay_bounds", sc.delay_bounds);
    for (double d : sc.delay_bounds)
        if (!(d >= 1.0)) throw ConfigError("solver.delay_bounds: bounds must be >= 1 slot", 0, 0);

    sc.sim.num_slots = static_cast<long long>(doc.get_number("sim.slots").value_or(1e6));
    sc.sim.seed = static_cast<std::uint64_t>(doc.get_number("sim.seed").value_or(1.0));
    if (auto w = doc.get_number("sim.warmup"))
        sc.sim.warmup_slots = static_cast<long long>(*w);
    sc.sim.feedback_enabled = doc.get_bool("sim.feedback").value_or(sc.feedback);
    if (auto m = doc.get_string("sim.energy_model")) {
        if (*m == "exact") sc.sim.energy_model = EnergyModel::exact;
        else if (*m == "md1-approx" || *m == "md1_approx")
            sc.sim.energy_model = EnergyModel::md1_approx;
        else {
            const auto* e = doc.entry("sim.energy_model");
            throw ConfigError("key 'sim.energy_model': expected exact | md1-approx", e->line,
                              e->column);
        }
    }
    if (auto m = doc.get_string("sim.dominance")) {
        if (*m == "none") sc.sim.dominance = Dominance::none;
        else if (*m == "saturate-secondary" || *m == "saturate_secondary")
            sc.sim.dominance = Dominance::saturate_secondary;
        else if (*m == "saturate-primary" || *m == "saturate_primary")
            sc.sim.dominance = Dominance::saturate_primary;
        else {
            const auto* e = doc.entry("sim.dominance");
            throw ConfigError(
                "key 'sim.dominance': expected none | saturate-secondary | saturate-primary",
                e->line, e->column);
        }
    }
    try {
        sc.sim.validate();
        sc.traffic.validate();
        sc.policy.validate();
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what(), 0, 0);
    }

    doc.reject_unconsumed();
    return sc;
}

// ---------------------------------------------------------------------------
// Deterministic CSV and SVG emission.
// ---------------------------------------------------------------------------

inline std::string format_sig(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct CsvRow {
    double lambda_p = 0.0;
    double lambda_s_max = 0.0;
    std::string winning_system;
    AccessPolicy policy;
    double mu_p = 0.0, mu_s = 0.0, mu_e = 0.0;
    double delay = 0.0;
    double confidence = 0.0;
};

inline std::string csv_header() {
    return "lambda_p,lambda_s_max,winning_system,p_s,p_t,p_f,p_b,p_r,mu_p,mu_s,mu_e,delay,"
           "confidence";
}

inline std::string csv_line(const CsvRow& r) {
    std::ostringstream out;
    out << format_sig(r.lambda_p) << ',' << format_sig(r.lambda_s_max) << ','
        << r.winning_system << ',' << format_sig(r.policy.p_s) << ','
        << format_sig(r.policy.p_t) << ',' << format_sig(r.policy.p_f) << ','
        << format_sig(r.policy.p_b) << ',' << format_sig(r.policy.p_r) << ','
        << format_sig(r.mu_p) << ',' << format_sig(r.mu_s) << ',' << format_sig(r.mu_e) << ','
        << format_sig(r.delay) << ',' << format_sig(r.confidence);
    return out.str();
}

// Minimal line plot: one polyline per named series over a shared x axis.
inline std::string svg_plot(const std::string& title,
                            const std::vector<std::pair<std::string,
                                                        std::vector<std::pair<double, double>>>>&
                                series) {
    const double width = 640, height = 480, margin = 56;
    double xmin = 0, xmax = 1e-12, ymin = 0, ymax = 1e-12;
    for (const auto& [name, pts] : series)
        for (auto [x, y] : pts) {
            xmax = std::max(xmax, x);
            ymax = std::max(ymax, y);
        }
    auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto sy = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#8c564b"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    int ci = 0;
    for (const auto& [name, pts] : series) {
        const char* color = colors[ci % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (auto [x, y] : pts) out << sx(x) << ',' << sy(y) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 16 * ci
            << "\" font-size=\"11\" fill=\"" << color << "\">" << name << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace ehcr
