// Command-line front end: analytic rates, policy optimization, stability
// region sweeps, delay-constrained sweeps, slot-level simulation, and an
// analytic-vs-simulation validation pass. Results go to stdout and CSV/SVG
// files under --out.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ehcr/config.hpp"
#include "ehcr/rates.hpp"
#include "ehcr/sim.hpp"
#include "ehcr/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitValidation = 4;

int worker_count() {
    if (const char* env = std::getenv("EHCR_WORKERS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

// Run `fn(i)` for i in [0, n) on a small worker pool; results land in grid
// order regardless of completion order.
template <typename T, typename Fn>
std::vector<T> map_cells(int n, Fn fn) {
    std::vector<T> out(n);
    int workers = std::min(worker_count(), n > 0 ? n : 1);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> tasks;
    for (int w = 0; w < workers; ++w)
        tasks.push_back(std::async(std::launch::async, [&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = fn(i);
        }));
    for (auto& t : tasks) t.get();
    return out;
}

struct Outputs {
    std::filesystem::path dir;
    bool enabled = false;

    void write(const std::string& name, const std::string& content) const {
        if (!enabled) return;
        std::filesystem::create_directories(dir);
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        f << content;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<double> grid(int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i)
        g[i] = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    return g;
}

ehcr::CsvRow row_from_solve(double lambda_p, const ehcr::SolveResult& r, const char* tag,
                            const ehcr::SuccessProbs& probs, const ehcr::Traffic& traffic) {
    ehcr::CsvRow row;
    row.lambda_p = lambda_p;
    row.lambda_s_max = r.value;
    row.winning_system = tag;
    row.policy = r.policy;
    ehcr::Traffic tr = traffic;
    tr.lambda_p = lambda_p;
    row.mu_p = ehcr::s1_primary_rate(r.policy, probs, tr);
    row.mu_s = r.value;
    double busy = std::min(lambda_p / std::max(row.mu_p, 1e-12), 1.0);
    row.mu_e = ehcr::energy_rate(r.policy, tr, 1.0 - busy, busy);
    auto d = ehcr::delay_s1(r.policy, probs, tr);
    row.delay = d.feasible ? d.d_p : 0.0;
    row.confidence = 0.0;
    return row;
}

int cmd_rates(const ehcr::Scenario& sc, const Outputs& out) {
    auto rates = ehcr::s1_rates(sc.policy, sc.probs, sc.traffic);
    ehcr::CsvRow row;
    row.lambda_p = sc.traffic.lambda_p;
    row.policy = sc.policy;
    row.mu_p = rates.mu_p;
    row.mu_s = rates.mu_s;
    row.mu_e = rates.mu_e;
    row.winning_system = sc.feedback ? "S1f" : "S1";
    if (sc.feedback) {
        auto sf = ehcr::sf1_secondary_rate(sc.policy, sc.probs, sc.traffic);
        row.mu_s = sf.mu_s;
        auto d = ehcr::delay_sf1(sc.policy, sc.probs, sc.traffic);
        row.delay = d.feasible ? d.d_p : 0.0;
    } else {
        auto d = ehcr::delay_s1(sc.policy, sc.probs, sc.traffic);
        row.delay = d.feasible ? d.d_p : 0.0;
    }
    row.lambda_s_max = row.mu_s;
    std::string csv = ehcr::csv_header() + "\n" + ehcr::csv_line(row) + "\n";
    std::cout << csv;
    out.write("rates.csv", csv);
    if (!rates.ok() && rates.status != ehcr::RateStatus::secondary_unstable)
        return kExitInfeasible;
    return kExitOk;
}

int cmd_optimize(const ehcr::Scenario& sc, const Outputs& out) {
    double lp = sc.traffic.lambda_p;
    auto s1 = ehcr::optimize_s1(sc.probs, sc.traffic, lp, grid(sc.ps_points), sc.tol);
    std::ostringstream csv;
    csv << ehcr::csv_header() << "\n";
    bool any = false;
    if (s1.feasible) {
        csv << ehcr::csv_line(row_from_solve(lp, s1, "S1", sc.probs, sc.traffic)) << "\n";
        any = true;
    }
    if (sc.feedback) {
        auto sf = ehcr::optimize_sf1(sc.probs, sc.traffic, lp, grid(sc.ps_points), sc.tol, &s1);
        if (sf.feasible) {
            csv << ehcr::csv_line(row_from_solve(lp, sf, "S1f", sc.probs, sc.traffic)) << "\n";
            any = true;
        }
    }
    std::cout << csv.str();
    out.write("optimize.csv", csv.str());
    return any ? kExitOk : kExitInfeasible;
}

int cmd_region(const ehcr::Scenario& sc, const Outputs& out) {
    const auto& lps = sc.lambda_p_grid;
    auto points = map_cells<ehcr::RegionCurve>(static_cast<int>(lps.size()), [&](int i) {
        return ehcr::stability_region(sc.probs, sc.traffic, {lps[i]}, sc.feedback,
                                      grid(sc.ps_points), sc.tol);
    });
    std::ostringstream csv;
    csv << ehcr::csv_header() << "\n";
    std::vector<std::pair<double, double>> curve;
    bool any = false;
    for (const auto& part : points)
        for (const auto& pt : part.points) {
            any = true;
            ehcr::CsvRow row;
            row.lambda_p = pt.lambda_p;
            row.lambda_s_max = pt.lambda_s_max;
            row.winning_system = ehcr::to_string(pt.tag);
            row.policy = pt.policy;
            row.mu_p = pt.mu_p;
            row.mu_s = pt.lambda_s_max;
            ehcr::Traffic tr = sc.traffic;
            tr.lambda_p = pt.lambda_p;
            double busy = std::min(pt.lambda_p / std::max(pt.mu_p, 1e-12), 1.0);
            row.mu_e = ehcr::energy_rate(pt.policy, tr, 1.0 - busy, busy);
            auto d = ehcr::delay_s1(pt.policy, sc.probs, tr);
            row.delay = d.feasible ? d.d_p : 0.0;
            csv << ehcr::csv_line(row) << "\n";
            curve.emplace_back(pt.lambda_p, pt.lambda_s_max);
        }
    std::cout << csv.str();
    out.write("region.csv", csv.str());
    out.write("region.svg",
              ehcr::svg_plot("stability region boundary", {{sc.feedback ? "feedback" : "no-feedback",
                                                            curve}}));
    return any ? kExitOk : kExitInfeasible;
}

int cmd_delay(const ehcr::Scenario& sc, const Outputs& out) {
    bool any = false;
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
    for (double bound : sc.delay_bounds) {
        const auto& lps = sc.lambda_p_grid;
        auto rows = map_cells<ehcr::SolveResult>(static_cast<int>(lps.size()), [&](int i) {
            if (sc.feedback)
                return ehcr::optimize_sf_delay(sc.probs, sc.traffic, lps[i], bound,
                                               grid(sc.ps_points), grid(sc.pr_points));
            return ehcr::optimize_s1_delay(sc.probs, sc.traffic, lps[i], bound,
                                           grid(sc.ps_points), sc.tol);
        });
        std::ostringstream csv;
        csv << ehcr::csv_header() << "\n";
        std::vector<std::pair<double, double>> curve;
        for (size_t i = 0; i < lps.size(); ++i) {
            if (!rows[i].feasible) continue;
            any = true;
            auto row = row_from_solve(lps[i], rows[i], sc.feedback ? "S1f" : "S1", sc.probs,
                                      sc.traffic);
            if (sc.feedback) {
                ehcr::Traffic tr = sc.traffic;
                tr.lambda_p = lps[i];
                auto d = ehcr::delay_sf1(rows[i].policy, sc.probs, tr);
                row.delay = d.feasible ? d.d_p : 0.0;
            }
            csv << ehcr::csv_line(row) << "\n";
            curve.emplace_back(lps[i], rows[i].value);
        }
        std::ostringstream name;
        name << "delay_D" << ehcr::format_sig(bound);
        std::cout << "# D = " << bound << "\n" << csv.str();
        out.write(name.str() + ".csv", csv.str());
        series.emplace_back(name.str(), curve);
    }
    out.write("delay.svg", ehcr::svg_plot("delay-constrained boundary", series));
    return any ? kExitOk : kExitInfeasible;
}

int cmd_simulate(const ehcr::Scenario& sc, const Outputs& out) {
    auto rep = ehcr::run(sc.sim, sc.policy, sc.probs, sc.traffic);
    ehcr::CsvRow row;
    row.lambda_p = sc.traffic.lambda_p;
    row.lambda_s_max = rep.mu_s;
    row.winning_system = "sim";
    row.policy = sc.policy;
    row.mu_p = rep.mu_p;
    row.mu_s = rep.mu_s;
    row.mu_e = 1.0 - rep.empty_e_freq;
    row.delay = rep.delay_p;
    row.confidence = rep.mu_s_ci;
    std::string csv = ehcr::csv_header() + "\n" + ehcr::csv_line(row) + "\n";
    std::cout << csv;
    std::cout << "# slots=" << rep.slots << " warmup=" << rep.warmup
              << " qp_slope=" << ehcr::format_sig(rep.qp_slope)
              << " qs_slope=" << ehcr::format_sig(rep.qs_slope)
              << " primary_stable=" << rep.primary_stable
              << " secondary_stable=" << rep.secondary_stable << "\n";
    out.write("simulate.csv", csv);
    return kExitOk;
}

int cmd_validate(const ehcr::Scenario& sc, const Outputs& out) {
    // Analytic S1 rates against a dominant-mode run at the configured point,
    // plus the primary delay against the closed form.
    ehcr::AccessPolicy policy = sc.policy_given
                                    ? sc.policy
                                    : ehcr::AccessPolicy{0.0, 1.0, 0.0, 0.0, 0.0};
    ehcr::Traffic tr = sc.traffic;
    auto analytic = ehcr::s1_rates(policy, sc.probs, tr);
    if (analytic.status == ehcr::RateStatus::primary_unstable) {
        std::cerr << "validate: primary queue unstable at this operating point\n";
        return kExitInfeasible;
    }
    ehcr::SimConfig cfg = sc.sim;
    cfg.dominance = ehcr::Dominance::saturate_secondary;
    cfg.energy_model = ehcr::EnergyModel::md1_approx;
    cfg.feedback_enabled = false;
    auto rep = ehcr::run(cfg, policy, sc.probs, tr);

    std::ostringstream log;
    bool ok = true;
    auto check = [&](const std::string& name, double got, double want, double rel_tol) {
        double denom = std::max(std::fabs(want), 1e-9);
        bool pass = std::fabs(got - want) / denom <= rel_tol;
        ok = ok && pass;
        log << (pass ? "pass" : "FAIL") << "  " << name << "  analytic="
            << ehcr::format_sig(want) << "  simulated=" << ehcr::format_sig(got) << "\n";
    };
    check("mu_p", rep.mu_p, analytic.mu_p, 0.02);
    check("mu_s", rep.mu_s, analytic.mu_s, 0.02);
    auto d = ehcr::delay_s1(policy, sc.probs, tr);
    if (d.feasible && tr.lambda_p > 0.0) check("delay_p", rep.delay_p, d.d_p, 0.02);
    std::cout << log.str();
    out.write("validate.txt", log.str());
    return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"analytic and Monte Carlo toolkit for an energy-harvesting secondary user "
                 "sharing a slotted channel with a primary user"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<long long> slots_override;

    std::vector<std::string> commands = {"rates",  "optimize", "region",
                                         "delay",  "simulate", "validate"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key=value scenario file")->required();
        sub->add_option("--out", out_dir, "output directory for CSV/SVG artifacts");
        sub->add_option("--seed", seed_override, "override sim.seed");
        sub->add_option("--slots", slots_override, "override sim.slots");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    ehcr::Scenario sc;
    try {
        auto doc = ehcr::KvDocument::parse(read_file(config_path));
        sc = ehcr::build_scenario(doc);
    } catch (const std::exception& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    }
    if (seed_override) sc.sim.seed = *seed_override;
    if (slots_override) sc.sim.num_slots = *slots_override;

    Outputs out;
    if (!out_dir.empty()) {
        out.dir = out_dir;
        out.enabled = true;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "rates") return cmd_rates(sc, out);
        if (cmd == "optimize") return cmd_optimize(sc, out);
        if (cmd == "region") return cmd_region(sc, out);
        if (cmd == "delay") return cmd_delay(sc, out);
        if (cmd == "simulate") return cmd_simulate(sc, out);
        if (cmd == "validate") return cmd_validate(sc, out);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
