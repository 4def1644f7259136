#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehcr/rates.hpp"
#include "ehcr/types.hpp"

namespace ehcr {

// ---------------------------------------------------------------------------
// Objective evaluators shared by the optimizers and by the closed forms.
// These allow the stability constraint to hold with equality (the supremum of
// the region sits exactly on the boundary), unlike the reporting-oriented
// s1_rates/sf1_secondary_rate which flag lambda_p >= mu_p as unstable.
// ---------------------------------------------------------------------------

inline std::optional<double> s1_mu_s_boundary(const AccessPolicy& policy,
                                              const SuccessProbs& probs,
                                              const Traffic& traffic) {
    double mu_p = s1_primary_rate(policy, probs, traffic);
    if (mu_p <= 0.0 || traffic.lambda_p > mu_p + 1e-12) return std::nullopt;
    double busy = std::min(traffic.lambda_p / mu_p, 1.0);
    return traffic.lambda_e *
           ((1.0 - busy) * detail::secondary_branch_idle(policy, probs, traffic) +
            busy * detail::secondary_branch_busy(policy, probs, traffic));
}

inline std::optional<double> sf1_mu_s_boundary(const AccessPolicy& policy,
                                               const SuccessProbs& probs,
                                               const Traffic& traffic) {
    double alpha = s1_primary_rate(policy, probs, traffic);
    double gamma = probs.p_p - traffic.lambda_e * probs.delta_p() * policy.p_r;
    double eta = traffic.lambda_p * alpha + (1.0 - traffic.lambda_p) * gamma;
    if (gamma <= 0.0 || traffic.lambda_p > eta + 1e-12) return std::nullopt;
    double pi0 = std::max((eta - traffic.lambda_p) / gamma, 0.0);
    double sum_eps = traffic.lambda_p * (1.0 - alpha) / gamma;
    return traffic.lambda_e *
           (pi0 * detail::secondary_branch_idle(policy, probs, traffic) +
            traffic.lambda_p * detail::secondary_branch_busy(policy, probs, traffic) +
            sum_eps * policy.p_r * probs.p_0s_c);
}

// ---------------------------------------------------------------------------
// Generic quasiconcave fractional program: maximize theta(x)/w(x) over a box
// intersected with halfspaces a.x <= b, with theta nonnegative concave and w
// positive affine on the feasible set.
// ---------------------------------------------------------------------------

struct LinearConstraint {
    std::vector<double> a;
    double b = 0.0;
};

struct FractionalProgram {
    int dim = 0;
    std::function<double(const std::vector<double>&)> numerator;
    std::function<double(const std::vector<double>&)> denominator;
    std::vector<std::pair<double, double>> box;
    std::vector<LinearConstraint> constraints;

    void validate() const {
        if (dim < 1 || dim > 4)
            throw std::invalid_argument("FractionalProgram: dimension must be in [1,4]");
        if (static_cast<int>(box.size()) != dim)
            throw std::invalid_argument("FractionalProgram: box size must match dim");
        for (const auto& c : constraints)
            if (static_cast<int>(c.a.size()) != dim)
                throw std::invalid_argument("FractionalProgram: constraint size must match dim");
    }
};

struct FracSolution {
    std::vector<double> x;
    double value = 0.0;
    bool feasible = false;
    int iterations = 0;
    double tol = 0.0;
};

namespace detail {

constexpr double kFeasSlack = 1e-12;

inline bool point_feasible(const std::vector<double>& x,
                           const std::vector<std::pair<double, double>>& box,
                           const std::vector<LinearConstraint>& cons) {
    for (size_t i = 0; i < x.size(); ++i)
        if (x[i] < box[i].first - kFeasSlack || x[i] > box[i].second + kFeasSlack) return false;
    for (const auto& c : cons) {
        double s = 0.0;
        for (size_t i = 0; i < x.size(); ++i) s += c.a[i] * x[i];
        if (s > c.b + kFeasSlack) return false;
    }
    return true;
}

// Largest step t >= 0 such that x + t*d stays in box and halfspaces.
inline double max_feasible_step(const std::vector<double>& x, const std::vector<double>& d,
                                const std::vector<std::pair<double, double>>& box,
                                const std::vector<LinearConstraint>& cons) {
    double tmax = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < x.size(); ++i) {
        if (d[i] > 0.0) tmax = std::min(tmax, (box[i].second - x[i]) / d[i]);
        else if (d[i] < 0.0) tmax = std::min(tmax, (box[i].first - x[i]) / d[i]);
    }
    for (const auto& c : cons) {
        double ad = 0.0, ax = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            ad += c.a[i] * d[i];
            ax += c.a[i] * x[i];
        }
        if (ad > 0.0) tmax = std::min(tmax, (c.b - ax) / ad);
    }
    return std::max(tmax, 0.0);
}

inline std::pair<double, double> golden_max(const std::function<double(double)>& f, double a,
                                            double b, double tol) {
    const double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

// Feasible-direction ascent for a concave function on a small polytope:
// golden-section line searches along axis and diagonal directions from a
// feasible start. `stop_if_above` short-circuits sign tests in the bisection.
struct AscentResult {
    std::vector<double> x;
    double value;
};

inline AscentResult maximize_concave(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<std::pair<double, double>>& box,
                                     const std::vector<LinearConstraint>& cons,
                                     std::vector<double> start,
                                     double stop_if_above = std::numeric_limits<double>::infinity(),
                                     int max_sweeps = 60) {
    const int dim = static_cast<int>(box.size());
    std::vector<std::vector<double>> dirs;
    for (int i = 0; i < dim; ++i) {
        std::vector<double> d(dim, 0.0);
        d[i] = 1.0;
        dirs.push_back(d);
        d[i] = -1.0;
        dirs.push_back(d);
    }
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            for (double si : {1.0, -1.0})
                for (double sj : {1.0, -1.0}) {
                    std::vector<double> d(dim, 0.0);
                    d[i] = si;
                    d[j] = sj;
                    dirs.push_back(d);
                }

    double fbest = f(start);
    if (fbest >= stop_if_above) return {start, fbest};
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double gained = 0.0;
        for (const auto& d : dirs) {
            double tmax = max_feasible_step(start, d, box, cons);
            if (tmax < 1e-13) continue;
            auto [t, ft] = golden_max(
                [&](double tt) {
                    std::vector<double> p(start);
                    for (int i = 0; i < dim; ++i) p[i] += tt * d[i];
                    return f(p);
                },
                0.0, tmax, std::max(1e-10, tmax * 1e-9));
            if (ft > fbest + 1e-14) {
                gained += ft - fbest;
                for (int i = 0; i < dim; ++i) start[i] += t * d[i];
                fbest = ft;
                if (fbest >= stop_if_above) return {start, fbest};
            }
        }
        if (gained < 1e-12) break;
    }
    return {start, fbest};
}

inline std::vector<std::vector<double>> default_starts(
    const std::vector<std::pair<double, double>>& box,
    const std::vector<LinearConstraint>& cons) {
    const int dim = static_cast<int>(box.size());
    std::vector<std::vector<double>> raw;
    auto at = [&](double frac) {
        std::vector<double> p(dim);
        for (int i = 0; i < dim; ++i)
            p[i] = box[i].first + frac * (box[i].second - box[i].first);
        return p;
    };
    raw.push_back(at(0.0));
    raw.push_back(at(1.0));
    raw.push_back(at(0.5));
    raw.push_back(at(0.25));
    raw.push_back(at(0.75));
    // All box corners: the bilinear terms in the numerators create
    // off-diagonal local maxima a diagonal-only start set never escapes.
    for (unsigned mask = 1; mask + 1 < (1u << dim); ++mask) {
        std::vector<double> p(dim);
        for (int i = 0; i < dim; ++i)
            p[i] = (mask >> i) & 1u ? box[i].second : box[i].first;
        raw.push_back(p);
    }

    std::vector<std::vector<double>> starts;
    // Anchor: the box minimum is feasible for every program in this toolkit
    // whenever the program is feasible at all (access probabilities of zero
    // maximize the primary service rate). Scale the rest toward it.
    std::vector<double> anchor;
    for (const auto& p : raw)
        if (point_feasible(p, box, cons)) {
            anchor = p;
            break;
        }
    if (anchor.empty()) return starts;
    for (const auto& p : raw) {
        if (point_feasible(p, box, cons)) {
            starts.push_back(p);
            continue;
        }
        double lo = 0.0, hi = 1.0;  // blend toward the anchor
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (lo + hi);
            std::vector<double> q(p.size());
            for (size_t i = 0; i < p.size(); ++i) q[i] = anchor[i] + mid * (p[i] - anchor[i]);
            if (point_feasible(q, box, cons)) lo = mid;
            else hi = mid;
        }
        std::vector<double> q(p.size());
        for (size_t i = 0; i < p.size(); ++i) q[i] = anchor[i] + lo * (p[i] - anchor[i]);
        starts.push_back(q);
    }
    return starts;
}

}  // namespace detail

// Bisection on the level zeta: V(x) >= zeta is feasible iff the concave
// function theta - zeta*w attains a nonnegative maximum on the feasible set.
inline FracSolution bisect_quasiconcave(const FractionalProgram& prog, double tol = 1e-7) {
    prog.validate();
    if (!(tol > 0.0)) throw std::invalid_argument("bisect_quasiconcave: tol must be positive");
    FracSolution sol;
    sol.tol = tol;
    auto starts = detail::default_starts(prog.box, prog.constraints);
    if (starts.empty()) return sol;  // infeasible

    auto value_of = [&](const std::vector<double>& x) {
        double w = prog.denominator(x);
        return w > 0.0 ? prog.numerator(x) / w : 0.0;
    };

    sol.feasible = true;
    sol.x = starts.front();
    for (const auto& s : starts)
        if (value_of(s) > value_of(sol.x)) sol.x = s;
    double lo = std::max(0.0, value_of(sol.x));
    double hi = 1.0;
    while (hi - lo > tol) {
        ++sol.iterations;
        double zeta = 0.5 * (lo + hi);
        auto g = [&](const std::vector<double>& x) {
            return prog.numerator(x) - zeta * prog.denominator(x);
        };
        bool ok = false;
        std::vector<double> best_x;
        double best_g = -std::numeric_limits<double>::infinity();
        for (const auto& s : starts) {
            auto r = detail::maximize_concave(g, prog.box, prog.constraints, s, 0.0);
            if (r.value > best_g) {
                best_g = r.value;
                best_x = r.x;
            }
            if (best_g >= 0.0) {
                ok = true;
                break;
            }
        }
        if (ok) {
            lo = zeta;
            if (value_of(best_x) > value_of(sol.x)) sol.x = best_x;
        } else {
            hi = zeta;
        }
    }
    // Final polish at the achieved level.
    double zeta = value_of(sol.x);
    auto g = [&](const std::vector<double>& x) {
        return prog.numerator(x) - zeta * prog.denominator(x);
    };
    auto r = detail::maximize_concave(g, prog.box, prog.constraints, sol.x);
    if (value_of(r.x) > value_of(sol.x)) sol.x = r.x;
    sol.value = value_of(sol.x);
    return sol;
}

// ---------------------------------------------------------------------------
// Policy-level solve results.
// ---------------------------------------------------------------------------

struct SolveResult {
    AccessPolicy policy;
    double value = 0.0;
    bool feasible = false;
    int iterations = 0;
    double tol = 0.0;

    // Lexicographic order on (p_s, p_t, p_f, p_b, p_r), used for tie-breaking.
    static bool lex_less(const AccessPolicy& a, const AccessPolicy& b) {
        auto key = [](const AccessPolicy& p) {
            return std::array<double, 5>{p.p_s, p.p_t, p.p_f, p.p_b, p.p_r};
        };
        return key(a) < key(b);
    }
};

namespace detail {

constexpr double kTieTol = 1e-12;

inline std::vector<double> uniform_grid(int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = (n == 1) ? 0.0 : static_cast<double>(i) / (n - 1);
    return g;
}

// Try lowering coordinates (in lexicographic significance order) without
// losing objective value; keeps flat directions pinned at zero.
inline void lex_polish(std::vector<double>& x,
                       const std::function<double(const std::vector<double>&)>& feasible_value,
                       double current) {
    // Snap near-saturated coordinates to 1 when strictly better (line searches
    // stop a hair short of the box edge), then zero out coordinates that cost
    // nothing, preferring the lexicographically smallest policy.
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= 1.0 || x[i] < 1.0 - 1e-6) continue;
        std::vector<double> trial(x);
        trial[i] = 1.0;
        double v = feasible_value(trial);
        if (std::isfinite(v) && v > current) {
            x = trial;
            current = v;
        }
    }
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) continue;
        std::vector<double> trial(x);
        trial[i] = 0.0;
        double v = feasible_value(trial);
        if (std::isfinite(v) && v >= current - kTieTol) {
            x = trial;
            current = std::max(current, v);
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// First dominant system, no feedback (program over (p_t, p_b, p_f) per p_s).
// ---------------------------------------------------------------------------

namespace detail {

// Coefficients of mu_p = p_p - d . (pt, pb, pf) for a fixed p_s.
inline std::vector<double> s1_interference_coeffs(double ps, const SuccessProbs& probs,
                                                  const Traffic& tr) {
    double l = tr.lambda_e * probs.delta_p();
    return {l * (1.0 - ps), l * ps * (1.0 - tr.p_md), l * ps * tr.p_md};
}

inline AccessPolicy s1_policy(double ps, const std::vector<double>& x) {
    return AccessPolicy{.p_s = ps, .p_t = x[0], .p_f = x[2], .p_b = x[1], .p_r = 0.0};
}

inline FractionalProgram s1_program(double ps, const SuccessProbs& probs, const Traffic& tr,
                                    double mu_p_min) {
    FractionalProgram prog;
    prog.dim = 3;
    prog.box.assign(3, {0.0, 1.0});
    auto d = s1_interference_coeffs(ps, probs, tr);
    prog.constraints.push_back({d, probs.p_p - std::max(mu_p_min, 1e-9)});
    double la = tr.lambda_p, le = tr.lambda_e;
    prog.numerator = [ps, probs, tr, d, la, le](const std::vector<double>& x) {
        double mu_p = probs.p_p - (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]);
        AccessPolicy pol = s1_policy(ps, x);
        double X = detail::secondary_branch_idle(pol, probs, tr);
        double Y = detail::secondary_branch_busy(pol, probs, tr);
        return le * ((mu_p - la) * X + la * Y);
    };
    prog.denominator = [probs, d](const std::vector<double>& x) {
        return probs.p_p - (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]);
    };
    return prog;
}

}  // namespace detail

// Maximum secondary stable throughput of S1 at a given lambda_p: a family of
// quasiconcave programs parameterized by p_s, best of the grid plus one
// golden-section refinement around the best grid point.
inline SolveResult optimize_s1(const SuccessProbs& probs, const Traffic& traffic,
                               double lambda_p, std::vector<double> ps_grid = {},
                               double tol = 1e-7, double mu_p_floor = -1.0) {
    probs.validate();
    traffic.validate();
    require_prob(lambda_p, "lambda_p");
    Traffic tr = traffic;
    tr.lambda_p = lambda_p;
    double mu_p_min = (mu_p_floor >= 0.0) ? mu_p_floor : lambda_p;

    SolveResult best;
    best.tol = tol;
    if (probs.p_p < mu_p_min) return best;  // even a silent SU cannot serve the PU
    if (ps_grid.empty()) ps_grid = detail::uniform_grid(101);

    auto objective = [&](const AccessPolicy& pol) {
        auto v = s1_mu_s_boundary(pol, probs, tr);
        double mu_p = s1_primary_rate(pol, probs, tr);
        if (!v || mu_p < mu_p_min - detail::kFeasSlack)
            return -std::numeric_limits<double>::infinity();
        return *v;
    };
    auto solve_ps = [&](double ps) {
        auto prog = detail::s1_program(ps, probs, tr, mu_p_min);
        auto sol = bisect_quasiconcave(prog, tol);
        SolveResult r;
        r.tol = tol;
        if (!sol.feasible) return r;
        detail::lex_polish(sol.x, [&](const std::vector<double>& x) {
            return objective(detail::s1_policy(ps, x));
        }, sol.value);
        r.policy = detail::s1_policy(ps, sol.x);
        double v = objective(r.policy);
        if (!std::isfinite(v)) return r;
        r.feasible = true;
        r.value = v;
        r.iterations = sol.iterations;
        return r;
    };

    size_t best_idx = 0;
    for (size_t i = 0; i < ps_grid.size(); ++i) {
        auto r = solve_ps(ps_grid[i]);
        best.iterations += r.iterations;
        if (r.feasible) {
            bool better = !best.feasible || r.value > best.value + detail::kTieTol ||
                          (r.value > best.value - detail::kTieTol &&
                           SolveResult::lex_less(r.policy, best.policy));
            if (better) {
                best.feasible = true;
                best.policy = r.policy;
                best.value = r.value;
                best_idx = i;
            }
        }
    }
    if (best.feasible && ps_grid.size() > 1) {
        double step = 1.0 / (ps_grid.size() - 1);
        double lo = std::max(0.0, ps_grid[best_idx] - step);
        double hi = std::min(1.0, ps_grid[best_idx] + step);
        auto [ps_ref, v_ref] = detail::golden_max(
            [&](double ps) {
                auto r = solve_ps(ps);
                return r.feasible ? r.value : -1.0;
            },
            lo, hi, 1e-4);
        auto r = solve_ps(ps_ref);
        if (r.feasible && r.value > best.value + detail::kTieTol) {
            best.policy = r.policy;
            best.value = r.value;
        }
        (void)v_ref;
    }
    return best;
}

// Closed form for S1 with p_s = 0 (single access probability p_t).
inline SolveResult closed_form_s1_ps0(const SuccessProbs& probs, const Traffic& traffic,
                                      double lambda_p, double mu_p_floor = -1.0) {
    probs.validate();
    traffic.validate();
    require_prob(lambda_p, "lambda_p");
    Traffic tr = traffic;
    tr.lambda_p = lambda_p;
    double mu_p_min = (mu_p_floor >= 0.0) ? mu_p_floor : lambda_p;

    SolveResult res;
    res.tol = 0.0;
    if (probs.p_p < mu_p_min) return res;
    double l = tr.lambda_e * probs.delta_p();
    double cap = (l > 0.0) ? std::min(1.0, (probs.p_p - mu_p_min) / l) : 1.0;
    double ratio = (probs.p_0s > 0.0) ? probs.p_0s_c / probs.p_0s : 0.0;
    double root;
    if (l > 0.0)
        root = (probs.p_p - std::sqrt(probs.p_p * lambda_p * (1.0 - ratio))) / l;
    else
        root = 1.0;
    double pt = std::min(cap, std::max(root, 0.0));
    res.policy = AccessPolicy{.p_s = 0.0, .p_t = pt, .p_f = 0.0, .p_b = 0.0, .p_r = 0.0};
    auto v = s1_mu_s_boundary(res.policy, probs, tr);
    if (!v) return res;
    res.feasible = true;
    res.value = *v;
    return res;
}

// ---------------------------------------------------------------------------
// Second dominant system: feasibility bound only, mu_p independent of p_t.
// ---------------------------------------------------------------------------

inline SolveResult feasibility_s2(const SuccessProbs& probs, const Traffic& traffic) {
    probs.validate();
    traffic.validate();
    SolveResult res;
    double cap = traffic.lambda_e * probs.p_0s_c;
    if (traffic.lambda_s > cap + detail::kFeasSlack) return res;  // infeasible
    if (!(traffic.lambda_e > 0.0) && traffic.lambda_s > 0.0) return res;
    double pt_min = (cap > 0.0) ? traffic.lambda_s / cap : 0.0;
    res.feasible = true;
    res.policy = AccessPolicy{.p_s = 0.0, .p_t = pt_min, .p_f = 0.0, .p_b = 0.0, .p_r = 0.0};
    res.value = s2_rates(res.policy, probs, traffic).mu_p;
    return res;
}

// Largest secondary arrival rate the second dominant system supports at a
// given primary arrival rate.
inline double s2_boundary(const SuccessProbs& probs, const Traffic& traffic, double lambda_p) {
    double cap = traffic.lambda_e * probs.p_0s_c;
    double dp = probs.delta_p();
    if (dp > 0.0) cap = std::min(cap, std::max(0.0, probs.p_p - lambda_p) * probs.p_0s_c / dp);
    else if (lambda_p > probs.p_p) cap = 0.0;
    return cap;
}

// ---------------------------------------------------------------------------
// First dominant system with feedback (program over (p_t, p_b, p_f, p_r)).
// ---------------------------------------------------------------------------

namespace detail {

inline AccessPolicy sf_policy(double ps, const std::vector<double>& x) {
    return AccessPolicy{.p_s = ps, .p_t = x[0], .p_f = x[2], .p_b = x[1], .p_r = x[3]};
}

inline FractionalProgram sf1_program(double ps, const SuccessProbs& probs, const Traffic& tr) {
    FractionalProgram prog;
    prog.dim = 4;
    prog.box.assign(4, {0.0, 1.0});
    auto d = s1_interference_coeffs(ps, probs, tr);
    double l = tr.lambda_e * probs.delta_p();
    double la = tr.lambda_p, le = tr.lambda_e;
    // lambda_p <= eta  <=>  la*(d.P3) + (1-la)*l*pr <= p_p - la
    prog.constraints.push_back(
        {{la * d[0], la * d[1], la * d[2], (1.0 - la) * l}, probs.p_p - la});
    // gamma_p stays positive
    prog.constraints.push_back({{0.0, 0.0, 0.0, l}, probs.p_p - 1e-9});
    prog.numerator = [ps, probs, tr, d, l, la, le](const std::vector<double>& x) {
        AccessPolicy pol = sf_policy(ps, x);
        double alpha = probs.p_p - (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]);
        double gamma = probs.p_p - l * x[3];
        double eta = la * alpha + (1.0 - la) * gamma;
        double X = detail::secondary_branch_idle(pol, probs, tr);
        double Y = detail::secondary_branch_busy(pol, probs, tr);
        return le * ((eta - la) * X + la * gamma * Y + la * (1.0 - alpha) * x[3] * probs.p_0s_c);
    };
    prog.denominator = [probs, l](const std::vector<double>& x) {
        return probs.p_p - l * x[3];
    };
    return prog;
}

}  // namespace detail

// Maximum secondary stable throughput of S1^f. `hint` lets the caller seed the
// search with a known-good policy (e.g. the no-feedback optimum mapped through
// p_r = access probability on busy slots), which also makes the feedback
// optimum provably dominate the no-feedback one.
inline SolveResult optimize_sf1(const SuccessProbs& probs, const Traffic& traffic,
                                double lambda_p, std::vector<double> ps_grid = {},
                                double tol = 1e-7, const SolveResult* hint = nullptr) {
    probs.validate();
    traffic.validate();
    require_prob(lambda_p, "lambda_p");
    Traffic tr = traffic;
    tr.lambda_p = lambda_p;

    SolveResult best;
    best.tol = tol;
    if (probs.p_p < lambda_p) return best;
    if (ps_grid.empty()) ps_grid = detail::uniform_grid(101);

    auto objective = [&](const AccessPolicy& pol) {
        auto v = sf1_mu_s_boundary(pol, probs, tr);
        return v ? *v : -std::numeric_limits<double>::infinity();
    };
    auto solve_ps = [&](double ps) {
        auto prog = detail::sf1_program(ps, probs, tr);
        auto sol = bisect_quasiconcave(prog, tol);
        SolveResult r;
        r.tol = tol;
        if (!sol.feasible) return r;
        detail::lex_polish(sol.x, [&](const std::vector<double>& x) {
            return objective(detail::sf_policy(ps, x));
        }, sol.value);
        r.policy = detail::sf_policy(ps, sol.x);
        double v = objective(r.policy);
        if (!std::isfinite(v)) return r;
        r.feasible = true;
        r.value = v;
        r.iterations = sol.iterations;
        return r;
    };

    size_t best_idx = 0;
    for (size_t i = 0; i < ps_grid.size(); ++i) {
        auto r = solve_ps(ps_grid[i]);
        best.iterations += r.iterations;
        if (r.feasible) {
            bool better = !best.feasible || r.value > best.value + detail::kTieTol ||
                          (r.value > best.value - detail::kTieTol &&
                           SolveResult::lex_less(r.policy, best.policy));
            if (better) {
                best.feasible = true;
                best.policy = r.policy;
                best.value = r.value;
                best_idx = i;
            }
        }
    }
    if (best.feasible && ps_grid.size() > 1) {
        double step = 1.0 / (ps_grid.size() - 1);
        double lo = std::max(0.0, ps_grid[best_idx] - step);
        double hi = std::min(1.0, ps_grid[best_idx] + step);
        auto [ps_ref, v_ref] = detail::golden_max(
            [&](double ps) {
                auto r = solve_ps(ps);
                return r.feasible ? r.value : -1.0;
            },
            lo, hi, 1e-4);
        (void)v_ref;
        auto r = solve_ps(ps_ref);
        if (r.feasible && r.value > best.value + detail::kTieTol) {
            best.policy = r.policy;
            best.value = r.value;
        }
    }
    if (hint && hint->feasible) {
        AccessPolicy mapped = hint->policy;
        mapped.p_r = detail::access_prob_busy(mapped, tr);
        auto v = sf1_mu_s_boundary(mapped, probs, tr);
        if (v && (!best.feasible || *v > best.value + detail::kTieTol)) {
            best.feasible = true;
            best.policy = mapped;
            best.value = *v;
        }
    }
    return best;
}

// Closed form for S^f with p_s = 0: concave program in p_t per grid value of
// p_r, one golden refinement around the best p_r.
inline SolveResult closed_form_sf_ps0(const SuccessProbs& probs, const Traffic& traffic,
                                      double lambda_p, std::vector<double> pr_grid = {}) {
    probs.validate();
    traffic.validate();
    require_prob(lambda_p, "lambda_p");
    Traffic tr = traffic;
    tr.lambda_p = lambda_p;
    if (pr_grid.empty()) pr_grid = detail::uniform_grid(101);

    double l = tr.lambda_e * probs.delta_p();
    double ratio = (probs.p_0s > 0.0) ? probs.p_0s_c / probs.p_0s : 0.0;

    SolveResult best;
    auto eval_pr = [&](double pr) -> SolveResult {
        SolveResult r;
        double bound_num = probs.p_p - (1.0 - lambda_p) * l * pr - lambda_p;
        if (lambda_p > 0.0 && bound_num < 0.0) return r;  // lambda_p <= eta impossible
        double pt;
        if (lambda_p > 0.0 && l > 0.0) {
            double cap = bound_num / (lambda_p * l);
            double interior = (bound_num + lambda_p * ratio * probs.p_p) / (2.0 * lambda_p * l);
            pt = std::clamp(std::min(cap, interior), 0.0, 1.0);
        } else {
            pt = 1.0;
        }
        r.policy = AccessPolicy{.p_s = 0.0, .p_t = pt, .p_f = 0.0, .p_b = 0.0, .p_r = pr};
        auto v = sf1_mu_s_boundary(r.policy, probs, tr);
        if (!v) return r;
        r.feasible = true;
        r.value = *v;
        return r;
    };

    size_t best_idx = 0;
    for (size_t i = 0; i < pr_grid.size(); ++i) {
        auto r = eval_pr(pr_grid[i]);
        if (r.feasible) {
            bool better = !best.feasible || r.value > best.value + detail::kTieTol ||
                          (r.value > best.value - detail::kTieTol &&
                           SolveResult::lex_less(r.policy, best.policy));
            if (better) {
                best = r;
                best_idx = i;
            }
        }
    }
    if (best.feasible && pr_grid.size() > 1) {
        double step = 1.0 / (pr_grid.size() - 1);
        double lo = std::max(0.0, pr_grid[best_idx] - step);
        double hi = std::min(1.0, pr_grid[best_idx] + step);
        auto [pr_ref, v_ref] = detail::golden_max(
            [&](double pr) {
                auto r = eval_pr(pr);
                return r.feasible ? r.value : -1.0;
            },
            lo, hi, 1e-5);
        (void)v_ref;
        auto r = eval_pr(pr_ref);
        if (r.feasible && r.value > best.value + detail::kTieTol) best = r;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Delay-constrained variants.
// ---------------------------------------------------------------------------

// S1 with the delay constraint D_p <= D, which linearizes to
// mu_p >= lambda_p + (1-lambda_p)/D and subsumes stability.
inline SolveResult optimize_s1_delay(const SuccessProbs& probs, const Traffic& traffic,
                                     double lambda_p, double delay_bound,
                                     std::vector<double> ps_grid = {}, double tol = 1e-7) {
    if (!(delay_bound >= 1.0)) throw std::invalid_argument("delay bound must be >= 1 slot");
    double mu_p_min = lambda_p + (1.0 - lambda_p) / delay_bound;
    return optimize_s1(probs, traffic, lambda_p, std::move(ps_grid), tol, mu_p_min);
}

inline SolveResult closed_form_s1_delay_ps0(const SuccessProbs& probs, const Traffic& traffic,
                                            double lambda_p, double delay_bound) {
    if (!(delay_bound >= 1.0)) throw std::invalid_argument("delay bound must be >= 1 slot");
    double mu_p_min = lambda_p + (1.0 - lambda_p) / delay_bound;
    return closed_form_s1_ps0(probs, traffic, lambda_p, mu_p_min);
}

namespace detail {

// Rearranged feedback delay constraint: E(eta) <= 0 iff D_p <= D, for fixed
// gamma_p and lambda_p > 0. Convex in eta with E(1) = 0, so the feasible set
// is an interval [eta_min, 1].
inline double delay_constraint_e(double eta, double gamma, double lambda_p, double delay_bound) {
    double w = lambda_p + (1.0 - lambda_p) * gamma;
    return (eta - gamma) * (eta - lambda_p) * (eta - lambda_p) / eta +
           (1.0 - lambda_p) * (w - eta) +
           delay_bound * (eta - lambda_p) * (eta - 1.0) * gamma * lambda_p / eta;
}

}  // namespace detail

// S^f with the delay constraint: a concave program over (p_t, p_b, p_f) for
// each grid pair (p_s, p_r), since fixing p_r freezes the denominator gamma_p.
inline SolveResult optimize_sf_delay(const SuccessProbs& probs, const Traffic& traffic,
                                     double lambda_p, double delay_bound,
                                     std::vector<double> ps_grid = {},
                                     std::vector<double> pr_grid = {}) {
    probs.validate();
    traffic.validate();
    require_prob(lambda_p, "lambda_p");
    if (!(delay_bound >= 1.0)) throw std::invalid_argument("delay bound must be >= 1 slot");
    Traffic tr = traffic;
    tr.lambda_p = lambda_p;
    if (ps_grid.empty()) ps_grid = detail::uniform_grid(101);
    if (pr_grid.empty()) pr_grid = detail::uniform_grid(101);

    double l = tr.lambda_e * probs.delta_p();
    SolveResult best;

    auto objective = [&](const AccessPolicy& pol) -> double {
        auto v = sf1_mu_s_boundary(pol, probs, tr);
        if (!v) return -std::numeric_limits<double>::infinity();
        auto chain = feedback_chain(pol, probs, tr);
        if (!chain.stable) return -std::numeric_limits<double>::infinity();
        DelayReport d = delay_sf1_given(chain);
        if (!d.feasible || d.d_p > delay_bound * (1.0 + 1e-9))
            return -std::numeric_limits<double>::infinity();
        return *v;
    };

    auto solve_cell = [&](double ps, double pr) -> SolveResult {
        SolveResult r;
        double gamma = probs.p_p - l * pr;
        if (gamma <= 1e-9) return r;
        auto d = detail::s1_interference_coeffs(ps, probs, tr);

        std::vector<LinearConstraint> cons;
        if (lambda_p > 0.0) {
            double eta_hi = lambda_p * probs.p_p + (1.0 - lambda_p) * gamma;
            double eta_lo = lambda_p * (probs.p_p - l) + (1.0 - lambda_p) * gamma;
            if (eta_hi <= lambda_p) return r;
            double lo_probe = std::max(eta_lo, lambda_p + 1e-12);
            if (detail::delay_constraint_e(eta_hi, gamma, lambda_p, delay_bound) > 0.0)
                return r;  // even the quietest policy violates the delay bound
            double eta_min = lo_probe;
            if (detail::delay_constraint_e(lo_probe, gamma, lambda_p, delay_bound) > 0.0) {
                double a = lo_probe, b = eta_hi;  // E(a) > 0 >= E(b)
                for (int it = 0; it < 80; ++it) {
                    double m = 0.5 * (a + b);
                    if (detail::delay_constraint_e(m, gamma, lambda_p, delay_bound) > 0.0) a = m;
                    else b = m;
                }
                eta_min = b;
            }
            // eta(P) >= eta_min  <=>  lambda_p * d.P <= eta_hi - eta_min
            cons.push_back({{lambda_p * d[0], lambda_p * d[1], lambda_p * d[2]},
                            eta_hi - eta_min});
        } else {
            // lambda_p = 0: eta == gamma; the delay bound reduces to a lower
            // bound on alpha_p: alpha >= gamma + 1 - D*gamma.
            if (gamma >= 1.0 - 1e-12) {
                // never a failed first transmission; delay is 1 slot, no bound
            } else {
                double alpha_min = gamma + 1.0 - delay_bound * gamma;
                // alpha = p_p - d.P >= alpha_min
                cons.push_back({{d[0], d[1], d[2]}, probs.p_p - alpha_min});
            }
        }

        std::vector<std::pair<double, double>> box(3, {0.0, 1.0});
        std::vector<double> zero(3, 0.0);
        if (!detail::point_feasible(zero, box, cons)) return r;
        auto f = [&](const std::vector<double>& x) {
            AccessPolicy pol = detail::sf_policy(ps, x);
            pol.p_r = pr;
            auto v = sf1_mu_s_boundary(pol, probs, tr);
            return v ? *v : -1.0;
        };
        auto asc = detail::maximize_concave(f, box, cons, zero);
        for (auto s : {0.25, 0.75}) {
            std::vector<double> start(3, s);
            if (!detail::point_feasible(start, box, cons)) {
                double t = detail::max_feasible_step(zero, start, box, cons);
                for (auto& c : start) c *= std::min(1.0, t);
            }
            auto a2 = detail::maximize_concave(f, box, cons, start);
            if (a2.value > asc.value) asc = a2;
        }
        detail::lex_polish(asc.x, [&](const std::vector<double>& x) {
            AccessPolicy pol = detail::sf_policy(ps, x);
            pol.p_r = pr;
            return objective(pol);
        }, asc.value);
        AccessPolicy pol = detail::sf_policy(ps, asc.x);
        pol.p_r = pr;
        double v = objective(pol);
        if (!std::isfinite(v)) return r;
        r.feasible = true;
        r.policy = pol;
        r.value = v;
        return r;
    };

    size_t best_ps = 0, best_pr = 0;
    for (size_t i = 0; i < ps_grid.size(); ++i)
        for (size_t j = 0; j < pr_grid.size(); ++j) {
            auto r = solve_cell(ps_grid[i], pr_grid[j]);
            if (r.feasible) {
                bool better = !best.feasible || r.value > best.value + detail::kTieTol ||
                              (r.value > best.value - detail::kTieTol &&
                               SolveResult::lex_less(r.policy, best.policy));
                if (better) {
                    best = r;
                    best_ps = i;
                    best_pr = j;
                }
            }
        }
    if (best.feasible) {
        if (pr_grid.size() > 1) {
            double step = 1.0 / (pr_grid.size() - 1);
            double lo = std::max(0.0, pr_grid[best_pr] - step);
            double hi = std::min(1.0, pr_grid[best_pr] + step);
            auto [pr_ref, v1] = detail::golden_max(
                [&](double pr) {
                    auto r = solve_cell(ps_grid[best_ps], pr);
                    return r.feasible ? r.value : -1.0;
                },
                lo, hi, 1e-4);
            (void)v1;
            auto r = solve_cell(ps_grid[best_ps], pr_ref);
            if (r.feasible && r.value > best.value + detail::kTieTol) best = r;
        }
        if (ps_grid.size() > 1) {
            double step = 1.0 / (ps_grid.size() - 1);
            double lo = std::max(0.0, ps_grid[best_ps] - step);
            double hi = std::min(1.0, ps_grid[best_ps] + step);
            auto [ps_ref, v2] = detail::golden_max(
                [&](double ps) {
                    auto r = solve_cell(ps, best.policy.p_r);
                    return r.feasible ? r.value : -1.0;
                },
                lo, hi, 1e-4);
            (void)v2;
            auto r = solve_cell(ps_ref, best.policy.p_r);
            if (r.feasible && r.value > best.value + detail::kTieTol) best = r;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Stability region sweep.
// ---------------------------------------------------------------------------

enum class SystemTag { s1, s2, s1f, conventional };

inline const char* to_string(SystemTag t) {
    switch (t) {
        case SystemTag::s1: return "S1";
        case SystemTag::s2: return "S2";
        case SystemTag::s1f: return "S1f";
        case SystemTag::conventional: return "conventional";
    }
    return "?";
}

struct RegionPoint {
    double lambda_p = 0.0;
    double lambda_s_max = 0.0;
    SystemTag tag = SystemTag::s1;
    AccessPolicy policy;
    double mu_p = 0.0;
};

struct RegionCurve {
    std::vector<RegionPoint> points;
};

// Union of the dominant systems: for each lambda_p, the larger of the
// optimized first dominant system and the S2 feasibility bound.
inline RegionCurve stability_region(const SuccessProbs& probs, const Traffic& traffic_template,
                                    const std::vector<double>& lambda_p_grid, bool feedback,
                                    std::vector<double> ps_grid = {}, double tol = 1e-7) {
    RegionCurve curve;
    for (double lp : lambda_p_grid) {
        if (lp > probs.p_p) continue;
        Traffic tr = traffic_template;
        tr.lambda_p = lp;
        SolveResult first = optimize_s1(probs, tr, lp, ps_grid, tol);
        SolveResult chosen = first;
        SystemTag tag = SystemTag::s1;
        if (feedback) {
            SolveResult fb = optimize_sf1(probs, tr, lp, ps_grid, tol, &first);
            if (fb.feasible) {
                chosen = fb;
                tag = SystemTag::s1f;
            }
        }
        double s2 = s2_boundary(probs, tr, lp);
        RegionPoint pt;
        pt.lambda_p = lp;
        if (chosen.feasible && chosen.value >= s2) {
            pt.lambda_s_max = chosen.value;
            pt.policy = chosen.policy;
            pt.tag = tag;
            AccessPolicy conv = conventional_policy();
            auto near = [](double a, double b) { return std::fabs(a - b) < 1e-6; };
            if (near(pt.policy.p_s, conv.p_s) && near(pt.policy.p_t, conv.p_t) &&
                near(pt.policy.p_f, conv.p_f) && near(pt.policy.p_b, conv.p_b) &&
                (!feedback || near(pt.policy.p_r, 0.0)))
                pt.tag = SystemTag::conventional;
        } else if (s2 > 0.0 || chosen.feasible) {
            pt.lambda_s_max = s2;
            pt.tag = SystemTag::s2;
            pt.policy = AccessPolicy{.p_s = 0.0, .p_t = 1.0, .p_f = 0.0, .p_b = 0.0, .p_r = 0.0};
        } else {
            continue;  // no system feasible at this lambda_p
        }
        pt.mu_p = s1_primary_rate(pt.policy, probs, tr);
        curve.points.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Numeric quasiconcavity check (random segment sampling).
// ---------------------------------------------------------------------------

struct QcReport {
    bool pass = true;
    long segments_checked = 0;
    std::vector<double> x, y;
    double t = 0.0;
    double violation = 0.0;
};

inline QcReport check_quasiconcavity(
    const std::function<double(const std::vector<double>&)>& v,
    const std::vector<std::pair<double, double>>& box, long samples, std::uint64_t seed = 1,
    const std::function<bool(const std::vector<double>&)>& feasible = nullptr) {
    QcReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int dim = static_cast<int>(box.size());
    auto draw = [&]() {
        std::vector<double> p(dim);
        for (int attempt = 0; attempt < 10000; ++attempt) {
            for (int i = 0; i < dim; ++i)
                p[i] = box[i].first + uni(rng) * (box[i].second - box[i].first);
            if (!feasible || feasible(p)) return p;
        }
        throw std::runtime_error("check_quasiconcavity: could not sample a feasible point");
    };
    for (long s = 0; s < samples; ++s) {
        auto x = draw();
        auto y = draw();
        double t = uni(rng);
        std::vector<double> m(dim);
        for (int i = 0; i < dim; ++i) m[i] = t * x[i] + (1.0 - t) * y[i];
        double vm = v(m);
        double floor = std::min(v(x), v(y)) - 1e-9;
        ++rep.segments_checked;
        if (vm < floor) {
            rep.pass = false;
            rep.x = x;
            rep.y = y;
            rep.t = t;
            rep.violation = floor - vm;
            return rep;
        }
    }
    return rep;
}

}  // namespace ehcr
