#include <catch2/catch_amalgamated.hpp>

#include "ehcr/config.hpp"

using namespace ehcr;

TEST_CASE("key=value parsing") {
    SECTION("comments, whitespace and mixed types") {
        auto doc = KvDocument::parse(
            "# scenario\n"
            "traffic.lambda_p = 0.3   # inline comment\n"
            "solver.feedback = yes\n"
            "solver.delay_bounds = 2, 4, 8\n");
        auto sc = build_scenario(doc);
        CHECK(sc.traffic.lambda_p == 0.3);
        CHECK(sc.feedback);
        REQUIRE(sc.delay_bounds.size() == 3);
        CHECK(sc.delay_bounds[2] == 8.0);
    }
    SECTION("missing equals sign reports the line") {
        try {
            KvDocument::parse("traffic.lambda_p = 0.1\nnonsense line\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("key = value") != std::string::npos);
        }
    }
    SECTION("duplicate key rejected") {
        try {
            KvDocument::parse("a.b = 1\na.b = 2\n");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("duplicate key 'a.b'") != std::string::npos);
        }
    }
    SECTION("empty value rejected") {
        CHECK_THROWS_AS(KvDocument::parse("a.b =\n"), ConfigError);
    }
}

TEST_CASE("scenario validation") {
    SECTION("probability out of range names the key") {
        auto doc = KvDocument::parse("policy.p_t = 1.3\n");
        try {
            build_scenario(doc);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            CHECK(msg.find("policy.p_t") != std::string::npos);
            CHECK(msg.find("outside [0, 1]") != std::string::npos);
        }
    }
    SECTION("unknown key reported with its location") {
        auto doc = KvDocument::parse("traffic.lambda_p = 0.2\nsolvr.tol = 1e-6\n");
        try {
            build_scenario(doc);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("unknown key 'solvr.tol'") != std::string::npos);
        }
    }
    SECTION("non-numeric value names the key") {
        auto doc = KvDocument::parse("solver.tol = tiny\n");
        CHECK_THROWS_AS(build_scenario(doc), ConfigError);
    }
    SECTION("bad boolean names the key") {
        auto doc = KvDocument::parse("solver.feedback = maybe\n");
        CHECK_THROWS_AS(build_scenario(doc), ConfigError);
    }
    SECTION("unknown preset rejected") {
        auto doc = KvDocument::parse("probs.preset = fig99\n");
        CHECK_THROWS_AS(build_scenario(doc), ConfigError);
    }
    SECTION("preset populates probabilities and traffic") {
        auto doc = KvDocument::parse("probs.preset = fig3\n");
        auto sc = build_scenario(doc);
        auto preset = find_preset("fig3");
        REQUIRE(preset);
        CHECK(sc.probs.p_p == preset->probs.p_p);
        CHECK(sc.probs.p_1s_c == preset->probs.p_1s_c);
        CHECK(sc.traffic.lambda_e == preset->lambda_e);
        CHECK(sc.traffic.p_fa == preset->p_fa);
    }
    SECTION("explicit probabilities override the preset") {
        auto doc = KvDocument::parse("probs.preset = fig3\nprobs.p_p = 0.9\n");
        auto sc = build_scenario(doc);
        CHECK(sc.probs.p_p == 0.9);
    }
    SECTION("solver grid and defaults") {
        auto doc = KvDocument::parse(
            "solver.lambda_p_min = 0\nsolver.lambda_p_max = 0.6\nsolver.lambda_p_steps = 4\n");
        auto sc = build_scenario(doc);
        REQUIRE(sc.lambda_p_grid.size() == 4);
        CHECK(sc.lambda_p_grid[1] == Catch::Approx(0.2).margin(1e-12));
        CHECK(sc.ps_points == 101);
        CHECK(sc.tol == 1e-7);
    }
    SECTION("simulator block round-trips") {
        auto doc = KvDocument::parse(
            "sim.slots = 5000\nsim.seed = 7\nsim.energy_model = exact\n"
            "sim.dominance = saturate-secondary\nsim.feedback = true\n");
        auto sc = build_scenario(doc);
        CHECK(sc.sim.num_slots == 5000);
        CHECK(sc.sim.seed == 7);
        CHECK(sc.sim.energy_model == EnergyModel::exact);
        CHECK(sc.sim.dominance == Dominance::saturate_secondary);
        CHECK(sc.sim.feedback_enabled);
    }
}

TEST_CASE("csv emission") {
    SECTION("twelve significant digits, fixed column order") {
        CHECK(format_sig(1.0 / 3.0) == "0.333333333333");
        CHECK(format_sig(0.5) == "0.5");
        CHECK(format_sig(0.0) == "0");
        CsvRow row;
        row.lambda_p = 0.1;
        row.lambda_s_max = 1.0 / 7.0;
        row.winning_system = "s1";
        row.policy = AccessPolicy{.p_s = 1.0, .p_t = 0.25};
        row.mu_p = 0.46;
        CHECK(csv_header() ==
              "lambda_p,lambda_s_max,winning_system,p_s,p_t,p_f,p_b,p_r,mu_p,mu_s,mu_e,delay,"
              "confidence");
        CHECK(csv_line(row) ==
              "0.1,0.142857142857,s1,1,0.25,0,0,0,0.46,0,0,0,0");
    }
    SECTION("svg plot contains one polyline per series") {
        std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series;
        series.push_back({"a", {{0.0, 0.1}, {0.5, 0.2}}});
        series.push_back({"b", {{0.0, 0.3}, {0.5, 0.1}}});
        auto svg = svg_plot("region", series);
        size_t count = 0;
        for (size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos)
            ++count;
        CHECK(count == 2);
        CHECK(svg.find("region") != std::string::npos);
    }
}
