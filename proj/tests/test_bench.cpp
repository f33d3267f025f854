#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rheston/bench.hpp"

using namespace rheston;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is, "test.ini");
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("rheston_test_bench_" + name);
    fs::remove_all(dir);
    return dir;
}

std::vector<double> csv_row(const std::string& line) {
    std::vector<double> out;
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

}  // namespace

TEST_CASE("configuration parsing") {
    SUBCASE("defaults") {
        const RunConfig c = parse("");
        CHECK(c.maturities == std::vector<double>{0.1, 0.5, 1.6, 5.0});
        CHECK(c.strike_count == 20);
        CHECK(c.riccati_steps == 100);
        CHECK(c.mc_paths == 50000);
        CHECK(c.mc_steps == 200);
        CHECK(c.bsde.m == 5);
        CHECK(c.bsde.layers == 3);
        CHECK(c.bsde.neurons == 5);
        CHECK(c.bsde.learning_rate == 0.2);
        CHECK(c.bsde.iterations == 1000);
        CHECK(c.bsde.p == 10);
        CHECK(c.quadrature.u_max == 200.0);
        CHECK(c.quadrature.panels == 50);
        CHECK(c.quadrature.nodes == 8);
        CHECK(c.smile_riccati_steps == 400);
    }
    SUBCASE("values") {
        const RunConfig c = parse(
            "[model]\nnu = 0.9\nrho = -0.8\n[grid]\nmaturities = 0.6, 0.2\n[strikes]\ncount = 5\n"
            "[bsde]\nresample = true\n[smile]\nconfigs = 0.6:1:4:6:4; 0.2:4:2:6:4\n[output]\ndir = somewhere\n"
            "clip_at_zero = yes\n");
        CHECK(c.params.nu == 0.9);
        CHECK(c.params.rho == -0.8);
        CHECK(c.maturities == std::vector<double>{0.6, 0.2});
        CHECK(c.strike_count == 5);
        CHECK(c.bsde.resample);
        REQUIRE(c.smile_configs.size() == 2);
        CHECK(c.smile_configs[1].id == 4);
        CHECK(c.smile_configs[1].m == 2);
        CHECK(c.smile_configs[1].neurons == 6);
        CHECK(c.smile_configs[1].layers == 4);
        CHECK(c.out_dir == fs::path("somewhere"));
        CHECK(c.clip_at_zero);
        CHECK(parse("[grid]\nmaturities =\n").maturities.empty());
    }
    SUBCASE("diagnostics name the line or the key") {
        CHECK(error_of("[model]\nkappa = 1\nthis line is broken\n").find("test.ini:3") != std::string::npos);
        CHECK(error_of("[model]\nkapa = 1\n").find("model.kapa") != std::string::npos);
        CHECK(error_of("[mc]\npaths = many\n").find("mc.paths") != std::string::npos);
        CHECK(error_of("[model]\nrho = 0.5\n").find("rho") != std::string::npos);
        CHECK(error_of("[strikes]\ncount = 0\n").find("strikes.count") != std::string::npos);
        CHECK(error_of("[smile]\nconfigs = 0.6:1:4\n").find("smile.configs") != std::string::npos);
        CHECK(error_of("[bsde]\nresample = maybe\n").find("bsde.resample") != std::string::npos);
        CHECK(error_of("[grid]\nmaturities = 0.1, -1\n").find("grid.maturities") != std::string::npos);
        CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
    }
}

TEST_CASE("strike grid and header") {
    const RunConfig c = parse("");
    const auto k = c.log_moneyness();
    REQUIRE(k.size() == 20);
    CHECK(k.front() == -0.4);
    CHECK(k.back() == doctest::Approx(0.4).epsilon(1e-15));
    const std::string h = strike_header(k);
    CHECK(h.rfind("k_-0.40,k_-0.36,k_-0.32,k_-0.27", 0) == 0);
    CHECK(h.find("k_-0.02,k_0.02") != std::string::npos);
    CHECK(h.size() >= 6);
    CHECK(h.substr(h.size() - 6) == "k_0.40");
    CHECK(strike_header({0.0, -1e-17}) == "k_0.00,k_0.00");
    CHECK(parse("[strikes]\ncount = 1\nlo = 0.1\n").log_moneyness() == std::vector<double>{0.1});
}

TEST_CASE("error summary") {
    const MethodErrors e = compare({1.0, 2.0, 3.5}, {1.5, 2.0, 3.0});
    CHECK(e.avg == 0.0);
    CHECK(e.max == 0.5);
    const MethodErrors f = compare({0.1}, {0.3});
    CHECK(f.avg == doctest::Approx(-0.2));
    CHECK(compare({}, {}).max == 0.0);
    CHECK_THROWS(compare({1.0}, {}));
}

TEST_CASE("Riccati tables") {
    RunConfig c = parse("[strikes]\ncount = 5\n");
    SUBCASE("empty maturity list") {
        c.maturities.clear();
        c.out_dir = scratch("empty");
        CHECK(run_riccati(c).empty());
        CHECK(slurp(c.out_dir / "riccati.csv") == "T,k_-0.40,k_-0.20,k_0.00,k_0.20,k_0.40\n");
    }
    SUBCASE("deep-wing values and clipping") {
        c.maturities = {0.1};
        c.strike_count = 1;
        c.strike_lo = c.strike_hi = 0.4;
        c.out_dir = scratch("wing");
        const double raw = run_riccati(c)[0][0];
        CHECK(std::abs(raw) < 1e-6);
        c.clip_at_zero = true;
        const double clipped = run_riccati(c)[0][0];
        CHECK(clipped == std::max(raw, 0.0));
        CHECK(fs::exists(c.out_dir / "riccati_T0.1.csv"));
    }
}

TEST_CASE("Monte Carlo report") {
    RunConfig c = parse("[grid]\nmaturities = 0.5\n[strikes]\ncount = 5\n[mc]\nsteps = 50\n");
    c.mc_paths = 100;
    c.out_dir = scratch("mc_small");
    const ComparisonReport small = run_mc(c);
    c.mc_paths = 50000;
    const fs::path large_dir = scratch("mc_large");
    c.out_dir = large_dir;
    const ComparisonReport large = run_mc(c);
    // Standard errors scale like 1 / sqrt(paths); checked where 100 paths
    // still see a sizeable share of positive payoffs.
    for (std::size_t j : {0u, 1u, 2u}) {
        const double ratio = small.rows[0].std_errors[j] / large.rows[0].std_errors[j];
        CAPTURE(j);
        CHECK(ratio == doctest::Approx(std::sqrt(500.0)).epsilon(0.2));
    }
    // Report columns are recomputable from the price files.
    std::ifstream mc(c.out_dir / "mc_T0.5.csv"), ref_in(c.out_dir / "mc_report.csv");
    std::string line;
    std::getline(mc, line);
    std::getline(mc, line);
    const auto prices = csv_row(line);
    CHECK(prices == large.rows[0].prices);
    const MethodErrors e = compare(prices, large.rows[0].reference);
    std::getline(ref_in, line);
    std::getline(ref_in, line);
    const auto rep = csv_row(line);
    CHECK(rep[3] == e.avg);
    CHECK(rep[4] == e.max);

    const fs::path again = scratch("mc_again");
    c.out_dir = again;
    run_mc(c);
    for (const char* f : {"mc_T0.5.csv", "mc_se_T0.5.csv", "mc_report.csv"}) {
        CHECK(slurp(again / f) == slurp(large_dir / f));
    }
}

TEST_CASE("BSDE report without training") {
    RunConfig c = parse(
        "[grid]\nmaturities = 0.2\n[strikes]\ncount = 3\n[bsde]\niterations = 0\npool_paths = 500\n"
        "batch_size = 100\nfine_steps = 20\nm = 2\n");
    c.out_dir = scratch("bsde0");
    const ComparisonReport r = run_bsde(c);
    REQUIRE(r.rows.size() == 1);
    CHECK_FALSE(r.rows[0].trained);
    std::ifstream in(c.out_dir / "bsde_report.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "T,m,avg_error,max_error,trained");
    std::getline(in, line);
    CHECK(line.substr(line.size() - 2) == ",0");
    CHECK(fs::exists(c.out_dir / "bsde_T0.2.csv"));
    CHECK(fs::exists(c.out_dir / "timings.csv"));
}

TEST_CASE("smile files are reproducible") {
    const std::string text =
        "[model]\nnu = 0.9\nrho = -0.8\n[grid]\nmaturities = 0.2\n[strikes]\ncount = 4\n"
        "[bsde]\niterations = 20\npool_paths = 400\nbatch_size = 100\nfine_steps = 20\n"
        "[smile]\nconfigs = 0.2:1:2:3:2; 0.6:2:2:3:2; 0.2:4:2:3:3\nriccati_steps = 100\n";
    RunConfig c = parse(text);
    const fs::path a = scratch("smile_a"), b = scratch("smile_b");
    c.out_dir = a;
    const auto tables = run_smile(c);
    c.out_dir = b;
    run_smile(c);
    CHECK(slurp(a / "smile_T0.2.csv") == slurp(b / "smile_T0.2.csv"));
    REQUIRE(tables.size() == 1);
    CHECK(tables[0].config_vol.size() == 2);
    std::ifstream in(a / "smile_T0.2.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "log_moneyness,riccati_price,riccati_vol,cfg1_price,cfg1_vol,cfg4_price,cfg4_vol");
}
