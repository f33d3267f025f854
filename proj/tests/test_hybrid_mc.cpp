#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rheston/hybrid_mc.hpp"
#include "rheston/volterra_kernel.hpp"

using namespace rheston;

namespace {

// Deterministic Volterra recursion written out with plain loops and the
// closed-form step weights, independent of the library's lag tables.
std::vector<double> deterministic_oracle(const ModelParams& p, const GridSpec& g) {
    const double dt = g.dt();
    const double scale = std::pow(dt, p.alpha) / std::tgamma(p.alpha + 1.0);
    std::vector<double> v(g.n + 1, p.v0);
    for (std::size_t i = 1; i <= g.n; ++i) {
        double x = p.v0;
        for (std::size_t j = 0; j < i; ++j) {
            const double lag = static_cast<double>(i - j);
            x += p.kappa * (p.theta - v[j]) * scale * (std::pow(lag, p.alpha) - std::pow(lag - 1.0, p.alpha));
        }
        v[i] = std::max(x, 0.0);
    }
    return v;
}

}  // namespace

TEST_CASE("zero vol-of-vol and zero mean reversion keep the variance flat") {
    ModelParams p = reference_params();
    p.nu = 0.0;
    p.kappa = 0.0;
    const PathBatch b = simulate(p, GridSpec{50, 1.0}, 200, 3);
    for (const double v : b.v.storage()) CHECK(v == p.v0);
    // log S is Gaussian with variance v0 * T.
    double mean = 0.0, m2 = 0.0;
    for (std::size_t q = 0; q < b.n_paths(); ++q) {
        const double x = std::log(b.s(q, 50));
        mean += x;
        m2 += x * x;
    }
    mean /= 200.0;
    const double var = m2 / 200.0 - mean * mean;
    CHECK(std::abs(mean + 0.5 * p.v0) < 4.0 * std::sqrt(p.v0 / 200.0));
    CHECK(var == doctest::Approx(p.v0).epsilon(0.25));
}

TEST_CASE("zero vol-of-vol matches the deterministic convolution") {
    for (const double alpha : {0.6, 0.8, 1.0}) {
        ModelParams p = reference_params();
        p.nu = 0.0;
        p.alpha = alpha;
        p.v0 = 0.09;
        p.kappa = 2.5;
        const GridSpec g{150, 2.0};
        const auto oracle = deterministic_oracle(p, g);
        const PathBatch b = simulate(p, g, 4, 11);
        for (std::size_t q = 0; q < 4; ++q) {
            for (std::size_t i = 0; i <= g.n; ++i) CHECK(std::abs(b.v(q, i) - oracle[i]) <= 1e-12);
        }
        const KernelTables tab = KernelTables::make(p, g);
        ThetaCurve c = initial_theta(p, g.n);
        for (std::size_t i = 1; i <= g.n; i += 1) {
            c = theta_step(c, b.v(0, i - 1), b.bbar(0, i - 1), tab, p, i);
            if (i % 37 != 0) continue;
            // Conditional forecast: the recursion continued from the realised past.
            for (std::size_t k = i; k <= g.n; ++k) {
                double x = p.v0;
                const double scale = std::pow(g.dt(), alpha) / std::tgamma(alpha + 1.0);
                for (std::size_t j = 0; j < i; ++j) {
                    const double lag = static_cast<double>(k - j);
                    x += p.kappa * (p.theta - oracle[j]) * scale * (std::pow(lag, alpha) - std::pow(lag - 1.0, alpha));
                }
                CHECK(std::abs(c.at(k) - std::max(x, 0.0)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("positivity and the martingale property") {
    struct Case {
        ModelParams p;
        GridSpec g;
    };
    ModelParams rough = reference_params();
    ModelParams skew = skew_params();
    ModelParams heston = reference_params();
    heston.alpha = 1.0;
    heston.nu = 0.5;
    for (const Case& c : {Case{rough, {200, 0.1}}, Case{skew, {100, 1.0}}, Case{heston, {100, 2.0}}}) {
        const PathBatch b = simulate(c.p, c.g, 20000, 17);
        double min_v = 1.0, min_s = 1.0;
        for (const double v : b.v.storage()) min_v = std::min(min_v, v);
        for (const double s : b.s.storage()) min_s = std::min(min_s, s);
        CHECK(min_v >= 0.0);
        CHECK(min_s > 0.0);
        const std::vector<double> zero{0.0};
        const PriceEstimate e = mc_price(b, zero).front();
        CHECK(std::abs(e.price - c.p.s0) <= 4.0 * e.std_error);
    }
}

TEST_CASE("Gaussian increments follow the target covariance") {
    const ModelParams p = reference_params();
    const GridSpec g{20, 0.1};
    const KernelTables tab = KernelTables::make(p, g);
    const std::size_t n_paths = 20000;
    const PathBatch b = simulate(p, tab, n_paths, 99);
    const auto target = assemble_cov3(tab.sigma2, p.rho, g.dt());
    const Matrix* m[3] = {&b.bbar, &b.btilde, &b.w};
    for (std::size_t step : {0u, 7u, 19u}) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0, s2 = 0.0;
                for (std::size_t q = 0; q < n_paths; ++q) {
                    const double x = (*m[i])(q, step) * (*m[j])(q, step);
                    s += x;
                    s2 += x * x;
                }
                const double mean = s / static_cast<double>(n_paths);
                const double sd = std::sqrt((s2 / static_cast<double>(n_paths) - mean * mean) / static_cast<double>(n_paths));
                CAPTURE(step);
                CAPTURE(i);
                CAPTURE(j);
                CHECK(std::abs(mean - target[i][j]) <= 4.0 * sd);
            }
        }
    }
}

TEST_CASE("identical seeds reproduce bit for bit") {
    const ModelParams p = reference_params();
    const PathBatch a = simulate(p, GridSpec{64, 0.5}, 300, 1234);
    const PathBatch b = simulate(p, GridSpec{64, 0.5}, 300, 1234);
    CHECK(a.v == b.v);
    CHECK(a.s == b.s);
    CHECK(a.bbar == b.bbar);
    CHECK(a.btilde == b.btilde);
    CHECK(a.w == b.w);
    const PathBatch c = simulate(p, GridSpec{64, 0.5}, 300, 1235);
    CHECK_FALSE(a.s == c.s);
}

TEST_CASE("forward variance curves") {
    const ModelParams p = skew_params();
    const GridSpec g{80, 1.0};
    const KernelTables tab = KernelTables::make(p, g);
    const PathBatch b = simulate(p, tab, 5, 8);

    SUBCASE("initial curve is flat") {
        const ThetaCurve c = initial_theta(p, g.n);
        for (std::size_t k = 0; k <= g.n; ++k) CHECK(c.at(k) == p.v0);
        const ThetaCurve d = theta_curve(b, tab, 0, 0);
        for (std::size_t k = 0; k <= g.n; ++k) CHECK(d.at(k) == p.v0);
    }
    SUBCASE("zero increment leaves the curve unchanged") {
        ModelParams q = p;
        q.theta = q.v0;
        const ThetaCurve c = theta_step(initial_theta(q, g.n), q.v0, 0.0, tab, q, 1);
        for (std::size_t k = 1; k <= g.n; ++k) CHECK(c.at(k) == q.v0);
    }
    SUBCASE("recursion agrees with direct convolution") {
        for (std::size_t q = 0; q < 5; ++q) {
            ThetaCurve c = initial_theta(p, g.n);
            for (std::size_t i = 1; i <= g.n; ++i) {
                c = theta_step(c, b.v(q, i - 1), b.bbar(q, i - 1), tab, p, i);
                const ThetaCurve d = theta_curve(b, tab, q, i);
                for (std::size_t k = i; k <= g.n; ++k) {
                    CHECK(std::abs(c.raw[k - i] - d.raw[k - i]) <= 1e-12);
                    CHECK(c.at(k) >= 0.0);
                    CHECK(theta_value(b, tab, q, i, k) == d.at(k));
                }
                // Last-step discretisations differ only in the singular cell.
                const double bound =
                    p.nu * std::sqrt(b.v(q, i - 1)) *
                    std::abs(b.btilde(q, i - 1) - tab.kernel_at_b_star[0] * b.bbar(q, i - 1));
                CHECK(std::abs(c.at(i) - b.v(q, i)) <= bound + 1e-12);
            }
        }
    }
    SUBCASE("contract violations") {
        const ThetaCurve c = initial_theta(p, g.n);
        CHECK_THROWS_AS(theta_step(c, p.v0, 0.0, tab, p, 2), std::out_of_range);
        CHECK_THROWS_AS(theta_step(c, p.v0, 0.0, tab, p, 0), std::out_of_range);
        CHECK_THROWS_AS(theta_value(b, tab, 0, 5, 4), std::out_of_range);
        CHECK_THROWS_AS(theta_value(b, tab, 9, 0, 4), std::out_of_range);
    }
}

TEST_CASE("call prices from paths") {
    const ModelParams p = reference_params();
    const PathBatch b = simulate(p, GridSpec{50, 1.0}, 5000, 2);
    const std::vector<double> strikes{0.0, 100.0};
    const auto e = mc_price(b, strikes);
    double mean_s = 0.0;
    for (std::size_t q = 0; q < b.n_paths(); ++q) mean_s += b.s(q, 50);
    CHECK(e[0].price == doctest::Approx(mean_s / 5000.0).epsilon(1e-12));
    CHECK(std::abs(e[0].price - 1.0) <= 4.0 * e[0].std_error);
    CHECK(e[1].price <= 1e-8);
    CHECK(e[1].std_error == 0.0);
    ModelParams disc = p;
    disc.r = 0.05;
    const PathBatch bd = simulate(disc, GridSpec{50, 1.0}, 5000, 2);
    const auto ed = mc_price(bd, std::vector<double>{0.0});
    CHECK(std::abs(ed[0].price - 1.0) <= 4.0 * ed[0].std_error);
    CHECK_THROWS(mc_price(PathBatch{}, strikes));
    CHECK_THROWS_AS(simulate(p, GridSpec{10, 1.0}, 0, 1), std::invalid_argument);
}

TEST_CASE("path dumps") {
    const ModelParams p = reference_params();
    const PathBatch b = simulate(p, GridSpec{12, 0.3}, 7, 21);
    std::stringstream bin;
    write_paths_binary(bin, b);
    const PathBatch r = read_paths_binary(bin);
    CHECK(r.s == b.s);
    CHECK(r.v == b.v);
    CHECK(r.seed == 21);
    CHECK(r.grid.n == 12);
    CHECK(r.grid.T == 0.3);
    CHECK(r.params.rho == p.rho);
    std::stringstream bad("RHPX");
    CHECK_THROWS(read_paths_binary(bad));
    std::string truncated;
    {
        std::stringstream full;
        write_paths_binary(full, b);
        truncated = full.str().substr(0, 100);
    }
    std::stringstream tr(truncated);
    CHECK_THROWS(read_paths_binary(tr));

    std::ostringstream csv;
    write_paths_csv(csv, b);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# n=12", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("S,0,1,", 0) == 0);
    std::size_t rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 14);
}
