#include <CLI11.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rheston/bench.hpp"
#include "rheston/hybrid_mc.hpp"
#include "rheston/implied_vol.hpp"
#include "rheston/riccati.hpp"
#include "rheston/simd/kernels.hpp"
#include "rheston/volterra_kernel.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace {

using namespace rheston;

std::vector<double> parse_maturities(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        out.push_back(v);
    }
    return out;
}

int selftest() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
        if (!ok) ++failures;
    };
    const ModelParams p = reference_params();
    check("char_fn(0) == 1", std::abs(char_fn(0.0, 1.0, 100, p).value - 1.0) < 1e-12);
    const double price = bs_price(1.0, 1.1, 0.5, 0.25, 0.0);
    check("implied vol round trip", std::abs(implied_vol(price, 1.0, 1.1, 0.5, 0.0) - 0.25) < 1e-9);
    const auto w = weights_a_tilde(GridSpec{200, 1.0}, p.alpha);
    double sum = 0.0;
    for (const double x : w) sum += x;
    check("weight telescoping", std::abs(sum - 1.0 / std::tgamma(1.6)) < 1e-12);
    std::vector<double> a(37), b(37);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::sin(static_cast<double>(i));
        b[i] = std::cos(static_cast<double>(i));
    }
    const double ref = simd::scalar_kernels().dot(a.data(), b.data(), a.size());
    bool simd_ok = true;
    for (const auto* k : simd::available_kernels()) simd_ok &= std::abs(k->dot(a.data(), b.data(), a.size()) - ref) < 1e-13;
    check("simd kernels agree with scalar", simd_ok);
    const auto batch = simulate(p, GridSpec{50, 0.5}, 2000, 1);
    const std::vector<double> zero{1e-12};
    const auto est = mc_price(batch, zero);
    check("mc martingale within 4 SE", std::abs(est[0].price - p.s0) <= 4.0 * est[0].std_error + 1e-12);
    std::cout << "kernels: " << simd::kernels().name << '\n';
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Training allocates and frees multi-megabyte buffers every iteration;
    // keep them on the heap instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Rough Heston pricing: Riccati/Fourier, hybrid Monte Carlo and deep BSDE"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string maturities;
    bool clip = false;
    app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Global seed (overrides [mc] seed)");
    app.add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    app.add_option("--maturities", maturities, "Comma-separated maturities, e.g. 0.1,0.5; empty for none");
    app.add_flag("--clip-at-zero", clip, "Clip negative Riccati prices at zero");

    auto* riccati = app.add_subcommand("riccati", "Reference prices by Adams + Lewis inversion");
    auto* mc = app.add_subcommand("mc", "Hybrid-scheme Monte Carlo vs reference prices");
    auto* bsde = app.add_subcommand("bsde", "Deep BSDE prices vs reference prices");
    auto* smile = app.add_subcommand("smile", "Implied volatility smiles per network configuration");
    auto* self = app.add_subcommand("selftest", "Quick internal consistency checks");
    for (auto* sub : {riccati, mc, bsde, smile, self}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (self->parsed()) return selftest();
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (app.count("--maturities") > 0) cfg.maturities = parse_maturities(maturities);
        if (clip) cfg.clip_at_zero = true;
        cfg.validate();
        if (riccati->parsed()) {
            const auto table = run_riccati(cfg);
            std::cout << "riccati: " << table.size() << " maturities written to " << cfg.out_dir.string() << '\n';
        } else if (mc->parsed()) {
            const auto rep = run_mc(cfg);
            for (const auto& r : rep.rows) {
                std::cout << "T=" << r.T << " avg_error=" << r.errors.avg << " max_error=" << r.errors.max << '\n';
            }
        } else if (bsde->parsed()) {
            const auto rep = run_bsde(cfg);
            for (const auto& r : rep.rows) {
                std::cout << "T=" << r.T << " avg_error=" << r.errors.avg << " max_error=" << r.errors.max
                          << (r.trained ? "" : " (untrained)") << '\n';
            }
        } else if (smile->parsed()) {
            const auto tabs = run_smile(cfg);
            std::cout << "smile: " << tabs.size() << " maturities written to " << cfg.out_dir.string() << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
