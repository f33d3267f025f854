#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rheston/bsde.hpp"
#include "rheston/common.hpp"
#include "rheston/riccati.hpp"

namespace rheston {

struct SmileConfig {
    double maturity = 0.0;
    std::size_t id = 1;
    std::size_t m = 4;
    std::size_t neurons = 6;
    std::size_t layers = 4;
};

struct RunConfig {
    ModelParams params;
    std::vector<double> maturities{0.1, 0.5, 1.6, 5.0};
    std::size_t strike_count = 20;
    double strike_lo = -0.4;
    double strike_hi = 0.4;
    std::size_t riccati_steps = 100;
    LewisQuadrature quadrature;
    std::size_t mc_paths = 50000;
    std::size_t mc_steps = 200;
    std::uint64_t seed = 42;
    BsdeConfig bsde;
    std::vector<SmileConfig> smile_configs;
    std::size_t smile_riccati_steps = 400;
    std::filesystem::path out_dir = "out";
    bool clip_at_zero = false;

    /// Equidistant log-moneyness grid log(K / S0).
    std::vector<double> log_moneyness() const;
    std::vector<double> strikes() const;
    void validate() const;
};

/// Parse or validation failure in a run configuration; the message names the
/// line or the section.key involved.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// INI text with sections [model], [grid], [strikes], [riccati], [mc],
/// [bsde], [smile], [output]. Missing keys keep their defaults; unknown keys
/// are rejected.
RunConfig parse_config(std::istream& is, const std::string& source_name = "<config>");
RunConfig load_config(const std::filesystem::path& path);

struct MethodErrors {
    double avg = 0.0;  // signed mean of (method - reference)
    double max = 0.0;  // max absolute difference
};

MethodErrors compare(const std::vector<double>& method, const std::vector<double>& reference);

struct MaturityReport {
    double T = 0.0;
    std::vector<double> reference;
    std::vector<double> prices;
    std::vector<double> std_errors;
    MethodErrors errors;
    bool trained = true;
    double method_seconds = 0.0;
    double reference_seconds = 0.0;
    BsdeTimings bsde_timings;
};

struct ComparisonReport {
    std::string method;
    std::vector<double> log_moneyness;
    std::vector<MaturityReport> rows;
};

/// CSV header "k_-0.40,...", two decimals per column.
std::string strike_header(const std::vector<double>& log_moneyness);

/// Each run_* writes its files into config.out_dir (created if missing).
/// Deterministic outputs are every file except timings.csv and *.jsonl.
std::vector<std::vector<double>> run_riccati(const RunConfig& config);
ComparisonReport run_mc(const RunConfig& config);
ComparisonReport run_bsde(const RunConfig& config);

struct SmileTable {
    double T = 0.0;
    std::vector<double> log_moneyness;
    std::vector<double> reference_vol;
    std::vector<std::vector<double>> config_vol;  // per smile config
    std::vector<std::vector<double>> config_price;
};

std::vector<SmileTable> run_smile(const RunConfig& config);

}  // namespace rheston
