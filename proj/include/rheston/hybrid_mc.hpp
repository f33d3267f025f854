#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rheston/common.hpp"
#include "rheston/volterra_kernel.hpp"

namespace rheston {

/// Simulated fine-grid paths. Rows are paths; v and s have n + 1 columns,
/// the increment matrices have n (column i drives step i -> i + 1).
struct PathBatch {
    ModelParams params;
    GridSpec grid;
    std::uint64_t seed = 0;
    Matrix v;
    Matrix s;
    Matrix bbar;
    Matrix btilde;
    Matrix w;

    std::size_t n_paths() const { return s.rows(); }
};

/// Hybrid-scheme simulation with full truncation of the variance. Each path
/// draws from its own substream of `seed`. Throws NumericalError naming the
/// first path whose state becomes non-finite.
PathBatch simulate(const ModelParams& params, const GridSpec& grid, std::size_t n_paths, std::uint64_t seed);
PathBatch simulate(const ModelParams& params, const KernelTables& tables, std::size_t n_paths, std::uint64_t seed);

/// Forward variance curve seen from fine index `base_index`: values[j] is
/// Theta^{base}_{base + j}, j = 0..n - base. `raw` holds the untruncated
/// recursion, `values` its truncation at zero.
struct ThetaCurve {
    std::size_t base_index = 0;
    std::vector<double> raw;
    std::vector<double> values;

    double at(std::size_t k) const { return values.at(k - base_index); }
};

/// Theta^0 == v0 on the whole grid.
ThetaCurve initial_theta(const ModelParams& params, std::size_t n);

/// One-step update from base i - 1 to base i, given V_{i-1} and Bbar_{i-1}.
ThetaCurve theta_step(const ThetaCurve& prev, double v_prev, double bbar_prev, const KernelTables& tables,
                      const ModelParams& params, std::size_t i);

/// Theta^{base}_k for one path by direct convolution over the realised past.
double theta_value(const PathBatch& batch, const KernelTables& tables, std::size_t path, std::size_t base,
                   std::size_t k);

/// Full curve for one path by direct convolution.
ThetaCurve theta_curve(const PathBatch& batch, const KernelTables& tables, std::size_t path, std::size_t base);

struct PriceEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

/// Discounted mean call payoff per absolute strike, with the standard error
/// of the mean.
std::vector<PriceEstimate> mc_price(const PathBatch& batch, std::span<const double> strikes);

/// Path dumps. CSV: one header comment line, then for each path a row
/// "S,<path>,S_0..S_n" and a row "V,<path>,V_0..V_n". The binary layout is
/// described in the README.
void write_paths_csv(std::ostream& os, const PathBatch& batch);
void write_paths_binary(std::ostream& os, const PathBatch& batch);
PathBatch read_paths_binary(std::istream& is);

}  // namespace rheston
