#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rheston/common.hpp"
#include "rheston/hybrid_mc.hpp"
#include "rheston/implied_vol.hpp"
#include "rheston/nn.hpp"
#include "rheston/volterra_kernel.hpp"

namespace rheston {

/// Piecewise-constant representation of a forward curve on p equal buckets
/// of [t, T], sampled at the right bucket ends.
struct BasisProjection {
    std::size_t p = 0;
    double t = 0.0;
    std::vector<double> bucket_times;
    std::vector<double> theta_coeffs;
    std::vector<double> kappa_coeffs;

    bool empty() const { return p == 0; }
};

/// Bucket ends are mapped to the nearest fine index, never the base itself.
BasisProjection project_theta(const ThetaCurve& curve, const GridSpec& grid, std::size_t p, double alpha);

/// (1 + p) x 2 factor mapping (dB_perp, dB) to (dX, dtheta_1..p). The
/// variance is the first curve coefficient, floored at zero.
Matrix assemble_diffusion(double x, const BasisProjection& proj, const ModelParams& params);

/// The covariance the factor must reproduce (entry (0,0) is l^2 x^2).
Matrix diffusion_covariance(double x, const BasisProjection& proj, const ModelParams& params);

/// Biased sample variance of the per-path initial prices.
double loss(std::span<const double> p0_samples);

struct BsdeConfig {
    std::size_t m = 5;
    std::size_t layers = 3;
    std::size_t neurons = 5;
    std::size_t p = 10;
    double learning_rate = 0.2;
    std::size_t iterations = 1000;
    std::size_t batch_size = 1000;
    /// Fraction of iterations run with Adam before switching to SGD.
    double adam_fraction = 0.7;
    std::size_t pool_paths = 50000;
    std::size_t fine_steps = 200;
    /// Draw fresh paths every iteration instead of reusing the pool.
    bool resample = false;
    /// Train the forward scheme with explicit initial prices instead.
    bool forward_mode = false;
    /// Paths used for the final price; 0 means the whole pool.
    std::size_t eval_paths = 0;
    std::size_t log_every = 50;
};

/// Coarse-grid view of a path set: for each coarse step i < m, the state at
/// tau_i and the aggregated increments over [tau_i, tau_{i+1}).
struct BsdeData {
    std::size_t m = 0;
    std::size_t p = 0;
    std::size_t n_paths = 0;
    std::vector<std::size_t> coarse_index;  // fine indices, size m + 1
    std::vector<double> coarse_dt;          // size m
    Matrix spot;                            // m x paths
    Matrix variance;                        // m x paths
    std::vector<Matrix> theta;              // per step: paths x p
    Matrix inc;                             // m x paths, dB
    Matrix inc_perp;                        // m x paths, dB_perp
    std::vector<double> terminal_spot;      // paths
};

BsdeData build_bsde_data(const PathBatch& batch, const KernelTables& tables, std::size_t m, std::size_t p);

/// Coefficients of the recursion for R rows: per coarse step the two control
/// components, the matching increments and the one-step growth factor.
struct RolloutSteps {
    std::size_t rows = 0;
    std::vector<std::vector<double>> z_perp, z, inc_perp, inc;
    std::vector<double> coarse_dt;
    double rate = 0.0;
};

/// Y_m = terminal, Y_i = (1 - r dt_i) Y_{i+1} - (z_perp dB_perp + z dB).
std::vector<double> backward_recursion(const RolloutSteps& steps, std::span<const double> terminal);
/// Y_0 = initial, Y_{i+1} = (1 + r dt_i) Y_i + (z_perp dB_perp + z dB).
std::vector<double> forward_recursion(const RolloutSteps& steps, std::span<const double> initial);

struct FeatureScaling {
    std::vector<double> mean;
    std::vector<double> inv_scale;
};

struct BsdeModel {
    BsdeConfig config;
    std::vector<std::size_t> coarse_index;
    std::vector<nn::DenseNet> nets;
    std::vector<nn::OptimState> optims;
    std::vector<FeatureScaling> scaling;  // per coarse step
    /// Forward mode only: one initial price per strike.
    std::vector<double> p0;
    nn::OptimState p0_optim;
};

BsdeModel make_model(const BsdeConfig& config, std::size_t n_strikes, std::uint64_t seed);

/// Per-path, per-strike initial prices [paths x strikes] from the backward
/// recursion with the nets in inference mode.
Matrix backward_rollout(const BsdeModel& model, const BsdeData& data, std::span<const std::size_t> paths,
                        std::span<const double> strikes, const ModelParams& params);

struct BsdeTimings {
    double build = 0.0;
    double train = 0.0;
    double price = 0.0;
};

struct TrainResult {
    BsdeModel model;
    std::vector<double> prices;
    std::vector<double> std_errors;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    bool trained = true;
    BsdeTimings timings;
};

/// Simulates the pool, trains and prices all strikes for one maturity. Log
/// records (one JSON object per line) go to `log` when given.
TrainResult train(const BsdeConfig& config, const ModelParams& params, double T, std::span<const double> strikes,
                  std::uint64_t seed, std::ostream* log = nullptr);

/// Same, on already simulated paths.
TrainResult train_on(const BsdeConfig& config, const ModelParams& params, const BsdeData& pool,
                     std::span<const double> strikes, std::uint64_t seed, std::ostream* log = nullptr);

/// Trains per maturity and converts the prices to implied volatilities.
std::vector<SmilePoint> price_smile(const BsdeConfig& config, const ModelParams& params,
                                    std::span<const double> maturities, std::span<const double> log_moneyness,
                                    std::uint64_t seed, std::ostream* log = nullptr);

}  // namespace rheston
