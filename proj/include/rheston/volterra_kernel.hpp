#pragma once

#include <array>
#include <vector>

#include "rheston/common.hpp"

namespace rheston {

/// K(t) = t^(alpha-1) / Gamma(alpha). Throws std::domain_error for t <= 0
/// when alpha < 1 (the kernel is singular at the origin).
double kernel_eval(double t, double alpha);

/// Integral of K over each step, indexed by lag: out[k-1] = int_{(k-1)dt}^{k dt} K.
std::vector<double> weights_a_tilde(const GridSpec& grid, double alpha);

/// Optimal evaluation point (in units of dt) for lag k >= 1, chosen so that
/// dt * K(b*_k dt) equals the step integral of K. For alpha = 1 the kernel is
/// constant and k - 1/2 is returned by convention.
double b_star(std::size_t k, double alpha);

/// Covariance of (int dB, int K(t_{i+1}-s) dB) over one step.
struct Cov2 {
    double s11 = 0.0;
    double s12 = 0.0;
    double s22 = 0.0;
};

Cov2 covariance_step(const GridSpec& grid, double alpha);

/// Lower-triangular factor of the covariance of (Bbar, Btilde, W).
struct Chol3 {
    std::array<std::array<double, 3>, 3> L{};
    /// Set when a (numerically) zero pivot was met; its column is zeroed.
    bool rank_deficient = false;
    /// Set when a slightly negative pivot had to be lifted by jitter.
    bool regularised = false;
};

/// The 3x3 covariance assembled from the step covariance, rho and dt.
std::array<std::array<double, 3>, 3> assemble_cov3(const Cov2& sigma2, double rho, double dt);

/// Semidefinite Cholesky of assemble_cov3(sigma2, rho, dt). Pivots with
/// magnitude below 1e-14 of the largest diagonal are treated as zero. A
/// genuinely indefinite input throws std::domain_error.
Chol3 chol3(const Cov2& sigma2, double rho, double dt);

/// Everything the simulation needs for one (params, grid) pair. Vectors are
/// indexed by lag - 1, i.e. element 0 belongs to lag 1.
struct KernelTables {
    GridSpec grid;
    double alpha = 1.0;
    std::vector<double> a_tilde;
    std::vector<double> b_star;
    /// K(b*_k dt) per lag.
    std::vector<double> kernel_at_b_star;
    Cov2 sigma2;
    Chol3 chol;

    static KernelTables make(const ModelParams& params, const GridSpec& grid);
};

}  // namespace rheston
