#include "rheston/volterra_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rheston/special.hpp"

namespace rheston {
namespace {

// k^a - (k-1)^a without cancellation for large k.
double power_increment(double k, double a) {
    if (k <= 1.0) return std::pow(k, a);
    return -std::pow(k, a) * std::expm1(a * std::log1p(-1.0 / k));
}

}  // namespace

double kernel_eval(double t, double alpha) {
    if (alpha == 1.0) return 1.0;
    if (!(t > 0.0)) throw std::domain_error("kernel_eval: kernel is singular at t <= 0");
    return std::pow(t, alpha - 1.0) / gamma_fn(alpha);
}

std::vector<double> weights_a_tilde(const GridSpec& grid, double alpha) {
    grid.validate();
    const double scale = std::pow(grid.dt(), alpha) / gamma_fn(alpha + 1.0);
    std::vector<double> out(grid.n);
    for (std::size_t k = 1; k <= grid.n; ++k) {
        out[k - 1] = scale * power_increment(static_cast<double>(k), alpha);
    }
    return out;
}

double b_star(std::size_t k, double alpha) {
    if (k < 1) throw std::invalid_argument("b_star: lag must be >= 1");
    const double kd = static_cast<double>(k);
    if (alpha == 1.0) return kd - 0.5;
    return std::pow(power_increment(kd, alpha) / alpha, 1.0 / (alpha - 1.0));
}

Cov2 covariance_step(const GridSpec& grid, double alpha) {
    grid.validate();
    const double dt = grid.dt();
    const double g = gamma_fn(alpha);
    Cov2 c;
    c.s11 = dt;
    c.s12 = std::pow(dt, alpha) / (alpha * g);
    c.s22 = std::pow(dt, 2.0 * alpha - 1.0) / ((2.0 * alpha - 1.0) * g * g);
    return c;
}

std::array<std::array<double, 3>, 3> assemble_cov3(const Cov2& s, double rho, double dt) {
    return {{{s.s11, s.s12, rho * dt}, {s.s12, s.s22, rho * s.s12}, {rho * dt, rho * s.s12, dt}}};
}

Chol3 chol3(const Cov2& sigma2, double rho, double dt) {
    const auto a = assemble_cov3(sigma2, rho, dt);
    const double scale = std::max({a[0][0], a[1][1], a[2][2]});
    const double tol = 1e-14 * scale;
    Chol3 out;
    auto& L = out.L;
    for (std::size_t j = 0; j < 3; ++j) {
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= L[j][k] * L[j][k];
        if (d < -tol) throw std::domain_error("chol3: covariance is not positive semi-definite");
        if (d <= tol) {
            // Zero pivot: the variable is a combination of the previous ones.
            // A small negative residue is rounding noise; count it as jitter.
            if (d < 0.0) out.regularised = true;
            out.rank_deficient = true;
            continue;
        }
        const double ljj = std::sqrt(d);
        L[j][j] = ljj;
        for (std::size_t i = j + 1; i < 3; ++i) {
            double v = a[i][j];
            for (std::size_t k = 0; k < j; ++k) v -= L[i][k] * L[j][k];
            L[i][j] = v / ljj;
        }
    }
    return out;
}

KernelTables KernelTables::make(const ModelParams& params, const GridSpec& grid) {
    params.validate();
    grid.validate();
    KernelTables t;
    t.grid = grid;
    t.alpha = params.alpha;
    t.a_tilde = weights_a_tilde(grid, params.alpha);
    t.b_star.resize(grid.n);
    t.kernel_at_b_star.resize(grid.n);
    const double dt = grid.dt();
    for (std::size_t k = 1; k <= grid.n; ++k) {
        t.b_star[k - 1] = rheston::b_star(k, params.alpha);
        t.kernel_at_b_star[k - 1] = kernel_eval(t.b_star[k - 1] * dt, params.alpha);
    }
    t.sigma2 = covariance_step(grid, params.alpha);
    t.chol = chol3(t.sigma2, params.rho, dt);
    return t;
}

}  // namespace rheston
