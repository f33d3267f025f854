#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "rheston/common.hpp"

namespace rheston {

using cplx = std::complex<double>;

/// F(u, x) = -u(u+i)/2 + (i u rho nu - kappa) x + nu^2 x^2 / 2.
cplx riccati_rhs(cplx u, cplx x, const ModelParams& params);

/// Product-integration weights for a fractional integral of order `order`
/// on an equidistant grid with piecewise-linear interpolation. Lag-indexed:
/// the weight of node j in the integral up to node k depends on k - j only,
/// except for the first node.
class AdamsWeights {
public:
    AdamsWeights(std::size_t n, double dt, double order);

    std::size_t steps() const { return n_; }
    double order() const { return order_; }

    /// Corrector weight a_{j,k}, 0 <= j <= k <= n, k >= 1.
    double a(std::size_t j, std::size_t k) const;
    /// Predictor weight b_{j,k}, 0 <= j < k <= n.
    double b(std::size_t j, std::size_t k) const;

    /// Lag tables reversed for contiguous dot products: corrector_rev()[n - m]
    /// is the interior weight for lag m >= 1, predictor_rev()[n - m] likewise.
    const std::vector<double>& corrector_rev() const { return a_rev_; }
    const std::vector<double>& predictor_rev() const { return b_rev_; }
    double first_weight(std::size_t k) const { return a0_[k]; }
    double diagonal() const { return diag_; }

private:
    std::size_t n_;
    double order_;
    double diag_;
    std::vector<double> a0_;
    std::vector<double> a_rev_;
    std::vector<double> b_rev_;
};

struct RiccatiSolution {
    cplx u;
    GridSpec grid;
    std::vector<cplx> h;
    cplx frac_int_1;
    cplx frac_int_1ma;
    bool diverged = false;
};

/// Predictor-corrector solution of D^alpha h = F(u, h), h(0) = 0, on n_steps
/// steps up to T. Stops and flags divergence when h becomes non-finite.
RiccatiSolution adams_solve(cplx u, double T, std::size_t n_steps, const ModelParams& params);

/// Fractional integral I^order of the piecewise-linear interpolant of h at the
/// last grid point.
cplx fractional_integral(std::span<const cplx> h, double dt, double order);

struct CharFnValue {
    cplx value;
    bool diverged = false;
};

/// Characteristic function of log(S_T / S_0) - rT at complex argument u.
CharFnValue char_fn(cplx u, double T, std::size_t n_steps, const ModelParams& params);

/// Batched char_fn over many arguments; the work is spread over threads.
std::vector<CharFnValue> char_fn_batch(std::span<const cplx> us, double T, std::size_t n_steps,
                                       const ModelParams& params);

/// Classical Heston characteristic function (alpha = 1), in the formulation
/// that keeps the complex logarithm on its principal branch.
cplx heston_closed_form(const ModelParams& params, double T, cplx u);

struct LewisQuadrature {
    double u_max = 200.0;
    std::size_t panels = 50;
    std::size_t nodes = 8;
    std::size_t max_panels = 400;
    /// Refinement stops when no price moves by more than this.
    double tol = 1e-8;
    /// Nodes beyond the first point where |Phi(u - i/2)| / (u^2 + 1/4) drops
    /// below this are dropped.
    double tail_cutoff = 1e-16;
    /// When false the first panel pass is returned without refinement.
    bool refine = true;
};

/// Evaluates Phi(u - i/2) for a vector of real u.
using LewisCharFn = std::function<std::vector<CharFnValue>(std::span<const double>)>;

struct LewisDiagnostics {
    std::size_t panels = 0;
    std::size_t nodes_used = 0;
    double last_change = 0.0;
};

/// Call prices for absolute strikes from the Lewis integral with Gauss-Legendre
/// panels on [0, u_max]; the first panel is graded towards the origin. Throws
/// NumericalError if the char. function is non-finite before the tail cutoff
/// or if refinement does not converge within max_panels.
std::vector<double> lewis_integrate(const LewisCharFn& phi, double spot, double T, double r,
                                    std::span<const double> strikes, const LewisQuadrature& quad,
                                    LewisDiagnostics* diag = nullptr);

/// Rough Heston call prices through the Adams characteristic function.
std::vector<double> lewis_price(const ModelParams& params, double T, std::span<const double> strikes,
                                std::size_t n_steps, const LewisQuadrature& quad = {},
                                LewisDiagnostics* diag = nullptr);

}  // namespace rheston
