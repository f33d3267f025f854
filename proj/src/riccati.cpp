#include "rheston/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rheston/parallel.hpp"
#include "rheston/simd/kernels.hpp"
#include "rheston/special.hpp"

namespace rheston {
namespace {

constexpr cplx I{0.0, 1.0};

// (m+1)^p + (m-1)^p - 2 m^p, evaluated without first-order cancellation.
double second_difference(double m, double p) {
    if (m <= 1.0) return std::pow(2.0, p) - 2.0;
    const double x = 1.0 / m;
    return std::pow(m, p) * (std::expm1(p * std::log1p(x)) + std::expm1(p * std::log1p(-x)));
}

// (k-1)^(q+1) - (k-q-1) k^q.
double first_node_term(double k, double q) {
    if (k <= 1.0) return q;
    const double x = 1.0 / k;
    const double p = q + 1.0;
    return std::pow(k, p) * (std::expm1(p * std::log1p(-x)) + p * x);
}

// m^q - (m-1)^q.
double first_difference(double m, double q) {
    if (m <= 1.0) return 1.0;
    return -std::pow(m, q) * std::expm1(q * std::log1p(-1.0 / m));
}

// exp(z) - 1 without cancellation for small |z|.
cplx expm1_c(cplx z) {
    const double s = std::sin(0.5 * z.imag());
    return {std::expm1(z.real()) * std::cos(z.imag()) - 2.0 * s * s, std::exp(z.real()) * std::sin(z.imag())};
}

// log(1 + z) / z, with the series near zero.
cplx log1p_ratio(cplx z) {
    if (std::abs(z) > 1e-3) return std::log(1.0 + z) / z;
    cplx sum = 0.0;
    cplx power = 1.0;
    for (int k = 1; k <= 8; ++k) {
        sum += power / static_cast<double>(k);
        power *= -z;
    }
    return sum;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const double nd = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = z;
            for (std::size_t j = 2; j <= n; ++j) {
                const double jd = static_cast<double>(j);
                const double p2 = ((2.0 * jd - 1.0) * z * p1 - (jd - 1.0) * p0) / jd;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = nd * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

// Adams solver for one (params, T, n); the weight tables are shared by every
// argument u.
class RiccatiSolver {
public:
    RiccatiSolver(const ModelParams& p, double T, std::size_t n)
        : p_(p),
          n_(n),
          dt_(T / static_cast<double>(n)),
          scheme_(n, dt_, p.alpha),
          int1_(n, dt_, 1.0),
          int1ma_(n, dt_, 1.0 - p.alpha) {}

    // Fills h (size n + 1); returns false on divergence.
    bool solve(cplx u, std::vector<cplx>& h) {
        const auto& k = simd::kernels();
        h.assign(n_ + 1, cplx{});
        fre_.assign(n_ + 1, 0.0);
        fim_.assign(n_ + 1, 0.0);
        const cplx f0 = riccati_rhs(u, 0.0, p_);
        fre_[0] = f0.real();
        fim_[0] = f0.imag();
        const auto& a_rev = scheme_.corrector_rev();
        const auto& b_rev = scheme_.predictor_rev();
        for (std::size_t step = 1; step <= n_; ++step) {
            const double* bw = b_rev.data() + (n_ - step);
            const cplx pred{k.dot(bw, fre_.data(), step), k.dot(bw, fim_.data(), step)};
            cplx corr = scheme_.first_weight(step) * f0 + scheme_.diagonal() * riccati_rhs(u, pred, p_);
            if (step >= 2) {
                const double* aw = a_rev.data() + (n_ - step + 1);
                corr += cplx{k.dot(aw, fre_.data() + 1, step - 1), k.dot(aw, fim_.data() + 1, step - 1)};
            }
            const cplx f = riccati_rhs(u, corr, p_);
            if (!std::isfinite(corr.real()) || !std::isfinite(corr.imag()) || !std::isfinite(f.real()) ||
                !std::isfinite(f.imag())) {
                return false;
            }
            h[step] = corr;
            fre_[step] = f.real();
            fim_[step] = f.imag();
        }
        return true;
    }

    cplx integrate(const AdamsWeights& w, const std::vector<cplx>& h) {
        const auto& k = simd::kernels();
        hre_.resize(n_ + 1);
        him_.resize(n_ + 1);
        for (std::size_t j = 0; j <= n_; ++j) {
            hre_[j] = h[j].real();
            him_[j] = h[j].imag();
        }
        cplx s = w.first_weight(n_) * h[0] + w.diagonal() * h[n_];
        if (n_ >= 2) {
            const double* rw = w.corrector_rev().data() + 1;
            s += cplx{k.dot(rw, hre_.data() + 1, n_ - 1), k.dot(rw, him_.data() + 1, n_ - 1)};
        }
        return s;
    }

    RiccatiSolution full(cplx u) {
        RiccatiSolution sol;
        sol.u = u;
        sol.grid = GridSpec{n_, dt_ * static_cast<double>(n_)};
        sol.diverged = !solve(u, sol.h);
        if (!sol.diverged) {
            sol.frac_int_1 = integrate(int1_, sol.h);
            sol.frac_int_1ma = integrate(int1ma_, sol.h);
        }
        return sol;
    }

    CharFnValue char_fn(cplx u) {
        if (!solve(u, h_)) return {cplx{std::nan(""), std::nan("")}, true};
        const cplx log_phi = p_.kappa * p_.theta * integrate(int1_, h_) + p_.v0 * integrate(int1ma_, h_);
        const cplx value = std::exp(log_phi);
        const bool bad = !std::isfinite(value.real()) || !std::isfinite(value.imag());
        return {value, bad};
    }

private:
    ModelParams p_;
    std::size_t n_;
    double dt_;
    AdamsWeights scheme_;
    AdamsWeights int1_;
    AdamsWeights int1ma_;
    std::vector<double> fre_, fim_, hre_, him_;
    std::vector<cplx> h_;
};

}  // namespace

cplx riccati_rhs(cplx u, cplx x, const ModelParams& p) {
    return -0.5 * u * (u + I) + (I * u * p.rho * p.nu - p.kappa) * x + 0.5 * p.nu * p.nu * x * x;
}

AdamsWeights::AdamsWeights(std::size_t n, double dt, double order) : n_(n), order_(order) {
    if (n < 1) throw std::invalid_argument("AdamsWeights: need at least one step");
    const double corr_scale = std::pow(dt, order) / gamma_fn(order + 2.0);
    const double pred_scale = std::pow(dt, order) / gamma_fn(order + 1.0);
    diag_ = corr_scale;
    a0_.assign(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) a0_[k] = corr_scale * first_node_term(static_cast<double>(k), order);
    a_rev_.assign(n, 0.0);
    b_rev_.assign(n, 0.0);
    for (std::size_t m = 1; m <= n; ++m) {
        a_rev_[n - m] = corr_scale * second_difference(static_cast<double>(m), order + 1.0);
        b_rev_[n - m] = pred_scale * first_difference(static_cast<double>(m), order);
    }
}

double AdamsWeights::a(std::size_t j, std::size_t k) const {
    if (k < 1 || k > n_ || j > k) throw std::out_of_range("AdamsWeights::a: index out of range");
    if (j == k) return diag_;
    if (j == 0) return a0_[k];
    return a_rev_[n_ - (k - j)];
}

double AdamsWeights::b(std::size_t j, std::size_t k) const {
    if (k < 1 || k > n_ || j >= k) throw std::out_of_range("AdamsWeights::b: index out of range");
    return b_rev_[n_ - (k - j)];
}

RiccatiSolution adams_solve(cplx u, double T, std::size_t n_steps, const ModelParams& params) {
    params.validate();
    GridSpec{n_steps, T}.validate();
    return RiccatiSolver(params, T, n_steps).full(u);
}

cplx fractional_integral(std::span<const cplx> h, double dt, double order) {
    if (h.size() < 2) throw std::invalid_argument("fractional_integral: need at least two nodes");
    const std::size_t n = h.size() - 1;
    const AdamsWeights w(n, dt, order);
    cplx s = w.first_weight(n) * h[0] + w.diagonal() * h[n];
    for (std::size_t j = 1; j < n; ++j) s += w.a(j, n) * h[j];
    return s;
}

CharFnValue char_fn(cplx u, double T, std::size_t n_steps, const ModelParams& params) {
    params.validate();
    GridSpec{n_steps, T}.validate();
    return RiccatiSolver(params, T, n_steps).char_fn(u);
}

std::vector<CharFnValue> char_fn_batch(std::span<const cplx> us, double T, std::size_t n_steps,
                                       const ModelParams& params) {
    params.validate();
    GridSpec{n_steps, T}.validate();
    std::vector<CharFnValue> out(us.size());
    parallel_for(us.size(), [&](std::size_t b, std::size_t e) {
        RiccatiSolver solver(params, T, n_steps);
        for (std::size_t i = b; i < e; ++i) out[i] = solver.char_fn(us[i]);
    });
    return out;
}

cplx heston_closed_form(const ModelParams& p, double T, cplx u) {
    if (p.alpha != 1.0) throw std::invalid_argument("heston_closed_form: requires alpha = 1");
    if (u == cplx{}) return 1.0;
    const cplx quad = -0.5 * u * (u + I);
    if (p.nu == 0.0) {
        // Deterministic variance: log Phi = quad * int_0^T V_t dt.
        const double integrated =
            p.kappa == 0.0 ? p.v0 * T : p.theta * T + (p.v0 - p.theta) * (-std::expm1(-p.kappa * T)) / p.kappa;
        return std::exp(quad * integrated);
    }
    // (xi - d) / nu^2 and g / nu^2 are written without the nu^2 cancellation
    // so that the small vol-of-vol regime stays accurate.
    const double nu2 = p.nu * p.nu;
    const cplx xi = p.kappa - p.rho * p.nu * I * u;
    const cplx d = std::sqrt(xi * xi + nu2 * (I * u + u * u));
    const cplx xpd = xi + d;
    const cplx xmd_over = -(I * u + u * u) / xpd;
    const cplx g = nu2 * xmd_over / xpd;
    const cplx one_me = -expm1_c(-d * T);
    const cplx e = 1.0 - one_me;
    const cplx ratio = xmd_over / xpd * one_me / (1.0 - g);
    const cplx c = p.kappa * p.theta * (xmd_over * T - 2.0 * ratio * log1p_ratio(nu2 * ratio));
    const cplx dd = xmd_over * one_me / (1.0 - g * e);
    return std::exp(c + dd * p.v0);
}

std::vector<double> lewis_integrate(const LewisCharFn& phi, double spot, double T, double r,
                                    std::span<const double> strikes, const LewisQuadrature& quad,
                                    LewisDiagnostics* diag) {
    if (!(spot > 0.0) || !(T > 0.0)) throw std::invalid_argument("lewis_integrate: spot and T must be positive");
    for (const double k : strikes) {
        if (!(k > 0.0)) throw std::invalid_argument("lewis_integrate: strikes must be positive");
    }
    if (quad.panels < 1 || quad.nodes < 1 || !(quad.u_max > 0.0)) {
        throw std::invalid_argument("lewis_integrate: invalid quadrature settings");
    }
    std::vector<double> gx, gw;
    gauss_legendre(quad.nodes, gx, gw);
    const double forward = spot * std::exp(r * T);
    const double disc = std::exp(-r * T);

    auto pass = [&](std::size_t panels, std::size_t& used) {
        const double width = quad.u_max / static_cast<double>(panels);
        // The integrand has poles at +-i/2, so the first panel is graded
        // geometrically towards the origin.
        std::vector<double> edges{0.0, width / 8.0, width / 4.0, width / 2.0};
        for (std::size_t pnl = 1; pnl <= panels; ++pnl) edges.push_back(width * static_cast<double>(pnl));
        std::vector<double> us, ws;
        for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
            const double half = 0.5 * (edges[e + 1] - edges[e]);
            const double mid = 0.5 * (edges[e + 1] + edges[e]);
            for (std::size_t q = 0; q < gx.size(); ++q) {
                us.push_back(mid + half * gx[q]);
                ws.push_back(half * gw[q]);
            }
        }
        const std::vector<CharFnValue> vals = phi(us);
        std::size_t cut = us.size();
        for (std::size_t i = 0; i < us.size(); ++i) {
            const double denom = us[i] * us[i] + 0.25;
            const double env = std::abs(vals[i].value) / denom;
            if (!vals[i].diverged && std::isfinite(env) && env < quad.tail_cutoff) {
                cut = i;
                break;
            }
            if (vals[i].diverged || !std::isfinite(env)) {
                throw NumericalError("lewis_integrate: characteristic function diverged at u = " +
                                     format_double(us[i]) + " before the tail cutoff (" +
                                     std::to_string(panels) + " panels)");
            }
        }
        used = cut;
        std::vector<double> prices;
        prices.reserve(strikes.size());
        for (const double strike : strikes) {
            const double x = std::log(forward / strike);
            double acc = 0.0;
            for (std::size_t i = 0; i < cut; ++i) {
                const cplx e = std::exp(I * (us[i] * x)) * vals[i].value;
                acc += ws[i] * e.real() / (us[i] * us[i] + 0.25);
            }
            prices.push_back(disc * (forward - std::sqrt(forward * strike) / std::numbers::pi * acc));
        }
        return prices;
    };

    std::size_t panels = quad.panels;
    std::size_t used = 0;
    std::vector<double> coarse = pass(panels, used);
    if (!quad.refine) {
        if (diag) *diag = {panels, used, 0.0};
        return coarse;
    }
    double change = 0.0;
    while (true) {
        if (2 * panels > quad.max_panels) {
            throw NumericalError("lewis_integrate: no convergence within " + std::to_string(quad.max_panels) +
                                 " panels; last change " + format_double(change) + " at " +
                                 std::to_string(panels) + " panels, tolerance " + format_double(quad.tol));
        }
        panels *= 2;
        std::vector<double> fine = pass(panels, used);
        change = 0.0;
        for (std::size_t i = 0; i < fine.size(); ++i) change = std::max(change, std::abs(fine[i] - coarse[i]));
        if (change <= quad.tol) {
            if (diag) *diag = {panels, used, change};
            return fine;
        }
        coarse = std::move(fine);
    }
}

std::vector<double> lewis_price(const ModelParams& params, double T, std::span<const double> strikes,
                                std::size_t n_steps, const LewisQuadrature& quad, LewisDiagnostics* diag) {
    params.validate();
    GridSpec{n_steps, T}.validate();
    auto phi = [&](std::span<const double> us) {
        std::vector<cplx> args(us.size());
        for (std::size_t i = 0; i < us.size(); ++i) args[i] = cplx{us[i], -0.5};
        return char_fn_batch(args, T, n_steps, params);
    };
    return lewis_integrate(phi, params.s0, T, params.r, strikes, quad, diag);
}

}  // namespace rheston
