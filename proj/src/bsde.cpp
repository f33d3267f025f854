#include "rheston/bsde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "rheston/parallel.hpp"
#include "rheston/rng.hpp"
#include "rheston/simd/kernels.hpp"

namespace rheston {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Buckets {
    std::vector<double> times;
    std::vector<std::size_t> index;
};

Buckets bucket_layout(std::size_t base, const GridSpec& grid, std::size_t p) {
    Buckets b;
    const double t = grid.time(base);
    const double dt = grid.dt();
    for (std::size_t a = 1; a <= p; ++a) {
        const double ta = a == p ? grid.T : t + static_cast<double>(a) * (grid.T - t) / static_cast<double>(p);
        const auto k = static_cast<std::size_t>(std::llround(ta / dt));
        b.times.push_back(ta);
        b.index.push_back(std::clamp(k, base + 1, grid.n));
    }
    return b;
}

std::size_t feature_count(std::size_t p) { return p + 2; }

// Row layout of every training/evaluation matrix: row = strike * n_paths + path.
Matrix features(const BsdeData& data, std::size_t step, std::span<const std::size_t> paths,
                std::span<const double> log_moneyness, const FeatureScaling* scaling) {
    const std::size_t np = paths.size();
    const std::size_t nf = feature_count(data.p);
    Matrix x(np * log_moneyness.size(), nf);
    for (std::size_t j = 0; j < log_moneyness.size(); ++j) {
        for (std::size_t q = 0; q < np; ++q) {
            const std::size_t path = paths[q];
            auto row = x.row(j * np + q);
            row[0] = data.spot(step, path);
            const auto th = data.theta[step].row(path);
            std::copy(th.begin(), th.end(), row.begin() + 1);
            row[nf - 1] = log_moneyness[j];
        }
    }
    if (scaling && !scaling->mean.empty()) {
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < nf; ++c) x(r, c) = (x(r, c) - scaling->mean[c]) * scaling->inv_scale[c];
        }
    }
    return x;
}

FeatureScaling fit_scaling(const Matrix& x) {
    FeatureScaling s;
    const auto rows = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
        mean /= rows;
        double var = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
        const double sd = std::sqrt(var / rows);
        s.mean.push_back(mean);
        // Constant features (all paths share the state at time 0) map to zero.
        s.inv_scale.push_back(sd > 1e-12 * (1.0 + std::abs(mean)) ? 1.0 / sd : 0.0);
    }
    return s;
}

std::vector<double> log_moneyness_of(std::span<const double> strikes, double s0) {
    std::vector<double> out;
    for (const double k : strikes) out.push_back(std::log(k / s0));
    return out;
}

// Increments scaled by the current volatility, so that the net output stands
// for the volatility-free part of the hedge and vanishes with the variance.
void fill_increments(const BsdeData& data, std::span<const std::size_t> paths, std::size_t n_strikes,
                     RolloutSteps& steps) {
    const std::size_t np = paths.size();
    steps.rows = np * n_strikes;
    steps.inc.assign(data.m, std::vector<double>(steps.rows));
    steps.inc_perp.assign(data.m, std::vector<double>(steps.rows));
    steps.coarse_dt = data.coarse_dt;
    for (std::size_t i = 0; i < data.m; ++i) {
        for (std::size_t q = 0; q < np; ++q) {
            const std::size_t path = paths[q];
            const double vol = std::sqrt(std::max(data.variance(i, path), 0.0));
            const double d = vol * data.inc(i, path);
            const double dp = vol * data.inc_perp(i, path);
            for (std::size_t j = 0; j < n_strikes; ++j) {
                steps.inc[i][j * np + q] = d;
                steps.inc_perp[i][j * np + q] = dp;
            }
        }
    }
}

std::vector<double> terminal_payoff(const BsdeData& data, std::span<const std::size_t> paths,
                                    std::span<const double> strikes) {
    const std::size_t np = paths.size();
    std::vector<double> g(np * strikes.size());
    for (std::size_t j = 0; j < strikes.size(); ++j) {
        for (std::size_t q = 0; q < np; ++q) g[j * np + q] = std::max(data.terminal_spot[paths[q]] - strikes[j], 0.0);
    }
    return g;
}

// Sum over strikes of the biased variance of each strike block.
double blockwise_loss(const std::vector<double>& y, std::size_t n_strikes, std::size_t np) {
    double total = 0.0;
    for (std::size_t j = 0; j < n_strikes; ++j) total += loss(std::span<const double>(y.data() + j * np, np));
    return total;
}

void check_data(const BsdeData& data, const BsdeConfig& cfg) {
    if (data.m != cfg.m || data.p != cfg.p) throw std::invalid_argument("bsde: data built for another (m, p)");
}

using BatchSource = std::function<const BsdeData&(std::size_t iteration, std::vector<std::size_t>& paths)>;

TrainResult train_impl(const BsdeConfig& cfg, const ModelParams& params, const BsdeData& pool,
                       std::span<const double> strikes, std::uint64_t seed, std::ostream* log,
                       const BatchSource& source) {
    check_data(pool, cfg);
    if (strikes.empty()) throw std::invalid_argument("train: no strikes");
    if (cfg.batch_size < 2) throw std::invalid_argument("train: batch size must be at least 2");
    const std::size_t ns = strikes.size();
    const std::vector<double> logm = log_moneyness_of(strikes, params.s0);
    TrainResult res;
    res.model = make_model(cfg, ns, seed);
    BsdeModel& model = res.model;
    model.coarse_index = pool.coarse_index;
    const auto start = Clock::now();

    std::vector<std::size_t> paths;
    const BsdeData* batch = &source(0, paths);
    for (std::size_t i = 0; i < cfg.m; ++i) model.scaling.push_back(fit_scaling(features(*batch, i, paths, logm, nullptr)));

    const double rate = params.r;
    std::vector<double> growth_before(cfg.m, 1.0);  // prod_{l<i} (1 - r dt_l)
    for (std::size_t i = 1; i < cfg.m; ++i) growth_before[i] = growth_before[i - 1] * (1.0 - rate * pool.coarse_dt[i - 1]);
    std::vector<double> growth_after(cfg.m, 1.0);  // prod_{l>i} (1 + r dt_l)
    for (std::size_t i = cfg.m - 1; i-- > 0;) growth_after[i] = growth_after[i + 1] * (1.0 + rate * pool.coarse_dt[i + 1]);
    const double total_growth = growth_after[0] * (1.0 + rate * pool.coarse_dt[0]);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        if (it > 0) batch = &source(it, paths);
        const std::size_t np = paths.size();
        RolloutSteps steps;
        fill_increments(*batch, paths, ns, steps);
        steps.rate = rate;
        steps.z.resize(cfg.m);
        steps.z_perp.resize(cfg.m);
        std::vector<nn::ForwardCache> caches(cfg.m);
        for (std::size_t i = 0; i < cfg.m; ++i) {
            const Matrix x = features(*batch, i, paths, logm, &model.scaling[i]);
            const Matrix out = nn::forward(model.nets[i], x, true, &caches[i]);
            steps.z_perp[i].resize(steps.rows);
            steps.z[i].resize(steps.rows);
            for (std::size_t r = 0; r < steps.rows; ++r) {
                steps.z_perp[i][r] = out(r, 0);
                steps.z[i][r] = out(r, 1);
            }
        }
        const std::vector<double> g = terminal_payoff(*batch, paths, strikes);
        std::vector<double> dy(steps.rows);
        double current_loss = 0.0;
        std::vector<double> batch_prices(ns, 0.0);
        std::vector<double> sensitivity(cfg.m);
        if (!cfg.forward_mode) {
            const std::vector<double> y0 = backward_recursion(steps, g);
            current_loss = blockwise_loss(y0, ns, np);
            for (std::size_t j = 0; j < ns; ++j) {
                const double* blk = y0.data() + j * np;
                const double mean = std::accumulate(blk, blk + np, 0.0) / static_cast<double>(np);
                batch_prices[j] = mean;
                for (std::size_t q = 0; q < np; ++q) dy[j * np + q] = 2.0 / static_cast<double>(np) * (blk[q] - mean);
            }
            for (std::size_t i = 0; i < cfg.m; ++i) sensitivity[i] = -growth_before[i];
        } else {
            std::vector<double> y0(steps.rows);
            for (std::size_t j = 0; j < ns; ++j) std::fill_n(y0.begin() + static_cast<std::ptrdiff_t>(j * np), np, model.p0[j]);
            const std::vector<double> ym = forward_recursion(steps, y0);
            std::vector<double> p0_grad(ns, 0.0);
            for (std::size_t r = 0; r < steps.rows; ++r) {
                const double e = ym[r] - g[r];
                current_loss += e * e / static_cast<double>(np);
                dy[r] = 2.0 * e / static_cast<double>(np);
                p0_grad[r / np] += dy[r] * total_growth;
            }
            batch_prices = model.p0;
            nn::step(model.p0_optim, model.p0, p0_grad);
            for (std::size_t i = 0; i < cfg.m; ++i) sensitivity[i] = growth_after[i];
        }
        if (!std::isfinite(current_loss)) {
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(it));
        }
        if (it == 0) res.initial_loss = current_loss;
        res.final_loss = current_loss;
        for (std::size_t i = 0; i < cfg.m; ++i) {
            Matrix grad_out(steps.rows, 2);
            for (std::size_t r = 0; r < steps.rows; ++r) {
                grad_out(r, 0) = sensitivity[i] * steps.inc_perp[i][r] * dy[r];
                grad_out(r, 1) = sensitivity[i] * steps.inc[i][r] * dy[r];
            }
            const std::vector<double> grads = nn::backward(model.nets[i], caches[i], grad_out);
            nn::step(model.optims[i], model.nets[i].params(), grads);
        }
        if (log && cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.iterations)) {
            nlohmann::json rec;
            rec["iteration"] = it;
            rec["loss"] = current_loss;
            rec["prices"] = batch_prices;
            rec["wall_time"] = seconds_since(start);
            *log << rec.dump() << '\n';
        }
    }
    res.trained = cfg.iterations > 0;
    res.timings.train = seconds_since(start);

    const auto price_start = Clock::now();
    if (cfg.forward_mode) {
        res.prices = model.p0;
        res.std_errors.assign(ns, 0.0);
    } else {
        const std::size_t n_eval = cfg.eval_paths == 0 ? pool.n_paths : std::min(cfg.eval_paths, pool.n_paths);
        std::vector<double> sum(ns, 0.0), sum_sq(ns, 0.0);
        std::vector<std::vector<double>> per_strike(ns);
        for (std::size_t b = 0; b < n_eval; b += cfg.batch_size) {
            std::vector<std::size_t> idx(std::min(cfg.batch_size, n_eval - b));
            std::iota(idx.begin(), idx.end(), b);
            const Matrix y0 = backward_rollout(model, pool, idx, strikes, params);
            for (std::size_t q = 0; q < idx.size(); ++q) {
                for (std::size_t j = 0; j < ns; ++j) per_strike[j].push_back(y0(q, j));
            }
        }
        const auto& k = simd::kernels();
        for (std::size_t j = 0; j < ns; ++j) {
            const double n = static_cast<double>(n_eval);
            // Averaging deviations from the first sample keeps a constant
            // sample set exact.
            std::vector<double>& x = per_strike[j];
            const double shift = x.front();
            for (double& v : x) v -= shift;
            const double mean = shift + k.sum(x.data(), n_eval) / n;
            for (double& v : x) v += shift;
            const double var = n_eval > 1 ? k.sum_sq_dev(per_strike[j].data(), mean, n_eval) / (n - 1.0) : 0.0;
            res.prices.push_back(mean);
            res.std_errors.push_back(std::sqrt(var / n));
        }
    }
    res.timings.price = seconds_since(price_start);
    return res;
}

}  // namespace

BasisProjection project_theta(const ThetaCurve& curve, const GridSpec& grid, std::size_t p, double alpha) {
    grid.validate();
    if (p == 0) throw std::invalid_argument("project_theta: p must be at least 1");
    BasisProjection proj;
    const std::size_t base = curve.base_index;
    if (base >= grid.n) return proj;
    if (curve.values.size() != grid.n + 1 - base) throw std::invalid_argument("project_theta: curve length mismatch");
    proj.p = p;
    proj.t = grid.time(base);
    const Buckets b = bucket_layout(base, grid, p);
    proj.bucket_times = b.times;
    for (std::size_t a = 0; a < p; ++a) {
        proj.theta_coeffs.push_back(curve.at(b.index[a]));
        proj.kappa_coeffs.push_back(kernel_eval(b.times[a] - proj.t, alpha));
    }
    return proj;
}

Matrix assemble_diffusion(double x, const BasisProjection& proj, const ModelParams& params) {
    if (!(x > 0.0)) throw std::invalid_argument("assemble_diffusion: spot must be positive");
    if (proj.empty()) throw std::invalid_argument("assemble_diffusion: empty projection");
    const double vol = std::sqrt(std::max(proj.theta_coeffs[0], 0.0));
    Matrix f(1 + proj.p, 2);
    f(0, 0) = vol * x * params.rho_bar();
    f(0, 1) = vol * x * params.rho;
    for (std::size_t a = 0; a < proj.p; ++a) f(1 + a, 1) = params.nu * vol * proj.kappa_coeffs[a];
    return f;
}

Matrix diffusion_covariance(double x, const BasisProjection& proj, const ModelParams& params) {
    if (proj.empty()) throw std::invalid_argument("diffusion_covariance: empty projection");
    const double v = std::max(proj.theta_coeffs[0], 0.0);
    const double l = std::sqrt(v);
    const double xi = params.nu * std::sqrt(v);
    Matrix c(1 + proj.p, 1 + proj.p);
    c(0, 0) = l * l * x * x;
    for (std::size_t a = 0; a < proj.p; ++a) {
        c(0, 1 + a) = c(1 + a, 0) = params.rho * l * xi * x * proj.kappa_coeffs[a];
        for (std::size_t b = 0; b < proj.p; ++b) c(1 + a, 1 + b) = xi * xi * proj.kappa_coeffs[a] * proj.kappa_coeffs[b];
    }
    return c;
}

double loss(std::span<const double> p0_samples) {
    if (p0_samples.size() < 2) throw std::invalid_argument("loss: need at least two samples");
    const auto& k = simd::kernels();
    const double n = static_cast<double>(p0_samples.size());
    const double mean = k.sum(p0_samples.data(), p0_samples.size()) / n;
    return k.sum_sq_dev(p0_samples.data(), mean, p0_samples.size()) / n;
}

BsdeData build_bsde_data(const PathBatch& batch, const KernelTables& tables, std::size_t m, std::size_t p) {
    const GridSpec& grid = batch.grid;
    if (m == 0 || m > grid.n) throw std::invalid_argument("build_bsde_data: need 1 <= m <= n");
    if (p == 0) throw std::invalid_argument("build_bsde_data: p must be at least 1");
    if (batch.bbar.empty()) throw std::invalid_argument("build_bsde_data: batch has no increments");
    const ModelParams& prm = batch.params;
    BsdeData d;
    d.m = m;
    d.p = p;
    d.n_paths = batch.n_paths();
    for (std::size_t i = 0; i <= m; ++i) {
        d.coarse_index.push_back(static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(grid.n) / static_cast<double>(m))));
    }
    for (std::size_t i = 0; i < m; ++i) d.coarse_dt.push_back(grid.time(d.coarse_index[i + 1]) - grid.time(d.coarse_index[i]));
    d.spot = Matrix(m, d.n_paths);
    d.variance = Matrix(m, d.n_paths);
    d.inc = Matrix(m, d.n_paths);
    d.inc_perp = Matrix(m, d.n_paths);
    d.theta.assign(m, Matrix(d.n_paths, p));
    d.terminal_spot.resize(d.n_paths);
    const double rho_bar = prm.rho_bar();
    std::vector<Buckets> buckets;
    for (std::size_t i = 0; i < m; ++i) buckets.push_back(bucket_layout(d.coarse_index[i], grid, p));

    parallel_for(d.n_paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> drift(grid.n), noise(grid.n);
        for (std::size_t q = begin; q < end; ++q) {
            const auto v = batch.v.row(q);
            const auto s = batch.s.row(q);
            const auto bbar = batch.bbar.row(q);
            const auto w = batch.w.row(q);
            for (std::size_t j = 0; j < grid.n; ++j) {
                drift[j] = prm.kappa * (prm.theta - v[j]);
                noise[j] = prm.nu * std::sqrt(v[j]) * bbar[j];
            }
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t base = d.coarse_index[i];
                d.spot(i, q) = s[base];
                d.variance(i, q) = v[base];
                for (std::size_t a = 0; a < p; ++a) {
                    const std::size_t k = buckets[i].index[a];
                    double x = prm.v0;
                    for (std::size_t j = 0; j < base; ++j) {
                        x += drift[j] * tables.a_tilde[k - j - 1] + noise[j] * tables.kernel_at_b_star[k - j - 1];
                    }
                    d.theta[i](q, a) = std::max(x, 0.0);
                }
                double db = 0.0, dw = 0.0;
                for (std::size_t j = base; j < d.coarse_index[i + 1]; ++j) {
                    db += bbar[j];
                    dw += w[j];
                }
                d.inc(i, q) = db;
                d.inc_perp(i, q) = rho_bar > 0.0 ? (dw - prm.rho * db) / rho_bar : 0.0;
            }
            d.terminal_spot[q] = s[grid.n];
        }
    });
    return d;
}

std::vector<double> backward_recursion(const RolloutSteps& steps, std::span<const double> terminal) {
    if (terminal.size() != steps.rows) throw std::invalid_argument("backward_recursion: row count mismatch");
    std::vector<double> y(terminal.begin(), terminal.end());
    for (std::size_t i = steps.coarse_dt.size(); i-- > 0;) {
        const double disc = 1.0 - steps.rate * steps.coarse_dt[i];
        for (std::size_t r = 0; r < steps.rows; ++r) {
            y[r] = disc * y[r] - (steps.z_perp[i][r] * steps.inc_perp[i][r] + steps.z[i][r] * steps.inc[i][r]);
        }
    }
    return y;
}

std::vector<double> forward_recursion(const RolloutSteps& steps, std::span<const double> initial) {
    if (initial.size() != steps.rows) throw std::invalid_argument("forward_recursion: row count mismatch");
    std::vector<double> y(initial.begin(), initial.end());
    for (std::size_t i = 0; i < steps.coarse_dt.size(); ++i) {
        const double grow = 1.0 + steps.rate * steps.coarse_dt[i];
        for (std::size_t r = 0; r < steps.rows; ++r) {
            y[r] = grow * y[r] + (steps.z_perp[i][r] * steps.inc_perp[i][r] + steps.z[i][r] * steps.inc[i][r]);
        }
    }
    return y;
}

BsdeModel make_model(const BsdeConfig& cfg, std::size_t n_strikes, std::uint64_t seed) {
    if (cfg.m == 0 || cfg.layers == 0 || cfg.neurons == 0 || cfg.p == 0) {
        throw std::invalid_argument("make_model: m, layers, neurons and p must be positive");
    }
    if (!(cfg.adam_fraction >= 0.0 && cfg.adam_fraction <= 1.0)) {
        throw std::invalid_argument("make_model: adam_fraction must lie in [0, 1]");
    }
    BsdeModel model;
    model.config = cfg;
    std::vector<std::size_t> dims{feature_count(cfg.p)};
    for (std::size_t l = 0; l < cfg.layers; ++l) dims.push_back(cfg.neurons);
    dims.push_back(2);
    const auto switch_at =
        static_cast<std::size_t>(std::llround(cfg.adam_fraction * static_cast<double>(cfg.iterations)));
    for (std::size_t i = 0; i < cfg.m; ++i) {
        nn::DenseNet net(dims);
        auto rng = substream(seed, 1000 + i);
        net.initialise(rng);
        model.optims.push_back(nn::make_optimiser(net.params().size(), cfg.learning_rate, switch_at));
        model.nets.push_back(std::move(net));
    }
    model.p0.assign(n_strikes, 0.0);
    model.p0_optim = nn::make_optimiser(n_strikes, cfg.learning_rate, switch_at);
    return model;
}

Matrix backward_rollout(const BsdeModel& model, const BsdeData& data, std::span<const std::size_t> paths,
                        std::span<const double> strikes, const ModelParams& params) {
    check_data(data, model.config);
    if (model.nets.size() != data.m) throw std::invalid_argument("backward_rollout: net count differs from m");
    const std::vector<double> logm = log_moneyness_of(strikes, params.s0);
    const std::size_t np = paths.size();
    RolloutSteps steps;
    fill_increments(data, paths, strikes.size(), steps);
    steps.rate = params.r;
    for (std::size_t i = 0; i < data.m; ++i) {
        const FeatureScaling* sc = i < model.scaling.size() ? &model.scaling[i] : nullptr;
        const Matrix x = features(data, i, paths, logm, sc);
        if (x.cols() != model.nets[i].input_dim()) throw std::invalid_argument("backward_rollout: feature width");
        const Matrix out = nn::predict(model.nets[i], x);
        steps.z_perp.emplace_back(steps.rows);
        steps.z.emplace_back(steps.rows);
        for (std::size_t r = 0; r < steps.rows; ++r) {
            steps.z_perp[i][r] = out(r, 0);
            steps.z[i][r] = out(r, 1);
        }
    }
    const std::vector<double> y0 = backward_recursion(steps, terminal_payoff(data, paths, strikes));
    Matrix out(np, strikes.size());
    for (std::size_t j = 0; j < strikes.size(); ++j) {
        for (std::size_t q = 0; q < np; ++q) out(q, j) = y0[j * np + q];
    }
    return out;
}

TrainResult train_on(const BsdeConfig& cfg, const ModelParams& params, const BsdeData& pool,
                     std::span<const double> strikes, std::uint64_t seed, std::ostream* log) {
    auto rng = substream(seed, 7);
    std::vector<std::size_t> order(pool.n_paths);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t n = std::min(cfg.batch_size, pool.n_paths);
    std::size_t cursor = pool.n_paths;  // forces a shuffle on first use
    auto source = [&](std::size_t, std::vector<std::size_t>& paths) -> const BsdeData& {
        if (cursor + n > pool.n_paths) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        paths.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                     order.begin() + static_cast<std::ptrdiff_t>(cursor + n));
        cursor += n;
        return pool;
    };
    return train_impl(cfg, params, pool, strikes, seed, log, source);
}

TrainResult train(const BsdeConfig& cfg, const ModelParams& params, double T, std::span<const double> strikes,
                  std::uint64_t seed, std::ostream* log) {
    params.validate();
    const auto start = Clock::now();
    const GridSpec grid{cfg.fine_steps, T};
    const KernelTables tables = KernelTables::make(params, grid);
    BsdeData pool = build_bsde_data(simulate(params, tables, cfg.pool_paths, seed), tables, cfg.m, cfg.p);
    const double build = seconds_since(start);
    TrainResult res;
    if (cfg.resample) {
        BsdeData fresh;
        auto source = [&](std::size_t it, std::vector<std::size_t>& paths) -> const BsdeData& {
            fresh = build_bsde_data(simulate(params, tables, cfg.batch_size, splitmix64(seed ^ (it + 1))), tables,
                                    cfg.m, cfg.p);
            paths.resize(cfg.batch_size);
            std::iota(paths.begin(), paths.end(), 0);
            return fresh;
        };
        res = train_impl(cfg, params, pool, strikes, seed, log, source);
    } else {
        res = train_on(cfg, params, pool, strikes, seed, log);
    }
    res.timings.build = build;
    return res;
}

std::vector<SmilePoint> price_smile(const BsdeConfig& config, const ModelParams& params,
                                    std::span<const double> maturities, std::span<const double> log_moneyness,
                                    std::uint64_t seed, std::ostream* log) {
    std::vector<double> strikes;
    for (const double k : log_moneyness) strikes.push_back(params.s0 * std::exp(k));
    std::vector<SmilePoint> out;
    for (const double T : maturities) {
        const TrainResult res = train(config, params, T, strikes, seed, log);
        for (std::size_t j = 0; j < strikes.size(); ++j) {
            SmilePoint pt{log_moneyness[j], T, res.prices[j], std::nan("")};
            try {
                pt.vol = implied_vol(res.prices[j], params.s0, strikes[j], T, params.r);
            } catch (const PriceOutOfBounds&) {
            }
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace rheston
