#include "rheston/hybrid_mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "rheston/parallel.hpp"
#include "rheston/rng.hpp"
#include "rheston/simd/kernels.hpp"

namespace rheston {
namespace {

// Lag-indexed table reversed so that a convolution over j = 0..i-1 becomes a
// contiguous dot product: rev[n - i + j] = table[i - j - 1].
std::vector<double> reversed(const std::vector<double>& lagged) { return {lagged.rbegin(), lagged.rend()}; }

void simulate_range(const ModelParams& p, const KernelTables& tab, PathBatch& out, std::size_t begin,
                    std::size_t end) {
    const std::size_t n = tab.grid.n;
    const double dt = tab.grid.dt();
    const auto& L = tab.chol.L;
    const auto& k = simd::kernels();
    const std::vector<double> a_rev = reversed(tab.a_tilde);
    const std::vector<double> kb_rev = reversed(tab.kernel_at_b_star);
    std::vector<double> drift(n);
    std::vector<double> noise(n);
    std::normal_distribution<double> normal;

    for (std::size_t path = begin; path < end; ++path) {
        auto rng = substream(out.seed, path);
        auto v = out.v.row(path);
        auto s = out.s.row(path);
        auto bbar = out.bbar.row(path);
        auto btilde = out.btilde.row(path);
        auto w = out.w.row(path);
        for (std::size_t i = 0; i < n; ++i) {
            const double z0 = normal(rng);
            const double z1 = normal(rng);
            const double z2 = normal(rng);
            bbar[i] = L[0][0] * z0;
            btilde[i] = L[1][0] * z0 + L[1][1] * z1;
            w[i] = L[2][0] * z0 + L[2][1] * z1 + L[2][2] * z2;
        }
        v[0] = p.v0;
        s[0] = p.s0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double v_prev = v[i - 1];
            const double vol_prev = std::sqrt(v_prev);
            drift[i - 1] = p.kappa * (p.theta - v_prev);
            noise[i - 1] = p.nu * vol_prev * bbar[i - 1];
            double vi = p.v0 + k.dot(drift.data(), a_rev.data() + (n - i), i);
            if (i >= 2) vi += k.dot(noise.data(), kb_rev.data() + (n - i), i - 1);
            vi += p.nu * vol_prev * btilde[i - 1];
            s[i] = s[i - 1] * std::exp((p.r - 0.5 * v_prev) * dt + vol_prev * w[i - 1]);
            if (!std::isfinite(vi) || !std::isfinite(s[i]) || !(s[i] > 0.0)) {
                throw NumericalError("simulate: non-finite state on path " + std::to_string(path) + " at step " +
                                     std::to_string(i));
            }
            v[i] = std::max(vi, 0.0);
        }
    }
}

template <class T>
void put(std::ostream& os, const T& value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T get(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!is) throw std::runtime_error("read_paths_binary: truncated input");
    return value;
}

constexpr char kMagic[4] = {'R', 'H', 'P', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

PathBatch simulate(const ModelParams& params, const GridSpec& grid, std::size_t n_paths, std::uint64_t seed) {
    return simulate(params, KernelTables::make(params, grid), n_paths, seed);
}

PathBatch simulate(const ModelParams& params, const KernelTables& tables, std::size_t n_paths, std::uint64_t seed) {
    params.validate();
    if (n_paths == 0) throw std::invalid_argument("simulate: need at least one path");
    if (params.alpha != tables.alpha) throw std::invalid_argument("simulate: tables built for another alpha");
    const std::size_t n = tables.grid.n;
    PathBatch out;
    out.params = params;
    out.grid = tables.grid;
    out.seed = seed;
    out.v = Matrix(n_paths, n + 1);
    out.s = Matrix(n_paths, n + 1);
    out.bbar = Matrix(n_paths, n);
    out.btilde = Matrix(n_paths, n);
    out.w = Matrix(n_paths, n);
    parallel_for(n_paths, [&](std::size_t b, std::size_t e) { simulate_range(params, tables, out, b, e); });
    return out;
}

ThetaCurve initial_theta(const ModelParams& params, std::size_t n) {
    ThetaCurve c;
    c.base_index = 0;
    c.raw.assign(n + 1, params.v0);
    c.values.assign(n + 1, std::max(params.v0, 0.0));
    return c;
}

ThetaCurve theta_step(const ThetaCurve& prev, double v_prev, double bbar_prev, const KernelTables& tables,
                      const ModelParams& params, std::size_t i) {
    const std::size_t n = tables.grid.n;
    if (i == 0 || i > n || prev.base_index + 1 != i || prev.raw.size() != n + 2 - i) {
        throw std::out_of_range("theta_step: curve does not belong to base index i - 1");
    }
    const double drift = params.kappa * (params.theta - v_prev);
    const double noise = params.nu * std::sqrt(std::max(v_prev, 0.0)) * bbar_prev;
    ThetaCurve next;
    next.base_index = i;
    next.raw.resize(n + 1 - i);
    next.values.resize(n + 1 - i);
    for (std::size_t k = i; k <= n; ++k) {
        const std::size_t lag = k - i + 1;
        const double x = prev.raw[k - prev.base_index] + drift * tables.a_tilde[lag - 1] +
                         noise * tables.kernel_at_b_star[lag - 1];
        next.raw[k - i] = x;
        next.values[k - i] = std::max(x, 0.0);
    }
    return next;
}

namespace {

double theta_raw(const PathBatch& batch, const KernelTables& tables, std::size_t path, std::size_t base,
                 std::size_t k) {
    const ModelParams& p = batch.params;
    const auto v = batch.v.row(path);
    const auto bbar = batch.bbar.row(path);
    double x = p.v0;
    for (std::size_t j = 0; j < base; ++j) {
        const std::size_t lag = k - j;
        x += p.kappa * (p.theta - v[j]) * tables.a_tilde[lag - 1] +
             p.nu * std::sqrt(v[j]) * tables.kernel_at_b_star[lag - 1] * bbar[j];
    }
    return x;
}

}  // namespace

double theta_value(const PathBatch& batch, const KernelTables& tables, std::size_t path, std::size_t base,
                   std::size_t k) {
    if (path >= batch.n_paths() || base > tables.grid.n || k < base || k > tables.grid.n) {
        throw std::out_of_range("theta_value: index out of range");
    }
    return std::max(theta_raw(batch, tables, path, base, k), 0.0);
}

ThetaCurve theta_curve(const PathBatch& batch, const KernelTables& tables, std::size_t path, std::size_t base) {
    const std::size_t n = tables.grid.n;
    if (path >= batch.n_paths() || base > n) throw std::out_of_range("theta_curve: index out of range");
    ThetaCurve c;
    c.base_index = base;
    for (std::size_t k = base; k <= n; ++k) {
        const double x = theta_raw(batch, tables, path, base, k);
        c.raw.push_back(x);
        c.values.push_back(std::max(x, 0.0));
    }
    return c;
}

std::vector<PriceEstimate> mc_price(const PathBatch& batch, std::span<const double> strikes) {
    const std::size_t n_paths = batch.n_paths();
    if (n_paths == 0) throw std::invalid_argument("mc_price: empty batch");
    const std::size_t last = batch.grid.n;
    const double disc = std::exp(-batch.params.r * batch.grid.T);
    std::vector<double> payoff(n_paths);
    const auto& k = simd::kernels();
    std::vector<PriceEstimate> out;
    out.reserve(strikes.size());
    for (const double strike : strikes) {
        for (std::size_t p = 0; p < n_paths; ++p) payoff[p] = std::max(batch.s(p, last) - strike, 0.0);
        const double mean = k.sum(payoff.data(), n_paths) / static_cast<double>(n_paths);
        const double var =
            n_paths > 1 ? k.sum_sq_dev(payoff.data(), mean, n_paths) / static_cast<double>(n_paths - 1) : 0.0;
        out.push_back({disc * mean, disc * std::sqrt(var / static_cast<double>(n_paths))});
    }
    return out;
}

void write_paths_csv(std::ostream& os, const PathBatch& batch) {
    const ModelParams& p = batch.params;
    os << "# n=" << batch.grid.n << " T=" << format_double(batch.grid.T) << " n_paths=" << batch.n_paths()
       << " seed=" << batch.seed << " kappa=" << format_double(p.kappa) << " theta=" << format_double(p.theta)
       << " nu=" << format_double(p.nu) << " alpha=" << format_double(p.alpha) << " rho=" << format_double(p.rho)
       << " v0=" << format_double(p.v0) << " s0=" << format_double(p.s0) << " r=" << format_double(p.r) << '\n';
    for (std::size_t path = 0; path < batch.n_paths(); ++path) {
        for (const auto& [tag, m] : {std::pair{"S", &batch.s}, std::pair{"V", &batch.v}}) {
            os << tag << ',' << path;
            for (const double x : m->row(path)) os << ',' << format_double(x);
            os << '\n';
        }
    }
}

void write_paths_binary(std::ostream& os, const PathBatch& batch) {
    const ModelParams& p = batch.params;
    os.write(kMagic, sizeof kMagic);
    put(os, kFormatVersion);
    put(os, static_cast<std::uint64_t>(batch.grid.n));
    put(os, batch.grid.T);
    put(os, static_cast<std::uint64_t>(batch.n_paths()));
    put(os, batch.seed);
    for (const double x : {p.kappa, p.theta, p.nu, p.alpha, p.rho, p.v0, p.s0, p.r}) put(os, x);
    os.write(reinterpret_cast<const char*>(batch.s.data()),
             static_cast<std::streamsize>(batch.s.storage().size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(batch.v.data()),
             static_cast<std::streamsize>(batch.v.storage().size() * sizeof(double)));
}

PathBatch read_paths_binary(std::istream& is) {
    char magic[4];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw std::runtime_error("read_paths_binary: bad magic");
    }
    if (get<std::uint32_t>(is) != kFormatVersion) throw std::runtime_error("read_paths_binary: unknown version");
    PathBatch b;
    b.grid.n = get<std::uint64_t>(is);
    b.grid.T = get<double>(is);
    const auto n_paths = get<std::uint64_t>(is);
    b.seed = get<std::uint64_t>(is);
    ModelParams& p = b.params;
    for (double* x : {&p.kappa, &p.theta, &p.nu, &p.alpha, &p.rho, &p.v0, &p.s0, &p.r}) *x = get<double>(is);
    b.s = Matrix(n_paths, b.grid.n + 1);
    b.v = Matrix(n_paths, b.grid.n + 1);
    for (Matrix* m : {&b.s, &b.v}) {
        is.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(m->storage().size() * sizeof(double)));
        if (!is) throw std::runtime_error("read_paths_binary: truncated input");
    }
    return b;
}

}  // namespace rheston
