#include "rheston/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "rheston/simd/kernels.hpp"

namespace rheston::nn {
namespace {

std::vector<double> to_feature_major(const Matrix& m) {
    std::vector<double> out(m.rows() * m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out[c * m.rows() + r] = m(r, c);
    }
    return out;
}

Matrix to_row_major(const std::vector<double>& fm, std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) out(r, c) = fm[c * rows + r];
    }
    return out;
}

// Shared forward pass; running statistics are updated only when `running`
// is non-null and training is on.
Matrix run_forward(const DenseNet& net, std::vector<std::vector<double>>* run_mean,
                   std::vector<std::vector<double>>* run_std, const Matrix& batch, bool training,
                   ForwardCache* cache) {
    const auto& k = simd::kernels();
    const std::size_t rows = batch.rows();
    if (batch.cols() != net.input_dim()) throw std::invalid_argument("forward: batch width differs from input dim");
    if (training && rows < 2) throw std::invalid_argument("forward: training needs at least two rows");
    const auto& p = net.params();
    std::vector<double> x = to_feature_major(batch);
    if (cache) {
        cache->rows = rows;
        cache->training = training;
        cache->inputs.clear();
        cache->normalised.clear();
        cache->pre_relu.clear();
        cache->inv_std.clear();
    }
    std::size_t hidden = 0;
    for (const LayerLayout& L : net.layers()) {
        std::vector<double> z(L.out * rows);
        for (std::size_t o = 0; o < L.out; ++o) {
            double* zo = z.data() + o * rows;
            std::fill(zo, zo + rows, p[L.bias + o]);
            for (std::size_t i = 0; i < L.in; ++i) k.axpy(p[L.weights + o * L.in + i], x.data() + i * rows, zo, rows);
        }
        if (cache) cache->inputs.push_back(std::move(x));
        if (!L.normalised) {
            x = std::move(z);
            continue;
        }
        std::vector<double> inv_std(L.out);
        for (std::size_t o = 0; o < L.out; ++o) {
            double* zo = z.data() + o * rows;
            double mean, sd;
            if (training) {
                mean = k.sum(zo, rows) / static_cast<double>(rows);
                sd = std::sqrt(k.sum_sq_dev(zo, mean, rows) / static_cast<double>(rows) + kBatchNormEps);
                if (run_mean) {
                    double& rm = (*run_mean)[hidden][o];
                    double& rs = (*run_std)[hidden][o];
                    rm = kBatchNormMomentum * rm + (1.0 - kBatchNormMomentum) * mean;
                    rs = kBatchNormMomentum * rs + (1.0 - kBatchNormMomentum) * sd;
                }
            } else {
                mean = net.running_mean(hidden)[o];
                sd = net.running_std(hidden)[o];
            }
            inv_std[o] = 1.0 / sd;
            k.scale_shift(zo, inv_std[o], -mean * inv_std[o], rows);
        }
        std::vector<double> y = z;
        for (std::size_t o = 0; o < L.out; ++o) {
            k.scale_shift(y.data() + o * rows, p[L.gamma + o], p[L.beta + o], rows);
        }
        std::vector<double> a = y;
        k.relu(a.data(), a.size());
        if (cache) {
            cache->normalised.push_back(std::move(z));
            cache->pre_relu.push_back(std::move(y));
            cache->inv_std.push_back(std::move(inv_std));
        }
        x = std::move(a);
        ++hidden;
    }
    return to_row_major(x, rows, net.output_dim());
}

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw std::runtime_error("nn::load: truncated checkpoint");
    return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("nn::load: truncated checkpoint");
}

constexpr char kMagic[4] = {'R', 'H', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw std::invalid_argument("DenseNet: need input and output dims");
    for (const std::size_t d : dims_) {
        if (d == 0) throw std::invalid_argument("DenseNet: zero-width layer");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        LayerLayout L;
        L.in = dims_[l];
        L.out = dims_[l + 1];
        L.normalised = l + 2 < dims_.size();
        L.weights = offset;
        offset += L.in * L.out;
        L.bias = offset;
        offset += L.out;
        if (L.normalised) {
            L.gamma = offset;
            offset += L.out;
            L.beta = offset;
            offset += L.out;
            running_mean_.emplace_back(L.out, 0.0);
            running_std_.emplace_back(L.out, 1.0);
        }
        layers_.push_back(L);
    }
    params_.assign(offset, 0.0);
    for (const LayerLayout& L : layers_) {
        if (L.normalised) std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.gamma), L.out, 1.0);
    }
}

void DenseNet::initialise(std::mt19937_64& rng) {
    for (const LayerLayout& L : layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t i = 0; i < L.in * L.out; ++i) params_[L.weights + i] = dist(rng);
        std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.bias), L.out, 0.0);
        if (L.normalised) {
            std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.gamma), L.out, 1.0);
            std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.beta), L.out, 0.0);
        }
    }
    for (auto& v : running_mean_) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : running_std_) std::fill(v.begin(), v.end(), 1.0);
}

Matrix forward(DenseNet& net, const Matrix& batch, bool training, ForwardCache* cache) {
    std::vector<std::vector<double>> rm, rs;
    const std::size_t hidden = net.layers().size() - 1;
    for (std::size_t l = 0; l < hidden; ++l) {
        rm.push_back(net.running_mean(l));
        rs.push_back(net.running_std(l));
    }
    Matrix out = run_forward(net, &rm, &rs, batch, training, cache);
    for (std::size_t l = 0; l < hidden; ++l) {
        net.running_mean(l) = std::move(rm[l]);
        net.running_std(l) = std::move(rs[l]);
    }
    return out;
}

Matrix predict(const DenseNet& net, const Matrix& batch) { return run_forward(net, nullptr, nullptr, batch, false, nullptr); }

std::vector<double> backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_grad) {
    const auto& k = simd::kernels();
    const std::size_t rows = cache.rows;
    if (output_grad.rows() != rows || output_grad.cols() != net.output_dim() ||
        cache.inputs.size() != net.layers().size()) {
        throw std::invalid_argument("backward: gradient or cache does not match the net");
    }
    const auto& p = net.params();
    std::vector<double> grads(p.size(), 0.0);
    std::vector<double> g = to_feature_major(output_grad);
    const double inv_rows = 1.0 / static_cast<double>(rows);
    std::size_t hidden = cache.normalised.size();
    for (std::size_t li = net.layers().size(); li-- > 0;) {
        const LayerLayout& L = net.layers()[li];
        if (L.normalised) {
            --hidden;
            const auto& xhat = cache.normalised[hidden];
            const auto& y = cache.pre_relu[hidden];
            const auto& inv_std = cache.inv_std[hidden];
            k.relu_mask(y.data(), g.data(), g.size());
            for (std::size_t o = 0; o < L.out; ++o) {
                double* go = g.data() + o * rows;
                const double* xo = xhat.data() + o * rows;
                grads[L.gamma + o] = k.dot(go, xo, rows);
                grads[L.beta + o] = k.sum(go, rows);
                const double gamma = p[L.gamma + o];
                if (cache.training) {
                    const double mean_g = gamma * grads[L.beta + o] * inv_rows;
                    const double mean_gx = gamma * grads[L.gamma + o] * inv_rows;
                    // dz = (gamma * g - mean_g - xhat * mean_gx) / s
                    k.scale_shift(go, gamma * inv_std[o], -mean_g * inv_std[o], rows);
                    k.axpy(-mean_gx * inv_std[o], xo, go, rows);
                } else {
                    k.scale_shift(go, gamma * inv_std[o], 0.0, rows);
                }
            }
        }
        const auto& x = cache.inputs[li];
        for (std::size_t o = 0; o < L.out; ++o) {
            const double* go = g.data() + o * rows;
            grads[L.bias + o] = k.sum(go, rows);
            for (std::size_t i = 0; i < L.in; ++i) grads[L.weights + o * L.in + i] = k.dot(go, x.data() + i * rows, rows);
        }
        if (li == 0) break;
        std::vector<double> gin(L.in * rows, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t i = 0; i < L.in; ++i) {
                k.axpy(p[L.weights + o * L.in + i], g.data() + o * rows, gin.data() + i * rows, rows);
            }
        }
        g = std::move(gin);
    }
    return grads;
}

OptimState make_optimiser(std::size_t n_params, double learning_rate, std::size_t switch_iteration) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("make_optimiser: learning rate must be positive");
    OptimState s;
    s.learning_rate = learning_rate;
    s.switch_iteration = switch_iteration;
    s.m.assign(n_params, 0.0);
    s.v.assign(n_params, 0.0);
    return s;
}

void step(OptimState& opt, std::vector<double>& params, const std::vector<double>& grads) {
    if (grads.size() != params.size() || opt.m.size() != params.size() || opt.v.size() != params.size()) {
        throw std::invalid_argument("step: shape mismatch");
    }
    if (opt.mode() == OptimMode::adam) {
        const double t = static_cast<double>(opt.step + 1);
        const double c1 = 1.0 - std::pow(opt.beta1, t);
        const double c2 = 1.0 - std::pow(opt.beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grads[i];
            opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grads[i] * grads[i];
            const double mhat = opt.m[i] / c1;
            const double vhat = opt.v[i] / c2;
            params[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
        }
    } else {
        simd::kernels().axpy(-opt.learning_rate, grads.data(), params.data(), params.size());
    }
    ++opt.step;
}

void save(std::ostream& os, const DenseNet& net) {
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put(os, static_cast<std::uint64_t>(net.dims().size()));
    for (const std::size_t d : net.dims()) put(os, static_cast<std::uint64_t>(d));
    put(os, static_cast<std::uint64_t>(net.params().size()));
    put_doubles(os, net.params());
    for (std::size_t l = 0; l + 1 < net.layers().size(); ++l) {
        put_doubles(os, net.running_mean(l));
        put_doubles(os, net.running_std(l));
    }
}

DenseNet load(std::istream& is) {
    char magic[4];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("nn::load: bad magic");
    if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("nn::load: unknown version");
    const auto n_dims = get<std::uint64_t>(is);
    if (n_dims < 2 || n_dims > 1024) throw std::runtime_error("nn::load: implausible layer count");
    std::vector<std::size_t> dims(n_dims);
    for (auto& d : dims) d = get<std::uint64_t>(is);
    DenseNet net(dims);
    if (get<std::uint64_t>(is) != net.params().size()) throw std::runtime_error("nn::load: parameter count mismatch");
    get_doubles(is, net.params());
    for (std::size_t l = 0; l + 1 < net.layers().size(); ++l) {
        get_doubles(is, net.running_mean(l));
        get_doubles(is, net.running_std(l));
    }
    return net;
}

}  // namespace rheston::nn
