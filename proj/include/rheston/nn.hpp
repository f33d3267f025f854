#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "rheston/common.hpp"

namespace rheston::nn {

inline constexpr double kBatchNormEps = 1e-6;
inline constexpr double kBatchNormMomentum = 0.99;

/// Offsets of one layer's trainable parameters inside the flat vector.
struct LayerLayout {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weights = 0;  // out x in, row-major
    std::size_t bias = 0;
    std::size_t gamma = 0;  // hidden layers only
    std::size_t beta = 0;
    bool normalised = false;

    bool operator==(const LayerLayout&) const = default;
};

/// Feed-forward net: hidden layers are affine -> batch norm -> ReLU, the
/// output layer is affine. All trainable parameters live in one flat vector.
class DenseNet {
public:
    DenseNet() = default;
    /// dims = {input, hidden..., output}; at least {input, output}.
    explicit DenseNet(std::vector<std::size_t> dims);

    /// Glorot-uniform weights, zero biases, gamma = 1, beta = 0, running
    /// mean 0 and running std 1.
    void initialise(std::mt19937_64& rng);

    const std::vector<std::size_t>& dims() const { return dims_; }
    const std::vector<LayerLayout>& layers() const { return layers_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    /// Running statistics of hidden layer l, one entry per unit.
    std::vector<double>& running_mean(std::size_t l) { return running_mean_[l]; }
    std::vector<double>& running_std(std::size_t l) { return running_std_[l]; }
    const std::vector<double>& running_mean(std::size_t l) const { return running_mean_[l]; }
    const std::vector<double>& running_std(std::size_t l) const { return running_std_[l]; }

    bool operator==(const DenseNet&) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<LayerLayout> layers_;
    std::vector<double> params_;
    std::vector<std::vector<double>> running_mean_;
    std::vector<std::vector<double>> running_std_;
};

/// Intermediates of a forward pass. Activations are stored feature-major:
/// unit u of a layer occupies [u * rows, (u + 1) * rows).
struct ForwardCache {
    std::size_t rows = 0;
    bool training = false;
    std::vector<std::vector<double>> inputs;      // per layer input
    std::vector<std::vector<double>> normalised;  // hidden: x_hat
    std::vector<std::vector<double>> pre_relu;    // hidden: gamma * x_hat + beta
    std::vector<std::vector<double>> inv_std;     // hidden: 1 / s per unit
};

/// Runs the net on a row-major batch [rows x input_dim]. In training mode the
/// batch statistics are used and the running averages are updated; otherwise
/// the running averages are used. Returns [rows x output_dim].
Matrix forward(DenseNet& net, const Matrix& batch, bool training, ForwardCache* cache = nullptr);

/// Inference pass that leaves the net untouched.
Matrix predict(const DenseNet& net, const Matrix& batch);

/// Gradient of a scalar loss with respect to the flat parameter vector, given
/// dLoss/dOutput [rows x output_dim] and the cache of the matching forward.
std::vector<double> backward(const DenseNet& net, const ForwardCache& cache, const Matrix& output_grad);

enum class OptimMode { adam, sgd };

struct OptimState {
    double learning_rate = 0.2;
    std::size_t switch_iteration = 0;  // Adam for steps [0, switch), SGD after
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<double> m;
    std::vector<double> v;

    OptimMode mode() const { return step < switch_iteration ? OptimMode::adam : OptimMode::sgd; }
};

/// Optimiser sized for `n_params` with an Adam phase of `switch_iteration` steps.
OptimState make_optimiser(std::size_t n_params, double learning_rate, std::size_t switch_iteration);

/// One update of params in place.
void step(OptimState& opt, std::vector<double>& params, const std::vector<double>& grads);

/// Checkpoint layout (little-endian host order):
///   char[4] "RHNN", u32 version = 1, u64 n_dims, u64 dims[n_dims],
///   u64 n_params, f64 params[n_params],
///   per hidden layer: f64 running_mean[width], f64 running_std[width].
void save(std::ostream& os, const DenseNet& net);
DenseNet load(std::istream& is);

}  // namespace rheston::nn
