#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rheston {

/// Rough Heston model parameters. `nu` is the vol-of-vol, `alpha` the kernel
/// exponent (H = alpha - 1/2). `r` is a constant short rate.
struct ModelParams {
    double kappa = 1.0;
    double theta = 0.06;
    double nu = 0.1;
    double alpha = 0.6;
    double rho = -0.7;
    double v0 = 0.04;
    double s0 = 1.0;
    double r = 0.0;

    double hurst() const { return alpha - 0.5; }
    double rho_bar() const;

    /// Throws std::invalid_argument naming the first offending field.
    /// alpha = 1 (classical Heston) is admitted.
    void validate() const;
};

/// The parameter set used for the pricing tables.
ModelParams reference_params();
/// Steep-skew parameter set used for the smile experiments.
ModelParams skew_params();

/// Equidistant time grid t_i = i * dt, dt = T / n.
struct GridSpec {
    std::size_t n = 1;
    double T = 1.0;

    double dt() const { return T / static_cast<double>(n); }
    double time(std::size_t i) const { return T * static_cast<double>(i) / static_cast<double>(n); }
    void validate() const;
};

/// Dense row-major matrix of doubles. Rows are usually paths.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Raised for violated preconditions that depend on data rather than on
/// caller arguments (non-finite simulation state, diverging solvers).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rheston

namespace rheston {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double x);

}  // namespace rheston
