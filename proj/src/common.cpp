#include "rheston/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace rheston {
namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double ModelParams::rho_bar() const { return std::sqrt(std::max(0.0, 1.0 - rho * rho)); }

void ModelParams::validate() const {
    require(std::isfinite(alpha) && alpha > 0.5 && alpha <= 1.0, "alpha must lie in (1/2, 1]");
    require(std::isfinite(rho) && rho >= -1.0 && rho <= 0.0, "rho must lie in [-1, 0]");
    require(std::isfinite(kappa) && kappa >= 0.0, "kappa must be non-negative");
    require(std::isfinite(nu) && nu >= 0.0, "nu must be non-negative");
    require(std::isfinite(theta) && theta >= 0.0, "theta must be non-negative");
    require(std::isfinite(v0) && v0 >= 0.0, "v0 must be non-negative");
    require(std::isfinite(s0) && s0 > 0.0, "s0 must be positive");
    require(std::isfinite(r), "r must be finite");
}

ModelParams reference_params() { return ModelParams{}; }

ModelParams skew_params() {
    ModelParams p;
    p.nu = 0.9;
    p.rho = -0.8;
    return p;
}

void GridSpec::validate() const {
    require(n >= 1, "grid needs at least one step");
    require(std::isfinite(T) && T > 0.0, "maturity must be positive");
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace rheston
