#pragma once

#include <stdexcept>
#include <string>

namespace rheston {

/// Black-Scholes call value. vol = 0 gives the discounted intrinsic value.
double bs_price(double spot, double strike, double T, double vol, double r);

/// dC/dvol.
double bs_vega(double spot, double strike, double T, double vol, double r);

/// Raised when a price lies outside the open no-arbitrage interval.
class PriceOutOfBounds : public std::domain_error {
public:
    enum class Bound { lower, upper };
    PriceOutOfBounds(Bound b, const std::string& what) : std::domain_error(what), bound_(b) {}
    Bound bound() const { return bound_; }

private:
    Bound bound_;
};

/// Volatility reproducing `price`: bisection until the bracket is narrower
/// than 1e-4, then Newton steps kept inside the bracket, at most 100
/// iterations in total.
double implied_vol(double price, double spot, double strike, double T, double r);

struct SmilePoint {
    double log_moneyness = 0.0;
    double maturity = 0.0;
    double price = 0.0;
    /// NaN when the price is outside the no-arbitrage interval.
    double vol = 0.0;
};

}  // namespace rheston
