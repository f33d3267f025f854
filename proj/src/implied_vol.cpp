#include "rheston/implied_vol.hpp"

#include <algorithm>
#include <cmath>

#include "rheston/common.hpp"
#include "rheston/special.hpp"

namespace rheston {

double bs_price(double spot, double strike, double T, double vol, double r) {
    const double disc_strike = strike * std::exp(-r * T);
    if (vol <= 0.0) return std::max(spot - disc_strike, 0.0);
    if (std::isinf(vol)) return spot;
    const double sd = vol * std::sqrt(T);
    const double d1 = (std::log(spot / disc_strike)) / sd + 0.5 * sd;
    const double d2 = d1 - sd;
    return spot * normal_cdf(d1) - disc_strike * normal_cdf(d2);
}

double bs_vega(double spot, double strike, double T, double vol, double r) {
    if (vol <= 0.0) return 0.0;
    const double sd = vol * std::sqrt(T);
    const double d1 = std::log(spot / (strike * std::exp(-r * T))) / sd + 0.5 * sd;
    return spot * normal_pdf(d1) * std::sqrt(T);
}

double implied_vol(double price, double spot, double strike, double T, double r) {
    if (!(spot > 0.0) || !(strike > 0.0) || !(T > 0.0)) {
        throw std::invalid_argument("implied_vol: spot, strike and T must be positive");
    }
    const double lower = std::max(spot - strike * std::exp(-r * T), 0.0);
    if (!(price > lower)) {
        throw PriceOutOfBounds(PriceOutOfBounds::Bound::lower,
                               "implied_vol: price " + format_double(price) +
                                   " is not above the intrinsic lower bound " + format_double(lower));
    }
    if (!(price < spot)) {
        throw PriceOutOfBounds(PriceOutOfBounds::Bound::upper, "implied_vol: price " + format_double(price) +
                                                                   " is not below the spot upper bound " +
                                                                   format_double(spot));
    }
    double lo = 0.0;
    double hi = 1.0;
    int iter = 0;
    while (bs_price(spot, strike, T, hi, r) < price && hi < 1e6) {
        lo = hi;
        hi *= 2.0;
    }
    constexpr int kMaxIter = 100;
    while (hi - lo > 1e-4 && iter < kMaxIter) {
        const double mid = 0.5 * (lo + hi);
        (bs_price(spot, strike, T, mid, r) < price ? lo : hi) = mid;
        ++iter;
    }
    double vol = 0.5 * (lo + hi);
    for (; iter < kMaxIter; ++iter) {
        const double diff = bs_price(spot, strike, T, vol, r) - price;
        if (diff == 0.0) break;
        (diff < 0.0 ? lo : hi) = vol;
        const double vega = bs_vega(spot, strike, T, vol, r);
        double next = vega > 0.0 ? vol - diff / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - vol) <= 1e-15 * std::max(1.0, vol)) {
            vol = next;
            break;
        }
        vol = next;
    }
    return vol;
}

}  // namespace rheston
