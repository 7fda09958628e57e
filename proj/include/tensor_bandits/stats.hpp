#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tb {

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("mean of an empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double stddev(const std::vector<double>& x) {
    const double m = mean(x);
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

/// Two-sample Welch t-test of mean(a) - mean(b), two-sided.
inline WelchResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t: need at least two values per sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = std::pow(stddev(a), 2) / na;
    const double vb = std::pow(stddev(b), 2) / nb;
    const double diff = mean(a) - mean(b);
    WelchResult r;
    if (va + vb == 0.0) {
        if (diff == 0.0) return r;
        r.t = std::copysign(std::numeric_limits<double>::infinity(), diff);
        r.df = na + nb - 2.0;
        r.p_value = 0.0;
        return r;
    }
    r.t = diff / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    const boost::math::students_t dist(r.df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    return r;
}

/// Percentage by which `candidate` lowers `baseline`'s mean.
inline double percent_reduction(double baseline, double candidate) {
    if (baseline == 0.0) return candidate == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return 100.0 * (baseline - candidate) / baseline;
}

}  // namespace tb
