#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace bri2d::stats
{
//! Two-sided standard normal quantile for a confidence level
inline double z_value(double confidence)
{
    boost::math::normal_distribution<> n;
    return boost::math::quantile(n, 0.5 + 0.5 * confidence);
}

struct Summary
{
    std::size_t n{0};
    double mean{0};
    double variance{0};  //!< unbiased
    double std_error() const
    {
        return n > 0 ? std::sqrt(variance / static_cast<double>(n)) : 0.0;
    }
};

inline Summary summarize(std::vector<double> const& x)
{
    Summary s;
    double m2 = 0;
    for (double v : x)
    {
        ++s.n;
        double d = v - s.mean;
        s.mean += d / static_cast<double>(s.n);
        m2 += d * (v - s.mean);
    }
    s.variance = s.n > 1 ? m2 / static_cast<double>(s.n - 1) : 0.0;
    return s;
}

struct Interval
{
    double low;
    double high;
};

//! Wilson score interval for k successes out of n
inline Interval wilson(std::size_t k, std::size_t n, double confidence = 0.99)
{
    if (n == 0)
    {
        return {0, 1};
    }
    double z = z_value(confidence);
    double nn = static_cast<double>(n);
    double p = static_cast<double>(k) / nn;
    double denom = 1 + z * z / nn;
    double center = (p + z * z / (2 * nn)) / denom;
    double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn))
                  / denom;
    return {std::max(0.0, std::min(p, center - half)),
            std::min(1.0, std::max(p, center + half))};
}

inline Interval normal_interval(double mean, double se, double confidence = 0.99)
{
    double z = z_value(confidence);
    return {mean - z * se, mean + z * se};
}

//! Standard error of a proportion
inline double proportion_se(std::size_t k, std::size_t n)
{
    if (n == 0)
    {
        return 0;
    }
    double p = static_cast<double>(k) / static_cast<double>(n);
    return std::sqrt(p * (1 - p) / static_cast<double>(n));
}

//---------------------------------------------------------------------------//
// KOLMOGOROV-SMIRNOV
//---------------------------------------------------------------------------//
inline double ks_statistic(std::vector<double> x,
                           std::function<double(double)> const& cdf)
{
    std::sort(x.begin(), x.end());
    double n = static_cast<double>(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double f = cdf(x[i]);
        d = std::max({d, (static_cast<double>(i) + 1) / n - f,
                      f - static_cast<double>(i) / n});
    }
    return d;
}

//! Survival function of the Kolmogorov distribution
inline double kolmogorov_q(double lambda)
{
    if (lambda < 0.2)
    {
        return 1.0;
    }
    double sum = 0;
    for (int k = 1; k < 200; ++k)
    {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18)
        {
            break;
        }
    }
    return std::clamp(sum, 0.0, 1.0);
}

//! Asymptotic p-value with the Stephens small-sample correction
inline double ks_pvalue(double d, std::size_t n)
{
    double sn = std::sqrt(static_cast<double>(n));
    return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

struct TestResult
{
    double statistic{0};
    double dof{0};
    double p_value{1};
};

inline TestResult ks_test(std::vector<double> const& x,
                          std::function<double(double)> const& cdf)
{
    double d = ks_statistic(x, cdf);
    return {d, 0, ks_pvalue(d, x.size())};
}

inline TestResult ks_exponential(std::vector<double> const& x)
{
    return ks_test(x, [](double s) { return s <= 0 ? 0.0 : -std::expm1(-s); });
}

//---------------------------------------------------------------------------//
// CHI-SQUARE
//---------------------------------------------------------------------------//
inline double chi_square_sf(double stat, double dof)
{
    if (dof <= 0)
    {
        return 1.0;
    }
    boost::math::chi_squared_distribution<> chi(dof);
    return boost::math::cdf(boost::math::complement(chi, stat));
}

//! Goodness of fit of counts to given cell probabilities
inline TestResult chi_square_gof(std::vector<std::size_t> const& counts,
                                 std::vector<double> const& probs)
{
    if (counts.size() != probs.size() || counts.size() < 2)
    {
        throw std::invalid_argument("chi_square_gof: mismatched cells");
    }
    double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    double stat = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
    {
        double e = n * probs[i];
        double d = static_cast<double>(counts[i]) - e;
        stat += d * d / e;
    }
    double dof = static_cast<double>(counts.size() - 1);
    return {stat, dof, chi_square_sf(stat, dof)};
}

inline TestResult chi_square_uniform(std::vector<std::size_t> const& counts)
{
    std::vector<double> p(counts.size(), 1.0 / static_cast<double>(counts.size()));
    return chi_square_gof(counts, p);
}

/*!
 * Homogeneity test of two samples of nonnegative integers.
 *
 * Values are binned 0, 1, 2, ... and the upper tail is pooled until every
 * bin has pooled count at least 10.
 */
inline TestResult chi_square_two_sample(std::vector<std::size_t> const& a,
                                        std::vector<std::size_t> const& b)
{
    std::size_t top = 0;
    for (auto v : a)
    {
        top = std::max(top, v);
    }
    for (auto v : b)
    {
        top = std::max(top, v);
    }
    std::vector<double> ca(top + 1, 0), cb(top + 1, 0);
    for (auto v : a)
    {
        ca[v] += 1;
    }
    for (auto v : b)
    {
        cb[v] += 1;
    }
    // Pool from the top until each bin is well populated
    std::vector<double> pa, pb;
    double acc_a = 0, acc_b = 0;
    for (std::size_t i = top + 1; i-- > 0;)
    {
        acc_a += ca[i];
        acc_b += cb[i];
        if (acc_a + acc_b >= 10 || i == 0)
        {
            pa.push_back(acc_a);
            pb.push_back(acc_b);
            acc_a = acc_b = 0;
        }
    }
    if (pa.size() > 1 && pa.back() + pb.back() < 10)
    {
        pa[pa.size() - 2] += pa.back();
        pb[pb.size() - 2] += pb.back();
        pa.pop_back();
        pb.pop_back();
    }
    if (pa.size() < 2)
    {
        return {0, 0, 1};
    }
    double na = std::accumulate(pa.begin(), pa.end(), 0.0);
    double nb = std::accumulate(pb.begin(), pb.end(), 0.0);
    double n = na + nb;
    double stat = 0;
    for (std::size_t i = 0; i < pa.size(); ++i)
    {
        double col = pa[i] + pb[i];
        double ea = na * col / n;
        double eb = nb * col / n;
        stat += (pa[i] - ea) * (pa[i] - ea) / ea + (pb[i] - eb) * (pb[i] - eb) / eb;
    }
    double dof = static_cast<double>(pa.size() - 1);
    return {stat, dof, chi_square_sf(stat, dof)};
}

inline double bonferroni(double p, std::size_t m)
{
    return std::min(1.0, p * static_cast<double>(m));
}

//! Sample covariance and its standard error
struct Covariance
{
    double value{0};
    double std_error{0};
};

inline Covariance covariance(std::vector<double> const& x,
                             std::vector<double> const& y)
{
    if (x.size() != y.size() || x.size() < 2)
    {
        throw std::invalid_argument("covariance: need paired samples");
    }
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    std::vector<double> prod(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        prod[i] = (x[i] - mx) * (y[i] - my);
    }
    auto s = summarize(prod);
    return {s.mean * n / (n - 1), s.std_error()};
}

//! Least-squares slope and intercept of y on x
struct LineFit
{
    double slope{0};
    double intercept{0};
};

inline LineFit fit_line(std::vector<double> const& x, std::vector<double> const& y)
{
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

}  // namespace bri2d::stats
