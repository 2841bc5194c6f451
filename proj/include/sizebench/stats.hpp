#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sizebench::stats {

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

double mean(std::span<const double> x);

// Standard deviation; ddof = 1 gives the unbiased sample estimator,
// ddof = 0 the population estimator.
double stdev(std::span<const double> x, int ddof = 1);

double covariance(std::span<const double> x, std::span<const double> y, int ddof = 1);

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

double normal_cdf(double x);
double normal_pdf(double x);

// Inverse standard normal CDF, accurate to ~1e-14 (rational approximation
// refined by one Halley step).
double normal_quantile(double p);

// ---------------------------------------------------------------------------
// Gamma / chi-square / Student-t
// ---------------------------------------------------------------------------

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Chi-square survival function P(X > x) with k degrees of freedom.
double chi2_sf(double x, double k);

// Regularized incomplete beta I_x(a, b).
double incbeta(double a, double b, double x);

// Student-t CDF and quantile (df > 0).
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

// One-sample KS statistic D_n = sup_x |F_n(x) - F(x)| against the given
// reference CDF. The sample is copied and sorted internally.
double ks_statistic(std::span<const double> sample,
                    const std::function<double(double)>& reference_cdf);

// Asymptotic p-value P(D_n > d) from the Kolmogorov series
// 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 n d^2), truncated when a term
// drops below 1e-10, clamped to [0, 1].
double kolmogorov_pvalue(double d, std::size_t n);

// Empirical quantile with linear interpolation between order statistics
// (the type-7 convention: h = (n-1)p). Copies and sorts the input.
double quantile_type7(std::span<const double> values, double p);

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

// Ranks with ties assigned the average rank (1-based).
std::vector<double> average_ranks(std::span<const double> x);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation; ties broken by average rank.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace sizebench::stats
