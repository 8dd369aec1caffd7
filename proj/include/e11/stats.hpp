#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "e11/common.hpp"

namespace e11 {

// Regularized incomplete gamma P(a,x) and its complement Q(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a,b).
double beta_inc(double a, double b, double x);

// Upper tail of the chi-square distribution with k degrees of freedom.
double chi2_sf(double x, double k);

// Two-sided p-value for a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Quantile of the t distribution (bisection on the CDF).
double student_t_quantile(double p, double df);

double mean(std::span<const double> xs);
// Sample standard deviation (ddof = 1); 0 for fewer than two points.
double sample_sd(std::span<const double> xs);

double spearman_rho(std::span<const double> x, std::span<const double> y);

// Seeded standard-normal matrix, column-major fill order (fixed so results
// are a pure function of the seed).
MatrixD random_normal_matrix(Index rows, Index cols, std::mt19937_64& rng);

}  // namespace e11
