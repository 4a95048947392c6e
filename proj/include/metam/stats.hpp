#pragma once

#include <cstddef>

namespace metam {

double log_gamma(double x);

// regularized incomplete beta I_x(a, b)
double incomplete_beta(double a, double b, double x);

// regularized upper incomplete gamma Q(a, x)
double upper_incomplete_gamma(double a, double x);

// two-sided p-value of a Student-t statistic with df degrees of freedom
double t_test_p_value(double t, double df);

// upper-tail p-value of a chi-square statistic with df degrees of freedom
double chi_square_p_value(double x, double df);

// two-sided p-value for a Pearson correlation computed from n pairs
double pearson_p_value(double r, std::size_t n);

}  // namespace metam
