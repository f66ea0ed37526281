#pragma once

namespace proofgrade {

/// Upper tail P(X > x) of the chi-square distribution with `df` degrees of
/// freedom, i.e. the regularized upper incomplete gamma Q(df/2, x/2).
double chi_square_sf(double x, double df);

/// Two-sided p-value of Student's t: P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided(double t, double df);

/// Upper tail of the F distribution: I_{d2/(d2+d1 F)}(d2/2, d1/2).
double f_sf(double f, double df1, double df2);

/// Two-sided standard normal p-value P(|Z| > |z|).
double normal_two_sided(double z);

}  // namespace proofgrade
