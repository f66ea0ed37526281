#include "proofgrade/special_functions.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "proofgrade/error.hpp"

namespace proofgrade {
namespace {

void require_df(double df, const char* name) {
  if (!(df > 0.0) || !std::isfinite(df))
    throw Error(ErrorKind::Statistics, std::string(name) + " must be positive and finite");
}

}  // namespace

double chi_square_sf(double x, double df) {
  require_df(df, "chi-square degrees of freedom");
  if (std::isnan(x)) throw Error(ErrorKind::Statistics, "chi-square statistic is NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double student_t_two_sided(double t, double df) {
  require_df(df, "t degrees of freedom");
  if (std::isnan(t)) throw Error(ErrorKind::Statistics, "t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

double f_sf(double f, double df1, double df2) {
  require_df(df1, "F numerator degrees of freedom");
  require_df(df2, "F denominator degrees of freedom");
  if (std::isnan(f)) throw Error(ErrorKind::Statistics, "F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = df2 / (df2 + df1 * f);
  return boost::math::ibeta(df2 / 2.0, df1 / 2.0, x);
}

double normal_two_sided(double z) {
  if (std::isnan(z)) throw Error(ErrorKind::Statistics, "z statistic is NaN");
  return boost::math::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace proofgrade
