#include "abtest/clt.hpp"

#include <cmath>
#include <string>

#include "abtest/errors.hpp"

namespace abtest {

namespace {

void check_level(double level) {
  if (!(level >= 0.0) || level >= 1.0) {
    throw OutOfDomain("confidence level must lie in [0, 1), got " +
                      std::to_string(level));
  }
}

void require_positive_mean(const char* name, double value) {
  if (!(value > 0.0)) {
    throw DegenerateMeans(std::string(name) +
                          " must be positive for this metric's variance, got " +
                          std::to_string(value));
  }
}

// Variance of one population's ratio estimator (delta method):
// (mx/my)^2 [cv_x^2 + cv_y^2 - 2 corr cv_x cv_y].
double ratio_variance(double mean_x, double mean_y, double sd_x, double sd_y,
                      double corr) {
  const double cv_x = sd_x / mean_x;
  const double cv_y = sd_y / mean_y;
  const double r = mean_x / mean_y;
  return r * r * (cv_x * cv_x + cv_y * cv_y - 2.0 * corr * cv_x * cv_y);
}

void append_high_cv_flag(MetricKind kind, const MomentSummary& s,
                         std::vector<std::string>& flags) {
  const MeanVector& m = s.means;
  double worst = 0.0;
  switch (kind) {
    case MetricKind::SumDiff:
      return;
    case MetricKind::SumRatio:
      worst = std::max(s.sd_xa / m.mxa, s.sd_xb / m.mxb);
      break;
    case MetricKind::RatioDiff:
    case MetricKind::RatioOfRatios:
      worst = std::max(std::max(s.sd_xa / m.mxa, s.sd_ya / m.mya),
                       std::max(s.sd_xb / m.mxb, s.sd_yb / m.myb));
      break;
  }
  // The normal approximation of a ratio degrades when the denominator's
  // coefficient of variation is large; surface it instead of correcting.
  if (worst > 10.0) flags.push_back("high_cv");
}

}  // namespace

std::string_view to_token(Method method) {
  switch (method) {
    case Method::Clt:
      return "clt";
    case Method::BootstrapQuantile:
      return "bootstrap";
    case Method::BootstrapClt:
      return "bootstrap-clt";
    case Method::NaiveDisplay:
      return "naive-display";
  }
  return "?";
}

Method method_from_token(std::string_view token) {
  if (token == "clt") return Method::Clt;
  if (token == "bootstrap") return Method::BootstrapQuantile;
  if (token == "bootstrap-clt") return Method::BootstrapClt;
  if (token == "naive-display") return Method::NaiveDisplay;
  throw OutOfDomain("unknown method '" + std::string(token) +
                    "', expected one of clt, bootstrap, bootstrap-clt, "
                    "naive-display");
}

// Wichura's PPND16 rational approximation of the normal quantile.
double inv_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw OutOfDomain("normal quantile argument must lie in (0, 1), got " +
                      std::to_string(p));
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) *
                 r +
             4.5921953931549871457e4) *
                r +
            1.3731693765509461125e4) *
               r +
           1.9715909503065514427e3) *
              r +
          1.3314166789178437745e2) *
             r +
         3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) *
                 r +
             2.1213794301586595867e4) *
                r +
            5.3941960214247511077e3) *
               r +
           6.8718700749205790830e2) *
              r +
          4.2313330701600911252e1) *
             r +
         1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e0) *
                r +
            3.64784832476320460504e0) *
               r +
           5.76949722146069140550e0) *
              r +
          4.63033784615654529590e0) *
             r +
         1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e0) *
              r +
          2.05319162663775882187e0) *
             r +
         1.0);
    z = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e0) *
              r +
          5.46378491116411436990e0) *
             r +
         6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) *
                 r +
             7.86869131145613259100e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
    z = num / den;
  }
  return (q < 0.0) ? -z : z;
}

double asymptotic_variance(MetricKind kind, const MomentSummary& s) {
  const MeanVector& m = s.means;
  switch (kind) {
    case MetricKind::SumDiff:
      return s.sd_xa * s.sd_xa + s.sd_xb * s.sd_xb + 2.0 * m.mxa * m.mxb;
    case MetricKind::SumRatio: {
      require_positive_mean("mean_xa", m.mxa);
      require_positive_mean("mean_xb", m.mxb);
      const double cv_a = s.sd_xa / m.mxa;
      const double cv_b = s.sd_xb / m.mxb;
      const double ratio = m.mxb / m.mxa;
      return ratio * ratio * (cv_a * cv_a + cv_b * cv_b + 2.0);
    }
    case MetricKind::RatioDiff: {
      require_positive_mean("mean_xa", m.mxa);
      require_positive_mean("mean_ya", m.mya);
      require_positive_mean("mean_xb", m.mxb);
      require_positive_mean("mean_yb", m.myb);
      return ratio_variance(m.mxa, m.mya, s.sd_xa, s.sd_ya, s.corr_a) +
             ratio_variance(m.mxb, m.myb, s.sd_xb, s.sd_yb, s.corr_b);
    }
    case MetricKind::RatioOfRatios: {
      require_positive_mean("mean_xa", m.mxa);
      require_positive_mean("mean_ya", m.mya);
      require_positive_mean("mean_xb", m.mxb);
      require_positive_mean("mean_yb", m.myb);
      const double va = ratio_variance(m.mxa, m.mya, s.sd_xa, s.sd_ya, s.corr_a);
      const double vb = ratio_variance(m.mxb, m.myb, s.sd_xb, s.sd_yb, s.corr_b);
      const double r_a = m.mxa / m.mya;
      const double r_b = m.mxb / m.myb;
      const double rel = r_b / r_a;
      return rel * rel * (va / (r_a * r_a) + vb / (r_b * r_b));
    }
  }
  return 0.0;
}

CiReport clt_ci(MetricKind kind, const MomentSummary& s, double level) {
  check_level(level);
  if (s.n < 2) {
    throw InsufficientUsers("CLT interval needs at least 2 users, got " +
                            std::to_string(s.n));
  }
  const double variance = asymptotic_variance(kind, s);
  const double z = inv_normal_cdf(0.5 * (1.0 + level));
  // variance is for sqrt(n) times the estimation error, hence the /n
  const double half_width = z * std::sqrt(variance / static_cast<double>(s.n));
  CiReport report;
  report.kind = kind;
  report.estimate = evaluate_metric(kind, s.means);
  report.lo = report.estimate - half_width;
  report.hi = report.estimate + half_width;
  report.level = level;
  report.n = s.n;
  report.method = Method::Clt;
  report.flags = s.flags;
  append_high_cv_flag(kind, s, report.flags);
  return report;
}

}  // namespace abtest
