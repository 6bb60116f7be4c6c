#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abtest/aggregate.hpp"
#include "abtest/model.hpp"

namespace abtest {

enum class Method { Clt, BootstrapQuantile, BootstrapClt, NaiveDisplay };

std::string_view to_token(Method method);
Method method_from_token(std::string_view token);

struct CiReport {
  MetricKind kind = MetricKind::SumDiff;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  std::size_t n = 0;
  Method method = Method::Clt;
  std::optional<int> m_replicates;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> flags;
};

// Inverse of the standard normal CDF (rational approximation, absolute error
// well below 1e-9). Throws OutOfDomain for p outside (0, 1).
double inv_normal_cdf(double p);

// Asymptotic variance of sqrt(n) * (estimator - truth) for the given metric,
// with the summary's moment estimates plugged into the closed form. Throws
// DegenerateMeans when a mean appearing in a denominator is not positive.
double asymptotic_variance(MetricKind kind, const MomentSummary& summary);

// Symmetric interval: estimate -+ z((1+q)/2) * sqrt(asymptotic_variance / n).
CiReport clt_ci(MetricKind kind, const MomentSummary& summary, double level);

}  // namespace abtest
