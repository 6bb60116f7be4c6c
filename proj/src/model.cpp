#include "abtest/model.hpp"

#include <string>

#include "abtest/errors.hpp"

namespace abtest {

void validate(const DesignParams& design) {
  const auto bad = [](double a) { return !(a > 0.0) || a > 1.0; };
  if (bad(design.alpha_a) || bad(design.alpha_b)) {
    throw OutOfDomain("population ratios must lie in (0, 1], got alpha_a=" +
                      std::to_string(design.alpha_a) +
                      " alpha_b=" + std::to_string(design.alpha_b));
  }
  // alpha = 1 is single-population mode: the other side is necessarily empty
  // and its ratio inert, so the disjointness constraint does not apply.
  if (design.alpha_a + design.alpha_b > 1.0 + 1e-12 && design.alpha_a != 1.0 &&
      design.alpha_b != 1.0) {
    throw OutOfDomain("alpha_a + alpha_b must not exceed 1");
  }
}

TildeVector tilde(Group group, double x_sum, double y_sum,
                  const DesignParams& design) {
  switch (group) {
    case Group::A:
      return {x_sum / design.alpha_a, y_sum / design.alpha_a, 0.0, 0.0};
    case Group::B:
      return {0.0, 0.0, x_sum / design.alpha_b, y_sum / design.alpha_b};
    case Group::Unassigned:
      break;
  }
  return {};
}

double evaluate_metric(MetricKind kind, const MeanVector& m) {
  switch (kind) {
    case MetricKind::SumDiff:
      return m.mxb - m.mxa;
    case MetricKind::SumRatio:
      return m.mxb / nonzero(m.mxa);
    case MetricKind::RatioDiff:
      return m.mxb / nonzero(m.myb) - m.mxa / nonzero(m.mya);
    case MetricKind::RatioOfRatios:
      return (m.mxb / nonzero(m.myb)) / nonzero(m.mxa / nonzero(m.mya));
  }
  return 0.0;
}

bool degenerate_denominator(MetricKind kind, const MeanVector& m) {
  switch (kind) {
    case MetricKind::SumDiff:
      return false;
    case MetricKind::SumRatio:
      return m.mxa == 0.0;
    case MetricKind::RatioDiff:
      return m.mya == 0.0 || m.myb == 0.0;
    case MetricKind::RatioOfRatios:
      return m.mya == 0.0 || m.myb == 0.0 || m.mxa / nonzero(m.mya) == 0.0;
  }
  return false;
}

void append_degenerate_flags(MetricKind kind, const MeanVector& m,
                             std::vector<std::string>& flags) {
  const bool ratio_kind =
      kind == MetricKind::RatioDiff || kind == MetricKind::RatioOfRatios;
  if (kind == MetricKind::SumRatio && m.mxa == 0.0)
    flags.push_back("iota:mean_xa");
  if (ratio_kind && m.mya == 0.0) flags.push_back("iota:mean_ya");
  if (ratio_kind && m.myb == 0.0) flags.push_back("iota:mean_yb");
  if (kind == MetricKind::RatioOfRatios && m.mxa / nonzero(m.mya) == 0.0)
    flags.push_back("iota:ratio_a");
}

std::string_view to_token(MetricKind kind) {
  switch (kind) {
    case MetricKind::SumDiff:
      return "sum-diff";
    case MetricKind::SumRatio:
      return "sum-ratio";
    case MetricKind::RatioDiff:
      return "ratio-diff";
    case MetricKind::RatioOfRatios:
      return "ratio-rel";
  }
  return "?";
}

std::string_view to_token(Group group) {
  switch (group) {
    case Group::A:
      return "A";
    case Group::B:
      return "B";
    case Group::Unassigned:
      return "-";
  }
  return "?";
}

MetricKind metric_kind_from_token(std::string_view token) {
  if (token == "sum-diff") return MetricKind::SumDiff;
  if (token == "sum-ratio") return MetricKind::SumRatio;
  if (token == "ratio-diff") return MetricKind::RatioDiff;
  if (token == "ratio-rel") return MetricKind::RatioOfRatios;
  throw OutOfDomain("unknown metric kind '" + std::string(token) +
                    "', expected one of sum-diff, sum-ratio, ratio-diff, "
                    "ratio-rel");
}

}  // namespace abtest
