#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace abtest {

enum class Group : std::uint8_t { A, B, Unassigned };

// The four comparison functionals between populations A and B.
enum class MetricKind { SumDiff, SumRatio, RatioDiff, RatioOfRatios };

// Relative population sizes. The populations are disjoint; any leftover mass
// 1 - alpha_a - alpha_b is the unassigned share.
struct DesignParams {
  double alpha_a = 0.5;
  double alpha_b = 0.5;
};

// Throws OutOfDomain unless 0 < alpha <= 1 on both sides and
// alpha_a + alpha_b <= 1.
void validate(const DesignParams& design);

// Per-user metrics rescaled by the population ratio, zero on the components
// the user's population does not own. Observable for every user, which is
// what makes plain sums over all users valid estimators.
struct TildeVector {
  double xa = 0.0;
  double ya = 0.0;
  double xb = 0.0;
  double yb = 0.0;
};

struct MeanVector {
  double mxa = 0.0;
  double mya = 0.0;
  double mxb = 0.0;
  double myb = 0.0;
};

// Maps 0 to 1 and is the identity elsewhere; keeps ratio denominators usable.
inline double nonzero(double x) { return x == 0.0 ? 1.0 : x; }

TildeVector tilde(Group group, double x_sum, double y_sum,
                  const DesignParams& design);

// Evaluates the functional on a mean vector, guarding every denominator with
// nonzero(). Total: never divides by zero.
double evaluate_metric(MetricKind kind, const MeanVector& means);

// True when evaluate_metric(kind, means) routed a zero denominator through
// nonzero(); such values are legal but reported with a flag.
bool degenerate_denominator(MetricKind kind, const MeanVector& means);
void append_degenerate_flags(MetricKind kind, const MeanVector& means,
                             std::vector<std::string>& flags);

std::string_view to_token(MetricKind kind);
std::string_view to_token(Group group);
MetricKind metric_kind_from_token(std::string_view token);

}  // namespace abtest
