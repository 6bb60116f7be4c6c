#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "abtest/model.hpp"

namespace abtest {

// One raw log event. The stream may carry many lines per user, in any order.
struct ObservationLine {
  std::string user_id;
  Group group = Group::Unassigned;
  double x = 0.0;  // numerator metric increment (e.g. clicks)
  double y = 0.0;  // denominator metric increment (e.g. displays)
};

// Component-wise sums of one user's lines.
struct UserAggregate {
  std::string user_id;
  Group group = Group::Unassigned;
  double x_sum = 0.0;
  double y_sum = 0.0;
};

// Moment estimates of the tilde variables over n users: means, standard
// deviations (divisor n-1) and the within-population correlations.
struct MomentSummary {
  std::size_t n = 0;
  MeanVector means;
  double sd_xa = 0.0;
  double sd_ya = 0.0;
  double sd_xb = 0.0;
  double sd_yb = 0.0;
  double corr_a = 0.0;
  double corr_b = 0.0;
  std::vector<std::string> flags;  // degenerate-condition markers
};

// Groups lines by user and sums component-wise. Throws ConflictingGroup when
// one user carries two different populations, NegativeMetric on x or y < 0.
std::vector<UserAggregate> ingest(std::span<const ObservationLine> lines);

inline TildeVector tilde(const UserAggregate& user, const DesignParams& design) {
  return tilde(user.group, user.x_sum, user.y_sum, design);
}

// Single-pass mean/M2/co-moment accumulator over tilde vectors (Welford
// updates, pairwise merge). Shards accumulate independently and merge; the
// merged result matches a single pass to 1e-12 relative.
class MomentAccumulator {
 public:
  void add(const TildeVector& v);
  void merge(const MomentAccumulator& other);
  std::size_t count() const { return n_; }
  // Throws InsufficientUsers when fewer than 2 users were added.
  MomentSummary summary() const;

 private:
  std::size_t n_ = 0;
  std::array<double, 4> mean_{};
  std::array<double, 4> m2_{};
  double comoment_a_ = 0.0;  // (xa, ya)
  double comoment_b_ = 0.0;  // (xb, yb)
};

MomentSummary summarize(std::span<const UserAggregate> aggregates,
                        const DesignParams& design);

}  // namespace abtest
