#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "abtest/aggregate.hpp"
#include "abtest/clt.hpp"
#include "abtest/model.hpp"

namespace abtest {

// A log line reduced to what the bootstrap loop needs. `user_hash` is the
// stable 64-bit key of the user id (rng::fnv1a).
struct LineView {
  std::uint64_t user_hash = 0;
  Group group = Group::Unassigned;
  double x = 0.0;
  double y = 0.0;
};

// M replicate estimates of one metric plus the replicate sample sizes n_m.
// Replicates with n_m = 0 or a zero denominator are kept in place but marked
// invalid and excluded from quantiles and variance.
struct BootstrapDistribution {
  std::vector<double> estimates;
  std::vector<std::uint64_t> replicate_sizes;
  std::vector<std::uint8_t> valid;
  MetricKind kind = MetricKind::SumDiff;
  std::uint64_t seed = 0;
  std::uint64_t n_users = 0;
  std::optional<double> plain_estimate;  // unweighted estimate over the data
  std::vector<std::string> flags;  // iota guards hit by the plain estimate

  int valid_count() const;
};

// Deterministic per-(seed, user, replicate) Poisson(1) weight. A user hit by
// many log lines receives one consistent weight per replicate.
std::uint64_t poisson_weight_hashed(std::uint64_t seed, std::uint64_t user_hash,
                                    int replicate);
std::uint64_t poisson_weight(std::uint64_t seed, std::string_view user_id,
                             int replicate);

using WeightFn = std::function<std::uint64_t(
    std::uint64_t seed, std::uint64_t user_hash, int replicate)>;

struct BootstrapOptions {
  int replicates = 10;
  std::uint64_t seed = 1;
  // Worker count for the replicate-partitioned accumulation; results are
  // bit-identical for any value. 0 picks the hardware concurrency.
  int threads = 1;
  // Test hook replacing the Poisson weights.
  WeightFn weight_override;
};

// One pass of per-replicate weighted tilde sums. The accumulators are metric
// independent; distributions for any kind derive from the same run.
struct BootstrapRun {
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<double> gamma;  // 4 rows, layout gamma[k * replicates + m]
  std::vector<std::uint64_t> replicate_sizes;
  std::uint64_t n_users = 0;
  std::array<double, 4> plain_sums{};  // unweighted tilde sums

  MeanVector plain_means() const;
  double plain_estimate(MetricKind kind) const;
  BootstrapDistribution distribution(MetricKind kind) const;
};

BootstrapRun run_online_bootstrap(std::span<const LineView> lines,
                                  const DesignParams& design,
                                  const BootstrapOptions& options);
BootstrapRun run_online_bootstrap(std::span<const ObservationLine> lines,
                                  const DesignParams& design,
                                  const BootstrapOptions& options);
BootstrapDistribution run_online_bootstrap(std::span<const ObservationLine> lines,
                                           const DesignParams& design,
                                           MetricKind kind, int replicates,
                                           std::uint64_t seed);

// Equal-tailed interval from the empirical quantiles of the valid replicate
// estimates; linear interpolation between order statistics.
CiReport quantile_ci(const BootstrapDistribution& dist, double level);

// Symmetric interval around `estimate` with the bootstrap standard deviation
// (divisor M_valid - 1) in place of the CLT variance. The bootstrap spread
// already carries the estimator's sampling scale; no extra 1/sqrt(n).
CiReport mixed_ci(double estimate, const BootstrapDistribution& dist,
                  double level);

}  // namespace abtest
