#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "abtest/aggregate.hpp"
#include "abtest/bootstrap.hpp"
#include "abtest/clt.hpp"
#include "abtest/model.hpp"

namespace abtest {

// Synthetic per-user population: displays follow a shifted geometric law on
// {1, 2, ...} (mean displays_mean); clicks given displays are binomial with a
// per-user rate base_ctr * h, where h is a gamma multiplier of mean 1 and
// shape heterogeneity_shape. The multiplier couples clicks within a user and
// produces the overdispersion real click logs show; smaller shape means
// heavier tails.
struct SyntheticPopulationSpec {
  std::size_t n_users = 50'000;
  double displays_mean = 4.3;
  double base_ctr = 0.044;
  double heterogeneity_shape = 0.5;
};

std::vector<UserAggregate> generate_population(const SyntheticPopulationSpec& spec,
                                               std::uint64_t seed);

// Salted-hash split: population A with probability alpha_a, else B.
// Deterministic in (user_id, test_seed). Throws OutOfDomain unless
// 0 < alpha_a < 1.
Group blank_split(std::string_view user_id, std::uint64_t test_seed,
                  double alpha_a);
Group blank_split_hashed(std::uint64_t user_hash, std::uint64_t test_seed,
                         double alpha_a);

// Three-way variant used when alpha_a + alpha_b < 1; the leftover share is
// unassigned. Agrees with blank_split when alpha_a + alpha_b = 1.
Group assign_group(std::string_view user_id, std::uint64_t test_seed,
                   double alpha_a, double alpha_b);
Group assign_group_hashed(std::uint64_t user_hash, std::uint64_t test_seed,
                          double alpha_a, double alpha_b);

// Variance of the absolute CTR increment under the (wrong at user scale)
// assumption that individual displays are independent.
double naive_display_variance(double ctr_a, double displays_a, double ctr_b,
                              double displays_b);

struct CoverageResult {
  std::vector<double> levels;
  std::vector<double> observed;
  int num_tests = 0;
  Method method = Method::Clt;
};

struct CoverageConfig {
  MetricKind kind = MetricKind::RatioDiff;
  std::vector<double> levels = {0.5, 0.8, 0.9, 0.95, 0.99};
  int num_tests = 500;
  std::uint64_t seed = 1;
  int replicates = 10;  // bootstrap methods only
  double alpha_a = 0.5;
  int threads = 1;  // independent blank tests; any value gives the same result
};

// Runs num_tests blank splits over the population and scores, per level, the
// fraction of confidence intervals containing the known truth (0 for
// differences, 1 for ratios). Methods sharing a test reuse its split and, for
// the two bootstrap methods, one replicate set.
std::vector<CoverageResult> run_coverage(std::span<const UserAggregate> population,
                                         std::span<const Method> methods,
                                         const CoverageConfig& config);
CoverageResult run_coverage(std::span<const UserAggregate> population,
                            Method method, const CoverageConfig& config);
CoverageResult run_coverage(const SyntheticPopulationSpec& spec, Method method,
                            const CoverageConfig& config);

// Replicate totals of x over all users (no tilde scaling): the bootstrap
// picture of "total clicks" used to compare against the binomial model.
BootstrapDistribution bootstrap_totals(std::span<const UserAggregate> users,
                                       int replicates, std::uint64_t seed);

// (sample sd of the replicate totals, sqrt(n_displays * ctr * (1 - ctr))).
std::pair<double, double> empirical_vs_binomial_sd(
    const BootstrapDistribution& total_clicks, double n_displays, double ctr);

// Two-sided equal-tailed band of Binomial(num_tests, level) / num_tests at
// the given confidence; the pass criterion for observed coverage.
struct BinomialBand {
  double lo = 0.0;
  double hi = 1.0;
};
BinomialBand binomial_band(int num_tests, double level,
                           double band_confidence = 0.99);

}  // namespace abtest
