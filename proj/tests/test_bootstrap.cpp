#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "abtest/bootstrap.hpp"
#include "abtest/errors.hpp"
#include "abtest/rng.hpp"
#include "helpers.hpp"

using namespace abtest;

namespace {

BootstrapDistribution make_dist(std::vector<double> estimates,
                                MetricKind kind = MetricKind::SumDiff) {
  BootstrapDistribution d;
  d.estimates = std::move(estimates);
  d.replicate_sizes.assign(d.estimates.size(), 10);
  d.valid.assign(d.estimates.size(), 1);
  d.kind = kind;
  d.seed = 42;
  d.n_users = 10;
  return d;
}

std::vector<ObservationLine> multi_line_dataset(int users, int seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> value(0.0, 4.0);
  std::vector<ObservationLine> lines;
  for (int u = 0; u < users; ++u) {
    const Group group = u % 7 == 0 ? Group::Unassigned
                        : (u % 2 == 0 ? Group::A : Group::B);
    const int n_lines = 1 + u % 3;
    for (int l = 0; l < n_lines; ++l) {
      lines.push_back({"user" + std::to_string(u), group, value(rng),
                       1.0 + value(rng)});
    }
  }
  return lines;
}

}  // namespace

TEST_CASE("poisson weights are deterministic in (seed, user, replicate)") {
  CHECK(poisson_weight(42, "alice", 3) == poisson_weight(42, "alice", 3));
  CHECK(poisson_weight_hashed(1, rng::fnv1a("bob"), 0) ==
        poisson_weight(1, "bob", 0));
}

TEST_CASE("poisson weights follow the Poisson(1) law over users") {
  constexpr int kUsers = 1'000'000;
  const std::uint64_t seed = 42;
  long sum = 0;
  long zeros = 0;
  for (int i = 0; i < kUsers; ++i) {
    const auto w = poisson_weight(seed, "u" + std::to_string(i), 0);
    sum += static_cast<long>(w);
    zeros += (w == 0);
  }
  const double mean = static_cast<double>(sum) / kUsers;
  CHECK(mean >= 0.997);
  CHECK(mean <= 1.003);
  const double zero_fraction = static_cast<double>(zeros) / kUsers;
  CHECK(std::fabs(zero_fraction - 0.36787944117144233) < 0.002);
}

TEST_CASE("table-based sampler agrees with the series expansion") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100'000; ++i) {
    const std::uint64_t bits = rng();
    const double u = abtest::rng::to_unit(bits);
    double p = 0.36787944117144233;
    double cum = p;
    int k = 0;
    while (u > cum && k < 64) {
      ++k;
      p /= k;
      cum += p;
    }
    CHECK(abtest::rng::poisson1(bits) == k);
  }
}

TEST_CASE("algorithm-1 accumulators on the hand-traced example") {
  const std::vector<ObservationLine> lines = {{"u1", Group::A, 2, 4},
                                              {"u2", Group::B, 1, 2}};
  const std::uint64_t u1 = rng::fnv1a("u1");
  BootstrapOptions options;
  options.replicates = 1;
  options.seed = 9;
  options.weight_override = [u1](std::uint64_t, std::uint64_t hash, int) {
    return hash == u1 ? std::uint64_t{2} : std::uint64_t{0};
  };
  const BootstrapRun run = run_online_bootstrap(
      std::span<const ObservationLine>(lines), DesignParams{0.5, 0.5}, options);

  CHECK(run.n_users == 2);
  REQUIRE(run.replicate_sizes.size() == 1);
  CHECK(run.replicate_sizes[0] == 2);
  CHECK(run.gamma[0] == 8.0);   // 2 * (2 / 0.5)
  CHECK(run.gamma[1] == 16.0);  // 2 * (4 / 0.5)
  CHECK(run.gamma[2] == 0.0);
  CHECK(run.gamma[3] == 0.0);
  CHECK(run.gamma[0] / run.gamma[1] == 0.5);  // the A-side ratio

  // plain pass is untouched by the weights
  CHECK(run.plain_sums[0] == 4.0);
  CHECK(run.plain_sums[1] == 8.0);
  CHECK(run.plain_sums[2] == 2.0);
  CHECK(run.plain_sums[3] == 4.0);

  // with the B population wiped out the ratio-diff replicate is degenerate
  const BootstrapDistribution dist = run.distribution(MetricKind::RatioDiff);
  REQUIRE(dist.estimates.size() == 1);
  CHECK(dist.estimates[0] == doctest::Approx(-0.5));
  CHECK(dist.valid[0] == 0);
}

TEST_CASE("replicate count shapes the outputs") {
  const std::vector<ObservationLine> lines = {{"u1", Group::A, 2, 4},
                                              {"u2", Group::B, 1, 2}};
  const BootstrapDistribution dist = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::SumDiff, 3, 11);
  CHECK(dist.estimates.size() == 3);
  CHECK(dist.replicate_sizes.size() == 3);
  CHECK(dist.n_users == 2);

  BootstrapOptions bad;
  bad.replicates = 0;
  CHECK_THROWS_AS(run_online_bootstrap(std::span<const ObservationLine>(lines),
                                       DesignParams{0.5, 0.5}, bad),
                  InvalidReplicateCount);
}

TEST_CASE("unit weights reduce every replicate to the plain estimator") {
  const auto lines = multi_line_dataset(60, 3);
  BootstrapOptions options;
  options.replicates = 5;
  options.seed = 4;
  options.weight_override = [](std::uint64_t, std::uint64_t, int) {
    return std::uint64_t{1};
  };
  const BootstrapRun run = run_online_bootstrap(
      std::span<const ObservationLine>(lines), DesignParams{0.5, 0.5}, options);
  for (const MetricKind kind :
       {MetricKind::SumDiff, MetricKind::SumRatio, MetricKind::RatioDiff,
        MetricKind::RatioOfRatios}) {
    const BootstrapDistribution dist = run.distribution(kind);
    REQUIRE(dist.plain_estimate.has_value());
    for (std::size_t m = 0; m < dist.estimates.size(); ++m) {
      CHECK(dist.valid[m] == 1);
      CHECK(dist.estimates[m] == *dist.plain_estimate);
    }
  }
}

TEST_CASE("replicate estimates are line-order invariant") {
  auto lines = multi_line_dataset(80, 8);
  const BootstrapDistribution before = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::RatioDiff, 12, 77);
  std::mt19937 rng(99);
  std::shuffle(lines.begin(), lines.end(), rng);
  const BootstrapDistribution after = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::RatioDiff, 12, 77);
  REQUIRE(before.estimates.size() == after.estimates.size());
  for (std::size_t m = 0; m < before.estimates.size(); ++m) {
    CHECK(before.replicate_sizes[m] == after.replicate_sizes[m]);
    CHECK(testutil::close(before.estimates[m], after.estimates[m], 1e-9));
  }
}

TEST_CASE("different seeds give different weight fields") {
  const auto lines = multi_line_dataset(50, 5);
  const BootstrapDistribution one = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::SumDiff, 20, 1);
  const BootstrapDistribution two = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::SumDiff, 20, 2);
  CHECK(one.estimates != two.estimates);
}

TEST_CASE("replicate sizes equal the sum of per-user weights exactly") {
  const auto lines = multi_line_dataset(70, 6);
  const std::uint64_t seed = 13;
  const int replicates = 7;
  const BootstrapRun run =
      run_online_bootstrap(std::span<const ObservationLine>(lines),
                           DesignParams{0.5, 0.5},
                           BootstrapOptions{replicates, seed, 1, {}});

  std::set<std::string> distinct;
  for (const ObservationLine& line : lines) distinct.insert(line.user_id);
  REQUIRE(run.n_users == distinct.size());
  for (int m = 0; m < replicates; ++m) {
    std::uint64_t expected = 0;
    for (const std::string& id : distinct) {
      expected += poisson_weight(seed, id, m);
    }
    CHECK(run.replicate_sizes[m] == expected);
  }
}

TEST_CASE("ratio kinds are invariant to the replicate normalization") {
  const auto lines = multi_line_dataset(90, 14);
  const BootstrapRun run =
      run_online_bootstrap(std::span<const ObservationLine>(lines),
                           DesignParams{0.5, 0.5},
                           BootstrapOptions{9, 21, 1, {}});
  const int m_count = run.replicates;
  for (const MetricKind kind :
       {MetricKind::SumRatio, MetricKind::RatioOfRatios}) {
    const BootstrapDistribution dist = run.distribution(kind);
    for (int m = 0; m < m_count; ++m) {
      if (!dist.valid[m]) continue;
      const double c = 7.0;  // any positive constant in place of 1/n_m
      const MeanVector scaled = {
          run.gamma[0 * m_count + m] / c, run.gamma[1 * m_count + m] / c,
          run.gamma[2 * m_count + m] / c, run.gamma[3 * m_count + m] / c};
      CHECK(testutil::close(dist.estimates[m], evaluate_metric(kind, scaled),
                            1e-12));
    }
  }
}

TEST_CASE("replicate partitioning across threads is bit-identical") {
  const auto lines = multi_line_dataset(60, 15);
  BootstrapOptions one_thread{16, 33, 1, {}};
  BootstrapOptions four_threads{16, 33, 4, {}};
  const BootstrapRun a = run_online_bootstrap(
      std::span<const ObservationLine>(lines), DesignParams{0.5, 0.5},
      one_thread);
  const BootstrapRun b = run_online_bootstrap(
      std::span<const ObservationLine>(lines), DesignParams{0.5, 0.5},
      four_threads);
  CHECK(a.gamma == b.gamma);
  CHECK(a.replicate_sizes == b.replicate_sizes);
}

TEST_CASE("quantile interval by order-statistic interpolation") {
  const BootstrapDistribution dist = make_dist({1, 2, 3, 4, 5});
  const CiReport r = quantile_ci(dist, 0.6);
  CHECK(r.lo == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(r.hi == doctest::Approx(4.2).epsilon(1e-12));
  CHECK(r.estimate == 3.0);  // bootstrap median backstop
  CHECK(r.method == Method::BootstrapQuantile);
  CHECK(r.m_replicates == 5);

  const CiReport degenerate = quantile_ci(dist, 0.0);
  CHECK(degenerate.lo == 3.0);
  CHECK(degenerate.hi == 3.0);

  const BootstrapDistribution single = make_dist({2.5});
  const CiReport point = quantile_ci(single, 0.9);
  CHECK(point.lo == 2.5);
  CHECK(point.hi == 2.5);
}

TEST_CASE("quantile interval prefers the plain estimate when present") {
  BootstrapDistribution dist = make_dist({1, 2, 3, 4, 5});
  dist.plain_estimate = 2.9;
  CHECK(quantile_ci(dist, 0.6).estimate == 2.9);
}

TEST_CASE("quantile interval rejects empty distributions") {
  BootstrapDistribution dist = make_dist({1, 2, 3});
  dist.valid.assign(3, 0);
  CHECK_THROWS_AS(quantile_ci(dist, 0.9), EmptyDistribution);
}

TEST_CASE("invalid replicates are excluded and flagged") {
  BootstrapDistribution dist = make_dist({100, 1, 2, 3, 4, 5});
  dist.valid[0] = 0;  // the outlier never enters the quantiles
  const CiReport r = quantile_ci(dist, 0.6);
  CHECK(r.hi == doctest::Approx(4.2).epsilon(1e-12));
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0] == "invalid_replicates=1");
}

TEST_CASE("iota guards on the plain estimate reach the report") {
  // no A-side clicks anywhere: the plain sum-ratio runs through iota(0)
  const std::vector<ObservationLine> lines = {{"u1", Group::A, 0, 4},
                                              {"u2", Group::B, 1, 2}};
  const BootstrapDistribution dist = run_online_bootstrap(
      lines, DesignParams{0.5, 0.5}, MetricKind::SumRatio, 4, 5);
  REQUIRE(dist.plain_estimate.has_value());
  CHECK(*dist.plain_estimate == 1.0);  // mxb = (1 / 0.5) / 2 over iota(0)
  REQUIRE(dist.flags.size() == 1);
  CHECK(dist.flags[0] == "iota:mean_xa");
  // every replicate shares the zero denominator, so the quantile path refuses
  CHECK(dist.valid_count() == 0);
  CHECK_THROWS_AS(quantile_ci(dist, 0.9), EmptyDistribution);

  // distribution-level flags propagate into reports
  BootstrapDistribution tagged = make_dist({1, 2, 3});
  tagged.flags = {"iota:mean_ya"};
  const CiReport r = mixed_ci(2.0, tagged, 0.9);
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0] == "iota:mean_ya");
}

TEST_CASE("zero-weight replicates come back invalid") {
  const std::vector<ObservationLine> lines = {{"u1", Group::A, 2, 4},
                                              {"u2", Group::B, 1, 2}};
  BootstrapOptions options;
  options.replicates = 2;
  options.seed = 3;
  options.weight_override = [](std::uint64_t, std::uint64_t, int m) {
    return static_cast<std::uint64_t>(m);  // replicate 0 gets all zeros
  };
  const BootstrapDistribution dist =
      run_online_bootstrap(std::span<const ObservationLine>(lines),
                           DesignParams{0.5, 0.5}, options)
          .distribution(MetricKind::SumDiff);
  CHECK(dist.replicate_sizes[0] == 0);
  CHECK(dist.valid[0] == 0);
  CHECK(std::isnan(dist.estimates[0]));
  CHECK(dist.valid[1] == 1);
  CHECK(dist.valid_count() == 1);
}

TEST_CASE("mixed interval from the bootstrap spread") {
  BootstrapDistribution dist = make_dist({0.49, 0.50, 0.51});
  const CiReport r = mixed_ci(0.5, dist, 0.95);
  CHECK(r.estimate == 0.5);
  CHECK(r.lo == doctest::Approx(0.4804).epsilon(1e-4));
  CHECK(r.hi == doctest::Approx(0.5196).epsilon(1e-4));
  CHECK(r.method == Method::BootstrapClt);

  const CiReport wider = mixed_ci(0.5, dist, 0.99);
  CHECK(wider.lo < r.lo);
  CHECK(wider.hi > r.hi);

  const BootstrapDistribution flat = make_dist({0.7, 0.7, 0.7, 0.7});
  const CiReport point = mixed_ci(0.7, flat, 0.95);
  CHECK(point.lo == 0.7);
  CHECK(point.hi == 0.7);
}

TEST_CASE("mixed interval needs two valid replicates") {
  const BootstrapDistribution single = make_dist({1.0});
  CHECK_THROWS_AS(mixed_ci(1.0, single, 0.95), InsufficientReplicates);
  BootstrapDistribution dist = make_dist({1.0, 2.0, 3.0});
  dist.valid = {1, 0, 0};
  CHECK_THROWS_AS(mixed_ci(1.0, dist, 0.95), InsufficientReplicates);
}
