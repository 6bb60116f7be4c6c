#include "abtest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>

#include "abtest/errors.hpp"
#include "abtest/rng.hpp"

namespace abtest {

namespace {

constexpr std::uint64_t kStreamSplit = 0xab01;
constexpr std::uint64_t kStreamBootstrap = 0xab02;
constexpr std::uint64_t kStreamPopulation = 0xab03;
constexpr std::uint64_t kSplitCounter = 0x73706c69;  // split draws

void check_level(double level) {
  if (!(level >= 0.0) || level >= 1.0) {
    throw OutOfDomain("confidence level must lie in [0, 1), got " +
                      std::to_string(level));
  }
}

double split_unit(std::uint64_t user_hash, std::uint64_t test_seed) {
  return rng::to_unit(rng::keyed_bits(test_seed, user_hash, kSplitCounter));
}

int resolve_workers(int requested, int max_useful) {
  int workers = requested;
  if (workers == 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  return std::clamp(workers, 1, std::max(1, max_useful));
}

}  // namespace

std::vector<UserAggregate> generate_population(const SyntheticPopulationSpec& spec,
                                               std::uint64_t seed) {
  if (spec.n_users < 1) throw OutOfDomain("population needs at least 1 user");
  if (!(spec.displays_mean >= 1.0)) {
    throw OutOfDomain("displays_mean must be at least 1 (every user has at "
                      "least one display)");
  }
  if (!(spec.base_ctr >= 0.0) || spec.base_ctr > 1.0) {
    throw OutOfDomain("base_ctr must lie in [0, 1]");
  }
  if (spec.heterogeneity_shape < 0.0) {
    throw OutOfDomain("heterogeneity_shape must be non-negative");
  }
  std::mt19937_64 rng(rng::mix64(seed ^ kStreamPopulation));
  const bool extra_displays = spec.displays_mean > 1.0;
  std::geometric_distribution<int> geometric(
      extra_displays ? 1.0 / spec.displays_mean : 0.5);
  const bool heterogeneous = spec.heterogeneity_shape > 0.0;
  std::gamma_distribution<double> multiplier(
      heterogeneous ? spec.heterogeneity_shape : 1.0,
      heterogeneous ? 1.0 / spec.heterogeneity_shape : 1.0);

  std::vector<UserAggregate> users;
  users.reserve(spec.n_users);
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    const int displays = 1 + (extra_displays ? geometric(rng) : 0);
    const double rate =
        std::min(1.0, spec.base_ctr * (heterogeneous ? multiplier(rng) : 1.0));
    const int clicks = std::binomial_distribution<int>(displays, rate)(rng);
    users.push_back({"u" + std::to_string(i), Group::Unassigned,
                     static_cast<double>(clicks),
                     static_cast<double>(displays)});
  }
  return users;
}

Group blank_split_hashed(std::uint64_t user_hash, std::uint64_t test_seed,
                         double alpha_a) {
  if (!(alpha_a > 0.0) || !(alpha_a < 1.0)) {
    throw OutOfDomain("blank split needs 0 < alpha_a < 1, got " +
                      std::to_string(alpha_a));
  }
  return split_unit(user_hash, test_seed) < alpha_a ? Group::A : Group::B;
}

Group blank_split(std::string_view user_id, std::uint64_t test_seed,
                  double alpha_a) {
  return blank_split_hashed(rng::fnv1a(user_id), test_seed, alpha_a);
}

Group assign_group_hashed(std::uint64_t user_hash, std::uint64_t test_seed,
                          double alpha_a, double alpha_b) {
  validate(DesignParams{alpha_a, alpha_b});
  const double u = split_unit(user_hash, test_seed);
  if (u < alpha_a) return Group::A;
  if (u < alpha_a + alpha_b) return Group::B;
  return Group::Unassigned;
}

Group assign_group(std::string_view user_id, std::uint64_t test_seed,
                   double alpha_a, double alpha_b) {
  return assign_group_hashed(rng::fnv1a(user_id), test_seed, alpha_a, alpha_b);
}

double naive_display_variance(double ctr_a, double displays_a, double ctr_b,
                              double displays_b) {
  const auto bad_rate = [](double c) { return !(c >= 0.0) || c > 1.0; };
  if (bad_rate(ctr_a) || bad_rate(ctr_b)) {
    throw OutOfDomain("CTR must lie in [0, 1]");
  }
  if (!(displays_a > 0.0) || !(displays_b > 0.0)) {
    throw OutOfDomain("display counts must be positive");
  }
  return ctr_a * (1.0 - ctr_a) / displays_a +
         ctr_b * (1.0 - ctr_b) / displays_b;
}

std::vector<CoverageResult> run_coverage(std::span<const UserAggregate> population,
                                         std::span<const Method> methods,
                                         const CoverageConfig& cfg) {
  if (methods.empty()) throw OutOfDomain("no method to score");
  if (cfg.num_tests < 1) {
    throw OutOfDomain("num_tests must be at least 1, got " +
                      std::to_string(cfg.num_tests));
  }
  if (cfg.levels.empty()) throw OutOfDomain("no confidence level to score");
  for (double level : cfg.levels) check_level(level);
  if (!(cfg.alpha_a > 0.0) || !(cfg.alpha_a < 1.0)) {
    throw OutOfDomain("blank tests need 0 < alpha_a < 1");
  }
  if (population.size() < 2) {
    throw InsufficientUsers("coverage needs at least 2 users");
  }

  bool needs_clt = false;
  bool needs_naive = false;
  bool needs_quantile = false;
  bool needs_mixed = false;
  for (Method method : methods) {
    switch (method) {
      case Method::Clt:
        needs_clt = true;
        break;
      case Method::NaiveDisplay:
        if (cfg.kind != MetricKind::RatioDiff) {
          throw UnsupportedCombination(
              "the display-independence baseline only models the absolute "
              "CTR increment (ratio-diff)");
        }
        needs_naive = true;
        break;
      case Method::BootstrapQuantile:
        needs_quantile = true;
        break;
      case Method::BootstrapClt:
        needs_mixed = true;
        break;
    }
  }
  const bool needs_bootstrap = needs_quantile || needs_mixed;

  const std::size_t n = population.size();
  std::vector<std::uint64_t> hash(n);
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    hash[i] = rng::fnv1a(population[i].user_id);
    xs[i] = population[i].x_sum;
    ys[i] = population[i].y_sum;
  }

  const DesignParams design{cfg.alpha_a, 1.0 - cfg.alpha_a};
  const double truth = (cfg.kind == MetricKind::SumRatio ||
                        cfg.kind == MetricKind::RatioOfRatios)
                           ? 1.0
                           : 0.0;
  const std::size_t level_count = cfg.levels.size();
  const std::size_t slots_per_test = methods.size() * level_count;
  std::vector<std::uint8_t> hits(
      static_cast<std::size_t>(cfg.num_tests) * slots_per_test, 0);

  auto run_test = [&](int t, std::vector<LineView>& scratch) {
    const std::uint64_t salt = rng::derive_stream(cfg.seed, kStreamSplit,
                                                  static_cast<std::uint64_t>(t));
    MomentAccumulator acc;
    double clicks_a = 0.0, displays_a = 0.0;
    double clicks_b = 0.0, displays_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Group side =
          split_unit(hash[i], salt) < cfg.alpha_a ? Group::A : Group::B;
      if (needs_clt) acc.add(tilde(side, xs[i], ys[i], design));
      if (needs_naive) {
        if (side == Group::A) {
          clicks_a += xs[i];
          displays_a += ys[i];
        } else {
          clicks_b += xs[i];
          displays_b += ys[i];
        }
      }
      if (needs_bootstrap) scratch[i] = {hash[i], side, xs[i], ys[i]};
    }

    std::uint8_t* const slot =
        hits.data() + static_cast<std::size_t>(t) * slots_per_test;
    const auto record = [&](std::size_t method_index, std::size_t level_index,
                            double lo, double hi) {
      slot[method_index * level_count + level_index] =
          (lo <= truth && truth <= hi) ? 1 : 0;
    };

    MomentSummary summary;
    if (needs_clt) summary = acc.summary();
    double naive_estimate = 0.0;
    double naive_sd = 0.0;
    if (needs_naive) {
      const double ctr_a = clicks_a / displays_a;
      const double ctr_b = clicks_b / displays_b;
      naive_estimate = ctr_b - ctr_a;
      naive_sd = std::sqrt(
          naive_display_variance(ctr_a, displays_a, ctr_b, displays_b));
    }
    BootstrapDistribution dist;
    if (needs_bootstrap) {
      BootstrapOptions options;
      options.replicates = cfg.replicates;
      options.seed = rng::derive_stream(cfg.seed, kStreamBootstrap,
                                        static_cast<std::uint64_t>(t));
      options.threads = 1;
      dist = run_online_bootstrap(std::span<const LineView>(scratch), design,
                                  options)
                 .distribution(cfg.kind);
    }

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t li = 0; li < level_count; ++li) {
        const double level = cfg.levels[li];
        switch (methods[mi]) {
          case Method::Clt: {
            const CiReport r = clt_ci(cfg.kind, summary, level);
            record(mi, li, r.lo, r.hi);
            break;
          }
          case Method::NaiveDisplay: {
            const double half = inv_normal_cdf(0.5 * (1.0 + level)) * naive_sd;
            record(mi, li, naive_estimate - half, naive_estimate + half);
            break;
          }
          case Method::BootstrapQuantile: {
            const CiReport r = quantile_ci(dist, level);
            record(mi, li, r.lo, r.hi);
            break;
          }
          case Method::BootstrapClt: {
            const CiReport r = mixed_ci(*dist.plain_estimate, dist, level);
            record(mi, li, r.lo, r.hi);
            break;
          }
        }
      }
    }
  };

  const int workers = resolve_workers(cfg.threads, cfg.num_tests);
  if (workers == 1) {
    std::vector<LineView> scratch(needs_bootstrap ? n : 0);
    for (int t = 0; t < cfg.num_tests; ++t) run_test(t, scratch);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        std::vector<LineView> scratch(needs_bootstrap ? n : 0);
        while (true) {
          const int t = next.fetch_add(1, std::memory_order_relaxed);
          if (t >= cfg.num_tests) break;
          run_test(t, scratch);
        }
      });
    }
    for (std::thread& thread : pool) thread.join();
  }

  // Integer reduction in fixed order: identical for any worker count.
  std::vector<CoverageResult> results(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<long> counts(level_count, 0);
    for (int t = 0; t < cfg.num_tests; ++t) {
      const std::uint8_t* slot =
          hits.data() + static_cast<std::size_t>(t) * slots_per_test;
      for (std::size_t li = 0; li < level_count; ++li) {
        counts[li] += slot[mi * level_count + li];
      }
    }
    CoverageResult& result = results[mi];
    result.levels = cfg.levels;
    result.num_tests = cfg.num_tests;
    result.method = methods[mi];
    result.observed.resize(level_count);
    for (std::size_t li = 0; li < level_count; ++li) {
      result.observed[li] = static_cast<double>(counts[li]) /
                            static_cast<double>(cfg.num_tests);
    }
  }
  return results;
}

CoverageResult run_coverage(std::span<const UserAggregate> population,
                            Method method, const CoverageConfig& config) {
  const Method methods[] = {method};
  return run_coverage(population, std::span<const Method>(methods, 1),
                      config)[0];
}

CoverageResult run_coverage(const SyntheticPopulationSpec& spec, Method method,
                            const CoverageConfig& config) {
  const std::vector<UserAggregate> population = generate_population(
      spec, rng::derive_stream(config.seed, kStreamPopulation, 0));
  return run_coverage(population, method, config);
}

BootstrapDistribution bootstrap_totals(std::span<const UserAggregate> users,
                                       int replicates, std::uint64_t seed) {
  if (replicates < 1) {
    throw InvalidReplicateCount("replicate count must be at least 1, got " +
                                std::to_string(replicates));
  }
  BootstrapDistribution dist;
  dist.kind = MetricKind::SumDiff;  // replicate totals are sum-family values
  dist.seed = seed;
  dist.estimates.assign(replicates, 0.0);
  dist.replicate_sizes.assign(replicates, 0);
  dist.valid.assign(replicates, 1);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(users.size());
  const std::uint64_t seed_mixed = rng::mix64(seed);
  double total = 0.0;
  for (const UserAggregate& user : users) {
    const std::uint64_t h = rng::fnv1a(user.user_id);
    const bool first = seen.insert(h).second;
    const std::uint64_t inner = rng::mix64(seed_mixed ^ h);
    total += user.x_sum;
    for (int m = 0; m < replicates; ++m) {
      const auto w = static_cast<std::uint64_t>(rng::poisson1(
          rng::mix64(inner + static_cast<std::uint64_t>(m) * rng::kGolden)));
      if (first) dist.replicate_sizes[m] += w;
      dist.estimates[m] += static_cast<double>(w) * user.x_sum;
    }
  }
  dist.n_users = seen.size();
  dist.plain_estimate = total;
  return dist;
}

std::pair<double, double> empirical_vs_binomial_sd(
    const BootstrapDistribution& total_clicks, double n_displays, double ctr) {
  if (!(n_displays > 0.0)) {
    throw OutOfDomain("display count must be positive");
  }
  if (!(ctr >= 0.0) || ctr > 1.0) throw OutOfDomain("CTR must lie in [0, 1]");
  std::vector<double> values;
  values.reserve(total_clicks.estimates.size());
  for (std::size_t m = 0; m < total_clicks.estimates.size(); ++m) {
    if (total_clicks.valid[m]) values.push_back(total_clicks.estimates[m]);
  }
  if (values.size() < 2) {
    throw InsufficientReplicates(
        "empirical sd needs at least 2 valid replicates");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double empirical =
      std::sqrt(ss / static_cast<double>(values.size() - 1));
  const double binomial = std::sqrt(n_displays * ctr * (1.0 - ctr));
  return {empirical, binomial};
}

BinomialBand binomial_band(int num_tests, double level,
                           double band_confidence) {
  if (num_tests < 1) throw OutOfDomain("num_tests must be at least 1");
  if (!(level >= 0.0) || level > 1.0) {
    throw OutOfDomain("level must lie in [0, 1]");
  }
  if (!(band_confidence > 0.0) || !(band_confidence < 1.0)) {
    throw OutOfDomain("band confidence must lie in (0, 1)");
  }
  const double tail = 0.5 * (1.0 - band_confidence);
  const double n = num_tests;
  double cdf = 0.0;
  int lo = -1;
  int hi = -1;
  for (int k = 0; k <= num_tests; ++k) {
    double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                     std::lgamma(n - k + 1.0);
    if (k > 0) log_pmf += k * std::log(level);
    if (k < num_tests) log_pmf += (n - k) * std::log1p(-level);
    cdf += std::exp(log_pmf);
    if (lo < 0 && cdf >= tail) lo = k;
    if (hi < 0 && cdf >= 1.0 - tail) {
      hi = k;
      break;
    }
  }
  if (lo < 0) lo = num_tests;
  if (hi < 0) hi = num_tests;
  return {static_cast<double>(lo) / n, static_cast<double>(hi) / n};
}

}  // namespace abtest
