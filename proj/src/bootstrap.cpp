#include "abtest/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <unordered_set>

#include "abtest/errors.hpp"
#include "abtest/rng.hpp"

namespace abtest {

namespace {

constexpr int kSideA = 0;
constexpr int kSideB = 1;
constexpr int kSideNone = 2;

// Line stream flattened for the replicate loop: tilde contributions plus a
// first-occurrence marker per line, so the weighted pass needs no registry.
struct PreparedLines {
  std::vector<std::uint64_t> hash;
  std::vector<std::uint8_t> side;
  std::vector<double> tx;
  std::vector<double> ty;
  std::vector<std::uint8_t> first;
  std::uint64_t n_users = 0;
  std::array<double, 4> plain_sums{};
};

template <typename Line>
PreparedLines prepare(std::span<const Line> lines, const DesignParams& design) {
  PreparedLines p;
  const std::size_t count = lines.size();
  p.hash.reserve(count);
  p.side.reserve(count);
  p.tx.reserve(count);
  p.ty.reserve(count);
  p.first.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count);
  for (const Line& line : lines) {
    if (line.x < 0.0 || line.y < 0.0) {
      throw NegativeMetric("bootstrap input carries a negative metric value");
    }
    std::uint64_t user_hash;
    if constexpr (std::is_same_v<Line, ObservationLine>) {
      user_hash = rng::fnv1a(line.user_id);
    } else {
      user_hash = line.user_hash;
    }
    p.hash.push_back(user_hash);
    p.first.push_back(seen.insert(user_hash).second ? 1 : 0);
    switch (line.group) {
      case Group::A:
        p.side.push_back(kSideA);
        p.tx.push_back(line.x / design.alpha_a);
        p.ty.push_back(line.y / design.alpha_a);
        p.plain_sums[0] += p.tx.back();
        p.plain_sums[1] += p.ty.back();
        break;
      case Group::B:
        p.side.push_back(kSideB);
        p.tx.push_back(line.x / design.alpha_b);
        p.ty.push_back(line.y / design.alpha_b);
        p.plain_sums[2] += p.tx.back();
        p.plain_sums[3] += p.ty.back();
        break;
      case Group::Unassigned:
        p.side.push_back(kSideNone);
        p.tx.push_back(0.0);
        p.ty.push_back(0.0);
        break;
    }
  }
  p.n_users = seen.size();
  return p;
}

// Accumulates the replicate columns [m_begin, m_end). Each column is summed
// in line order by exactly one caller, so the result does not depend on how
// the columns are partitioned across threads.
void accumulate_columns(const PreparedLines& p, const BootstrapOptions& options,
                        int total_replicates, int m_begin, int m_end,
                        std::span<double> gamma,
                        std::span<std::uint64_t> sizes) {
  const std::uint64_t seed = options.seed;
  const std::uint64_t seed_mixed = rng::mix64(seed);
  const bool has_override = static_cast<bool>(options.weight_override);
  const std::size_t line_count = p.hash.size();
  const std::size_t m_stride = static_cast<std::size_t>(total_replicates);
  for (std::size_t l = 0; l < line_count; ++l) {
    const int side = p.side[l];
    const bool first = p.first[l] != 0;
    if (side == kSideNone && !first) continue;
    const std::uint64_t inner = rng::mix64(seed_mixed ^ p.hash[l]);
    const double tx = p.tx[l];
    const double ty = p.ty[l];
    for (int m = m_begin; m < m_end; ++m) {
      std::uint64_t w;
      if (has_override) {
        w = options.weight_override(seed, p.hash[l], m);
      } else {
        w = static_cast<std::uint64_t>(rng::poisson1(
            rng::mix64(inner + static_cast<std::uint64_t>(m) * rng::kGolden)));
      }
      if (first) sizes[m] += w;
      if (side != kSideNone && w != 0) {
        const double wd = static_cast<double>(w);
        const std::size_t row = (side == kSideA) ? 0 : 2;
        gamma[row * m_stride + m] += wd * tx;
        gamma[(row + 1) * m_stride + m] += wd * ty;
      }
    }
  }
}

std::vector<double> valid_estimates(const BootstrapDistribution& dist) {
  std::vector<double> values;
  values.reserve(dist.estimates.size());
  for (std::size_t m = 0; m < dist.estimates.size(); ++m) {
    if (dist.valid[m]) values.push_back(dist.estimates[m]);
  }
  return values;
}

double interpolate_quantile(std::span<const double> sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

void check_level(double level) {
  if (!(level >= 0.0) || level >= 1.0) {
    throw OutOfDomain("confidence level must lie in [0, 1), got " +
                      std::to_string(level));
  }
}

void append_invalid_flag(const BootstrapDistribution& dist,
                         std::vector<std::string>& flags) {
  const auto invalid =
      static_cast<int>(dist.estimates.size()) - dist.valid_count();
  if (invalid > 0) {
    flags.push_back("invalid_replicates=" + std::to_string(invalid));
  }
}

}  // namespace

int BootstrapDistribution::valid_count() const {
  int count = 0;
  for (std::uint8_t v : valid) count += (v != 0);
  return count;
}

std::uint64_t poisson_weight_hashed(std::uint64_t seed, std::uint64_t user_hash,
                                    int replicate) {
  return static_cast<std::uint64_t>(rng::poisson1(rng::keyed_bits(
      seed, user_hash, static_cast<std::uint64_t>(replicate))));
}

std::uint64_t poisson_weight(std::uint64_t seed, std::string_view user_id,
                             int replicate) {
  return poisson_weight_hashed(seed, rng::fnv1a(user_id), replicate);
}

MeanVector BootstrapRun::plain_means() const {
  const double n = static_cast<double>(n_users);
  return {plain_sums[0] / n, plain_sums[1] / n, plain_sums[2] / n,
          plain_sums[3] / n};
}

double BootstrapRun::plain_estimate(MetricKind kind) const {
  return evaluate_metric(kind, plain_means());
}

BootstrapDistribution BootstrapRun::distribution(MetricKind kind) const {
  BootstrapDistribution dist;
  dist.kind = kind;
  dist.seed = seed;
  dist.n_users = n_users;
  const auto m_count = static_cast<std::size_t>(replicates);
  dist.estimates.resize(m_count);
  dist.valid.assign(m_count, 0);
  dist.replicate_sizes = replicate_sizes;
  for (std::size_t m = 0; m < m_count; ++m) {
    const std::uint64_t n_m = replicate_sizes[m];
    if (n_m == 0) {
      dist.estimates[m] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double inv = 1.0 / static_cast<double>(n_m);
    const MeanVector means = {gamma[0 * m_count + m] * inv,
                              gamma[1 * m_count + m] * inv,
                              gamma[2 * m_count + m] * inv,
                              gamma[3 * m_count + m] * inv};
    dist.estimates[m] = evaluate_metric(kind, means);
    dist.valid[m] = degenerate_denominator(kind, means) ? 0 : 1;
  }
  if (n_users > 0) {
    const MeanVector means = plain_means();
    dist.plain_estimate = evaluate_metric(kind, means);
    append_degenerate_flags(kind, means, dist.flags);
  }
  return dist;
}

template <typename Line>
static BootstrapRun run_impl(std::span<const Line> lines,
                             const DesignParams& design,
                             const BootstrapOptions& options) {
  validate(design);
  if (options.replicates < 1) {
    throw InvalidReplicateCount("replicate count must be at least 1, got " +
                                std::to_string(options.replicates));
  }
  const PreparedLines prepared = prepare(lines, design);
  const int m_count = options.replicates;

  BootstrapRun run;
  run.replicates = m_count;
  run.seed = options.seed;
  run.n_users = prepared.n_users;
  run.plain_sums = prepared.plain_sums;
  run.gamma.assign(4 * static_cast<std::size_t>(m_count), 0.0);
  run.replicate_sizes.assign(m_count, 0);

  int workers = options.threads;
  if (workers == 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  workers = std::clamp(workers, 1, m_count);

  if (workers == 1) {
    accumulate_columns(prepared, options, m_count, 0, m_count, run.gamma,
                       run.replicate_sizes);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int base = m_count / workers;
    const int extra = m_count % workers;
    int begin = 0;
    for (int w = 0; w < workers; ++w) {
      const int end = begin + base + (w < extra ? 1 : 0);
      pool.emplace_back([&, begin, end] {
        accumulate_columns(prepared, options, m_count, begin, end, run.gamma,
                           run.replicate_sizes);
      });
      begin = end;
    }
    for (std::thread& t : pool) t.join();
  }
  return run;
}

BootstrapRun run_online_bootstrap(std::span<const LineView> lines,
                                  const DesignParams& design,
                                  const BootstrapOptions& options) {
  return run_impl(lines, design, options);
}

BootstrapRun run_online_bootstrap(std::span<const ObservationLine> lines,
                                  const DesignParams& design,
                                  const BootstrapOptions& options) {
  return run_impl(lines, design, options);
}

BootstrapDistribution run_online_bootstrap(std::span<const ObservationLine> lines,
                                           const DesignParams& design,
                                           MetricKind kind, int replicates,
                                           std::uint64_t seed) {
  BootstrapOptions options;
  options.replicates = replicates;
  options.seed = seed;
  return run_impl(lines, design, options).distribution(kind);
}

CiReport quantile_ci(const BootstrapDistribution& dist, double level) {
  check_level(level);
  std::vector<double> values = valid_estimates(dist);
  if (values.empty()) {
    throw EmptyDistribution("no valid bootstrap replicate to take quantiles of");
  }
  std::sort(values.begin(), values.end());
  CiReport report;
  report.kind = dist.kind;
  report.lo = interpolate_quantile(values, 0.5 * (1.0 - level));
  report.hi = interpolate_quantile(values, 0.5 * (1.0 + level));
  report.estimate = dist.plain_estimate ? *dist.plain_estimate
                                        : interpolate_quantile(values, 0.5);
  report.level = level;
  report.n = dist.n_users;
  report.method = Method::BootstrapQuantile;
  report.m_replicates = static_cast<int>(dist.estimates.size());
  report.seed = dist.seed;
  report.flags = dist.flags;
  append_invalid_flag(dist, report.flags);
  return report;
}

CiReport mixed_ci(double estimate, const BootstrapDistribution& dist,
                  double level) {
  check_level(level);
  const std::vector<double> values = valid_estimates(dist);
  if (values.size() < 2) {
    throw InsufficientReplicates(
        "bootstrap variance needs at least 2 valid replicates, got " +
        std::to_string(values.size()));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  const double z = inv_normal_cdf(0.5 * (1.0 + level));
  CiReport report;
  report.kind = dist.kind;
  report.estimate = estimate;
  report.lo = estimate - z * sd;
  report.hi = estimate + z * sd;
  report.level = level;
  report.n = dist.n_users;
  report.method = Method::BootstrapClt;
  report.m_replicates = static_cast<int>(dist.estimates.size());
  report.seed = dist.seed;
  report.flags = dist.flags;
  append_invalid_flag(dist, report.flags);
  return report;
}

}  // namespace abtest
