// abci - confidence intervals for A/B-test metrics.
//
// Subcommands: analyze (one dataset -> one interval), coverage (blank-test
// calibration curves), simulate (synthetic dataset generation).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abtest/aggregate.hpp"
#include "abtest/bootstrap.hpp"
#include "abtest/clt.hpp"
#include "abtest/errors.hpp"
#include "abtest/harness.hpp"
#include "abtest/io.hpp"
#include "abtest/model.hpp"
#include "abtest/rng.hpp"

namespace {

using nlohmann::json;

constexpr std::uint64_t kSimulateSplitStream = 0xab01;

struct CommonOptions {
  std::string input;
  std::string format = "csv";
  std::string metric = "ratio-diff";
  std::vector<double> levels;
  std::string method = "bootstrap-clt";
  int bootstraps = 10;
  double alpha_a = 0.5;
  double alpha_b = 0.5;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> split_seed;
  int tests = 500;
  std::size_t users = 50'000;
  std::string output;
  int threads = 1;
  bool emit_distribution = false;
};

void add_statistical_flags(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--metric", opt.metric, "Metric kind")
      ->check(CLI::IsMember({"sum-diff", "sum-ratio", "ratio-diff",
                             "ratio-rel"}));
  cmd->add_option("--level", opt.levels, "Confidence level(s) in [0, 1)");
  cmd->add_option("--method", opt.method, "Interval method")
      ->check(CLI::IsMember({"clt", "bootstrap", "bootstrap-clt",
                             "naive-display"}));
  cmd->add_option("--bootstraps", opt.bootstraps, "Bootstrap replicates M")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--alpha-a", opt.alpha_a, "Population A size ratio");
  cmd->add_option("--alpha-b", opt.alpha_b, "Population B size ratio");
  cmd->add_option("--seed", opt.seed, "Random seed (echoed in every report)");
  cmd->add_option("--threads", opt.threads,
                  "Worker threads; the output does not depend on it")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--output", opt.output, "Report format")
      ->check(CLI::IsMember({"json", "csv"}));
}

std::vector<abtest::ObservationLine> read_input(const CommonOptions& opt) {
  if (opt.format == "csv") {
    return abtest::read_csv_file(opt.input);
  }
  // KDD logs carry no population column; assign by salted hash so analyses
  // are reproducible from the seed.
  const std::uint64_t split_seed = opt.split_seed.value_or(opt.seed);
  const double alpha_a = opt.alpha_a;
  const double alpha_b = opt.alpha_b;
  return abtest::read_kdd_tsv_file(
      opt.input, [split_seed, alpha_a, alpha_b](std::string_view user_id) {
        return abtest::assign_group(user_id, split_seed, alpha_a, alpha_b);
      });
}

json config_json(const std::string& command, const CommonOptions& opt,
                 const std::string& output) {
  // --threads is deliberately not echoed: reports are byte-identical for any
  // worker count.
  json j{
      {"command", command},
      {"kind", opt.metric},
      {"method", opt.method},
      {"bootstraps", opt.bootstraps},
      {"alpha_a", opt.alpha_a},
      {"alpha_b", opt.alpha_b},
      {"seed", opt.seed},
      {"output", output},
  };
  return j;
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string joined;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (i > 0) joined += ';';
    joined += flags[i];
  }
  return joined;
}

int run_analyze(const CommonOptions& opt) {
  using namespace abtest;
  const std::string output = opt.output.empty() ? "json" : opt.output;
  const double level = opt.levels.empty() ? 0.95 : opt.levels.front();
  const MetricKind kind = metric_kind_from_token(opt.metric);
  const Method method = method_from_token(opt.method);
  const DesignParams design{opt.alpha_a, opt.alpha_b};
  validate(design);

  const std::vector<ObservationLine> lines = read_input(opt);

  CiReport report;
  std::optional<BootstrapDistribution> distribution;
  switch (method) {
    case Method::Clt: {
      const std::vector<UserAggregate> users = ingest(lines);
      report = clt_ci(kind, summarize(users, design), level);
      report.seed = opt.seed;
      break;
    }
    case Method::BootstrapQuantile:
    case Method::BootstrapClt: {
      BootstrapOptions options;
      options.replicates = opt.bootstraps;
      options.seed = opt.seed;
      options.threads = opt.threads;
      const BootstrapRun run = run_online_bootstrap(
          std::span<const ObservationLine>(lines), design, options);
      BootstrapDistribution dist = run.distribution(kind);
      if (method == Method::BootstrapQuantile) {
        report = quantile_ci(dist, level);
      } else {
        if (!dist.plain_estimate) {
          throw EmptyDistribution("dataset has no users");
        }
        report = mixed_ci(*dist.plain_estimate, dist, level);
      }
      if (opt.emit_distribution) distribution = std::move(dist);
      break;
    }
    case Method::NaiveDisplay: {
      if (kind != MetricKind::RatioDiff) {
        throw UnsupportedCombination(
            "the display-independence baseline only models the absolute CTR "
            "increment (ratio-diff)");
      }
      const std::vector<UserAggregate> users = ingest(lines);
      double clicks_a = 0.0, displays_a = 0.0, clicks_b = 0.0, displays_b = 0.0;
      for (const UserAggregate& user : users) {
        if (user.group == Group::A) {
          clicks_a += user.x_sum;
          displays_a += user.y_sum;
        } else if (user.group == Group::B) {
          clicks_b += user.x_sum;
          displays_b += user.y_sum;
        }
      }
      const double ctr_a = clicks_a / nonzero(displays_a);
      const double ctr_b = clicks_b / nonzero(displays_b);
      const double sd = std::sqrt(
          naive_display_variance(ctr_a, displays_a, ctr_b, displays_b));
      const double half = inv_normal_cdf(0.5 * (1.0 + level)) * sd;
      report.kind = kind;
      report.estimate = ctr_b - ctr_a;
      report.lo = report.estimate - half;
      report.hi = report.estimate + half;
      report.level = level;
      report.n = users.size();
      report.method = Method::NaiveDisplay;
      report.seed = opt.seed;
      break;
    }
  }

  if (output == "json") {
    json j = config_json("analyze", opt, output);
    j["input"] = opt.input;
    j["format"] = opt.format;
    j["split_seed"] = opt.split_seed.value_or(opt.seed);
    j["level"] = level;
    j["estimate"] = report.estimate;
    j["lo"] = report.lo;
    j["hi"] = report.hi;
    j["n"] = report.n;
    j["m_replicates"] =
        report.m_replicates ? json(*report.m_replicates) : json(nullptr);
    j["flags"] = report.flags;
    if (distribution) {
      j["distribution"] = {
          {"estimates", distribution->estimates},
          {"replicate_sizes", distribution->replicate_sizes},
          {"seed", distribution->seed},
          {"kind", std::string(to_token(distribution->kind))},
      };
    }
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "kind,estimate,lo,hi,level,n,method,m_replicates,seed,flags\n"
              << to_token(report.kind) << ',' << format_double(report.estimate)
              << ',' << format_double(report.lo) << ','
              << format_double(report.hi) << ',' << format_double(level) << ','
              << report.n << ',' << to_token(report.method) << ','
              << (report.m_replicates ? std::to_string(*report.m_replicates)
                                      : std::string())
              << ',' << opt.seed << ',' << join_flags(report.flags) << '\n';
  }
  return 0;
}

int run_coverage_cmd(const CommonOptions& opt) {
  using namespace abtest;
  const std::string output = opt.output.empty() ? "csv" : opt.output;
  CoverageConfig config;
  config.kind = metric_kind_from_token(opt.metric);
  if (!opt.levels.empty()) config.levels = opt.levels;
  config.num_tests = opt.tests;
  config.seed = opt.seed;
  config.replicates = opt.bootstraps;
  config.alpha_a = opt.alpha_a;
  config.threads = opt.threads;
  const Method method = method_from_token(opt.method);

  CoverageResult result;
  if (opt.input.empty()) {
    SyntheticPopulationSpec spec;
    spec.n_users = opt.users;
    result = run_coverage(spec, method, config);
  } else {
    const std::vector<ObservationLine> lines = read_input(opt);
    const std::vector<UserAggregate> users = ingest(lines);
    result = run_coverage(users, method, config);
  }

  if (output == "json") {
    json j = config_json("coverage", opt, output);
    j["input"] = opt.input;
    j["format"] = opt.format;
    j["tests"] = opt.tests;
    j["users"] = opt.users;
    j["levels"] = result.levels;
    j["observed"] = result.observed;
    j["num_tests"] = result.num_tests;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "level,observed,num_tests,method\n";
    for (std::size_t i = 0; i < result.levels.size(); ++i) {
      std::cout << format_double(result.levels[i]) << ','
                << format_double(result.observed[i]) << ',' << result.num_tests
                << ',' << to_token(result.method) << '\n';
    }
  }
  return 0;
}

int run_simulate(const CommonOptions& opt, const std::string& out_path,
                 bool ungrouped) {
  using namespace abtest;
  SyntheticPopulationSpec spec;
  spec.n_users = opt.users;
  std::vector<UserAggregate> users = generate_population(spec, opt.seed);
  if (!ungrouped) {
    const std::uint64_t salt =
        rng::derive_stream(opt.seed, kSimulateSplitStream, 0);
    for (UserAggregate& user : users) {
      user.group = assign_group(user.user_id, salt, opt.alpha_a, opt.alpha_b);
    }
  }
  if (out_path.empty() || out_path == "-") {
    write_csv(std::cout, users);
  } else {
    std::ofstream out(out_path);
    if (!out) throw MalformedInput("cannot open '" + out_path + "' for writing");
    write_csv(out, users);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence intervals for A/B-test metrics"};
  app.require_subcommand(1);

  CommonOptions analyze_opt;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Read a dataset and print one confidence interval");
  analyze->add_option("--input,input", analyze_opt.input, "Dataset path")
      ->required();
  analyze->add_option("--format", analyze_opt.format, "Input format")
      ->check(CLI::IsMember({"csv", "kdd-tsv"}));
  analyze->add_option("--split-seed", analyze_opt.split_seed,
                      "Salt for kdd-tsv group assignment (defaults to --seed)");
  analyze->add_flag("--emit-distribution", analyze_opt.emit_distribution,
                    "Attach the bootstrap distribution to the JSON report");
  add_statistical_flags(analyze, analyze_opt);

  CommonOptions coverage_opt;
  CLI::App* coverage = app.add_subcommand(
      "coverage", "Score blank-test coverage of a CI method");
  coverage->add_option("--input,input", coverage_opt.input,
                       "Dataset path (omit to use the synthetic population)");
  coverage->add_option("--format", coverage_opt.format, "Input format")
      ->check(CLI::IsMember({"csv", "kdd-tsv"}));
  coverage->add_option("--tests", coverage_opt.tests, "Number of blank tests")
      ->check(CLI::PositiveNumber);
  coverage->add_option("--users", coverage_opt.users,
                       "Synthetic population size");
  add_statistical_flags(coverage, coverage_opt);

  CommonOptions simulate_opt;
  std::string simulate_out;
  bool simulate_ungrouped = false;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Write a synthetic CSV dataset");
  simulate->add_option("--out", simulate_out, "Output path ('-' = stdout)");
  simulate->add_option("--users", simulate_opt.users, "Population size")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", simulate_opt.seed, "Random seed");
  simulate->add_option("--alpha-a", simulate_opt.alpha_a,
                       "Population A size ratio");
  simulate->add_option("--alpha-b", simulate_opt.alpha_b,
                       "Population B size ratio");
  simulate->add_flag("--ungrouped", simulate_ungrouped,
                     "Leave every user unassigned ('-')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) {
      if (analyze_opt.levels.size() > 1) {
        std::cerr << "analyze takes exactly one --level\n";
        return 2;
      }
      if (analyze_opt.emit_distribution &&
          analyze_opt.method != "bootstrap" &&
          analyze_opt.method != "bootstrap-clt") {
        std::cerr << "--emit-distribution requires a bootstrap method\n";
        return 2;
      }
      return run_analyze(analyze_opt);
    }
    if (coverage->parsed()) {
      return run_coverage_cmd(coverage_opt);
    }
    return run_simulate(simulate_opt, simulate_out, simulate_ungrouped);
  } catch (const abtest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
