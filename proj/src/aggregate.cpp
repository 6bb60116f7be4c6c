#include "abtest/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "abtest/errors.hpp"

namespace abtest {

std::vector<UserAggregate> ingest(std::span<const ObservationLine> lines) {
  std::vector<UserAggregate> out;
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(lines.size());
  for (const ObservationLine& line : lines) {
    if (line.x < 0.0 || line.y < 0.0) {
      throw NegativeMetric("user " + line.user_id +
                           " carries a negative metric value");
    }
    auto [it, inserted] = index.try_emplace(line.user_id, out.size());
    if (inserted) {
      out.push_back({line.user_id, line.group, 0.0, 0.0});
    }
    UserAggregate& agg = out[it->second];
    if (line.group != Group::Unassigned) {
      if (agg.group != Group::Unassigned && agg.group != line.group) {
        throw ConflictingGroup("user " + line.user_id +
                               " appears in both populations");
      }
      agg.group = line.group;
    }
    agg.x_sum += line.x;
    agg.y_sum += line.y;
  }
  return out;
}

void MomentAccumulator::add(const TildeVector& v) {
  const std::array<double, 4> value = {v.xa, v.ya, v.xb, v.yb};
  n_ += 1;
  const double inv_n = 1.0 / static_cast<double>(n_);
  std::array<double, 4> delta_old;
  for (int k = 0; k < 4; ++k) {
    delta_old[k] = value[k] - mean_[k];
    mean_[k] += delta_old[k] * inv_n;
  }
  for (int k = 0; k < 4; ++k) {
    m2_[k] += delta_old[k] * (value[k] - mean_[k]);
  }
  comoment_a_ += delta_old[0] * (value[1] - mean_[1]);
  comoment_b_ += delta_old[2] * (value[3] - mean_[3]);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double n1 = static_cast<double>(n_);
  const double n2 = static_cast<double>(other.n_);
  const double n12 = n1 + n2;
  const double coupling = n1 * n2 / n12;
  std::array<double, 4> delta;
  for (int k = 0; k < 4; ++k) {
    delta[k] = other.mean_[k] - mean_[k];
    m2_[k] += other.m2_[k] + delta[k] * delta[k] * coupling;
  }
  comoment_a_ += other.comoment_a_ + delta[0] * delta[1] * coupling;
  comoment_b_ += other.comoment_b_ + delta[2] * delta[3] * coupling;
  for (int k = 0; k < 4; ++k) {
    mean_[k] += delta[k] * n2 / n12;
  }
  n_ += other.n_;
}

MomentSummary MomentAccumulator::summary() const {
  if (n_ < 2) {
    throw InsufficientUsers("moment estimation needs at least 2 users, got " +
                            std::to_string(n_));
  }
  const double bessel = 1.0 / static_cast<double>(n_ - 1);
  MomentSummary s;
  s.n = n_;
  s.means = {mean_[0], mean_[1], mean_[2], mean_[3]};
  s.sd_xa = std::sqrt(m2_[0] * bessel);
  s.sd_ya = std::sqrt(m2_[1] * bessel);
  s.sd_xb = std::sqrt(m2_[2] * bessel);
  s.sd_yb = std::sqrt(m2_[3] * bessel);
  if (s.sd_xa > 0.0 && s.sd_ya > 0.0) {
    s.corr_a =
        std::clamp(comoment_a_ * bessel / (s.sd_xa * s.sd_ya), -1.0, 1.0);
  } else {
    s.corr_a = 0.0;
    s.flags.push_back("corr_a_zero_sd");
  }
  if (s.sd_xb > 0.0 && s.sd_yb > 0.0) {
    s.corr_b =
        std::clamp(comoment_b_ * bessel / (s.sd_xb * s.sd_yb), -1.0, 1.0);
  } else {
    s.corr_b = 0.0;
    s.flags.push_back("corr_b_zero_sd");
  }
  return s;
}

MomentSummary summarize(std::span<const UserAggregate> aggregates,
                        const DesignParams& design) {
  validate(design);
  MomentAccumulator acc;
  for (const UserAggregate& user : aggregates) {
    acc.add(tilde(user, design));
  }
  return acc.summary();
}

}  // namespace abtest
