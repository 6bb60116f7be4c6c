#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "abtest/aggregate.hpp"

namespace abtest {

// CSV with header "user_id,group,x,y"; group is A, B or "-".
std::vector<ObservationLine> read_csv(std::istream& in);
std::vector<ObservationLine> read_csv_file(const std::string& path);

// KDD-style TSV with header "UserId\tNbDisplays\tNbClicks". The file carries
// no population column; `assign` supplies the group (x = clicks, y = displays).
using GroupAssigner = std::function<Group(std::string_view user_id)>;
std::vector<ObservationLine> read_kdd_tsv(std::istream& in,
                                          const GroupAssigner& assign);
std::vector<ObservationLine> read_kdd_tsv_file(const std::string& path,
                                               const GroupAssigner& assign);

void write_csv(std::ostream& out, std::span<const UserAggregate> users);

// Shortest round-trip decimal form, locale independent.
std::string format_double(double value);

}  // namespace abtest
