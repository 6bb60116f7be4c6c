#include "abtest/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "abtest/errors.hpp"

namespace abtest {

namespace {

double parse_number(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw MalformedInput("line " + std::to_string(line_no) +
                         ": cannot parse number '" + std::string(field) + "'");
  }
  return value;
}

Group parse_group(std::string_view field, std::size_t line_no) {
  if (field == "A") return Group::A;
  if (field == "B") return Group::B;
  if (field == "-") return Group::Unassigned;
  throw MalformedInput("line " + std::to_string(line_no) +
                       ": group must be A, B or -, got '" + std::string(field) +
                       "'");
}

void check_non_negative(const ObservationLine& line, std::size_t line_no) {
  if (line.x < 0.0 || line.y < 0.0) {
    throw NegativeMetric("line " + std::to_string(line_no) + ": user " +
                         line.user_id + " carries a negative metric value");
  }
}

// Splits into exactly `expected` fields; no quoting, ids are plain tokens.
std::vector<std::string_view> split_fields(std::string_view text, char sep,
                                           std::size_t expected,
                                           std::size_t line_no) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t pos = text.find(sep, begin);
    if (pos == std::string_view::npos) {
      fields.push_back(text.substr(begin));
      break;
    }
    fields.push_back(text.substr(begin, pos - begin));
    begin = pos + 1;
  }
  if (fields.size() != expected) {
    throw MalformedInput("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(expected) + " fields, got " +
                         std::to_string(fields.size()));
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::vector<ObservationLine> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "user_id,group,x,y") {
    throw MalformedInput("CSV header must be 'user_id,group,x,y'");
  }
  std::vector<ObservationLine> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',', 4, line_no);
    ObservationLine obs;
    obs.user_id = std::string(fields[0]);
    obs.group = parse_group(fields[1], line_no);
    obs.x = parse_number(fields[2], line_no);
    obs.y = parse_number(fields[3], line_no);
    check_non_negative(obs, line_no);
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<ObservationLine> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open '" + path + "'");
  return read_csv(in);
}

std::vector<ObservationLine> read_kdd_tsv(std::istream& in,
                                          const GroupAssigner& assign) {
  std::string line;
  if (!std::getline(in, line) ||
      strip_cr(line) != "UserId\tNbDisplays\tNbClicks") {
    throw MalformedInput(
        "TSV header must be 'UserId\\tNbDisplays\\tNbClicks'");
  }
  std::vector<ObservationLine> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, '\t', 3, line_no);
    ObservationLine obs;
    obs.user_id = std::string(fields[0]);
    obs.y = parse_number(fields[1], line_no);  // displays
    obs.x = parse_number(fields[2], line_no);  // clicks
    obs.group = assign ? assign(fields[0]) : Group::Unassigned;
    check_non_negative(obs, line_no);
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<ObservationLine> read_kdd_tsv_file(const std::string& path,
                                               const GroupAssigner& assign) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open '" + path + "'");
  return read_kdd_tsv(in, assign);
}

void write_csv(std::ostream& out, std::span<const UserAggregate> users) {
  out << "user_id,group,x,y\n";
  for (const UserAggregate& user : users) {
    out << user.user_id << ',' << to_token(user.group) << ','
        << format_double(user.x_sum) << ',' << format_double(user.y_sum)
        << '\n';
  }
}

std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  (void)ec;
  return std::string(buffer, ptr);
}

}  // namespace abtest
