#include <doctest.h>

#include <sstream>
#include <string>

#include "abtest/aggregate.hpp"
#include "abtest/errors.hpp"
#include "abtest/io.hpp"

using namespace abtest;

namespace {
const std::string kFixtureDir = ABCI_FIXTURE_DIR;
}

TEST_CASE("csv reader parses the fixture") {
  const auto lines = read_csv_file(kFixtureDir + "/two_users.csv");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].user_id == "u1");
  CHECK(lines[0].group == Group::A);
  CHECK(lines[0].x == 2.0);
  CHECK(lines[0].y == 4.0);
  CHECK(lines[1].group == Group::B);
}

TEST_CASE("csv reader validates header and fields") {
  std::istringstream bad_header("id,group,x,y\nu,A,1,1\n");
  CHECK_THROWS_AS(read_csv(bad_header), MalformedInput);

  std::istringstream missing_field("user_id,group,x,y\nu,A,1\n");
  CHECK_THROWS_AS(read_csv(missing_field), MalformedInput);

  std::istringstream bad_number("user_id,group,x,y\nu,A,abc,1\n");
  CHECK_THROWS_AS(read_csv(bad_number), MalformedInput);

  std::istringstream bad_group("user_id,group,x,y\nu,C,1,1\n");
  CHECK_THROWS_AS(read_csv(bad_group), MalformedInput);

  std::istringstream negative("user_id,group,x,y\nu,A,-1,1\n");
  CHECK_THROWS_AS(read_csv(negative), NegativeMetric);

  std::istringstream unassigned("user_id,group,x,y\nu,-,1,2\n");
  const auto lines = read_csv(unassigned);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].group == Group::Unassigned);

  CHECK_THROWS_AS(read_csv_file("/nonexistent/file.csv"), MalformedInput);
}

TEST_CASE("kdd tsv reader maps displays to y and clicks to x") {
  const auto lines = read_kdd_tsv_file(kFixtureDir + "/kdd_sample.tsv",
                                       [](std::string_view) {
                                         return Group::A;
                                       });
  REQUIRE(lines.size() == 9);
  CHECK(lines[1].user_id == "10000148");
  CHECK(lines[1].y == 3.0);  // NbDisplays
  CHECK(lines[1].x == 1.0);  // NbClicks

  const auto users = ingest(lines);
  CHECK(users.size() == 8);

  std::istringstream bad_header("User\tDisplays\tClicks\nu\t1\t0\n");
  CHECK_THROWS_AS(read_kdd_tsv(bad_header, nullptr), MalformedInput);
}

TEST_CASE("kdd tsv reader without an assigner leaves users unassigned") {
  std::istringstream in("UserId\tNbDisplays\tNbClicks\nu\t4\t1\n");
  const auto lines = read_kdd_tsv(in, nullptr);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].group == Group::Unassigned);
}

TEST_CASE("csv writer round-trips aggregates") {
  const std::vector<UserAggregate> users = {{"u1", Group::A, 2.5, 4},
                                            {"u2", Group::B, 1, 2},
                                            {"u3", Group::Unassigned, 0, 7}};
  std::ostringstream out;
  write_csv(out, users);
  std::istringstream in(out.str());
  const auto lines = read_csv(in);
  REQUIRE(lines.size() == 3);
  for (std::size_t i = 0; i < users.size(); ++i) {
    CHECK(lines[i].user_id == users[i].user_id);
    CHECK(lines[i].group == users[i].group);
    CHECK(lines[i].x == users[i].x_sum);
    CHECK(lines[i].y == users[i].y_sum);
  }
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(3.0) == "3");
  CHECK(format_double(-0.25) == "-0.25");
  CHECK(format_double(0.1) == "0.1");
}
