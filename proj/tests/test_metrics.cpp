#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "bsim/metrics.hpp"
#include "bsim/scenario_io.hpp"
#include "bsim/sim.hpp"

using namespace bsim;

namespace {

CycleRecord rec(NodeId id, Outcome o) {
  CycleRecord r;
  r.node_id = id;
  r.outcome = o;
  return r;
}

}  // namespace

TEST_CASE("pdr") {
  CHECK(pdr(0, 0) == 0.0);
  CHECK(pdr(3, 4) == 0.75);
  CHECK(pdr(5, 5) == 1.0);
}

TEST_CASE("summarize counts and voltage statistics") {
  const std::vector<CycleRecord> records{rec(1, Outcome::Delivered), rec(1, Outcome::FailedTimeout),
                                         rec(1, Outcome::Incomplete), rec(2, Outcome::Delivered)};
  // Node 1 sits at 4 V for 1 s and ramps to 5 V over the next 1 s.
  const std::vector<VoltageSample> trace{{0.0, 1, 4.0}, {0.0, 2, 3.0}, {1.0, 1, 4.0}, {2.0, 1, 5.0}};
  SummaryMeta meta;
  meta.kinds = {{1, NodeKind::Ble}, {2, NodeKind::Liot}, {3, NodeKind::Liot}};
  const auto s = summarize(records, trace, meta);
  REQUIRE(s.nodes.size() == 3);
  CHECK(s.nodes[0].sent == 2);
  CHECK(s.nodes[0].received == 1);
  CHECK(s.nodes[0].pdr == 0.5);
  CHECK(s.nodes[0].scap_avg_v == doctest::Approx(4.25));
  CHECK(s.nodes[0].scap_min_v == 4.0);
  CHECK(s.nodes[0].scap_max_v == 5.0);
  CHECK(s.nodes[1].kind == NodeKind::Liot);
  CHECK(s.nodes[1].scap_avg_v == 3.0);
  CHECK(s.nodes[2].sent == 0);
  CHECK(s.nodes[2].pdr == 0.0);
}

TEST_CASE("format_double round-trips exactly") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(gen);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(4.0) == "4");
}

TEST_CASE("exports round-trip losslessly") {
  Scenario s = load_scenario("ble-500lx");
  s.duration_s = 3600.0;
  s.nodes.push_back(default_liot_node(2));
  const auto r = run(s);
  for (auto fmt : {ExportFormat::Csv, ExportFormat::JsonLines}) {
    CHECK(parse_summary(format_summary(r.summary, fmt), fmt) == r.summary);
    CHECK(parse_cycles(format_cycles(r.cycles, fmt), fmt) == r.cycles);
    CHECK(parse_voltage(format_voltage(r.voltage, fmt), fmt) == r.voltage);
  }
}

TEST_CASE("malformed exports are rejected") {
  CHECK_THROWS_AS(parse_summary("bogus,header\n1,2\n", ExportFormat::Csv), ParseError);
  CHECK_THROWS_AS(parse_summary("{\"node_id\": 1}\n", ExportFormat::JsonLines), ParseError);
  CHECK_THROWS_AS(parse_summary("not json\n", ExportFormat::JsonLines), ParseError);
  RunSummary one;
  one.nodes.push_back(NodeSummary{});
  std::string csv = format_summary(one, ExportFormat::Csv);
  csv.replace(csv.find("ble"), 3, "zig");
  CHECK_THROWS_AS(parse_summary(csv, ExportFormat::Csv), ParseError);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "bsim-test-metrics";
  std::filesystem::remove_all(dir);
  write_file(dir / "a" / "b.txt", "hello\n");
  CHECK(read_file(dir / "a" / "b.txt") == "hello\n");
  CHECK_THROWS_AS(read_file(dir / "missing"), IoError);
  CHECK_THROWS_AS(write_file(dir / "a" / "b.txt" / "c", "x"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("table row") {
  NodeSummary n;
  n.kind = NodeKind::Liot;
  n.node_id = 1;
  n.sent = 46;
  n.received = 46;
  n.pdr = 1.0;
  n.scap_avg_v = 4.2994;
  const auto row = format_table_row(n, "700lx");
  CHECK(row.find("LIoT") == 0);
  CHECK(row.find("sent=46") != std::string::npos);
  CHECK(row.find("pdr=1.000") != std::string::npos);
  CHECK(row.find("avg_scap_v=4.299") != std::string::npos);
}
