// Run summaries and trace export (CSV / JSON lines).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bsim/protocol.hpp"
#include "bsim/types.hpp"

namespace bsim {

struct NodeSummary {
  NodeId node_id = 0;
  NodeKind kind = NodeKind::Ble;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  double pdr = 0.0;
  double scap_avg_v = 0.0;
  double scap_min_v = 0.0;
  double scap_max_v = 0.0;

  bool operator==(const NodeSummary&) const = default;
};

struct RunSummary {
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<NodeSummary> nodes;

  bool operator==(const RunSummary&) const = default;
};

struct SummaryMeta {
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<NodeId, NodeKind> kinds;
};

/// Per-node counts from cycle records (Incomplete cycles are not sent) and
/// time-weighted (trapezoidal) voltage statistics from the trace. Nodes
/// are reported in id order.
RunSummary summarize(std::span<const CycleRecord> records, std::span<const VoltageSample> trace,
                     const SummaryMeta& meta = {});

double pdr(std::uint64_t received, std::uint64_t sent);

/// A sent frame and its fate on the channel.
struct FrameRecord {
  Frame frame;
  double arrive_s = 0.0;
  bool delivered = false;

  bool operator==(const FrameRecord&) const = default;
};

enum class ExportFormat { Csv, JsonLines };

class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_summary(const RunSummary& summary, ExportFormat fmt);
std::string format_cycles(std::span<const CycleRecord> records, ExportFormat fmt);
std::string format_voltage(std::span<const VoltageSample> trace, ExportFormat fmt);
std::string format_frames(std::span<const FrameRecord> frames, ExportFormat fmt);

RunSummary parse_summary(std::string_view text, ExportFormat fmt);
std::vector<CycleRecord> parse_cycles(std::string_view text, ExportFormat fmt);
std::vector<VoltageSample> parse_voltage(std::string_view text, ExportFormat fmt);

/// Writes `content` to `path`, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);
/// Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

/// One report line: node, illumination label, sent, received,
/// PDR at three decimals and average buffer voltage.
std::string format_table_row(const NodeSummary& node, std::string_view illumination);

}  // namespace bsim
