#include "bsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bsim {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kSummaryHeader =
    "node_id,kind,sent,received,pdr,scap_avg_v,scap_min_v,scap_max_v,duration_s,seed,config_hash";
constexpr std::string_view kCyclesHeader =
    "node_id,cycle_index,start_s,wake_s,end_s,outcome,scap_v_start,scap_v_wake,scap_v_end,"
    "energy_consumed_j,energy_harvested_j";
constexpr std::string_view kVoltageHeader = "time_s,node_id,voltage_v";
constexpr std::string_view kFramesHeader =
    "sent_s,arrive_s,src,dst,link,channel,kind,payload_bytes,airtime_s,delivered";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad hex value '" + std::string(s) + "'");
  return v;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad number '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad integer '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

/// CSV rows after checking the header; each row has exactly `header`'s arity.
std::vector<std::vector<std::string_view>> csv_rows(std::string_view text, std::string_view header) {
  auto lines = lines_of(text);
  if (lines.empty() || lines.front() != header) throw ParseError("unexpected CSV header");
  const auto arity = split(header, ',').size();
  std::vector<std::vector<std::string_view>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split(lines[i], ',');
    if (cells.size() != arity) {
      throw ParseError("CSV line " + std::to_string(i + 1) + ": expected " + std::to_string(arity) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::vector<ojson> json_lines(std::string_view text) {
  std::vector<ojson> out;
  std::size_t n = 0;
  for (auto l : lines_of(text)) {
    ++n;
    try {
      out.push_back(ojson::parse(l));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("JSON line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

NodeKind kind_of(std::string_view s) {
  auto k = node_kind_from_string(s);
  if (!k) throw ParseError("unknown node kind '" + std::string(s) + "'");
  return *k;
}

Outcome outcome_of(std::string_view s) {
  auto o = outcome_from_string(s);
  if (!o) throw ParseError("unknown outcome '" + std::string(s) + "'");
  return *o;
}

template <typename T>
T field(const ojson& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

double pdr(std::uint64_t received, std::uint64_t sent) {
  return sent == 0 ? 0.0 : double(received) / double(sent);
}

RunSummary summarize(std::span<const CycleRecord> records, std::span<const VoltageSample> trace,
                     const SummaryMeta& meta) {
  RunSummary out;
  out.duration_s = meta.duration_s;
  out.seed = meta.seed;
  out.config_hash = meta.config_hash;

  std::set<NodeId> ids;
  for (const auto& [id, kind] : meta.kinds) ids.insert(id);
  for (const auto& r : records) ids.insert(r.node_id);
  for (const auto& v : trace) ids.insert(v.node_id);

  for (NodeId id : ids) {
    NodeSummary n;
    n.node_id = id;
    if (auto it = meta.kinds.find(id); it != meta.kinds.end()) n.kind = it->second;
    for (const auto& r : records) {
      if (r.node_id != id || r.outcome == Outcome::Incomplete) continue;
      ++n.sent;
      if (r.outcome == Outcome::Delivered) ++n.received;
    }
    n.pdr = pdr(n.received, n.sent);

    double area = 0.0;
    double span = 0.0;
    const VoltageSample* prev = nullptr;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& v : trace) {
      if (v.node_id != id) continue;
      lo = std::min(lo, v.voltage_v);
      hi = std::max(hi, v.voltage_v);
      if (prev != nullptr) {
        const double dt = v.time_s - prev->time_s;
        area += 0.5 * (v.voltage_v + prev->voltage_v) * dt;
        span += dt;
      }
      prev = &v;
    }
    if (prev != nullptr) {
      n.scap_min_v = lo;
      n.scap_max_v = hi;
      n.scap_avg_v = span > 0.0 ? std::clamp(area / span, lo, hi) : prev->voltage_v;
    }
    out.nodes.push_back(n);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string format_summary(const RunSummary& summary, ExportFormat fmt) {
  std::string out;
  if (fmt == ExportFormat::Csv) {
    out.append(kSummaryHeader).push_back('\n');
    for (const auto& n : summary.nodes) {
      out += std::to_string(n.node_id) + ',' + std::string(to_string(n.kind)) + ',' + std::to_string(n.sent) +
             ',' + std::to_string(n.received) + ',' + format_double(n.pdr) + ',' + format_double(n.scap_avg_v) +
             ',' + format_double(n.scap_min_v) + ',' + format_double(n.scap_max_v) + ',' +
             format_double(summary.duration_s) + ',' + std::to_string(summary.seed) + ',' +
             hex64(summary.config_hash) + '\n';
    }
    return out;
  }
  for (const auto& n : summary.nodes) {
    ojson j;
    j["node_id"] = n.node_id;
    j["kind"] = to_string(n.kind);
    j["sent"] = n.sent;
    j["received"] = n.received;
    j["pdr"] = n.pdr;
    j["scap_avg_v"] = n.scap_avg_v;
    j["scap_min_v"] = n.scap_min_v;
    j["scap_max_v"] = n.scap_max_v;
    j["duration_s"] = summary.duration_s;
    j["seed"] = summary.seed;
    j["config_hash"] = hex64(summary.config_hash);
    out += j.dump() + '\n';
  }
  return out;
}

RunSummary parse_summary(std::string_view text, ExportFormat fmt) {
  RunSummary s;
  bool first = true;
  auto take_globals = [&](double duration, std::uint64_t seed, std::uint64_t hash) {
    if (first) {
      s.duration_s = duration;
      s.seed = seed;
      s.config_hash = hash;
      first = false;
    }
  };
  if (fmt == ExportFormat::Csv) {
    for (const auto& c : csv_rows(text, kSummaryHeader)) {
      NodeSummary n{parse_int<NodeId>(c[0]), kind_of(c[1]), parse_int<std::uint64_t>(c[2]),
                    parse_int<std::uint64_t>(c[3]), parse_double(c[4]), parse_double(c[5]),
                    parse_double(c[6]), parse_double(c[7])};
      take_globals(parse_double(c[8]), parse_int<std::uint64_t>(c[9]), parse_hex64(c[10]));
      s.nodes.push_back(n);
    }
    return s;
  }
  for (const auto& j : json_lines(text)) {
    NodeSummary n{field<NodeId>(j, "node_id"),
                  kind_of(field<std::string>(j, "kind")),
                  field<std::uint64_t>(j, "sent"),
                  field<std::uint64_t>(j, "received"),
                  field<double>(j, "pdr"),
                  field<double>(j, "scap_avg_v"),
                  field<double>(j, "scap_min_v"),
                  field<double>(j, "scap_max_v")};
    take_globals(field<double>(j, "duration_s"), field<std::uint64_t>(j, "seed"),
                 parse_hex64(field<std::string>(j, "config_hash")));
    s.nodes.push_back(n);
  }
  return s;
}

std::string format_cycles(std::span<const CycleRecord> records, ExportFormat fmt) {
  std::string out;
  if (fmt == ExportFormat::Csv) {
    out.append(kCyclesHeader).push_back('\n');
    for (const auto& r : records) {
      out += std::to_string(r.node_id) + ',' + std::to_string(r.cycle_index) + ',' + format_double(r.start_s) +
             ',' + format_double(r.wake_s) + ',' + format_double(r.end_s) + ',' + std::string(to_string(r.outcome)) +
             ',' + format_double(r.scap_v_start) + ',' + format_double(r.scap_v_wake) + ',' +
             format_double(r.scap_v_end) + ',' + format_double(r.energy_consumed_j) + ',' +
             format_double(r.energy_harvested_j) + '\n';
    }
    return out;
  }
  for (const auto& r : records) {
    ojson j;
    j["node_id"] = r.node_id;
    j["cycle_index"] = r.cycle_index;
    j["start_s"] = r.start_s;
    j["wake_s"] = r.wake_s;
    j["end_s"] = r.end_s;
    j["outcome"] = to_string(r.outcome);
    j["scap_v_start"] = r.scap_v_start;
    j["scap_v_wake"] = r.scap_v_wake;
    j["scap_v_end"] = r.scap_v_end;
    j["energy_consumed_j"] = r.energy_consumed_j;
    j["energy_harvested_j"] = r.energy_harvested_j;
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<CycleRecord> parse_cycles(std::string_view text, ExportFormat fmt) {
  std::vector<CycleRecord> out;
  if (fmt == ExportFormat::Csv) {
    for (const auto& c : csv_rows(text, kCyclesHeader)) {
      out.push_back(CycleRecord{parse_int<NodeId>(c[0]), parse_int<std::uint64_t>(c[1]), parse_double(c[2]),
                                parse_double(c[3]), parse_double(c[4]), outcome_of(c[5]), parse_double(c[6]),
                                parse_double(c[7]), parse_double(c[8]), parse_double(c[9]),
                                parse_double(c[10])});
    }
    return out;
  }
  for (const auto& j : json_lines(text)) {
    out.push_back(CycleRecord{field<NodeId>(j, "node_id"), field<std::uint64_t>(j, "cycle_index"),
                              field<double>(j, "start_s"), field<double>(j, "wake_s"), field<double>(j, "end_s"),
                              outcome_of(field<std::string>(j, "outcome")), field<double>(j, "scap_v_start"),
                              field<double>(j, "scap_v_wake"), field<double>(j, "scap_v_end"),
                              field<double>(j, "energy_consumed_j"), field<double>(j, "energy_harvested_j")});
  }
  return out;
}

std::string format_voltage(std::span<const VoltageSample> trace, ExportFormat fmt) {
  std::string out;
  if (fmt == ExportFormat::Csv) {
    out.reserve(trace.size() * 32 + 32);
    out.append(kVoltageHeader).push_back('\n');
    for (const auto& v : trace) {
      out += format_double(v.time_s) + ',' + std::to_string(v.node_id) + ',' + format_double(v.voltage_v) + '\n';
    }
    return out;
  }
  for (const auto& v : trace) {
    ojson j;
    j["time_s"] = v.time_s;
    j["node_id"] = v.node_id;
    j["voltage_v"] = v.voltage_v;
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<VoltageSample> parse_voltage(std::string_view text, ExportFormat fmt) {
  std::vector<VoltageSample> out;
  if (fmt == ExportFormat::Csv) {
    for (const auto& c : csv_rows(text, kVoltageHeader)) {
      out.push_back({parse_double(c[0]), parse_int<NodeId>(c[1]), parse_double(c[2])});
    }
    return out;
  }
  for (const auto& j : json_lines(text)) {
    out.push_back({field<double>(j, "time_s"), field<NodeId>(j, "node_id"), field<double>(j, "voltage_v")});
  }
  return out;
}

std::string format_frames(std::span<const FrameRecord> frames, ExportFormat fmt) {
  std::string out;
  if (fmt == ExportFormat::Csv) {
    out.append(kFramesHeader).push_back('\n');
    for (const auto& r : frames) {
      const auto& f = r.frame;
      out += format_double(f.sent_at_s) + ',' + format_double(r.arrive_s) + ',' + std::to_string(f.src) + ',' +
             std::to_string(f.dst) + ',' + std::string(to_string(f.link)) + ',' + std::to_string(f.channel) + ',' +
             std::string(to_string(f.kind)) + ',' + std::to_string(f.payload_bytes) + ',' +
             format_double(f.airtime_s) + ',' + (r.delivered ? "1" : "0") + '\n';
    }
    return out;
  }
  for (const auto& r : frames) {
    const auto& f = r.frame;
    ojson j;
    j["sent_s"] = f.sent_at_s;
    j["arrive_s"] = r.arrive_s;
    j["src"] = f.src;
    j["dst"] = f.dst;
    j["link"] = to_string(f.link);
    j["channel"] = f.channel;
    j["kind"] = to_string(f.kind);
    j["payload_bytes"] = f.payload_bytes;
    j["airtime_s"] = f.airtime_s;
    j["delivered"] = r.delivered;
    out += j.dump() + '\n';
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path, "cannot create directory: " + ec.message());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path, "cannot open for writing");
  f.write(content.data(), std::streamsize(content.size()));
  if (!f) throw IoError(path, "write failed");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string format_table_row(const NodeSummary& node, std::string_view illumination) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-5s %-8s node=%-3u sent=%-6llu received=%-6llu pdr=%.3f avg_scap_v=%.3f",
                node.kind == NodeKind::Ble ? "BLE" : "LIoT", std::string(illumination).c_str(), node.node_id,
                static_cast<unsigned long long>(node.sent), static_cast<unsigned long long>(node.received),
                node.pdr, node.scap_avg_v);
  return buf;
}

}  // namespace bsim
