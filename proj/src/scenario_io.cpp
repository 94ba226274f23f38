#include "bsim/scenario_io.hpp"

#include <algorithm>
#include <set>

namespace bsim {

using nlohmann::json;

namespace {

// "nodes[0].supercap.v_min_v" -> "/nodes/0/supercap/v_min_v"
std::string to_pointer(std::string_view dotted) {
  if (dotted.empty() || dotted.front() == '/') return std::string(dotted);
  std::string out = "/";
  for (char c : dotted) {
    if (c == '.' || c == '[') {
      if (out.back() != '/') out += '/';
    } else if (c != ']') {
      out += c;
    }
  }
  return out;
}

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where(), "expected an object");
  }

  std::string where() const { return path_.empty() ? "/" : path_; }
  std::string at(std::string_view key) const { return path_ + "/" + std::string(key); }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(std::string_view key) {
    const json* v = find(key);
    if (!v) throw ValidationError(at(key), "missing required field");
    return *v;
  }

  void number(std::string_view key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ValidationError(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(std::string_view key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ValidationError(at(key), "expected a non-negative integer");
      }
      out = v->get<Int>();
    }
  }

  void string(std::string_view key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ValidationError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
auto rethrow_at(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(where, e.what());
  }
}

// ---------------------------------------------------------------------------
// Writers

json mask_to_json(SensorMask mask) {
  json arr = json::array();
  for (int c = 0; c < kSensorChannelCount; ++c) {
    if (mask & mask_of(SensorChannel(c))) arr.push_back(std::string(to_string(SensorChannel(c))));
  }
  return arr;
}

json airtime_to_json(const AirtimeModel& m) {
  json j = json::object();
  for (int l = 0; l < 4; ++l) {
    const auto& t = m.timing(LinkType(l));
    j[std::string(to_string(LinkType(l)))] = {{"overhead_s", t.overhead_s}, {"per_byte_s", t.per_byte_s}};
  }
  return j;
}

json harvester_to_json(const HarvesterCurve& h) {
  json pts = json::array();
  for (const auto& p : h.points()) pts.push_back(json::array({p.lux, p.power_mw}));
  return {{"points", pts}};
}

json node_to_json(const NodeConfig& n, const AirtimeModel& shared) {
  json j;
  j["id"] = n.node_id;
  j["kind"] = std::string(to_string(n.kind));
  j["profile"] = profile_to_json(n.profile);
  j["harvester"] = harvester_to_json(n.harvester);
  j["supercap"] = {{"capacitance_f", n.supercap.capacitance_f},
                   {"voltage_v", n.supercap.voltage_v},
                   {"v_min_v", n.supercap.v_min_v},
                   {"v_max_v", n.supercap.v_max_v}};
  j["charge_efficiency"] = n.charge_efficiency;
  j["margin"] = n.margin;
  j["sensors"] = mask_to_json(n.sensors);
  j["advertising"] = {{"mode", n.advertising.mode == AdvertisingMode::Fixed ? "fixed" : "uniform"},
                      {"min_s", n.advertising.min_s},
                      {"max_s", n.advertising.max_s}};
  j["backoff_s"] = n.backoff_s;
  j["timeout_factor"] = n.timeout_factor;
  if (!(n.airtime == shared)) j["airtime"] = airtime_to_json(n.airtime);
  return j;
}

json illumination_to_json(const IlluminationProfile& p) {
  json j;
  switch (p.kind) {
    case IlluminationProfile::Kind::Constant:
      j["kind"] = "constant";
      j["lux"] = p.lux;
      break;
    case IlluminationProfile::Kind::Step: {
      j["kind"] = "step";
      json segs = json::array();
      for (const auto& s : p.segments) segs.push_back({{"until_s", s.until_s}, {"lux", s.lux}});
      j["segments"] = segs;
      break;
    }
    case IlluminationProfile::Kind::Sinusoid:
      j["kind"] = "sinusoid";
      j["mean"] = p.mean;
      j["amplitude"] = p.amplitude;
      j["period_s"] = p.period_s;
      j["phase_s"] = p.phase_s;
      break;
  }
  j["jitter"] = p.jitter;
  j["jitter_period_s"] = p.jitter_period_s;
  return j;
}

// ---------------------------------------------------------------------------
// Readers

SensorMask read_mask(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where, "expected a list of sensor names");
  SensorMask mask = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& v = j[i];
    auto c = v.is_string() ? sensor_channel_from_string(v.get<std::string>()) : std::nullopt;
    if (!c) {
      throw ValidationError(where + "/" + std::to_string(i),
                            "expected one of temperature, humidity, pressure, gas");
    }
    mask |= mask_of(*c);
  }
  return mask;
}

void read_airtime(const json& j, const std::string& where, AirtimeModel& m) {
  ObjectReader r(j, where);
  for (int l = 0; l < 4; ++l) {
    const auto name = std::string(to_string(LinkType(l)));
    if (const json* v = r.find(name)) {
      LinkTiming t = m.timing(LinkType(l));
      ObjectReader lr(*v, r.at(name));
      lr.number("overhead_s", t.overhead_s);
      lr.number("per_byte_s", t.per_byte_s);
      lr.finish();
      if (!(t.overhead_s >= 0.0) || !(t.per_byte_s >= 0.0) || t.overhead_s + t.per_byte_s <= 0.0) {
        throw ValidationError(r.at(name), "timings must be >= 0 and not both zero");
      }
      switch (LinkType(l)) {
        case LinkType::BleAdv: m.ble_adv = t; break;
        case LinkType::BleConn: m.ble_conn = t; break;
        case LinkType::IrUplink: m.ir_uplink = t; break;
        case LinkType::VlcDownlink: m.vlc_downlink = t; break;
      }
    }
  }
  r.finish();
}

HarvesterCurve read_harvester(const json& j, const std::string& where) {
  if (j.is_string()) {
    auto h = presets::harvester_by_name(j.get<std::string>());
    if (!h) throw ValidationError(where, "unknown harvester preset '" + j.get<std::string>() + "'");
    return *h;
  }
  ObjectReader r(j, where);
  const json& pts = r.require("points");
  r.finish();
  if (!pts.is_array()) throw ValidationError(r.at("points"), "expected a list of [lux, power_mw] pairs");
  std::vector<HarvesterCurve::Point> points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ValidationError(r.at("points") + "/" + std::to_string(i), "expected [lux, power_mw]");
    }
    points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return rethrow_at(r.at("points"), [&] { return HarvesterCurve(std::move(points)); });
}

EnergyProfile read_profile(const json& j, const std::string& where) {
  if (j.is_string()) {
    auto p = presets::profile_by_name(j.get<std::string>());
    if (!p) throw ValidationError(where, "unknown profile preset '" + j.get<std::string>() + "'");
    return *p;
  }
  return profile_from_json(j, where);
}

NodeConfig read_node(const json& j, const std::string& where, const AirtimeModel& shared) {
  ObjectReader r(j, where);
  const json& kind_j = r.require("kind");
  auto kind = kind_j.is_string() ? node_kind_from_string(kind_j.get<std::string>()) : std::nullopt;
  if (!kind) throw ValidationError(r.at("kind"), "expected \"ble\" or \"liot\"");
  NodeId id = 1;
  r.integer("id", id);
  if (id == kGatewayId) throw ValidationError(r.at("id"), "id 0 is reserved for the gateway");

  NodeConfig n = *kind == NodeKind::Ble ? default_ble_node(id) : default_liot_node(id);
  n.airtime = shared;
  if (const json* v = r.find("profile")) n.profile = read_profile(*v, r.at("profile"));
  if (const json* v = r.find("harvester")) n.harvester = read_harvester(*v, r.at("harvester"));
  if (const json* v = r.find("supercap")) {
    ObjectReader sr(*v, r.at("supercap"));
    sr.number("capacitance_f", n.supercap.capacitance_f);
    sr.number("voltage_v", n.supercap.voltage_v);
    sr.number("v_min_v", n.supercap.v_min_v);
    sr.number("v_max_v", n.supercap.v_max_v);
    sr.finish();
    rethrow_at(sr.where(), [&] { validate(n.supercap); });
  }
  r.number("charge_efficiency", n.charge_efficiency);
  r.number("margin", n.margin);
  if (const json* v = r.find("sensors")) n.sensors = read_mask(*v, r.at("sensors"));
  if (const json* v = r.find("advertising")) {
    ObjectReader ar(*v, r.at("advertising"));
    std::string mode = n.advertising.mode == AdvertisingMode::Fixed ? "fixed" : "uniform";
    ar.string("mode", mode);
    if (mode == "fixed") {
      n.advertising.mode = AdvertisingMode::Fixed;
    } else if (mode == "uniform") {
      n.advertising.mode = AdvertisingMode::Uniform;
    } else {
      throw ValidationError(ar.at("mode"), "expected \"fixed\" or \"uniform\"");
    }
    ar.number("min_s", n.advertising.min_s);
    ar.number("max_s", n.advertising.max_s);
    ar.finish();
  }
  r.number("backoff_s", n.backoff_s);
  r.number("timeout_factor", n.timeout_factor);
  if (const json* v = r.find("airtime")) read_airtime(*v, r.at("airtime"), n.airtime);
  r.finish();
  rethrow_at(where, [&] { validate(n); });
  return n;
}

IlluminationProfile read_illumination(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  IlluminationProfile p;
  std::string kind = "constant";
  r.string("kind", kind);
  if (kind == "constant") {
    p.kind = IlluminationProfile::Kind::Constant;
    r.number("lux", p.lux);
  } else if (kind == "step") {
    p.kind = IlluminationProfile::Kind::Step;
    const json& segs = r.require("segments");
    if (!segs.is_array()) throw ValidationError(r.at("segments"), "expected a list");
    for (std::size_t i = 0; i < segs.size(); ++i) {
      ObjectReader sr(segs[i], r.at("segments") + "/" + std::to_string(i));
      IlluminationProfile::Segment s{std::numeric_limits<double>::infinity(), 0.0};
      sr.number("until_s", s.until_s);
      sr.number("lux", s.lux);
      sr.finish();
      p.segments.push_back(s);
    }
  } else if (kind == "sinusoid") {
    p.kind = IlluminationProfile::Kind::Sinusoid;
    r.number("mean", p.mean);
    r.number("amplitude", p.amplitude);
    r.number("period_s", p.period_s);
    r.number("phase_s", p.phase_s);
  } else {
    throw ValidationError(r.at("kind"), "expected constant, step or sinusoid");
  }
  r.number("jitter", p.jitter);
  r.number("jitter_period_s", p.jitter_period_s);
  r.finish();
  return p;
}

ChannelModel read_channel(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  ChannelModel c;
  if (const json* v = r.find("loss")) {
    if (v->is_number()) {
      c.set_all(v->get<double>());
    } else {
      ObjectReader lr(*v, r.at("loss"));
      for (int l = 0; l < 4; ++l) lr.number(to_string(LinkType(l)), c.loss[std::size_t(l)]);
      lr.finish();
    }
  }
  r.finish();
  return c;
}

EnvironmentModel read_environment(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  EnvironmentModel env;
  for (int c = 0; c < kSensorChannelCount; ++c) {
    const auto name = std::string(to_string(SensorChannel(c)));
    if (const json* v = r.find(name)) {
      auto& ch = env.channels[std::size_t(c)];
      ObjectReader cr(*v, r.at(name));
      cr.number("baseline", ch.baseline);
      cr.number("amplitude", ch.amplitude);
      cr.number("period_s", ch.period_s);
      cr.number("noise", ch.noise);
      cr.finish();
      if (!(ch.period_s > 0.0)) throw ValidationError(cr.at("period_s"), "must be > 0");
      if (!(ch.noise >= 0.0)) throw ValidationError(cr.at("noise"), "must be >= 0");
    }
  }
  r.finish();
  return env;
}

}  // namespace

// ---------------------------------------------------------------------------

json profile_to_json(const EnergyProfile& profile) {
  json stages = json::array();
  for (const auto& s : profile.active_stages) {
    stages.push_back({{"kind", std::string(to_string(s.kind))},
                      {"current_ma", s.current_ma},
                      {"duration_s", s.duration_s}});
  }
  return {{"voltage_v", profile.voltage_v}, {"sleep_current_ma", profile.sleep_current_ma}, {"stages", stages}};
}

EnergyProfile profile_from_json(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  EnergyProfile p;
  r.number("voltage_v", p.voltage_v);
  r.number("sleep_current_ma", p.sleep_current_ma);
  const json& stages = r.require("stages");
  r.finish();
  if (!stages.is_array()) throw ValidationError(r.at("stages"), "expected a list");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    ObjectReader sr(stages[i], r.at("stages") + "/" + std::to_string(i));
    std::string name;
    sr.string("kind", name);
    auto kind = stage_kind_from_string(name);
    if (!kind) throw ValidationError(sr.at("kind"), "unknown stage '" + name + "'");
    Stage s{*kind, 0.0, 0.0};
    sr.number("current_ma", s.current_ma);
    sr.number("duration_s", s.duration_s);
    sr.finish();
    p.active_stages.push_back(s);
  }
  rethrow_at(r.where(), [&] { validate(p); });
  return p;
}

json to_json(const Scenario& s) {
  json j;
  j["version"] = kScenarioVersion;
  j["label"] = s.label;
  j["duration_s"] = s.duration_s;
  j["seed"] = s.seed;
  j["sample_interval_s"] = s.sample_interval_s;
  j["illumination"] = illumination_to_json(s.illumination);
  json loss = json::object();
  for (int l = 0; l < 4; ++l) loss[std::string(to_string(LinkType(l)))] = s.channel.loss[std::size_t(l)];
  j["channel"] = {{"loss", loss}};
  j["gateway"] = {{"liot_request", mask_to_json(s.gateway.liot_request_mask)},
                  {"liot_session_timeout_s", s.gateway.liot_session_timeout_s}};
  json env = json::object();
  for (int c = 0; c < kSensorChannelCount; ++c) {
    const auto& ch = s.environment.channels[std::size_t(c)];
    env[std::string(to_string(SensorChannel(c)))] = {
        {"baseline", ch.baseline}, {"amplitude", ch.amplitude}, {"period_s", ch.period_s}, {"noise", ch.noise}};
  }
  j["environment"] = env;
  j["airtime"] = airtime_to_json(s.gateway.airtime);
  json nodes = json::array();
  for (const auto& n : s.nodes) nodes.push_back(node_to_json(n, s.gateway.airtime));
  j["nodes"] = nodes;
  j["output"] = {{"dir", s.output_dir}};
  return j;
}

Scenario scenario_from_json(const json& doc) {
  ObjectReader r(doc, "");
  const json& version = r.require("version");
  if (!version.is_number_integer()) throw ValidationError("/version", "expected an integer");
  if (version.get<std::int64_t>() > kScenarioVersion) {
    throw ValidationError("/version", "schema version " + version.dump() + " is newer than supported (" +
                                          std::to_string(kScenarioVersion) + ")");
  }
  if (version.get<std::int64_t>() < 1) throw ValidationError("/version", "must be >= 1");

  Scenario s;
  r.string("label", s.label);
  r.number("duration_s", s.duration_s);
  r.integer("seed", s.seed);
  r.number("sample_interval_s", s.sample_interval_s);
  if (const json* v = r.find("illumination")) s.illumination = read_illumination(*v, "/illumination");
  if (const json* v = r.find("channel")) s.channel = read_channel(*v, "/channel");
  if (const json* v = r.find("environment")) s.environment = read_environment(*v, "/environment");
  if (const json* v = r.find("airtime")) read_airtime(*v, "/airtime", s.gateway.airtime);
  if (const json* v = r.find("gateway")) {
    ObjectReader gr(*v, "/gateway");
    if (const json* m = gr.find("liot_request")) s.gateway.liot_request_mask = read_mask(*m, gr.at("liot_request"));
    gr.number("liot_session_timeout_s", s.gateway.liot_session_timeout_s);
    gr.finish();
  }
  const json& nodes = r.require("nodes");
  if (!nodes.is_array()) throw ValidationError("/nodes", "expected a list");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    s.nodes.push_back(read_node(nodes[i], "/nodes/" + std::to_string(i), s.gateway.airtime));
  }
  if (const json* v = r.find("output")) {
    ObjectReader orr(*v, "/output");
    orr.string("dir", s.output_dir);
    orr.finish();
  }
  r.finish();

  try {
    validate(s);
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    throw ValidationError(to_pointer(e.where()),
                          colon == std::string::npos || e.where().empty() ? what : what.substr(colon + 2));
  }
  return s;
}

json parse_scenario_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    throw ValidationError("line " + std::to_string(line) + ", column " + std::to_string(col), msg);
  }
}

std::uint64_t scenario_hash(const Scenario& scenario) {
  json j = to_json(scenario);
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

struct PresetSpec {
  const char* name;
  NodeKind kind;
  double lux;
  double initial_v;
  double session_pdr;
};

constexpr PresetSpec kPresets[] = {
    {"ble-700lx", NodeKind::Ble, 700.0, 4.463, 0.991},
    {"ble-500lx", NodeKind::Ble, 500.0, 4.416, 0.912},
    {"liot-700lx", NodeKind::Liot, 700.0, 4.235, 1.0},
    {"liot-500lx", NodeKind::Liot, 500.0, 4.353, 1.0},
};

const PresetSpec* find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return &p;
  }
  return nullptr;
}

Scenario build_preset(const PresetSpec& p) {
  Scenario s;
  s.duration_s = 28800.0;
  s.seed = 1;
  s.label = std::to_string(int(p.lux)) + "lx";
  s.illumination = IlluminationProfile::constant(p.lux);
  NodeConfig n = p.kind == NodeKind::Ble ? default_ble_node(1) : default_liot_node(1);
  n.supercap.voltage_v = p.initial_v;
  if (p.kind == NodeKind::Ble) {
    n.advertising.mode = AdvertisingMode::Fixed;
    const double loss = per_frame_loss_for_session_pdr(p.session_pdr);
    s.channel.loss[std::size_t(LinkType::BleAdv)] = loss;
    s.channel.loss[std::size_t(LinkType::BleConn)] = loss;
  }
  s.nodes.push_back(n);
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

bool is_preset(std::string_view name) { return find_preset(name) != nullptr; }

json preset_document(std::string_view name) {
  const PresetSpec* p = find_preset(name);
  if (!p) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("scenario", "unknown preset '" + std::string(name) + "' (known: " + known + ")");
  }
  return to_json(build_preset(*p));
}

namespace {

// Bare words name presets; anything with a separator, an extension or an
// existing file on disk is treated as a path.
bool looks_like_path(std::string_view arg) {
  const std::filesystem::path p{std::string(arg)};
  return arg.find('/') != std::string_view::npos || p.has_extension() || std::filesystem::exists(p);
}

}  // namespace

json load_scenario_document(std::string_view preset_or_path) {
  if (is_preset(preset_or_path)) return preset_document(preset_or_path);
  if (!looks_like_path(preset_or_path)) return preset_document(preset_or_path);
  const std::filesystem::path path{std::string(preset_or_path)};
  const std::string text = read_file(path);
  try {
    return parse_scenario_text(text);
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    throw ValidationError(path.string() + ":" + e.where(), what.substr(what.find(": ") + 2));
  }
}

Scenario load_scenario(std::string_view preset_or_path) {
  return scenario_from_json(load_scenario_document(preset_or_path));
}

void set_param(json& doc, const std::string& pointer, const json& value) {
  json::json_pointer ptr;
  try {
    ptr = json::json_pointer(pointer);
  } catch (const json::exception&) {
    throw ValidationError(pointer, "not a valid JSON pointer (expected e.g. /illumination/lux)");
  }
  if (pointer.empty() || !doc.contains(ptr)) throw ValidationError(pointer, "no such parameter in the scenario");
  json& target = doc[ptr];
  if (pointer == "/channel/loss" && value.is_number() && target.is_object()) {
    for (auto& [k, v] : target.items()) v = value;
    return;
  }
  if (target.is_number() && !value.is_number()) throw ValidationError(pointer, "expected a number");
  target = value;
}

EnergyProfile load_profile(std::string_view name_or_path) {
  if (auto p = presets::profile_by_name(name_or_path)) return *p;
  const std::filesystem::path path{std::string(name_or_path)};
  if (!looks_like_path(name_or_path)) {
    throw ValidationError("profile", "'" + std::string(name_or_path) +
                                         "' is neither a built-in profile (ble-table1, liot-table2) nor a file");
  }
  return profile_from_json(parse_scenario_text(read_file(path)), "");
}

}  // namespace bsim
