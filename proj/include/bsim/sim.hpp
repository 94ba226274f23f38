// Deterministic discrete-event kernel: virtual clock, event queue, gateway
// agent, lossy channel and illumination.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsim/metrics.hpp"
#include "bsim/node.hpp"
#include "bsim/protocol.hpp"
#include "bsim/random.hpp"

namespace bsim {

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// ---------------------------------------------------------------------------
// Illumination

struct IlluminationProfile {
  enum class Kind : std::uint8_t { Constant, Step, Sinusoid };

  struct Segment {
    /// Segment applies for t < until_s; the last segment is open-ended.
    double until_s;
    double lux;
    bool operator==(const Segment&) const = default;
  };

  Kind kind = Kind::Constant;
  double lux = 700.0;
  std::vector<Segment> segments;
  double mean = 600.0;
  double amplitude = 100.0;
  double period_s = 28800.0;
  double phase_s = 0.0;
  /// Relative band, e.g. 0.05 for +-5 %, redrawn every jitter_period_s.
  double jitter = 0.0;
  double jitter_period_s = 60.0;
  std::uint64_t jitter_seed = 1;
  /// Evaluation is rejected beyond this time.
  double horizon_s = std::numeric_limits<double>::infinity();

  static IlluminationProfile constant(double lux);

  bool operator==(const IlluminationProfile&) const = default;
};

void validate(const IlluminationProfile& profile);

/// Sinusoid: mean + amplitude * sin(2*pi*(t + phase)/period). Throws
/// std::out_of_range for t < 0 or t > horizon.
double lux_at(const IlluminationProfile& profile, double t_s);

// ---------------------------------------------------------------------------
// Channel

struct ChannelModel {
  /// Per-frame loss probability indexed by LinkType.
  std::array<double, 4> loss{0.0, 0.0, 0.0, 0.0};

  double loss_for(LinkType link) const { return loss[std::size_t(link)]; }
  void set_all(double p) { loss.fill(p); }
  bool operator==(const ChannelModel&) const = default;
};

enum class Delivery : std::uint8_t { Delivered, Lost };

inline constexpr std::uint64_t kChannelStream = 1;
inline constexpr std::uint64_t kGatewayStream = 2;

/// Uniform draw in [0, 1) tied to one transmission (seed, endpoints, kind,
/// send time). Because the draw does not depend on how many frames came
/// before, a frame lost at some loss probability is lost at every higher one.
double channel_draw(std::uint64_t seed, const Frame& frame);

/// Lost when u < loss(link).
Delivery deliver(const Frame& frame, const ChannelModel& channel, double u);

/// Frames in one complete exchange (both protocols use five).
inline constexpr int kFramesPerSession = 5;

/// Per-frame loss that yields `session_pdr` when every frame of an
/// `frames`-frame session must arrive.
double per_frame_loss_for_session_pdr(double session_pdr, int frames = kFramesPerSession);

// ---------------------------------------------------------------------------
// Gateway

struct GatewayConfig {
  SensorMask liot_request_mask = kAllSensors;
  /// A LIoT session blocks the optical transceiver at most this long.
  double liot_session_timeout_s = 30.0;
  AirtimeModel airtime;

  bool operator==(const GatewayConfig&) const = default;
};

struct OutgoingFrame {
  Frame frame;
  double arrive_s;
};

/// Rounds a solved sleep time to the whole seconds carried by SleepSet.
std::uint32_t sleep_set_seconds(const ScheduleDecision& d);

class Gateway {
 public:
  Gateway(GatewayConfig cfg, const std::vector<NodeConfig>& nodes, std::uint64_t seed);

  /// Frames to transmit in reaction to `frame` arriving at `now_s`.
  std::vector<OutgoingFrame> on_frame(const Frame& frame, double now_s);

  std::uint64_t readings_received() const { return readings_; }

 private:
  std::vector<OutgoingFrame> on_ble(const Frame& frame, const NodeConfig& node, double now_s);
  std::vector<OutgoingFrame> on_liot(const Frame& frame, const NodeConfig& node, double now_s);

  GatewayConfig cfg_;
  std::map<NodeId, NodeConfig> nodes_;
  std::map<NodeId, std::uint64_t> connections_;
  double window_draw(const Frame& adv) const;

  std::uint64_t seed_;
  NodeId liot_busy_ = kGatewayId;
  double liot_busy_until_ = 0.0;
  double liot_reported_lux_ = 0.0;
  std::uint64_t readings_ = 0;
};

// ---------------------------------------------------------------------------
// Events

enum class EventKind : std::uint8_t { FrameDelivered, FrameLost, TimerFired, SupercapSampled, RunEnded };

struct Event {
  double time_s = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::TimerFired;
  NodeId node = 0;
  std::uint64_t generation = 0;
  Frame frame;
};

/// Pops in (time, kind, seq) order: at equal times frame arrivals are seen
/// before timers, and insertion order breaks remaining ties.
class EventQueue {
 public:
  void push(Event e);
  Event pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const;
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario and run

struct Scenario {
  double duration_s = 28800.0;
  std::vector<NodeConfig> nodes;
  GatewayConfig gateway;
  ChannelModel channel;
  IlluminationProfile illumination;
  EnvironmentModel environment;
  double sample_interval_s = 1.0;
  std::uint64_t seed = 1;
  /// Labels the illumination in printed tables, e.g. "700lx".
  std::string label;
  /// Where the CLI writes outputs; not used by the kernel.
  std::string output_dir;

  bool operator==(const Scenario&) const = default;
};

/// Throws ValidationError naming the offending field.
void validate(const Scenario& scenario);

struct PhaseTransition {
  double time_s;
  NodeId node;
  Phase from;
  Phase to;
};

struct NodeTotals {
  NodeId node = 0;
  double consumed_j = 0.0;
  double harvested_j = 0.0;
  double final_voltage_v = 0.0;
};

struct RunResult {
  RunSummary summary;
  std::vector<CycleRecord> cycles;
  std::vector<VoltageSample> voltage;
  std::vector<FrameRecord> frames;
  std::vector<PhaseTransition> transitions;
  /// Energy debited per node as reported by the node machines.
  std::vector<NodeTotals> totals;
  std::uint64_t events_processed = 0;
};

/// Executes the scenario to its duration. Identical scenarios (including
/// seed) give identical results.
RunResult run(const Scenario& scenario);

}  // namespace bsim
