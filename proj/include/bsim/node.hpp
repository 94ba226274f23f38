// Duty-cycle state machine for BLE and LIoT sensor nodes.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "bsim/energy.hpp"
#include "bsim/protocol.hpp"
#include "bsim/types.hpp"

namespace bsim {

enum class Phase : std::uint8_t {
  Sleeping,
  Sensing,
  Advertising,
  Exchanging,
  Uplinking,
  AwaitingRequest,
  AwaitingSleepSet,
};

std::string_view to_string(Phase p);

/// True if `from -> to` belongs to the node kind's documented phase
/// sequence, or is an abort back to Sleeping.
bool is_legal_transition(NodeKind kind, Phase from, Phase to);

enum class AdvertisingMode : std::uint8_t { Fixed, Uniform };

/// How long a BLE node advertises before the gateway connects. Uniform
/// draws from (min_s, max_s]; Fixed always uses max_s.
struct AdvertisingConfig {
  AdvertisingMode mode = AdvertisingMode::Uniform;
  double min_s = 0.5;
  double max_s = 4.0;

  bool operator==(const AdvertisingConfig&) const = default;
};

struct NodeConfig {
  NodeId node_id = 1;
  NodeKind kind = NodeKind::Ble;
  EnergyProfile profile;
  HarvesterCurve harvester;
  Supercap supercap;
  /// Fraction of inflowing energy that reaches the buffer.
  double charge_efficiency = 1.0;
  /// Duty-cycle stretch applied on top of the balance-point cycle length.
  double margin = 0.05;
  SensorMask sensors = kAllSensors;
  AdvertisingConfig advertising;
  /// Sleep used after a brown-out or while no feasible schedule exists.
  double backoff_s = 60.0;
  /// Await steps time out after this multiple of their nominal duration.
  double timeout_factor = 2.0;
  AirtimeModel airtime;

  bool operator==(const NodeConfig&) const = default;
};

/// Throws std::invalid_argument on the first violated invariant.
void validate(const NodeConfig& cfg);

/// Stage kinds, in order, that a node kind's profile must contain.
std::vector<StageKind> expected_stages(NodeKind kind);

NodeConfig default_ble_node(NodeId id);
NodeConfig default_liot_node(NodeId id);

/// Synthetic indoor environment: each channel is
///   baseline + amplitude * sin(2*pi*t/period) + noise * (2u - 1)
/// with u uniform in [0, 1) derived from (seed, node, channel, t).
struct EnvironmentModel {
  struct Channel {
    double baseline;
    double amplitude;
    double period_s;
    double noise;
    bool operator==(const Channel&) const = default;
  };

  std::array<Channel, kSensorChannelCount> channels{{
      {21.0, 1.5, 86400.0, 0.0},
      {40.0, 5.0, 86400.0, 0.0},
      {1013.0, 2.0, 86400.0, 0.0},
      {50000.0, 5000.0, 86400.0, 0.0},
  }};
  std::uint64_t seed = 1;

  bool operator==(const EnvironmentModel&) const = default;
};

SensorSample read_sensors(const NodeConfig& cfg, const EnvironmentModel& env, double t_s);

struct SleepMode {
  enum class Kind : std::uint8_t { LocalSolve, GatewayAssigned };
  Kind kind = Kind::LocalSolve;
  double assigned_s = 0.0;

  static SleepMode local() { return {}; }
  static SleepMode assigned(double seconds) { return {Kind::GatewayAssigned, seconds}; }
};

struct ScheduleDecision {
  /// Seconds to arm the sleep timer with. For Infeasible this is the backoff.
  double sleep_s;
  SleepSolution::Kind kind;
};

/// LocalSolve solves the energy balance at harvester(lux) and stretches the
/// whole cycle by (1 + margin); GatewayAssigned passes the value through.
ScheduleDecision schedule_next_cycle(const NodeConfig& cfg, double lux, SleepMode mode);

struct NodeState {
  Phase phase = Phase::Sleeping;
  double phase_start_s = 0.0;
  double phase_deadline_s = 0.0;
  /// Time the buffer hits v_min if the current active phase keeps running.
  double depletion_at_s = std::numeric_limits<double>::infinity();
  /// Buffer state at phase_start_s.
  Supercap supercap;
  double load_mw = 0.0;
  double harvest_mw = 0.0;
  double next_sleep_duration_s = 0.0;
  bool depleted = false;
  /// Last schedule was infeasible; the next wake re-solves before starting.
  bool reevaluate = false;

  ExchangeSession session;
  std::optional<SensorSample> sample;

  std::uint64_t cycle_index = 0;
  double cycle_start_s = 0.0;
  double wake_s = 0.0;
  double cycle_v_start = 0.0;
  double wake_v = 0.0;
  double cycle_consumed_j = 0.0;
  double cycle_harvested_j = 0.0;
  double total_consumed_j = 0.0;
  double total_harvested_j = 0.0;

  /// Next time the node needs a timer callback.
  double next_timer_s() const;
  bool operator==(const NodeState&) const = default;
};

struct NodeContext {
  double now_s = 0.0;
  double lux = 0.0;
  const EnvironmentModel* env = nullptr;
};

struct FrameSent {
  Frame frame;
};

struct PhaseEntered {
  Phase from;
  Phase to;
  double at_s;
};

struct CycleClosed {
  CycleRecord record;
};

/// Energy moved in and out of the node since its previous debit.
struct EnergyDebited {
  double at_s;
  double consumed_j;
  double harvested_j;
};

using NodeEmission = std::variant<FrameSent, PhaseEntered, CycleClosed, EnergyDebited>;

struct NodeStep {
  NodeState state;
  std::vector<NodeEmission> emissions;
};

/// Initial state: Sleeping, with the first wake from a local solve.
NodeState boot(const NodeConfig& cfg, const NodeContext& ctx);

/// Buffer voltage at time t (>= phase start) under the current phase power.
double voltage_at(const NodeState& state, const NodeConfig& cfg, double t_s);

/// Handles a timer expiry (incoming == nullopt) or a received frame.
/// Requires ctx.now_s >= state.phase_start_s.
NodeStep advance(const NodeState& state, const NodeConfig& cfg, const NodeContext& ctx,
                 const std::optional<Frame>& incoming = std::nullopt);

/// Settles energy up to ctx.now_s and closes the running cycle as Incomplete.
NodeStep finalize(const NodeState& state, const NodeConfig& cfg, const NodeContext& ctx);

}  // namespace bsim
