// Value types shared between the node, protocol, kernel and metrics layers.

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace bsim {

using NodeId = std::uint32_t;
inline constexpr NodeId kGatewayId = 0;

enum class NodeKind { Ble, Liot };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> node_kind_from_string(std::string_view name);

enum class SensorChannel : std::uint8_t { Temperature = 0, Humidity = 1, Pressure = 2, Gas = 3 };

inline constexpr int kSensorChannelCount = 4;

/// Bit set over SensorChannel.
using SensorMask = std::uint8_t;
inline constexpr SensorMask kAllSensors = 0x0F;

constexpr SensorMask mask_of(SensorChannel c) { return SensorMask(1u << unsigned(c)); }
int channel_count(SensorMask mask);

std::string_view to_string(SensorChannel c);
std::optional<SensorChannel> sensor_channel_from_string(std::string_view name);

struct SensorSample {
  double timestamp_s = 0.0;
  double temperature_c = 0.0;
  double humidity_rh = 0.0;
  double pressure_hpa = 0.0;
  double gas_ohm = 0.0;

  bool operator==(const SensorSample&) const = default;
};

enum class Outcome : std::uint8_t {
  Delivered,
  FailedTimeout,
  FailedNoGateway,
  FailedProtocolViolation,
  FailedDepleted,
  /// Cycle still running when the simulation ended; not counted as sent.
  Incomplete,
};

std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from_string(std::string_view name);

/// One duty cycle: the sleep that precedes it plus its active phase.
struct CycleRecord {
  NodeId node_id = 0;
  std::uint64_t cycle_index = 0;
  double start_s = 0.0;
  double wake_s = 0.0;
  double end_s = 0.0;
  Outcome outcome = Outcome::Incomplete;
  double scap_v_start = 0.0;
  double scap_v_wake = 0.0;
  double scap_v_end = 0.0;
  double energy_consumed_j = 0.0;
  double energy_harvested_j = 0.0;

  bool operator==(const CycleRecord&) const = default;
};

struct VoltageSample {
  double time_s = 0.0;
  NodeId node_id = 0;
  double voltage_v = 0.0;

  bool operator==(const VoltageSample&) const = default;
};

}  // namespace bsim
