#include "bsim/types.hpp"

#include <array>
#include <bit>
#include <utility>

namespace bsim {
namespace {

constexpr std::array<std::pair<Outcome, std::string_view>, 6> kOutcomeNames{{
    {Outcome::Delivered, "delivered"},
    {Outcome::FailedTimeout, "failed_timeout"},
    {Outcome::FailedNoGateway, "failed_no_gateway"},
    {Outcome::FailedProtocolViolation, "failed_protocol_violation"},
    {Outcome::FailedDepleted, "failed_depleted"},
    {Outcome::Incomplete, "incomplete"},
}};

constexpr std::array<std::string_view, kSensorChannelCount> kChannelNames{
    "temperature", "humidity", "pressure", "gas"};

}  // namespace

std::string_view to_string(NodeKind kind) { return kind == NodeKind::Ble ? "ble" : "liot"; }

std::optional<NodeKind> node_kind_from_string(std::string_view name) {
  if (name == "ble") return NodeKind::Ble;
  if (name == "liot") return NodeKind::Liot;
  return std::nullopt;
}

int channel_count(SensorMask mask) { return std::popcount(unsigned(mask & kAllSensors)); }

std::string_view to_string(SensorChannel c) { return kChannelNames[std::size_t(c)]; }

std::optional<SensorChannel> sensor_channel_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
    if (kChannelNames[i] == name) return SensorChannel(i);
  }
  return std::nullopt;
}

std::string_view to_string(Outcome o) {
  for (const auto& [k, n] : kOutcomeNames) {
    if (k == o) return n;
  }
  return "?";
}

std::optional<Outcome> outcome_from_string(std::string_view name) {
  for (const auto& [k, n] : kOutcomeNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

}  // namespace bsim
