// Frame-level models of the BLE and LIoT node/gateway exchanges.

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "bsim/types.hpp"

namespace bsim {

enum class LinkType : std::uint8_t { BleAdv, BleConn, IrUplink, VlcDownlink };

enum class FrameKind : std::uint8_t {
  AdvEss,
  ConnReq,
  EssAttrRequest,
  EssAttrData,
  ConfigOrDisconnect,
  NodeIdLux,
  SensorRequest,
  SensorData,
  SleepSet,
  Ack,
};

std::string_view to_string(LinkType link);
std::string_view to_string(FrameKind kind);
std::optional<LinkType> link_type_from_string(std::string_view name);

/// The only link a frame kind may travel on.
LinkType link_for(FrameKind kind);
bool is_ble(LinkType link);

inline constexpr std::uint8_t kFirstAdvChannel = 37;
inline constexpr std::uint8_t kLastAdvChannel = 39;
inline constexpr std::uint8_t kDataChannelCount = 37;

/// Bytes one sensor channel occupies in EssAttrData / SensorData payloads.
inline constexpr std::uint32_t kSensorBytesPerChannel = 10;

struct Frame {
  NodeId src = 0;
  NodeId dst = 0;
  LinkType link = LinkType::BleAdv;
  /// BLE channel index; 0 for optical links.
  std::uint8_t channel = 0;
  FrameKind kind = FrameKind::AdvEss;
  std::uint32_t payload_bytes = 0;
  double airtime_s = 0.0;
  double sent_at_s = 0.0;

  // Payload fields; only the ones relevant to `kind` are meaningful.
  double lux = 0.0;
  SensorMask sensor_mask = 0;
  std::uint32_t sleep_s = 0;
  std::optional<SensorSample> sample;

  double arrives_at_s() const { return sent_at_s + airtime_s; }
  bool operator==(const Frame&) const = default;
};

/// Throws std::invalid_argument when the link does not match the kind, the
/// channel is outside the link's range or the airtime is not positive.
void validate(const Frame& frame);

struct LinkTiming {
  double overhead_s;
  double per_byte_s;
  bool operator==(const LinkTiming&) const = default;
};

/// Linear airtime model per link. Defaults are calibrated so that the BLE
/// connection exchange takes 1.3 s and the LIoT stages take 0.428 s
/// (ID+lux uplink and sensor request), 3.58 s (full upload) and 0.078 s
/// (sleep-set and ack).
struct AirtimeModel {
  LinkTiming ble_adv{0.0001, 0.000008};
  LinkTiming ble_conn{0.4, 0.1 / 44.0};
  LinkTiming ir_uplink{0.02, 0.089};
  LinkTiming vlc_downlink{0.046, 0.006};

  const LinkTiming& timing(LinkType link) const;
  bool operator==(const AirtimeModel&) const = default;
};

/// overhead(link) + payload_bytes * per_byte(link). Throws
/// std::invalid_argument if `link` is not the link for `kind`.
double frame_airtime(FrameKind kind, std::uint32_t payload_bytes, LinkType link,
                     const AirtimeModel& model = {});

/// Canonical payload size for a frame kind; `mask` sizes sensor data frames.
std::uint32_t payload_size(FrameKind kind, SensorMask mask = kAllSensors);

/// Builds a frame on its canonical link with canonical payload size.
Frame make_frame(FrameKind kind, NodeId src, NodeId dst, double now_s,
                 const AirtimeModel& model, SensorMask mask = kAllSensors,
                 std::uint8_t channel = 0);

/// Node-side view of one data exchange. `outcome` stays Incomplete while
/// the session is pending.
struct ExchangeSession {
  enum class Step : std::uint8_t {
    Idle,
    // BLE
    Advertising,
    Connected,
    AwaitingConfig,
    // LIoT
    AwaitingRequest,
    Reading,
    AwaitingSleepSet,
    Closed,
  };

  NodeId node_id = 0;
  NodeKind protocol = NodeKind::Ble;
  Step step = Step::Idle;
  double started_at_s = 0.0;
  double deadline_s = 0.0;
  Outcome outcome = Outcome::Incomplete;
  SensorMask requested_mask = 0;
  std::uint32_t assigned_sleep_s = 0;

  bool pending() const { return outcome == Outcome::Incomplete; }
  bool operator==(const ExchangeSession&) const = default;
};

std::string_view to_string(ExchangeSession::Step step);

/// Inputs the node supplies when a session step needs to build a frame.
struct SessionContext {
  double now_s = 0.0;
  AirtimeModel airtime{};
  std::uint8_t channel = 0;
  double lux = 0.0;
  SensorMask available = kAllSensors;
  std::optional<SensorSample> sample;
};

struct SessionStep {
  ExchangeSession session;
  std::optional<Frame> outgoing;
};

ExchangeSession open_session(NodeId node, NodeKind protocol, double now_s);

/// Advances a BLE session. `incoming == nullopt` is a local trigger: it
/// starts advertising from Idle and is a no-op elsewhere.
SessionStep ble_exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                              const SessionContext& ctx);

/// Advances a LIoT session. `incoming == nullopt` starts the uplink from
/// Idle and emits the sensor data once Reading has finished.
SessionStep liot_exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                               const SessionContext& ctx);

/// Dispatches on session.protocol.
SessionStep exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                          const SessionContext& ctx);

/// Marks a pending session failed because its deadline passed.
ExchangeSession expire(const ExchangeSession& session);

}  // namespace bsim
