#include "bsim/protocol.hpp"

#include <stdexcept>
#include <string>

namespace bsim {

std::string_view to_string(LinkType link) {
  switch (link) {
    case LinkType::BleAdv: return "ble_adv";
    case LinkType::BleConn: return "ble_conn";
    case LinkType::IrUplink: return "ir_uplink";
    case LinkType::VlcDownlink: return "vlc_downlink";
  }
  return "?";
}

std::optional<LinkType> link_type_from_string(std::string_view name) {
  for (auto l : {LinkType::BleAdv, LinkType::BleConn, LinkType::IrUplink, LinkType::VlcDownlink}) {
    if (to_string(l) == name) return l;
  }
  return std::nullopt;
}

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::AdvEss: return "AdvEss";
    case FrameKind::ConnReq: return "ConnReq";
    case FrameKind::EssAttrRequest: return "EssAttrRequest";
    case FrameKind::EssAttrData: return "EssAttrData";
    case FrameKind::ConfigOrDisconnect: return "ConfigOrDisconnect";
    case FrameKind::NodeIdLux: return "NodeIdLux";
    case FrameKind::SensorRequest: return "SensorRequest";
    case FrameKind::SensorData: return "SensorData";
    case FrameKind::SleepSet: return "SleepSet";
    case FrameKind::Ack: return "Ack";
  }
  return "?";
}

std::string_view to_string(ExchangeSession::Step step) {
  using S = ExchangeSession::Step;
  switch (step) {
    case S::Idle: return "Idle";
    case S::Advertising: return "Advertising";
    case S::Connected: return "Connected";
    case S::AwaitingConfig: return "AwaitingConfig";
    case S::AwaitingRequest: return "AwaitingRequest";
    case S::Reading: return "Reading";
    case S::AwaitingSleepSet: return "AwaitingSleepSet";
    case S::Closed: return "Closed";
  }
  return "?";
}

LinkType link_for(FrameKind kind) {
  switch (kind) {
    case FrameKind::AdvEss:
    case FrameKind::ConnReq: return LinkType::BleAdv;
    case FrameKind::EssAttrRequest:
    case FrameKind::EssAttrData:
    case FrameKind::ConfigOrDisconnect: return LinkType::BleConn;
    case FrameKind::NodeIdLux:
    case FrameKind::SensorData:
    case FrameKind::Ack: return LinkType::IrUplink;
    case FrameKind::SensorRequest:
    case FrameKind::SleepSet: return LinkType::VlcDownlink;
  }
  throw std::invalid_argument("unknown frame kind");
}

bool is_ble(LinkType link) { return link == LinkType::BleAdv || link == LinkType::BleConn; }

void validate(const Frame& frame) {
  if (frame.link != link_for(frame.kind)) {
    throw std::invalid_argument(std::string(to_string(frame.kind)) + " cannot travel on " +
                                std::string(to_string(frame.link)));
  }
  switch (frame.link) {
    case LinkType::BleAdv:
      if (frame.channel < kFirstAdvChannel || frame.channel > kLastAdvChannel) {
        throw std::invalid_argument("advertising frames use channels 37-39");
      }
      break;
    case LinkType::BleConn:
      if (frame.channel >= kDataChannelCount) {
        throw std::invalid_argument("connection frames use channels 0-36");
      }
      break;
    default:
      break;
  }
  if (!(frame.airtime_s > 0.0)) throw std::invalid_argument("frame airtime must be > 0");
}

const LinkTiming& AirtimeModel::timing(LinkType link) const {
  switch (link) {
    case LinkType::BleAdv: return ble_adv;
    case LinkType::BleConn: return ble_conn;
    case LinkType::IrUplink: return ir_uplink;
    case LinkType::VlcDownlink: return vlc_downlink;
  }
  throw std::invalid_argument("unknown link");
}

double frame_airtime(FrameKind kind, std::uint32_t payload_bytes, LinkType link,
                     const AirtimeModel& model) {
  if (link != link_for(kind)) {
    throw std::invalid_argument(std::string(to_string(kind)) + " is not carried on " +
                                std::string(to_string(link)));
  }
  const auto& t = model.timing(link);
  return t.overhead_s + double(payload_bytes) * t.per_byte_s;
}

std::uint32_t payload_size(FrameKind kind, SensorMask mask) {
  switch (kind) {
    case FrameKind::AdvEss: return 31;
    case FrameKind::ConnReq: return 34;
    case FrameKind::EssAttrRequest: return 2;
    case FrameKind::ConfigOrDisconnect: return 2;
    case FrameKind::NodeIdLux: return 4;
    case FrameKind::SensorRequest: return 1;
    case FrameKind::SleepSet: return 2;
    case FrameKind::Ack: return 0;
    case FrameKind::EssAttrData:
    case FrameKind::SensorData: return kSensorBytesPerChannel * std::uint32_t(channel_count(mask));
  }
  return 0;
}

Frame make_frame(FrameKind kind, NodeId src, NodeId dst, double now_s, const AirtimeModel& model,
                 SensorMask mask, std::uint8_t channel) {
  Frame f;
  f.src = src;
  f.dst = dst;
  f.kind = kind;
  f.link = link_for(kind);
  f.channel = channel;
  f.sensor_mask = mask;
  f.payload_bytes = payload_size(kind, mask);
  f.airtime_s = frame_airtime(kind, f.payload_bytes, f.link, model);
  f.sent_at_s = now_s;
  return f;
}

ExchangeSession open_session(NodeId node, NodeKind protocol, double now_s) {
  ExchangeSession s;
  s.node_id = node;
  s.protocol = protocol;
  s.started_at_s = now_s;
  s.deadline_s = now_s;
  return s;
}

namespace {

using Step = ExchangeSession::Step;

SessionStep fail(ExchangeSession s, Outcome why) {
  s.step = Step::Closed;
  s.outcome = why;
  return {s, std::nullopt};
}

SessionStep violation(const ExchangeSession& s) { return fail(s, Outcome::FailedProtocolViolation); }

bool addressed_to(const ExchangeSession& s, const Frame& f) {
  return f.dst == s.node_id && f.src == kGatewayId;
}

}  // namespace

SessionStep ble_exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                              const SessionContext& ctx) {
  if (!session.pending()) return {session, std::nullopt};
  ExchangeSession s = session;

  if (!incoming) {
    if (s.step != Step::Idle) return {s, std::nullopt};
    s.step = Step::Advertising;
    s.started_at_s = ctx.now_s;
    return {s, make_frame(FrameKind::AdvEss, s.node_id, kGatewayId, ctx.now_s, ctx.airtime,
                          kAllSensors, ctx.channel)};
  }

  const Frame& f = *incoming;
  if (!is_ble(f.link) || !addressed_to(s, f)) return violation(s);

  switch (s.step) {
    case Step::Advertising:
      if (f.kind != FrameKind::ConnReq) return violation(s);
      s.step = Step::Connected;
      return {s, std::nullopt};
    case Step::Connected: {
      if (f.kind != FrameKind::EssAttrRequest) return violation(s);
      s.step = Step::AwaitingConfig;
      s.requested_mask = ctx.available;
      // Replies stay on the data channel the central picked.
      Frame data = make_frame(FrameKind::EssAttrData, s.node_id, kGatewayId, ctx.now_s, ctx.airtime,
                              ctx.available, f.channel);
      data.sample = ctx.sample;
      return {s, data};
    }
    case Step::AwaitingConfig:
      if (f.kind != FrameKind::ConfigOrDisconnect) return violation(s);
      s.step = Step::Closed;
      s.outcome = Outcome::Delivered;
      return {s, std::nullopt};
    default:
      return violation(s);
  }
}

SessionStep liot_exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                               const SessionContext& ctx) {
  if (!session.pending()) return {session, std::nullopt};
  ExchangeSession s = session;

  if (!incoming) {
    if (s.step == Step::Idle) {
      s.step = Step::AwaitingRequest;
      s.started_at_s = ctx.now_s;
      Frame up = make_frame(FrameKind::NodeIdLux, s.node_id, kGatewayId, ctx.now_s, ctx.airtime);
      up.lux = ctx.lux;
      return {s, up};
    }
    if (s.step == Step::Reading) {
      s.step = Step::AwaitingSleepSet;
      Frame data = make_frame(FrameKind::SensorData, s.node_id, kGatewayId, ctx.now_s, ctx.airtime,
                              s.requested_mask);
      data.sample = ctx.sample;
      return {s, data};
    }
    return {s, std::nullopt};
  }

  const Frame& f = *incoming;
  if (f.link != LinkType::VlcDownlink || !addressed_to(s, f)) return violation(s);

  switch (s.step) {
    case Step::AwaitingRequest:
      if (f.kind != FrameKind::SensorRequest) return violation(s);
      s.step = Step::Reading;
      s.requested_mask = SensorMask(f.sensor_mask & ctx.available);
      return {s, std::nullopt};
    case Step::AwaitingSleepSet: {
      if (f.kind != FrameKind::SleepSet) return violation(s);
      s.step = Step::Closed;
      s.outcome = Outcome::Delivered;
      s.assigned_sleep_s = f.sleep_s;
      return {s, make_frame(FrameKind::Ack, s.node_id, kGatewayId, ctx.now_s, ctx.airtime)};
    }
    default:
      return violation(s);
  }
}

SessionStep exchange_step(const ExchangeSession& session, const std::optional<Frame>& incoming,
                          const SessionContext& ctx) {
  return session.protocol == NodeKind::Ble ? ble_exchange_step(session, incoming, ctx)
                                           : liot_exchange_step(session, incoming, ctx);
}

ExchangeSession expire(const ExchangeSession& session) {
  if (!session.pending()) return session;
  ExchangeSession s = session;
  s.outcome = (s.step == Step::Advertising || s.step == Step::Idle) && s.protocol == NodeKind::Ble
                  ? Outcome::FailedNoGateway
                  : Outcome::FailedTimeout;
  s.step = Step::Closed;
  return s;
}

}  // namespace bsim
