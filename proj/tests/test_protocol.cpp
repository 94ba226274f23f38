#include <doctest.h>

#include <random>
#include <stdexcept>

#include "bsim/protocol.hpp"

using namespace bsim;

namespace {

constexpr NodeId kNode = 3;

Frame from_gateway(FrameKind kind, double now, std::uint8_t channel = 0) {
  return make_frame(kind, kGatewayId, kNode, now, AirtimeModel{}, kAllSensors, channel);
}

SessionContext ctx_at(double now, std::uint8_t channel = 37) {
  SessionContext c;
  c.now_s = now;
  c.channel = channel;
  c.lux = 700.0;
  return c;
}

}  // namespace

TEST_CASE("every frame kind has exactly one link") {
  CHECK(link_for(FrameKind::AdvEss) == LinkType::BleAdv);
  CHECK(link_for(FrameKind::EssAttrData) == LinkType::BleConn);
  CHECK(link_for(FrameKind::NodeIdLux) == LinkType::IrUplink);
  CHECK(link_for(FrameKind::SensorData) == LinkType::IrUplink);
  CHECK(link_for(FrameKind::Ack) == LinkType::IrUplink);
  CHECK(link_for(FrameKind::SensorRequest) == LinkType::VlcDownlink);
  CHECK(link_for(FrameKind::SleepSet) == LinkType::VlcDownlink);
  CHECK(link_type_from_string("ir_uplink") == LinkType::IrUplink);
  CHECK_FALSE(link_type_from_string("wifi").has_value());
}

TEST_CASE("airtime is linear in payload") {
  const AirtimeModel m;
  const double zero = frame_airtime(FrameKind::SensorData, 0, LinkType::IrUplink, m);
  const double full = frame_airtime(FrameKind::SensorData, 40, LinkType::IrUplink, m);
  const double half = frame_airtime(FrameKind::SensorData, 20, LinkType::IrUplink, m);
  CHECK(zero == doctest::Approx(m.ir_uplink.overhead_s));
  CHECK(half - zero == doctest::Approx((full - zero) / 2));
  CHECK_THROWS_AS(frame_airtime(FrameKind::SensorData, 40, LinkType::BleConn, m), std::invalid_argument);
}

TEST_CASE("default airtimes reproduce the stage durations") {
  const AirtimeModel m;
  auto at = [&](FrameKind k, SensorMask mask = kAllSensors) {
    return frame_airtime(k, payload_size(k, mask), link_for(k), m);
  };
  CHECK(at(FrameKind::SensorData) == doctest::Approx(3.58));
  CHECK(at(FrameKind::NodeIdLux) + at(FrameKind::SensorRequest) == doctest::Approx(0.428));
  CHECK(at(FrameKind::SleepSet) + at(FrameKind::Ack) == doctest::Approx(0.078));
  CHECK(at(FrameKind::EssAttrRequest) + at(FrameKind::EssAttrData) + at(FrameKind::ConfigOrDisconnect) ==
        doctest::Approx(1.3));
  // A temperature-only upload carries a quarter of the payload.
  const double quarter = at(FrameKind::SensorData, mask_of(SensorChannel::Temperature));
  CHECK(quarter - m.ir_uplink.overhead_s == doctest::Approx((3.58 - m.ir_uplink.overhead_s) / 4));
}

TEST_CASE("frame validation") {
  Frame f = make_frame(FrameKind::AdvEss, kNode, kGatewayId, 0.0, {}, kAllSensors, 38);
  CHECK_NOTHROW(validate(f));
  f.channel = 12;
  CHECK_THROWS_AS(validate(f), std::invalid_argument);
  Frame s = make_frame(FrameKind::SleepSet, kGatewayId, kNode, 0.0, {});
  CHECK_NOTHROW(validate(s));
  s.link = LinkType::IrUplink;
  CHECK_THROWS_AS(validate(s), std::invalid_argument);
  Frame d = make_frame(FrameKind::EssAttrData, kNode, kGatewayId, 0.0, {}, kAllSensors, 40);
  CHECK_THROWS_AS(validate(d), std::invalid_argument);
  d.channel = 36;
  CHECK_NOTHROW(validate(d));
  d.airtime_s = 0.0;
  CHECK_THROWS_AS(validate(d), std::invalid_argument);
}

TEST_CASE("BLE happy path") {
  auto s = open_session(kNode, NodeKind::Ble, 0.0);
  auto r = ble_exchange_step(s, std::nullopt, ctx_at(0.0));
  REQUIRE(r.outgoing);
  CHECK(r.outgoing->kind == FrameKind::AdvEss);
  CHECK(r.outgoing->channel == 37);
  CHECK(r.session.step == ExchangeSession::Step::Advertising);

  r = ble_exchange_step(r.session, from_gateway(FrameKind::ConnReq, 4.0, 37), ctx_at(4.0));
  CHECK_FALSE(r.outgoing);
  r = ble_exchange_step(r.session, from_gateway(FrameKind::EssAttrRequest, 4.4, 10), ctx_at(4.4));
  REQUIRE(r.outgoing);
  CHECK(r.outgoing->kind == FrameKind::EssAttrData);
  CHECK(r.outgoing->channel == 10);
  CHECK(r.session.pending());
  r = ble_exchange_step(r.session, from_gateway(FrameKind::ConfigOrDisconnect, 5.3, 10), ctx_at(5.3));
  CHECK(r.session.outcome == Outcome::Delivered);
  CHECK_FALSE(r.outgoing);
}

TEST_CASE("BLE failures") {
  auto adv = ble_exchange_step(open_session(kNode, NodeKind::Ble, 0.0), std::nullopt, ctx_at(0.0)).session;

  SUBCASE("advertising without a connection") {
    CHECK(expire(adv).outcome == Outcome::FailedNoGateway);
  }
  SUBCASE("out-of-sequence frame") {
    auto r = ble_exchange_step(adv, from_gateway(FrameKind::ConfigOrDisconnect, 1.0, 10), ctx_at(1.0));
    CHECK(r.session.outcome == Outcome::FailedProtocolViolation);
  }
  SUBCASE("optical frame on a BLE session") {
    auto r = ble_exchange_step(adv, from_gateway(FrameKind::SensorRequest, 1.0), ctx_at(1.0));
    CHECK(r.session.outcome == Outcome::FailedProtocolViolation);
  }
  SUBCASE("frame for another node") {
    Frame f = from_gateway(FrameKind::ConnReq, 1.0, 37);
    f.dst = kNode + 1;
    CHECK(ble_exchange_step(adv, f, ctx_at(1.0)).session.outcome == Outcome::FailedProtocolViolation);
  }
  SUBCASE("lost data frame times out") {
    auto r = ble_exchange_step(adv, from_gateway(FrameKind::ConnReq, 4.0, 37), ctx_at(4.0));
    r = ble_exchange_step(r.session, from_gateway(FrameKind::EssAttrRequest, 4.4, 10), ctx_at(4.4));
    CHECK(expire(r.session).outcome == Outcome::FailedTimeout);
  }
}

TEST_CASE("LIoT happy path") {
  auto s = open_session(kNode, NodeKind::Liot, 0.0);
  auto r = liot_exchange_step(s, std::nullopt, ctx_at(0.0, 0));
  REQUIRE(r.outgoing);
  CHECK(r.outgoing->kind == FrameKind::NodeIdLux);
  CHECK(r.outgoing->lux == 700.0);

  Frame req = from_gateway(FrameKind::SensorRequest, 0.4);
  req.sensor_mask = mask_of(SensorChannel::Temperature) | mask_of(SensorChannel::Gas);
  r = liot_exchange_step(r.session, req, ctx_at(0.4, 0));
  CHECK(r.session.step == ExchangeSession::Step::Reading);
  CHECK(r.session.requested_mask == req.sensor_mask);

  r = liot_exchange_step(r.session, std::nullopt, ctx_at(1.0, 0));
  REQUIRE(r.outgoing);
  CHECK(r.outgoing->kind == FrameKind::SensorData);
  CHECK(r.outgoing->payload_bytes == 2 * kSensorBytesPerChannel);

  Frame set = from_gateway(FrameKind::SleepSet, 3.0);
  set.sleep_s = 620;
  r = liot_exchange_step(r.session, set, ctx_at(3.0, 0));
  REQUIRE(r.outgoing);
  CHECK(r.outgoing->kind == FrameKind::Ack);
  CHECK(r.session.outcome == Outcome::Delivered);
  CHECK(r.session.assigned_sleep_s == 620);
}

TEST_CASE("LIoT violations and timeouts") {
  auto up = liot_exchange_step(open_session(kNode, NodeKind::Liot, 0.0), std::nullopt, ctx_at(0.0, 0)).session;
  CHECK(liot_exchange_step(up, from_gateway(FrameKind::SleepSet, 0.4), ctx_at(0.4)).session.outcome ==
        Outcome::FailedProtocolViolation);
  CHECK(liot_exchange_step(up, from_gateway(FrameKind::ConnReq, 0.4, 37), ctx_at(0.4)).session.outcome ==
        Outcome::FailedProtocolViolation);
  CHECK(expire(up).outcome == Outcome::FailedTimeout);
}

TEST_CASE("property: only the complete handshake is delivered") {
  // Random frame sequences drawn from every kind: a session may end
  // Delivered only if it saw the exact handshake sequence.
  std::mt19937_64 gen(5);
  const FrameKind kinds[] = {FrameKind::ConnReq, FrameKind::EssAttrRequest, FrameKind::ConfigOrDisconnect,
                             FrameKind::SensorRequest, FrameKind::SleepSet, FrameKind::AdvEss};
  for (int trial = 0; trial < 5000; ++trial) {
    const bool ble = trial % 2 == 0;
    auto r = exchange_step(open_session(kNode, ble ? NodeKind::Ble : NodeKind::Liot, 0.0), std::nullopt,
                           ctx_at(0.0, ble ? 37 : 0));
    std::vector<FrameKind> seen;
    double now = 0.0;
    for (int i = 0; i < 4 && r.session.pending(); ++i) {
      now += 0.5;
      if (!ble && r.session.step == ExchangeSession::Step::Reading && gen() % 2) {
        r = exchange_step(r.session, std::nullopt, ctx_at(now, 0));
        continue;
      }
      const FrameKind k = kinds[gen() % std::size(kinds)];
      Frame f = from_gateway(k, now, is_ble(link_for(k)) ? (k == FrameKind::ConnReq ? 37 : 5) : 0);
      seen.push_back(k);
      r = exchange_step(r.session, f, ctx_at(now, ble ? 37 : 0));
    }
    if (r.session.outcome == Outcome::Delivered) {
      const std::vector<FrameKind> ble_seq{FrameKind::ConnReq, FrameKind::EssAttrRequest,
                                           FrameKind::ConfigOrDisconnect};
      const std::vector<FrameKind> liot_seq{FrameKind::SensorRequest, FrameKind::SleepSet};
      CHECK(seen == (ble ? ble_seq : liot_seq));
    }
  }
}
