#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "bsim/node.hpp"

using namespace bsim;

namespace {

const EnvironmentModel kEnv{};

struct Driver {
  NodeConfig cfg;
  NodeState state;
  double lux = 700.0;
  std::vector<NodeEmission> log;

  explicit Driver(NodeConfig c, double l = 700.0) : cfg(std::move(c)), lux(l) {
    state = boot(cfg, ctx(0.0));
  }

  NodeContext ctx(double t) const { return NodeContext{t, lux, &kEnv}; }

  std::vector<NodeEmission> step(double t, const std::optional<Frame>& f = std::nullopt) {
    auto r = advance(state, cfg, ctx(t), f);
    state = r.state;
    log.insert(log.end(), r.emissions.begin(), r.emissions.end());
    return r.emissions;
  }

  std::vector<NodeEmission> fire() { return step(state.next_timer_s()); }
};

template <class T>
std::vector<T> only(const std::vector<NodeEmission>& em) {
  std::vector<T> out;
  for (const auto& e : em) {
    if (auto* p = std::get_if<T>(&e)) out.push_back(*p);
  }
  return out;
}

Frame gw(FrameKind kind, NodeId node, double now, std::uint8_t channel = 0) {
  return make_frame(kind, kGatewayId, node, now, AirtimeModel{}, kAllSensors, channel);
}

}  // namespace

TEST_CASE("schedule: BLE local solve stretches the whole cycle by the margin") {
  const auto cfg = default_ble_node(1);
  const auto d = schedule_next_cycle(cfg, 700.0, SleepMode::local());
  CHECK(d.kind == SleepSolution::Kind::Finite);
  CHECK(d.sleep_s + 5.56 == doctest::Approx(19.3221));
  const auto d500 = schedule_next_cycle(cfg, 500.0, SleepMode::local());
  CHECK(d500.sleep_s + 5.56 == doctest::Approx(27.384));
}

TEST_CASE("schedule: gateway-assigned values pass through") {
  const auto cfg = default_liot_node(1);
  CHECK(schedule_next_cycle(cfg, 700.0, SleepMode::assigned(620)).sleep_s == 620.0);
  CHECK(schedule_next_cycle(cfg, 0.0, SleepMode::assigned(1350)).sleep_s == 1350.0);
}

TEST_CASE("schedule: continuous and infeasible") {
  auto cfg = default_ble_node(1);
  cfg.harvester = HarvesterCurve({{0.0, 0.0}, {1000.0, 100.0}});
  const auto cont = schedule_next_cycle(cfg, 1000.0, SleepMode::local());
  CHECK(cont.kind == SleepSolution::Kind::Continuous);
  CHECK(cont.sleep_s == 0.0);
  const auto dark = schedule_next_cycle(cfg, 0.0, SleepMode::local());
  CHECK(dark.kind == SleepSolution::Kind::Infeasible);
  CHECK(dark.sleep_s == cfg.backoff_s);
  CHECK_THROWS_AS(schedule_next_cycle(cfg, -1.0, SleepMode::local()), std::invalid_argument);
}

TEST_CASE("config validation") {
  auto cfg = default_ble_node(1);
  CHECK_NOTHROW(validate(cfg));
  cfg.profile = presets::liot_table2();
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = default_ble_node(0);
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = default_ble_node(1);
  cfg.margin = -0.1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = default_liot_node(2);
  cfg.sensors = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("sensor generator") {
  EnvironmentModel env;
  env.seed = 42;
  const auto cfg = default_ble_node(1);
  const auto s0 = read_sensors(cfg, env, 0.0);
  CHECK(s0.temperature_c == 21.0);
  CHECK(s0.humidity_rh == 40.0);
  CHECK(s0.pressure_hpa == 1013.0);
  const double quarter = env.channels[0].period_s / 4;
  CHECK(read_sensors(cfg, env, quarter).temperature_c == doctest::Approx(21.0 + 1.5));

  env.channels[1].noise = 2.0;
  const auto a = read_sensors(cfg, env, 123.0);
  const auto b = read_sensors(cfg, env, 123.0);
  CHECK(a == b);
  CHECK(std::abs(a.humidity_rh - (40.0 + 5.0 * std::sin(2 * std::numbers::pi * 123.0 / 86400.0))) <= 2.0);
}

TEST_CASE("boot sleeps first") {
  Driver d(default_liot_node(1));
  CHECK(d.state.phase == Phase::Sleeping);
  CHECK(d.state.phase_deadline_s == doctest::Approx(620.0));
  Driver b(default_ble_node(1));
  CHECK(b.state.phase_deadline_s == doctest::Approx(19.3221 - 5.56));
}

TEST_CASE("BLE node: sensing then advertising with a 4 s window") {
  Driver d(default_ble_node(4));
  d.fire();
  CHECK(d.state.phase == Phase::Sensing);
  const double t_sense = d.state.phase_start_s;
  const auto em = d.fire();
  CHECK(d.state.phase == Phase::Advertising);
  CHECK(d.state.phase_deadline_s == doctest::Approx(t_sense + 0.26 + 4.0));
  const auto frames = only<FrameSent>(em);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].frame.kind == FrameKind::AdvEss);
  CHECK(frames[0].frame.src == 4);
}

TEST_CASE("BLE node: complete exchange is delivered and re-armed from the wake time") {
  Driver d(default_ble_node(1));
  d.fire();  // wake
  const double wake = d.state.wake_s;
  d.fire();  // advertising
  const double t_conn = d.state.phase_start_s + 2.0;
  d.step(t_conn, gw(FrameKind::ConnReq, 1, t_conn, 37));
  CHECK(d.state.phase == Phase::Exchanging);
  const auto em = d.step(t_conn + 0.4, gw(FrameKind::EssAttrRequest, 1, t_conn + 0.4, 12));
  REQUIRE(only<FrameSent>(em).size() == 1);
  CHECK(only<FrameSent>(em)[0].frame.kind == FrameKind::EssAttrData);
  const auto done = d.step(t_conn + 1.3, gw(FrameKind::ConfigOrDisconnect, 1, t_conn + 1.3, 12));
  const auto closed = only<CycleClosed>(done);
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].record.outcome == Outcome::Delivered);
  CHECK(d.state.phase == Phase::Sleeping);
  CHECK(d.state.phase_deadline_s == doctest::Approx(wake + 19.3221));
}

TEST_CASE("BLE node: no gateway") {
  Driver d(default_ble_node(1));
  d.fire();
  d.fire();
  const auto em = d.fire();
  const auto closed = only<CycleClosed>(em);
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].record.outcome == Outcome::FailedNoGateway);
  CHECK(d.state.phase == Phase::Sleeping);
}

TEST_CASE("BLE node: data-channel frames are unheard while advertising") {
  // The connection request was lost, so the gateway's attribute request
  // lands on a data channel the advertising radio is not tuned to.
  Driver d(default_ble_node(1));
  d.fire();
  d.fire();
  const double t = d.state.phase_start_s + 2.0;
  const auto em = d.step(t, gw(FrameKind::EssAttrRequest, 1, t, 12));
  CHECK(only<FrameSent>(em).empty());
  CHECK(only<CycleClosed>(em).empty());
  CHECK(d.state.phase == Phase::Advertising);
  const auto closed = only<CycleClosed>(d.fire());
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].record.outcome == Outcome::FailedNoGateway);
}

TEST_CASE("LIoT node: SleepSet(1350) then ack then a 1350 s sleep") {
  Driver d(default_liot_node(2), 500.0);
  auto em = d.fire();
  CHECK(d.state.phase == Phase::Uplinking);
  CHECK(only<FrameSent>(em)[0].frame.kind == FrameKind::NodeIdLux);
  CHECK(only<FrameSent>(em)[0].frame.lux == 500.0);
  d.fire();
  CHECK(d.state.phase == Phase::AwaitingRequest);
  const double t_req = d.state.phase_start_s;
  Frame req = gw(FrameKind::SensorRequest, 2, t_req);
  d.step(req.arrives_at_s(), req);
  CHECK(d.state.phase == Phase::Sensing);
  em = d.fire();
  CHECK(d.state.phase == Phase::Exchanging);
  CHECK(only<FrameSent>(em)[0].frame.kind == FrameKind::SensorData);
  CHECK(d.state.phase_deadline_s - d.state.phase_start_s == doctest::Approx(3.58));
  d.fire();
  CHECK(d.state.phase == Phase::AwaitingSleepSet);
  Frame set = gw(FrameKind::SleepSet, 2, d.state.phase_start_s);
  set.sleep_s = 1350;
  em = d.step(set.arrives_at_s(), set);
  REQUIRE(only<FrameSent>(em).size() == 1);
  CHECK(only<FrameSent>(em)[0].frame.kind == FrameKind::Ack);
  em = d.fire();
  const auto closed = only<CycleClosed>(em);
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].record.outcome == Outcome::Delivered);
  CHECK(d.state.phase == Phase::Sleeping);
  CHECK(d.state.next_sleep_duration_s == doctest::Approx(1350.0));
  // Stage times add up to the profile active period.
  CHECK(closed[0].record.end_s - closed[0].record.wake_s == doctest::Approx(4.611));
}

TEST_CASE("depleted node emits nothing and stays asleep") {
  auto cfg = default_liot_node(1);
  cfg.supercap.voltage_v = cfg.supercap.v_min_v + 0.01;
  // Half the harvest is lost, so a balanced sleep never refills the buffer.
  cfg.charge_efficiency = 0.5;
  Driver d(cfg);
  for (int i = 0; i < 5; ++i) {
    const auto em = d.fire();
    CHECK(only<FrameSent>(em).empty());
    CHECK(d.state.phase == Phase::Sleeping);
  }
  CHECK(d.state.depleted);
}

TEST_CASE("brown-out during a cycle fails it and backs off") {
  auto cfg = default_liot_node(1);
  cfg.timeout_factor = 50.0;
  // Just enough for a nominal cycle, far too little to wait out the timeout.
  const double e = active_totals(cfg.profile).e_active_j + 0.02;
  cfg.supercap.voltage_v = std::sqrt(cfg.supercap.v_min_v * cfg.supercap.v_min_v + 2 * e / cfg.supercap.capacitance_f);
  cfg.harvester = HarvesterCurve({{0.0, 0.0}, {100.0, 0.0}});
  Driver d(cfg);
  d.state.phase_deadline_s = 1.0;  // skip the boot sleep
  d.state.reevaluate = false;
  d.fire();
  d.fire();
  REQUIRE(d.state.phase == Phase::AwaitingRequest);
  const double depletion = d.state.depletion_at_s;
  CHECK(depletion < d.state.phase_deadline_s);
  const auto em = d.fire();
  const auto closed = only<CycleClosed>(em);
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].record.outcome == Outcome::FailedDepleted);
  CHECK(closed[0].record.scap_v_end == doctest::Approx(cfg.supercap.v_min_v));
  CHECK(d.state.phase == Phase::Sleeping);
  CHECK(d.state.phase_deadline_s == doctest::Approx(depletion + cfg.backoff_s));
}

TEST_CASE("clock may not run backwards") {
  Driver d(default_ble_node(1));
  d.fire();
  CHECK_THROWS_AS(d.step(d.state.phase_start_s - 1.0), std::invalid_argument);
}

TEST_CASE("property: random interleavings never produce an illegal phase transition") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const FrameKind kinds[] = {FrameKind::ConnReq, FrameKind::EssAttrRequest, FrameKind::ConfigOrDisconnect,
                             FrameKind::SensorRequest, FrameKind::SleepSet, FrameKind::AdvEss};
  for (int trial = 0; trial < 200; ++trial) {
    const bool ble = trial % 2 == 0;
    auto cfg = ble ? default_ble_node(1) : default_liot_node(1);
    cfg.supercap.voltage_v = 3.4 + 1.0 * u(gen);
    Driver d(cfg, 400.0 + 400.0 * u(gen));
    Phase phase = d.state.phase;
    double now = 0.0;
    for (int i = 0; i < 300; ++i) {
      const double next = d.state.next_timer_s();
      std::vector<NodeEmission> em;
      if (u(gen) < 0.5) {
        now = next;
        em = d.step(now);
      } else {
        now = now + (next - now) * u(gen);
        const FrameKind k = kinds[gen() % std::size(kinds)];
        std::uint8_t ch = k == FrameKind::ConnReq || k == FrameKind::AdvEss ? 37 : (is_ble(link_for(k)) ? 9 : 0);
        Frame f = gw(k, 1, now, ch);
        f.sleep_s = std::uint32_t(1 + gen() % 100);
        em = d.step(now, f);
      }
      for (const auto& pe : only<PhaseEntered>(em)) {
        CHECK(pe.from == phase);
        CHECK_MESSAGE(is_legal_transition(cfg.kind, pe.from, pe.to), to_string(pe.from), " -> ", to_string(pe.to));
        phase = pe.to;
      }
      CHECK(d.state.phase_deadline_s >= now);
      if (d.state.depleted && d.state.phase == Phase::Sleeping) CHECK(only<FrameSent>(em).empty());
    }
  }
}

TEST_CASE("handshake sequences are legal and others are not") {
  CHECK(is_legal_transition(NodeKind::Ble, Phase::Sleeping, Phase::Sensing));
  CHECK(is_legal_transition(NodeKind::Ble, Phase::Advertising, Phase::Exchanging));
  CHECK(is_legal_transition(NodeKind::Ble, Phase::Exchanging, Phase::Sleeping));
  CHECK_FALSE(is_legal_transition(NodeKind::Ble, Phase::Sleeping, Phase::Uplinking));
  CHECK_FALSE(is_legal_transition(NodeKind::Ble, Phase::Sensing, Phase::Exchanging));
  CHECK(is_legal_transition(NodeKind::Liot, Phase::AwaitingRequest, Phase::Sensing));
  CHECK_FALSE(is_legal_transition(NodeKind::Liot, Phase::Sensing, Phase::Advertising));
}
