#include "bsim/node.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bsim/random.hpp"

namespace bsim {
namespace {

constexpr double kMilli = 1e-3;

std::uint8_t adv_channel(std::uint64_t cycle) {
  return std::uint8_t(kFirstAdvChannel + cycle % 3);
}

double t_active_nominal(const NodeConfig& cfg) { return active_totals(cfg.profile).t_active_s; }

class Machine {
 public:
  Machine(const NodeState& s, const NodeConfig& cfg, const NodeContext& ctx)
      : s_(s), cfg_(cfg), ctx_(ctx) {}

  NodeStep take() { return {std::move(s_), std::move(em_)}; }

  void settle() {
    const double dt = ctx_.now_s - s_.phase_start_s;
    if (dt <= 0.0) return;
    const auto step = supercap_step(s_.supercap, s_.harvest_mw - s_.load_mw, dt, cfg_.charge_efficiency);
    const double consumed = s_.load_mw * kMilli * dt;
    const double harvested = s_.harvest_mw * kMilli * dt;
    if (step.depleted && s_.phase == Phase::Sleeping) s_.depleted = true;
    s_.supercap = step.cap;
    s_.phase_start_s = ctx_.now_s;
    s_.cycle_consumed_j += consumed;
    s_.cycle_harvested_j += harvested;
    s_.total_consumed_j += consumed;
    s_.total_harvested_j += harvested;
    em_.push_back(EnergyDebited{ctx_.now_s, consumed, harvested});
  }

  void enter(Phase next, double deadline, double load_mw) {
    em_.push_back(PhaseEntered{s_.phase, next, ctx_.now_s});
    s_.phase = next;
    s_.phase_start_s = ctx_.now_s;
    s_.phase_deadline_s = deadline;
    s_.load_mw = load_mw;
    s_.harvest_mw = cfg_.harvester.power_mw(ctx_.lux);
    s_.depletion_at_s = next == Phase::Sleeping
                            ? std::numeric_limits<double>::infinity()
                            : ctx_.now_s + time_to_depletion(s_.supercap, s_.harvest_mw - s_.load_mw);
  }

  void enter_stage(Phase next, StageKind stage, double duration) {
    enter(next, ctx_.now_s + duration, stage_power(stage));
  }

  double stage_power(StageKind k) const { return cfg_.profile.stage(k).current_ma * cfg_.profile.voltage_v; }
  double stage_time(StageKind k) const { return cfg_.profile.stage(k).duration_s; }
  double timeout(StageKind k) const { return cfg_.timeout_factor * stage_time(k); }

  SessionContext session_ctx() const {
    SessionContext c;
    c.now_s = ctx_.now_s;
    c.airtime = cfg_.airtime;
    c.lux = ctx_.lux;
    c.available = cfg_.sensors;
    c.sample = s_.sample;
    c.channel = adv_channel(s_.cycle_index);
    return c;
  }

  void session_step(const std::optional<Frame>& incoming) {
    auto step = exchange_step(s_.session, incoming, session_ctx());
    s_.session = step.session;
    if (step.outgoing) em_.push_back(FrameSent{*step.outgoing});
  }

  void sleep_until(double wake) {
    s_.next_sleep_duration_s = wake - ctx_.now_s;
    enter(Phase::Sleeping, wake, cfg_.profile.sleep_power_mw());
  }

  void start_new_cycle() {
    ++s_.cycle_index;
    s_.cycle_start_s = ctx_.now_s;
    s_.wake_s = ctx_.now_s;
    s_.cycle_v_start = s_.supercap.voltage_v;
    s_.wake_v = s_.supercap.voltage_v;
    s_.cycle_consumed_j = 0.0;
    s_.cycle_harvested_j = 0.0;
    s_.sample.reset();
  }

  CycleRecord record(Outcome outcome) const {
    CycleRecord r;
    r.node_id = cfg_.node_id;
    r.cycle_index = s_.cycle_index;
    r.start_s = s_.cycle_start_s;
    r.wake_s = s_.wake_s;
    r.end_s = ctx_.now_s;
    r.outcome = outcome;
    r.scap_v_start = s_.cycle_v_start;
    r.scap_v_wake = s_.wake_v;
    r.scap_v_end = s_.supercap.voltage_v;
    r.energy_consumed_j = s_.cycle_consumed_j;
    r.energy_harvested_j = s_.cycle_harvested_j;
    if (s_.phase == Phase::Sleeping && r.wake_s > r.end_s) {
      // Run ended before the wake-up: the cycle never left its sleep.
      r.wake_s = r.end_s;
      r.scap_v_wake = r.scap_v_end;
    }
    return r;
  }

  void finish_cycle(Outcome outcome) {
    em_.push_back(CycleClosed{record(outcome)});
    const double now = ctx_.now_s;
    double wake = now;

    if (outcome == Outcome::FailedDepleted) {
      s_.depleted = true;
      wake = now + cfg_.backoff_s;
    } else if (cfg_.kind == NodeKind::Liot && outcome == Outcome::Delivered) {
      wake = now + schedule_next_cycle(cfg_, ctx_.lux, SleepMode::assigned(s_.session.assigned_sleep_s)).sleep_s;
    } else {
      const auto d = schedule_next_cycle(cfg_, ctx_.lux, SleepMode::local());
      if (d.kind == SleepSolution::Kind::Infeasible) {
        s_.reevaluate = true;
        wake = now + d.sleep_s;
      } else if (cfg_.kind == NodeKind::Ble) {
        // Timer-driven: the period is anchored at the wake-up, not at the end
        // of a possibly shortened advertising phase.
        wake = std::max(now, s_.wake_s + t_active_nominal(cfg_) + d.sleep_s);
      } else {
        wake = now + d.sleep_s;
      }
    }

    s_.session = ExchangeSession{};
    s_.session.step = ExchangeSession::Step::Closed;
    s_.session.outcome = outcome;
    start_new_cycle();
    s_.wake_s = wake;
    sleep_until(wake);
  }

  void wake_up() {
    if (s_.reevaluate) {
      const auto d = schedule_next_cycle(cfg_, ctx_.lux, SleepMode::local());
      if (d.kind == SleepSolution::Kind::Infeasible) {
        sleep_until(ctx_.now_s + d.sleep_s);
        return;
      }
      s_.reevaluate = false;
    }
    if (s_.supercap.usable_energy_j() < active_totals(cfg_.profile).e_active_j) {
      s_.depleted = true;
      sleep_until(ctx_.now_s + cfg_.backoff_s);
      return;
    }
    s_.depleted = false;
    s_.wake_s = ctx_.now_s;
    s_.wake_v = s_.supercap.voltage_v;
    s_.session = open_session(cfg_.node_id, cfg_.kind, ctx_.now_s);

    if (cfg_.kind == NodeKind::Ble) {
      enter_stage(Phase::Sensing, StageKind::SensorRead, stage_time(StageKind::SensorRead));
      return;
    }
    // The LDR read is part of the gateway-request stage.
    session_step(std::nullopt);
    const double airtime = std::get<FrameSent>(em_.back()).frame.airtime_s;
    enter_stage(Phase::Uplinking, StageKind::GwRequest, airtime);
  }

  void on_timer() {
    const double now = ctx_.now_s;
    if (s_.phase != Phase::Sleeping && now >= s_.depletion_at_s) {
      s_.session.step = ExchangeSession::Step::Closed;
      s_.session.outcome = Outcome::FailedDepleted;
      finish_cycle(Outcome::FailedDepleted);
      return;
    }
    if (now < s_.phase_deadline_s) return;

    switch (s_.phase) {
      case Phase::Sleeping:
        wake_up();
        return;
      case Phase::Sensing:
        s_.sample = read_sensors(cfg_, *ctx_.env, now);
        if (cfg_.kind == NodeKind::Ble) {
          session_step(std::nullopt);
          enter_stage(Phase::Advertising, StageKind::BleAdvertise, cfg_.advertising.max_s);
        } else {
          session_step(std::nullopt);
          const double airtime = std::get<FrameSent>(em_.back()).frame.airtime_s;
          enter_stage(Phase::Exchanging, StageKind::LiotDataUpload, airtime);
        }
        return;
      case Phase::Uplinking:
        enter_stage(Phase::AwaitingRequest, StageKind::GwRequest, timeout(StageKind::GwRequest));
        return;
      case Phase::Exchanging:
        if (cfg_.kind == NodeKind::Liot) {
          enter_stage(Phase::AwaitingSleepSet, StageKind::LiotSleepSet, timeout(StageKind::LiotSleepSet));
          return;
        }
        [[fallthrough]];
      case Phase::Advertising:
      case Phase::AwaitingRequest:
      case Phase::AwaitingSleepSet:
        if (s_.session.pending()) s_.session = expire(s_.session);
        finish_cycle(s_.session.outcome);
        return;
    }
  }

  // The receiver is only on while waiting for the gateway; frames that
  // arrive during sensing or an uplink are never heard. An advertising BLE
  // radio only listens on the advertising channels, so a data-channel frame
  // sent after a lost connection request goes unheard as well.
  bool listening(const Frame& f) const {
    if (cfg_.kind == NodeKind::Ble) {
      if (s_.phase == Phase::Advertising) return f.link == LinkType::BleAdv;
      return s_.phase == Phase::Exchanging && f.link == LinkType::BleConn;
    }
    return s_.phase == Phase::AwaitingRequest || s_.phase == Phase::AwaitingSleepSet;
  }

  void on_frame(const Frame& f) {
    if (!listening(f) || !s_.session.pending()) return;
    const auto before = s_.session.step;
    session_step(f);
    const auto& sess = s_.session;
    using Step = ExchangeSession::Step;

    if (sess.outcome != Outcome::Incomplete && sess.outcome != Outcome::Delivered) {
      finish_cycle(sess.outcome);
      return;
    }
    if (cfg_.kind == NodeKind::Ble) {
      if (before == Step::Advertising && sess.step == Step::Connected) {
        enter_stage(Phase::Exchanging, StageKind::BleDataExchange, timeout(StageKind::BleDataExchange));
      } else if (sess.outcome == Outcome::Delivered) {
        finish_cycle(Outcome::Delivered);
      }
      return;
    }
    if (before == Step::AwaitingRequest && sess.step == Step::Reading) {
      enter_stage(Phase::Sensing, StageKind::LiotSensorRead, stage_time(StageKind::LiotSensorRead));
    } else if (sess.outcome == Outcome::Delivered) {
      // Stay in the sleep-set stage while the ack is on air.
      const double airtime = std::get<FrameSent>(em_.back()).frame.airtime_s;
      s_.phase_deadline_s = ctx_.now_s + airtime;
      s_.depletion_at_s = ctx_.now_s + time_to_depletion(s_.supercap, s_.harvest_mw - s_.load_mw);
    }
  }

  void finalize() {
    em_.push_back(CycleClosed{record(Outcome::Incomplete)});
  }

 private:
  NodeState s_;
  const NodeConfig& cfg_;
  const NodeContext& ctx_;
  std::vector<NodeEmission> em_;
};

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Sleeping: return "Sleeping";
    case Phase::Sensing: return "Sensing";
    case Phase::Advertising: return "Advertising";
    case Phase::Exchanging: return "Exchanging";
    case Phase::Uplinking: return "Uplinking";
    case Phase::AwaitingRequest: return "AwaitingRequest";
    case Phase::AwaitingSleepSet: return "AwaitingSleepSet";
  }
  return "?";
}

bool is_legal_transition(NodeKind kind, Phase from, Phase to) {
  if (to == Phase::Sleeping) return true;
  if (kind == NodeKind::Ble) {
    return (from == Phase::Sleeping && to == Phase::Sensing) ||
           (from == Phase::Sensing && to == Phase::Advertising) ||
           (from == Phase::Advertising && to == Phase::Exchanging);
  }
  return (from == Phase::Sleeping && to == Phase::Uplinking) ||
         (from == Phase::Uplinking && to == Phase::AwaitingRequest) ||
         (from == Phase::AwaitingRequest && to == Phase::Sensing) ||
         (from == Phase::Sensing && to == Phase::Exchanging) ||
         (from == Phase::Exchanging && to == Phase::AwaitingSleepSet);
}

std::vector<StageKind> expected_stages(NodeKind kind) {
  if (kind == NodeKind::Ble) {
    return {StageKind::SensorRead, StageKind::BleAdvertise, StageKind::BleDataExchange};
  }
  return {StageKind::GwRequest, StageKind::LiotSensorRead, StageKind::LiotDataUpload,
          StageKind::LiotSleepSet};
}

void validate(const NodeConfig& cfg) {
  const std::string who = "node " + std::to_string(cfg.node_id) + ": ";
  if (cfg.node_id == kGatewayId) throw std::invalid_argument(who + "id 0 is reserved for the gateway");
  try {
    validate(cfg.profile);
    validate(cfg.supercap);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(who + e.what());
  }
  const auto want = expected_stages(cfg.kind);
  if (cfg.profile.active_stages.size() != want.size() ||
      !std::equal(want.begin(), want.end(), cfg.profile.active_stages.begin(),
                  [](StageKind k, const Stage& s) { return k == s.kind; })) {
    throw std::invalid_argument(who + "profile stages do not match the " +
                                std::string(to_string(cfg.kind)) + " stage sequence");
  }
  if (cfg.harvester.points().empty()) throw std::invalid_argument(who + "harvester curve is empty");
  if (!(cfg.margin >= 0.0)) throw std::invalid_argument(who + "margin must be >= 0");
  if (!(cfg.charge_efficiency > 0.0 && cfg.charge_efficiency <= 1.0)) {
    throw std::invalid_argument(who + "charge efficiency must be in (0, 1]");
  }
  if (!(cfg.backoff_s > 0.0)) throw std::invalid_argument(who + "backoff must be > 0");
  if (!(cfg.timeout_factor >= 1.0)) throw std::invalid_argument(who + "timeout factor must be >= 1");
  if ((cfg.sensors & kAllSensors) == 0) throw std::invalid_argument(who + "no sensors enabled");
  const auto& adv = cfg.advertising;
  if (!(adv.min_s > 0.0 && adv.max_s >= adv.min_s)) {
    throw std::invalid_argument(who + "advertising window must satisfy 0 < min <= max");
  }
}

NodeConfig default_ble_node(NodeId id) {
  NodeConfig cfg;
  cfg.node_id = id;
  cfg.kind = NodeKind::Ble;
  cfg.profile = presets::ble_table1();
  cfg.harvester = presets::ble_harvester();
  cfg.margin = 0.05;
  return cfg;
}

NodeConfig default_liot_node(NodeId id) {
  NodeConfig cfg;
  cfg.node_id = id;
  cfg.kind = NodeKind::Liot;
  cfg.profile = presets::liot_table2();
  cfg.harvester = presets::liot_harvester();
  cfg.margin = 0.0;
  return cfg;
}

SensorSample read_sensors(const NodeConfig& cfg, const EnvironmentModel& env, double t_s) {
  std::array<double, kSensorChannelCount> v{};
  for (int i = 0; i < kSensorChannelCount; ++i) {
    const auto& ch = env.channels[std::size_t(i)];
    double value = ch.baseline;
    if (ch.period_s > 0.0) value += ch.amplitude * std::sin(2.0 * std::numbers::pi * t_s / ch.period_s);
    if (ch.noise != 0.0) {
      const double u = to_unit(mix(mix(env.seed, std::uint64_t(cfg.node_id) << 8 | std::uint64_t(i)), t_s));
      value += ch.noise * (2.0 * u - 1.0);
    }
    v[std::size_t(i)] = value;
  }
  return SensorSample{t_s, v[0], v[1], v[2], v[3]};
}

ScheduleDecision schedule_next_cycle(const NodeConfig& cfg, double lux, SleepMode mode) {
  if (!(lux >= 0.0)) throw std::invalid_argument("illuminance must be >= 0");
  if (mode.kind == SleepMode::Kind::GatewayAssigned) {
    return {mode.assigned_s, mode.assigned_s > 0.0 ? SleepSolution::Kind::Finite
                                                    : SleepSolution::Kind::Continuous};
  }
  const auto sol = solve_sleep_time(cfg.profile, cfg.harvester.power_mw(lux));
  switch (sol.kind) {
    case SleepSolution::Kind::Continuous:
      return {0.0, sol.kind};
    case SleepSolution::Kind::Infeasible:
      return {cfg.backoff_s, sol.kind};
    case SleepSolution::Kind::Finite:
      break;
  }
  const double t_active = t_active_nominal(cfg);
  return {(t_active + sol.t_sleep_s) * (1.0 + cfg.margin) - t_active, sol.kind};
}

double NodeState::next_timer_s() const { return std::min(phase_deadline_s, depletion_at_s); }

NodeState boot(const NodeConfig& cfg, const NodeContext& ctx) {
  NodeState s;
  s.supercap = cfg.supercap;
  s.phase_start_s = ctx.now_s;
  s.cycle_start_s = ctx.now_s;
  s.cycle_v_start = cfg.supercap.voltage_v;
  s.wake_v = cfg.supercap.voltage_v;
  s.session.step = ExchangeSession::Step::Closed;

  const auto d = schedule_next_cycle(cfg, ctx.lux, SleepMode::local());
  s.reevaluate = d.kind == SleepSolution::Kind::Infeasible;
  s.phase_deadline_s = ctx.now_s + d.sleep_s;
  s.next_sleep_duration_s = d.sleep_s;
  s.wake_s = s.phase_deadline_s;
  s.load_mw = cfg.profile.sleep_power_mw();
  s.harvest_mw = cfg.harvester.power_mw(ctx.lux);
  return s;
}

double voltage_at(const NodeState& state, const NodeConfig& cfg, double t_s) {
  const double dt = std::max(0.0, t_s - state.phase_start_s);
  return supercap_step(state.supercap, state.harvest_mw - state.load_mw, dt, cfg.charge_efficiency)
      .cap.voltage_v;
}

NodeStep advance(const NodeState& state, const NodeConfig& cfg, const NodeContext& ctx,
                 const std::optional<Frame>& incoming) {
  if (ctx.now_s < state.phase_start_s) throw std::invalid_argument("node clock moved backwards");
  if (ctx.env == nullptr) throw std::invalid_argument("node context needs an environment model");
  Machine m(state, cfg, ctx);
  m.settle();
  if (incoming) {
    m.on_frame(*incoming);
  } else {
    m.on_timer();
  }
  return m.take();
}

NodeStep finalize(const NodeState& state, const NodeConfig& cfg, const NodeContext& ctx) {
  Machine m(state, cfg, ctx);
  m.settle();
  m.finalize();
  return m.take();
}

}  // namespace bsim
