#include "bsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bsim/scenario_io.hpp"

namespace bsim {

// ---------------------------------------------------------------------------
// Illumination

IlluminationProfile IlluminationProfile::constant(double lux) {
  IlluminationProfile p;
  p.kind = Kind::Constant;
  p.lux = lux;
  return p;
}

void validate(const IlluminationProfile& p) {
  switch (p.kind) {
    case IlluminationProfile::Kind::Constant:
      if (!(p.lux >= 0.0)) throw ValidationError("illumination.lux", "must be >= 0");
      break;
    case IlluminationProfile::Kind::Step: {
      if (p.segments.empty()) throw ValidationError("illumination.segments", "needs at least one segment");
      double prev = 0.0;
      for (std::size_t i = 0; i < p.segments.size(); ++i) {
        const auto& s = p.segments[i];
        const std::string where = "illumination.segments[" + std::to_string(i) + "]";
        if (!(s.lux >= 0.0)) throw ValidationError(where + ".lux", "must be >= 0");
        if (i + 1 < p.segments.size() && !(s.until_s > prev)) {
          throw ValidationError(where + ".until_s", "must be increasing");
        }
        prev = s.until_s;
      }
      break;
    }
    case IlluminationProfile::Kind::Sinusoid:
      if (!(p.period_s > 0.0)) throw ValidationError("illumination.period_s", "must be > 0");
      if (!(p.amplitude >= 0.0 && p.mean >= p.amplitude)) {
        throw ValidationError("illumination", "sinusoid needs mean >= amplitude >= 0 so lux stays >= 0");
      }
      break;
  }
  if (!(p.jitter >= 0.0 && p.jitter < 1.0)) throw ValidationError("illumination.jitter", "must be in [0, 1)");
  if (p.jitter > 0.0 && !(p.jitter_period_s > 0.0)) {
    throw ValidationError("illumination.jitter_period_s", "must be > 0");
  }
}

double lux_at(const IlluminationProfile& p, double t_s) {
  if (!(t_s >= 0.0) || t_s > p.horizon_s) throw std::out_of_range("illumination queried outside [0, horizon]");
  double lux = 0.0;
  switch (p.kind) {
    case IlluminationProfile::Kind::Constant:
      lux = p.lux;
      break;
    case IlluminationProfile::Kind::Step: {
      lux = p.segments.back().lux;
      for (std::size_t i = 0; i + 1 < p.segments.size(); ++i) {
        if (t_s < p.segments[i].until_s) {
          lux = p.segments[i].lux;
          break;
        }
      }
      break;
    }
    case IlluminationProfile::Kind::Sinusoid:
      lux = p.mean + p.amplitude * std::sin(2.0 * std::numbers::pi * (t_s + p.phase_s) / p.period_s);
      break;
  }
  if (p.jitter > 0.0) {
    const double slot = std::floor(t_s / p.jitter_period_s);
    const double u = to_unit(mix(p.jitter_seed ^ 0x4C55580000000000ull, slot));
    lux *= 1.0 + p.jitter * (2.0 * u - 1.0);
  }
  return std::max(0.0, lux);
}

// ---------------------------------------------------------------------------
// Channel

double channel_draw(std::uint64_t seed, const Frame& frame) {
  const std::uint64_t who = std::uint64_t(frame.src) << 32 | std::uint64_t(frame.dst) << 8 | std::uint64_t(frame.kind);
  return to_unit(mix(mix(mix(seed, kChannelStream), who), frame.sent_at_s));
}

Delivery deliver(const Frame& frame, const ChannelModel& channel, double u) {
  return u < channel.loss_for(frame.link) ? Delivery::Lost : Delivery::Delivered;
}

double per_frame_loss_for_session_pdr(double session_pdr, int frames) {
  if (!(session_pdr > 0.0 && session_pdr <= 1.0) || frames < 1) {
    throw std::invalid_argument("session PDR must be in (0, 1] and frames >= 1");
  }
  return 1.0 - std::pow(session_pdr, 1.0 / frames);
}

// ---------------------------------------------------------------------------
// Gateway

std::uint32_t sleep_set_seconds(const ScheduleDecision& d) {
  if (d.kind == SleepSolution::Kind::Continuous) return 0;
  // Whole seconds on the wire; the 1 us slack keeps an exact solution such
  // as 620.0000000001 from rounding up a full second.
  return std::uint32_t(std::ceil(d.sleep_s - 1e-6));
}

Gateway::Gateway(GatewayConfig cfg, const std::vector<NodeConfig>& nodes, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed) {
  for (const auto& n : nodes) nodes_.emplace(n.node_id, n);
}

double Gateway::window_draw(const Frame& adv) const {
  return to_unit(mix(mix(mix(seed_, kGatewayStream), std::uint64_t(adv.src)), adv.sent_at_s));
}

std::vector<OutgoingFrame> Gateway::on_frame(const Frame& frame, double now_s) {
  if (frame.dst != kGatewayId) return {};
  auto it = nodes_.find(frame.src);
  if (it == nodes_.end()) return {};
  return is_ble(frame.link) ? on_ble(frame, it->second, now_s) : on_liot(frame, it->second, now_s);
}

std::vector<OutgoingFrame> Gateway::on_ble(const Frame& frame, const NodeConfig& node, double now_s) {
  const NodeId id = node.node_id;
  switch (frame.kind) {
    case FrameKind::AdvEss: {
      // The scanner catches the advertisement after a window drawn from the
      // node's advertising mode; the connect request lands at its end.
      const auto& adv = node.advertising;
      const double window = adv.mode == AdvertisingMode::Fixed
                                ? adv.max_s
                                : adv.max_s - (adv.max_s - adv.min_s) * window_draw(frame);
      const double connect_at = std::max(now_s, frame.sent_at_s + window);
      const auto channel = std::uint8_t((connections_[id]++ * 7 + 3) % kDataChannelCount);

      Frame conn = make_frame(FrameKind::ConnReq, kGatewayId, id, 0.0, cfg_.airtime, kAllSensors, frame.channel);
      conn.sent_at_s = connect_at - conn.airtime_s;
      Frame req = make_frame(FrameKind::EssAttrRequest, kGatewayId, id, connect_at, cfg_.airtime, kAllSensors,
                             channel);
      return {{conn, connect_at}, {req, req.arrives_at_s()}};
    }
    case FrameKind::EssAttrData: {
      ++readings_;
      Frame bye = make_frame(FrameKind::ConfigOrDisconnect, kGatewayId, id, now_s, cfg_.airtime, kAllSensors,
                             frame.channel);
      return {{bye, bye.arrives_at_s()}};
    }
    default:
      return {};
  }
}

std::vector<OutgoingFrame> Gateway::on_liot(const Frame& frame, const NodeConfig& node, double now_s) {
  const NodeId id = node.node_id;
  switch (frame.kind) {
    case FrameKind::NodeIdLux: {
      if (liot_busy_ != kGatewayId && liot_busy_ != id && now_s < liot_busy_until_) return {};
      liot_busy_ = id;
      liot_busy_until_ = now_s + cfg_.liot_session_timeout_s;
      liot_reported_lux_ = frame.lux;
      Frame req = make_frame(FrameKind::SensorRequest, kGatewayId, id, now_s, cfg_.airtime, cfg_.liot_request_mask);
      return {{req, req.arrives_at_s()}};
    }
    case FrameKind::SensorData: {
      if (liot_busy_ != id) return {};
      ++readings_;
      const auto decision = schedule_next_cycle(node, liot_reported_lux_, SleepMode::local());
      Frame set = make_frame(FrameKind::SleepSet, kGatewayId, id, now_s, cfg_.airtime);
      set.sleep_s = sleep_set_seconds(decision);
      return {{set, set.arrives_at_s()}};
    }
    case FrameKind::Ack:
      if (liot_busy_ == id) liot_busy_ = kGatewayId;
      return {};
    default:
      return {};
  }
}

// ---------------------------------------------------------------------------
// Events

bool EventQueue::Later::operator()(const Event& a, const Event& b) const {
  if (a.time_s != b.time_s) return a.time_s > b.time_s;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.seq > b.seq;
}

void EventQueue::push(Event e) {
  e.seq = next_seq_++;
  heap_.push(std::move(e));
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  return e;
}

// ---------------------------------------------------------------------------
// Scenario

void validate(const Scenario& s) {
  if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) throw ValidationError("duration_s", "must be > 0");
  if (s.nodes.empty()) throw ValidationError("nodes", "at least one node is required");
  if (!(s.sample_interval_s > 0.0)) throw ValidationError("sample_interval_s", "must be > 0");
  validate(s.illumination);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    try {
      validate(s.nodes[i]);
    } catch (const std::invalid_argument& e) {
      throw ValidationError("nodes[" + std::to_string(i) + "]", e.what());
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (s.nodes[j].node_id == s.nodes[i].node_id) {
        throw ValidationError("nodes[" + std::to_string(i) + "].id", "duplicate node id");
      }
    }
  }
  for (std::size_t i = 0; i < s.channel.loss.size(); ++i) {
    const double p = s.channel.loss[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("channel.loss." + std::string(to_string(LinkType(i))), "must be in [0, 1]");
    }
  }
  if (!(s.gateway.liot_session_timeout_s > 0.0)) {
    throw ValidationError("gateway.liot_session_timeout_s", "must be > 0");
  }
  if ((s.gateway.liot_request_mask & kAllSensors) == 0) {
    throw ValidationError("gateway.liot_request", "must request at least one sensor");
  }
}

// ---------------------------------------------------------------------------
// Kernel

namespace {

class Kernel {
 public:
  explicit Kernel(const Scenario& s)
      : sc_(s), hash_(scenario_hash(s)), gateway_(s.gateway, s.nodes, s.seed) {
    sc_.illumination.horizon_s = s.duration_s;
    sc_.illumination.jitter_seed = s.seed;
    sc_.environment.seed = s.seed;
  }

  RunResult run() {
    const double lux0 = lux_at(sc_.illumination, 0.0);
    nodes_.reserve(sc_.nodes.size());
    for (std::size_t i = 0; i < sc_.nodes.size(); ++i) {
      const auto& cfg = sc_.nodes[i];
      index_.emplace(cfg.node_id, i);
      NodeContext ctx{0.0, lux0, &sc_.environment};
      nodes_.push_back(Slot{boot(cfg, ctx), 0, 0.0, false, {}});
      nodes_.back().totals.node = cfg.node_id;
      arm(i);
    }
    queue_.push(Event{0.0, 0, EventKind::SupercapSampled, 0, 0, {}});
    queue_.push(Event{sc_.duration_s, 0, EventKind::RunEnded, 0, 0, {}});

    while (!queue_.empty()) {
      Event ev = queue_.pop();
      now_ = ev.time_s;
      ++result_.events_processed;
      if (ev.kind == EventKind::RunEnded) break;
      switch (ev.kind) {
        case EventKind::TimerFired: {
          auto& slot = nodes_[index_.at(ev.node)];
          if (ev.generation != slot.generation) break;
          step(index_.at(ev.node), std::nullopt);
          break;
        }
        case EventKind::FrameDelivered:
          if (ev.frame.dst == kGatewayId) {
            for (auto& out : gateway_.on_frame(ev.frame, now_)) transmit(out.frame, out.arrive_s);
          } else if (auto it = index_.find(ev.frame.dst); it != index_.end()) {
            step(it->second, ev.frame);
          }
          break;
        case EventKind::FrameLost:
          break;
        case EventKind::SupercapSampled:
          sample();
          break;
        case EventKind::RunEnded:
          break;
      }
    }
    finish();
    return std::move(result_);
  }

 private:
  struct Slot {
    NodeState state;
    std::uint64_t generation;
    double armed_at;
    bool frame_lost_in_cycle;
    NodeTotals totals;
  };

  NodeContext context() const { return NodeContext{now_, lux_at(sc_.illumination, now_), &sc_.environment}; }

  void arm(std::size_t i) {
    auto& slot = nodes_[i];
    const double t = slot.state.next_timer_s();
    ++slot.generation;
    slot.armed_at = t;
    if (t <= sc_.duration_s) {
      queue_.push(Event{t, 0, EventKind::TimerFired, sc_.nodes[i].node_id, slot.generation, {}});
    }
  }

  void step(std::size_t i, const std::optional<Frame>& incoming) {
    auto& slot = nodes_[i];
    const auto& cfg = sc_.nodes[i];
    auto next = advance(slot.state, cfg, context(), incoming);
    slot.state = std::move(next.state);
    absorb(i, next.emissions);
    if (slot.state.next_timer_s() != slot.armed_at) arm(i);
  }

  void absorb(std::size_t i, const std::vector<NodeEmission>& emissions) {
    auto& slot = nodes_[i];
    const NodeId id = sc_.nodes[i].node_id;
    for (const auto& e : emissions) {
      if (const auto* f = std::get_if<FrameSent>(&e)) {
        transmit(f->frame, f->frame.arrives_at_s());
      } else if (const auto* p = std::get_if<PhaseEntered>(&e)) {
        result_.transitions.push_back({p->at_s, id, p->from, p->to});
      } else if (const auto* c = std::get_if<CycleClosed>(&e)) {
        CycleRecord r = c->record;
        // The node cannot observe the fate of its final frame; a session
        // only counts when every frame of it arrived.
        if (r.outcome == Outcome::Delivered && slot.frame_lost_in_cycle) r.outcome = Outcome::FailedTimeout;
        slot.frame_lost_in_cycle = false;
        result_.cycles.push_back(r);
      } else if (const auto* d = std::get_if<EnergyDebited>(&e)) {
        slot.totals.consumed_j += d->consumed_j;
        slot.totals.harvested_j += d->harvested_j;
      }
    }
  }

  void transmit(const Frame& frame, double arrive_s) {
    const bool ok = deliver(frame, sc_.channel, channel_draw(sc_.seed, frame)) == Delivery::Delivered;
    result_.frames.push_back(FrameRecord{frame, arrive_s, ok});
    if (!ok) {
      const NodeId peer = frame.src == kGatewayId ? frame.dst : frame.src;
      if (auto it = index_.find(peer); it != index_.end()) nodes_[it->second].frame_lost_in_cycle = true;
    }
    Event e{arrive_s, 0, ok ? EventKind::FrameDelivered : EventKind::FrameLost, frame.dst, 0, {}};
    e.frame = frame;
    queue_.push(std::move(e));
  }

  void sample() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      result_.voltage.push_back({now_, sc_.nodes[i].node_id, voltage_at(nodes_[i].state, sc_.nodes[i], now_)});
    }
    ++samples_;
    const double next = double(samples_) * sc_.sample_interval_s;
    if (next <= sc_.duration_s) queue_.push(Event{next, 0, EventKind::SupercapSampled, 0, 0, {}});
  }

  void finish() {
    now_ = sc_.duration_s;
    SummaryMeta meta;
    meta.duration_s = sc_.duration_s;
    meta.seed = sc_.seed;
    meta.config_hash = hash_;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& slot = nodes_[i];
      const auto& cfg = sc_.nodes[i];
      auto last = finalize(slot.state, cfg, context());
      slot.state = std::move(last.state);
      absorb(i, last.emissions);
      slot.totals.final_voltage_v = slot.state.supercap.voltage_v;
      result_.totals.push_back(slot.totals);
      meta.kinds[cfg.node_id] = cfg.kind;
    }
    std::stable_sort(result_.cycles.begin(), result_.cycles.end(), [](const CycleRecord& a, const CycleRecord& b) {
      return a.node_id != b.node_id ? a.node_id < b.node_id : a.cycle_index < b.cycle_index;
    });
    result_.summary = summarize(result_.cycles, result_.voltage, meta);
  }

  Scenario sc_;
  std::uint64_t hash_;
  Gateway gateway_;
  EventQueue queue_;
  std::vector<Slot> nodes_;
  std::map<NodeId, std::size_t> index_;
  RunResult result_;
  double now_ = 0.0;
  std::uint64_t samples_ = 0;
};

}  // namespace

RunResult run(const Scenario& scenario) {
  validate(scenario);
  return Kernel(scenario).run();
}

}  // namespace bsim
