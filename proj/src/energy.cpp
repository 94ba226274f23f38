#include "bsim/energy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsim {
namespace {

constexpr double kMilli = 1e-3;

// Relative slack for the "harvest exactly covers the active phase" boundary,
// where e/t*t can land one ulp short of e.
constexpr double kBoundaryRelTol = 1e-12;

constexpr std::array<std::pair<StageKind, std::string_view>, 8> kStageNames{{
    {StageKind::SensorRead, "SensorRead"},
    {StageKind::BleAdvertise, "BleAdvertise"},
    {StageKind::BleDataExchange, "BleDataExchange"},
    {StageKind::GwRequest, "GwRequest"},
    {StageKind::LiotSensorRead, "LiotSensorRead"},
    {StageKind::LiotDataUpload, "LiotDataUpload"},
    {StageKind::LiotSleepSet, "LiotSleepSet"},
    {StageKind::Sleep, "Sleep"},
}};

}  // namespace

std::string_view to_string(StageKind kind) {
  for (const auto& [k, name] : kStageNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<StageKind> stage_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kStageNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(SleepSolution::Kind kind) {
  switch (kind) {
    case SleepSolution::Kind::Finite: return "finite";
    case SleepSolution::Kind::Continuous: return "continuous";
    case SleepSolution::Kind::Infeasible: return "infeasible";
  }
  return "?";
}

const Stage& EnergyProfile::stage(StageKind kind) const {
  for (const auto& s : active_stages) {
    if (s.kind == kind) return s;
  }
  throw std::out_of_range("energy profile has no stage " + std::string(to_string(kind)));
}

bool EnergyProfile::has_stage(StageKind kind) const {
  return std::any_of(active_stages.begin(), active_stages.end(),
                     [kind](const Stage& s) { return s.kind == kind; });
}

void validate(const EnergyProfile& profile) {
  if (!(profile.voltage_v > 0.0)) throw std::invalid_argument("profile voltage must be > 0");
  if (profile.active_stages.empty()) throw std::invalid_argument("profile has no active stages");
  double min_current = std::numeric_limits<double>::infinity();
  for (const auto& s : profile.active_stages) {
    if (s.kind == StageKind::Sleep) {
      throw std::invalid_argument("Sleep is not an active stage");
    }
    if (!(s.current_ma > 0.0) || !std::isfinite(s.current_ma)) {
      throw std::invalid_argument("stage " + std::string(to_string(s.kind)) + ": current must be > 0");
    }
    if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) {
      throw std::invalid_argument("stage " + std::string(to_string(s.kind)) + ": duration must be > 0");
    }
    min_current = std::min(min_current, s.current_ma);
  }
  if (!(profile.sleep_current_ma >= 0.0) || !(profile.sleep_current_ma < min_current)) {
    throw std::invalid_argument("sleep current must be below every active stage current");
  }
}

HarvesterCurve::HarvesterCurve(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("harvester curve needs at least one point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(p.power_mw >= 0.0) || !std::isfinite(p.power_mw) || !std::isfinite(p.lux) || p.lux < 0.0) {
      throw std::invalid_argument("harvester point " + std::to_string(i) + " out of range");
    }
    if (i > 0) {
      if (!(p.lux > points_[i - 1].lux)) {
        throw std::invalid_argument("harvester lux values must be strictly increasing");
      }
      if (p.power_mw < points_[i - 1].power_mw) {
        throw std::invalid_argument("harvester power must be non-decreasing in lux");
      }
    }
  }
}

double HarvesterCurve::power_mw(double lux) const {
  if (points_.empty()) return 0.0;
  if (lux <= points_.front().lux) return points_.front().power_mw;
  if (lux >= points_.back().lux) return points_.back().power_mw;
  auto hi = std::upper_bound(points_.begin(), points_.end(), lux,
                             [](double l, const Point& p) { return l < p.lux; });
  auto lo = hi - 1;
  const double f = (lux - lo->lux) / (hi->lux - lo->lux);
  return lo->power_mw + f * (hi->power_mw - lo->power_mw);
}

void validate(const Supercap& cap) {
  if (!(cap.capacitance_f > 0.0)) throw std::invalid_argument("supercap capacitance must be > 0");
  if (!(cap.v_min_v >= 0.0)) throw std::invalid_argument("supercap v_min must be >= 0");
  if (!(cap.v_max_v > cap.v_min_v)) throw std::invalid_argument("supercap v_max must exceed v_min");
  if (!(cap.voltage_v >= cap.v_min_v && cap.voltage_v <= cap.v_max_v)) {
    throw std::invalid_argument("supercap voltage must lie in [v_min, v_max]");
  }
}

double stage_energy(const Stage& stage, double voltage_v) {
  return stage.current_ma * kMilli * voltage_v * stage.duration_s;
}

ActiveTotals active_totals(const EnergyProfile& profile) {
  ActiveTotals totals{0.0, 0.0};
  for (const auto& s : profile.active_stages) {
    totals.t_active_s += s.duration_s;
    totals.e_active_j += stage_energy(s, profile.voltage_v);
  }
  return totals;
}

SleepSolution solve_sleep_time(const EnergyProfile& profile, double p_harv_mw) {
  if (!(p_harv_mw >= 0.0)) throw std::invalid_argument("harvest power must be >= 0");
  const auto [t_active, e_active] = active_totals(profile);
  const double p_harv = p_harv_mw * kMilli;
  const double p_sleep = profile.sleep_power_mw() * kMilli;

  if (p_harv * t_active >= e_active * (1.0 - kBoundaryRelTol)) {
    return {SleepSolution::Kind::Continuous, 0.0};
  }
  if (p_harv <= p_sleep) return {SleepSolution::Kind::Infeasible, 0.0};
  return {SleepSolution::Kind::Finite, (e_active - p_harv * t_active) / (p_harv - p_sleep)};
}

double implied_harvest_power(const EnergyProfile& profile, double t_sleep_s) {
  if (!(t_sleep_s > 0.0)) throw std::invalid_argument("sleep time must be > 0");
  const auto [t_active, e_active] = active_totals(profile);
  const double p_sleep = profile.sleep_power_mw() * kMilli;
  return (e_active + p_sleep * t_sleep_s) / (t_active + t_sleep_s) / kMilli;
}

CycleBudget cycle_budget(const EnergyProfile& profile, double p_harv_mw, double t_sleep_s) {
  const auto [t_active, e_active] = active_totals(profile);
  return CycleBudget{t_active, e_active, t_sleep_s,
                     profile.sleep_power_mw() * kMilli * t_sleep_s, p_harv_mw};
}

SupercapStep supercap_step(const Supercap& cap, double p_net_mw, double dt_s,
                           double charge_efficiency) {
  if (!(dt_s >= 0.0)) throw std::invalid_argument("supercap step needs dt >= 0");
  double energy_j = p_net_mw * kMilli * dt_s;
  if (energy_j > 0.0) energy_j *= charge_efficiency;

  const double v2 = cap.voltage_v * cap.voltage_v + 2.0 * energy_j / cap.capacitance_f;
  const double floor2 = cap.v_min_v * cap.v_min_v;

  SupercapStep out{cap, v2 < floor2};
  out.cap.voltage_v = std::clamp(std::sqrt(std::max(floor2, v2)), cap.v_min_v, cap.v_max_v);
  return out;
}

double time_to_depletion(const Supercap& cap, double p_net_mw) {
  if (p_net_mw >= 0.0) return std::numeric_limits<double>::infinity();
  return cap.usable_energy_j() / (-p_net_mw * kMilli);
}

namespace presets {

EnergyProfile ble_table1() {
  return EnergyProfile{
      3.3,
      {
          {StageKind::SensorRead, 7.550, 0.260},
          {StageKind::BleAdvertise, 0.400, 4.000},
          {StageKind::BleDataExchange, 0.800, 1.300},
      },
      0.070,
  };
}

EnergyProfile liot_table2() {
  return EnergyProfile{
      3.3,
      {
          {StageKind::GwRequest, 12.69, 0.428},
          {StageKind::LiotSensorRead, 17.73, 0.525},
          {StageKind::LiotDataUpload, 14.58, 3.58},
          {StageKind::LiotSleepSet, 9.81, 0.078},
      },
      0.087,
  };
}

HarvesterCurve ble_harvester() {
  const auto profile = ble_table1();
  return HarvesterCurve({
      {0.0, 0.0},
      {500.0, implied_harvest_power(profile, kBleSleep500)},
      {700.0, implied_harvest_power(profile, kBleSleep700)},
  });
}

HarvesterCurve liot_harvester() {
  const auto profile = liot_table2();
  return HarvesterCurve({
      {0.0, 0.0},
      {500.0, implied_harvest_power(profile, kLiotSleep500)},
      {700.0, implied_harvest_power(profile, kLiotSleep700)},
  });
}

std::optional<EnergyProfile> profile_by_name(std::string_view name) {
  if (name == "ble-table1") return ble_table1();
  if (name == "liot-table2") return liot_table2();
  return std::nullopt;
}

std::optional<HarvesterCurve> harvester_by_name(std::string_view name) {
  if (name == "ble-default") return ble_harvester();
  if (name == "liot-default") return liot_harvester();
  return std::nullopt;
}

}  // namespace presets
}  // namespace bsim
