// Energy producer/consumer model for batteryless sensor nodes.
//
// Units used throughout the library: currents in milliamperes, power in
// milliwatts, time in seconds, energy in joules, voltage in volts.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bsim {

enum class StageKind {
  SensorRead,
  BleAdvertise,
  BleDataExchange,
  GwRequest,
  LiotSensorRead,
  LiotDataUpload,
  LiotSleepSet,
  Sleep,
};

std::string_view to_string(StageKind kind);
std::optional<StageKind> stage_kind_from_string(std::string_view name);

struct Stage {
  StageKind kind;
  double current_ma;
  double duration_s;

  bool operator==(const Stage&) const = default;
};

/// Per-stage consumption table for one node build at one supply voltage.
struct EnergyProfile {
  double voltage_v = 3.3;
  std::vector<Stage> active_stages;
  double sleep_current_ma = 0.0;

  double sleep_power_mw() const { return sleep_current_ma * voltage_v; }
  /// Throws std::out_of_range when the profile has no stage of that kind.
  const Stage& stage(StageKind kind) const;
  bool has_stage(StageKind kind) const;

  bool operator==(const EnergyProfile&) const = default;
};

/// Throws std::invalid_argument describing the first violated invariant.
void validate(const EnergyProfile& profile);

/// Harvested power vs. illuminance, piecewise linear, clamped at the ends.
class HarvesterCurve {
 public:
  struct Point {
    double lux;
    double power_mw;
    bool operator==(const Point&) const = default;
  };

  HarvesterCurve() = default;
  /// Throws std::invalid_argument unless lux is strictly increasing and
  /// power is non-negative and non-decreasing.
  explicit HarvesterCurve(std::vector<Point> points);

  double power_mw(double lux) const;
  const std::vector<Point>& points() const { return points_; }

  bool operator==(const HarvesterCurve&) const = default;

 private:
  std::vector<Point> points_;
};

/// Ideal supercapacitor energy buffer. The floor ½·C·v_min² is the
/// minimum buffered energy the node must never dip below.
struct Supercap {
  double capacitance_f = 0.4;
  double voltage_v = 4.5;
  double v_min_v = 3.3;
  double v_max_v = 4.5;

  double stored_energy_j() const { return 0.5 * capacitance_f * voltage_v * voltage_v; }
  double floor_energy_j() const { return 0.5 * capacitance_f * v_min_v * v_min_v; }
  double usable_energy_j() const { return stored_energy_j() - floor_energy_j(); }

  bool operator==(const Supercap&) const = default;
};

void validate(const Supercap& cap);

struct CycleBudget {
  double t_active_s;
  double e_active_j;
  double t_sleep_s;
  double e_sleep_j;
  double p_harv_mw;
};

struct ActiveTotals {
  double t_active_s;
  double e_active_j;
};

struct SleepSolution {
  enum class Kind { Finite, Continuous, Infeasible };
  Kind kind;
  /// Minimal sleep satisfying the energy balance; 0 unless kind == Finite.
  double t_sleep_s;
};

std::string_view to_string(SleepSolution::Kind kind);

double stage_energy(const Stage& stage, double voltage_v);
ActiveTotals active_totals(const EnergyProfile& profile);

/// Smallest sleep time T_s such that harvested energy over T_a + T_s covers
/// the active energy plus sleep energy. Throws std::invalid_argument on a
/// negative harvest power.
SleepSolution solve_sleep_time(const EnergyProfile& profile, double p_harv_mw);

/// Harvest power that makes `t_sleep_s` the exact balance point; the
/// inverse of solve_sleep_time.
double implied_harvest_power(const EnergyProfile& profile, double t_sleep_s);

CycleBudget cycle_budget(const EnergyProfile& profile, double p_harv_mw, double t_sleep_s);

struct SupercapStep {
  Supercap cap;
  bool depleted;
};

/// Integrates a constant net power (harvest minus load, may be negative)
/// over dt. Positive inflow is scaled by charge_efficiency. The result is
/// clamped to [v_min, v_max]; falling below v_min sets `depleted`.
SupercapStep supercap_step(const Supercap& cap, double p_net_mw, double dt_s,
                           double charge_efficiency = 1.0);

/// Seconds until the voltage reaches v_min under constant p_net; infinity
/// when p_net >= 0.
double time_to_depletion(const Supercap& cap, double p_net_mw);

namespace presets {

/// BLE node consumption profile at 3.3 V.
EnergyProfile ble_table1();
/// LIoT node consumption profile at 3.3 V.
EnergyProfile liot_table2();

/// Sleep times the BLE and LIoT builds use at 700 lx and 500 lx.
inline constexpr double kBleSleep700 = 12.842;
inline constexpr double kBleSleep500 = 20.520;
inline constexpr double kLiotSleep700 = 620.0;
inline constexpr double kLiotSleep500 = 1350.0;

/// Harvester curves back-derived from the reference sleep times; a (0, 0)
/// point anchors the dark end.
HarvesterCurve ble_harvester();
HarvesterCurve liot_harvester();

std::optional<EnergyProfile> profile_by_name(std::string_view name);
std::optional<HarvesterCurve> harvester_by_name(std::string_view name);

}  // namespace presets
}  // namespace bsim
