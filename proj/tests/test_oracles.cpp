// Frozen outputs of independent reference computations: exact rational
// arithmetic for the implied harvest powers, 200-step bisection for the
// sleep times and RK4 (2e5 steps) on dV/dt = P/(C V) for the supercap.
// The library must agree with each without sharing its formulas.

#include <doctest.h>

#include <cmath>

#include "bsim/energy.hpp"
#include "bsim/sim.hpp"

using namespace bsim;

TEST_CASE("implied harvest power matches exact rational arithmetic") {
  struct Case {
    EnergyProfile profile;
    double t_sleep;
    double p_mw;
  };
  const Case cases[] = {
      {presets::ble_table1(), 12.842, 0.98665373328985984},
      {presets::ble_table1(), 20.520, 0.76418788343558286},
      {presets::liot_table2(), 620.0, 0.64266526686209502},
      {presets::liot_table2(), 1350.0, 0.45105110987582414},
  };
  for (const auto& c : cases) CHECK(implied_harvest_power(c.profile, c.t_sleep) == doctest::Approx(c.p_mw).epsilon(1e-13));

  const auto ble = active_totals(presets::ble_table1());
  CHECK(ble.e_active_j == doctest::Approx(0.0151899).epsilon(1e-13));
  const auto liot = active_totals(presets::liot_table2());
  CHECK(liot.e_active_j == doctest::Approx(0.223413795).epsilon(1e-13));
}

TEST_CASE("sleep time matches bisection") {
  struct Case {
    double p_mw;
    double t_sleep;
  };
  const Case ble[] = {{0.5, 46.133457249070624}, {0.8, 18.878558875219682},
                      {1.2, 8.7904024767801854}, {2.0, 2.3006783493499143}};
  for (const auto& c : ble) {
    CHECK(solve_sleep_time(presets::ble_table1(), c.p_mw).t_sleep_s == doctest::Approx(c.t_sleep).epsilon(1e-11));
  }
  const Case liot[] = {{0.3, 17211.666279069745}, {0.45, 1358.7406077348062},
                       {0.7, 533.26736497941397}, {1.5, 178.49558496166213}};
  for (const auto& c : liot) {
    CHECK(solve_sleep_time(presets::liot_table2(), c.p_mw).t_sleep_s == doctest::Approx(c.t_sleep).epsilon(1e-11));
  }
}

TEST_CASE("supercap step matches RK4 integration") {
  struct Case {
    double v0;
    double p_mw;
    double dt;
    double v1;
  };
  const Case cases[] = {
      {4.0, 1.0, 10.0, 4.0062451248020103},
      {4.235, -48.45, 4.611, 4.1010011277734693},
      {4.463, -1.73, 5.56, 4.4576086638465418},
      {3.6, 0.5, 620.0, 3.8091993909482453},
  };
  for (const auto& c : cases) {
    Supercap cap;
    cap.voltage_v = c.v0;
    CHECK(supercap_step(cap, c.p_mw, c.dt).cap.voltage_v == doctest::Approx(c.v1).epsilon(1e-10));
  }
}

TEST_CASE("per-frame loss for a session PDR") {
  CHECK(per_frame_loss_for_session_pdr(0.991) == doctest::Approx(0.0018065152139684626).epsilon(1e-12));
  CHECK(per_frame_loss_for_session_pdr(0.912) == doctest::Approx(0.018254390629024897).epsilon(1e-12));
  CHECK(per_frame_loss_for_session_pdr(1.0) == 0.0);
}
