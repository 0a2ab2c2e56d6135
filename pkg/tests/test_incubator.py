import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from twinwatch.incubator import (
    Fault,
    FaultSchedule,
    IncubatorParams,
    Thermostat,
    build_system,
    continuous_model,
    simulate_run,
    thermostat_inputs,
)
from twinwatch.statespace import discretize, simulate, step


def ode_one_step(p, x0, u):
    """Integrate the continuous plant over one sample period at tight tolerance."""

    def rhs(_, x):
        th, tb = x
        P, tr = u
        return [
            (P * p.p_heat - p.g_hb * (th - tb)) / p.c_h,
            (p.g_hb * (th - tb) - p.g_br * (tb - tr)) / p.c_b,
        ]

    sol = solve_ivp(rhs, (0.0, p.dt), x0, method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:, -1]


def test_ode_oracle_matches_discrete_system():
    p = IncubatorParams()
    sys = build_system(p)
    for x0, u in [([1, 0], [0, 0]), ([0, 1], [0, 0]), ([0, 0], [1, 0]), ([0, 0], [0, 1]), ([45.0, 35.0], [1, 21.0])]:
        assert np.allclose(step(sys, x0, u), ode_one_step(p, x0, u), rtol=0, atol=1e-8)


def test_decoupled_limit_gives_identity_A():
    sys = build_system(IncubatorParams(g_hb=0.0, g_br=0.0))
    assert np.allclose(sys.A, np.eye(2), atol=1e-15)
    assert sys.B[0, 0] == pytest.approx(30.0 * 3.0 / 300.0)


def test_equilibrium_is_fixed_point():
    p = IncubatorParams()
    sys = build_system(p)
    x = np.array([p.t_room, p.t_room])
    assert np.allclose(step(sys, x, [0.0, p.t_room]), x, rtol=0, atol=1e-12)


def test_measurement_selects_box_temperature():
    sys = build_system(IncubatorParams())
    assert sys.C.tolist() == [[0.0, 1.0]]
    assert sys.R.tolist() == [[1e-4, 0.0], [0.0, 1e-4]]
    assert sys.Q.tolist() == [[2.5e-3]]


@settings(max_examples=100, deadline=None)
@given(
    st.floats(10, 5000),
    st.floats(10, 5000),
    st.floats(0.01, 20),
    st.floats(0.01, 20),
    st.floats(0.1, 30),
)
def test_passive_plant_is_stable(c_h, c_b, g_hb, g_br, dt):
    sys = build_system(IncubatorParams(c_h=c_h, c_b=c_b, g_hb=g_hb, g_br=g_br, dt=dt))
    assert np.max(np.abs(np.linalg.eigvals(sys.A))) < 1.0


def test_cooling_converges_monotonically_to_room():
    p = IncubatorParams()
    sys = build_system(p)
    tr = simulate(sys, [60.0, 40.0], [[0.0, p.t_room]] * 6000)
    dist = np.linalg.norm(tr.states - p.t_room, axis=1)
    assert np.all(np.diff(dist) < 0)
    assert dist[-1] < 1e-3


def test_thermostat_hysteresis():
    t = Thermostat(35.0, 1.0)
    assert t(30.0) is True
    assert t(35.2) is True  # inside the band: hold
    assert t(35.6) is False
    assert t(34.8) is False
    assert t(34.4) is True


def test_thermostat_inputs_empty_and_saturated():
    sys = build_system(IncubatorParams())
    assert thermostat_inputs(35, 1, 21, 0, sys) == []
    ins = thermostat_inputs(500.0, 1.0, 21.0, 300, sys)
    assert all(u[0] == 1.0 and u[1] == 21.0 for u in ins)


def steady_box_range(setpoint=35.0, band=1.0):
    sys = build_system(IncubatorParams())
    ins = thermostat_inputs(setpoint, band, 21.0, 4000, sys)
    tb = simulate(sys, [21.0, 21.0], ins).states[2000:, 1]
    return tb.min(), tb.max(), np.array(ins)[2000:, 0]


def test_thermostat_cycles_around_setpoint():
    lo, hi, heater = steady_box_range()
    assert 0 < heater.mean() < 1  # keeps switching
    assert lo >= 35.0 - 1.0
    assert lo < 35.0 - 0.5 and hi > 35.0 + 0.5  # crosses both switching thresholds


@pytest.mark.xfail(
    strict=True,
    reason="heat stored in the heater overshoots the box to ~36.42 C with the default plant, "
    "past setpoint+band",
)
def test_thermostat_steady_state_within_band():
    lo, hi, _ = steady_box_range()
    assert 34.0 <= lo and hi <= 36.0


def test_fault_schedule_validation_and_json():
    with pytest.raises(ValueError):
        FaultSchedule((Fault(0, 10), Fault(5, 20)))
    with pytest.raises(ValueError):
        Fault(0, 10, "g_br", 0.0)
    with pytest.raises(ValueError):
        Fault(0, 10, "c_h", 2.0)
    fs = FaultSchedule((Fault(600, 660, "g_br", 10.0), Fault(100, 110, "g_br", 2.0)))
    assert [f.start for f in fs.faults] == [100, 600]
    assert fs.active(600).factor == 10.0 and fs.active(660) is None
    assert FaultSchedule.from_json(fs.to_json()) == fs
    assert set(json.loads(fs.to_json())[0]) == {"start", "end", "param", "factor"}


def test_params_json_field_names():
    p = IncubatorParams(c_h=250.0)
    d = p.to_dict()
    assert set(d) == {"c_h", "c_b", "g_hb", "g_br", "p_heat", "t_room", "dt"}
    assert IncubatorParams.from_dict(json.loads(json.dumps(d))) == p
    with pytest.raises(ValueError):
        IncubatorParams(c_b=0.0)


def test_simulate_run_without_faults_matches_plain_closed_loop():
    p = IncubatorParams()
    tr, recs = simulate_run(p, FaultSchedule(), 300, seed=3)
    tr2, recs2 = simulate_run(p, FaultSchedule((Fault(100, 200, "g_br", 1.0),)), 300, seed=3)
    assert np.array_equal(tr.states, tr2.states)
    assert recs == recs2
    # noise-free closed loop reproduces thermostat_inputs
    quiet = simulate_run(p, FaultSchedule(), 300, seed=3, R=np.zeros((2, 2)), Q=[[0.0]])[0]
    sys = build_system(p)
    assert np.array_equal(quiet.inputs, np.array(thermostat_inputs(35.0, 1.0, 21.0, 300, sys)))


def test_simulate_run_telemetry_shape():
    p = IncubatorParams()
    tr, recs = simulate_run(p, FaultSchedule(), 50, seed=1)
    assert len(recs) == 50
    assert recs[0].timestamp == 3.0 and recs[-1].timestamp == 150.0
    assert all(r.t_room == 21.0 for r in recs)
    assert [r.t_heater for r in recs] == tr.states[:, 0].tolist()
    assert [r.t_box for r in recs] == tr.measurements[:, 0].tolist()
    assert [float(r.heater_on) for r in recs] == tr.inputs[:, 0].tolist()


def test_lid_open_cools_the_box():
    p = IncubatorParams()
    _, recs = simulate_run(p, FaultSchedule((Fault(600, 660, "g_br", 10.0),)), 700, seed=5)
    tb = np.array([r.t_box for r in recs])
    # steps k = 600..659 are indices 599..658
    assert tb[599:659].mean() < tb[539:599].mean()
