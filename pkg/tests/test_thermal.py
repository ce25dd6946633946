"""House thermal model: derivation rules, exact stepping, equilibria."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiesmooth.rng import substream
from tiesmooth.thermal import (EtpParameters, GeometryError,
                               HouseGeometry, SingularEquilibriumError,
                               ThermalState, WeatherSample, derive_etp_params,
                               discretize, equilibrium_temperature, etp_step)


def nominal_geometry(**overrides):
    base = dict(floor_area=132.0, air_change_rate=0.5, window_wall_ratio=0.15,
                shgc=0.36, eer=3.5, r_roof=5.28, r_wall=2.99, r_floor=3.35,
                r_window=0.38, r_door=0.88)
    base.update(overrides)
    return HouseGeometry(**base)


def random_table_geometry(gen):
    """One draw from the population distribution tables."""
    return HouseGeometry(
        floor_area=gen.uniform(88, 176),
        air_change_rate=gen.uniform(0.32, 0.68),
        window_wall_ratio=gen.uniform(0.12, 0.18),
        shgc=gen.uniform(0.22, 0.5),
        eer=gen.uniform(3, 4),
        r_roof=gen.uniform(3.18, 7.38),
        r_wall=gen.uniform(1.94, 4.04),
        r_floor=gen.uniform(2.30, 4.40),
        r_window=gen.uniform(0.29, 0.47),
        r_door=gen.uniform(0.67, 1.09),
    )


class TestDeriveEtpParams:
    def test_nominal_house_frozen_values(self):
        # hand evaluation of the stated mapping: square footprint,
        # gross wall 4*sqrt(132)*2.5, glazing and door removed from the
        # conducting wall, conduction + infiltration UA
        p = derive_etp_params(nominal_geometry())
        assert p.ua_envelope == pytest.approx(199.29501936731697, rel=1e-12)
        assert p.solar_aperture == pytest.approx(6.20412765826107, rel=1e-12)
        assert p.c_air == pytest.approx(1193940.0, rel=1e-12)
        assert p.c_mass == pytest.approx(397980.0, rel=1e-12)
        assert p.h_mass == pytest.approx(3.0 * 199.29501936731697, rel=1e-12)
        assert p.cooling_capacity == pytest.approx(9561.29506672166, rel=1e-10)
        assert p.rated_electrical_power == pytest.approx(p.cooling_capacity / 3.5,
                                                         rel=1e-12)

    def test_doubling_resistances_halves_conduction(self):
        g1 = nominal_geometry()
        g2 = nominal_geometry(r_roof=2 * 5.28, r_wall=2 * 2.99, r_floor=2 * 3.35,
                              r_window=2 * 0.38, r_door=2 * 0.88)
        infiltration = 0.5 * 132.0 * 2.5 * 1.2 * 1005.0 / 3600.0
        cond1 = derive_etp_params(g1).ua_envelope - infiltration
        cond2 = derive_etp_params(g2).ua_envelope - infiltration
        assert cond2 == pytest.approx(cond1 / 2.0, rel=1e-12)

    def test_zero_air_change_leaves_pure_conduction(self):
        tiny = 1e-12  # air_change_rate must stay positive per the invariants
        p = derive_etp_params(nominal_geometry(air_change_rate=tiny))
        g = nominal_geometry()
        wall = 4.0 * math.sqrt(g.floor_area) * g.ceiling_height
        window = g.window_wall_ratio * wall
        net_wall = wall - window - g.door_area
        conduction = (g.floor_area / g.r_roof + g.floor_area / g.r_floor
                      + net_wall / g.r_wall + window / g.r_window
                      + g.door_area / g.r_door)
        assert p.ua_envelope == pytest.approx(conduction, rel=1e-9)

    def test_monotone_in_areas_and_resistances(self):
        base = derive_etp_params(nominal_geometry()).ua_envelope
        assert derive_etp_params(nominal_geometry(floor_area=150)).ua_envelope > base
        assert derive_etp_params(nominal_geometry(air_change_rate=0.7)).ua_envelope > base
        for field in ("r_roof", "r_wall", "r_floor", "r_window", "r_door"):
            bigger = derive_etp_params(
                nominal_geometry(**{field: getattr(nominal_geometry(), field) * 1.5}))
            assert bigger.ua_envelope < base

    def test_nonpositive_geometry_rejected(self):
        with pytest.raises(GeometryError):
            nominal_geometry(floor_area=-1.0)
        with pytest.raises(GeometryError):
            nominal_geometry(window_wall_ratio=1.2)
        with pytest.raises(GeometryError):
            nominal_geometry(r_wall=0.0)


class TestEtpStep:
    def test_converges_to_outdoor_without_gains(self):
        p = derive_etp_params(nominal_geometry())
        w = WeatherSample(t_out=30.0, solar=0.0)
        s = ThermalState(20.0, 20.0)
        for _ in range(20000):
            s = etp_step(s, p, w, cooling_on=False, dt=60.0)
        assert s.t_air == pytest.approx(30.0, abs=1e-9)
        assert s.t_mass == pytest.approx(30.0, abs=1e-9)

    def test_solar_steady_state_matches_linear_solve(self):
        # independent oracle: solve the 2x2 steady state directly
        p = derive_etp_params(nominal_geometry())
        w = WeatherSample(t_out=32.0, solar=600.0)
        a = np.array([[-(p.ua_envelope + p.h_mass), p.h_mass],
                      [p.h_mass, -p.h_mass]])
        b = np.array([-(p.ua_envelope * w.t_out + p.solar_aperture * w.solar), 0.0])
        fixed = np.linalg.solve(a, b)
        s = ThermalState(25.0, 25.0)
        for _ in range(30000):
            s = etp_step(s, p, w, cooling_on=False, dt=60.0)
        assert s.t_air == pytest.approx(fixed[0], abs=1e-6)
        assert s.t_mass == pytest.approx(s.t_air, abs=1e-6)

    def test_matches_scipy_expm_oracle(self):
        sla = pytest.importorskip("scipy.linalg")
        gen = substream(2024, 99)
        for _ in range(50):
            g = random_table_geometry(gen)
            p = derive_etp_params(g)
            dt = float(gen.uniform(1.0, 60.0))
            ad, m = discretize(p, dt)
            a = np.array([[-(p.ua_envelope + p.h_mass) / p.c_air, p.h_mass / p.c_air],
                          [p.h_mass / p.c_mass, -p.h_mass / p.c_mass]])
            expm = sla.expm(a * dt)
            assert np.allclose(np.array(ad), expm, rtol=0, atol=1e-12)
            integral = np.linalg.solve(a, expm - np.eye(2))
            assert np.allclose(np.array(m), integral, rtol=1e-9, atol=1e-9)

    def test_dt_bounds_enforced(self):
        p = derive_etp_params(nominal_geometry())
        with pytest.raises(ValueError):
            etp_step(ThermalState(25, 25), p, WeatherSample(30, 0), False, 0.0)
        with pytest.raises(ValueError):
            etp_step(ThermalState(25, 25), p, WeatherSample(30, 0), False, 61.0)

    @settings(max_examples=40, deadline=None)
    @given(c_air=st.floats(1e5, 5e6), c_mass=st.floats(1e5, 5e7),
           h=st.floats(10.0, 5e3))
    def test_closed_system_conserves_energy(self, c_air, c_mass, h):
        p = EtpParameters(c_air=c_air, c_mass=c_mass, ua_envelope=0.0, h_mass=h,
                          solar_aperture=1.0, cooling_capacity=1000.0,
                          rated_electrical_power=300.0)
        w = WeatherSample(t_out=50.0, solar=0.0)  # irrelevant: ua = 0
        s = ThermalState(30.0, 18.0)
        energy0 = c_air * s.t_air + c_mass * s.t_mass
        for _ in range(2000):
            s = etp_step(s, p, w, cooling_on=False, dt=30.0)
        energy = c_air * s.t_air + c_mass * s.t_mass
        assert energy == pytest.approx(energy0, rel=1e-9)
        # node gap decays at the nonzero eigenvalue rate
        lam = -h * (1.0 / c_air + 1.0 / c_mass)
        bound = abs(30.0 - 18.0) * math.exp(lam * 2000 * 30.0) + 1e-9
        assert abs(s.t_air - s.t_mass) <= bound * (1.0 + 1e-6)

    def test_eigenvalues_negative_for_positive_parameters(self):
        gen = substream(7, 11)
        for _ in range(200):
            p = derive_etp_params(random_table_geometry(gen))
            a11 = -(p.ua_envelope + p.h_mass) / p.c_air
            a22 = -p.h_mass / p.c_mass
            tr = a11 + a22
            disc = math.sqrt((a11 - a22) ** 2
                             + 4.0 * (p.h_mass ** 2) / (p.c_air * p.c_mass))
            assert 0.5 * (tr + disc) < 0
            assert 0.5 * (tr - disc) < 0

    def test_dt_halving_changes_trajectory_little(self):
        # varying weather resolved at two step sizes over one hour
        gen = substream(3, 5)
        for _ in range(20):
            p = derive_etp_params(random_table_geometry(gen))
            weather = [WeatherSample(t_out=30 + 5 * math.sin(i / 5.0),
                                     solar=max(0.0, 500 * math.cos(i / 7.0)))
                       for i in range(60)]
            coarse = ThermalState(26.0, 26.0)
            fine = ThermalState(26.0, 26.0)
            for i, w in enumerate(weather):
                cooling = i % 3 == 0
                coarse = etp_step(coarse, p, w, cooling, 60.0)
                fine = etp_step(fine, p, w, cooling, 30.0)
                fine = etp_step(fine, p, w, cooling, 30.0)
            assert abs(coarse.t_air - fine.t_air) < 0.01


class TestEquilibrium:
    def test_no_gains_equilibrium_is_outdoor(self):
        p = derive_etp_params(nominal_geometry())
        assert equilibrium_temperature(p, WeatherSample(28.0, 0.0), False) == 28.0

    def test_constructed_inverse(self):
        # capacity chosen so the cooled steady state lands on 26
        ua = 200.0
        p = EtpParameters(c_air=1e6, c_mass=4e5, ua_envelope=ua, h_mass=600.0,
                          solar_aperture=5.0, cooling_capacity=ua * (35.0 - 26.0),
                          rated_electrical_power=500.0)
        t = equilibrium_temperature(p, WeatherSample(35.0, 0.0), cooling_on=True)
        assert t == pytest.approx(26.0, abs=1e-12)

    def test_singular_when_no_envelope(self):
        p = EtpParameters(c_air=1e6, c_mass=4e5, ua_envelope=0.0, h_mass=600.0,
                          solar_aperture=5.0, cooling_capacity=1000.0,
                          rated_electrical_power=300.0)
        with pytest.raises(SingularEquilibriumError):
            equilibrium_temperature(p, WeatherSample(30.0, 0.0), False)

    def test_long_horizon_integration_agrees(self):
        gen = substream(11, 13)
        for _ in range(30):
            p = derive_etp_params(random_table_geometry(gen))
            w = WeatherSample(t_out=float(gen.uniform(26, 38)),
                              solar=float(gen.uniform(0, 900)))
            cooling = bool(gen.integers(0, 2))
            target = equilibrium_temperature(p, w, cooling)
            s = ThermalState(27.0, 27.0)
            for _ in range(4000):
                s = etp_step(s, p, w, cooling, 60.0)
            assert abs(s.t_air - target) < 1e-4

    def test_more_capacity_never_raises_steady_state(self):
        p = derive_etp_params(nominal_geometry())
        w = WeatherSample(34.0, 700.0)
        temps = []
        for scale in (1.0, 1.2, 1.5, 2.0):
            bigger = EtpParameters(
                c_air=p.c_air, c_mass=p.c_mass, ua_envelope=p.ua_envelope,
                h_mass=p.h_mass, solar_aperture=p.solar_aperture,
                cooling_capacity=p.cooling_capacity * scale,
                rated_electrical_power=p.rated_electrical_power)
            temps.append(equilibrium_temperature(bigger, w, True))
        assert all(t2 < t1 for t1, t2 in zip(temps, temps[1:]))
