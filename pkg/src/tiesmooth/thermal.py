"""Two-node lumped-parameter thermal model of an air-conditioned house.

The house is an air node coupled to a building-mass node:

    c_air  * dT_air/dt  = ua_envelope * (t_out - T_air)
                          + h_mass * (T_mass - T_air)
                          + solar_aperture * solar
                          - q_cool                      (when cooling runs)
    c_mass * dT_mass/dt = h_mass * (T_air - T_mass)

All solar gain lands on the air node; the mass node exchanges heat only
with the air.  The system is linear, so each step is advanced with the
exact matrix exponential of the 2x2 state matrix (inputs held constant
over the step).  That keeps the integrator unconditionally stable and
makes trajectories independent of step size whenever the inputs are.

Geometry-to-parameter derivation rules live in `DerivationConstants`;
they are conventional residential defaults, surfaced so they can be
changed without code edits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache


class GeometryError(ValueError):
    """A house geometry field is outside its physical domain."""


class SingularEquilibriumError(ZeroDivisionError):
    """Steady state undefined: no conductance to the outdoors."""


@dataclass(frozen=True)
class HouseGeometry:
    """Physical description of one house, as drawn for the population."""

    floor_area: float          # m^2
    air_change_rate: float     # 1/h
    window_wall_ratio: float   # fraction of gross wall that is glazing
    shgc: float                # solar heat gain coefficient, (0, 1]
    eer: float                 # cooling W (thermal) per electrical W
    r_roof: float              # degC*m^2/W
    r_wall: float
    r_floor: float
    r_window: float
    r_door: float
    ceiling_height: float = 2.5   # m
    door_area: float = 2.0        # m^2

    def __post_init__(self):
        for name in ("floor_area", "air_change_rate", "shgc", "eer",
                     "r_roof", "r_wall", "r_floor", "r_window", "r_door",
                     "ceiling_height", "door_area"):
            if getattr(self, name) <= 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.window_wall_ratio < 1:
            raise GeometryError(f"window_wall_ratio must be in (0,1), got {self.window_wall_ratio}")
        if self.shgc > 1:
            raise GeometryError(f"shgc must be in (0,1], got {self.shgc}")


@dataclass(frozen=True)
class EtpParameters:
    """Lumped thermal parameters of one house plus its cooling device."""

    c_air: float                   # J/degC, air + fast-coupled contents
    c_mass: float                  # J/degC, building mass
    ua_envelope: float             # W/degC to outdoors, incl. infiltration
    h_mass: float                  # W/degC air<->mass coupling
    solar_aperture: float          # m^2 effective (glazing area x SHGC)
    cooling_capacity: float        # W thermal removed while running
    rated_electrical_power: float  # W electrical input while running

    def __post_init__(self):
        for name in ("c_air", "c_mass", "h_mass",
                     "solar_aperture", "cooling_capacity", "rated_electrical_power"):
            if getattr(self, name) <= 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")
        # ua_envelope = 0 is admitted so the closed (adiabatic) system can
        # be exercised; equilibrium_temperature rejects it explicitly.
        if self.ua_envelope < 0:
            raise GeometryError(f"ua_envelope must be >= 0, got {self.ua_envelope}")


@dataclass(frozen=True)
class ThermalState:
    t_air: float   # degC indoor air temperature
    t_mass: float  # degC building mass temperature

    def __post_init__(self):
        if not (math.isfinite(self.t_air) and math.isfinite(self.t_mass)):
            raise ValueError(f"non-finite thermal state ({self.t_air}, {self.t_mass})")


@dataclass(frozen=True)
class WeatherSample:
    t_out: float  # degC
    solar: float  # W/m^2 global radiation

    def __post_init__(self):
        if self.solar < 0:
            raise ValueError(f"solar must be >= 0, got {self.solar}")


@dataclass(frozen=True)
class DerivationConstants:
    """Geometry-to-parameter mapping rules.

    Square footprint is assumed: gross wall area = 4*sqrt(floor_area) *
    ceiling_height, with the glazing and the door removed from the
    conducting wall.  Infiltration enters as air_change_rate air volumes
    per hour of outdoor air.  The cooling device is sized to hold the
    design indoor temperature against the design outdoor temperature and
    design solar gain with `oversize_factor` margin, so every house can
    hold any setpoint inside its comfort band on a design-shaped day.
    """

    air_density: float = 1.2            # kg/m^3
    air_heat_capacity: float = 1005.0   # J/(kg*degC)
    c_air_multiplier: float = 3.0       # air capacity x this = c_air (fast furnishings)
    c_mass_air_ratio: float = 1.0       # c_mass = this x (volume air capacity)
    mass_coupling_ratio: float = 3.0    # h_mass = this x ua_envelope
    oversize_factor: float = 1.3
    design_outdoor_c: float = 35.0
    design_indoor_c: float = 23.0
    design_solar_wm2: float = 800.0


DEFAULT_DERIVATION = DerivationConstants()

# Electrical powers are snapped to this granularity (kW) when houses are
# built for a fleet, so sums and differences of device powers are exact
# in binary floating point.  See population.build_house.
POWER_QUANTUM_KW = 1.0 / 1024.0


def derive_etp_params(g: HouseGeometry, consts: DerivationConstants = DEFAULT_DERIVATION) -> EtpParameters:
    """Map a house geometry onto lumped thermal parameters.

    Conduction UA sums area/R over roof, floor, net wall, window and
    door; infiltration UA adds the air-change enthalpy flow.  Raises
    GeometryError when any derived quantity degenerates.
    """
    volume = g.floor_area * g.ceiling_height
    gross_wall = 4.0 * math.sqrt(g.floor_area) * g.ceiling_height
    window_area = g.window_wall_ratio * gross_wall
    net_wall = gross_wall - window_area - g.door_area
    if net_wall <= 0:
        raise GeometryError(f"door and glazing exceed the gross wall area ({gross_wall:.2f} m^2)")

    ua_conduction = (g.floor_area / g.r_roof
                     + g.floor_area / g.r_floor
                     + net_wall / g.r_wall
                     + window_area / g.r_window
                     + g.door_area / g.r_door)
    air_capacity = volume * consts.air_density * consts.air_heat_capacity
    ua_infiltration = g.air_change_rate * air_capacity / 3600.0
    ua_envelope = ua_conduction + ua_infiltration

    solar_aperture = window_area * g.shgc
    c_air = consts.c_air_multiplier * air_capacity
    c_mass = consts.c_mass_air_ratio * air_capacity
    h_mass = consts.mass_coupling_ratio * ua_envelope

    design_dt = consts.design_outdoor_c - consts.design_indoor_c
    cooling_capacity = consts.oversize_factor * (ua_envelope * design_dt
                                                 + solar_aperture * consts.design_solar_wm2)
    rated_electrical = cooling_capacity / g.eer

    return EtpParameters(
        c_air=c_air,
        c_mass=c_mass,
        ua_envelope=ua_envelope,
        h_mass=h_mass,
        solar_aperture=solar_aperture,
        cooling_capacity=cooling_capacity,
        rated_electrical_power=rated_electrical,
    )


@lru_cache(maxsize=4096)
def discretize(p: EtpParameters, dt: float):
    """Exact discrete-time update matrices for one step of length dt.

    Returns (ad, m): the state propagator exp(A*dt) and the input
    integral  m = integral_0^dt exp(A*s) ds, both as nested 2x2 tuples.
    The state matrix always has two distinct real eigenvalues (the
    off-diagonal product h^2/(c_air*c_mass) is positive), so the
    eigendecomposition is taken in closed form.  Valid for ua_envelope
    >= 0; ua = 0 gives one zero eigenvalue and a conservative system.
    """
    a11 = -(p.ua_envelope + p.h_mass) / p.c_air
    a12 = p.h_mass / p.c_air
    a21 = p.h_mass / p.c_mass
    a22 = -p.h_mass / p.c_mass

    tr = a11 + a22
    disc = math.sqrt((a11 - a22) ** 2 + 4.0 * a12 * a21)
    lam1 = 0.5 * (tr + disc)
    lam2 = 0.5 * (tr - disc)

    # Eigenvectors v_i = (lam_i - a22, a21); a21 > 0 keeps them independent.
    v1 = lam1 - a22
    v2 = lam2 - a22
    det = a21 * (v1 - v2)

    def phi(lam: float) -> float:
        # integral of exp(lam*s) over the step, stable near lam = 0
        u = lam * dt
        if u == 0.0:
            return dt
        return math.expm1(u) / lam

    e1, e2 = math.exp(lam1 * dt), math.exp(lam2 * dt)
    f1, f2 = phi(lam1), phi(lam2)

    def transform(d1: float, d2: float):
        # V diag(d1,d2) V^-1 written out for the 2x2 case
        m11 = (v1 * d1 * a21 - v2 * d2 * a21) / det
        m12 = (-v1 * d1 * v2 + v2 * d2 * v1) / det
        m21 = (a21 * d1 * a21 - a21 * d2 * a21) / det
        m22 = (-a21 * d1 * v2 + a21 * d2 * v1) / det
        return ((m11, m12), (m21, m22))

    return transform(e1, e2), transform(f1, f2)


def _forcing(p: EtpParameters, w: WeatherSample, cooling_on: bool) -> float:
    q_cool = p.cooling_capacity if cooling_on else 0.0
    return (p.ua_envelope * w.t_out + p.solar_aperture * w.solar - q_cool) / p.c_air


def etp_step(s: ThermalState, p: EtpParameters, w: WeatherSample,
             cooling_on: bool, dt: float) -> ThermalState:
    """Advance the thermal state dt seconds with inputs held constant."""
    if not 0 < dt <= 60.0:
        raise ValueError(f"dt must be in (0, 60] s, got {dt}")
    ad, m = discretize(p, dt)
    b0 = _forcing(p, w, cooling_on)
    t_air = ad[0][0] * s.t_air + ad[0][1] * s.t_mass + m[0][0] * b0
    t_mass = ad[1][0] * s.t_air + ad[1][1] * s.t_mass + m[1][0] * b0
    return ThermalState(t_air=t_air, t_mass=t_mass)


def equilibrium_temperature(p: EtpParameters, w: WeatherSample, cooling_on: bool) -> float:
    """Steady-state indoor air temperature for fixed inputs.

    At equilibrium the mass node matches the air node, so the air
    balance reduces to ua * (t_out - t_air) + q_net = 0.
    """
    if p.ua_envelope == 0:
        raise SingularEquilibriumError("ua_envelope = 0 has no finite equilibrium")
    q_cool = p.cooling_capacity if cooling_on else 0.0
    return w.t_out + (p.solar_aperture * w.solar - q_cool) / p.ua_envelope
