"""Intelligent Driver Model longitudinal dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


class AlreadyCollidingError(ValueError):
    """Raised when the IDM is evaluated at a non-positive gap."""


@dataclass(frozen=True)
class IdmParams:
    """Car-following parameters.

    v0: desired speed (m/s)
    T: safe time headway (s)
    a_max: maximum acceleration (m/s^2)
    b: comfortable deceleration (m/s^2)
    delta: acceleration exponent
    s0: minimum bumper-to-bumper gap (m)
    vehicle_length: m
    """

    v0: float = 30.0
    T: float = 1.5
    a_max: float = 1.0
    b: float = 2.0
    delta: float = 4.0
    s0: float = 2.0
    vehicle_length: float = 5.0

    def __post_init__(self):
        for name in ("v0", "T", "a_max", "b", "delta", "s0", "vehicle_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be strictly positive")
        if self.delta < 1:
            raise ValueError("IdmParams.delta must be >= 1")


def idm_acceleration(v, leader_v, gap, params, v_desired=None):
    """Acceleration of a follower at speed ``v`` behind a leader at ``leader_v``.

    ``gap`` is the bumper-to-bumper distance (m, must be > 0).  ``v_desired``
    overrides the desired speed (used by speed-limit control); defaults to
    ``params.v0``.
    """
    if gap <= 0:
        raise AlreadyCollidingError(f"gap {gap} <= 0: vehicles already colliding")
    vd = params.v0 if v_desired is None else v_desired
    dv = v - leader_v
    s_star = params.s0 + max(
        0.0, v * params.T + v * dv / (2.0 * math.sqrt(params.a_max * params.b))
    )
    return params.a_max * (1.0 - (v / vd) ** params.delta - (s_star / gap) ** 2)


def idm_acceleration_vec(v, leader_v, gap, params, v_desired=None):
    """Vectorized ``idm_acceleration`` over numpy arrays (gaps must be > 0)."""
    vd = params.v0 if v_desired is None else v_desired
    dv = v - leader_v
    s_star = params.s0 + np.maximum(
        0.0, v * params.T + v * dv / (2.0 * math.sqrt(params.a_max * params.b))
    )
    return params.a_max * (1.0 - (v / vd) ** params.delta - (s_star / gap) ** 2)


def equilibrium_speed(gap, params):
    """Steady-state speed at a fixed bumper-to-bumper gap (zero speed difference).

    Solves a(v) = 0 for v in [0, v0]; returns 0 when the gap cannot sustain
    motion (gap <= s0).
    """
    if gap <= params.s0:
        return 0.0

    def f(v):
        s_star = params.s0 + v * params.T
        return 1.0 - (v / params.v0) ** params.delta - (s_star / gap) ** 2

    if f(0.0) <= 0.0:
        return 0.0
    if f(params.v0) >= 0.0:
        return params.v0
    return brentq(f, 0.0, params.v0, xtol=1e-12)
