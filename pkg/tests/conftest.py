"""Shared helpers for building small ring states and flow traces by hand."""

import numpy as np
import pytest

from ringflow import FdTrace, IdmParams, Phase, RingState


def make_ring(positions, speeds, cavs=None, length=1000.0, dt=0.1,
              params=None):
    """Build a ring with explicit vehicle positions/speeds (test fixture)."""
    ring = RingState(length=length, dt=dt, params=params or IdmParams())
    cavs = cavs or [False] * len(positions)
    for pos, v, cav in zip(positions, speeds, cavs):
        ring._insert(pos, v, cav=cav)
    return ring


def trace_of(pairs, phase=Phase.LOADING):
    """FdTrace from (density veh/km, flow veh/h) pairs; speed is implied."""
    k = np.array([p[0] for p in pairs], dtype=float)
    q = np.array([p[1] for p in pairs], dtype=float)
    u = np.where(k > 0, q / (3.6 * np.maximum(k, 1e-12)), 0.0)
    return FdTrace(
        phase=phase,
        steps=np.arange(len(pairs)),
        density=k,
        flow=q,
        mean_speed=u,
    )


@pytest.fixture
def idm_params():
    return IdmParams()
