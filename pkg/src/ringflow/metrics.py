"""Macroscopic traffic measurement: density, flow, space-mean speed, headway.

Flow is the loop-wide instantaneous q = k * u; densities are reported in
veh/km, flows in veh/h, speeds in m/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Phase(Enum):
    LOADING = "loading"
    UNLOADING = "unloading"
    CONTROLLED = "controlled"


@dataclass(frozen=True)
class FdSample:
    density: float  # veh/km
    flow: float  # veh/h
    mean_speed: float  # m/s
    phase: Phase
    step: int


@dataclass
class FdTrace:
    """Fundamental-diagram trace: array-backed, ordered by step."""

    phase: Phase
    steps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    density: np.ndarray = field(default_factory=lambda: np.empty(0))
    flow: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_speed: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.steps)

    def samples(self):
        return [
            FdSample(
                density=float(self.density[i]),
                flow=float(self.flow[i]),
                mean_speed=float(self.mean_speed[i]),
                phase=self.phase,
                step=int(self.steps[i]),
            )
            for i in range(len(self))
        ]

    def decimate(self, factor):
        if factor < 1:
            raise ValueError("decimation factor must be >= 1")
        return FdTrace(
            phase=self.phase,
            steps=self.steps[::factor].copy(),
            density=self.density[::factor].copy(),
            flow=self.flow[::factor].copy(),
            mean_speed=self.mean_speed[::factor].copy(),
        )

    def write(self, path, decimation=1):
        t = self.decimate(decimation)
        with open(path, "w") as f:
            f.write("step,phase,density_veh_km,flow_veh_h,mean_speed_mps\n")
            for i in range(len(t)):
                f.write(
                    f"{int(t.steps[i])},{t.phase.value},"
                    f"{t.density[i]:.9g},{t.flow[i]:.9g},{t.mean_speed[i]:.9g}\n"
                )

    @staticmethod
    def read(path):
        with open(path) as f:
            header = f.readline()
            if not header.startswith("step,phase,"):
                raise ValueError("not an FdTrace file")
            rows = [line.strip().split(",") for line in f if line.strip()]
        if not rows:
            raise ValueError("empty FdTrace file")
        phase = Phase(rows[0][1])
        return FdTrace(
            phase=phase,
            steps=np.array([int(r[0]) for r in rows], dtype=np.int64),
            density=np.array([float(r[2]) for r in rows]),
            flow=np.array([float(r[3]) for r in rows]),
            mean_speed=np.array([float(r[4]) for r in rows]),
        )


class TraceRecorder:
    """Accumulates per-step measurements into an FdTrace."""

    def __init__(self, phase):
        self.phase = phase
        self._steps = []
        self._density = []
        self._flow = []
        self._speed = []

    def record(self, ring):
        s = measure(ring, self.phase)
        self._steps.append(s.step)
        self._density.append(s.density)
        self._flow.append(s.flow)
        self._speed.append(s.mean_speed)
        return s

    def finish(self):
        return FdTrace(
            phase=self.phase,
            steps=np.array(self._steps, dtype=np.int64),
            density=np.array(self._density),
            flow=np.array(self._flow),
            mean_speed=np.array(self._speed),
        )


def measure(ring, phase=Phase.CONTROLLED):
    """Instantaneous loop-wide sample: k = N/L, u = mean speed, q = k*u."""
    n = ring.n
    if n == 0:
        return FdSample(0.0, 0.0, 0.0, phase, ring.step_count)
    density = n / ring.length * 1000.0  # veh/km
    u = ring.mean_speed()
    flow = density * u * 3.6  # veh/km * m/s -> veh/h
    return FdSample(density, flow, u, phase, ring.step_count)


def mean_time_headway(sample):
    """Loop-average time headway in seconds, h = 3600 / q."""
    if sample.flow <= 0:
        raise ValueError("mean time headway undefined at zero flow")
    return 3600.0 / sample.flow


def _branch_curve(trace):
    """Monotone sub-branch of a trace as (density, flow) ready for interp.

    Restricted to densities at or below the trace's flow-peak density; ties
    in density are flow-averaged.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    k_peak = trace.density[int(np.argmax(trace.flow))]
    mask = trace.density <= k_peak
    k = trace.density[mask]
    q = trace.flow[mask]
    uk, inv = np.unique(k, return_inverse=True)
    qsum = np.zeros_like(uk)
    cnt = np.zeros_like(uk)
    np.add.at(qsum, inv, q)
    np.add.at(cnt, inv, 1.0)
    return uk, qsum / cnt


def interp_flow(trace, density):
    """Piecewise-linear flow at a density on the trace's monotone sub-branch."""
    k, q = _branch_curve(trace)
    if density < k[0] or density > k[-1]:
        raise ValueError(
            f"density {density} outside branch range [{k[0]}, {k[-1]}]"
        )
    return float(np.interp(density, k, q))


def hysteresis_gap(loading, unloading, density):
    """Flow difference between the loading and unloading branches at a density."""
    return interp_flow(loading, density) - interp_flow(unloading, density)


def peak_flow(trace):
    """The (first) maximum-flow sample of a trace as an FdSample."""
    if len(trace) == 0:
        raise ValueError("peak_flow of an empty trace")
    i = int(np.argmax(trace.flow))
    return FdSample(
        density=float(trace.density[i]),
        flow=float(trace.flow[i]),
        mean_speed=float(trace.mean_speed[i]),
        phase=trace.phase,
        step=int(trace.steps[i]),
    )
