"""Comparison controllers: IDM-only recovery, tiered speed-limit control,
and the CAV-to-human switch-back experiment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dqn, metrics, net as qnet, ring as ringmod


@dataclass(frozen=True)
class VslRule:
    min_mean_speed: float  # rule applies when loop mean speed >= this (m/s)
    limit: float  # speed limit (m/s)


@dataclass(frozen=True)
class VslPolicy:
    """Tiered speed-limit rules keyed to loop mean speed.

    Rules are checked highest threshold first; the first matching rule's limit
    applies until the next evaluation.  An empty rule list never restricts.
    """

    rules: tuple = ()
    period_steps: int = 600  # 60 simulated seconds at dt = 0.1

    def __post_init__(self):
        thresholds = [r.min_mean_speed for r in self.rules]
        if sorted(thresholds, reverse=True) != thresholds or len(
            set(thresholds)
        ) != len(thresholds):
            raise ValueError("rule thresholds must be strictly decreasing")
        if any(r.limit <= 0 for r in self.rules):
            raise ValueError("speed limits must be positive")

    def active_limit(self, mean_speed, v0):
        for rule in self.rules:
            if mean_speed >= rule.min_mean_speed:
                return min(rule.limit, v0)
        if self.rules:
            return min(self.rules[-1].limit, v0)
        return v0


def default_vsl_policy():
    """Three-tier slowdown: 30 at >=15 m/s, 20 at >=8, 13 below."""
    return VslPolicy(
        rules=(
            VslRule(min_mean_speed=15.0, limit=30.0),
            VslRule(min_mean_speed=8.0, limit=20.0),
            VslRule(min_mean_speed=0.0, limit=13.0),
        )
    )


def run_idm_recovery(snapshot, steps, phase=metrics.Phase.UNLOADING):
    """Simulate the post-shock ring with every vehicle human-driven."""
    ring = ringmod.revert_to_human(snapshot)
    rec = metrics.TraceRecorder(phase)
    for _ in range(steps):
        ring, report = ringmod.step(ring)
        rec.record(ring)
        if report is not None:
            break
    return rec.finish()


def run_vsl(snapshot, policy, steps, phase=metrics.Phase.UNLOADING):
    """All-human run with the active speed limit capping IDM desired speed.

    Returns ``(FdTrace, per-step active limit array)``.
    """
    ring = ringmod.revert_to_human(snapshot)
    rec = metrics.TraceRecorder(phase)
    v0 = ring.params.v0
    limit = policy.active_limit(ring.mean_speed(), v0)
    limits = np.empty(steps)
    for i in range(steps):
        if policy.rules and i % policy.period_steps == 0:
            limit = policy.active_limit(ring.mean_speed(), v0)
        limits[i] = limit
        ring, report = ringmod.step(ring, v_desired=limit)
        rec.record(ring)
        if report is not None:
            limits = limits[: i + 1]
            break
    return rec.finish(), limits


def _smoothed(x, window):
    if len(x) < window:
        return np.asarray(x, dtype=float)
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def find_flow_peak_step(flows, window=100, fraction=0.99):
    """First step whose smoothed flow reaches ``fraction`` of the rollout's
    smoothed maximum (window-averaged to ignore single-step spikes)."""
    sm = _smoothed(np.asarray(flows, dtype=float), window)
    if len(sm) == 0:
        return 0
    target = fraction * sm.max()
    i = int(np.argmax(sm >= target))
    return i + (window - 1 if len(flows) >= window else 0)


@dataclass
class SwitchBackResult:
    peak_step: int
    snapshot: ringmod.RingState
    cav_trace: metrics.FdTrace
    reverted_trace: metrics.FdTrace


def run_switch_back(policy, env_spec, extra_steps=200, search_steps=2000,
                    peak_window=100):
    """Roll the CAV policy to its flow peak, then compare keeping CAV control
    against reverting everyone to human driving for ``extra_steps``.

    Both continuation branches start from the same bit-identical snapshot.
    """
    trace, _ = dqn.evaluate(policy, env_spec, search_steps)
    peak_step = find_flow_peak_step(trace.flow, window=peak_window)

    # deterministic re-roll up to the peak to capture the snapshot
    env = dqn.RingEnv(_non_terminating(env_spec, max(search_steps, 1) + 1))
    rng = np.random.default_rng(0)
    s = env.reset()
    for _ in range(peak_step + 1):
        q = qnet.forward(policy, np.array([s]))
        a = dqn.select_action(q, 0.0, rng)
        s, _, done, _ = env.step(a)
        if done:
            break
    snap = env.ring.copy()

    # branch (a): continue under CAV control
    cav_rec = metrics.TraceRecorder(metrics.Phase.CONTROLLED)
    ring = snap.copy()
    state = s
    for _ in range(extra_steps):
        q = qnet.forward(policy, np.array([state]))
        a = dqn.select_action(q, 0.0, rng)
        ring, report = ringmod.step(ring, cav_accel=dqn.ACTION_ACCELS[a])
        state = ring.mean_speed() / env_spec.speed_normalizer
        cav_rec.record(ring)
        if report is not None:
            break
    cav_trace = cav_rec.finish()

    # branch (b): revert to human and let the IDM take over
    reverted_trace = run_idm_recovery(
        snap, extra_steps, phase=metrics.Phase.CONTROLLED
    )

    if extra_steps == 0:
        sample = metrics.measure(snap)
        single = metrics.FdTrace(
            phase=metrics.Phase.CONTROLLED,
            steps=np.array([sample.step], dtype=np.int64),
            density=np.array([sample.density]),
            flow=np.array([sample.flow]),
            mean_speed=np.array([sample.mean_speed]),
        )
        cav_trace = single
        reverted_trace = single
    return SwitchBackResult(
        peak_step=peak_step,
        snapshot=snap,
        cav_trace=cav_trace,
        reverted_trace=reverted_trace,
    )


def _non_terminating(env_spec, steps):
    return dqn.EnvSpec(
        snapshot=env_spec.snapshot,
        success_flow_threshold=env_spec.success_flow_threshold,
        max_episode_steps=steps,
        speed_normalizer=env_spec.speed_normalizer,
        reward=dqn.RewardConfig(success_terminates=False),
    )
