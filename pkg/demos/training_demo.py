"""Train the Q-network on the shock scenario and inspect what it learned.

Runs the reduced "desk" training profile (64x64 net, 500 episodes capped at
150k steps) on the 33%-CAV preset, then prints the reward trend, the greedy
action as a function of the only state variable (mean speed), and a greedy
evaluation against the all-human recovery plateau.  Run:

    python3 demos/training_demo.py
"""

import numpy as np

from ringflow import (
    RingEnv,
    apply_profile,
    build_scenario,
    evaluate,
    idm_plateau_speed,
    preset,
    train,
)
from ringflow.net import forward_batch


def main():
    c = apply_profile(preset("mpr33"), "desk")
    built = build_scenario(c)
    env = RingEnv(built.env_spec, rng=np.random.default_rng(c.ddqn.seed))
    print(
        f"training: {c.ddqn.episodes} episode cap, "
        f"{c.ddqn.total_train_steps} step cap..."
    )
    result = train(env, c.ddqn, spec=c.net_spec)
    rewards = result.episode_rewards()
    k = max(1, len(rewards) // 10)
    print(
        f"{len(rewards)} episodes / {result.total_steps} steps; "
        f"mean reward first 10%: {rewards[:k].mean():.0f}, "
        f"last 10%: {rewards[-k:].mean():.0f}"
    )

    vs = np.linspace(0.0, 12.0, 13)
    q = forward_batch(result.network, (vs / 30.0).reshape(-1, 1))
    actions = "".join("-0+"[int(i)] for i in np.argmax(q, axis=1))
    print(f"greedy action by mean speed 0..12 m/s: {actions}")

    plateau = idm_plateau_speed(built.env_spec)
    trace, _ = evaluate(result.network, built.env_spec, 3000)
    tail = trace.mean_speed[int(len(trace) * 0.8):]
    steady = float(tail.mean()) if len(tail) else 0.0
    print(
        f"greedy rollout: {len(trace)} steps, steady mean speed "
        f"{steady:.2f} m/s vs all-human plateau {plateau:.2f} m/s"
    )
    print(
        "note: with a single scalar state and uniform replay, the value "
        "function settles into an optimistic fixed point and the greedy "
        "policy accelerates everywhere; see wave_dissipation_demo.py for a "
        "scripted controller that reaches the high-speed cruise this "
        "training is aiming for."
    )


if __name__ == "__main__":
    main()
