"""Scenario configuration: flat key = value text with dotted sections.

Unknown keys fail fast.  A ScenarioConfig bundles everything one experiment
needs: loop geometry, IDM parameters, load/removal schedule, CAV formation,
DDQN hyperparameters, reward constants, and the VSL rule table.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .baselines import VslPolicy, VslRule, default_vsl_policy
from .dqn import DdqnConfig, EpsilonSchedule, RewardConfig
from .idm import IdmParams
from .net import LrSchedule, MlpSpec, DESK_SPEC
from .ring import FormationStrategy


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    length: float = 1000.0
    dt: float = 0.1
    idm: IdmParams = field(default_factory=IdmParams)
    load_target: int = 68
    removal_schedule: tuple = (17,)
    removal_seed: int = 12345
    cav_count: int = 17
    formation: FormationStrategy = FormationStrategy.UNIFORM
    net_spec: MlpSpec = field(default_factory=MlpSpec)
    ddqn: DdqnConfig = field(default_factory=DdqnConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    vsl: VslPolicy = field(default_factory=default_vsl_policy)
    max_episode_steps: int = 3000
    speed_jitter: float = 0.0
    seed: int = 0
    out_dir: str = "out"


def preset(name):
    """Named scenario presets mirroring the experiment suite."""
    base = ScenarioConfig()
    presets = {
        "mpr33": replace(
            base,
            removal_schedule=(17,),
            cav_count=17,
            formation=FormationStrategy.PLATOON,
        ),
        "mpr15": replace(base, removal_schedule=(9,), cav_count=9),
        "mpr66": replace(base, removal_schedule=(17,), cav_count=34),
        "two-step": replace(base, removal_schedule=(17, 12), cav_count=13),
    }
    if name not in presets:
        raise ConfigError(
            f"unknown preset {name!r} (have {sorted(presets)})"
        )
    return presets[name]


def apply_profile(config, profile):
    """'full' keeps the published sizes; 'desk' shrinks net and budgets."""
    if profile == "full":
        return config
    if profile == "desk":
        return replace(
            config,
            net_spec=DESK_SPEC,
            ddqn=replace(
                config.ddqn,
                episodes=500,
                total_train_steps=150_000,
                target_sync_period=500,
                min_buffer_before_learning=500,
                epsilon=EpsilonSchedule(decay_steps=40_000),
                lr=LrSchedule(total_steps=150_000),
            ),
            max_episode_steps=600,
        )
    raise ConfigError(f"unknown profile {profile!r} (full or desk)")


# -- key = value (de)serialization ---------------------------------------

_TRUE = {"true", "yes", "1"}
_FALSE = {"false", "no", "0"}


def _parse_scalar(text):
    t = text.strip()
    low = t.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"expected a number or boolean, got {t!r}")


def parse_kv(text):
    """Parse 'a.b.c = value' lines into a flat dict; # starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _ints(text):
    return tuple(int(p) for p in str(text).split(",") if p.strip())


def config_from_kv(kv):
    """Build a ScenarioConfig from a flat dotted-key dict; unknown keys fail."""
    c = ScenarioConfig()
    idm = {}
    ddqn = {}
    eps = {}
    lr = {}
    reward = {}
    vsl_rules = None
    vsl_period = None
    net_hidden = None
    setters = {}

    def top(name, conv=_parse_scalar):
        setters[name] = ("top", name, conv)

    top("sim.length")
    top("sim.dt")
    top("scenario.load_target")
    top("scenario.removal_schedule", _ints)
    top("scenario.removal_seed")
    top("scenario.cav_count")
    top("scenario.formation", lambda v: FormationStrategy(str(v).lower()))
    top("scenario.max_episode_steps")
    top("scenario.speed_jitter")
    top("scenario.seed")
    top("scenario.out_dir", str)

    mapping = {
        "sim.length": "length",
        "sim.dt": "dt",
        "scenario.load_target": "load_target",
        "scenario.removal_schedule": "removal_schedule",
        "scenario.removal_seed": "removal_seed",
        "scenario.cav_count": "cav_count",
        "scenario.formation": "formation",
        "scenario.max_episode_steps": "max_episode_steps",
        "scenario.speed_jitter": "speed_jitter",
        "scenario.seed": "seed",
        "scenario.out_dir": "out_dir",
    }

    for key, raw in kv.items():
        if key in mapping:
            _, _, conv = setters[key]
            setattr(c, mapping[key], conv(raw))
        elif key.startswith("idm."):
            f = key[4:]
            if f not in IdmParams.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            idm[f] = float(raw)
        elif key.startswith("ddqn.epsilon."):
            f = key[len("ddqn.epsilon."):]
            if f not in EpsilonSchedule.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            eps[f] = _parse_scalar(raw)
        elif key.startswith("ddqn.lr."):
            f = key[len("ddqn.lr."):]
            if f not in LrSchedule.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            lr[f] = _parse_scalar(raw)
        elif key.startswith("ddqn."):
            f = key[5:]
            if f not in DdqnConfig.__dataclass_fields__ or f in ("epsilon", "lr"):
                raise ConfigError(f"unknown config key {key!r}")
            ddqn[f] = _parse_scalar(raw)
        elif key.startswith("reward."):
            f = key[7:]
            if f not in RewardConfig.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            reward[f] = _parse_scalar(raw)
        elif key == "net.hidden_dims":
            net_hidden = _ints(raw)
        elif key == "vsl.period_steps":
            vsl_period = int(raw)
        elif key == "vsl.rules":
            # "15:30, 8:20, 0:13"  (threshold:limit, decreasing thresholds)
            rules = []
            for part in str(raw).split(","):
                part = part.strip()
                if not part:
                    continue
                thr, _, lim = part.partition(":")
                rules.append(VslRule(float(thr), float(lim)))
            vsl_rules = tuple(rules)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    if idm:
        c.idm = replace(c.idm, **idm)
    eps_s = replace(EpsilonSchedule(), **eps) if eps else c.ddqn.epsilon
    lr_s = replace(LrSchedule(), **lr) if lr else c.ddqn.lr
    if ddqn or eps or lr:
        c.ddqn = replace(c.ddqn, epsilon=eps_s, lr=lr_s, **ddqn)
    if reward:
        c.reward = replace(c.reward, **reward)
    if net_hidden is not None:
        c.net_spec = MlpSpec(hidden_dims=net_hidden)
    if vsl_rules is not None or vsl_period is not None:
        c.vsl = VslPolicy(
            rules=c.vsl.rules if vsl_rules is None else vsl_rules,
            period_steps=c.vsl.period_steps if vsl_period is None else vsl_period,
        )
    return c


def config_to_kv(c):
    """Serialize a ScenarioConfig to the flat dotted-key text format."""
    lines = [
        f"sim.length = {c.length:g}",
        f"sim.dt = {c.dt:g}",
        f"scenario.load_target = {c.load_target}",
        "scenario.removal_schedule = "
        + ",".join(str(x) for x in c.removal_schedule),
        f"scenario.removal_seed = {c.removal_seed}",
        f"scenario.cav_count = {c.cav_count}",
        f"scenario.formation = {c.formation.value}",
        f"scenario.max_episode_steps = {c.max_episode_steps}",
        f"scenario.speed_jitter = {c.speed_jitter:g}",
        f"scenario.seed = {c.seed}",
        f"scenario.out_dir = {c.out_dir}",
    ]
    for f in ("v0", "T", "a_max", "b", "delta", "s0", "vehicle_length"):
        lines.append(f"idm.{f} = {getattr(c.idm, f):g}")
    d = c.ddqn
    for f in ("gamma", "batch_size", "episodes", "total_train_steps",
              "target_sync_period", "min_buffer_before_learning",
              "replay_capacity", "seed"):
        lines.append(f"ddqn.{f} = {getattr(d, f):g}")
    lines += [
        f"ddqn.epsilon.start = {d.epsilon.start:g}",
        f"ddqn.epsilon.end = {d.epsilon.end:g}",
        f"ddqn.epsilon.decay_steps = {d.epsilon.decay_steps}",
        f"ddqn.lr.base = {d.lr.base:g}",
        f"ddqn.lr.final = {d.lr.final:g}",
        f"ddqn.lr.total_steps = {d.lr.total_steps}",
        f"reward.collision_penalty = {c.reward.collision_penalty:g}",
        f"reward.success_bonus = {c.reward.success_bonus:g}",
        "reward.success_terminates = "
        + str(c.reward.success_terminates).lower(),
        "net.hidden_dims = " + ",".join(str(x) for x in c.net_spec.hidden_dims),
        f"vsl.period_steps = {c.vsl.period_steps}",
        "vsl.rules = "
        + ", ".join(f"{r.min_mean_speed:g}:{r.limit:g}" for r in c.vsl.rules),
    ]
    return "\n".join(lines) + "\n"


def load_config(path):
    with open(path) as f:
        return config_from_kv(parse_kv(f.read()))


def save_config(config, path):
    with open(path, "w") as f:
        f.write(config_to_kv(config))
