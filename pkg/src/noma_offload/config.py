"""Run configuration: dataclasses, JSON schema and exhaustive validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import jsonschema


class ConfigError(ValueError):
    """Raised with the full list of problems found in a configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class SchedulerConfig:
    v_param: float = 20.0
    p_ave: float = 0.25
    p_max: float = 0.5
    bandwidth_hz: float = 1e6
    noise_w: float = 1e-9
    delta_t: float = 1.0
    rate_unit_scale: float = 1e-3
    f_bs: float = 5e9
    feedback_period: int = 1
    # data backlogs enter the drift weights in units of this many bits
    queue_unit_bits: float = 1e6
    log_base: str = "e"
    ofdma_noise: str = "split"

    def problems(self) -> list[str]:
        out = []
        if not self.v_param >= 0:
            out.append("scheduler.v_param must be >= 0")
        if not self.p_max > 0:
            out.append("scheduler.p_max must be > 0")
        if not 0 <= self.p_ave <= self.p_max:
            out.append("scheduler.p_ave must lie in [0, p_max]")
        for name in ("bandwidth_hz", "noise_w", "delta_t", "rate_unit_scale", "queue_unit_bits"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"scheduler.{name} must be a finite number > 0")
        if not self.f_bs >= 0:
            out.append("scheduler.f_bs must be >= 0")
        if not (isinstance(self.feedback_period, int) and self.feedback_period >= 1):
            out.append("scheduler.feedback_period must be an integer >= 1")
        if self.log_base not in ("e", "2", "10"):
            out.append("scheduler.log_base must be one of 'e', '2', '10'")
        if self.ofdma_noise not in ("split", "full"):
            out.append("scheduler.ofdma_noise must be 'split' or 'full'")
        return out

    @property
    def log_scale(self) -> float:
        """Divide natural logs by this to get logs in ``log_base``."""
        return {"e": 1.0, "2": math.log(2.0), "10": math.log(10.0)}[self.log_base]


@dataclass(frozen=True)
class EnvConfig:
    a_max_bps: float = 1e4
    distance_range: tuple = (10.0, 100.0)
    weight_max: int = 10
    f_max: float = 4e8
    kappa: float = 1e-26
    cycles_per_bit: float = 6400.0
    fading: str = "rayleigh"
    distances: tuple | None = None
    weights: tuple | None = None

    def problems(self, n_devices: int) -> list[str]:
        out = []
        if not self.a_max_bps >= 0:
            out.append("env.a_max_bps must be >= 0")
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            out.append("env.distance_range must satisfy 0 < lo <= hi")
        if not (isinstance(self.weight_max, int) and self.weight_max >= 0):
            out.append("env.weight_max must be an integer >= 0")
        for name in ("f_max", "kappa", "cycles_per_bit"):
            if not getattr(self, name) > 0:
                out.append(f"env.{name} must be > 0")
        if self.fading not in ("rayleigh", "none"):
            out.append("env.fading must be 'rayleigh' or 'none'")
        if self.distances is not None:
            if len(self.distances) != n_devices:
                out.append("env.distances must have n_devices entries")
            elif any(not d > 0 for d in self.distances):
                out.append("env.distances must all be > 0")
        if self.weights is not None:
            if len(self.weights) != n_devices:
                out.append("env.weights must have n_devices entries")
            elif any(not w >= 0 for w in self.weights):
                out.append("env.weights must all be >= 0")
        return out


SCHEDULER_KINDS = ("proposed", "ofdma", "static")


@dataclass(frozen=True)
class ScenarioConfig:
    n_devices: int = 10
    horizon: int = 1000
    seeds: tuple = (0,)
    scheduler_kind: str = "proposed"
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    output_dir: str | None = None

    def problems(self) -> list[str]:
        out = []
        if not (isinstance(self.n_devices, int) and self.n_devices >= 1):
            out.append("n_devices must be an integer >= 1")
        if not (isinstance(self.horizon, int) and self.horizon >= 1):
            out.append("horizon must be an integer >= 1")
        if not self.seeds or any(not (isinstance(s, int) and 0 <= s < 2 ** 64) for s in self.seeds):
            out.append("seeds must be a nonempty list of unsigned 64-bit integers")
        if self.scheduler_kind not in SCHEDULER_KINDS:
            out.append(f"scheduler_kind must be one of {SCHEDULER_KINDS}")
        out += self.scheduler.problems()
        if isinstance(self.n_devices, int):
            out += self.env.problems(self.n_devices)
        return out

    def validate(self) -> "ScenarioConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Replace fields by dotted name, e.g. ``{'scheduler.v_param': 5}``."""
        top, sched, env = {}, {}, {}
        for k, v in kw.items():
            if k.startswith("scheduler."):
                sched[k.split(".", 1)[1]] = v
            elif k.startswith("env."):
                env[k.split(".", 1)[1]] = v
            else:
                top[k] = v
        return replace(self, scheduler=replace(self.scheduler, **sched), env=replace(self.env, **env), **top)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["env"]["distance_range"] = list(self.env.distance_range)
        for k in ("distances", "weights"):
            if d["env"][k] is not None:
                d["env"][k] = list(d["env"][k])
        return d


_NUM = {"type": "number"}
_SCHED_PROPS = {f.name: _NUM for f in fields(SchedulerConfig)}
_SCHED_PROPS.update(feedback_period={"type": "integer"}, log_base={"enum": ["e", "2", "10"]},
                    ofdma_noise={"enum": ["split", "full"]})
_ENV_PROPS = {f.name: _NUM for f in fields(EnvConfig)}
_ENV_PROPS.update(
    distance_range={"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    weight_max={"type": "integer"},
    fading={"enum": ["rayleigh", "none"]},
    distances={"type": ["array", "null"], "items": _NUM},
    weights={"type": ["array", "null"], "items": _NUM},
)

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "noma_offload scenario",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_devices": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "scheduler_kind": {"enum": list(SCHEDULER_KINDS)},
        "scheduler": {"type": "object", "additionalProperties": False, "properties": _SCHED_PROPS},
        "env": {"type": "object", "additionalProperties": False, "properties": _ENV_PROPS},
        "output_dir": {"type": ["string", "null"]},
    },
}


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a scenario; every schema and range problem is reported at once."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    problems = [
        f"{'.'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if problems:
        raise ConfigError(problems)
    doc = dict(doc)
    sched = SchedulerConfig(**doc.pop("scheduler", {}))
    env_doc = dict(doc.pop("env", {}))
    for k in ("distance_range", "distances", "weights"):
        if env_doc.get(k) is not None:
            env_doc[k] = tuple(env_doc[k])
    env = EnvConfig(**env_doc)
    if "seeds" in doc:
        doc["seeds"] = tuple(doc["seeds"])
    return ScenarioConfig(scheduler=sched, env=env, **doc).validate()


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
    return config_from_dict(doc)
