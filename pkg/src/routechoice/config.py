"""Scenario configuration: defaults, strict YAML parsing, serialization.

The config file is YAML with one mapping per section. Unknown sections or
keys are errors, so typos cannot silently fall back to defaults. An empty
document yields the full default scenario (1200 drivers, 377 of them
mutating to AVs, phases starting at episodes 1/1000/4000 of 6000).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .behavior import BEHAVIORS


@dataclass
class NetworkConfig:
    source: str = "grid"  # "grid" or a path to an edge-list file
    grid_rows: int = 4
    grid_cols: int = 4
    grid_seed: int = 0
    grid_edge_length: float = 300.0
    grid_speed_min: float = 8.0
    grid_speed_max: float = 14.0
    grid_capacity: float = 0.5


@dataclass
class RoutesConfig:
    source: str | None = None  # path to a route-set file, or None to generate
    seed: int = 0
    logit_beta: float = -0.1


@dataclass
class DemandConfig:
    origins: tuple[str, ...] = ("n0_0", "n3_0")
    destinations: tuple[str, ...] = ("n0_3", "n3_3")
    n_drivers: int = 1200
    n_avs: int = 377
    start_mean: float = 1800.0
    start_sigma: float = 600.0
    population_file: str | None = None


@dataclass
class PhaseConfig:
    shock_start: int = 1000
    adapt_start: int = 4000
    total_episodes: int = 6000


@dataclass
class HumanConfig:
    alpha: float = 0.2
    beta_min: float = -0.8
    beta_max: float = -0.2
    cost_unit: str = "minutes"  # unit the logit sees: "minutes" or "seconds"


@dataclass
class AVConfig:
    behavior: str = "selfish"
    custom_phi: tuple[float, float, float, float] | None = None
    lr: float = 0.003
    buffer_capacity: int = 256
    batch_size: int = 32
    epsilon: float = 0.99
    epsilon_decay: float = 0.998
    epsilon_min: float = 0.01
    normalize_warmth: bool = False


@dataclass
class WindowConfig:
    observation: float = 300.0  # L_o, seconds
    reward: float = 300.0  # L_r, seconds
    reward_unit: str = "minutes"


@dataclass
class RunConfig:
    master_seed: int = 1
    repetitions: int = 3
    simulator: str = "meso"


_SECTIONS = {
    "network": NetworkConfig,
    "routes": RoutesConfig,
    "demand": DemandConfig,
    "phases": PhaseConfig,
    "humans": HumanConfig,
    "avs": AVConfig,
    "windows": WindowConfig,
    "run": RunConfig,
}


@dataclass
class ScenarioConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    routes: RoutesConfig = field(default_factory=RoutesConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    phases: PhaseConfig = field(default_factory=PhaseConfig)
    humans: HumanConfig = field(default_factory=HumanConfig)
    avs: AVConfig = field(default_factory=AVConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> "ScenarioConfig":
        ph = self.phases
        if not (1 <= ph.shock_start < ph.adapt_start <= ph.total_episodes):
            raise ValueError(
                "phases: need 1 <= shock_start < adapt_start <= total_episodes, "
                f"got {ph.shock_start}/{ph.adapt_start}/{ph.total_episodes}"
            )
        d = self.demand
        if d.n_drivers < 1:
            raise ValueError("demand.n_drivers: must be >= 1")
        if not 0 < d.n_avs < d.n_drivers:
            raise ValueError(
                f"demand.n_avs: must be in (0, n_drivers), got {d.n_avs} of {d.n_drivers}"
            )
        if not d.origins or not d.destinations:
            raise ValueError("demand.origins/destinations: must be non-empty")
        if d.start_sigma <= 0:
            raise ValueError("demand.start_sigma: must be positive")
        h = self.humans
        if not 0 < h.alpha <= 1:
            raise ValueError("humans.alpha: must be in (0, 1]")
        if not h.beta_min <= h.beta_max < 0:
            raise ValueError("humans.beta_min/beta_max: need beta_min <= beta_max < 0")
        if h.cost_unit not in ("minutes", "seconds"):
            raise ValueError("humans.cost_unit: must be 'minutes' or 'seconds'")
        av = self.avs
        if av.behavior != "custom" and av.behavior not in BEHAVIORS:
            raise ValueError(
                f"avs.behavior: unknown {av.behavior!r}; "
                f"valid: {', '.join(sorted(BEHAVIORS))}, custom"
            )
        if av.behavior == "custom" and av.custom_phi is None:
            raise ValueError("avs.custom_phi: required when behavior is 'custom'")
        if not 0 <= av.epsilon <= 1:
            raise ValueError("avs.epsilon: must be in [0, 1]")
        if av.lr <= 0:
            raise ValueError("avs.lr: must be positive")
        if av.batch_size > av.buffer_capacity:
            raise ValueError("avs.batch_size: cannot exceed buffer_capacity")
        w = self.windows
        if w.observation <= 0 or w.reward <= 0:
            raise ValueError("windows.observation/reward: must be positive")
        if w.reward_unit not in ("minutes", "seconds"):
            raise ValueError("windows.reward_unit: must be 'minutes' or 'seconds'")
        r = self.run
        if r.repetitions < 1:
            raise ValueError("run.repetitions: must be >= 1")
        return self


def _coerce(value, target_type):
    if target_type is float and isinstance(value, int):
        return float(value)
    if target_type is tuple and isinstance(value, list):
        return tuple(value)
    return value


def _build_section(cls, mapping, section: str):
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ValueError(f"section {section!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(mapping) - set(known)
    if unknown:
        raise ValueError(f"unknown keys in section {section!r}: {sorted(unknown)}")
    kwargs = {}
    for key, value in mapping.items():
        if isinstance(value, list):
            value = tuple(value)
        elif isinstance(value, int) and not isinstance(value, bool):
            default = known[key].default
            if isinstance(default, float):
                value = float(value)
        kwargs[key] = value
    return cls(**kwargs)


def parse_config(text: str) -> ScenarioConfig:
    """Parse a YAML config document, filling absent fields with defaults."""
    doc = yaml.safe_load(text)
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ValueError("config document must be a mapping of sections")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    sections = {
        name: _build_section(cls, doc.get(name), name) for name, cls in _SECTIONS.items()
    }
    return ScenarioConfig(**sections).validate()


def serialize_config(cfg: ScenarioConfig) -> str:
    doc = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        doc[name] = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in section.items()
        }
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def load_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
