"""Scenario orchestration: population, phase schedule, turn-based episodes.

A scenario runs three phases over a fixed driver population. Settle: humans
only, learning their cost expectations. Shock (from `shock_start`): the
drivers marked for mutation are replaced by AV agents that inherit their OD
and start time; remaining humans keep driving with frozen knowledge. Adapt
(from `adapt_start`): humans resume learning alongside the AVs. Within an
episode agents choose routes in ascending (start_time, driver_id) order,
AVs observing the warmth of earlier same-OD choices; all trips are then
simulated in one call and travel times, rewards, and training are
dispatched.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .avs import AVAgent
from .behavior import BehaviorWeights, RosterEntry, StatsIndex, behavior_table, custom_behavior, reward
from .config import ScenarioConfig
from .humans import HumanAgent, choose_route, update_cost
from .mesosim import Simulator, TripPlan, get_simulator
from .net import (
    OD,
    Network,
    RouteSet,
    free_flow_time,
    generate_route_sets,
    grid_network,
    load_network_file,
    load_route_set_file,
)
from .stateobs import Observer, TurnRecord, WarmthIndex

POPULATION_HEADER = "driver_id,group,origin,destination,start_time,alpha,beta,mutates_to_av"


@dataclass(frozen=True)
class DriverSpec:
    driver_id: str
    od: OD
    start_time: int
    alpha: float
    beta: float
    mutates_to_av: bool
    group: str = "human"


@dataclass
class Population:
    specs: list[DriverSpec]
    humans: dict[str, HumanAgent]
    avs: dict[str, AVAgent] = field(default_factory=dict)

    @property
    def mutation_list(self) -> list[str]:
        return [s.driver_id for s in self.specs if s.mutates_to_av]


def _sample_start_time(rng: np.random.Generator, mean: float, sigma: float) -> int:
    """Gaussian start time, rounded to whole seconds, truncated to (0, 3600)."""
    while True:
        t = int(round(rng.normal(mean, sigma)))
        if 0 < t < 3600:
            return t


def sample_driver_specs(cfg: ScenarioConfig, rng: np.random.Generator) -> list[DriverSpec]:
    d = cfg.demand
    ods = [(o, dest) for o in d.origins for dest in d.destinations]
    specs = []
    for i in range(d.n_drivers):
        od = ods[int(rng.integers(len(ods)))]
        start = _sample_start_time(rng, d.start_mean, d.start_sigma)
        beta = float(rng.uniform(cfg.humans.beta_min, cfg.humans.beta_max))
        specs.append(
            DriverSpec(
                driver_id=f"d{i:04d}",
                od=od,
                start_time=start,
                alpha=cfg.humans.alpha,
                beta=beta,
                mutates_to_av=False,
            )
        )
    mutating = rng.choice(d.n_drivers, size=d.n_avs, replace=False)
    chosen = {int(i) for i in mutating}
    return [
        DriverSpec(
            s.driver_id, s.od, s.start_time, s.alpha, s.beta, mutates_to_av=(i in chosen)
        )
        for i, s in enumerate(specs)
    ]


def population_to_csv(specs: list[DriverSpec]) -> str:
    lines = [POPULATION_HEADER]
    for s in specs:
        lines.append(
            f"{s.driver_id},{s.group},{s.od[0]},{s.od[1]},{s.start_time},"
            f"{s.alpha!r},{s.beta!r},{int(s.mutates_to_av)}"
        )
    return "\n".join(lines) + "\n"


def population_from_csv(text: str) -> list[DriverSpec]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != POPULATION_HEADER:
        raise ValueError(f"population file must start with header {POPULATION_HEADER!r}")
    specs = []
    for ln in lines[1:]:
        driver_id, group, origin, dest, start, alpha, beta, mutates = ln.split(",")
        specs.append(
            DriverSpec(
                driver_id=driver_id,
                od=(origin, dest),
                start_time=int(start),
                alpha=float(alpha),
                beta=float(beta),
                mutates_to_av=bool(int(mutates)),
                group=group,
            )
        )
    return specs


def _cost_factor(unit: str) -> float:
    return 1.0 / 60.0 if unit == "minutes" else 1.0


def initial_cost_memory(
    net: Network, routes: RouteSet, od: OD, unit: str
) -> np.ndarray:
    """Free-flow travel time of each route option, in the chosen cost unit."""
    factor = _cost_factor(unit)
    return np.array([free_flow_time(net, p) * factor for p in routes.paths_for(od)])


def create_population(
    cfg: ScenarioConfig,
    net: Network,
    routes: RouteSet,
    seed_seq: np.random.SeedSequence,
    specs: list[DriverSpec] | None = None,
) -> Population:
    """Instantiate human agents (everyone starts human) from driver specs.

    The per-driver rng streams are spawned from `seed_seq` by driver index,
    so the same seed reproduces the same population bit for bit.
    """
    children = seed_seq.spawn(cfg.demand.n_drivers + 1)
    if specs is None:
        specs = sample_driver_specs(cfg, np.random.default_rng(children[0]))
    if len(specs) != cfg.demand.n_drivers:
        raise ValueError(
            f"population file has {len(specs)} drivers, config expects {cfg.demand.n_drivers}"
        )
    humans = {}
    for i, spec in enumerate(specs):
        choice_seq, _av_seq = children[i + 1].spawn(2)
        humans[spec.driver_id] = HumanAgent(
            driver_id=spec.driver_id,
            od=spec.od,
            start_time=spec.start_time,
            beta=spec.beta,
            alpha=spec.alpha,
            cost_memory=initial_cost_memory(net, routes, spec.od, cfg.humans.cost_unit),
            rng=np.random.default_rng(choice_seq),
        )
    return Population(specs=specs, humans=humans)


def mutate_population(
    population: Population,
    cfg: ScenarioConfig,
    seed_seq: np.random.SeedSequence,
) -> None:
    """Phase Shock: replace flagged humans with AVs on the same OD/start time."""
    behavior = resolve_behavior(cfg)
    children = seed_seq.spawn(cfg.demand.n_drivers + 1)
    for i, spec in enumerate(population.specs):
        if not spec.mutates_to_av:
            continue
        _choice_seq, av_seq = children[i + 1].spawn(2)
        del population.humans[spec.driver_id]
        population.avs[spec.driver_id] = AVAgent(
            driver_id=spec.driver_id,
            od=spec.od,
            start_time=spec.start_time,
            behavior=behavior,
            seed_seq=av_seq,
            lr=cfg.avs.lr,
            buffer_capacity=cfg.avs.buffer_capacity,
            batch_size=cfg.avs.batch_size,
            epsilon=cfg.avs.epsilon,
            epsilon_decay=cfg.avs.epsilon_decay,
            epsilon_min=cfg.avs.epsilon_min,
        )


def resolve_behavior(cfg: ScenarioConfig) -> BehaviorWeights:
    if cfg.avs.behavior == "custom":
        return custom_behavior(cfg.avs.custom_phi)
    return behavior_table(cfg.avs.behavior)


@dataclass(frozen=True)
class PhaseFlags:
    humans_learn: bool
    avs_learn: bool


def phase_flags(cfg: ScenarioConfig, episode: int) -> PhaseFlags:
    ph = cfg.phases
    return PhaseFlags(
        humans_learn=episode < ph.shock_start or episode >= ph.adapt_start,
        avs_learn=episode >= ph.shock_start,
    )


def phase_name(cfg: ScenarioConfig, episode: int) -> str:
    ph = cfg.phases
    if episode < ph.shock_start:
        return "settle"
    if episode < ph.adapt_start:
        return "shock"
    return "adapt"


@dataclass(frozen=True)
class DriverRow:
    driver_id: str
    group: str
    od: OD
    action: int
    travel_time: float  # seconds
    reward: float  # reward units (minutes by default)


@dataclass
class EpisodeRecord:
    episode: int
    rows: list[DriverRow]
    group_mean_tt: dict[str, float]
    group_mean_reward: dict[str, float]
    av_losses: dict[str, float]
    mean_epsilon: float | None

    @property
    def mean_loss(self) -> float | None:
        if not self.av_losses:
            return None
        return sum(self.av_losses.values()) / len(self.av_losses)


class EpisodeError(RuntimeError):
    def __init__(self, episode: int, cause: Exception):
        super().__init__(f"episode {episode} failed: {cause}")
        self.episode = episode
        self.__cause__ = cause


def run_episode(
    episode: int,
    population: Population,
    flags: PhaseFlags,
    net: Network,
    routes: RouteSet,
    simulator: Simulator,
    cfg: ScenarioConfig,
) -> EpisodeRecord:
    agents = sorted(
        list(population.humans.values()) + list(population.avs.values()),
        key=lambda a: (a.start_time, a.driver_id),
    )
    warmth_index = WarmthIndex()
    actions: dict[str, int] = {}
    states: dict[str, np.ndarray] = {}
    for agent in agents:
        if agent.group == "human":
            action = choose_route(agent)
        else:
            state = warmth_index.state_for(
                Observer(agent.driver_id, agent.group, agent.od, agent.start_time),
                cfg.windows.observation,
            )
            if cfg.avs.normalize_warmth:
                state = state / cfg.windows.observation
            states[agent.driver_id] = state
            action = agent.act(state)
        actions[agent.driver_id] = action
        warmth_index.append(
            TurnRecord(agent.driver_id, agent.group, agent.od, agent.start_time, action)
        )

    plans = [
        TripPlan(
            driver_id=a.driver_id,
            path=routes.paths_for(a.od)[actions[a.driver_id]],
            start_time=float(a.start_time),
        )
        for a in agents
    ]
    results = simulator.simulate(net, plans)
    times = {r.driver_id: r.travel_time for r in results}

    cost_factor = _cost_factor(cfg.humans.cost_unit)
    reward_factor = _cost_factor(cfg.windows.reward_unit)

    # dispatch rewards, then train
    roster = {a.driver_id: RosterEntry(a.group, float(a.start_time)) for a in agents}
    stats_index = StatsIndex(results, roster) if population.avs else None
    rewards: dict[str, float] = {}
    for agent in agents:
        if agent.group == "human":
            rewards[agent.driver_id] = times[agent.driver_id] * reward_factor
            if flags.humans_learn:
                update_cost(agent, actions[agent.driver_id], times[agent.driver_id] * cost_factor)
        else:
            stats = stats_index.stats_for(agent.driver_id, cfg.windows.reward).scaled(reward_factor)
            rewards[agent.driver_id] = reward(agent.behavior, stats)

    av_losses: dict[str, float] = {}
    if flags.avs_learn:
        for av in population.avs.values():
            av.store(states[av.driver_id], actions[av.driver_id], rewards[av.driver_id])
        for driver_id in sorted(population.avs):
            av = population.avs[driver_id]
            loss = av.train_step()
            if loss is not None:
                av_losses[driver_id] = loss
            av.decay_epsilon()

    rows = [
        DriverRow(
            driver_id=a.driver_id,
            group=a.group,
            od=a.od,
            action=actions[a.driver_id],
            travel_time=times[a.driver_id],
            reward=rewards[a.driver_id],
        )
        for a in agents
    ]
    groups = sorted({r.group for r in rows})
    group_mean_tt = {
        g: float(np.mean([r.travel_time for r in rows if r.group == g])) for g in groups
    }
    group_mean_reward = {
        g: float(np.mean([r.reward for r in rows if r.group == g])) for g in groups
    }
    eps = [av.epsilon for av in population.avs.values()]
    return EpisodeRecord(
        episode=episode,
        rows=rows,
        group_mean_tt=group_mean_tt,
        group_mean_reward=group_mean_reward,
        av_losses=av_losses,
        mean_epsilon=float(np.mean(eps)) if eps else None,
    )


def build_network(cfg: ScenarioConfig) -> Network:
    n = cfg.network
    if n.source == "grid":
        return grid_network(
            rows=n.grid_rows,
            cols=n.grid_cols,
            edge_length=n.grid_edge_length,
            speed_range=(n.grid_speed_min, n.grid_speed_max),
            capacity=n.grid_capacity,
            seed=n.grid_seed,
        )
    return load_network_file(n.source)


def build_route_sets(cfg: ScenarioConfig, net: Network) -> RouteSet:
    if cfg.routes.source is not None:
        return load_route_set_file(cfg.routes.source)
    ods = [(o, d) for o in cfg.demand.origins for d in cfg.demand.destinations]
    return generate_route_sets(
        net, ods, beta=cfg.routes.logit_beta, seed=cfg.routes.seed
    )


@dataclass
class RepetitionResult:
    index: int
    records: list[EpisodeRecord]


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    reps: list[RepetitionResult]


def run_repetition(
    cfg: ScenarioConfig,
    net: Network,
    routes: RouteSet,
    rep_seq: np.random.SeedSequence,
    specs: list[DriverSpec] | None = None,
    episode_hook=None,
) -> list[EpisodeRecord]:
    pop_seq, mutate_seq = rep_seq.spawn(2)
    population = create_population(cfg, net, routes, pop_seq, specs=specs)
    simulator = get_simulator(cfg.run.simulator)
    records: list[EpisodeRecord] = []
    for episode in range(1, cfg.phases.total_episodes + 1):
        if episode == cfg.phases.shock_start:
            mutate_population(population, cfg, mutate_seq)
            for human in population.humans.values():
                human.learning_enabled = False
        if episode == cfg.phases.adapt_start:
            for human in population.humans.values():
                human.learning_enabled = True
        flags = phase_flags(cfg, episode)
        try:
            record = run_episode(episode, population, flags, net, routes, simulator, cfg)
        except Exception as exc:
            raise EpisodeError(episode, exc) from exc
        records.append(record)
        if episode_hook is not None:
            episode_hook(episode, population, record)
    return records


def repetition_seed_sequences(cfg: ScenarioConfig) -> list[np.random.SeedSequence]:
    master = np.random.SeedSequence(cfg.run.master_seed)
    return master.spawn(cfg.run.repetitions)


def run_scenario(
    cfg: ScenarioConfig,
    specs: list[DriverSpec] | None = None,
    progress=None,
) -> ScenarioResult:
    """All repetitions of one behavior scenario, each from its own seed
    stream derived from the master seed. Driver data does not depend on the
    behavior, so different behaviors face identical populations."""
    cfg.validate()
    net = build_network(cfg)
    routes = build_route_sets(cfg, net)
    reps = []
    for i, rep_seq in enumerate(repetition_seed_sequences(cfg)):
        records = run_repetition(cfg, net, routes, rep_seq, specs=specs)
        reps.append(RepetitionResult(index=i, records=records))
        if progress is not None:
            progress(i)
    return ScenarioResult(config=cfg, reps=reps)
