"""Run outputs: deterministic CSV exports, summary table, charts, manifest.

Every file written here is a pure function of (config, master seed):
re-running a scenario overwrites byte-identical CSVs, and charts carry no
timestamps or salted ids. CSVs are the canonical record; charts are
conveniences rendered from the same data.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
import yaml

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from . import __version__  # noqa: E402
from .config import PhaseConfig, ScenarioConfig, parse_config, serialize_config  # noqa: E402
from .runner import DriverRow, EpisodeRecord, ScenarioResult  # noqa: E402

EPISODES_HEADER = "episode,group,mean_tt,mean_reward,mean_loss,mean_epsilon"
DRIVERS_HEADER = "episode,driver,group,od,action,travel_time,reward"
OD_HEADER = "episode,od,group,mean_tt"

SVG_HASHSALT = "routechoice"


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def od_label(od) -> str:
    return f"{od[0]}->{od[1]}"


def episodes_csv(records: list[EpisodeRecord]) -> str:
    lines = [EPISODES_HEADER]
    for rec in records:
        for group in sorted(rec.group_mean_tt):
            loss = rec.mean_loss if group == "av" else None
            eps = rec.mean_epsilon if group == "av" else None
            lines.append(
                f"{rec.episode},{group},{_fmt(rec.group_mean_tt[group])},"
                f"{_fmt(rec.group_mean_reward[group])},{_fmt(loss)},{_fmt(eps)}"
            )
    return "\n".join(lines) + "\n"


def drivers_csv(records: list[EpisodeRecord]) -> str:
    lines = [DRIVERS_HEADER]
    for rec in records:
        for row in rec.rows:
            lines.append(
                f"{rec.episode},{row.driver_id},{row.group},{od_label(row.od)},"
                f"{row.action},{_fmt(row.travel_time)},{_fmt(row.reward)}"
            )
    return "\n".join(lines) + "\n"


def od_breakdown_csv(records: list[EpisodeRecord]) -> str:
    lines = [OD_HEADER]
    for rec in records:
        acc: dict[tuple[str, str], list[float]] = {}
        for row in rec.rows:
            acc.setdefault((od_label(row.od), row.group), []).append(row.travel_time)
        for (od, group), tts in sorted(acc.items()):
            lines.append(f"{rec.episode},{od},{group},{_fmt(sum(tts) / len(tts))}")
    return "\n".join(lines) + "\n"


def export_records(records: list[EpisodeRecord], out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in (
        ("episodes.csv", episodes_csv(records)),
        ("drivers.csv", drivers_csv(records)),
        ("od_breakdown.csv", od_breakdown_csv(records)),
    ):
        path = out_dir / name
        path.write_text(text, encoding="utf-8", newline="\n")
        paths[name] = path
    return paths


def write_manifest(cfg: ScenarioConfig, out_dir) -> Path:
    """Snapshot config, seeds, and layout before episode 1 runs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "code_version": __version__,
        "config": yaml.safe_load(serialize_config(cfg)),
        "master_seed": cfg.run.master_seed,
        "repetitions": cfg.run.repetitions,
        "repetition_seed_derivation": "SeedSequence(master_seed).spawn(repetitions)",
        "outputs": [f"rep{i}/" for i in range(cfg.run.repetitions)],
        "summary_methodology": (
            "percent changes are computed per repetition, then averaged across "
            "repetitions"
        ),
    }
    path = out_dir / "manifest.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=True), encoding="utf-8", newline="\n")
    return path


def export_run(result: ScenarioResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    write_manifest(result.config, out_dir)
    for rep in result.reps:
        export_records(rep.records, out_dir / f"rep{rep.index}")
    return out_dir


# ---------------------------------------------------------------------------
# loading exported runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadedRun:
    config: ScenarioConfig
    reps: list[list[EpisodeRecord]]


def _records_from_drivers_csv(text: str) -> list[EpisodeRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != DRIVERS_HEADER:
        raise ValueError(f"drivers file must start with header {DRIVERS_HEADER!r}")
    by_episode: dict[int, list[DriverRow]] = {}
    for ln in lines[1:]:
        episode, driver, group, od, action, tt, rew = ln.split(",")
        origin, dest = od.split("->")
        by_episode.setdefault(int(episode), []).append(
            DriverRow(
                driver_id=driver,
                group=group,
                od=(origin, dest),
                action=int(action),
                travel_time=float(tt),
                reward=float(rew),
            )
        )
    records = []
    for episode in sorted(by_episode):
        rows = by_episode[episode]
        groups = sorted({r.group for r in rows})
        records.append(
            EpisodeRecord(
                episode=episode,
                rows=rows,
                group_mean_tt={
                    g: float(np.mean([r.travel_time for r in rows if r.group == g]))
                    for g in groups
                },
                group_mean_reward={
                    g: float(np.mean([r.reward for r in rows if r.group == g]))
                    for g in groups
                },
                av_losses={},
                mean_epsilon=None,
            )
        )
    return records


def _episode_table(text: str) -> dict[tuple[int, str], dict[str, float | None]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != EPISODES_HEADER:
        raise ValueError(f"episodes file must start with header {EPISODES_HEADER!r}")
    table = {}
    for ln in lines[1:]:
        episode, group, mean_tt, mean_reward, mean_loss, mean_eps = ln.split(",")
        table[(int(episode), group)] = {
            "mean_tt": float(mean_tt),
            "mean_reward": float(mean_reward),
            "mean_loss": float(mean_loss) if mean_loss else None,
            "mean_epsilon": float(mean_eps) if mean_eps else None,
        }
    return table


def load_run(out_dir) -> LoadedRun:
    """Rebuild records from an exported run directory.

    Loss and epsilon series come from episodes.csv (per-AV losses are not
    exported); everything else is recomputed from drivers.csv.
    """
    out_dir = Path(out_dir)
    manifest = yaml.safe_load((out_dir / "manifest.yaml").read_text(encoding="utf-8"))
    cfg = parse_config(yaml.safe_dump(manifest["config"]))
    reps = []
    for i in range(manifest["repetitions"]):
        rep_dir = out_dir / f"rep{i}"
        records = _records_from_drivers_csv(
            (rep_dir / "drivers.csv").read_text(encoding="utf-8")
        )
        table = _episode_table((rep_dir / "episodes.csv").read_text(encoding="utf-8"))
        for rec in records:
            info = table.get((rec.episode, "av"))
            if info is not None:
                rec.mean_epsilon = info["mean_epsilon"]
                if info["mean_loss"] is not None:
                    rec.av_losses = {"__mean__": info["mean_loss"]}
        reps.append(records)
    return LoadedRun(config=cfg, reps=reps)


# ---------------------------------------------------------------------------
# summary table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    behavior: str
    repetition: str  # "0", "1", ... or "mean"
    av_pct: float
    human_pct: float
    system_pct: float


@dataclass(frozen=True)
class SummaryTable:
    window: int
    rows: tuple[SummaryRow, ...]

    def to_csv(self) -> str:
        lines = ["behavior,repetition,av_pct,human_pct,system_pct"]
        for r in self.rows:
            lines.append(
                f"{r.behavior},{r.repetition},{_fmt(r.av_pct)},{_fmt(r.human_pct)},"
                f"{_fmt(r.system_pct)}"
            )
        return "\n".join(lines) + "\n"


def final_groups(records: list[EpisodeRecord]) -> dict[str, str]:
    return {row.driver_id: row.group for row in records[-1].rows}


def _window_mean(records, episodes: set[int], member: set[str]) -> float:
    tts = [
        row.travel_time
        for rec in records
        if rec.episode in episodes
        for row in rec.rows
        if row.driver_id in member
    ]
    if not tts:
        raise ValueError("comparison window contains no drivers")
    return sum(tts) / len(tts)


def percent_change(settle_mean: float, adapt_mean: float) -> float:
    """Positive = improvement (lowered travel time)."""
    return (settle_mean - adapt_mean) / settle_mean * 100.0


def summarize_records(
    records: list[EpisodeRecord], phases: PhaseConfig, window: int = 100
) -> tuple[float, float, float]:
    """Percent change (AV, human, system) between the last `window` episodes
    of Settle and of Adapt. Drivers are grouped by their final group, so the
    AV column tracks the travelers who mutated."""
    if window < 1:
        raise ValueError("window must be >= 1")
    settle_lo = phases.shock_start - window
    adapt_lo = phases.total_episodes - window + 1
    if settle_lo < 1:
        raise ValueError(
            f"window {window} exceeds the {phases.shock_start - 1} Settle episodes"
        )
    if adapt_lo < phases.adapt_start:
        raise ValueError(
            f"window {window} exceeds the "
            f"{phases.total_episodes - phases.adapt_start + 1} Adapt episodes"
        )
    have = {rec.episode for rec in records}
    settle_eps = set(range(settle_lo, phases.shock_start))
    adapt_eps = set(range(adapt_lo, phases.total_episodes + 1))
    missing = (settle_eps | adapt_eps) - have
    if missing:
        raise ValueError(f"records missing episodes {sorted(missing)[:5]}...")

    groups = final_groups(records)
    avs = {d for d, g in groups.items() if g == "av"}
    humans = {d for d, g in groups.items() if g == "human"}
    everyone = set(groups)
    out = []
    for member in (avs, humans, everyone):
        settle_mean = _window_mean(records, settle_eps, member)
        adapt_mean = _window_mean(records, adapt_eps, member)
        out.append(percent_change(settle_mean, adapt_mean))
    return tuple(out)


def summarize_result(result: ScenarioResult, window: int = 100) -> SummaryTable:
    return _summary_table(
        result.config.avs.behavior,
        result.config.phases,
        [rep.records for rep in result.reps],
        window,
    )


def summarize_loaded(run: LoadedRun, window: int = 100) -> SummaryTable:
    return _summary_table(run.config.avs.behavior, run.config.phases, run.reps, window)


def _summary_table(behavior, phases, reps, window) -> SummaryTable:
    rows = []
    for i, records in enumerate(reps):
        av, human, system = summarize_records(records, phases, window)
        rows.append(SummaryRow(behavior, str(i), av, human, system))
    rows.append(
        SummaryRow(
            behavior,
            "mean",
            float(np.mean([r.av_pct for r in rows])),
            float(np.mean([r.human_pct for r in rows])),
            float(np.mean([r.system_pct for r in rows])),
        )
    )
    return SummaryTable(window=window, rows=tuple(rows))


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


def smooth(series, width: int) -> np.ndarray:
    """Centered moving average with edge truncation.

    Windows are clipped at the series boundaries; if `width` exceeds the
    series length the series is returned unchanged.
    """
    x = np.asarray(series, dtype=float)
    if width <= 1 or width > len(x):
        return x.copy()
    half_lo = width // 2
    half_hi = width - half_lo  # window [i - half_lo, i + half_hi)
    out = np.empty_like(x)
    for i in range(len(x)):
        lo = max(0, i - half_lo)
        hi = min(len(x), i + half_hi)
        out[i] = x[lo:hi].mean()
    return out


def _mean_over_reps(series_per_rep: list[list[float | None]]) -> np.ndarray:
    arr = np.array(
        [[np.nan if v is None else v for v in series] for series in series_per_rep],
        dtype=float,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)  # all-NaN columns
        return np.nanmean(arr, axis=0)


def _smooth_keeping_gaps(values: np.ndarray, width: int) -> np.ndarray:
    mask = np.isfinite(values)
    if not mask.any():
        return values
    out = np.full_like(values, np.nan)
    idx = np.where(mask)[0]
    out[idx] = smooth(values[idx], width)
    return out


def emit_charts(reps: list[list[EpisodeRecord]], out_dir, smooth_width: int = 50) -> list[Path]:
    """Line charts (SVG): travel times, losses, rewards, route shares.

    Series are averaged across repetitions and smoothed with a centered
    moving average. Outputs carry no timestamps so identical runs emit
    identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = SVG_HASHSALT
    episodes = [rec.episode for rec in reps[0]]
    groups = sorted({g for rec in reps[0] for g in rec.group_mean_tt})
    paths = []

    def save(fig, name: str) -> None:
        path = out_dir / name
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)

    # mean travel time per group
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for group in groups:
        series = _mean_over_reps(
            [[rec.group_mean_tt.get(group) for rec in records] for records in reps]
        )
        ax.plot(episodes, _smooth_keeping_gaps(series, smooth_width), label=group)
    ax.set_xlabel("episode")
    ax.set_ylabel("mean travel time [s]")
    ax.legend()
    ax.set_title(f"Mean travel time per group (smoothed by {smooth_width})")
    save(fig, "travel_times.svg")

    # mean training loss
    fig, ax = plt.subplots(figsize=(8, 4.5))
    series = _mean_over_reps([[rec.mean_loss for rec in records] for records in reps])
    ax.plot(episodes, _smooth_keeping_gaps(series, smooth_width), color="tab:red")
    ax.set_xlabel("episode")
    ax.set_ylabel("mean training loss")
    ax.set_title("Mean AV training loss")
    save(fig, "losses.svg")

    # mean reward per group
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for group in groups:
        series = _mean_over_reps(
            [[rec.group_mean_reward.get(group) for rec in records] for records in reps]
        )
        ax.plot(episodes, _smooth_keeping_gaps(series, smooth_width), label=group)
    ax.set_xlabel("episode")
    ax.set_ylabel("mean reward")
    ax.legend()
    ax.set_title("Mean reward per group")
    save(fig, "rewards.svg")

    # route shares per OD
    ods = sorted({od_label(row.od) for row in reps[0][0].rows})
    fig, axes = plt.subplots(
        len(ods), 1, figsize=(8, 3 * len(ods)), squeeze=False, sharex=True
    )
    for ax, od in zip(axes.ravel(), ods):
        for group in groups:
            for action in range(3):
                per_rep = []
                for records in reps:
                    series = []
                    for rec in records:
                        rows = [
                            r
                            for r in rec.rows
                            if od_label(r.od) == od and r.group == group
                        ]
                        if rows:
                            share = sum(r.action == action for r in rows) / len(rows)
                            series.append(share)
                        else:
                            series.append(None)
                    per_rep.append(series)
                series = _mean_over_reps(per_rep)
                ax.plot(
                    episodes,
                    _smooth_keeping_gaps(series, smooth_width),
                    label=f"{group} r{action}",
                    linestyle="-" if group == "human" else "--",
                )
        ax.set_ylabel(f"{od}\nroute share")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(ncol=3, fontsize=7)
    axes.ravel()[-1].set_xlabel("episode")
    fig.suptitle("Route shares per OD")
    save(fig, "route_shares.svg")
    return paths
