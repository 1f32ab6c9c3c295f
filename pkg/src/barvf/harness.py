"""Experiment configuration, execution, persistence and summaries."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from barvf.agents import EpisodeResult, make_agent, run_episode, seed_streams
from barvf.envs import ENV_NAMES, make_env
from barvf.exceptions import ConfigError

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "DEFAULT_BETAS",
    "DEFAULT_PRIOR_SCALES",
    "run_experiment",
    "beta_sweep",
    "write_outputs",
    "summarize",
    "read_run_csv",
    "run_csv_name",
    "moving_average",
    "final_window",
]

logger = logging.getLogger(__name__)

DEFAULT_BETAS = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6)
CSV_HEADER = ("episode", "return", "steps", "mean_rate_nats", "mean_distortion")
FINAL_WINDOW_FRACTION = 0.1

# Prior scale is tuned per environment by the RVF agent's return. The grids pay
# one terminal reward, so values live in [0, 1]; the rivers bootstrap through
# time limits and their values reach ~1/(1 - gamma), so the prior must be
# about 100x wider for Q* to sit inside its support.
DEFAULT_PRIOR_SCALES = {"riverswim": 10.0, "confluence": 20.0, "empty-grid": 0.1, "corridor-grid": 0.1}


@dataclass
class ExperimentConfig:
    env_name: str = "riverswim"
    agent: str = "rvf"
    beta: float | None = None
    z_samples: int = 32
    episodes: int = 100
    seeds: list = field(default_factory=lambda: [0])
    member_count: int = 30
    prior_scale: float | None = None
    noise_scale: float = 0.1
    step_size: float = 0.1
    gamma: float | None = None
    update_mode: str = "step"
    max_eps: float = 1.0
    min_eps: float = 0.0
    warmup: int = 100
    output_dir: str | None = None
    smoothing_window: int = 10

    def __post_init__(self):
        self.agent = self.agent.replace("_", "-")
        if self.env_name not in ENV_NAMES:
            raise ConfigError(f"unknown environment {self.env_name!r}; choose from {', '.join(ENV_NAMES)}")
        if self.agent not in ("baseline", "rvf", "ba-rvf"):
            raise ConfigError(f"unknown agent {self.agent!r}; choose from baseline, rvf, ba-rvf")
        if self.agent == "ba-rvf" and self.beta is None:
            raise ConfigError("agent ba-rvf requires beta")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.smoothing_window < 1:
            raise ConfigError("smoothing_window must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved_prior_scale(self) -> float:
        return DEFAULT_PRIOR_SCALES[self.env_name] if self.prior_scale is None else float(self.prior_scale)

    def build_agent(self):
        if self.agent == "baseline":
            return make_agent("baseline", max_eps=self.max_eps, min_eps=self.min_eps, warmup=self.warmup,
                              step_size=self.step_size, gamma=self.gamma)
        common = dict(member_count=self.member_count, prior_scale=self.resolved_prior_scale(),
                      noise_scale=self.noise_scale, step_size=self.step_size, gamma=self.gamma,
                      update_mode=self.update_mode)
        if self.agent == "rvf":
            return make_agent("rvf", **common)
        return make_agent("ba-rvf", beta=self.beta, z_samples=self.z_samples, **common)


@dataclass
class RunRecord:
    config: dict
    seed: int
    episodes: list  # EpisodeResult per episode
    duration: float = 0.0

    @property
    def rows(self) -> list[tuple]:
        return [
            (k, e.undiscounted_return, e.steps, e.mean_rate, e.mean_distortion)
            for k, e in enumerate(self.episodes)
        ]

    @property
    def returns(self) -> np.ndarray:
        return np.array([e.undiscounted_return for e in self.episodes])

    @property
    def rates(self) -> np.ndarray:
        return np.array([e.mean_rate for e in self.episodes])

    @property
    def distortions(self) -> np.ndarray:
        return np.array([e.mean_distortion for e in self.episodes])


def run_csv_name(env_name: str, agent: str, beta, seed: int) -> str:
    beta_tag = "none" if beta is None else format(float(beta), "g")
    return f"run_{env_name}_{agent}_{beta_tag}_{seed}.csv"


def _write_run_csv(record: RunRecord, output_dir: Path) -> Path:
    cfg = record.config
    path = output_dir / run_csv_name(cfg["env_name"], cfg["agent"], cfg["beta"], record.seed)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for k, ret, steps, rate, dist in record.rows:
                writer.writerow([k, repr(float(ret)), steps, repr(float(rate)), repr(float(dist))])
    except OSError as exc:
        raise OSError(f"failed to write run CSV {path}: {exc}") from exc
    return path


def read_run_csv(path) -> list[tuple]:
    """Parse a per-run CSV back into ``(episode, return, steps, mean_rate, mean_distortion)`` rows."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(int(k), float(r), int(s), float(m), float(d)) for k, r, s, m, d in reader]


def _prepare_dir(output_dir) -> Path | None:
    if output_dir is None:
        return None
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    return path


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """One run per seed. Each run's CSV is written as soon as it finishes."""
    mdp = make_env(config.env_name, config.gamma)
    out = _prepare_dir(config.output_dir)
    records = []
    for seed in config.seeds:
        init_rng, agent_rng, env_rng = seed_streams(seed)
        agent = config.build_agent().initialize(mdp, config.episodes, init_rng)
        start = time.perf_counter()
        episodes = [
            run_episode(agent, mdp, agent_rng, env_rng=env_rng, episode_index=k)
            for k in range(config.episodes)
        ]
        record = RunRecord(config.to_dict(), seed, episodes, time.perf_counter() - start)
        records.append(record)
        if out is not None:
            _write_run_csv(record, out)
        logger.info("%s/%s beta=%s seed=%d: final return %.3f (%.1fs)", config.env_name, config.agent,
                    config.beta, seed, final_window(record.returns).mean(), record.duration)
    if out is not None:
        write_outputs(records, summarize(records, config.smoothing_window), out, write_runs=False)
    return records


def beta_sweep(base_config: ExperimentConfig, betas=DEFAULT_BETAS) -> dict:
    """Run ``base_config`` once per multiplier; returns the summary with one group per beta."""
    if base_config.agent != "ba-rvf":
        raise ConfigError("beta_sweep needs agent ba-rvf")
    records = []
    for beta in betas:
        cfg = ExperimentConfig.from_dict({**base_config.to_dict(), "beta": float(beta), "output_dir": None})
        records.extend(run_experiment(cfg))
    summary = summarize(records, base_config.smoothing_window)
    out = _prepare_dir(base_config.output_dir)
    if out is not None:
        write_outputs(records, summary, out)
    return summary


def final_window(values) -> np.ndarray:
    """Last 10% of a per-episode series (at least one entry)."""
    values = np.asarray(values)
    n = max(1, math.ceil(FINAL_WINDOW_FRACTION * len(values)))
    return values[-n:]


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically at the edges."""
    x = np.asarray(values, dtype=np.float64)
    if window <= 1 or x.size == 0:
        return x.copy()
    half_lo = (window - 1) // 2
    half_hi = window - 1 - half_lo
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(x.size)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi + 1, x.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _stats(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "std": std, "stderr": std / math.sqrt(v.size)}


def summarize(records: list[RunRecord], smoothing_window: int = 1) -> dict:
    """Per (agent, beta) group: final-window statistics across seeds and smoothed curves.

    ``std`` is the sample standard deviation over seeds (0 for one seed).
    """
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.config["agent"], r.config["beta"]), []).append(r)
    rows = []
    for (agent, beta), recs in groups.items():
        final_returns = [float(final_window(r.returns).mean()) for r in recs]
        final_rates = [float(final_window(r.rates).mean()) for r in recs]
        final_dists = [float(final_window(r.distortions).mean()) for r in recs]
        n = min(len(r.episodes) for r in recs)
        mean_curve = np.mean([r.returns[:n] for r in recs], axis=0)
        rows.append({
            "agent": agent,
            "beta": beta,
            "seeds": [r.seed for r in recs],
            "final_return": _stats(final_returns),
            "final_rate": _stats(final_rates),
            "final_distortion": _stats(final_dists),
            "per_seed_final_return": final_returns,
            "smoothed_mean_return": moving_average(mean_curve, smoothing_window).tolist(),
            "smoothed_returns": {str(r.seed): moving_average(r.returns, smoothing_window).tolist() for r in recs},
        })
    config = dict(records[0].config) if records else {}
    if len({r.config["beta"] for r in records}) > 1:
        config["betas"] = sorted({r.config["beta"] for r in records})
        config.pop("beta", None)
    return {
        "config": config,
        "final_window_fraction": FINAL_WINDOW_FRACTION,
        "smoothing_window": smoothing_window,
        "groups": rows,
    }


def write_outputs(records: list[RunRecord], summary: dict, output_dir, write_runs: bool = True) -> Path:
    """Per-run CSVs plus ``summary.json`` (and wall-clock timings in ``timings.json``)."""
    if not records:
        raise ValueError("nothing to write: records is empty")
    out = _prepare_dir(output_dir)
    if write_runs:
        for r in records:
            _write_run_csv(r, out)
    summary_path = out / "summary.json"
    try:
        summary_path.write_text(json.dumps(summary, indent=2) + "\n")
        timings = [{"agent": r.config["agent"], "beta": r.config["beta"], "seed": r.seed, "seconds": r.duration}
                   for r in records]
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write summary under {out}: {exc}") from exc
    return summary_path
