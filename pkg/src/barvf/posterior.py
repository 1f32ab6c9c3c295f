"""Ensemble approximation to the posterior over optimal action values.

Each member is a learned table plus a fixed, scaled random prior table. All
members are trained on every transition with TD(0) targets that carry
independent Gaussian perturbations, so disagreement between members tracks
how little data backs each state-action pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from barvf.exceptions import InvalidInputError, NumericError

__all__ = ["EnsemblePosterior", "init_posterior"]


@dataclass
class EnsemblePosterior:
    learned: np.ndarray  # (M, S, A)
    priors: np.ndarray  # (M, S, A), never written after construction
    prior_scale: float = 0.1
    noise_scale: float = 0.1
    step_size: float = 0.1
    gamma: float = 0.99

    def __post_init__(self):
        if self.learned.shape != self.priors.shape or self.learned.ndim != 3:
            raise InvalidInputError("learned and prior tables must share an (M, S, A) shape")
        if self.member_count < 2:
            raise InvalidInputError("ensemble needs at least 2 members")
        if self.prior_scale < 0 or self.noise_scale < 0:
            raise InvalidInputError("prior_scale and noise_scale must be non-negative")
        if not 0 < self.step_size <= 1:
            raise InvalidInputError("step_size must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise InvalidInputError("gamma must be in [0, 1)")
        self.priors.setflags(write=False)

    @property
    def member_count(self) -> int:
        return self.learned.shape[0]

    @property
    def num_states(self) -> int:
        return self.learned.shape[1]

    @property
    def num_actions(self) -> int:
        return self.learned.shape[2]

    def effective(self, member=None) -> np.ndarray:
        """Learned + scaled prior, for one member or (by default) all of them."""
        if member is None:
            return self.learned + self.prior_scale * self.priors
        return self.learned[member] + self.prior_scale * self.priors[member]

    def state_values(self, members, state: int) -> np.ndarray:
        """Effective ``Q(state, .)`` rows for an index array of members, shape (len, A)."""
        return self.learned[members, state] + self.prior_scale * self.priors[members, state]

    def member_q(self, m: int, s: int, a: int) -> float:
        M, S, A = self.learned.shape
        if not (0 <= m < M and 0 <= s < S and 0 <= a < A):
            raise IndexError(f"index (m={m}, s={s}, a={a}) out of range for shape {(M, S, A)}")
        return float(self.learned[m, s, a] + self.prior_scale * self.priors[m, s, a])

    def sample(self, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Pick a member uniformly at random; returns ``(index, S x A copy of its values)``."""
        m = int(rng.integers(self.member_count))
        return m, self.effective(m)

    def update(self, s: int, a: int, r: float, s_next: int, done: bool, rng: np.random.Generator) -> "EnsemblePosterior":
        """One noisy TD(0) step on every member, in place."""
        if not np.isfinite(r):
            raise NumericError(f"reward must be finite, got {r}")
        M = self.member_count
        noise = rng.normal(0.0, self.noise_scale, size=M) if self.noise_scale > 0 else np.zeros(M)
        target = r + noise
        if not done:
            nxt = self.learned[:, s_next, :] + self.prior_scale * self.priors[:, s_next, :]
            target = target + self.gamma * nxt.max(axis=1)
        current = self.learned[:, s, a] + self.prior_scale * self.priors[:, s, a]
        self.learned[:, s, a] += self.step_size * (target - current)
        return self

    def snapshot(self) -> dict:
        """Per-state member mean/std of effective values (JSON-friendly)."""
        eff = self.effective()
        return {
            "member_count": self.member_count,
            "prior_scale": self.prior_scale,
            "noise_scale": self.noise_scale,
            "step_size": self.step_size,
            "gamma": self.gamma,
            "mean": eff.mean(axis=0).tolist(),
            "std": eff.std(axis=0).tolist(),
        }

    def dump(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.snapshot(), indent=2))
        return path


def init_posterior(num_states, num_actions, member_count=30, prior_scale=0.1, noise_scale=0.1,
                   step_size=0.1, gamma=0.99, rng=None) -> EnsemblePosterior:
    """Fresh ensemble: zero learned tables, standard-normal prior tables."""
    if member_count < 2:
        raise InvalidInputError(f"member_count must be >= 2, got {member_count}")
    rng = np.random.default_rng(rng)
    shape = (member_count, num_states, num_actions)
    return EnsemblePosterior(
        learned=np.zeros(shape),
        priors=rng.standard_normal(shape),
        prior_scale=prior_scale,
        noise_scale=noise_scale,
        step_size=step_size,
        gamma=gamma,
    )
