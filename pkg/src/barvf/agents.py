"""Decision-making agents: an epsilon-greedy control arm, RVF and BA-RVF.

Agents follow scikit-learn conventions: constructor arguments are the
hyperparameters (so ``get_params``/``set_params``/``clone`` work), ``fit``
trains on an MDP for a number of episodes, and ``predict`` returns greedy
actions under the learned values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from barvf.envs import TabularMdp, reset, step
from barvf.exceptions import ConfigError, InvalidInputError
from barvf.posterior import EnsemblePosterior, init_posterior
from barvf.rate_distortion import BAConfig, _solve

__all__ = [
    "EpisodeResult",
    "BAAction",
    "EpsilonGreedyAgent",
    "RVFAgent",
    "BARVFAgent",
    "AGENT_NAMES",
    "make_agent",
    "epsilon_at",
    "greedy_action",
    "ba_rvf_action",
    "run_episode",
    "seed_streams",
]


@dataclass
class EpisodeResult:
    undiscounted_return: float
    steps: int
    mean_rate: float = 0.0
    mean_distortion: float = 0.0
    actions: list = field(default_factory=list)
    # steps at which the Z posterior samples disagreed on the greedy action set
    disagreement_steps: int = 0


class BAAction(NamedTuple):
    action: int
    rate: float
    distortion: float
    probabilities: np.ndarray  # channel row the action was drawn from


def seed_streams(seed) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Split one master seed into (init, agent, env) generators."""
    init_ss, agent_ss, env_ss = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init_ss), np.random.default_rng(agent_ss), np.random.default_rng(env_ss)


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(probs) - 1))


def greedy_action(q: np.ndarray, state: int, rng: np.random.Generator) -> int:
    """Argmax of ``q[state]``; ties are broken uniformly at random."""
    row = q[state]
    best = np.flatnonzero(row == row.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def epsilon_at(t: int, max_eps: float, min_eps: float, warmup: int, decay_rate: float) -> float:
    if t < warmup:
        return max_eps
    return max(min_eps, max_eps - decay_rate * (t - warmup))


def _ba_step(posterior: EnsemblePosterior, pinned_row: np.ndarray, state: int, cfg: BAConfig,
             z_samples: int, rng: np.random.Generator, replace: bool = True):
    M = posterior.member_count
    n_fresh = z_samples - 1
    if replace:
        members = rng.integers(M, size=n_fresh)
    else:
        if n_fresh > M:
            raise InvalidInputError(f"cannot draw {n_fresh} distinct members from {M}")
        members = rng.choice(M, size=n_fresh, replace=False)
    values = np.empty((z_samples, posterior.num_actions))
    values[0] = pinned_row
    values[1:] = posterior.state_values(members, state)
    gap = values.max(axis=1, keepdims=True) - values
    d = gap * gap
    sol = _solve(d, np.full(z_samples, 1.0 / z_samples), cfg)
    action = _sample_index(sol.conditional[0], rng)
    return action, sol, d


def ba_rvf_action(posterior: EnsemblePosterior, pinned: np.ndarray, state: int, beta: float,
                  z_samples: int, rng: np.random.Generator, cfg: BAConfig | None = None,
                  replace: bool = True) -> BAAction:
    """Compress ``z_samples`` value samples at ``state`` into one action.

    The pinned sample is source atom 0; ``z_samples - 1`` further members are
    drawn fresh. The action is sampled from the optimal channel's row for the
    pinned sample.
    """
    if z_samples < 1:
        raise InvalidInputError("z_samples must be >= 1")
    pinned = np.asarray(pinned, dtype=np.float64)
    if pinned.shape != (posterior.num_states, posterior.num_actions):
        raise InvalidInputError(f"pinned sample shape {pinned.shape} does not match the posterior")
    base = BAConfig() if cfg is None else cfg
    cfg = BAConfig(beta=beta, max_iterations=base.max_iterations, tolerance=base.tolerance)
    action, sol, _ = _ba_step(posterior, pinned[state], state, cfg, z_samples, rng, replace)
    return BAAction(action, sol.rate, sol.expected_distortion, sol.conditional[0].copy())


class _Agent(BaseEstimator):
    """Shared episode bookkeeping. Subclasses implement the four hooks."""

    kind = "agent"

    def _setup(self, mdp: TabularMdp, n_episodes: int, rng: np.random.Generator):
        raise NotImplementedError

    def _begin_episode(self, rng):
        pass

    def _act(self, state: int, rng) -> tuple[int, float, float, bool]:
        raise NotImplementedError

    def _observe(self, s, a, r, s_next, done, rng):
        raise NotImplementedError

    def _end_episode(self, rng):
        pass

    def _gamma(self, mdp):
        return mdp.gamma if getattr(self, "gamma", None) is None else self.gamma

    def initialize(self, mdp: TabularMdp, n_episodes: int = 1, rng=None) -> "_Agent":
        """Allocate learning state for ``mdp``; ``rng`` seeds priors only."""
        self.global_step_ = 0
        self.episodes_ = []
        self.n_states_ = mdp.num_states
        self.n_actions_ = mdp.num_actions
        self._setup(mdp, n_episodes, np.random.default_rng(rng))
        return self

    def fit(self, mdp: TabularMdp, n_episodes: int = 100, random_state=None) -> "_Agent":
        init_rng, agent_rng, env_rng = seed_streams(random_state)
        self.initialize(mdp, n_episodes, init_rng)
        for k in range(n_episodes):
            self.episodes_.append(run_episode(self, mdp, agent_rng, env_rng=env_rng, episode_index=k))
        return self

    def value_table(self) -> np.ndarray:
        raise NotImplementedError

    def predict(self, states) -> np.ndarray:
        """Greedy actions under the current point estimate of Q."""
        check_is_fitted(self, "global_step_")
        q = self.value_table()
        return np.argmax(q[np.asarray(states, dtype=int)], axis=-1)


class EpsilonGreedyAgent(_Agent):
    """Tabular Q-learning with a linearly decaying exploration rate.

    ``decay_rate=None`` spreads the decay over 95% of the post-warmup step
    budget (``n_episodes * horizon``) passed to ``initialize``.
    """

    kind = "baseline"

    def __init__(self, max_eps=1.0, min_eps=0.0, warmup=100, decay_rate=None, step_size=0.1, gamma=None):
        self.max_eps = max_eps
        self.min_eps = min_eps
        self.warmup = warmup
        self.decay_rate = decay_rate
        self.step_size = step_size
        self.gamma = gamma

    def _setup(self, mdp, n_episodes, rng):
        if not 0 <= self.min_eps <= self.max_eps <= 1:
            raise InvalidInputError("need 0 <= min_eps <= max_eps <= 1")
        self.q_ = np.zeros((mdp.num_states, mdp.num_actions))
        self.gamma_ = self._gamma(mdp)
        if self.decay_rate is None:
            frames = n_episodes * mdp.horizon
            self.decay_rate_ = 1.0 / (0.95 * max(frames - self.warmup, 1))
        else:
            self.decay_rate_ = float(self.decay_rate)

    def epsilon(self, t: int) -> float:
        return epsilon_at(t, self.max_eps, self.min_eps, self.warmup, self.decay_rate_)

    def _act(self, state, rng):
        if rng.random() < self.epsilon(self.global_step_):
            return int(rng.integers(self.n_actions_)), 0.0, 0.0, False
        return greedy_action(self.q_, state, rng), 0.0, 0.0, False

    def _observe(self, s, a, r, s_next, done, rng):
        target = r if done else r + self.gamma_ * self.q_[s_next].max()
        self.q_[s, a] += self.step_size * (target - self.q_[s, a])

    def value_table(self):
        return self.q_


class _PosteriorAgent(_Agent):
    def _setup(self, mdp, n_episodes, rng):
        if self.update_mode not in ("step", "episode"):
            raise ConfigError(f"update_mode must be 'step' or 'episode', got {self.update_mode!r}")
        self.posterior_ = init_posterior(
            mdp.num_states, mdp.num_actions, self.member_count, self.prior_scale,
            self.noise_scale, self.step_size, self._gamma(mdp), rng,
        )
        self._buffer = []

    def _begin_episode(self, rng):
        self.pinned_member_, self.pinned_ = self.posterior_.sample(rng)

    def _observe(self, s, a, r, s_next, done, rng):
        if self.update_mode == "step":
            self.posterior_.update(s, a, r, s_next, done, rng)
        else:
            self._buffer.append((s, a, r, s_next, done))

    def _end_episode(self, rng):
        for tr in self._buffer:
            self.posterior_.update(*tr, rng)
        self._buffer = []

    def value_table(self):
        return self.posterior_.effective().mean(axis=0)


class RVFAgent(_PosteriorAgent):
    """Thompson sampling over value functions: one pinned member per episode, acted on greedily."""

    kind = "rvf"

    def __init__(self, member_count=30, prior_scale=0.1, noise_scale=0.1, step_size=0.1, gamma=None,
                 update_mode="step"):
        self.member_count = member_count
        self.prior_scale = prior_scale
        self.noise_scale = noise_scale
        self.step_size = step_size
        self.gamma = gamma
        self.update_mode = update_mode

    def _act(self, state, rng):
        return greedy_action(self.pinned_, state, rng), 0.0, 0.0, False


class BARVFAgent(_PosteriorAgent):
    """RVF with a per-step Blahut-Arimoto compression of posterior samples.

    Parameters
    ----------
    beta : float
        Lagrange multiplier; 0 gives uniformly random actions, very large
        values recover RVF.
    z_samples : int, default=32
        Source atoms per solve: the episode's pinned sample plus
        ``z_samples - 1`` fresh members.
    replace : bool, default=True
        Draw the fresh members with replacement.
    max_iter, tol : solver settings.
    """

    kind = "ba_rvf"

    def __init__(self, beta=1.0, z_samples=32, member_count=30, prior_scale=0.1, noise_scale=0.1,
                 step_size=0.1, gamma=None, update_mode="step", replace=True, max_iter=200, tol=1e-9):
        self.beta = beta
        self.z_samples = z_samples
        self.member_count = member_count
        self.prior_scale = prior_scale
        self.noise_scale = noise_scale
        self.step_size = step_size
        self.gamma = gamma
        self.update_mode = update_mode
        self.replace = replace
        self.max_iter = max_iter
        self.tol = tol

    def _setup(self, mdp, n_episodes, rng):
        if self.z_samples < 1:
            raise InvalidInputError("z_samples must be >= 1")
        self.ba_config_ = BAConfig(beta=self.beta, max_iterations=self.max_iter, tolerance=self.tol)
        super()._setup(mdp, n_episodes, rng)

    def _act(self, state, rng):
        action, sol, d = _ba_step(self.posterior_, self.pinned_[state], state, self.ba_config_,
                                  self.z_samples, rng, self.replace)
        zero = d == 0.0
        disagree = bool(np.any(zero != zero[0]))
        return action, sol.rate, sol.expected_distortion, disagree


AGENT_NAMES = {"baseline": EpsilonGreedyAgent, "rvf": RVFAgent, "ba-rvf": BARVFAgent, "ba_rvf": BARVFAgent}


def make_agent(name: str, **params) -> _Agent:
    try:
        cls = AGENT_NAMES[name]
    except KeyError:
        raise ConfigError(f"unknown agent {name!r}; choose from baseline, rvf, ba-rvf") from None
    valid = cls._get_param_names()
    unknown = set(params) - set(valid)
    if unknown:
        raise ConfigError(f"agent {name!r} does not take parameters {sorted(unknown)}")
    return cls(**params)


def run_episode(agent: _Agent, mdp: TabularMdp, rng: np.random.Generator, env_rng=None,
                episode_index: int = 0) -> EpisodeResult:
    """Play one episode, updating the agent as transitions arrive.

    Ends at a terminal state or after ``mdp.horizon`` steps. ``env_rng``
    drives initial states and transitions; it defaults to ``rng``.
    """
    check_is_fitted(agent, "global_step_")
    env_rng = rng if env_rng is None else env_rng
    agent._begin_episode(rng)
    s = reset(mdp, env_rng)
    total = 0.0
    rate_sum = 0.0
    dist_sum = 0.0
    disagreements = 0
    actions = []
    for _ in range(mdp.horizon):
        a, rate, dist, disagree = agent._act(s, rng)
        out = step(mdp, s, a, env_rng)
        agent._observe(s, a, out.reward, out.next_state, out.done, rng)
        agent.global_step_ += 1
        actions.append(a)
        total += out.reward
        rate_sum += rate
        dist_sum += dist
        disagreements += disagree
        s = out.next_state
        if out.done:
            break
    agent._end_episode(rng)
    n = len(actions)
    return EpisodeResult(total, n, rate_sum / n, dist_sum / n, actions, disagreements)
