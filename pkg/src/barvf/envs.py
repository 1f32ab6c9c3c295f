"""Tabular evaluation environments and an exact value-iteration oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from barvf.exceptions import ConfigError, ContractViolation, InvalidInputError

__all__ = [
    "TabularMdp",
    "StepOutcome",
    "river_swim",
    "confluence_swim",
    "grid_env",
    "make_env",
    "ENV_NAMES",
    "reset",
    "step",
    "optimal_q",
    "bellman_backup",
    "greedy_policy",
    "policy_episode_return",
    "describe",
]

LEFT, RIGHT, NOOP = 0, 1, 2
ROTATE_LEFT, ROTATE_RIGHT, FORWARD = 0, 1, 2

# heading 0 = east, then clockwise: south, west, north
_HEADING_DELTAS = ((0, 1), (1, 0), (0, -1), (-1, 0))


@dataclass
class TabularMdp:
    """Finite discounted MDP with an episode step cap.

    ``transitions[s, a]`` is a distribution over next states and
    ``rewards[s, a]`` the (deterministic) reward for taking ``a`` in ``s``.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    initial_dist: np.ndarray
    gamma: float
    horizon: int
    terminal_states: frozenset = frozenset()
    name: str = "mdp"
    _cumulative: np.ndarray = field(init=False, repr=False)
    _terminal_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.initial_dist = np.asarray(self.initial_dist, dtype=np.float64)
        self.terminal_states = frozenset(int(s) for s in self.terminal_states)
        S, A = self.rewards.shape
        if self.transitions.shape != (S, A, S):
            raise InvalidInputError(f"transitions shape {self.transitions.shape} != {(S, A, S)}")
        if np.any(self.transitions < 0) or np.any(np.abs(self.transitions.sum(axis=2) - 1.0) > 1e-12):
            raise InvalidInputError("every transitions[s, a, :] must be a probability distribution")
        if np.any(self.rewards < 0) or np.any(self.rewards > 1):
            raise InvalidInputError("rewards must lie in [0, 1]")
        if self.initial_dist.shape != (S,) or np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1) > 1e-12:
            raise InvalidInputError("initial_dist must be a distribution over states")
        if not 0 <= self.gamma < 1:
            raise InvalidInputError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.horizon < 1:
            raise InvalidInputError("horizon must be positive")
        if any(not 0 <= s < S for s in self.terminal_states):
            raise InvalidInputError("terminal state out of range")
        self._cumulative = np.cumsum(self.transitions, axis=2)
        self._cumulative[..., -1] = 1.0
        self._terminal_mask = np.zeros(S, dtype=bool)
        self._terminal_mask[list(self.terminal_states)] = True

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def terminal_mask(self) -> np.ndarray:
        return self._terminal_mask

    def with_gamma(self, gamma: float) -> "TabularMdp":
        return TabularMdp(self.transitions, self.rewards, self.initial_dist, gamma,
                          self.horizon, self.terminal_states, self.name)


class StepOutcome(NamedTuple):
    next_state: int
    reward: float
    done: bool


def _river_block(n_states, p_right, p_stay, left_reward, right_reward):
    """Transition/reward blocks for one river; actions are (left, right)."""
    if n_states < 2:
        raise InvalidInputError("a river needs at least 2 states")
    if not (0 <= p_right <= 1 and 0 <= p_stay <= 1 and p_right + p_stay <= 1 + 1e-12):
        raise InvalidInputError(f"invalid river probabilities p_right={p_right}, p_stay={p_stay}")
    if not (0 <= left_reward <= 1 and 0 <= right_reward <= 1):
        raise InvalidInputError("river rewards must lie in [0, 1]")
    p_slip = max(0.0, 1.0 - p_right - p_stay)
    n = n_states
    T = np.zeros((n, 2, n))
    R = np.zeros((n, 2))
    for s in range(n):
        T[s, LEFT, max(s - 1, 0)] = 1.0
        # impossible moves at the two ends fold into "stay"
        T[s, RIGHT, min(s + 1, n - 1)] += p_right
        T[s, RIGHT, s] += p_stay
        T[s, RIGHT, max(s - 1, 0)] += p_slip
    R[0, LEFT] = left_reward
    R[n - 1, RIGHT] = right_reward
    return T, R


def river_swim(n_states=6, p_right=0.3, p_stay=0.6, left_reward=0.005, right_reward=1.0,
               horizon=20, gamma=0.99) -> TabularMdp:
    """Chain MDP; ``left`` drifts home for a pittance, ``right`` fights the current.

    Episodes start in state 0 and end only when the step cap is reached.
    """
    T, R = _river_block(n_states, p_right, p_stay, left_reward, right_reward)
    mu = np.zeros(n_states)
    mu[0] = 1.0
    return TabularMdp(T, R, mu, gamma, horizon, name="riverswim")


# (p_right, p_stay, end_reward) for the easy, medium and hard branches
CONFLUENCE_RIVERS = ((0.9, 0.1, 0.1), (0.6, 0.3, 0.3), (0.3, 0.6, 1.0))
CONFLUENCE_RIVER_LENGTH = 5


def confluence_swim(horizon=24, gamma=0.99, river_length=CONFLUENCE_RIVER_LENGTH,
                    rivers=CONFLUENCE_RIVERS, left_reward=0.005) -> TabularMdp:
    """Three rivers of increasing difficulty fed from one hub state.

    State 0 is the hub; action ``i`` there moves deterministically (and for
    the rest of the episode) into the leftmost state of river ``i``. River
    ``i`` occupies states ``1 + i * river_length ... (i + 1) * river_length``.
    Inside a river, actions are left, right and a zero-reward no-op.
    """
    if horizon < 2 * (river_length + 1):
        raise InvalidInputError(f"horizon {horizon} too short for rivers of length {river_length}")
    k = len(rivers)
    n_actions = max(3, k)
    S = 1 + k * river_length
    T = np.zeros((S, n_actions, S))
    R = np.zeros((S, n_actions))
    for i, (p_right, p_stay, end_reward) in enumerate(rivers):
        off = 1 + i * river_length
        Tb, Rb = _river_block(river_length, p_right, p_stay, left_reward, end_reward)
        block = slice(off, off + river_length)
        T[block, :2, block] = Tb
        R[block, :2] = Rb
        for s in range(off, off + river_length):
            T[s, 2:, s] = 1.0
        T[0, i, off] = 1.0
    for a in range(k, n_actions):
        T[0, a, 0] = 1.0
    mu = np.zeros(S)
    mu[0] = 1.0
    return TabularMdp(T, R, mu, gamma, horizon, name="confluence")


def _grid_layout(kind):
    # returns (open cells as set of (r, c), start cell, {goal cell: reward})
    if kind == "empty":
        size = 8
        cells = {(r, c) for r in range(size) for c in range(size)}
        return cells, (0, 0), {(size - 1, size - 1): 1.0}
    if kind == "corridor":
        # 1 x 12 corridor along row 0, goals in side alcoves on row 1
        length = 12
        goal_cols = (2, 5, 8)
        cells = {(0, c) for c in range(length)} | {(1, c) for c in goal_cols}
        far = goal_cols[-1] + 1
        goals = {(1, c): (c + 1) / far for c in goal_cols}
        return cells, (0, 0), goals
    raise ConfigError(f"unknown grid kind {kind!r}; expected 'empty' or 'corridor'")


def grid_env(kind="empty", horizon=100, gamma=0.99) -> TabularMdp:
    """Fully observable grid world with (cell, heading) states.

    Actions are rotate-left, rotate-right and forward. Moving forward into a
    wall leaves the state unchanged. Entering a goal cell pays that goal's
    reward and ends the episode. The agent starts in the top-left cell
    facing east.
    """
    cells, start, goals = _grid_layout(kind)
    order = sorted(cells)
    index = {cell: i for i, cell in enumerate(order)}
    S = 4 * len(order)
    T = np.zeros((S, 3, S))
    R = np.zeros((S, 3))
    terminal = set()
    for cell in order:
        for h in range(4):
            s = 4 * index[cell] + h
            if cell in goals:
                terminal.add(s)
            T[s, ROTATE_LEFT, 4 * index[cell] + (h - 1) % 4] = 1.0
            T[s, ROTATE_RIGHT, 4 * index[cell] + (h + 1) % 4] = 1.0
            dr, dc = _HEADING_DELTAS[h]
            ahead = (cell[0] + dr, cell[1] + dc)
            if ahead in cells:
                T[s, FORWARD, 4 * index[ahead] + h] = 1.0
                R[s, FORWARD] = goals.get(ahead, 0.0)
            else:
                T[s, FORWARD, s] = 1.0
    mu = np.zeros(S)
    mu[4 * index[start]] = 1.0
    return TabularMdp(T, R, mu, gamma, horizon, frozenset(terminal), name=f"{kind}-grid")


ENV_NAMES = ("riverswim", "confluence", "empty-grid", "corridor-grid")


def make_env(name: str, gamma: float | None = None) -> TabularMdp:
    builders = {
        "riverswim": river_swim,
        "confluence": confluence_swim,
        "empty-grid": lambda: grid_env("empty"),
        "corridor-grid": lambda: grid_env("corridor"),
    }
    if name not in builders:
        raise ConfigError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}")
    mdp = builders[name]()
    return mdp if gamma is None else mdp.with_gamma(gamma)


def reset(mdp: TabularMdp, rng: np.random.Generator) -> int:
    return int(np.searchsorted(np.cumsum(mdp.initial_dist), rng.random(), side="right").clip(0, mdp.num_states - 1))


def step(mdp: TabularMdp, state: int, action: int, rng: np.random.Generator) -> StepOutcome:
    if mdp._terminal_mask[state]:
        raise ContractViolation(f"cannot step from terminal state {state}")
    nxt = int(np.searchsorted(mdp._cumulative[state, action], rng.random(), side="right"))
    return StepOutcome(nxt, float(mdp.rewards[state, action]), bool(mdp._terminal_mask[nxt]))


def bellman_backup(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    v = np.where(mdp.terminal_mask, 0.0, q.max(axis=1))
    out = mdp.rewards + mdp.gamma * mdp.transitions @ v
    out[mdp.terminal_mask] = 0.0
    return out


def optimal_q(mdp: TabularMdp, tol: float = 1e-10, max_iter: int = 1_000_000) -> np.ndarray:
    """Value iteration until the sup-norm Bellman residual drops below ``tol``."""
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    q = np.zeros_like(mdp.rewards)
    for _ in range(max_iter):
        nq = bellman_backup(mdp, q)
        if np.max(np.abs(nq - q)) < tol * (1 - mdp.gamma) / 2 or mdp.gamma == 0:
            # one more contraction puts the residual of the returned table under tol
            return nq
        q = nq
    return q


def greedy_policy(q: np.ndarray) -> np.ndarray:
    return np.argmax(q, axis=1)


def policy_episode_return(mdp: TabularMdp, policy: np.ndarray) -> float:
    """Exact expected undiscounted return of a stationary deterministic policy over one episode."""
    dist = mdp.initial_dist.copy()
    total = 0.0
    idx = np.arange(mdp.num_states)
    for _ in range(mdp.horizon):
        live = np.where(mdp.terminal_mask, 0.0, dist)
        total += float(live @ mdp.rewards[idx, policy])
        dist = live @ mdp.transitions[idx, policy]
    return total


def describe(mdp: TabularMdp) -> dict:
    """JSON-friendly summary for debugging."""
    return {
        "name": mdp.name,
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "gamma": mdp.gamma,
        "horizon": mdp.horizon,
        "terminal_states": sorted(mdp.terminal_states),
        "nonzero_rewards": int(np.count_nonzero(mdp.rewards)),
        "reward_sparsity": float(1.0 - np.count_nonzero(mdp.rewards) / mdp.rewards.size),
        "max_reward": float(mdp.rewards.max()),
    }
