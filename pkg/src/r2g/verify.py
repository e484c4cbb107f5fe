"""Independent oracles and trajectory metrics.

Everything here is a pure function of its inputs: brute-force best
responses over an action grid, central-actor response maps, trajectory
statistics (band crossings, convergence error), and an executable check
that the soft level-k Bellman operator contracts on cooperative tabular
games.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .nets import CentralActor, CentralCritic, critic_value

RESPONSE_MAP_COLUMNS = ("opponent_action", "agent_id", "response")
METRICS_COLUMNS = ("run_id", "metric", "value")


def format_float(x: float) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class GridSpec:
    """Evenly spaced scalar action grid on ``[low, high]``.

    An odd resolution keeps 0 on the grid.
    """

    resolution: int = 41
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.resolution < 3 or self.resolution % 2 == 0:
            raise ValueError(f"grid resolution must be odd and >= 3, got {self.resolution}")
        if not self.low < self.high:
            raise ValueError("grid needs low < high")

    @property
    def step(self) -> float:
        return (self.high - self.low) / (self.resolution - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.low, self.high, self.resolution)


@dataclass
class TrajectoryLog:
    """Most-likely joint actions, one row per logged iteration.

    ``actions`` has shape ``[T, D]`` where ``D`` is the total joint action
    width (agent 1's dims first).
    """

    iterations: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        self.iterations = np.asarray(self.iterations, dtype=np.int64).reshape(-1)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        if self.actions.ndim == 1:
            self.actions = self.actions.reshape(-1, 1)
        if len(self.iterations) != len(self.actions):
            raise ValueError("one action row per iteration required")
        if np.any(np.diff(self.iterations) <= 0):
            raise ValueError("iterations must be strictly increasing")

    def __len__(self) -> int:
        return len(self.iterations)

    @classmethod
    def from_rows(cls, actions: Sequence[Sequence[float]]) -> "TrajectoryLog":
        actions = np.asarray(actions, dtype=np.float64)
        return cls(np.arange(1, len(actions) + 1), actions)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrajectoryLog":
        """Read a ``trajectory.csv`` (epoch, agent_id, action_dim, most_likely_action)."""
        cells: dict[int, dict[tuple[int, int], float]] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (int(row["agent_id"]), int(row["action_dim"]))
                cells.setdefault(int(row["epoch"]), {})[key] = float(row["most_likely_action"])
        epochs = sorted(cells)
        if not epochs:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 1)))
        order = sorted(cells[epochs[0]])
        return cls(np.array(epochs), np.array([[cells[e][k] for k in order] for e in epochs]))


# -- best responses ----------------------------------------------------------------------


ValueFn = Callable[[np.ndarray, np.ndarray, list], np.ndarray]


def brute_force_best_response(value_fn: ValueFn, s, a_minus_i: Sequence, grid: GridSpec) -> float:
    """Exhaustive grid argmax over a scalar action.

    ``value_fn(s_batch, a_i_batch, a_minus_i_batch)`` receives ``G`` rows
    (one per grid point) and returns ``G`` values. Ties go to the smallest
    action, since the grid is ascending and ``argmax`` keeps the first hit.
    """
    pts = grid.points().reshape(-1, 1)
    g = len(pts)
    s_b = np.repeat(np.atleast_2d(np.asarray(s, dtype=np.float64)), g, axis=0)
    opp = [np.repeat(np.atleast_2d(np.asarray(a, dtype=np.float64)), g, axis=0) for a in a_minus_i]
    values = np.asarray(value_fn(s_b, pts, opp), dtype=np.float64).reshape(-1)
    return float(pts[int(np.argmax(values)), 0])


def reward_value_fn(reward: Callable[[float, float], tuple[float, float]], agent: int) -> ValueFn:
    """Wrap a two-player scalar reward as a ``value_fn`` for ``agent``."""

    def fn(s, a_i, a_minus_i):
        own = a_i[:, 0]
        other = a_minus_i[0][:, 0]
        pairs = zip(own, other) if agent == 0 else zip(other, own)
        return np.array([reward(x, y)[agent] for x, y in pairs])

    return fn


def critic_value_fn(critic: CentralCritic) -> ValueFn:
    return lambda s, a_i, a_minus_i: critic_value(critic, s, a_i, a_minus_i)[:, 0]


def response_map(central_actor: CentralActor, s, grid: GridSpec, agent_id: int = 0) -> list[tuple[float, int, float]]:
    """Noise-free central-actor output at every opponent action on the grid.

    Returns rows ``(opponent_action, agent_id, response)`` for a two-player
    game with scalar actions.
    """
    if sum(central_actor.opponent_dims) != 1:
        raise ValueError("response maps need a single scalar opponent action")
    pts = grid.points().reshape(-1, 1)
    s_b = np.repeat(np.atleast_2d(np.asarray(s, dtype=np.float64)), len(pts), axis=0)
    resp = central_actor.most_likely(s_b, [pts])[:, 0]
    return [(float(o), int(agent_id), float(r)) for o, r in zip(pts[:, 0], resp)]


def oracle_responses(critic: CentralCritic, s, grid: GridSpec, agent_id: int = 0) -> list[tuple[float, int, float]]:
    """Brute-force argmax of ``critic`` at every opponent grid action (two players)."""
    fn = critic_value_fn(critic)
    return [(float(o), int(agent_id), brute_force_best_response(fn, s, [np.array([[o]])], grid))
            for o in grid.points()]


def response_agreement(actor_rows, oracle_rows, grid: GridSpec, slack: float = 0.1) -> float:
    """Fraction of grid points where the two responses differ by at most ``slack`` plus one grid cell."""
    a = np.array([r[2] for r in actor_rows])
    b = np.array([r[2] for r in oracle_rows])
    return float(np.mean(np.abs(a - b) <= slack + grid.step))


def sign_agreement(rows, expected_sign: Callable[[float], float], min_abs: float = 0.2) -> float:
    """Fraction of rows with ``|opponent_action| >= min_abs`` whose response has the expected sign."""
    hits = [np.sign(r) == expected_sign(o) for o, _, r in rows if abs(o) >= min_abs]
    if not hits:
        raise ValueError("no grid points beyond the magnitude threshold")
    return float(np.mean(hits))


def write_response_map(path: str | Path, rows: Iterable[tuple[float, int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESPONSE_MAP_COLUMNS)
        for o, i, r in rows:
            w.writerow([format_float(o), int(i), format_float(r)])


def read_response_map(path: str | Path) -> list[tuple[float, int, float]]:
    with open(path, newline="") as fh:
        return [(float(r["opponent_action"]), int(r["agent_id"]), float(r["response"]))
                for r in csv.DictReader(fh)]


# -- trajectory metrics ------------------------------------------------------------------


def oscillation_score(log: TrajectoryLog, lo: float = -0.5, hi: float = 0.5, window: int = 500,
                      column: int = 0) -> int:
    """Band crossings of one action coordinate within the last ``window`` rows.

    A crossing is a move from above ``hi`` to below ``lo`` or back; values
    inside the band leave the current side unchanged.
    """
    if window > len(log):
        raise ValueError(f"window {window} exceeds trajectory length {len(log)}")
    if not lo < hi:
        raise ValueError("need lo < hi")
    side = 0
    count = 0
    for x in log.actions[len(log) - window:, column]:
        here = 1 if x > hi else (-1 if x < lo else 0)
        if here and side and here != side:
            count += 1
        if here:
            side = here
    return count


def convergence_error(log: TrajectoryLog, target: Sequence[float], tail: int) -> float:
    """Max over the last ``tail`` rows of the L-infinity distance to ``target``."""
    if tail > len(log) or tail < 1:
        raise ValueError(f"tail must be in [1, {len(log)}], got {tail}")
    diff = log.actions[len(log) - tail:] - np.asarray(target, dtype=np.float64).reshape(1, -1)
    return float(np.max(np.abs(diff)))


def write_metrics(path: str | Path, rows: Iterable[tuple[str, str, float]], append: bool = False) -> None:
    path = Path(path)
    fresh = not append or not path.exists()
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(METRICS_COLUMNS)
        for run_id, metric, value in rows:
            w.writerow([run_id, metric, format_float(value)])


# -- contraction of the soft level-k operator --------------------------------------------


@dataclass
class TabularCooperativeGame:
    """Finite two-player game with a shared reward.

    ``reward[s, a1, a2]``, ``transition[s, a1, a2, s']``, and a fixed
    stochastic level-0 policy ``policy[s, a1]`` for player one.
    """

    reward: np.ndarray
    transition: np.ndarray
    policy: np.ndarray
    alpha: float = 0.1

    @classmethod
    def random(cls, rng: np.random.Generator | int = 0, states: int = 5, actions: int = 7,
               alpha: float = 0.1) -> "TabularCooperativeGame":
        rng = np.random.default_rng(rng)
        reward = rng.uniform(-1.0, 1.0, (states, actions, actions))
        transition = rng.dirichlet(np.ones(states), size=(states, actions, actions))
        logits = rng.standard_normal((states, actions))
        policy = np.exp(logits - logits.max(axis=1, keepdims=True))
        policy /= policy.sum(axis=1, keepdims=True)
        return cls(reward, transition, policy, alpha)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.reward.shape

    def operator(self, q: np.ndarray, gamma: float) -> np.ndarray:
        """``r + gamma * E_{s', a1'~pi}[max_{a2'} Q(s', a1', a2') - alpha log pi(a1'|s')]``."""
        soft = self.policy * (q.max(axis=2) - self.alpha * np.log(self.policy))
        v = soft.sum(axis=1)
        return self.reward + gamma * np.einsum("sabt,t->sab", self.transition, v)


def contraction_ratio(game: TabularCooperativeGame, q1: np.ndarray, q2: np.ndarray, gamma: float) -> float:
    denom = np.max(np.abs(q1 - q2))
    if denom == 0.0:
        raise ValueError("identical Q tables")
    return float(np.max(np.abs(game.operator(q1, gamma) - game.operator(q2, gamma))) / denom)


def contraction_check(game: TabularCooperativeGame, gamma: float, trials: int = 100,
                      rng: np.random.Generator | int = 0, shift: bool = False) -> float:
    """Largest observed ``|G Q1 - G Q2|_inf / |Q1 - Q2|_inf`` over random table pairs.

    With ``shift=True`` the second table is the first plus a random
    constant, for which the ratio equals ``gamma``. Otherwise odd trials
    draw two independent tables and even trials a shifted copy with a
    random-size perturbation, which probes ratios close to the bound.
    Pairs with a zero distance are redrawn.
    """
    rng = np.random.default_rng(rng)
    worst = 0.0
    done = 0
    while done < trials:
        scale = rng.uniform(0.1, 10.0)
        q1 = rng.standard_normal(game.shape) * scale
        noise = rng.standard_normal(game.shape) * scale
        if shift:
            q2 = q1 + rng.uniform(-5.0, 5.0)
        elif done % 2:
            q2 = noise
        else:
            q2 = q1 + rng.uniform(-5.0, 5.0) + rng.uniform(0.0, 1.0) ** 3 * noise
        if np.max(np.abs(q1 - q2)) == 0.0:
            continue
        worst = max(worst, contraction_ratio(game, q1, q2, gamma))
        done += 1
    return worst
