from __future__ import annotations

import numpy as np


class OUNoise:
    """Ornstein-Uhlenbeck process ``x <- x + theta (mu - x) + sigma N(0, 1)``.

    ``reset`` puts the state back to ``mu``; its stationary standard deviation
    is ``sigma / sqrt(2 theta - theta^2)`` (``~ sigma / sqrt(2 theta)`` for small theta).
    """

    def __init__(self, dim: int, theta: float = 0.15, mu: float = 0.0, sigma: float = 0.2):
        self.dim = int(dim)
        self.theta = theta
        self.mu = mu
        self.sigma = sigma
        self.state = np.full(self.dim, mu, dtype=np.float64)

    def reset(self) -> None:
        self.state[...] = self.mu

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        self.state += self.theta * (self.mu - self.state) + self.sigma * rng.standard_normal(self.dim)
        return self.state.copy()
