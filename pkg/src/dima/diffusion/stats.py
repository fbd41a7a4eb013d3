"""Running per-dimension normalization statistics.

Updated only from real-environment data; the trainer never feeds imagined
states back in. Standard deviations are floored so constant dimensions
stay finite.
"""

from __future__ import annotations

import numpy as np

STD_FLOOR = 1e-6


class RunningStats:
    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def update(self, batch: np.ndarray) -> None:
        """Welford update with a batch of rows."""
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        for row in batch:
            self.count += 1
            delta = row - self.mean
            self.mean += delta / self.count
            self._m2 += delta * (row - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.maximum(np.sqrt(self._m2 / self.count), STD_FLOOR)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.std + self.mean

    def state_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean.tolist(), "m2": self._m2.tolist()}

    def load_state_dict(self, state: dict) -> None:
        self.count = int(state["count"])
        self.mean = np.asarray(state["mean"], dtype=np.float64)
        self._m2 = np.asarray(state["m2"], dtype=np.float64)
