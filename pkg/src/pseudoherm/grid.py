from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` nodes on ``[xmin, xmax]``."""

    xmin: float
    xmax: float
    n: int

    def __post_init__(self):
        if not self.xmax > self.xmin:
            raise ValueError(f"grid needs xmax > xmin, got [{self.xmin}, {self.xmax}]")
        if int(self.n) != self.n or self.n < 9:
            raise ValueError(f"grid needs at least 9 nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "xmin", float(self.xmin))
        object.__setattr__(self, "xmax", float(self.xmax))

    @property
    def h(self) -> float:
        return (self.xmax - self.xmin) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.xmin + self.h * np.arange(self.n)

    def refined(self) -> "Grid":
        """Grid with the spacing halved."""
        return Grid(self.xmin, self.xmax, 2 * (self.n - 1) + 1)

    def to_dict(self) -> dict:
        return {"xmin": self.xmin, "xmax": self.xmax, "n": self.n, "h": self.h}
