"""Confining potentials."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid


@dataclass(frozen=True)
class Potential:
    """``coef * |x - center|^power + shift`` or a custom callable on ``(..., d)`` arrays."""

    kind: str = "power"
    coef: float = 1.0
    power: float = 2.0
    shift: float = 0.0
    center: tuple = ()
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("power", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom potential needs a callable")
        if self.kind == "power" and not (self.coef > 0 and self.power > 0):
            raise ValueError("power potential needs positive coefficient and exponent")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.kind == "custom":
            return np.asarray(self.fn(x), float)
        c = np.asarray(self.center, float) if self.center else 0.0
        r = np.sqrt(np.sum((x - c) ** 2, axis=-1))
        return self.coef * r ** self.power + self.shift

    def on_grid(self, grid: Grid) -> np.ndarray:
        return grid.evaluate(self)

    def shifted(self, delta: float) -> "Potential":
        if self.kind == "custom":
            f = self.fn
            return Potential("custom", fn=lambda x: f(x) + delta)
        return Potential("power", self.coef, self.power, self.shift + delta, self.center)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            return {"kind": "custom"}
        return {"kind": "power", "coef": self.coef, "power": self.power, "shift": self.shift,
                "center": list(self.center)}


def as_grid_potential(V, grid: Grid) -> np.ndarray:
    """Accept a callable or a grid array and return the grid array."""
    if callable(V):
        return grid.evaluate(V)
    arr = np.asarray(V, float)
    if arr.shape != grid.shape:
        raise ValueError("potential array does not match grid")
    return arr
