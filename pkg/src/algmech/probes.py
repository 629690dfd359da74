"""Randomized probe points and sections used by the check suites and tests."""
from __future__ import annotations

import numpy as np

from .geometry import GhSection

__all__ = ["random_point", "random_section", "random_coeff_fn"]


def random_point(rng: np.random.Generator, m: int, r: int,
                 x_box: float = 0.8, y_lo: float = 0.3, y_hi: float = 1.1) -> np.ndarray:
    """Bundle point with the fibre part kept away from the null section."""
    x = rng.uniform(-x_box, x_box, size=m)
    y = rng.uniform(y_lo, y_hi, size=r) * rng.choice([-1.0, 1.0], size=r)
    return np.concatenate([x, y])


def random_coeff_fn(rng: np.random.Generator, dim: int, n_slots: int):
    """Smooth vector coefficient function: affine plus a mild quadratic."""
    c0 = rng.uniform(-1.0, 1.0, size=dim)
    c1 = rng.uniform(-0.6, 0.6, size=(dim, n_slots))
    c2 = rng.uniform(-0.2, 0.2, size=(dim, n_slots))

    def fn(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return c0 + c1 @ u + c2 @ (u * u)
    return fn


def random_section(rng: np.random.Generator, m: int, p: int, r: int) -> GhSection:
    n = m + r
    return GhSection(z=random_coeff_fn(rng, p, n), v=random_coeff_fn(rng, r, n))
