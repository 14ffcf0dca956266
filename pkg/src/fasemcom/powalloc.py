"""Level-weighted transmission power allocation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attnmap import PatchGrid
from .errors import InvalidLevel, NonPositiveBudget, SimulationError


@dataclass(frozen=True)
class PatchPowerPlan:
    levels: np.ndarray
    beta: float
    p_total: float
    powers: np.ndarray
    grid: PatchGrid | None = None

    @property
    def uniform_power(self):
        return self.p_total / len(self.powers)

    def gain_factors(self) -> np.ndarray:
        """Per-patch power relative to an equal split of the budget."""
        return self.powers / self.uniform_power


def allocate(levels, beta: float, p_total: float, grid: PatchGrid | None = None, level_count=None) -> PatchPowerPlan:
    """Split ``p_total`` across patches in proportion to ``level ** beta``.

    ``beta = 0`` gives the uniform (average) allocation regardless of levels.
    """
    levels = np.asarray(levels)
    if levels.ndim != 1 or levels.size == 0:
        raise InvalidLevel("levels must be a nonempty 1-D sequence")
    if not np.issubdtype(levels.dtype, np.integer):
        if not np.all(levels == np.round(levels)):
            raise InvalidLevel("levels must be integers")
        levels = levels.astype(np.int64)
    if levels.min() < 1 or (level_count is not None and levels.max() > level_count):
        raise InvalidLevel(f"levels must lie in [1, {level_count or 'L'}]")
    if not p_total > 0:
        raise NonPositiveBudget(f"p_total={p_total} must be positive")
    if not beta >= 0:
        raise ValueError(f"beta={beta} must be >= 0")
    if grid is not None and grid.patch_count != levels.size:
        raise InvalidLevel(f"{levels.size} levels for a {grid.patch_count}-patch grid")

    if beta == 0 or levels.min() == levels.max():
        powers = np.full(levels.size, p_total / levels.size)
    else:
        # scale by the top level first so large beta cannot overflow
        w = (levels / levels.max()) ** float(beta)
        powers = w / w.sum() * p_total
        if not (powers > 0).all():
            raise SimulationError(f"beta={beta} starves low-level patches below float precision")
    levels = levels.copy()
    levels.setflags(write=False)
    powers.setflags(write=False)
    return PatchPowerPlan(levels, float(beta), float(p_total), powers, grid)


def boost_ratio(plan: PatchPowerPlan) -> float:
    """Largest over smallest per-patch power."""
    return float(plan.powers.max() / plan.powers.min())
