"""裾確率の上界に関するモデル定義"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, NamedTuple, Optional

import numpy as np

# CgfBoundFn の非負性を確認する格子点（対数等間隔）
CGF_CHECK_GRID = tuple(float(x) for x in np.logspace(-6, 1.5, 24))


class BoundInputError(ValueError):
    """上界モデルの不変条件違反"""
    pass


@dataclass(frozen=True)
class TailQuery:
    """裾確率の問い合わせ (t, σ², R, d)"""
    t: float
    sigma2: float
    R: float
    d: int

    def __post_init__(self):
        values = (self.t, self.sigma2, self.R)
        if not all(math.isfinite(v) for v in values):
            raise BoundInputError(f"TailQuery values must be finite: {self}")
        if self.t < 0:
            raise BoundInputError(f"t must be ≥ 0, got {self.t}")
        if self.sigma2 <= 0:
            raise BoundInputError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.R <= 0:
            raise BoundInputError(f"R must be > 0, got {self.R}")
        if int(self.d) != self.d or self.d < 1:
            raise BoundInputError(f"d must be a positive integer, got {self.d}")

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "sigma2": self.sigma2, "R": self.R, "d": self.d}


@dataclass(frozen=True)
class CgfBoundFn:
    """
    cgf上界関数 g: (0, ∞) → [0, ∞]

    argmin が与えられている場合、(t, w) ↦ θ* の閉形式最小化子として使われる。
    """
    g: Callable[[float], float]
    description: str
    argmin: Optional[Callable[[float, float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        for theta in CGF_CHECK_GRID:
            value = self.g(theta)
            if math.isnan(value) or value < 0:
                raise BoundInputError(
                    f"cgf bound '{self.description}' must be non-negative, g({theta:.3g}) = {value}"
                )

    def __call__(self, theta: float) -> float:
        return self.g(theta)


@dataclass(frozen=True)
class BoundResult:
    """
    上界の評価結果

    value は生の値（1を超えうる）。probability は min(value, 1)、
    clipped はその切り詰めが起きたかどうか。
    """
    value: float
    theta_star: Optional[float] = None

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 0:
            raise BoundInputError(f"bound value must be ≥ 0, got {self.value}")

    @property
    def clipped(self) -> bool:
        return self.value > 1.0

    @property
    def probability(self) -> float:
        return min(self.value, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "probability": self.probability,
            "clipped": self.clipped,
            "theta_star": self.theta_star,
        }


class HInequalityCheck(NamedTuple):
    """h(u) ≥ (u²/2)/(1 + u/3) の評価"""
    lhs: float
    rhs: float
    ok: bool
