"""行列マルチンゲールのモデル定義"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Tuple

from .matrices import SymMatrix


@dataclass(frozen=True)
class Outcome:
    """有限カーネルの1つの結果: 確率 p > 0、差分 X、遷移先の状態"""
    probability: float
    matrix: SymMatrix
    next_state: Hashable = None


@dataclass(frozen=True)
class StepRecord:
    """軌道の1ステップ（k = 0 は初期値で X は None）"""
    k: int
    X: Optional[SymMatrix]
    Y: SymMatrix
    W: SymMatrix
    S: Tuple[float, ...]
    state: Hashable = None


@dataclass(frozen=True)
class Trajectory:
    """実現された1本の経路 (X_k, Y_k, W_k, S_k(θ))"""
    steps: Tuple[StepRecord, ...]
    theta_list: Tuple[float, ...]
    seed: int
    stream: int = 0

    @property
    def K(self) -> int:
        """ステップ数（初期値を除く）"""
        return len(self.steps) - 1

    @property
    def dim(self) -> int:
        return self.steps[0].Y.dim


@dataclass(frozen=True)
class StoppingRecord:
    """停止時刻 κ = inf{k : λ_max(Y_k) ≥ t かつ λ_max(W_k) ≤ σ²}"""
    kappa: Optional[int]
    t: float
    sigma2: float
    lambda_max_Y: Optional[float] = None
    lambda_max_W: Optional[float] = None

    @property
    def hit(self) -> bool:
        return self.kappa is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa if self.kappa is not None else math.inf,
            "hit": self.hit,
            "t": self.t,
            "sigma2": self.sigma2,
            "lambda_max_Y": self.lambda_max_Y,
            "lambda_max_W": self.lambda_max_W,
        }


@dataclass
class TransitionTable:
    """
    状態依存カーネルの遷移表

    states: 状態名 → 結果の行（確率, 行列, 遷移先）のリスト
    probabilities は float のほか Fraction / 10進文字列から変換済みの値を許す。
    """
    dim: int
    horizon: int
    initial_state: Hashable
    states: Dict[Hashable, List[Outcome]] = field(default_factory=dict)
    centered: bool = True
    name: str = "table"
