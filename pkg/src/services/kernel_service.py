"""
有限カーネルサービス

条件付きモーメントを厳密に計算できる適合差分列の生成器（有限カーネル）を提供する。
各 (状態, ステップ k) で有限個の結果 (確率, 差分行列, 遷移先) を列挙するので、
条件付き期待値 E_{k−1} は結果の有限和として正確に評価される。
"""

import logging
import threading
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.martingale import Outcome, TransitionTable
from ..models.matrices import RectMatrix, SymMatrix
from .symmat_service import DimensionMismatchError, dilation, lambda_max_batch

logger = logging.getLogger(__name__)


class KernelError(Exception):
    """カーネル関連のエラー"""
    pass


class KernelValidationError(KernelError, ValueError):
    """カーネルの不変条件違反（確率の和、次元、中心化）"""
    pass


class HorizonExceededError(KernelError, ValueError):
    """要求ステップ数がカーネルの上限を超えた"""
    def __init__(self, message: str, requested: Optional[int] = None, horizon: Optional[int] = None):
        super().__init__(message)
        self.requested = requested
        self.horizon = horizon


class UnreachableStateError(KernelError, KeyError):
    """到達不能な (状態, k) が指定された"""
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# 不変条件の許容誤差
PROBABILITY_TOLERANCE = 1e-12
CENTERING_TOLERANCE = 1e-10

BUILTIN_KERNELS = ("walk1d", "rademacher2d", "statewalk", "rectangular")


@dataclass(frozen=True)
class OutcomeArrays:
    """1つの (状態, k) の結果をまとめた配列表現"""
    probabilities: np.ndarray  # (n,)
    cumulative: np.ndarray  # (n,) 累積確率
    matrices: np.ndarray  # (n, d, d)
    second_moment: np.ndarray  # (d, d) Σ p_i X_i²
    mean: np.ndarray  # (d, d) Σ p_i X_i
    next_states: Tuple[Hashable, ...]


def _build_outcome_arrays(outcomes: Sequence[Outcome]) -> OutcomeArrays:
    probabilities = np.array([o.probability for o in outcomes], dtype=np.float64)
    matrices = np.stack([o.matrix.entries for o in outcomes])
    squares = matrices @ matrices
    return OutcomeArrays(
        probabilities=probabilities,
        cumulative=np.cumsum(probabilities),
        matrices=matrices,
        second_moment=np.einsum("i,ijk->jk", probabilities, squares),
        mean=np.einsum("i,ijk->jk", probabilities, matrices),
        next_states=tuple(o.next_state for o in outcomes),
    )


class FiniteKernel(ABC):
    """有限カーネルの基底クラス（構築後は不変）"""

    def __init__(self, dim: int, horizon: int, initial_state: Hashable = None,
                 centered: bool = True, name: str = "kernel"):
        if int(dim) != dim or dim < 1:
            raise KernelValidationError(f"kernel dimension must be a positive integer, got {dim}")
        if int(horizon) != horizon or horizon < 0:
            raise KernelValidationError(f"kernel horizon must be a non-negative integer, got {horizon}")
        self.dim = int(dim)
        self.horizon = int(horizon)
        self.initial_state = initial_state
        self.centered = centered
        self.name = name
        self._arrays_cache: Dict[Tuple[Hashable, int], OutcomeArrays] = {}
        self._reachable_cache: Dict[int, FrozenSet[Tuple[Hashable, int]]] = {}
        self._lock = threading.Lock()

    @abstractmethod
    def outcomes(self, state: Hashable, k: int) -> Tuple[Outcome, ...]:
        """ステップ k（1始まり）を状態 state から進めるときの結果一覧"""

    def describe_state_space(self) -> str:
        return "single state"

    def outcome_arrays(self, state: Hashable, k: int) -> OutcomeArrays:
        """(状態, k) の結果の配列表現（キャッシュ付き）"""
        key = (state, k)
        cached = self._arrays_cache.get(key)
        if cached is None:
            cached = _build_outcome_arrays(self.outcomes(state, k))
            with self._lock:
                self._arrays_cache[key] = cached
        return cached

    def reachable_nodes(self, K: Optional[int] = None) -> FrozenSet[Tuple[Hashable, int]]:
        """ステップ 1..K の直前に到達しうる (状態, k) の集合"""
        K = self.horizon if K is None else K
        if K > self.horizon:
            raise HorizonExceededError(
                f"requested {K} steps but kernel '{self.name}' has horizon {self.horizon}",
                requested=K, horizon=self.horizon,
            )
        cached = self._reachable_cache.get(K)
        if cached is not None:
            return cached

        nodes = set()
        queue = deque()
        if K >= 1:
            queue.append((self.initial_state, 1))
        while queue:
            node = queue.popleft()
            if node in nodes:
                continue
            nodes.add(node)
            state, k = node
            if k < K:
                for outcome in self.outcomes(state, k):
                    queue.append((outcome.next_state, k + 1))

        result = frozenset(nodes)
        with self._lock:
            self._reachable_cache[K] = result
        return result

    def validate(self) -> None:
        """到達可能な全ノードで不変条件を確認する"""
        for state, k in self.reachable_nodes():
            self._validate_outcomes(self.outcomes(state, k), f"state={state!r}, k={k}")
        logger.debug(f"カーネル '{self.name}' を検証しました (ノード数={len(self.reachable_nodes())})")

    def _validate_outcomes(self, outcomes: Sequence[Outcome], where: str) -> None:
        if not outcomes:
            raise KernelValidationError(f"no outcomes at {where}")
        total = 0.0
        for outcome in outcomes:
            if not outcome.probability > 0:
                raise KernelValidationError(f"probabilities must be > 0 at {where}, got {outcome.probability}")
            if outcome.matrix.dim != self.dim:
                raise KernelValidationError(
                    f"outcome dimension {outcome.matrix.dim} does not match kernel dimension {self.dim} at {where}"
                )
            total += outcome.probability
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise KernelValidationError(f"probabilities sum to {total!r}, not 1, at {where}")
        if self.centered:
            mean = _build_outcome_arrays(outcomes).mean
            if float(np.max(np.abs(mean))) > CENTERING_TOLERANCE:
                raise KernelValidationError(
                    f"kernel flagged centered but E_(k−1) X_k ≠ 0 at {where} (max |mean| = {np.max(np.abs(mean)):.3e})"
                )


class RademacherSeriesKernel(FiniteKernel):
    """独立なRademacher級数 X_k = ε_k A_k（状態なし）"""

    def __init__(self, coeffs: Sequence[SymMatrix], dim: Optional[int] = None, name: str = "rademacher"):
        coeffs = tuple(coeffs)
        if not coeffs and dim is None:
            raise KernelValidationError("an empty Rademacher series needs an explicit dimension")
        dim = coeffs[0].dim if coeffs else dim
        for j, coeff in enumerate(coeffs, start=1):
            if coeff.dim != dim:
                raise DimensionMismatchError(f"coefficient A_{j} has dimension {coeff.dim}, expected {dim}")
        super().__init__(dim=dim, horizon=len(coeffs), initial_state=None, centered=True, name=name)
        self.coeffs = coeffs

    def outcomes(self, state: Hashable, k: int) -> Tuple[Outcome, ...]:
        if not 1 <= k <= self.horizon:
            raise UnreachableStateError(f"step {k} is outside 1..{self.horizon}")
        coeff = self.coeffs[k - 1]
        return (Outcome(0.5, coeff, None), Outcome(0.5, -coeff, None))


class RectangularRademacherKernel(RademacherSeriesKernel):
    """長方形Rademacher級数 ε_k B_k を自己共役拡大で表したカーネル（次元 d1 + d2）"""

    def __init__(self, coeffs: Sequence[RectMatrix], name: str = "rectangular"):
        coeffs = tuple(coeffs)
        if not coeffs:
            raise KernelValidationError("a rectangular series needs at least one coefficient")
        rows, cols = coeffs[0].rows, coeffs[0].cols
        for j, coeff in enumerate(coeffs, start=1):
            if (coeff.rows, coeff.cols) != (rows, cols):
                raise DimensionMismatchError(
                    f"coefficient B_{j} is {coeff.rows}x{coeff.cols}, expected {rows}x{cols}"
                )
        super().__init__([dilation(c) for c in coeffs], name=name)
        self.rows = rows
        self.cols = cols
        self.rect_coeffs = coeffs


class TableKernel(FiniteKernel):
    """遷移表による状態依存カーネル（結果の分布は k に依存しない）"""

    def __init__(self, table: TransitionTable):
        super().__init__(dim=table.dim, horizon=table.horizon, initial_state=table.initial_state,
                         centered=table.centered, name=table.name)
        self.table = table
        self._rows: Dict[Hashable, Tuple[Outcome, ...]] = {
            state: tuple(row) for state, row in table.states.items()
        }

    def describe_state_space(self) -> str:
        return f"{len(self._rows)} states: {', '.join(str(s) for s in self._rows)}"

    def outcomes(self, state: Hashable, k: int) -> Tuple[Outcome, ...]:
        if state not in self._rows:
            raise UnreachableStateError(f"unknown state {state!r}")
        if not 1 <= k <= self.horizon:
            raise UnreachableStateError(f"step {k} is outside 1..{self.horizon}")
        return self._rows[state]

    def validate(self) -> None:
        if self.initial_state not in self._rows:
            raise KernelValidationError(f"initial state {self.initial_state!r} is not declared")
        # 到達可能性に関係なく全ての行を検査する
        for state, row in self._rows.items():
            self._validate_outcomes(row, f"state={state!r}")
            for outcome in row:
                if outcome.next_state not in self._rows:
                    raise KernelValidationError(
                        f"state {state!r} transitions to undeclared state {outcome.next_state!r}"
                    )
        super().validate()


def kernel_rademacher_series(coeffs: Sequence[SymMatrix], dim: Optional[int] = None,
                             name: str = "rademacher") -> RademacherSeriesKernel:
    """Rademacher級数カーネルを構築"""
    kernel = RademacherSeriesKernel(coeffs, dim=dim, name=name)
    kernel.validate()
    logger.debug(f"Rademacher級数カーネルを構築しました: d={kernel.dim}, K={kernel.horizon}")
    return kernel


def kernel_state_dependent_walk(table: TransitionTable) -> TableKernel:
    """
    遷移表から状態依存カーネルを構築

    Raises:
        KernelValidationError: 行の確率の和が1でない、次元不一致、中心化違反など
    """
    kernel = TableKernel(table)
    kernel.validate()
    logger.debug(f"状態依存カーネルを構築しました: {kernel.describe_state_space()}, K={kernel.horizon}")
    return kernel


def kernel_rectangular_rademacher(coeffs: Sequence[RectMatrix],
                                  name: str = "rectangular") -> RectangularRademacherKernel:
    """長方形Rademacher級数（拡大表現）カーネルを構築"""
    kernel = RectangularRademacherKernel(coeffs, name=name)
    kernel.validate()
    return kernel


def exact_conditional_second_moment(kernel: FiniteKernel, state: Hashable, k: int) -> SymMatrix:
    """
    条件付き二次モーメント E_{k−1}(X_k²) = Σ p_i X_i²

    Raises:
        UnreachableStateError: (state, k) が到達不能な場合
    """
    if k > kernel.horizon or (state, k) not in kernel.reachable_nodes():
        raise UnreachableStateError(f"(state={state!r}, k={k}) is not reachable in kernel '{kernel.name}'")
    return SymMatrix(kernel.outcome_arrays(state, k).second_moment)


def outcome_bound(kernel: FiniteKernel, K: Optional[int] = None) -> float:
    """到達可能な全結果にわたる max λ_max(X_i)（一様上界 R）"""
    nodes = kernel.reachable_nodes(K)
    if not nodes:
        return 0.0
    stacks = [kernel.outcome_arrays(state, k).matrices for state, k in nodes]
    return float(np.max(lambda_max_batch(np.concatenate(stacks, axis=0))))


def count_tree_nodes(kernel: FiniteKernel, K: int) -> int:
    """深さ K までの経路木のノード数（根を含む）を状態ごとの多重度で数える"""
    if K > kernel.horizon:
        raise HorizonExceededError(
            f"requested {K} steps but kernel '{kernel.name}' has horizon {kernel.horizon}",
            requested=K, horizon=kernel.horizon,
        )
    level: Dict[Hashable, int] = {kernel.initial_state: 1}
    total = 1
    for k in range(1, K + 1):
        following: Dict[Hashable, int] = {}
        for state, count in level.items():
            for outcome in kernel.outcomes(state, k):
                following[outcome.next_state] = following.get(outcome.next_state, 0) + count
        level = following
        total += sum(level.values())
    return total


def _statewalk_table(K: int) -> TransitionTable:
    """下降ステップの後は歩幅が半分になる2状態スカラー歩行"""
    one, half = SymMatrix([[1.0]]), SymMatrix([[0.5]])
    return TransitionTable(
        dim=1,
        horizon=K,
        initial_state="full",
        states={
            "full": [Outcome(0.5, one, "full"), Outcome(0.5, -one, "half")],
            "half": [Outcome(0.5, half, "half"), Outcome(0.5, -half, "half")],
        },
        centered=True,
        name="statewalk",
    )


def builtin_kernel(name: str, K: int) -> FiniteKernel:
    """
    名前で指定する組み込みカーネル

    - walk1d: スカラー ±1 ランダムウォーク
    - rademacher2d: d=2、係数が diag(1,0) と [[0,1],[1,0]] を交互にとるRademacher級数
    - statewalk: 下降後に歩幅が半分になる状態依存スカラー歩行（W_k がランダム）
    - rectangular: 2×3 のRademacher級数を拡大表現した d=5 のカーネル
    """
    if K < 0:
        raise KernelValidationError(f"K must be ≥ 0, got {K}")
    if name == "walk1d":
        return kernel_rademacher_series([SymMatrix([[1.0]])] * K, dim=1, name=name)
    if name == "rademacher2d":
        cycle = [SymMatrix.diag([1.0, 0.0]), SymMatrix([[0.0, 1.0], [1.0, 0.0]])]
        return kernel_rademacher_series([cycle[j % 2] for j in range(K)], dim=2, name=name)
    if name == "statewalk":
        return kernel_state_dependent_walk(_statewalk_table(K))
    if name == "rectangular":
        cycle = [
            RectMatrix([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]),
            RectMatrix(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]]) / np.sqrt(2.0)),
        ]
        if K == 0:
            return kernel_rademacher_series([], dim=5, name=name)
        return kernel_rectangular_rademacher([cycle[j % 2] for j in range(K)], name=name)
    raise KernelValidationError(f"unknown built-in kernel '{name}' (choose from {', '.join(BUILTIN_KERNELS)})")


def list_builtin_kernels() -> List[str]:
    return list(BUILTIN_KERNELS)
