"""
マルチンゲールシミュレーションサービス

有限カーネルから軌道を生成し、部分和 Y_k、予測可能二次変動 W_k、
乖離過程 S_k(θ) = tr exp(θY_k − g(θ)W_k)、停止時刻 κ を計算する。
Monte Carlo 推定用に、軌道のバッチをベクトル化して進めるエンジンも提供する。
"""

import logging
import math
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.martingale import StepRecord, StoppingRecord, Trajectory
from ..models.matrices import SymMatrix
from ..utils.rng import stream_generator
from .kernel_service import FiniteKernel, HorizonExceededError, OutcomeArrays
from .symmat_service import lambda_max_batch, trace_exp_array

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """シミュレーションのエラー"""
    pass


class ThetaDomainError(SimulationError, ValueError):
    """θ ≤ 0 が指定された"""
    pass


# g(θ) の級数展開に切り替える閾値
_G_SERIES_CUTOFF = 1e-3


def g_function_value(theta: float) -> float:
    """
    Freedmanのcgf上界 g(θ) = e^θ − θ − 1（θ > 0）

    小さい θ では桁落ちを避けるためTaylor級数で評価する。
    """
    if not theta > 0:
        raise ThetaDomainError(f"g(θ) requires θ > 0, got {theta}")
    if math.isinf(theta):
        return math.inf
    if theta < _G_SERIES_CUTOFF:
        # θ²/2 + θ³/6 + θ⁴/24 + θ⁵/120
        return theta * theta * (0.5 + theta * (1.0 / 6.0 + theta * (1.0 / 24.0 + theta / 120.0)))
    if theta > 709.0:
        return math.inf
    return math.expm1(theta) - theta


def _check_thetas(theta_list: Sequence[float]) -> Tuple[float, ...]:
    thetas = tuple(float(theta) for theta in theta_list)
    for theta in thetas:
        if not theta > 0:
            raise ThetaDomainError(f"tracked θ values must be > 0, got {theta}")
    return thetas


def check_horizon(kernel: FiniteKernel, K: int) -> None:
    if K < 0:
        raise HorizonExceededError(f"K must be ≥ 0, got {K}", requested=K, horizon=kernel.horizon)
    if K > kernel.horizon:
        raise HorizonExceededError(
            f"requested {K} steps but kernel '{kernel.name}' has horizon {kernel.horizon}",
            requested=K, horizon=kernel.horizon,
        )


def _choose(arrays: OutcomeArrays, uniforms: np.ndarray) -> np.ndarray:
    """一様乱数を累積確率で結果の添字に変換"""
    choice = np.searchsorted(arrays.cumulative, uniforms, side="right")
    return np.minimum(choice, len(arrays.probabilities) - 1)


def discrepancy_values(Y: np.ndarray, W: np.ndarray, thetas: Sequence[float]) -> Tuple[float, ...]:
    """S(θ) = tr exp(θY − g(θ)W) を複数の θ について評価"""
    if not thetas:
        return ()
    stack = np.stack([theta * Y - g_function_value(theta) * W for theta in thetas])
    return tuple(float(v) for v in trace_exp_array(stack))


def simulate(kernel: FiniteKernel, K: int, theta_list: Sequence[float], seed: int,
             stream: int = 0) -> Trajectory:
    """
    カーネルから1本の軌道を生成

    乱数は (seed, stream) から導出したカウンターベースの系列を使うので、
    同じ引数なら常に同一の軌道になる。S_0 は厳密に d。

    Raises:
        HorizonExceededError: K がカーネルの上限を超える場合
    """
    check_horizon(kernel, K)
    thetas = _check_thetas(theta_list)
    rng = stream_generator(seed, stream)

    d = kernel.dim
    Y = np.zeros((d, d))
    W = np.zeros((d, d))
    state = kernel.initial_state
    steps: List[StepRecord] = [
        StepRecord(k=0, X=None, Y=SymMatrix(Y), W=SymMatrix(W), S=tuple(float(d) for _ in thetas), state=state)
    ]

    for k in range(1, K + 1):
        arrays = kernel.outcome_arrays(state, k)
        index = int(_choose(arrays, rng.random(1))[0])
        X = arrays.matrices[index]
        # V_k はステップ前の状態から計算する
        Y = Y + X
        W = W + arrays.second_moment
        state = arrays.next_states[index]
        steps.append(StepRecord(
            k=k,
            X=SymMatrix(X),
            Y=SymMatrix(Y),
            W=SymMatrix(W),
            S=discrepancy_values(Y, W, thetas),
            state=state,
        ))

    logger.debug(f"軌道を生成しました: kernel={kernel.name}, K={K}, seed={seed}, stream={stream}")
    return Trajectory(steps=tuple(steps), theta_list=thetas, seed=seed, stream=stream)


def stopping_time(traj: Trajectory, t: float, sigma2: float) -> StoppingRecord:
    """
    停止時刻 κ = inf{k ≥ 0 : λ_max(Y_k) ≥ t かつ λ_max(W_k) ≤ σ²}

    k = 0..K を全て走査し、該当がなければ κ = ∞（kappa=None）。
    """
    Y_stack = np.stack([step.Y.entries for step in traj.steps])
    W_stack = np.stack([step.W.entries for step in traj.steps])
    lam_Y = lambda_max_batch(Y_stack)
    lam_W = lambda_max_batch(W_stack)
    kappa = first_hit_index(lam_Y, lam_W, t, sigma2)
    if kappa is None:
        return StoppingRecord(kappa=None, t=t, sigma2=sigma2)
    return StoppingRecord(
        kappa=traj.steps[kappa].k,
        t=t,
        sigma2=sigma2,
        lambda_max_Y=float(lam_Y[kappa]),
        lambda_max_W=float(lam_W[kappa]),
    )


def simulate_batch_hits(kernel: FiniteKernel, K: int, t: float, sigma2: float, n: int,
                        seed: int, stream: int) -> int:
    """
    n 本の軌道をベクトル化して進め、停止時刻が有限になった本数を返す

    ステップ k の乱数は系列 (seed, stream, k) から n 個引き、バッチ内 j 番目の軌道は
    その j 番目を使う。軌道の乱数は (seed, stream, j) だけで決まり、n には依存しない。
    既に到達した軌道も乱数は消費する。
    """
    check_horizon(kernel, K)
    if n <= 0:
        return 0

    # k = 0: Y_0 = W_0 = 0
    if 0.0 >= t and 0.0 <= sigma2:
        return n

    d = kernel.dim
    Y = np.zeros((n, d, d))
    W = np.zeros((n, d, d))
    hit = np.zeros(n, dtype=bool)

    state_ids = np.zeros(n, dtype=np.int64)
    states: List[Hashable] = [kernel.initial_state]
    state_index: Dict[Hashable, int] = {kernel.initial_state: 0}

    for k in range(1, K + 1):
        uniforms = stream_generator(seed, stream, k).random(n)
        next_ids = np.empty(n, dtype=np.int64)
        for sid in np.unique(state_ids):
            members = np.nonzero(state_ids == sid)[0]
            arrays = kernel.outcome_arrays(states[int(sid)], k)
            choice = _choose(arrays, uniforms[members])
            Y[members] += arrays.matrices[choice]
            W[members] += arrays.second_moment

            outcome_ids = np.empty(len(arrays.next_states), dtype=np.int64)
            for j, next_state in enumerate(arrays.next_states):
                if next_state not in state_index:
                    state_index[next_state] = len(states)
                    states.append(next_state)
                outcome_ids[j] = state_index[next_state]
            next_ids[members] = outcome_ids[choice]
        state_ids = next_ids

        pending = np.nonzero(~hit)[0]
        if pending.size == 0:
            break
        reached = (lambda_max_batch(Y[pending]) >= t) & (lambda_max_batch(W[pending]) <= sigma2)
        hit[pending[reached]] = True

    return int(np.count_nonzero(hit))


def pqv_increment_margins(traj: Trajectory) -> List[float]:
    """各ステップの λ_min(W_k − W_{k−1})（PQVの単調性の確認用）"""
    margins: List[float] = []
    for previous, current in zip(traj.steps, traj.steps[1:]):
        increment = current.W.entries - previous.W.entries
        margins.append(float(-lambda_max_batch(-increment)))
    return margins


def recompute_discrepancy(step: StepRecord, theta: float) -> float:
    """保存された (Y_k, W_k) から S_k(θ) を独立に再計算"""
    return discrepancy_values(step.Y.entries, step.W.entries, (theta,))[0]


def first_hit_index(lam_Y: np.ndarray, lam_W: np.ndarray, t: float, sigma2: float) -> Optional[int]:
    """λ_max 列から最初の到達添字を返す"""
    hits = np.nonzero((lam_Y >= t) & (lam_W <= sigma2))[0]
    return int(hits[0]) if hits.size else None
