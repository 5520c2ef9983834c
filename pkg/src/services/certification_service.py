"""
トレース不等式の数値証明サービス

期待値は全て有限和で厳密に評価する（サンプリングは使わない）。
各チェックは CertificationReport を返し、margin ≥ −tolerance で合格とする。
前提条件の違反は不合格ではなく PreconditionError になる。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import config
from ..models.matrices import SymMatrix
from ..models.verification import CertificationReport, SuiteReport
from ..utils.rng import stream_generator
from .bound_service import H_INEQUALITY_SLACK, h_lower_bound_check
from .estimation_service import NodeBudgetExceededError, PreconditionError
from .kernel_service import FiniteKernel, builtin_kernel, count_tree_nodes, outcome_bound
from .simulation_service import check_horizon, g_function_value
from .symmat_service import (
    DimensionMismatchError,
    MatrixDomainError,
    eigh_batch,
    lambda_max,
    matrix_log,
    trace_exp,
    trace_exp_array,
)

logger = logging.getLogger(__name__)

# 合格判定の許容誤差
CERTIFICATION_TOLERANCE = 1e-9
PROBABILITY_SUM_TOLERANCE = 1e-12
CENTERING_TOLERANCE = 1e-10
OUTCOME_BOUND_TOLERANCE = 1e-12

MGF_THETA_GRID = (0.1, 0.5, 1.0, 2.0, 4.0)
SUPERMARTINGALE_THETAS = (0.1, 0.5, 1.0, 2.0)

# (組み込みカーネル名, K)
SUPERMARTINGALE_KERNELS = (
    ("walk1d", 10),
    ("rademacher2d", 6),
    ("statewalk", 8),
    ("rectangular", 6),
)

H_GRID_POINTS = 10_000
H_GRID_UPPER = 100.0

Distribution = Sequence[Tuple[float, SymMatrix]]


def _check_distribution(dist: Distribution, dim: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(確率, 行列) の有限分布を配列に変換し、確率の和と次元を確認"""
    if not dist:
        raise PreconditionError("distribution must have at least one outcome")
    probabilities = np.array([float(p) for p, _ in dist])
    if np.any(probabilities <= 0):
        raise PreconditionError(f"probabilities must be > 0, got {probabilities.tolist()}")
    total = float(np.sum(probabilities))
    if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
        raise PreconditionError(f"probabilities sum to {total!r}, not 1")
    dims = {X.dim for _, X in dist}
    if dim is not None:
        dims.add(dim)
    if len(dims) != 1:
        raise DimensionMismatchError(f"outcome dimensions do not match: {sorted(dims)}")
    return probabilities, np.stack([X.entries for _, X in dist])


def _check_centered_bounded(probabilities: np.ndarray, matrices: np.ndarray) -> np.ndarray:
    """Σ p_i X_i = 0 と λ_max(X_i) ≤ 1 を確認し、平均を返す"""
    mean = np.einsum("i,ijk->jk", probabilities, matrices)
    if float(np.max(np.abs(mean))) > CENTERING_TOLERANCE:
        raise PreconditionError(f"distribution is not centered: max |E X| = {np.max(np.abs(mean)):.3e}")
    values, _ = eigh_batch(matrices, compute_vectors=False)
    top = float(np.max(values[:, -1]))
    if top > 1.0 + OUTCOME_BOUND_TOLERANCE:
        raise PreconditionError(f"outcomes must satisfy λ_max(X) ≤ 1, got {top:.6g}")
    return mean


def _check_thetas(theta_grid: Sequence[float]) -> Tuple[float, ...]:
    thetas = tuple(float(theta) for theta in theta_grid)
    if not thetas:
        raise PreconditionError("theta grid must not be empty")
    if any(not theta > 0 for theta in thetas):
        raise PreconditionError(f"theta values must be > 0, got {thetas}")
    return thetas


def _spectral_apply(values: np.ndarray, vectors: np.ndarray, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """分解済みスタックに f を適用: Q f(Λ) Qᵀ"""
    return np.einsum("...ij,...j,...kj->...ik", vectors, func(values), vectors)


def check_lieb_corollary(H: SymMatrix, X_dist: Distribution) -> CertificationReport:
    """
    E tr exp(H + X) ≤ tr exp(H + log E e^X) を厳密に確認

    margin = tr exp(H + log Σ p_i e^{X_i}) − Σ p_i tr exp(H + X_i)
    """
    probabilities, matrices = _check_distribution(X_dist, H.dim)

    values, vectors = eigh_batch(matrices)
    expectation = np.einsum("i,ijk->jk", probabilities, _spectral_apply(values, vectors, np.exp))
    lhs = float(np.dot(probabilities, trace_exp_array(H.entries[None, :, :] + matrices)))
    rhs = trace_exp(H + matrix_log(SymMatrix(expectation)))

    return CertificationReport(
        description=f"lieb d={H.dim} outcomes={len(X_dist)}",
        margin=rhs - lhs,
        tolerance=CERTIFICATION_TOLERANCE * max(1.0, abs(rhs)),
        details={"lhs": lhs, "rhs": rhs},
    )


def check_lieb_concavity(H: SymMatrix, A: SymMatrix, B: SymMatrix, weight: float = 0.5) -> CertificationReport:
    """
    A ↦ tr exp(H + log A) の凹性

    margin = f(wA + (1−w)B) − (w f(A) + (1−w) f(B))
    """
    if not 0.0 <= weight <= 1.0:
        raise PreconditionError(f"weight must lie in [0, 1], got {weight}")
    if not H.dim == A.dim == B.dim:
        raise DimensionMismatchError(f"dimension mismatch: H={H.dim}, A={A.dim}, B={B.dim}")

    def f(M: SymMatrix) -> float:
        try:
            return trace_exp(H + matrix_log(M))
        except MatrixDomainError as e:
            raise PreconditionError(f"concavity check needs positive definite arguments: {e}")

    mixture = weight * A + (1.0 - weight) * B
    lhs = f(mixture)
    rhs = weight * f(A) + (1.0 - weight) * f(B)
    return CertificationReport(
        description=f"lieb-concavity d={H.dim} w={weight:.6g}",
        margin=lhs - rhs,
        tolerance=CERTIFICATION_TOLERANCE * max(1.0, abs(lhs)),
        details={"lhs": lhs, "rhs": rhs},
    )


def check_mgf_lemma(X_dist: Distribution, theta_grid: Sequence[float] = MGF_THETA_GRID) -> CertificationReport:
    """
    E e^{θX} ≼ exp(g(θ)·E X²) を θ の格子上で確認

    margin = min_θ λ_min(exp(g(θ) Σ p_i X_i²) − Σ p_i e^{θX_i})

    Raises:
        PreconditionError: 中心化または λ_max(X_i) ≤ 1 が満たされない場合
    """
    probabilities, matrices = _check_distribution(X_dist)
    _check_centered_bounded(probabilities, matrices)
    thetas = _check_thetas(theta_grid)

    values, vectors = eigh_batch(matrices)
    second = np.einsum("i,ijk->jk", probabilities, matrices @ matrices)
    second_values, second_vectors = eigh_batch(second)

    gaps = []
    for theta in thetas:
        g = g_function_value(theta)
        mgf = np.einsum("i,ijk->jk", probabilities, _spectral_apply(values, vectors, lambda v: np.exp(theta * v)))
        bound = _spectral_apply(second_values, second_vectors, lambda v: np.exp(g * v))
        gaps.append(bound - mgf)
    margins, _ = eigh_batch(np.stack(gaps), compute_vectors=False)
    per_theta = margins[:, 0]

    worst = int(np.argmin(per_theta))
    return CertificationReport(
        description=f"mgf d={matrices.shape[-1]} outcomes={len(X_dist)}",
        margin=float(per_theta[worst]),
        tolerance=CERTIFICATION_TOLERANCE,
        details={"theta": thetas[worst], "margins": [float(m) for m in per_theta]},
    )


def check_cgf_bound(X_dist: Distribution, theta_grid: Sequence[float] = MGF_THETA_GRID) -> CertificationReport:
    """
    log E e^{θX} ≼ g(θ)·E X² を θ の格子上で確認

    margin = min_θ λ_min(g(θ) Σ p_i X_i² − log Σ p_i e^{θX_i})
    """
    probabilities, matrices = _check_distribution(X_dist)
    _check_centered_bounded(probabilities, matrices)
    thetas = _check_thetas(theta_grid)

    values, vectors = eigh_batch(matrices)
    second = np.einsum("i,ijk->jk", probabilities, matrices @ matrices)

    gaps = []
    for theta in thetas:
        mgf = np.einsum("i,ijk->jk", probabilities, _spectral_apply(values, vectors, lambda v: np.exp(theta * v)))
        cgf = matrix_log(SymMatrix(mgf)).entries
        gaps.append(g_function_value(theta) * second - cgf)
    margins, _ = eigh_batch(np.stack(gaps), compute_vectors=False)
    per_theta = margins[:, 0]

    worst = int(np.argmin(per_theta))
    return CertificationReport(
        description=f"cgf d={matrices.shape[-1]} outcomes={len(X_dist)}",
        margin=float(per_theta[worst]),
        tolerance=CERTIFICATION_TOLERANCE,
        details={"theta": thetas[worst], "margins": [float(m) for m in per_theta]},
    )


def check_g_monotone(Y: SymMatrix, W: SymMatrix, t: float, w: float, theta: float) -> CertificationReport:
    """
    λ_max(Y) ≥ t かつ λ_max(W) ≤ w のとき tr exp(θY − g(θ)W) ≥ e^{θt − g(θ)w}

    Raises:
        PreconditionError: 条件 λ_max(Y) ≥ t, λ_max(W) ≤ w が成り立たない場合
    """
    if Y.dim != W.dim:
        raise DimensionMismatchError(f"dimension mismatch: Y={Y.dim}, W={W.dim}")
    if not theta > 0:
        raise PreconditionError(f"theta must be > 0, got {theta}")
    if lambda_max(Y) < t:
        raise PreconditionError(f"λ_max(Y) = {lambda_max(Y):.6g} is below t = {t}")
    if lambda_max(W) > w:
        raise PreconditionError(f"λ_max(W) = {lambda_max(W):.6g} exceeds w = {w}")
    if lambda_max(-W) > CENTERING_TOLERANCE:
        raise PreconditionError("W must be positive semidefinite")

    g = g_function_value(theta)
    value = trace_exp(theta * Y - g * W)
    floor = math.exp(theta * t - g * w)
    return CertificationReport(
        description=f"g-monotone d={Y.dim} θ={theta:g}",
        margin=value - floor,
        tolerance=CERTIFICATION_TOLERANCE * max(1.0, floor),
        details={"value": value, "floor": floor},
    )


def check_supermartingale_exact(kernel: FiniteKernel, theta: float, K: Optional[int] = None) -> CertificationReport:
    """
    S_k(θ) = tr exp(θY_k − g(θ)W_k) が正の優マルチンゲールであることを経路木の全列挙で確認

    各ノードで S_{k−1} − E_{k−1} S_k を厳密に計算し、その最小値を margin とする。
    一様上界 R > 1 のカーネルは X/R, W/R² に縮尺してから評価する。

    Raises:
        NodeBudgetExceededError: 経路木のノード数が上限を超える場合
        PreconditionError: カーネルが中心化されていない場合
    """
    K = kernel.horizon if K is None else K
    check_horizon(kernel, K)
    if not theta > 0:
        raise PreconditionError(f"theta must be > 0, got {theta}")
    if not kernel.centered:
        raise PreconditionError(f"kernel '{kernel.name}' is not centered")

    description = f"supermartingale {kernel.name} K={K} θ={theta:g}"
    if K == 0:
        return CertificationReport(description=description, margin=math.inf, tolerance=CERTIFICATION_TOLERANCE)

    budget = config.NODE_BUDGET
    nodes = count_tree_nodes(kernel, K)
    if nodes > budget:
        raise NodeBudgetExceededError(
            f"kernel '{kernel.name}' has {nodes} tree nodes up to K={K}, budget is {budget}",
            nodes=nodes, budget=budget,
        )

    scale = max(outcome_bound(kernel, K), 1.0)
    g = g_function_value(theta)
    d = kernel.dim

    # 現在の深さの全ノード（経路の多重度込み）
    Y = np.zeros((1, d, d))
    W = np.zeros((1, d, d))
    S = np.array([float(d)])
    states: List[Hashable] = [kernel.initial_state]
    margin = math.inf

    for k in range(1, K + 1):
        groups: Dict[Hashable, List[int]] = {}
        for index, state in enumerate(states):
            groups.setdefault(state, []).append(index)

        next_Y, next_W, next_S, next_states = [], [], [], []
        for state, members in groups.items():
            arrays = kernel.outcome_arrays(state, k)
            X = arrays.matrices / scale
            V = arrays.second_moment / (scale * scale)
            n = len(arrays.probabilities)

            child_Y = Y[members][:, None, :, :] + X[None, :, :, :]
            child_W = np.broadcast_to((W[members] + V)[:, None, :, :], child_Y.shape)
            child_S = trace_exp_array(theta * child_Y - g * child_W)
            expected = child_S @ arrays.probabilities
            margin = min(margin, float(np.min(S[members] - expected)))

            next_Y.append(child_Y.reshape(-1, d, d))
            next_W.append(np.array(child_W).reshape(-1, d, d))
            next_S.append(child_S.reshape(-1))
            next_states.extend(arrays.next_states[j] for _ in members for j in range(n))

        Y = np.concatenate(next_Y)
        W = np.concatenate(next_W)
        S = np.concatenate(next_S)
        states = next_states

    logger.debug(f"優マルチンゲール性の列挙完了: {description}, nodes={nodes}, margin={margin:.3e}")
    return CertificationReport(
        description=description,
        margin=margin,
        tolerance=CERTIFICATION_TOLERANCE,
        details={"nodes": nodes, "scale": scale},
    )


def check_h_inequality_grid(points: int = H_GRID_POINTS, upper: float = H_GRID_UPPER) -> CertificationReport:
    """h(u) ≥ (u²/2)/(1 + u/3) を [0, upper] の等間隔格子で確認"""
    grid = np.linspace(0.0, upper, points)
    checks = [h_lower_bound_check(float(u)) for u in grid]
    gaps = [c.lhs - c.rhs for c in checks]
    worst = int(np.argmin(gaps))
    return CertificationReport(
        description=f"h-inequality {points} points on [0, {upper:g}]",
        margin=float(gaps[worst]),
        tolerance=H_INEQUALITY_SLACK,
        details={"u": float(grid[worst])},
    )


class InstanceGenerator:
    """
    証明スイート用の乱数インスタンス生成器

    インスタンス i は乱数ストリーム (seed, i) から作るので、
    並列実行の順序に関係なく同じインスタンスになる。
    """

    MAX_DIM = 5
    MAX_OUTCOMES = 4
    LIEB_ENTRY_BOUND = 2.0

    def __init__(self, seed: int):
        self.seed = seed

    def _rng(self, index: int) -> np.random.Generator:
        return stream_generator(self.seed, index)

    @staticmethod
    def symmetric(rng: np.random.Generator, d: int, bound: float = 1.0) -> np.ndarray:
        """成分が一様分布 [−bound, bound] の対称行列"""
        upper = np.triu(rng.uniform(-bound, bound, size=(d, d)))
        return upper + np.triu(upper, 1).T

    @staticmethod
    def _probabilities(rng: np.random.Generator, n: int) -> np.ndarray:
        weights = rng.uniform(0.1, 1.0, size=n)
        return weights / np.sum(weights)

    def lieb_instance(self, index: int) -> Tuple[SymMatrix, List[Tuple[float, SymMatrix]]]:
        rng = self._rng(index)
        d = int(rng.integers(1, self.MAX_DIM + 1))
        n = int(rng.integers(1, self.MAX_OUTCOMES + 1))
        H = SymMatrix(self.symmetric(rng, d, self.LIEB_ENTRY_BOUND))
        probabilities = self._probabilities(rng, n)
        dist = [(float(p), SymMatrix(self.symmetric(rng, d, self.LIEB_ENTRY_BOUND))) for p in probabilities]
        return H, dist

    def concavity_instance(self, index: int) -> Tuple[SymMatrix, SymMatrix, SymMatrix, float]:
        rng = self._rng(index)
        d = int(rng.integers(1, self.MAX_DIM + 1))
        H = SymMatrix(self.symmetric(rng, d))

        def positive_definite() -> SymMatrix:
            G = rng.uniform(-1.0, 1.0, size=(d, d))
            return SymMatrix(G @ G.T / d + 0.1 * np.eye(d))

        A, B = positive_definite(), positive_definite()
        return H, A, B, float(rng.uniform(0.0, 1.0))

    def centered_instance(self, index: int) -> List[Tuple[float, SymMatrix]]:
        """Σ p_i X_i = 0 かつ max λ_max(X_i) ≤ 1 に正規化した分布"""
        rng = self._rng(index)
        d = int(rng.integers(1, self.MAX_DIM + 1))
        n = int(rng.integers(2, self.MAX_OUTCOMES + 1))
        probabilities = self._probabilities(rng, n)
        matrices = np.stack([self.symmetric(rng, d) for _ in range(n)])
        matrices -= np.einsum("i,ijk->jk", probabilities, matrices)

        top = float(np.max(eigh_batch(matrices, compute_vectors=False)[0][:, -1]))
        if top > 0:
            matrices *= rng.uniform(0.25, 1.0) / top
        return [(float(p), SymMatrix(X)) for p, X in zip(probabilities, matrices)]

    def g_monotone_instance(self, index: int) -> Tuple[SymMatrix, SymMatrix, float, float, float]:
        rng = self._rng(index)
        d = int(rng.integers(1, self.MAX_DIM + 1))
        Y = SymMatrix(self.symmetric(rng, d, 2.0))
        G = rng.uniform(-1.0, 1.0, size=(d, d))
        W = SymMatrix(G @ G.T)
        t = lambda_max(Y) - float(rng.uniform(0.0, 1.0))
        w = lambda_max(W) + float(rng.uniform(0.0, 1.0))
        theta = float(MGF_THETA_GRID[int(rng.integers(0, len(MGF_THETA_GRID)))])
        return Y, W, t, w, theta


RANDOMIZED_SUITES = ("lieb", "lieb-concavity", "mgf", "cgf", "g-monotone")
DETERMINISTIC_SUITES = ("supermartingale", "h-inequality")
SUITES = RANDOMIZED_SUITES + DETERMINISTIC_SUITES + ("all",)


def _instance_check(suite: str, generator: InstanceGenerator) -> Callable[[int], CertificationReport]:
    def run(index: int) -> CertificationReport:
        if suite == "lieb":
            report = check_lieb_corollary(*generator.lieb_instance(index))
        elif suite == "lieb-concavity":
            report = check_lieb_concavity(*generator.concavity_instance(index))
        elif suite == "mgf":
            report = check_mgf_lemma(generator.centered_instance(index))
        elif suite == "cgf":
            report = check_cgf_bound(generator.centered_instance(index))
        else:
            report = check_g_monotone(*generator.g_monotone_instance(index))
        return CertificationReport(
            description=f"{report.description} #{index}",
            margin=report.margin,
            tolerance=report.tolerance,
            details=report.details,
        )
    return run


def _supermartingale_reports() -> List[CertificationReport]:
    reports = []
    for name, K in SUPERMARTINGALE_KERNELS:
        kernel = builtin_kernel(name, K)
        for theta in SUPERMARTINGALE_THETAS:
            reports.append(check_supermartingale_exact(kernel, theta, K))
    return reports


def run_suite(name: str, instances: int, seed: Optional[int], workers: int = 0) -> SuiteReport:
    """
    証明スイートを実行

    Args:
        name: スイート名（SUITES のいずれか）
        instances: 乱数インスタンス数（決定的なスイートでは無視）
        seed: マスターシード（乱数スイートでは必須）

    Raises:
        ValueError: 未知のスイート名、負のインスタンス数、シード未指定
    """
    if name not in SUITES:
        raise ValueError(f"unknown suite '{name}' (choose from {', '.join(SUITES)})")
    if instances < 0:
        raise ValueError(f"instances must be ≥ 0, got {instances}")

    if name == "all":
        reports: List[CertificationReport] = []
        for suite in RANDOMIZED_SUITES + DETERMINISTIC_SUITES:
            reports.extend(run_suite(suite, instances, seed, workers).reports)
        return SuiteReport(suite=name, seed=seed, reports=tuple(reports))

    if name == "supermartingale":
        return SuiteReport(suite=name, seed=seed, reports=tuple(_supermartingale_reports()))
    if name == "h-inequality":
        return SuiteReport(suite=name, seed=seed, reports=(check_h_inequality_grid(),))

    if instances == 0:
        logger.warning(f"スイート '{name}' のインスタンス数が0のため、空虚に合格とします")
        return SuiteReport(suite=name, seed=seed, reports=())
    if seed is None:
        raise ValueError(f"suite '{name}' draws random instances and needs an explicit seed")

    workers = workers or config.worker_count()
    run = _instance_check(name, InstanceGenerator(seed))
    logger.info(f"スイート '{name}' を実行: instances={instances}, seed={seed}, workers={workers}")
    if workers == 1:
        reports = [run(index) for index in range(instances)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            reports = list(executor.map(run, range(instances)))

    suite = SuiteReport(suite=name, seed=seed, reports=tuple(reports))
    if suite.passed:
        logger.info(f"スイート '{name}' 合格: 最小マージン={suite.min_margin:.3e}")
    else:
        logger.error(f"スイート '{name}' で {len(suite.failures)} 件の違反: 最小マージン={suite.min_margin:.3e}")
    return suite
