"""
対称行列演算サービス

巡回Jacobi回転による固有値分解と、それに基づくスペクトル写像
（行列指数・行列対数）、半正定値順序の判定、スペクトルノルム、
長方形行列の自己共役拡大を提供する。

固有値ソルバーは (..., d, d) のスタックに対してベクトル化されており、
単一行列の eigh はその特殊ケース。
"""

import logging
import math
from typing import Callable, Optional, Tuple

import numpy as np

from ..models.matrices import EigenDecomposition, RectMatrix, SymMatrix

logger = logging.getLogger(__name__)


class SymmetricMatrixError(Exception):
    """対称行列演算のエラー"""
    pass


class NumericalFailureError(SymmetricMatrixError):
    """固有値ソルバーの非収束"""
    def __init__(self, message: str, dimension: Optional[int] = None, sweeps: Optional[int] = None):
        super().__init__(message)
        self.dimension = dimension
        self.sweeps = sweeps


class MatrixDomainError(SymmetricMatrixError, ValueError):
    """定義域外の入力（正定値でない行列の対数など）"""
    pass


class DimensionMismatchError(SymmetricMatrixError, ValueError):
    """次元の不一致"""
    pass


# 行列対数の正定値ゲート
LOG_PD_THRESHOLD = 1e-12

# 半正定値順序のデフォルト許容誤差（スケール相対）
PSD_RELATIVE_TOLERANCE = 1e-9


class JacobiEigensolver:
    """ベクトル化した巡回Jacobi法の固有値ソルバー"""

    RELATIVE_THRESHOLD = 1e-13  # 非対角Frobeniusノルム / ‖A‖_F
    MAX_SWEEPS = 100

    @staticmethod
    def off_diagonal_norm(stack: np.ndarray) -> np.ndarray:
        """非対角成分のFrobeniusノルム（対角を0にしてから直接計算する）"""
        off = np.array(stack, dtype=np.float64, copy=True)
        index = np.arange(off.shape[-1])
        off[..., index, index] = 0.0
        return np.sqrt(np.sum(off * off, axis=(-2, -1)))

    @classmethod
    def decompose(cls, stack: np.ndarray, compute_vectors: bool = True) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        対称行列スタックの固有値分解（巡回Jacobi法）

        Args:
            stack: 形状 (..., d, d) の対称行列の配列
            compute_vectors: 固有ベクトルも計算するかどうか

        Returns:
            (固有値 (..., d) 昇順, 固有ベクトル (..., d, d) または None)

        Raises:
            NumericalFailureError: MAX_SWEEPS 回で収束しなかった場合
        """
        a = np.array(stack, dtype=np.float64, copy=True)
        if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
            raise DimensionMismatchError(f"expected a stack of square matrices, got shape {a.shape}")

        batch_shape = a.shape[:-2]
        d = a.shape[-1]
        a = a.reshape((-1, d, d))
        a = (a + np.swapaxes(a, -1, -2)) / 2.0
        n = a.shape[0]

        v = np.broadcast_to(np.eye(d), (n, d, d)).copy() if compute_vectors else None
        threshold = cls.RELATIVE_THRESHOLD * np.sqrt(np.sum(a * a, axis=(-2, -1)))

        sweeps = 0
        while True:
            off = cls.off_diagonal_norm(a)
            if np.all(off <= threshold):
                break
            if sweeps >= cls.MAX_SWEEPS:
                raise NumericalFailureError(
                    f"Jacobi eigensolver did not converge after {cls.MAX_SWEEPS} sweeps (dimension {d})",
                    dimension=d,
                    sweeps=sweeps,
                )
            sweeps += 1

            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = a[:, p, q]
                    active = apq != 0.0
                    if not np.any(active):
                        continue

                    safe_apq = np.where(active, apq, 1.0)
                    tau = (a[:, q, q] - a[:, p, p]) / (2.0 * safe_apq)
                    sign = np.where(tau >= 0.0, 1.0, -1.0)
                    t = np.where(active, sign / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c

                    # A ← A J（列 p, q）
                    col_p = a[:, :, p].copy()
                    col_q = a[:, :, q]
                    a[:, :, p] = c[:, None] * col_p - s[:, None] * col_q
                    a[:, :, q] = s[:, None] * col_p + c[:, None] * col_q

                    # A ← Jᵀ A（行 p, q）
                    row_p = a[:, p, :].copy()
                    row_q = a[:, q, :]
                    a[:, p, :] = c[:, None] * row_p - s[:, None] * row_q
                    a[:, q, :] = s[:, None] * row_p + c[:, None] * row_q

                    a[:, p, q] = np.where(active, 0.0, a[:, p, q])
                    a[:, q, p] = np.where(active, 0.0, a[:, q, p])

                    if v is not None:
                        vec_p = v[:, :, p].copy()
                        vec_q = v[:, :, q]
                        v[:, :, p] = c[:, None] * vec_p - s[:, None] * vec_q
                        v[:, :, q] = s[:, None] * vec_p + c[:, None] * vec_q

        eigenvalues = np.diagonal(a, axis1=-2, axis2=-1).copy()
        order = np.argsort(eigenvalues, axis=-1, kind="stable")
        eigenvalues = np.take_along_axis(eigenvalues, order, axis=-1)
        if v is not None:
            v = np.take_along_axis(v, order[:, None, :], axis=-1)
            v = v.reshape(batch_shape + (d, d))

        logger.debug(f"Jacobi固有値分解: バッチ={n}, 次元={d}, スイープ={sweeps}")
        return eigenvalues.reshape(batch_shape + (d,)), v


def eigh_batch(stack: np.ndarray, compute_vectors: bool = True) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """対称行列スタックの固有値分解（JacobiEigensolver.decompose の短縮形）"""
    return JacobiEigensolver.decompose(stack, compute_vectors)


def lambda_max_batch(stack: np.ndarray) -> np.ndarray:
    """スタック各要素の最大固有値"""
    values, _ = eigh_batch(stack, compute_vectors=False)
    return values[..., -1]


def eigh(A: SymMatrix) -> EigenDecomposition:
    """対称行列の固有値分解（固有値昇順、固有ベクトルは直交行列の列）"""
    values, vectors = eigh_batch(A.entries[None, :, :])
    return EigenDecomposition(eigenvalues=values[0], eigenvectors=vectors[0])


def matrix_function(A: SymMatrix, func: Callable[[np.ndarray], np.ndarray]) -> SymMatrix:
    """スペクトル写像 f(A) = Q f(Λ) Qᵀ"""
    decomposition = eigh(A)
    q = decomposition.eigenvectors
    return SymMatrix((q * func(decomposition.eigenvalues)) @ q.T)


def matrix_exp(A: SymMatrix) -> SymMatrix:
    """行列指数 exp(A)（結果は正定値）"""
    return matrix_function(A, np.exp)


def matrix_log(A: SymMatrix) -> SymMatrix:
    """
    行列対数 log(A)

    Raises:
        MatrixDomainError: λ_min(A) ≤ 1e−12·max(1, ‖A‖) の場合
    """
    decomposition = eigh(A)
    norm = max(abs(decomposition.lambda_min), abs(decomposition.lambda_max))
    gate = LOG_PD_THRESHOLD * max(1.0, norm)
    if decomposition.lambda_min <= gate:
        raise MatrixDomainError(
            f"matrix not positive definite: λ_min={decomposition.lambda_min:.6e} (threshold {gate:.1e})"
        )
    q = decomposition.eigenvectors
    return SymMatrix((q * np.log(decomposition.eigenvalues)) @ q.T)


def lambda_max(A: SymMatrix) -> float:
    """最大固有値（代数的に最大）"""
    return eigh(A).lambda_max


def lambda_min(A: SymMatrix) -> float:
    """最小固有値"""
    return eigh(A).lambda_min


def dilation(B: RectMatrix) -> SymMatrix:
    """自己共役拡大 [[0, B], [Bᵀ, 0]]（次元 d1 + d2）"""
    d1, d2 = B.rows, B.cols
    block = np.zeros((d1 + d2, d1 + d2))
    block[:d1, d1:] = B.entries
    block[d1:, :d1] = B.entries.T
    return SymMatrix(block)


def spectral_norm(B: RectMatrix) -> float:
    """スペクトルノルム（最大特異値）= λ_max(dilation(B))"""
    return lambda_max(dilation(B))


def default_psd_tolerance(A: SymMatrix, B: SymMatrix) -> float:
    """tol = 1e−9 · max(1, ‖A‖, ‖B‖)（スペクトルノルム）"""
    norm_a = float(np.max(np.abs(eigh_batch(A.entries, compute_vectors=False)[0])))
    norm_b = float(np.max(np.abs(eigh_batch(B.entries, compute_vectors=False)[0])))
    return PSD_RELATIVE_TOLERANCE * max(1.0, norm_a, norm_b)


def psd_order_leq(A: SymMatrix, B: SymMatrix, tol: Optional[float] = None) -> Tuple[bool, float]:
    """
    半正定値順序 A ≼ B の判定

    Returns:
        (判定結果, マージン λ_min(B − A))

    Raises:
        DimensionMismatchError: 次元が一致しない場合
    """
    if A.dim != B.dim:
        raise DimensionMismatchError(f"dimension mismatch: {A.dim} vs {B.dim}")
    if tol is None:
        tol = default_psd_tolerance(A, B)
    margin = lambda_min(B - A)
    return margin >= -tol, margin


def trace_exp_array(stack: np.ndarray) -> np.ndarray:
    """tr exp(A) をシフト形式 exp(λ_max)·Σ exp(λ_i − λ_max) で評価（スタック対応）"""
    values, _ = eigh_batch(stack, compute_vectors=False)
    top = values[..., -1]
    with np.errstate(over="ignore"):
        return np.exp(top) * np.sum(np.exp(values - top[..., None]), axis=-1)


def trace_exp(A: SymMatrix) -> float:
    """tr exp(A) = Σ exp(λ_i(A))（常に exp(λ_max(A)) 以上かつ正）"""
    value = float(trace_exp_array(A.entries))
    if math.isinf(value):
        logger.warning(f"tr exp がオーバーフローしました (λ_max={lambda_max(A):.3e})")
    return value
