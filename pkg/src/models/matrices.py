"""対称行列・長方形行列のモデル定義"""

from dataclasses import dataclass
from typing import Any, Iterable, List

import numpy as np


# 構築時の非対称性許容（最大成分に対する相対値）
SYMMETRY_TOLERANCE = 1e-8


class MatrixValidationError(ValueError):
    """行列の構築時不変条件の違反"""
    pass


def _as_float_array(values: Any, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(array)):
        raise MatrixValidationError(f"{name} entries must be finite")
    return array


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """実対称行列（不変）

    構築時に (M + Mᵀ)/2 を保存する。非対称性が 1e−8·‖M‖_max を超える入力は拒否する。
    """
    entries: np.ndarray

    def __post_init__(self):
        array = _as_float_array(self.entries, "SymMatrix")
        if array.ndim == 0:
            array = array.reshape(1, 1)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 1:
            raise MatrixValidationError(f"SymMatrix requires a non-empty square matrix, got shape {array.shape}")

        scale = float(np.max(np.abs(array)))
        asymmetry = float(np.max(np.abs(array - array.T)))
        if asymmetry > SYMMETRY_TOLERANCE * scale:
            raise MatrixValidationError(
                f"matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds {SYMMETRY_TOLERANCE:g}·‖M‖_max"
            )

        canonical = (array + array.T) / 2.0
        canonical.setflags(write=False)
        object.__setattr__(self, "entries", canonical)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def max_abs(self) -> float:
        """‖A‖_max（最大成分の絶対値）"""
        return float(np.max(np.abs(self.entries)))

    def to_array(self) -> np.ndarray:
        """書き込み可能なコピーを返す"""
        return np.array(self.entries, copy=True)

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries + other.entries)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return SymMatrix(self.entries - other.entries)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self.entries)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(float(scalar) * self.entries)

    __rmul__ = __mul__

    def square(self) -> "SymMatrix":
        """A²"""
        return SymMatrix(self.entries @ self.entries)

    def allclose(self, other: "SymMatrix", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def to_list(self) -> List[List[float]]:
        return self.entries.tolist()

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim}, entries={self.entries.tolist()})"

    @classmethod
    def zeros(cls, dim: int) -> "SymMatrix":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values: Iterable[float]) -> "SymMatrix":
        return cls(np.diag(np.asarray(list(values), dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class RectMatrix:
    """実長方形行列 d1×d2（不変）"""
    entries: np.ndarray

    def __post_init__(self):
        array = _as_float_array(self.entries, "RectMatrix")
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            # 1次元入力は列ベクトルとして扱う
            array = array.reshape(-1, 1)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise MatrixValidationError(f"RectMatrix requires a non-empty 2-D array, got shape {array.shape}")
        array.setflags(write=False)
        object.__setattr__(self, "entries", array)

    @property
    def rows(self) -> int:
        return int(self.entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self.entries.shape[1])

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, copy=True)

    def __repr__(self) -> str:
        return f"RectMatrix({self.rows}x{self.cols}, entries={self.entries.tolist()})"


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """固有値分解 A = Q Λ Qᵀ（固有値は昇順、固有ベクトルは列）"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=np.float64, copy=True)
        vectors = np.array(self.eigenvectors, dtype=np.float64, copy=True)
        values.setflags(write=False)
        vectors.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def reconstruct(self) -> np.ndarray:
        """Q Λ Qᵀ"""
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T
