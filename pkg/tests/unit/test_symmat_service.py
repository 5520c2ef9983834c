"""
対称行列サービスのユニットテスト

固有値分解、スペクトル写像、半正定値順序、自己共役拡大を確認します。
"""

import math

import numpy as np
import pytest

from src.models.matrices import MatrixValidationError, RectMatrix, SymMatrix
from src.services import symmat_service
from src.services.symmat_service import (
    DimensionMismatchError,
    JacobiEigensolver,
    MatrixDomainError,
    NumericalFailureError,
    dilation,
    eigh,
    eigh_batch,
    lambda_max,
    lambda_max_batch,
    lambda_min,
    matrix_exp,
    matrix_function,
    matrix_log,
    psd_order_leq,
    spectral_norm,
    trace_exp,
)

SWAP = SymMatrix([[0.0, 1.0], [1.0, 0.0]])


class TestSymMatrix:
    """SymMatrixモデルのテスト"""

    def test_symmetrizes_within_tolerance(self):
        """許容範囲内の非対称性は (M + Mᵀ)/2 に正規化される"""
        A = SymMatrix([[1.0, 2.0 + 1e-12], [2.0, 3.0]])
        assert A.entries[0, 1] == A.entries[1, 0]
        assert A.entries.flags.writeable is False

    def test_rejects_asymmetric(self):
        """非対称な入力は拒否される"""
        with pytest.raises(MatrixValidationError):
            SymMatrix([[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_non_finite_and_non_square(self):
        """非有限値と非正方行列は拒否される"""
        with pytest.raises(MatrixValidationError):
            SymMatrix([[math.nan]])
        with pytest.raises(MatrixValidationError):
            SymMatrix(np.zeros((2, 3)))

    def test_scalar_becomes_one_by_one(self):
        assert SymMatrix(2.5).dim == 1

    def test_arithmetic(self):
        """加減算とスカラー倍"""
        A = SymMatrix.identity(2)
        assert (A + A).allclose(2.0 * A)
        assert (A - A).allclose(SymMatrix.zeros(2))
        assert (-A).allclose(A * -1.0)
        assert SWAP.square().allclose(A)

    def test_rect_vector_is_column(self):
        B = RectMatrix([3.0, 4.0])
        assert (B.rows, B.cols) == (2, 1)


class TestEigh:
    """固有値分解のテスト"""

    def test_diagonal(self):
        """diag(3,1,2) → (1,2,3)"""
        decomposition = eigh(SymMatrix.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(decomposition.eigenvalues, [1.0, 2.0, 3.0], atol=1e-14)

    def test_zero_matrix(self):
        """零行列は固有値0で、再構成は厳密"""
        decomposition = eigh(SymMatrix.zeros(4))
        np.testing.assert_array_equal(decomposition.eigenvalues, np.zeros(4))
        np.testing.assert_array_equal(decomposition.reconstruct(), np.zeros((4, 4)))

    def test_two_by_two_swap(self):
        """[[0,1],[1,0]] → (−1, 1)"""
        np.testing.assert_allclose(eigh(SWAP).eigenvalues, [-1.0, 1.0], atol=1e-14)

    def test_random_matches_lapack(self, rng, test_data_factory):
        """乱数行列でLAPACKの固有値と一致し、固有ベクトルは直交"""
        for d in (1, 2, 3, 5, 8):
            A = test_data_factory.random_symmetric(rng, d, bound=3.0)
            decomposition = eigh(A)
            np.testing.assert_allclose(decomposition.eigenvalues, np.linalg.eigvalsh(A.entries), atol=1e-11)
            q = decomposition.eigenvectors
            np.testing.assert_allclose(q.T @ q, np.eye(d), atol=1e-11)
            np.testing.assert_allclose(decomposition.reconstruct(), A.entries, atol=1e-11)

    def test_off_diagonal_norm_of_diagonal_is_zero(self):
        """対角行列の非対角ノルムは厳密に0"""
        diagonal = np.diag([0.158, -2.064, 0.924, 1.858, -1.158, -0.28])
        assert JacobiEigensolver.off_diagonal_norm(diagonal[None, :, :])[0] == 0.0

    def test_off_diagonal_norm_ignores_diagonal_scale(self):
        stack = np.diag([1e8, -1e8, 3.0])[None, :, :].copy()
        stack[0, 0, 2] = stack[0, 2, 0] = 1e-6
        assert JacobiEigensolver.off_diagonal_norm(stack)[0] == pytest.approx(math.sqrt(2.0) * 1e-6, rel=1e-15)

    def test_many_random_matrices_converge(self):
        """次元3〜6の乱数行列200個が全て収束しLAPACKと一致"""
        rng = np.random.default_rng(0)
        for index in range(200):
            d = 3 + index % 4
            raw = rng.standard_normal((d, d))
            A = SymMatrix((raw + raw.T) / 2.0)
            decomposition = eigh(A)
            expected = np.linalg.eigvalsh(A.entries)
            np.testing.assert_allclose(decomposition.eigenvalues, expected, atol=1e-10)
            np.testing.assert_allclose(decomposition.reconstruct(), A.entries, atol=1e-10)

    def test_batch_shape(self, rng):
        """スタック入力は形状を保つ"""
        stack = rng.uniform(-1, 1, size=(3, 4, 2, 2))
        stack = stack + np.swapaxes(stack, -1, -2)
        values, vectors = eigh_batch(stack)
        assert values.shape == (3, 4, 2)
        assert vectors.shape == (3, 4, 2, 2)
        np.testing.assert_allclose(values, np.linalg.eigvalsh(stack), atol=1e-12)
        np.testing.assert_allclose(lambda_max_batch(stack), np.linalg.eigvalsh(stack)[..., -1], atol=1e-12)

    def test_non_square_stack(self):
        with pytest.raises(DimensionMismatchError):
            eigh_batch(np.zeros((2, 3)))

    def test_sweep_cap_raises_numerical_failure(self, mocker):
        """反復上限に達すると次元付きの数値エラーになる"""
        mocker.patch.object(JacobiEigensolver, "MAX_SWEEPS", 0)
        with pytest.raises(NumericalFailureError) as excinfo:
            eigh(SWAP)
        assert excinfo.value.dimension == 2


class TestSpectralFunctions:
    """行列指数・対数のテスト"""

    def test_exp_of_zero(self):
        assert matrix_exp(SymMatrix.zeros(3)).allclose(SymMatrix.identity(3))

    def test_exp_diagonal(self):
        """diag(log 2, 0) → diag(2, 1)"""
        assert matrix_exp(SymMatrix.diag([math.log(2.0), 0.0])).allclose(SymMatrix.diag([2.0, 1.0]), atol=1e-14)

    def test_exp_swap(self):
        """[[0,1],[1,0]] → [[cosh 1, sinh 1],[sinh 1, cosh 1]]"""
        expected = SymMatrix([[math.cosh(1.0), math.sinh(1.0)], [math.sinh(1.0), math.cosh(1.0)]])
        assert matrix_exp(SWAP).allclose(expected, atol=1e-13)

    def test_log_identity(self):
        assert matrix_log(SymMatrix.identity(5)).allclose(SymMatrix.zeros(5), atol=1e-15)

    def test_log_diagonal(self):
        """diag(e, e²) → diag(1, 2)"""
        A = SymMatrix.diag([math.e, math.e ** 2])
        assert matrix_log(A).allclose(SymMatrix.diag([1.0, 2.0]), atol=1e-13)

    @pytest.mark.parametrize("matrix", [
        SymMatrix.diag([1.0, 0.0]),
        SymMatrix.diag([1.0, -1.0]),
        SWAP,
    ])
    def test_log_rejects_non_positive_definite(self, matrix):
        with pytest.raises(MatrixDomainError, match="matrix not positive definite"):
            matrix_log(matrix)

    def test_exp_log_inverse(self, rng, test_data_factory):
        """log(exp(A)) = A"""
        A = test_data_factory.random_symmetric(rng, 4)
        assert matrix_log(matrix_exp(A)).allclose(A, atol=1e-11)

    def test_matrix_function_square(self, rng, test_data_factory):
        A = test_data_factory.random_symmetric(rng, 3)
        assert matrix_function(A, np.square).allclose(A.square(), atol=1e-12)


class TestEigenvalueExtremes:
    """λ_max, λ_min, スペクトルノルム, 自己共役拡大のテスト"""

    def test_lambda_max_examples(self):
        assert lambda_max(SymMatrix.diag([-5.0, -1.0])) == pytest.approx(-1.0)
        assert lambda_max(SWAP) == pytest.approx(1.0)
        assert lambda_max(SymMatrix.zeros(3)) == 0.0
        assert lambda_min(SWAP) == pytest.approx(-1.0)

    @pytest.mark.parametrize("entries, expected", [
        ([[-2.0]], 2.0),
        ([[2.0, 0.0], [0.0, -3.0]], 3.0),
        ([3.0, 4.0], 5.0),
    ])
    def test_spectral_norm(self, entries, expected):
        assert spectral_norm(RectMatrix(entries)) == pytest.approx(expected, rel=1e-12)

    def test_dilation_examples(self):
        assert dilation(RectMatrix([[1.0]])).allclose(SWAP)
        assert dilation(RectMatrix([[0.0]])).allclose(SymMatrix.zeros(2))
        row = dilation(RectMatrix([[1.0, 1.0]]))
        assert row.dim == 3
        assert lambda_max(row) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_dilation_matches_singular_value(self, rng, test_data_factory):
        """λ_max(dilation(B)) = √λ_max(BᵀB)"""
        for rows, cols in [(1, 1), (2, 3), (4, 2), (6, 6)]:
            B = test_data_factory.random_rect(rng, rows, cols)
            expected = math.sqrt(np.linalg.eigvalsh(B.entries.T @ B.entries)[-1])
            assert lambda_max(dilation(B)) == pytest.approx(expected, abs=1e-9)

    def test_dilation_on_two_hundred_random_matrices(self, rng, test_data_factory):
        """d1, d2 ≤ 6 の長方形行列200個で λ_max(dilation(B)) = √λ_max(BᵀB)"""
        for _ in range(200):
            rows, cols = (int(n) for n in rng.integers(1, 7, size=2))
            B = test_data_factory.random_rect(rng, rows, cols)
            expected = math.sqrt(max(np.linalg.eigvalsh(B.entries.T @ B.entries)[-1], 0.0))
            assert spectral_norm(B) == pytest.approx(expected, abs=1e-9)


class TestPsdOrder:
    """半正定値順序のテスト"""

    def test_zero_below_identity(self):
        ok, margin = psd_order_leq(SymMatrix.zeros(2), SymMatrix.identity(2), tol=0.0)
        assert ok is True
        assert margin == pytest.approx(1.0)

    def test_identity_not_below_zero(self):
        ok, margin = psd_order_leq(SymMatrix.identity(2), SymMatrix.zeros(2))
        assert ok is False
        assert margin == pytest.approx(-1.0)

    def test_boundary_case(self):
        """I − [[0,1],[1,0]] の固有値は 0 と 2"""
        ok, margin = psd_order_leq(SWAP, SymMatrix.identity(2))
        assert ok is True
        assert margin == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            psd_order_leq(SymMatrix.zeros(2), SymMatrix.zeros(3))


class TestTraceExp:
    """tr exp のテスト"""

    def test_zero_gives_dimension(self):
        assert trace_exp(SymMatrix.zeros(6)) == pytest.approx(6.0)

    def test_diagonal(self):
        assert trace_exp(SymMatrix.diag([0.0, math.log(3.0)])) == pytest.approx(4.0, rel=1e-14)

    def test_swap(self):
        assert trace_exp(SWAP) == pytest.approx(math.e + 1.0 / math.e, rel=1e-14)

    def test_large_shift_stays_finite(self):
        """シフト形式なので大きな固有値でもオーバーフローしない範囲で正確"""
        value = trace_exp(SymMatrix.diag([700.0, 699.0]))
        assert value == pytest.approx(math.exp(700.0) * (1.0 + math.exp(-1.0)), rel=1e-12)

    def test_overflow_is_infinite(self):
        assert math.isinf(trace_exp(SymMatrix.diag([800.0, 0.0])))
