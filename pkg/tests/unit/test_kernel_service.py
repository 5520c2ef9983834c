"""
有限カーネルサービスのユニットテスト
"""

import math

import numpy as np
import pytest

from src.models.martingale import Outcome, TransitionTable
from src.models.matrices import RectMatrix, SymMatrix
from src.services.kernel_service import (
    BUILTIN_KERNELS,
    HorizonExceededError,
    KernelValidationError,
    UnreachableStateError,
    builtin_kernel,
    count_tree_nodes,
    exact_conditional_second_moment,
    kernel_rademacher_series,
    kernel_rectangular_rademacher,
    kernel_state_dependent_walk,
    list_builtin_kernels,
    outcome_bound,
)
from src.services.symmat_service import DimensionMismatchError


class TestRademacherSeries:
    """Rademacher級数カーネル"""

    def test_second_moment_is_square(self):
        """E(X_k²) = A_k²（符号に依存しない）"""
        A = SymMatrix([[1.0, 2.0], [2.0, 0.0]])
        kernel = kernel_rademacher_series([A])
        V = exact_conditional_second_moment(kernel, None, 1)
        assert V.allclose(A.square(), atol=1e-14)

    def test_zero_coefficient(self):
        kernel = kernel_rademacher_series([SymMatrix.zeros(2)])
        assert exact_conditional_second_moment(kernel, None, 1).allclose(SymMatrix.zeros(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kernel_rademacher_series([SymMatrix.zeros(2), SymMatrix.zeros(3)])

    def test_empty_series_needs_dimension(self):
        with pytest.raises(KernelValidationError):
            kernel_rademacher_series([])
        assert kernel_rademacher_series([], dim=3).horizon == 0

    def test_step_outside_horizon_is_unreachable(self):
        kernel = kernel_rademacher_series([SymMatrix([[1.0]])] * 2)
        with pytest.raises(UnreachableStateError):
            exact_conditional_second_moment(kernel, None, 3)

    def test_outcome_arrays_are_cached(self):
        kernel = kernel_rademacher_series([SymMatrix([[1.0]])] * 2)
        assert kernel.outcome_arrays(None, 1) is kernel.outcome_arrays(None, 1)


class TestStateDependentWalk:
    """遷移表によるカーネル"""

    def test_valid_table(self, test_data_factory):
        kernel = kernel_state_dependent_walk(test_data_factory.two_state_table())
        assert kernel.dim == 1
        assert exact_conditional_second_moment(kernel, "a", 1).allclose(SymMatrix([[1.0]]))
        assert exact_conditional_second_moment(kernel, "b", 2).allclose(SymMatrix([[0.25]]))

    def test_probability_sum_violation(self):
        """確率の和が 0.9 の行は拒否される"""
        table = TransitionTable(
            dim=1, horizon=2, initial_state="s",
            states={"s": [Outcome(0.5, SymMatrix([[1.0]]), "s"), Outcome(0.4, SymMatrix([[-1.0]]), "s")]},
        )
        with pytest.raises(KernelValidationError, match="sum"):
            kernel_state_dependent_walk(table)

    def test_centering_violation(self):
        table = TransitionTable(
            dim=1, horizon=2, initial_state="s",
            states={"s": [Outcome(0.5, SymMatrix([[1.0]]), "s"), Outcome(0.5, SymMatrix([[0.0]]), "s")]},
        )
        with pytest.raises(KernelValidationError, match="centered"):
            kernel_state_dependent_walk(table)

    def test_uncentered_flag_allows_drift(self, test_data_factory):
        kernel = kernel_state_dependent_walk(test_data_factory.two_state_table(centered=False))
        assert kernel.centered is False

    def test_undeclared_next_state(self):
        table = TransitionTable(
            dim=1, horizon=2, initial_state="s",
            states={"s": [Outcome(0.5, SymMatrix([[1.0]]), "s"), Outcome(0.5, SymMatrix([[-1.0]]), "t")]},
        )
        with pytest.raises(KernelValidationError, match="undeclared"):
            kernel_state_dependent_walk(table)

    def test_dimension_mismatch(self):
        table = TransitionTable(
            dim=2, horizon=1, initial_state="s",
            states={"s": [Outcome(0.5, SymMatrix([[1.0]]), "s"), Outcome(0.5, SymMatrix([[-1.0]]), "s")]},
        )
        with pytest.raises(KernelValidationError, match="dimension"):
            kernel_state_dependent_walk(table)

    def test_unreachable_node(self):
        """horizon 1 で状態 b は k=2 に存在しない"""
        table = TransitionTable(
            dim=1, horizon=1, initial_state="a",
            states={
                "a": [Outcome(0.5, SymMatrix([[1.0]]), "a"), Outcome(0.5, SymMatrix([[-1.0]]), "a")],
                "b": [Outcome(1.0, SymMatrix([[0.0]]), "b")],
            },
        )
        kernel = kernel_state_dependent_walk(table)
        with pytest.raises(UnreachableStateError):
            exact_conditional_second_moment(kernel, "b", 1)

    def test_reachable_nodes(self, test_data_factory):
        kernel = kernel_state_dependent_walk(test_data_factory.two_state_table(horizon=3))
        nodes = kernel.reachable_nodes()
        assert ("a", 1) in nodes
        assert ("b", 1) not in nodes
        assert {("a", 2), ("b", 2), ("a", 3), ("b", 3)} <= nodes

    def test_reachable_nodes_beyond_horizon(self, test_data_factory):
        kernel = kernel_state_dependent_walk(test_data_factory.two_state_table(horizon=2))
        with pytest.raises(HorizonExceededError):
            kernel.reachable_nodes(5)


class TestRectangular:
    """長方形Rademacher級数（自己共役拡大）"""

    def test_dimension_is_sum(self):
        kernel = kernel_rectangular_rademacher([RectMatrix(np.ones((2, 3)))])
        assert kernel.dim == 5
        assert (kernel.rows, kernel.cols) == (2, 3)

    def test_second_moment_is_block_diagonal(self):
        """拡大の二次モーメントは blockdiag(BBᵀ, BᵀB)"""
        B = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]])
        kernel = kernel_rectangular_rademacher([RectMatrix(B)])
        V = exact_conditional_second_moment(kernel, None, 1).entries
        np.testing.assert_allclose(V[:2, :2], B @ B.T, atol=1e-14)
        np.testing.assert_allclose(V[2:, 2:], B.T @ B, atol=1e-14)
        np.testing.assert_allclose(V[:2, 2:], 0.0, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kernel_rectangular_rademacher([RectMatrix(np.ones((2, 3))), RectMatrix(np.ones((3, 2)))])


class TestBuiltins:
    """組み込みカーネル"""

    def test_list(self):
        assert list_builtin_kernels() == list(BUILTIN_KERNELS)

    @pytest.mark.parametrize("name, dim", [("walk1d", 1), ("rademacher2d", 2), ("statewalk", 1), ("rectangular", 5)])
    def test_builtin_dimensions_and_radius(self, name, dim):
        kernel = builtin_kernel(name, 4)
        assert kernel.dim == dim
        assert kernel.horizon == 4
        assert outcome_bound(kernel) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("name", BUILTIN_KERNELS)
    def test_zero_horizon(self, name):
        kernel = builtin_kernel(name, 0)
        assert kernel.horizon == 0
        assert outcome_bound(kernel) == 0.0

    def test_unknown(self):
        with pytest.raises(KernelValidationError):
            builtin_kernel("nope", 3)

    def test_tree_node_count(self):
        """2分岐の木は 2^(K+1) − 1 ノード"""
        assert count_tree_nodes(builtin_kernel("walk1d", 6), 6) == 2 ** 7 - 1
        assert count_tree_nodes(builtin_kernel("statewalk", 8), 8) == 2 ** 9 - 1
        assert count_tree_nodes(builtin_kernel("walk1d", 3), 0) == 1

    def test_statewalk_second_moment_is_random(self):
        kernel = builtin_kernel("statewalk", 3)
        full = exact_conditional_second_moment(kernel, "full", 2).entries[0, 0]
        half = exact_conditional_second_moment(kernel, "half", 2).entries[0, 0]
        assert (full, half) == (1.0, 0.25)
        assert math.isclose(outcome_bound(kernel), 1.0)
