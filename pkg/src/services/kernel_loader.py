"""
カーネル仕様ファイルの読み込み

形式は docs/kernel-file-format.md を参照。確率は10進数または有理数の文字列
（"0.25", "1/3"）で記述し、読み込み時に Fraction で厳密に再検証する。
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..models.martingale import Outcome, TransitionTable
from ..models.matrices import MatrixValidationError, SymMatrix
from .kernel_service import (
    PROBABILITY_TOLERANCE,
    FiniteKernel,
    KernelError,
    KernelValidationError,
    kernel_rademacher_series,
    kernel_state_dependent_walk,
)

logger = logging.getLogger(__name__)


class KernelParseError(KernelError, ValueError):
    """カーネル仕様ファイルの構文・スキーマエラー"""
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.source = source

    def __str__(self) -> str:
        location = self.source or "<kernel>"
        if self.line is not None:
            location += f":{self.line}:{self.column}"
        return f"{location}: {self.args[0]}"


def _parse_probability(raw: Any, where: str) -> Fraction:
    if isinstance(raw, bool):
        raise KernelParseError(f"probability at {where} must be a decimal or rational string")
    try:
        if isinstance(raw, str):
            value = Fraction(raw.strip())
        elif isinstance(raw, (int, float)):
            value = Fraction(repr(raw))
        else:
            raise ValueError(raw)
    except (ValueError, ZeroDivisionError):
        raise KernelParseError(f"invalid probability {raw!r} at {where}")
    if value <= 0:
        raise KernelValidationError(f"probabilities must be > 0 at {where}, got {raw}")
    return value


def _parse_matrix(raw: Any, dim: int, where: str) -> SymMatrix:
    try:
        array = np.array(raw, dtype=np.float64)
    except (TypeError, ValueError):
        raise KernelParseError(f"matrix entries at {where} must be numbers")
    if array.ndim == 1:
        if array.size != dim * dim:
            raise KernelParseError(f"matrix at {where} needs {dim * dim} row-major entries, got {array.size}")
        array = array.reshape(dim, dim)
    if array.shape != (dim, dim):
        raise KernelParseError(f"matrix at {where} must be {dim}x{dim}, got shape {array.shape}")
    try:
        return SymMatrix(array)
    except MatrixValidationError as e:
        raise KernelValidationError(f"invalid matrix at {where}: {e}")


def _require(document: Dict[str, Any], key: str, kind: type) -> Any:
    if key not in document:
        raise KernelParseError(f"missing required key '{key}'")
    value = document[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise KernelParseError(f"'{key}' must be an integer")
    if kind is not int and not isinstance(value, kind):
        raise KernelParseError(f"'{key}' must be of type {kind.__name__}")
    return value


def _state_label(raw: Any, where: str) -> str:
    if not isinstance(raw, str):
        raise KernelParseError(f"state label at {where} must be a string, got {raw!r}")
    return raw


def _build_table(document: Dict[str, Any], dim: int, horizon: int, name: str) -> TransitionTable:
    states_raw = _require(document, "states", dict)
    if not states_raw:
        raise KernelParseError("'states' must declare at least one state")
    initial_state = _state_label(document.get("initial_state", next(iter(states_raw))), "initial_state")

    states: Dict[str, List[Outcome]] = {}
    for state, rows in states_raw.items():
        if not isinstance(rows, list) or not rows:
            raise KernelParseError(f"state '{state}' must list at least one outcome")
        probabilities: List[Fraction] = []
        outcomes: List[Outcome] = []
        for index, row in enumerate(rows):
            where = f"states.{state}[{index}]"
            if not isinstance(row, dict):
                raise KernelParseError(f"outcome {where} must be an object")
            probability = _parse_probability(row.get("p"), where)
            matrix = _parse_matrix(row.get("matrix"), dim, where)
            next_state = _state_label(row.get("next", state), f"{where}.next")
            probabilities.append(probability)
            outcomes.append(Outcome(float(probability), matrix, next_state))
        total = sum(probabilities, Fraction(0))
        if abs(total - 1) > Fraction(PROBABILITY_TOLERANCE):
            raise KernelValidationError(f"probabilities of state '{state}' sum to {float(total)!r}, not 1")
        states[state] = outcomes

    return TransitionTable(
        dim=dim,
        horizon=horizon,
        initial_state=initial_state,
        states=states,
        centered=bool(document.get("centered", True)),
        name=name,
    )


def parse_kernel_document(text: str, source: Optional[str] = None) -> FiniteKernel:
    """
    カーネル仕様（JSON文書）を解析してカーネルを構築

    Raises:
        KernelParseError: JSON構文エラー（行・列付き）またはスキーマエラー
        KernelValidationError: 確率の和、次元、中心化などの不変条件違反
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise KernelParseError(e.msg, line=e.lineno, column=e.colno, source=source)

    try:
        if not isinstance(document, dict):
            raise KernelParseError("top level must be a JSON object")
        dim = _require(document, "dim", int)
        horizon = _require(document, "horizon", int)
        if dim < 1 or horizon < 0:
            raise KernelParseError(f"'dim' must be ≥ 1 and 'horizon' ≥ 0, got dim={dim}, horizon={horizon}")
        name = str(document.get("name", Path(source).stem if source else "kernel"))
        kind = document.get("kind", "table")

        if kind == "rademacher":
            coeffs_raw = _require(document, "coefficients", list)
            coeffs = [_parse_matrix(c, dim, f"coefficients[{j}]") for j, c in enumerate(coeffs_raw)]
            if len(coeffs) != horizon:
                raise KernelParseError(f"'coefficients' lists {len(coeffs)} matrices but horizon is {horizon}")
            kernel: FiniteKernel = kernel_rademacher_series(coeffs, dim=dim, name=name)
        elif kind == "table":
            kernel = kernel_state_dependent_walk(_build_table(document, dim, horizon, name))
        else:
            raise KernelParseError(f"unknown kernel kind '{kind}' (expected 'table' or 'rademacher')")
    except KernelParseError as e:
        if e.source is None:
            e.source = source
        raise

    logger.info(f"カーネル '{kernel.name}' を読み込みました (d={kernel.dim}, K={kernel.horizon})")
    return kernel


def load_kernel_file(path: Union[str, Path]) -> FiniteKernel:
    """カーネル仕様ファイルを読み込む"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise KernelParseError(f"cannot read kernel file: {e}", source=str(path))
    return parse_kernel_document(text, source=str(path))
