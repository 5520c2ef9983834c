"""検証結果のモデル定義（Monte Carlo推定と不等式の数値証明）"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple


class ReportInvariantError(ValueError):
    """検証結果モデルの不変条件違反"""
    pass


@dataclass(frozen=True)
class TailEstimate:
    """
    P{∃k : λ_max(Y_k) ≥ t かつ λ_max(W_k) ≤ σ²} のMonte Carlo推定

    信頼区間はClopper-Pearsonの正確な二項区間。
    """
    trials: int
    hits: int
    ci_low: float
    ci_high: float
    t: float
    sigma2: float
    K: int
    seed: int
    confidence: float = 0.99
    kernel: str = ""
    R: Optional[float] = None
    d: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ReportInvariantError(f"trials must be ≥ 1, got {self.trials}")
        if not 0 <= self.hits <= self.trials:
            raise ReportInvariantError(f"hits must lie in [0, {self.trials}], got {self.hits}")
        if not 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0:
            raise ReportInvariantError(
                f"interval [{self.ci_low}, {self.ci_high}] does not bracket p_hat={self.p_hat}"
            )

    @property
    def p_hat(self) -> float:
        return self.hits / self.trials

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kernel": self.kernel,
            "K": self.K,
            "t": self.t,
            "sigma2": self.sigma2,
            "trials": self.trials,
            "hits": self.hits,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "confidence": self.confidence,
            "seed": self.seed,
            "R": self.R,
            "d": self.d,
        }


@dataclass(frozen=True)
class CertificationReport:
    """
    不等式の数値証明の結果

    margin は観測された最小の余裕（負なら違反の大きさ）。
    passed は margin ≥ −tolerance と常に一致する。
    """
    description: str
    margin: float
    tolerance: float
    passed: bool = field(init=False)
    details: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if math.isnan(self.margin):
            raise ReportInvariantError(f"certification margin is NaN for {self.description}")
        object.__setattr__(self, "passed", self.margin >= -self.tolerance)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "description": self.description,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class SweepRow:
    """上界と経験的推定を並べた1行"""
    t: float
    p_hat: float
    ci_low: float
    ci_high: float
    freedman: float
    bennett: float

    @property
    def ok(self) -> bool:
        """経験的区間の下端がどちらの上界（1で切り詰め）も超えない"""
        return self.ci_low <= min(1.0, self.freedman, self.bennett)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "freedman": self.freedman,
            "bennett": self.bennett,
            "ok": self.ok,
        }


@dataclass(frozen=True)
class SuiteReport:
    """証明スイートの集計"""
    suite: str
    seed: Optional[int]
    reports: Tuple[CertificationReport, ...]

    @property
    def instances(self) -> int:
        return len(self.reports)

    @property
    def failures(self) -> List[CertificationReport]:
        return [r for r in self.reports if not r.passed]

    @property
    def passed(self) -> bool:
        """全インスタンスが合格（0件なら空虚に合格）"""
        return not self.failures

    @property
    def min_margin(self) -> float:
        if not self.reports:
            return math.inf
        return min(r.margin for r in self.reports)

    def summary(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "instances": self.instances,
            "failures": len(self.failures),
            "min_margin": self.min_margin,
            "pass": self.passed,
        }
