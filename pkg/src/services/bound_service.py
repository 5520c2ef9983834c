"""
裾確率上界サービス

行列Freedman・Bennett型の閉形式上界、一般の g に対するマスター上界、
θ の最適化、および信頼水準からの閾値の逆算を提供する。

指数の符号について: 表示式は exp{−(−t²/2)/(σ² + Rt/3)} と書かれることがあるが、
これは正の指数になり確率の上界になり得ない。ここでは古典的なFreedman不等式と同じ
exp{−(t²/2)/(σ² + Rt/3)} を実装する。
"""

import logging
import math
from typing import Callable, List

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..models.bounds import BoundResult, CgfBoundFn, HInequalityCheck, TailQuery
from .simulation_service import g_function_value

logger = logging.getLogger(__name__)


class BoundError(Exception):
    """上界計算のエラー"""
    pass


class BoundDomainError(BoundError, ValueError):
    """定義域外の引数"""
    pass


class NoFiniteBoundError(BoundError):
    """探索区間全体で目的関数が有限にならない"""
    pass


class ThetaSearch:
    """log θ 上の θ 探索の設定"""

    BRACKET = (1e-8, 50.0)
    COARSE_POINTS = 64
    LOG_TOLERANCE = 1e-10

# exp のオーバーフロー境界
_MAX_EXPONENT = 709.0

# h(u) ≥ (u²/2)/(1+u/3) の判定に使う許容誤差
H_INEQUALITY_SLACK = 1e-12


def _scaled_exp(d: float, exponent: float) -> float:
    """d·exp(exponent)（オーバーフロー時は +∞）"""
    if exponent > _MAX_EXPONENT:
        return math.inf
    return d * math.exp(exponent)


def bennett_h(u: float) -> float:
    """Bennett関数 h(u) = (1+u)log(1+u) − u（u ≥ 0）"""
    if u < 0 or math.isnan(u):
        raise BoundDomainError(f"bennett_h requires u ≥ 0, got {u}")
    if math.isinf(u):
        return math.inf
    return (1.0 + u) * math.log1p(u) - u


def freedman_tail_bound(q: TailQuery) -> BoundResult:
    """行列Freedman上界 d·exp(−(t²/2)/(σ² + Rt/3))"""
    exponent = -(q.t * q.t / 2.0) / (q.sigma2 + q.R * q.t / 3.0)
    return BoundResult(value=_scaled_exp(q.d, exponent))


def bennett_tail_bound(q: TailQuery) -> BoundResult:
    """行列Bennett上界 d·exp(−(σ²/R²)·h(Rt/σ²))"""
    exponent = -(q.sigma2 / (q.R * q.R)) * bennett_h(q.R * q.t / q.sigma2)
    return BoundResult(value=_scaled_exp(q.d, exponent))


def scalar_freedman_bound(t: float, sigma2: float, R: float) -> BoundResult:
    """スカラーFreedman上界（d = 1 の場合）"""
    return freedman_tail_bound(TailQuery(t=t, sigma2=sigma2, R=R, d=1))


def rectangular_freedman_bound(t: float, sigma2: float, R: float, d1: int, d2: int) -> BoundResult:
    """長方形行列Freedman上界 (d1 + d2)·exp(−(t²/2)/(σ² + Rt/3))"""
    if int(d1) != d1 or int(d2) != d2 or d1 < 1 or d2 < 1:
        raise BoundDomainError(f"d1 and d2 must be positive integers, got {d1}, {d2}")
    return freedman_tail_bound(TailQuery(t=t, sigma2=sigma2, R=R, d=int(d1) + int(d2)))


def freedman_cgf(R: float = 1.0) -> CgfBoundFn:
    """
    一様上界 R に再スケールしたFreedmanのcgf上界

    g_R(θ) = (e^{Rθ} − Rθ − 1)/R²、閉形式の最小化子 θ* = log(1 + Rt/w)/R
    """
    if not (R > 0 and math.isfinite(R)):
        raise BoundDomainError(f"R must be positive and finite, got {R}")

    def g(theta: float) -> float:
        return g_function_value(R * theta) / (R * R)

    def argmin(t: float, w: float) -> float:
        return math.log1p(R * t / w) / R

    description = "e^θ − θ − 1" if R == 1.0 else f"(e^({R:g}θ) − {R:g}θ − 1)/{R:g}²"
    return CgfBoundFn(g=g, description=description, argmin=argmin)


def gaussian_cgf() -> CgfBoundFn:
    """サブガウス型のcgf上界 g(θ) = θ²/2"""
    return CgfBoundFn(
        g=lambda theta: theta * theta / 2.0,
        description="θ²/2",
        argmin=None,
    )


FREEDMAN_CGF = freedman_cgf(1.0)


def _objective_exponent(t: float, w: float, theta: float, g: CgfBoundFn) -> float:
    """−θt + g(θ)·w（g = +∞ なら +∞）"""
    g_value = g(theta)
    if math.isinf(g_value) and g_value > 0:
        return math.inf
    return -theta * t + g_value * w


def master_bound_at_theta(t: float, w: float, theta: float, g: CgfBoundFn, d: int) -> float:
    """
    マスター上界の目的関数 d·exp(−θt + g(θ)·w) を1点で評価

    g(θ) = +∞ の場合は自明な上界 d を返す。
    """
    if not theta > 0:
        raise BoundDomainError(f"theta must be > 0, got {theta}")
    if w < 0:
        raise BoundDomainError(f"w must be ≥ 0, got {w}")
    exponent = _objective_exponent(t, w, theta, g)
    if math.isinf(exponent) and exponent > 0:
        return float(d)
    return _scaled_exp(d, exponent)


def optimize_theta(t: float, w: float, g: CgfBoundFn, d: int) -> BoundResult:
    """
    d·inf_{θ>0} exp(−θt + g(θ)·w) を求める

    g が閉形式の最小化子を持つ場合はそれを使う。そうでなければ log θ 上の
    粗いグリッドで区間を定め、有界Brent法（黄金分割＋放物線補間）で精密化する。

    Raises:
        BoundDomainError: t < 0 または w ≤ 0
        NoFiniteBoundError: 全ての格子点で目的関数が NaN になる場合
    """
    if t < 0 or math.isnan(t):
        raise BoundDomainError(f"t must be ≥ 0, got {t}")
    if not w > 0:
        raise BoundDomainError(f"w must be > 0, got {w}")

    if t == 0:
        # θ* = log(1+0) = 0 は (0, ∞) の外。極限値 d を返す
        return BoundResult(value=float(d), theta_star=None)

    if g.argmin is not None:
        theta_star = g.argmin(t, w)
        value = master_bound_at_theta(t, w, theta_star, g, d)
        logger.debug(f"閉形式のθ*を使用: g={g.description}, θ*={theta_star:.12g}")
        return BoundResult(value=value, theta_star=theta_star)

    lo_bracket, hi_bracket = ThetaSearch.BRACKET
    log_grid = np.linspace(math.log(lo_bracket), math.log(hi_bracket), ThetaSearch.COARSE_POINTS)
    exponents: List[float] = [_objective_exponent(t, w, math.exp(x), g) for x in log_grid]
    finite = [i for i, e in enumerate(exponents) if math.isfinite(e)]

    if not finite:
        if all(math.isnan(e) for e in exponents):
            raise NoFiniteBoundError(f"no finite bound: objective is NaN on the whole bracket (g={g.description})")
        logger.warning(f"全ての格子点で g(θ) が +∞ のため自明な上界 d={d} を返します (g={g.description})")
        return BoundResult(value=float(d), theta_star=None)

    best_index = min(finite, key=lambda i: exponents[i])
    lo = log_grid[max(best_index - 1, 0)]
    hi = log_grid[min(best_index + 1, ThetaSearch.COARSE_POINTS - 1)]

    def refined(log_theta: float) -> float:
        exponent = _objective_exponent(t, w, math.exp(log_theta), g)
        return exponent if math.isfinite(exponent) else 1e300

    best_log_theta = float(log_grid[best_index])
    best_exponent = exponents[best_index]
    if hi > lo:
        result = minimize_scalar(refined, bounds=(lo, hi), method="bounded",
                                 options={"xatol": ThetaSearch.LOG_TOLERANCE})
        if result.fun < best_exponent:
            best_log_theta, best_exponent = float(result.x), float(result.fun)

    theta_star = math.exp(best_log_theta)
    return BoundResult(value=_scaled_exp(d, best_exponent), theta_star=theta_star)


def invert_freedman_for_t(delta: float, sigma2: float, R: float, d: int) -> float:
    """
    freedman_tail_bound = δ となる最小の t

    t²/2 = log(d/δ)(σ² + Rt/3) の正の根。δ ≥ d なら上界は既に自明なので 0。
    """
    if not (delta > 0 and math.isfinite(delta)):
        raise BoundDomainError(f"delta must be positive, got {delta}")
    TailQuery(t=0.0, sigma2=sigma2, R=R, d=d)
    if delta >= d:
        return 0.0
    level = math.log(d / delta)
    half_slope = level * R / 3.0
    return half_slope + math.sqrt(half_slope * half_slope + 2.0 * level * sigma2)


def invert_bennett_for_t(delta: float, sigma2: float, R: float, d: int) -> float:
    """bennett_tail_bound = δ となる t（単調性を使ったBrent法）"""
    if not (delta > 0 and math.isfinite(delta)):
        raise BoundDomainError(f"delta must be positive, got {delta}")
    TailQuery(t=0.0, sigma2=sigma2, R=R, d=d)
    if delta >= d:
        return 0.0
    target = math.log(d / delta)

    def gap(t: float) -> float:
        return (sigma2 / (R * R)) * bennett_h(R * t / sigma2) - target

    # Bennett ≤ Freedman なので、Freedmanの逆算値が上側の括弧になる
    upper = invert_freedman_for_t(delta, sigma2, R, d)
    if gap(upper) <= 0.0:
        return upper
    return float(brentq(gap, 0.0, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def h_lower_bound_check(u: float) -> HInequalityCheck:
    """h(u) ≥ (u²/2)/(1 + u/3) の数値確認"""
    lhs = bennett_h(u)
    rhs = (u * u / 2.0) / (1.0 + u / 3.0)
    return HInequalityCheck(lhs=lhs, rhs=rhs, ok=lhs >= rhs - H_INEQUALITY_SLACK)


def cgf_registry() -> "dict[str, Callable[[float], CgfBoundFn]]":
    """CLIから選択できるcgf上界（R を受け取るファクトリ）"""
    return {
        "freedman": freedman_cgf,
        "gaussian": lambda R: gaussian_cgf(),
    }
