"""
裾確率推定サービス

Monte Carloによる P{∃k : λ_max(Y_k) ≥ t かつ λ_max(W_k) ≤ σ²} の推定、
Clopper-Pearsonの正確な信頼区間、±1ランダムウォークの厳密オラクル、
上界と経験値を並べるスイープを提供する。

推定確率が 1e−6 程度を下回る領域（希少事象）は対象外。
分散削減は行わないので、区間は単に [0, 小さな値] になる。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from scipy import stats

from ..config import config
from ..models.bounds import TailQuery
from ..models.verification import SweepRow, TailEstimate
from .bound_service import bennett_tail_bound, freedman_tail_bound
from .kernel_service import FiniteKernel, outcome_bound
from .simulation_service import check_horizon, simulate_batch_hits

logger = logging.getLogger(__name__)


class VerificationError(Exception):
    """検証関連のエラー"""
    pass


class PreconditionError(VerificationError, ValueError):
    """証明の前提条件（中心化、有界性、確率の和など）が満たされない"""
    pass


class NodeBudgetExceededError(VerificationError):
    """厳密列挙のノード数が上限を超えた"""
    def __init__(self, message: str, nodes: int = 0, budget: int = 0):
        super().__init__(message)
        self.nodes = nodes
        self.budget = budget


class OracleRangeError(VerificationError, ValueError):
    """厳密オラクルの適用範囲外"""
    pass


class TailEstimationService:
    """Monte Carlo推定の設定と実行"""

    # 信頼水準
    CONFIDENCE = 0.99

    # 1バッチの軌道数。通し番号 j の軌道はバッチ j // BATCH_SIZE の j % BATCH_SIZE 番目で、
    # 乱数は (seed, j) と BATCH_SIZE だけで決まる。BATCH_SIZE を変えると標本も変わる。
    BATCH_SIZE = 65536

    # 厳密オラクルの上限（確率質量が2進有理数で正確に表せる範囲）
    ORACLE_MAX_STEPS = 40

    def __init__(self, workers: int = 0):
        self.workers = workers or config.worker_count()

    def batch_plan(self, trials: int) -> List[Tuple[int, int]]:
        """(ストリーム番号, 軌道数) の一覧"""
        plan = []
        start = 0
        stream = 0
        while start < trials:
            size = min(self.BATCH_SIZE, trials - start)
            plan.append((stream, size))
            start += size
            stream += 1
        return plan

    def estimate(self, kernel: FiniteKernel, K: int, t: float, sigma2: float,
                 trials: int, seed: int) -> TailEstimate:
        if trials < 1:
            raise ValueError(f"trials must be ≥ 1, got {trials}")
        check_horizon(kernel, K)

        plan = self.batch_plan(trials)
        logger.info(
            f"Monte Carlo推定を開始: kernel={kernel.name}, K={K}, t={t}, σ²={sigma2}, "
            f"trials={trials}, batches={len(plan)}, workers={self.workers}"
        )

        def run(item: Tuple[int, int]) -> int:
            stream, size = item
            return simulate_batch_hits(kernel, K, t, sigma2, size, seed, stream)

        if self.workers == 1 or len(plan) == 1:
            hits = sum(run(item) for item in plan)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                hits = sum(executor.map(run, plan))

        low, high = clopper_pearson(hits, trials, self.CONFIDENCE)
        R = comparison_radius(kernel, K)
        estimate = TailEstimate(
            trials=trials,
            hits=hits,
            ci_low=low,
            ci_high=high,
            t=t,
            sigma2=sigma2,
            K=K,
            seed=seed,
            confidence=self.CONFIDENCE,
            kernel=kernel.name,
            R=R,
            d=kernel.dim,
        )
        logger.info(f"推定完了: hits={hits}/{trials}, p_hat={estimate.p_hat:.6g}, CI=[{low:.6g}, {high:.6g}]")
        if 0 < estimate.p_hat < 1e-6:
            logger.warning("推定確率が 1e-6 を下回っています。この領域の推定はサポート対象外です")
        return estimate


def clopper_pearson(hits: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """
    二項比率のClopper-Pearson（正確）信頼区間

    hits = 0 なら下端は 0、hits = trials なら上端は 1。
    """
    if trials < 1 or not 0 <= hits <= trials:
        raise ValueError(f"need 0 ≤ hits ≤ trials and trials ≥ 1, got hits={hits}, trials={trials}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")

    alpha = 1.0 - confidence
    p_hat = hits / trials
    low = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2.0, hits, trials - hits + 1))
    high = 1.0 if hits == trials else float(stats.beta.ppf(1.0 - alpha / 2.0, hits + 1, trials - hits))
    if math.isnan(low):
        low = 0.0
    if math.isnan(high):
        high = 1.0
    return min(low, p_hat), max(high, p_hat)


def estimate_tail_probability(kernel: FiniteKernel, K: int, t: float, sigma2: float,
                              trials: int, seed: int) -> TailEstimate:
    """
    停止時刻 κ が有限になる確率をMonte Carloで推定

    同じ seed なら常に同じ推定になる（ワーカー数に依存しない）。
    """
    return TailEstimationService().estimate(kernel, K, t, sigma2, trials, seed)


def scalar_walk_oracle(K: int, t: float, sigma2: float) -> float:
    """
    ±1ランダムウォークの P{∃k ≤ K : Y_k ≥ t かつ k ≤ σ²} の厳密値

    (ステップ, 位置) 上の動的計画法で、到達済みの質量は吸収する。W_k = k。

    Raises:
        OracleRangeError: K が範囲外の場合
    """
    if not 0 <= K <= TailEstimationService.ORACLE_MAX_STEPS:
        raise OracleRangeError(
            f"scalar_walk_oracle supports 0 ≤ K ≤ {TailEstimationService.ORACLE_MAX_STEPS}, got {K}"
        )

    # k = 0
    if 0 >= t and 0 <= sigma2:
        return 1.0

    half = Fraction(1, 2)
    alive: Dict[int, Fraction] = {0: Fraction(1)}
    absorbed = Fraction(0)
    for k in range(1, K + 1):
        if k > sigma2:
            break
        following: Dict[int, Fraction] = {}
        for position, mass in alive.items():
            for step in (1, -1):
                following[position + step] = following.get(position + step, Fraction(0)) + mass * half
        alive = {}
        for position, mass in following.items():
            if position >= t:
                absorbed += mass
            else:
                alive[position] = mass

    return float(absorbed)


def comparison_radius(kernel: FiniteKernel, K: int) -> float:
    """
    上界の比較に使う一様上界 R = 到達可能な全結果の max λ_max(X_i)

    差分が全て 0 以下なら任意の R > 0 で上界が成り立つので 1 を使う。
    """
    R = outcome_bound(kernel, K)
    return R if R > 0 else 1.0


def compare_with_bounds(estimate: TailEstimate, R: float, d: int) -> SweepRow:
    """推定値とFreedman・Bennett上界を1行にまとめる"""
    query = TailQuery(t=estimate.t, sigma2=estimate.sigma2, R=R, d=d)
    return SweepRow(
        t=estimate.t,
        p_hat=estimate.p_hat,
        ci_low=estimate.ci_low,
        ci_high=estimate.ci_high,
        freedman=freedman_tail_bound(query).value,
        bennett=bennett_tail_bound(query).value,
    )


def bound_vs_empirical_sweep(kernel: FiniteKernel, K: int, t_grid: Sequence[float], sigma2: float,
                             trials: int, seed: int) -> List[SweepRow]:
    """
    t の格子ごとに経験的推定とFreedman・Bennett上界を並べる

    R は comparison_radius、d はカーネルの次元。行は t の昇順。
    """
    service = TailEstimationService()
    R = comparison_radius(kernel, K)
    rows = [
        compare_with_bounds(service.estimate(kernel, K, t, sigma2, trials, seed), R, kernel.dim)
        for t in sorted(float(x) for x in t_grid)
    ]

    violations = [row.t for row in rows if not row.ok]
    if violations:
        logger.error(f"経験的区間が上界を超えました: t={violations}")
    return rows
