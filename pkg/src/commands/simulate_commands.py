"""シミュレーションとMonte Carlo検証のコマンド"""

import argparse
from typing import Any, Dict, List

import numpy as np

from src.commands.common import (
    DEFAULT_TRIALS,
    EXIT_OK,
    EXIT_VIOLATION,
    CommandResult,
    add_kernel_arguments,
    kernel_parameters,
    output_parent,
    resolve_kernel,
)
from src.models.run_config import RunConfig
from src.services.estimation_service import (
    bound_vs_empirical_sweep,
    compare_with_bounds,
    comparison_radius,
    estimate_tail_probability,
)
from src.services.simulation_service import simulate, stopping_time
from src.services.symmat_service import lambda_max_batch
from src.utils.logging import logger


def _state_label(state: Any) -> str:
    return "" if state is None else str(state)


class SimulationCommands:
    """simulate / verify-tail / sweep コマンド"""

    def __init__(self):
        self.logger = logger.with_context(command_family="simulate")

    def register(self, subparsers) -> None:
        parent = output_parent()

        sim = subparsers.add_parser("simulate", parents=[parent], help="軌道を1本生成して表示します")
        add_kernel_arguments(sim)
        sim.add_argument("--theta", type=float, nargs="+", default=[0.5, 1.0], help="追跡する θ の一覧")
        sim.add_argument("--seed", type=int, default=None)
        sim.add_argument("--stream", type=int, default=0, help="乱数ストリーム番号")
        sim.add_argument("-t", dest="t", type=float, default=None, help="停止時刻の閾値 t")
        sim.add_argument("--sigma2", type=float, default=None, help="停止時刻の分散上限 σ²")
        sim.set_defaults(build=self.simulate_config, handler=self.simulate)

        tail = subparsers.add_parser("verify-tail", parents=[parent],
                                     help="Monte Carlo推定を上界と比較します")
        add_kernel_arguments(tail)
        tail.add_argument("-t", dest="t", type=float, required=True)
        tail.add_argument("--sigma2", type=float, required=True)
        tail.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
        tail.add_argument("--seed", type=int, default=None)
        tail.set_defaults(build=self.verify_tail_config, handler=self.verify_tail)

        sweep = subparsers.add_parser("sweep", parents=[parent], help="t の格子で推定と上界を並べます")
        add_kernel_arguments(sweep)
        sweep.add_argument("--t-grid", dest="t_grid", type=float, nargs="+", required=True)
        sweep.add_argument("--sigma2", type=float, required=True)
        sweep.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
        sweep.add_argument("--seed", type=int, default=None)
        sweep.set_defaults(build=self.sweep_config, handler=self.sweep)

    @staticmethod
    def simulate_config(args: argparse.Namespace) -> RunConfig:
        parameters = {
            **kernel_parameters(args),
            "theta": list(args.theta), "stream": args.stream, "t": args.t, "sigma2": args.sigma2,
        }
        return RunConfig(command="simulate", parameters=parameters, output=args.output,
                         format=args.format, seed=args.seed)

    @staticmethod
    def verify_tail_config(args: argparse.Namespace) -> RunConfig:
        parameters = {**kernel_parameters(args), "t": args.t, "sigma2": args.sigma2}
        return RunConfig(command="verify-tail", parameters=parameters, output=args.output,
                         format=args.format, seed=args.seed, trials=args.trials)

    @staticmethod
    def sweep_config(args: argparse.Namespace) -> RunConfig:
        parameters = {**kernel_parameters(args), "t_grid": list(args.t_grid), "sigma2": args.sigma2}
        return RunConfig(command="sweep", parameters=parameters, output=args.output,
                         format=args.format, seed=args.seed, trials=args.trials)

    def simulate(self, run: RunConfig) -> CommandResult:
        """simulate コマンド（軌道の表と停止時刻）"""
        kernel, K = resolve_kernel(run)
        thetas = run.get("theta")
        trajectory = simulate(kernel, K, thetas, run.seed, stream=run.get("stream", 0))

        lam_Y = lambda_max_batch(np.stack([step.Y.entries for step in trajectory.steps]))
        lam_W = lambda_max_batch(np.stack([step.W.entries for step in trajectory.steps]))
        rows: List[Dict[str, Any]] = []
        for step, top_Y, top_W in zip(trajectory.steps, lam_Y, lam_W):
            row: Dict[str, Any] = {
                "k": step.k,
                "state": _state_label(step.state),
                "lambda_max_Y": float(top_Y),
                "lambda_max_W": float(top_W),
            }
            for theta, value in zip(trajectory.theta_list, step.S):
                row[f"S[{theta:g}]"] = value
            rows.append(row)

        summary: Dict[str, Any] = {
            "kernel": kernel.name, "d": kernel.dim, "K": K, "seed": run.seed, "stream": trajectory.stream,
        }
        t, sigma2 = run.get("t"), run.get("sigma2")
        if t is not None and sigma2 is not None:
            summary.update(stopping_time(trajectory, t, sigma2).to_dict())
        return CommandResult(summary=summary, rows=rows)

    def verify_tail(self, run: RunConfig) -> CommandResult:
        """verify-tail コマンド（経験的区間が上界に矛盾すれば終了コード1）"""
        kernel, K = resolve_kernel(run)
        estimate = estimate_tail_probability(kernel, K, run.get("t"), run.get("sigma2"), run.trials, run.seed)
        comparison = compare_with_bounds(estimate, comparison_radius(kernel, K), kernel.dim)

        row = {**estimate.to_dict(), "freedman": comparison.freedman, "bennett": comparison.bennett,
               "ok": comparison.ok}
        if not comparison.ok:
            self.logger.error(
                f"経験的区間の下端 {estimate.ci_low:.6g} が上界 min(1, {comparison.bennett:.6g}) を超えました"
            )
        return CommandResult(summary=dict(row), rows=[row],
                             exit_code=EXIT_OK if comparison.ok else EXIT_VIOLATION)

    def sweep(self, run: RunConfig) -> CommandResult:
        """sweep コマンド"""
        kernel, K = resolve_kernel(run)
        rows = bound_vs_empirical_sweep(kernel, K, run.get("t_grid"), run.get("sigma2"), run.trials, run.seed)
        failures = [row for row in rows if not row.ok]
        summary = {
            "kernel": kernel.name, "d": kernel.dim, "K": K, "R": comparison_radius(kernel, K),
            "sigma2": run.get("sigma2"), "trials": run.trials, "seed": run.seed,
            "rows": len(rows), "violations": len(failures),
        }
        return CommandResult(summary=summary, rows=[row.to_dict() for row in rows],
                             exit_code=EXIT_VIOLATION if failures else EXIT_OK)


def setup(subparsers) -> SimulationCommands:
    """コマンドをパーサーに登録"""
    commands = SimulationCommands()
    commands.register(subparsers)
    return commands
