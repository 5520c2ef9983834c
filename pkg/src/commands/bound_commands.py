"""上界の評価・逆算コマンド"""

import argparse

from src.commands.common import CommandResult, output_parent
from src.models.bounds import TailQuery
from src.models.run_config import RunConfig, RunConfigError
from src.services.bound_service import (
    bennett_tail_bound,
    cgf_registry,
    freedman_tail_bound,
    invert_bennett_for_t,
    invert_freedman_for_t,
    optimize_theta,
    rectangular_freedman_bound,
)
from src.utils.logging import logger

BOUND_KINDS = ("freedman", "bennett", "rectangular", "master")
INVERT_KINDS = ("freedman", "bennett")


class BoundCommands:
    """bound / invert コマンド"""

    def __init__(self):
        self.logger = logger.with_context(command_family="bound")

    def register(self, subparsers) -> None:
        parent = output_parent()

        bound = subparsers.add_parser("bound", parents=[parent], help="裾確率の上界を評価します")
        bound.add_argument("--kind", choices=BOUND_KINDS, default="freedman")
        bound.add_argument("-t", dest="t", type=float, required=True, help="閾値 t ≥ 0")
        bound.add_argument("--sigma2", type=float, required=True, help="分散上限 σ² > 0")
        bound.add_argument("-R", dest="R", type=float, default=1.0, help="一様上界 R > 0")
        bound.add_argument("-d", dest="d", type=int, default=1, help="次元 d")
        bound.add_argument("--d1", type=int, default=None, help="長方形の行数")
        bound.add_argument("--d2", type=int, default=None, help="長方形の列数")
        bound.add_argument("--g", choices=tuple(cgf_registry()), default="freedman",
                           help="master で使うcgf上界")
        bound.set_defaults(build=self.bound_config, handler=self.bound)

        invert = subparsers.add_parser("invert", parents=[parent], help="上界が δ になる閾値 t を求めます")
        invert.add_argument("--kind", choices=INVERT_KINDS, default="freedman")
        invert.add_argument("--delta", type=float, required=True, help="目標の確率 δ > 0（δ ≥ d なら t = 0）")
        invert.add_argument("--sigma2", type=float, required=True)
        invert.add_argument("-R", dest="R", type=float, default=1.0)
        invert.add_argument("-d", dest="d", type=int, default=1)
        invert.set_defaults(build=self.invert_config, handler=self.invert)

    @staticmethod
    def bound_config(args: argparse.Namespace) -> RunConfig:
        return RunConfig(
            command="bound",
            parameters={
                "kind": args.kind, "t": args.t, "sigma2": args.sigma2, "R": args.R,
                "d": args.d, "d1": args.d1, "d2": args.d2, "g": args.g,
            },
            output=args.output,
            format=args.format,
        )

    @staticmethod
    def invert_config(args: argparse.Namespace) -> RunConfig:
        return RunConfig(
            command="invert",
            parameters={"kind": args.kind, "delta": args.delta, "sigma2": args.sigma2, "R": args.R, "d": args.d},
            output=args.output,
            format=args.format,
        )

    def bound(self, run: RunConfig) -> CommandResult:
        """bound コマンド"""
        kind = run.get("kind")
        t, sigma2, R = run.get("t"), run.get("sigma2"), run.get("R")

        if kind == "rectangular":
            d1, d2 = run.get("d1"), run.get("d2")
            if d1 is None or d2 is None:
                raise RunConfigError("--kind rectangular needs --d1 and --d2")
            query = TailQuery(t=t, sigma2=sigma2, R=R, d=d1 + d2)
            result = rectangular_freedman_bound(t, sigma2, R, d1, d2)
        else:
            query = TailQuery(t=t, sigma2=sigma2, R=R, d=run.get("d"))
            if kind == "freedman":
                result = freedman_tail_bound(query)
            elif kind == "bennett":
                result = bennett_tail_bound(query)
            else:
                g = cgf_registry()[run.get("g")](R)
                result = optimize_theta(t, sigma2, g, query.d)

        self.logger.info(f"{kind} 上界: t={t}, σ²={sigma2}, R={R}, d={query.d} → {result.value:.12g}")
        row = {"kind": kind, **query.to_dict(), **result.to_dict()}
        if kind == "master":
            row["g"] = run.get("g")
        return CommandResult(summary=dict(row), rows=[row])

    def invert(self, run: RunConfig) -> CommandResult:
        """invert コマンド"""
        kind = run.get("kind")
        delta, sigma2, R, d = run.get("delta"), run.get("sigma2"), run.get("R"), run.get("d")

        if kind == "freedman":
            t = invert_freedman_for_t(delta, sigma2, R, d)
            check = freedman_tail_bound(TailQuery(t=t, sigma2=sigma2, R=R, d=d))
        else:
            t = invert_bennett_for_t(delta, sigma2, R, d)
            check = bennett_tail_bound(TailQuery(t=t, sigma2=sigma2, R=R, d=d))

        row = {"kind": kind, "delta": delta, "sigma2": sigma2, "R": R, "d": d, "t": t, "bound_at_t": check.value}
        return CommandResult(summary=dict(row), rows=[row])


def setup(subparsers) -> BoundCommands:
    """コマンドをパーサーに登録"""
    commands = BoundCommands()
    commands.register(subparsers)
    return commands
