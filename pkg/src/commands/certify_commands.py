"""証明スイートのコマンド"""

import argparse

from src.commands.common import EXIT_OK, EXIT_VIOLATION, CommandResult, output_parent
from src.models.run_config import RunConfig
from src.services.certification_service import RANDOMIZED_SUITES, SUITES, run_suite
from src.utils.logging import logger

DEFAULT_INSTANCES = 100


class CertifyCommands:
    """certify コマンド"""

    def __init__(self):
        self.logger = logger.with_context(command_family="certify")

    def register(self, subparsers) -> None:
        certify = subparsers.add_parser("certify", parents=[output_parent()],
                                        help="トレース不等式を厳密な有限和で確認します")
        certify.add_argument("--suite", choices=SUITES, required=True)
        certify.add_argument("--instances", type=int, default=DEFAULT_INSTANCES,
                             help="乱数インスタンス数（決定的なスイートでは無視）")
        certify.add_argument("--seed", type=int, default=None)
        certify.set_defaults(build=self.certify_config, handler=self.certify)

    @staticmethod
    def certify_config(args: argparse.Namespace) -> RunConfig:
        randomized = args.suite in RANDOMIZED_SUITES or args.suite == "all"
        return RunConfig(
            command="certify",
            parameters={"suite": args.suite, "instances": args.instances},
            output=args.output,
            format=args.format,
            seed=args.seed,
            needs_seed=randomized and args.instances > 0,
        )

    def certify(self, run: RunConfig) -> CommandResult:
        """certify コマンド（全インスタンス合格で終了コード0）"""
        report = run_suite(run.get("suite"), run.get("instances"), run.seed)
        if not report.passed:
            for failure in report.failures:
                self.logger.error(f"証明に失敗: {failure.description} margin={failure.margin:.3e}")
        return CommandResult(
            summary=report.summary(),
            rows=[r.to_dict() for r in report.reports],
            exit_code=EXIT_OK if report.passed else EXIT_VIOLATION,
        )


def setup(subparsers) -> CertifyCommands:
    """コマンドをパーサーに登録"""
    commands = CertifyCommands()
    commands.register(subparsers)
    return commands
