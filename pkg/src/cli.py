"""
matfreedman コマンドラインのエントリーポイント

終了コード:
    0  成功
    1  契約違反の検出（経験的区間が上界を超えた、証明の不合格）
    2  使い方・入力の誤り（引数、カーネルファイル、前提条件）
    3  実行の失敗（固有値ソルバーの非収束、予期しない例外）

結果は標準出力またはファイルへ、ログは標準エラーへ出す。
"""

import argparse
import sys
from typing import List, Optional, Sequence

from src import __version__
from src.commands import bound_commands, certify_commands, simulate_commands
from src.commands.common import EXIT_FAILURE, EXIT_USAGE, CommandResult
from src.config import config
from src.models.run_config import RunConfig
from src.services.bound_service import BoundError
from src.services.estimation_service import VerificationError
from src.services.kernel_service import KernelError
from src.services.symmat_service import SymmetricMatrixError
from src.utils.logging import logger
from src.utils.output import ResultWriter

# 入力の誤りとして終了コード2にする例外
USAGE_ERRORS = (ValueError, KernelError, BoundError, VerificationError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matfreedman",
        description="行列マルチンゲールのFreedman・Bennett型裾確率上界の評価と検証",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    bound_commands.setup(subparsers)
    simulate_commands.setup(subparsers)
    certify_commands.setup(subparsers)
    return parser


def emit(run: RunConfig, result: CommandResult, argv: Sequence[str]) -> None:
    """要約と結果テーブルを出力"""
    meta = ResultWriter.meta(run.command, run.seed, argv)
    table = ResultWriter.render(run.format, meta, result.rows)
    summary = ResultWriter.summary_lines(result.summary)

    if run.output:
        ResultWriter.write(run.output, table)
        sys.stdout.write(summary)
        sys.stdout.write(f"output: {run.output}\n")
        logger.info(f"結果を書き出しました: {run.output} ({run.format}, {len(result.rows)} 行)")
    else:
        sys.stdout.write(summary)
        sys.stdout.write("\n")
        sys.stdout.write(table)
    sys.stdout.flush()


def main(argv: Optional[List[str]] = None) -> int:
    """CLIを実行して終了コードを返す"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse は使い方の誤りで 2、--help/--version で 0 を返す
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    command_logger = logger.with_context(command=args.command)
    try:
        config.validate()
        command_logger.debug(f"実行環境: {config.get_environment_info()}")
        run = args.build(args)
        result = args.handler(run)
    except USAGE_ERRORS as e:
        command_logger.warning(f"{args.command} の入力が不正です: {e}")
        sys.stderr.write(f"matfreedman {args.command}: error: {e}\n")
        return EXIT_USAGE
    except SymmetricMatrixError as e:
        command_logger.error(f"{args.command} の数値計算に失敗しました: {e}")
        sys.stderr.write(f"matfreedman {args.command}: numerical failure: {e}\n")
        return EXIT_FAILURE
    except Exception as e:
        # 終了コード1は違反の検出専用なのでトレースバックで終わらせない
        command_logger.error(f"{args.command} の実行中に予期しないエラーが発生しました: {e}", exc_info=True)
        sys.stderr.write(f"matfreedman {args.command}: internal error: {type(e).__name__}: {e}\n")
        return EXIT_FAILURE

    emit(run, result, argv)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
