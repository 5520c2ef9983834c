"""コマンド共通の型と引数"""

import argparse
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.models.run_config import RunConfig, RunConfigError
from src.services.kernel_loader import load_kernel_file
from src.services.kernel_service import BUILTIN_KERNELS, FiniteKernel, builtin_kernel

# 終了コード
EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3

DEFAULT_TRIALS = 100_000


@dataclass
class CommandResult:
    """コマンドの出力（要約と結果テーブル）"""
    summary: Dict[str, Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    exit_code: int = EXIT_OK


def output_parent() -> argparse.ArgumentParser:
    """全コマンド共通の出力オプション"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--output", "-o", default=None, help="結果ファイルのパス（省略時は標準出力）")
    parent.add_argument("--format", choices=("csv", "json"), default="csv", help="出力形式")
    return parent


def add_kernel_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--kernel", choices=BUILTIN_KERNELS, help="組み込みカーネル名")
    group.add_argument("--kernel-file", help="カーネル仕様ファイル（JSON）")
    parser.add_argument("--K", "-K", dest="K", type=int, default=None,
                        help="ステップ数（カーネルファイルでは省略時にhorizon）")


def kernel_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    return {"kernel": args.kernel, "kernel_file": args.kernel_file, "K": args.K}


def resolve_kernel(run: RunConfig) -> Tuple[FiniteKernel, int]:
    """
    設定からカーネルとステップ数を決める

    Raises:
        RunConfigError: 組み込みカーネルで --K が無い場合
        KernelParseError: カーネルファイルが読めない場合
    """
    K: Optional[int] = run.get("K")
    kernel_file = run.get("kernel_file")
    if kernel_file:
        kernel = load_kernel_file(kernel_file)
        return kernel, kernel.horizon if K is None else K

    if K is None:
        raise RunConfigError(f"built-in kernel '{run.get('kernel')}' needs --K")
    return builtin_kernel(run.get("kernel"), K), K
