"""コマンド実行設定のモデル定義"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

COMMANDS = ("bound", "invert", "simulate", "verify-tail", "certify", "sweep")
OUTPUT_FORMATS = ("csv", "json")

# コマンドごとの必須パラメータ
REQUIRED_PARAMETERS: Dict[str, Tuple[str, ...]] = {
    "bound": ("kind", "t", "sigma2"),
    "invert": ("kind", "delta", "sigma2"),
    "simulate": (),
    "verify-tail": ("t", "sigma2"),
    "certify": ("suite",),
    "sweep": ("t_grid", "sigma2"),
}

# シードが必須のコマンド（certify は乱数スイートのみ）
SEEDED_COMMANDS = ("simulate", "verify-tail", "sweep")
TRIAL_COMMANDS = ("verify-tail", "sweep")


class RunConfigError(ValueError):
    """コマンドラインの組み合わせが不正"""
    pass


@dataclass(frozen=True)
class RunConfig:
    """
    1回のコマンド実行の設定

    シードが必要なコマンドでシードが無い場合はエラーにする。
    暗黙の非決定的な実行は行わない。
    """
    command: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    format: str = "csv"
    seed: Optional[int] = None
    trials: Optional[int] = None
    needs_seed: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise RunConfigError(f"unknown command '{self.command}'")
        if self.format not in OUTPUT_FORMATS:
            raise RunConfigError(f"output format must be one of {OUTPUT_FORMATS}, got '{self.format}'")

        missing = [key for key in REQUIRED_PARAMETERS[self.command] if self.parameters.get(key) is None]
        if missing:
            raise RunConfigError(f"'{self.command}' requires: {', '.join(missing)}")

        if (self.command in SEEDED_COMMANDS or self.needs_seed) and self.seed is None:
            raise RunConfigError(f"'{self.command}' is randomized and needs --seed")
        if self.seed is not None and self.seed < 0:
            raise RunConfigError(f"--seed must be ≥ 0, got {self.seed}")

        if self.command in TRIAL_COMMANDS:
            if self.trials is None or self.trials < 1:
                raise RunConfigError(f"'{self.command}' needs --trials ≥ 1, got {self.trials}")

    def get(self, key: str, default: Any = None) -> Any:
        return self.parameters.get(key, default)
