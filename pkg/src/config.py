"""Configuration management for the Matrix Freedman toolkit."""

import os
import platform
import sys
from typing import Optional, Dict, Any
from pathlib import Path

import psutil
from dotenv import load_dotenv

# 環境変数ファイルの読み込み
# 最初に見つかった.envファイルのみを使用する
env_files = ['.env', '.env.local']
for env_file in env_files:
    if os.path.exists(env_file):
        load_dotenv(env_file)
        break


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    """整数の環境変数を読み込む（不正な値は-1として返し、validateで検出する）"""
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        return -1


class Config:
    """Configuration class for the Matrix Freedman toolkit.

    数値計算の契約（許容誤差、反復上限、バッチサイズ、信頼水準）は
    各サービスのクラス定数であり、ここでは扱わない。
    ここにあるのは実行環境に依存してよい設定のみ。
    """

    VALID_ENVIRONMENTS = ('development', 'staging', 'production')

    # 環境設定
    ENVIRONMENT: str = os.getenv('MATFREEDMAN_ENV', 'development')

    # Logging Configuration
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', '')
    LOG_FILE: str = os.getenv('LOG_FILE', '')
    LOG_FORMAT: str = os.getenv('LOG_FORMAT', '')  # text | json

    # 並列実行（Monte Carloバッチと証明インスタンス）
    THREADS: Optional[int] = _env_int('MATFREEDMAN_THREADS', None)

    # 厳密列挙のノード上限
    NODE_BUDGET: int = _env_int('MATFREEDMAN_NODE_BUDGET', 100_000)  # type: ignore[assignment]

    def __init__(self):
        """環境に応じた設定を初期化"""
        self._apply_environment_settings()

    def _apply_environment_settings(self):
        """環境に応じた設定を適用"""
        if self.ENVIRONMENT == 'development':
            if not self.LOG_LEVEL:
                self.LOG_LEVEL = 'INFO'
            if not self.LOG_FORMAT:
                self.LOG_FORMAT = 'text'

        elif self.ENVIRONMENT == 'staging':
            if not self.LOG_LEVEL:
                self.LOG_LEVEL = 'INFO'
            if not self.LOG_FORMAT:
                self.LOG_FORMAT = 'json'

        elif self.ENVIRONMENT == 'production':
            # 本番環境（CIパイプライン等）ではJSONログ
            if not self.LOG_LEVEL:
                self.LOG_LEVEL = 'WARNING'
            if not self.LOG_FORMAT:
                self.LOG_FORMAT = 'json'

        if not self.LOG_LEVEL:
            self.LOG_LEVEL = 'INFO'
        if not self.LOG_FORMAT:
            self.LOG_FORMAT = 'text'

        # ログファイルパスの調整
        if self.LOG_FILE and not os.path.isabs(self.LOG_FILE):
            log_path = Path(self.LOG_FILE)
            if log_path.parent == Path('.'):
                log_path = Path('logs') / log_path
            self.LOG_FILE = str(log_path)

    @classmethod
    def validate(cls) -> bool:
        """Validate configuration values."""
        config_instance = cls()
        invalid_vars = []

        if config_instance.ENVIRONMENT not in cls.VALID_ENVIRONMENTS:
            invalid_vars.append('MATFREEDMAN_ENV')
        if config_instance.THREADS is not None and config_instance.THREADS < 1:
            invalid_vars.append('MATFREEDMAN_THREADS')
        if config_instance.NODE_BUDGET < 1:
            invalid_vars.append('MATFREEDMAN_NODE_BUDGET')
        if config_instance.LOG_FORMAT not in ('text', 'json'):
            invalid_vars.append('LOG_FORMAT')

        if invalid_vars:
            raise ValueError(f"Invalid environment variables: {', '.join(invalid_vars)}")

        return True

    def worker_count(self) -> int:
        """ワーカー数を取得（未指定時は論理CPU数）"""
        if self.THREADS is not None and self.THREADS >= 1:
            return self.THREADS
        return psutil.cpu_count(logical=True) or 1

    def get_environment_info(self) -> Dict[str, Any]:
        """環境情報を取得（ログ出力専用、結果ファイルには含めない）"""
        return {
            "environment": self.ENVIRONMENT,
            "python_version": f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}",
            "platform": platform.platform(),
            "cpu_count": psutil.cpu_count(logical=True),
            "memory_total_gb": round(psutil.virtual_memory().total / (1024 ** 3), 2),
            "log_level": self.LOG_LEVEL,
            "log_file": self.LOG_FILE,
            "log_format": self.LOG_FORMAT,
            "threads": self.worker_count(),
            "node_budget": self.NODE_BUDGET,
        }


# Global config instance
config = Config()
