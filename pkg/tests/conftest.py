"""
pytest設定ファイル

全テストで共通して使用されるフィクスチャとセットアップを定義します。
"""

import os

import numpy as np
import pytest

from src.models.martingale import Outcome, TransitionTable
from src.models.matrices import RectMatrix, SymMatrix


@pytest.fixture(autouse=True)
def setup_test_environment():
    """テスト環境のセットアップ"""
    original_env = {}
    test_env = {
        'LOG_LEVEL': 'ERROR',
    }

    for key, value in test_env.items():
        original_env[key] = os.environ.get(key)
        os.environ[key] = value

    yield

    for key, value in original_env.items():
        if value is None:
            os.environ.pop(key, None)
        else:
            os.environ[key] = value


@pytest.fixture
def single_worker(mocker):
    """並列実行を1ワーカーに固定"""
    from src.config import config
    mocker.patch.object(config, 'THREADS', 1)
    return config


@pytest.fixture
def rng():
    """テスト用の固定シード乱数生成器"""
    return np.random.default_rng(20240607)


def pytest_configure(config):
    """pytest設定"""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
    config.addinivalue_line(
        "markers", "property: mark test as a hypothesis property test"
    )


def pytest_collection_modifyitems(config, items):
    """テスト収集時の処理"""
    for item in items:
        if "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
        elif "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)


@pytest.fixture
def suppress_logs():
    """ログ出力を抑制"""
    import logging
    logging.disable(logging.CRITICAL)
    yield
    logging.disable(logging.NOTSET)


# テストデータのファクトリ関数
class TestDataFactory:
    """テストデータ生成用のファクトリクラス"""

    __test__ = False

    @staticmethod
    def random_symmetric(rng, d, bound=1.0):
        """成分が一様分布の対称行列"""
        upper = np.triu(rng.uniform(-bound, bound, size=(d, d)))
        return SymMatrix(upper + np.triu(upper, 1).T)

    @staticmethod
    def random_rect(rng, rows, cols):
        return RectMatrix(rng.uniform(-1.0, 1.0, size=(rows, cols)))

    @staticmethod
    def scalar_distribution(values, probabilities=None):
        """スカラーの有限分布 [(p, SymMatrix)]"""
        if probabilities is None:
            probabilities = [1.0 / len(values)] * len(values)
        return [(p, SymMatrix([[v]])) for p, v in zip(probabilities, values)]

    @staticmethod
    def two_state_table(horizon=4, centered=True):
        """2状態のスカラー遷移表（状態 b では歩幅が半分）"""
        one, half = SymMatrix([[1.0]]), SymMatrix([[0.5]])
        return TransitionTable(
            dim=1,
            horizon=horizon,
            initial_state="a",
            states={
                "a": [Outcome(0.5, one, "a"), Outcome(0.5, -one, "b")],
                "b": [Outcome(0.5, half, "b"), Outcome(0.5, -half if centered else half, "a")],
            },
            centered=centered,
            name="two-state",
        )

    @staticmethod
    def walk_paths(K):
        """±1 ウォークの全 2^K 経路"""
        for bits in range(2 ** K):
            yield [1 if (bits >> j) & 1 else -1 for j in range(K)]


@pytest.fixture
def test_data_factory():
    """テストデータファクトリのフィクスチャ"""
    return TestDataFactory
