"""
カウンターベースの乱数ストリーム

(マスターシード, ストリーム番号[, 副ストリーム番号]) から独立したPhilox系列を導出する。
ストリーム番号はバッチ番号またはインスタンス番号、副ストリーム番号はステップ番号で、
ワーカー数や実行順序に依存しない。
"""

from typing import Optional

import numpy as np


def stream_generator(seed: int, stream: int, substream: Optional[int] = None) -> np.random.Generator:
    """(seed, stream[, substream]) に対応する決定的な乱数生成器を返す"""
    if seed < 0 or stream < 0 or (substream is not None and substream < 0):
        raise ValueError(
            f"seed and stream must be non-negative (seed={seed}, stream={stream}, substream={substream})"
        )
    key = (stream,) if substream is None else (stream, substream)
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))
