"""
結果テーブルの出力ユーティリティ

CSVの実数は17桁の有効数字、JSONの実数はPythonの最短往復表現で書き出す。
どちらも再読み込みで元の値が正確に復元される。
出力にタイムスタンプは含めないので、同じコマンドラインからは同じバイト列になる。
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np

from src import __version__

Row = Mapping[str, Any]


class ResultWriter:
    """コマンド結果の整形と書き出し"""

    FLOAT_FORMAT = ".17g"

    @classmethod
    def plain(cls, value: Any) -> Any:
        """numpyの値を組み込み型に変換"""
        if isinstance(value, np.bool_):
            return bool(value)
        if isinstance(value, np.integer):
            return int(value)
        if isinstance(value, np.floating):
            return float(value)
        if isinstance(value, (list, tuple)):
            return [cls.plain(v) for v in value]
        if isinstance(value, dict):
            return {k: cls.plain(v) for k, v in value.items()}
        return value

    @classmethod
    def format_cell(cls, value: Any) -> str:
        """CSVの1セル"""
        value = cls.plain(value)
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            if math.isnan(value):
                return "nan"
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            return format(value, cls.FLOAT_FORMAT)
        if isinstance(value, list):
            return ";".join(cls.format_cell(v) for v in value)
        return str(value)

    @staticmethod
    def columns(rows: Sequence[Row]) -> List[str]:
        """全行の列名を初出順に並べる"""
        names: List[str] = []
        for row in rows:
            for key in row:
                if key not in names:
                    names.append(key)
        return names

    @classmethod
    def to_csv(cls, rows: Sequence[Row]) -> str:
        buffer = io.StringIO()
        names = cls.columns(rows)
        writer = csv.writer(buffer, lineterminator="\n")
        if names:
            writer.writerow(names)
        for row in rows:
            writer.writerow([cls.format_cell(row.get(name)) for name in names])
        return buffer.getvalue()

    @classmethod
    def to_json(cls, meta: Mapping[str, Any], rows: Sequence[Row]) -> str:
        document = {
            "meta": cls.plain(dict(meta)),
            "rows": [cls.plain(dict(row)) for row in rows],
        }
        return json.dumps(document, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def summary_lines(cls, summary: Mapping[str, Any]) -> str:
        """key: value 形式の要約"""
        return "".join(f"{key}: {cls.format_cell(value)}\n" for key, value in summary.items())

    @staticmethod
    def meta(command: str, seed: Any, argv: Iterable[str]) -> Dict[str, Any]:
        return {
            "version": __version__,
            "command": command,
            "seed": seed,
            "argv": list(argv),
        }

    @classmethod
    def render(cls, fmt: str, meta: Mapping[str, Any], rows: Sequence[Row]) -> str:
        if fmt == "json":
            return cls.to_json(meta, rows)
        return cls.to_csv(rows)

    @staticmethod
    def write(path: str, text: str) -> None:
        target = Path(path)
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
