"""
カーネル仕様ファイル読み込みのユニットテスト
"""

import json

import pytest

from src.services.kernel_loader import KernelParseError, load_kernel_file, parse_kernel_document
from src.services.kernel_service import KernelValidationError, TableKernel, exact_conditional_second_moment


def table_document(**overrides):
    document = {
        "name": "two-state",
        "dim": 1,
        "horizon": 3,
        "initial_state": "a",
        "states": {
            "a": [
                {"p": "1/2", "matrix": [[1.0]], "next": "a"},
                {"p": "1/2", "matrix": [[-1.0]], "next": "b"},
            ],
            "b": [
                {"p": "0.5", "matrix": [0.5], "next": "b"},
                {"p": "0.5", "matrix": [-0.5], "next": "a"},
            ],
        },
    }
    document.update(overrides)
    return document


class TestParseKernelDocument:
    """JSON文書の解析"""

    def test_valid_table(self):
        kernel = parse_kernel_document(json.dumps(table_document()))
        assert isinstance(kernel, TableKernel)
        assert (kernel.dim, kernel.horizon, kernel.name) == (1, 3, "two-state")
        assert exact_conditional_second_moment(kernel, "b", 2).entries[0, 0] == pytest.approx(0.25)

    def test_rational_probabilities_sum_exactly(self):
        """"1/3" を3つ並べても和はちょうど1"""
        document = table_document(horizon=1, states={
            "s": [
                {"p": "1/3", "matrix": [[1.0]]},
                {"p": "1/3", "matrix": [[0.0]]},
                {"p": "1/3", "matrix": [[-1.0]]},
            ],
        })
        document.pop("initial_state")
        kernel = parse_kernel_document(json.dumps(document))
        assert kernel.initial_state == "s"
        assert exact_conditional_second_moment(kernel, "s", 1).entries[0, 0] == pytest.approx(2.0 / 3.0)

    def test_rademacher_document(self):
        document = {
            "kind": "rademacher",
            "dim": 2,
            "horizon": 2,
            "coefficients": [[[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0, 1.0, 0.0]],
        }
        kernel = parse_kernel_document(json.dumps(document), source="series.json")
        assert kernel.horizon == 2
        assert kernel.name == "series"

    def test_syntax_error_has_location(self):
        """JSON構文エラーは行・列を報告する"""
        with pytest.raises(KernelParseError) as excinfo:
            parse_kernel_document('{\n  "dim": 1,\n  "horizon": \n}', source="broken.json")
        assert excinfo.value.line == 4
        assert excinfo.value.column is not None
        assert str(excinfo.value).startswith("broken.json:4:")

    def test_probability_sum_violation(self):
        document = table_document(states={
            "a": [
                {"p": "0.5", "matrix": [[1.0]], "next": "a"},
                {"p": "0.4", "matrix": [[-1.0]], "next": "a"},
            ],
        })
        with pytest.raises(KernelValidationError, match="sum"):
            parse_kernel_document(json.dumps(document))

    def test_non_positive_probability(self):
        document = table_document(states={"a": [{"p": "0", "matrix": [[0.0]]}, {"p": "1", "matrix": [[0.0]]}]})
        with pytest.raises(KernelValidationError):
            parse_kernel_document(json.dumps(document))

    @pytest.mark.parametrize("document, message", [
        ({"horizon": 1, "states": {}}, "dim"),
        ({"dim": 1, "horizon": True, "states": {}}, "integer"),
        ({"dim": 1, "horizon": 1, "states": {}}, "at least one state"),
        ({"dim": 1, "horizon": 1, "kind": "mystery"}, "unknown kernel kind"),
        ({"dim": 1, "horizon": 2, "kind": "rademacher", "coefficients": [[[1.0]]]}, "horizon"),
    ])
    def test_schema_errors(self, document, message):
        with pytest.raises(KernelParseError, match=message):
            parse_kernel_document(json.dumps(document))

    @pytest.mark.parametrize("label", [["a"], {"state": "a"}, 1, None])
    def test_next_state_must_be_string(self, label):
        states = {"a": [{"p": "1/2", "matrix": [[1.0]], "next": label}, {"p": "1/2", "matrix": [[-1.0]]}]}
        with pytest.raises(KernelParseError, match="state label"):
            parse_kernel_document(json.dumps(table_document(states=states)))

    @pytest.mark.parametrize("label", [["a"], {"state": "a"}, 0])
    def test_initial_state_must_be_string(self, label):
        with pytest.raises(KernelParseError, match="initial_state"):
            parse_kernel_document(json.dumps(table_document(initial_state=label)))

    def test_wrong_matrix_shape(self):
        document = table_document(states={"a": [{"p": "1", "matrix": [[0.0, 0.0]]}]})
        with pytest.raises(KernelParseError, match="1x1"):
            parse_kernel_document(json.dumps(document))

    def test_asymmetric_matrix(self):
        document = table_document(dim=2, states={
            "a": [
                {"p": "1/2", "matrix": [[0.0, 1.0], [0.0, 0.0]]},
                {"p": "1/2", "matrix": [[0.0, -1.0], [0.0, 0.0]]},
            ],
        })
        with pytest.raises(KernelValidationError, match="invalid matrix"):
            parse_kernel_document(json.dumps(document))

    def test_uncentered_requires_flag(self):
        states = {"a": [{"p": "1/2", "matrix": [[1.0]]}, {"p": "1/2", "matrix": [[0.0]]}]}
        with pytest.raises(KernelValidationError, match="centered"):
            parse_kernel_document(json.dumps(table_document(states=states)))
        kernel = parse_kernel_document(json.dumps(table_document(states=states, centered=False)))
        assert kernel.centered is False


class TestLoadKernelFile:
    """ファイルからの読み込み"""

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "walk.json"
        path.write_text(json.dumps(table_document()), encoding="utf-8")
        kernel = load_kernel_file(path)
        assert kernel.horizon == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(KernelParseError, match="cannot read"):
            load_kernel_file(tmp_path / "missing.json")
