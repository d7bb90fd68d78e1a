import json
import time

import numpy as np
import pytest

from amoebakit.errors import UsageError
from amoebakit.utils import dumps, parallel_map, save_output, task_rng


def test_save_output_with_sidecar(tmp_path):
    path = save_output(str(tmp_path / "out"), "field.csv", "a\n1\n", meta={"seed": 1})
    assert path.endswith("field.csv")
    with open(path) as fh:
        assert fh.read() == "a\n1\n"
    with open(path + ".meta.json") as fh:
        assert json.load(fh) == {"seed": 1}


def test_save_output_sanitizes_names(tmp_path):
    path = save_output(str(tmp_path), "../../escape.json", b"{}")
    assert path == str(tmp_path / "escape.json")


@pytest.mark.parametrize("name", ["notes.txt", "noext", ""])
def test_save_output_rejects_extensions(tmp_path, name):
    with pytest.raises(UsageError):
        save_output(str(tmp_path), name, "x")


def test_dumps_is_canonical():
    text = dumps({"b": np.float64(0.5), "a": np.arange(2), "c": (np.bool_(True), 1 + 2j)})
    assert text.endswith("\n")
    assert list(json.loads(text)) == ["a", "b", "c"]
    assert json.loads(text) == {"a": [0, 1], "b": 0.5, "c": [True, [1.0, 2.0]]}


def test_dumps_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_parallel_map_keeps_order():
    def slow(i):
        time.sleep(0.01 * (5 - i))
        return i * i

    assert parallel_map(slow, range(5), threads=4) == [0, 1, 4, 9, 16]
    assert parallel_map(slow, range(5), threads=1) == [0, 1, 4, 9, 16]


def test_task_rng_streams():
    a = task_rng(7, 1).random(3)
    assert task_rng(7, 1).random(3).tolist() == a.tolist()
    assert task_rng(7, 2).random(3).tolist() != a.tolist()
    assert task_rng(8, 1).random(3).tolist() != a.tolist()
