import json

import pytest

from amoebakit import __version__, create_run
from amoebakit.errors import UsageError


def test_create_run_prepares_output(tmp_path):
    out = tmp_path / "nested" / "out"
    run = create_run(command="ronkin", out_dir=str(out), seed=5)
    assert out.is_dir()
    path = run.save("summary.json", "{}\n")
    meta = json.loads((out / "summary.json.meta.json").read_text())
    assert path == str(out / "summary.json")
    assert meta == {"config_hash": run.config.hash(), "seed": 5, "version": __version__, "command": "ronkin"}


def test_seed_is_part_of_the_config_hash(tmp_path):
    a = create_run(out_dir=str(tmp_path), seed=11).config.hash()
    b = create_run(out_dir=str(tmp_path), seed=12).config.hash()
    assert a != b


def test_out_dir_must_be_a_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(UsageError):
        create_run(out_dir=str(blocker / "sub"))


def test_wrongly_typed_config_value(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"grid_h": "x", "out_dir": str(tmp_path)}))
    with pytest.raises(UsageError, match="grid_h|malformed"):
        create_run(str(cfg))
