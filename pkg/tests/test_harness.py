import json

import numpy as np
import pytest
import yaml

from stablespde.harness import cli
from stablespde.harness.cli import EXIT_CONFIG, EXIT_OK, execute, main, replay
from stablespde.harness.config import load_config, parse_config, shipped_scenario
from stablespde.harness.experiments import EXPERIMENTS, resolve_settings
from stablespde.harness.store import npz_bytes, read_csv

SMALL = {
    "noise_calibration": {"dims": [4], "n_samples": 20_000, "n_probes": 4, "lepage": True,
                          "tail_paths": 2000, "scaling_operators": 1},
    "lyapunov_certify": {"T": 1.0, "n_cells": 64, "n_paths": 300, "t_points": 5,
                         "n_sobol": 64, "n_visited": 50},
    "fubini": {"dim": 4, "levels": [16, 32, 64], "n_paths": 20},
}


def _quiet(*args, **kwargs):
    pass


def small_config(experiments=SMALL, **changes):
    raw = yaml.safe_load(shipped_scenario("heat").read_text())
    raw["model"]["dim"] = 4
    raw["scheme"]["n_cells"] = 32
    raw["experiments"] = experiments
    raw.update(changes)
    return raw


def write_config(tmp_path, raw, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg_path = write_config(root, small_config())
    code, manifest = execute(load_config(cfg_path), list(SMALL), root / "out", log=_quiet)
    return root / "out", code, manifest


def test_shipped_scenario_validates(capsys):
    assert main(["validate", str(shipped_scenario("heat"))]) == EXIT_OK
    assert "ok: heat" in capsys.readouterr().out
    cfg = load_config(shipped_scenario("heat"))
    assert set(cfg.experiments) == set(EXPERIMENTS)


def test_list_names_every_experiment(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)


@pytest.mark.parametrize("change, fragment", [
    ({"alpha": 2.5}, "alpha"),
    ({"bogus": 1}, "bogus"),
    ({"seed": -3}, "seed"),
    ({"experiments": ["no_such_experiment"]}, "no_such_experiment"),
    ({"experiments": {"fubini": {"walltime": 3}}}, "walltime"),
    ({"scheme": {"n_cells": 32, "noise_mode": "telepathic"}}, "noise_mode"),
])
def test_config_errors_exit_2(tmp_path, capsys, change, fragment):
    path = write_config(tmp_path, small_config(**change))
    assert main(["validate", str(path)]) == EXIT_CONFIG
    assert fragment in capsys.readouterr().err
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_config_errors_are_collected(tmp_path, capsys):
    path = write_config(tmp_path, small_config(alpha=3.0, bogus=1, seed=-1))
    assert main(["validate", str(path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "bogus" in err and "seed" in err


def test_missing_and_malformed_files_exit_2(tmp_path):
    assert main(["validate", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("alpha: [1.5\n")
    assert main(["validate", str(bad)]) == EXIT_CONFIG


def test_unknown_experiment_on_the_command_line(tmp_path):
    path = write_config(tmp_path, small_config())
    assert main(["run", str(path), "--out", str(tmp_path / "o"),
                 "--experiment", "nope"]) == EXIT_CONFIG


def test_empty_experiment_list_writes_only_the_manifest(tmp_path):
    path = write_config(tmp_path, small_config(experiments=[]))
    out = tmp_path / "o"
    assert main(["run", str(path), "--out", str(out)]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["experiments"] == {}
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "scenario.yaml"]


def test_settings_resolution():
    st = resolve_settings("fubini", {"dim": 3}, n_paths=7)
    assert st["dim"] == 3 and st["n_paths"] == 7
    assert st["levels"] == EXPERIMENTS["fubini"].defaults["levels"]


def test_run_outputs_and_manifest(small_run):
    out, code, man = small_run
    assert code == EXIT_OK, man["experiments"]
    for f in man["outputs"]:
        assert (out / f).is_file()
    assert not list(out.rglob("*.tmp"))
    for name in SMALL:
        entry = man["experiments"][name]
        assert entry["status"] == "passed"
        rows = read_csv(out / name / "checks.csv")
        assert rows and all(r["pass"] in ("true", "false") for r in rows)


def test_noise_calibration_records_constant_provenance(small_run):
    out, _, _ = small_run
    rec = json.loads((out / "noise_calibration" / "record.json").read_text())
    const = rec["records"]["constants"]["1.5"]
    assert const["c_alpha"]["method"] and const["c_alpha"]["date"]
    lep = const["lepage_scale"]["4"]
    assert lep["value"] > 0 and lep["sample_size"] == 20_000 and lep["method"]


def test_certificate_table_has_every_grid_time(small_run):
    out, _, _ = small_run
    rows = read_csv(out / "lyapunov_certify" / "certificate.csv")
    np.testing.assert_allclose([float(r["t"]) for r in rows], np.linspace(0, 1, 5))
    assert {"estimate", "bound", "pass"} <= set(rows[0])
    assert all(r["pass"] == "true" for r in rows)


def test_replay_is_bit_identical(small_run, tmp_path):
    out, _, _ = small_run
    logs = []
    code = replay(out / "manifest.json", tmp_path / "r",
                  log=lambda *a, **k: logs.append(" ".join(map(str, a))))
    assert code == EXIT_OK, logs
    assert any("bit-identical" in line for line in logs)


def test_replay_with_another_seed_is_compatible(small_run, tmp_path):
    out, _, man = small_run
    logs = []
    code = replay(out / "manifest.json", tmp_path / "r", seed=man["seed_root"] + 1,
                  log=lambda *a, **k: logs.append(" ".join(map(str, a))))
    assert code == EXIT_OK, logs
    assert any("statistically compatible" in line for line in logs)
    a = read_csv(out / "lyapunov_certify" / "certificate.csv")
    b = read_csv(tmp_path / "r" / "lyapunov_certify" / "certificate.csv")
    assert [r["estimate"] for r in a] != [r["estimate"] for r in b]


def test_replay_refusals(small_run, tmp_path):
    out, _, man = small_run
    assert replay(tmp_path / "none.json", log=_quiet) == EXIT_CONFIG
    # a recorded output directory is gone
    broken = tmp_path / "broken"
    broken.mkdir()
    (broken / "manifest.json").write_text(json.dumps(man))
    assert replay(broken / "manifest.json", log=_quiet) == EXIT_CONFIG
    # recorded library versions differ from the installed ones
    old = tmp_path / "old"
    old.mkdir()
    for f in man["outputs"]:
        (old / f).parent.mkdir(parents=True, exist_ok=True)
        (old / f).write_bytes((out / f).read_bytes())
    stale = {**man, "versions": {**man["versions"], "numpy": "0.0.1"}}
    (old / "manifest.json").write_text(json.dumps(stale))
    assert replay(old / "manifest.json", log=_quiet) == EXIT_CONFIG
    # the scenario copy was edited after the run
    (old / "manifest.json").write_text(json.dumps(man))
    raw = yaml.safe_load((old / "scenario.yaml").read_text())
    raw["alpha"] = 1.4
    (old / "scenario.yaml").write_text(yaml.safe_dump(raw))
    assert replay(old / "manifest.json", log=_quiet) == EXIT_CONFIG


def test_in_memory_config_replays(tmp_path):
    cfg = parse_config(small_config(experiments={"fubini": SMALL["fubini"]}))
    code, man = execute(cfg, ["fubini"], tmp_path / "o", log=_quiet)
    assert code == EXIT_OK
    assert replay(tmp_path / "o" / "manifest.json", log=_quiet) == EXIT_OK


def test_npz_bytes_are_deterministic():
    arrays = {"b": np.arange(5.0), "a": np.eye(2)}
    assert npz_bytes(arrays) == npz_bytes(dict(reversed(arrays.items())))


def test_failed_atomic_write_leaves_no_temporary(tmp_path, monkeypatch):
    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.store.os, "replace", boom)
    with pytest.raises(OSError):
        cli.store.atomic_write(tmp_path / "x.csv", b"data")
    assert list(tmp_path.iterdir()) == []
