import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mwlab.cli import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    ExperimentConfig,
    main,
    parse_inf,
    run,
    validate,
)
from mwlab.dyadic_grid import DyadicInterval, SparseCollection
from mwlab.weight_store import random_weight

ENGINES = {"hermitian_core", "convex_geometry", "dyadic_grid", "weight_store", "characteristics",
           "sparse_engine", "extrapolation_calc", "kernels"}

SMALL = {
    "char": {"resolution": 3, "characteristics": ["apq:2:3", "ainf:3", "rh:2:2", "a1"]},
    "counterexample": {"depths": [2, 4], "widths": [1, 2]},
    "cordes": {"pairs": 20, "gap_n": [10, 100]},
    "john": {"bodies": 3, "directions": 64},
    "sparse-form": {"seeds": [0], "dims": [1, 2], "depths": [2, 3], "resolution": 3},
    "exponents": {"p0": 1.2, "q0": 8, "p": 2},
    "rdf-demo": {"level": 3, "k_max": 8, "probes": 4, "starts": 2, "directions": 16},
    "verify-sparse": {"depth": 5},
}


def invoke(tmp_path, command, *args):
    return main([command, "--out", str(tmp_path), *args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("command", sorted(SMALL))
def test_every_subcommand_runs(tmp_path, command):
    cfg = ExperimentConfig(command, dict(SMALL[command]), seed=1, out=str(tmp_path))
    assert run(cfg) == EXIT_OK
    summary = json.loads((tmp_path / f"{command}.json").read_text())
    assert summary["exit_code"] == 0
    assert summary["config"]["command"] == command
    for fname in summary["artifacts"].values():
        rows = read_csv(tmp_path / fname)
        assert rows
        # every numeric column names the engine operation behind it
        sources = summary["operations"][fname]
        for op in sources.values():
            for name in [op] if isinstance(op, str) else op:
                module, _, func = name.partition(".")
                assert module in ENGINES and func, name


def test_exponents_prints_alpha(tmp_path, capsys):
    assert invoke(tmp_path, "exponents", "--set", "p0=1", "--set", "q0=inf", "--set", "p=2") == EXIT_OK
    assert "alpha = 1.5" in capsys.readouterr().out
    rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "exponents.csv")}
    assert float(rows["alpha"]) == 1.5
    assert rows["q0"] == "inf"


def test_char_identity_prints_ones(tmp_path, capsys):
    code = invoke(tmp_path, "char", "--set", "identity=2", "--set", "resolution=2",
                  "--set", 'characteristics=["apq:2:2", "apq:1.5:3", "ainf:2", "rh:2:3", "a1"]')
    assert code == EXIT_OK
    lines = [ln for ln in capsys.readouterr().out.splitlines() if " = " in ln]
    assert len(lines) == 5
    for ln in lines:
        assert float(ln.split(" = ")[1]) == pytest.approx(1.0, abs=1e-12)


def test_counterexample_constraint_violation_is_config_error(tmp_path, capsys):
    assert invoke(tmp_path, "counterexample", "--set", "q2=2") == EXIT_CONFIG
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["status"] == "error" and diag["stage"] == "config"
    assert not (tmp_path / "counterexample.csv").exists()


def test_verify_sparse_failure_exit_code(tmp_path):
    S = SparseCollection([DyadicInterval(0, 0), DyadicInterval(1, 0), DyadicInterval(1, 1)], 0.5)
    S.save(tmp_path / "fam.json")
    # each child gives up half of itself to the root, so 1/2 is attainable and 0.6 is not
    assert invoke(tmp_path, "verify-sparse", "--set", f"family={tmp_path / 'fam.json'}") == EXIT_OK
    assert invoke(tmp_path, "verify-sparse", "--set", f"family={tmp_path / 'fam.json'}", "--set", "eps=0.6") == EXIT_CHECK
    assert invoke(tmp_path, "verify-sparse", "--set", "eps=1") == EXIT_CHECK
    assert invoke(tmp_path, "verify-sparse") == EXIT_OK


def test_byte_identical_csv(tmp_path):
    for command in ("sparse-form", "john", "char"):
        outs = []
        for k in range(2):
            d = tmp_path / f"{command}{k}"
            assert run(ExperimentConfig(command, dict(SMALL[command]), seed=7, out=str(d))) == EXIT_OK
            outs.append(sorted((p.name, p.read_bytes()) for p in d.glob("*.csv")))
        assert outs[0] == outs[1]


def test_seed_changes_output(tmp_path):
    texts = []
    for seed in (1, 2):
        d = tmp_path / str(seed)
        run(ExperimentConfig("john", dict(SMALL["john"]), seed=seed, out=str(d)))
        texts.append((d / "john.csv").read_bytes())
    assert texts[0] != texts[1]


def test_config_file_roundtrip_and_flags(tmp_path):
    cfg = ExperimentConfig("exponents", {"p0": 1.0, "q0": math.inf, "p": 3.0}, seed=5, out="x", threads=2)
    text = cfg.dumps()
    assert '"inf"' in text
    back = ExperimentConfig.loads(text)
    assert back == cfg
    path = tmp_path / "cfg.json"
    path.write_text(text)
    assert main(["exponents", "--config", str(path), "--out", str(tmp_path), "--seed", "9"]) == EXIT_OK
    summary = json.loads((tmp_path / "exponents.json").read_text())
    assert summary["config"]["seed"] == 9
    assert summary["config"]["params"]["q0"] == "inf"
    assert summary["resolved_params"] == {"p0": 1.0, "q0": "inf", "p": 3.0, "q": None}


@pytest.mark.parametrize("text", ["inf", "+inf", "Infinity", " ∞ "])
def test_inf_spellings(text):
    assert parse_inf(text) == math.inf
    assert parse_inf({"a": [text, "-inf", "x"]}) == {"a": [math.inf, -math.inf, "x"]}


@pytest.mark.parametrize(
    "command,params",
    [
        ("nope", {}),
        ("exponents", {"p0": 2, "q0": 4, "p": 5}),
        ("exponents", {"p0": "two"}),
        ("exponents", {"bogus": 1}),
        ("sparse-form", {"dims": [0]}),
        ("john", {"directions": 30}),
        ("rdf-demo", {"level": 12}),
        ("char", {"characteristics": ["apq:2"]}),
        ("verify-sparse", {"eps": 1.5}),
    ],
)
def test_config_errors_exit_3(tmp_path, command, params):
    assert run(ExperimentConfig(command, params, out=str(tmp_path))) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command, params))


def test_bad_config_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["exponents", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text(json.dumps({"command": "john", "params": {}}))
    assert main(["exponents", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text(json.dumps({"command": "exponents", "extra": 1}))
    assert main(["exponents", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["exponents", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["exponents", "--set", "novalue"]) == EXIT_CONFIG


def test_char_reads_weight_file(tmp_path, capsys):
    W = random_weight(2, 3, 0.7, seed=4)
    W.save(tmp_path / "w.json")
    assert invoke(tmp_path, "char", "--set", f"weight={tmp_path / 'w.json'}", "--set", 'characteristics=["apq:2:2"]') == EXIT_OK
    assert invoke(tmp_path, "char", "--set", f"weight={tmp_path / 'nowhere.json'}") == EXIT_CONFIG


def test_cordes_writes_gap_table(tmp_path):
    assert run(ExperimentConfig("cordes", dict(SMALL["cordes"]), out=str(tmp_path))) == EXIT_OK
    gaps = read_csv(tmp_path / "cordes_gap.csv")
    assert len(gaps) == 6  # three exponents, two sizes
    for r in gaps:
        assert float(r["trace"]) > 0
        assert float(r["normalized"]) == pytest.approx(float(r["trace"]) / float(r["n"]) ** (float(r["a"]) - 1))


def test_rdf_trace_columns(tmp_path):
    assert run(ExperimentConfig("rdf-demo", dict(SMALL["rdf-demo"]), out=str(tmp_path))) == EXIT_OK
    rows = read_csv(tmp_path / "rdf-demo.csv")
    assert list(rows[0]) == ["k", "norm_PkG", "cumulative_norm", "worst_containment_slack"]
    assert len(rows) == 9
    cum = np.array([float(r["cumulative_norm"]) for r in rows])
    assert np.all(np.diff(cum) >= -1e-12)


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mwlab.cli", "exponents", "--out", str(tmp_path), "--threads", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "alpha = 1.5" in proc.stdout
