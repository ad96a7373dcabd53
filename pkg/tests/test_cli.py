import csv
import json

import pytest

from nodaltube import __version__
from nodaltube.cli import (EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, config_hash,
                           load_config, main, qer_family)


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_solve_writes_hashed_csv_and_stable_manifest(tmp_path):
    cfg = {"pairs": [[1, 1], [2, 1]], "nq": 128}
    path = _write(tmp_path, cfg)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["solve", "--config", path, "--out", str(out)]) == EXIT_OK
        outs.append(out)
    head, rows = _read_csv(outs[0] / "eigenvalues.csv")
    assert head == f"# config_hash={config_hash(load_config(path))} version={__version__}"
    assert [r["label"] for r in rows] == ["1-1", "2-1"]
    assert float(rows[0]["lambda"]) == pytest.approx(1.841183781340659, abs=1e-9)
    m0 = (outs[0] / "manifest.json").read_text()
    assert m0 == (outs[1] / "manifest.json").read_text()
    assert set(json.loads(m0)["files"]) >= {"eigenvalues.csv", "pair_0000.json"}


def test_config_errors(tmp_path):
    cases = [
        {"bc": "robin"},
        {"eps": -1.0},
        {"window": [3.0, 2.0]},
        {"window": [2.0, 3.0], "pairs": [[1, 1]]},
        {"pairs": [[0, 1]]},
        {"domain": {"kind": "triangle"}, "window": [2.0, 3.0]},
    ]
    for k, cfg in enumerate(cases):
        path = _write(tmp_path, cfg, f"c{k}.json")
        assert main(["solve", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG, cfg
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_strip_violation_is_config_error(tmp_path):
    cfg = {"pairs": [[1, 1]], "nq": 128, "eps": 0.9}
    path = _write(tmp_path, cfg)
    assert main(["count", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    # a strip wider than the branch-cut-free region of the complexified distance
    cfg = {"interior": {"kind": "circle", "radius": 0.3}, "weight": {"n_re": 8, "im": [3.0]}}
    path = _write(tmp_path, cfg)
    assert main(["weight", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_count_reports_chain_failure(tmp_path):
    cfg = {"pairs": [[1, 1]], "nq": 128}
    path = _write(tmp_path, cfg)
    out = tmp_path / "o"
    assert main(["count", "--config", path, "--out", str(out)]) == EXIT_INVARIANT
    _, rows = _read_csv(out / "count.csv")
    assert len(rows) == 1 and rows[0]["chain_holds"] == "false"
    assert int(rows[0]["n_real"]) <= int(rows[0]["n_complex"])


def test_count_on_empty_window(tmp_path):
    cfg = {"window": [2.5, 2.6], "bc": "dirichlet", "nq": 128}
    path = _write(tmp_path, cfg)
    out = tmp_path / "o"
    assert main(["count", "--config", path, "--out", str(out)]) == EXIT_OK
    head, rows = _read_csv(out / "count.csv")
    assert head.startswith("# config_hash=") and rows == []
    assert (out / "count.csv").read_text().splitlines()[1] == (
        "lambda,n_real,n_complex,two_F,ratio_over_h,chain_holds")


def test_qer_with_zero_cutoff(tmp_path):
    cfg = {"qer": {"cutoff": "zero", "m": [10], "sigma0": 0.45}}
    path = _write(tmp_path, cfg)
    out = tmp_path / "o"
    assert main(["qer", "--config", path, "--out", str(out)]) == EXIT_OK
    _, rows = _read_csv(out / "qer.csv")
    assert len(rows) == 1
    for key in ("lhs", "rhs", "liouville_limit"):
        assert float(rows[0][key]) == 0.0


def test_qer_family_selects_closest_ratio():
    fam = qer_family({"sigma0": 0.5, "m": [10, 20]})
    for m, n, lam in fam:
        assert abs(m / lam - 0.5) < 0.05


def test_stadium_qer_requires_long_running(tmp_path):
    cfg = {"domain": {"kind": "stadium"}, "qer": {"sigma0": 0.5}}
    path = _write(tmp_path, cfg)
    assert main(["qer", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_weight_and_decay_outputs(tmp_path):
    cfg = {"interior": {"kind": "circle", "radius": 0.3},
           "weight": {"n_re": 16, "im": [0.02, 0.05]},
           "decay": {"lam_range": [10.0, 30.0]}, "radii": [4.0, 8.0]}
    path = _write(tmp_path, cfg)
    out = tmp_path / "o"
    assert main(["weight", "--config", path, "--out", str(out)]) == EXIT_OK
    _, rows = _read_csv(out / "weight.csv")
    assert len(rows) == 32
    for r in rows:
        # near the real axis the weight approaches its quadratic asymptotics
        assert float(r["S"]) == pytest.approx(float(r["S_asymptotic"]), rel=0.2)
    assert main(["decay", "--config", path, "--out", str(out)]) == EXIT_OK
    _, rows = _read_csv(out / "decay.csv")
    c = {float(r["R"]): float(r["c_R"]) for r in rows}
    assert c[8.0] > c[4.0] > 0
