import csv
import json

import numpy as np
import pytest

from anomwalk.cli import ConfigError, main, parse_config


def run(tmp_path, command, text, name="s.cfg"):
    cfg = tmp_path / name
    cfg.write_text(text + f"\noutput = {tmp_path / 'out'}\n")
    return main([command, str(cfg)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_writes_graph_and_diagnostics(tmp_path):
    assert run(tmp_path, "gen", "family = sierpinski_gasket\nlevel = 3") == 0
    text = (tmp_path / "out" / "graph.txt").read_text()
    lines = text.splitlines()
    assert lines[0] == "vertices 42" and len(lines) == 1 + 81
    info = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert info["vertices"] == 42 and info["edges"] == 81 and info["is_tree"] is False
    assert run(tmp_path, "gen", "family = sierpinski_gasket\nlevel = 3") == 0
    assert (tmp_path / "out" / "graph.txt").read_text() == text


def test_gen_vicsek_tree(tmp_path):
    assert run(tmp_path, "gen", "family = vicsek_tree\nlevel = 2") == 0
    info = json.loads((tmp_path / "out" / "diagnostics.json").read_text())
    assert info["is_tree"] is True and info["vertices"] == 101


@pytest.mark.parametrize(
    "text",
    ["family = sierpinski_gasket\nlevel = -1", "family = koch\nlevel = 2", "level = many",
     "kernel = warp", "colour = blue", "gamma = 1.5", "kernel = stable\nbeta0 = 1.0",
     "checks = threshold, vibes", "level = 14"],
)
def test_config_errors_exit_2(tmp_path, text, capsys):
    assert run(tmp_path, "gen", text) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_and_bad_command(tmp_path):
    assert main(["gen", str(tmp_path / "nope.cfg")]) == 2
    assert main(["explode", "x"]) == 2


def test_parse_config_alias_and_comments():
    cfg = parse_config("kernel = jump  # long range\nlambda = -1.5\nchecks = threshold,nash")
    assert cfg.log_exponent == -1.5 and cfg.checks == ("threshold", "nash")
    with pytest.raises(ConfigError):
        parse_config("perturb = maybe")


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ANOMWALK_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = tmp_path / "s.cfg"
    cfg.write_text("family = path\nlevel = 16\n")
    assert main(["gen", str(cfg)]) == 0
    assert (tmp_path / "env" / "graph.txt").exists()


PSI_CFG = "family = sierpinski_gasket\nlevel = 5\nkernel = lazy\nn_min = 0\n"


def test_psi_curve(tmp_path):
    assert run(tmp_path, "psi", PSI_CFG) == 0
    rows = read_csv(tmp_path / "out" / "psi.csv")
    assert list(rows[0]) == ["n", "psi", "V_of_zeta", "ratio", "flag_boundary", "base_vertex_argmax"]
    assert rows[0]["n"] == "0"
    for r in rows:
        assert float(r["ratio"]) == pytest.approx(float(r["psi"]) * float(r["V_of_zeta"]), rel=1e-15)
        assert r["flag_boundary"] == "0"
    psi = np.array([float(r["psi"]) for r in rows])
    assert np.all(np.diff(psi) <= 0)
    first = (tmp_path / "out" / "psi.csv").read_bytes()
    assert run(tmp_path, "psi", PSI_CFG) == 0
    assert (tmp_path / "out" / "psi.csv").read_bytes() == first


def test_psi_workers_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert run(a, "psi", PSI_CFG + "workers = 1") == 0
    assert run(b, "psi", PSI_CFG + "workers = 3") == 0
    assert (a / "out" / "psi.csv").read_bytes() == (b / "out" / "psi.csv").read_bytes()


def test_psi_unsafe_window(tmp_path, capsys):
    assert run(tmp_path, "psi", PSI_CFG + "n_max = 100000") == 2
    assert "safe" in capsys.readouterr().err


def test_psi_stable_and_dump(tmp_path):
    text = "family = sierpinski_gasket\nlevel = 3\nkernel = stable\nbeta0 = 0.6\nt = 1\ndump_kernel = true"
    assert run(tmp_path, "psi", text) == 0
    out = tmp_path / "out"
    assert read_csv(out / "pmf.csv")[0]["i"] == "0"
    assert (out / "eta.csv").exists()
    head = (out / "kernel.txt").read_text().splitlines()[:3]
    assert head[0] == "# size 42" and head[2].startswith("# measure_sha256 ")


def test_verify_exit_codes(tmp_path, capsys):
    ok = "family = sierpinski_gasket\nlevel = 5\nkernel = jump\nbeta = 1.5\nchecks = dircomp, noninc"
    assert run(tmp_path, "verify", ok) == 0
    reports = json.loads((tmp_path / "out" / "reports.json").read_text())
    assert [r["inequality_id"] for r in reports] == ["dircomp", "noninc"]
    assert all(r["pass"] for r in reports)
    bad = ok.replace("dircomp, noninc", "threshold") + "\nband_tol = 1.0001"
    assert run(tmp_path, "verify", bad) == 1
    assert "threshold" in capsys.readouterr().err


def test_fit_synthetic(tmp_path):
    n = np.arange(1, 41)
    curve = tmp_path / "c.csv"
    curve.write_text("n,psi\n" + "".join(f"{k},{float(1.0 / k)!r}\n" for k in n))
    assert run(tmp_path, "fit", f"family = path\nlevel = 64\ncurve = {curve}") == 0
    fit = json.loads((tmp_path / "out" / "fit.json").read_text())
    assert fit["slope"]["value"] == pytest.approx(-1.0, abs=1e-3)
    short = tmp_path / "short.csv"
    short.write_text("n,psi\n1,1\n2,0.5\n")
    assert run(tmp_path, "fit", f"curve = {short}") == 2


@pytest.mark.slow
@pytest.mark.parametrize("beta,regime", [(1.0, "beta<gamma"), (4.0, "beta>gamma")])
def test_fit_gasket_regimes(tmp_path, beta, regime):
    text = (f"family = sierpinski_gasket\nlevel = 6\nkernel = jump\nbeta = {beta}\n"
            "method = spectral\nn_points = 40")
    assert run(tmp_path, "psi", text) == 0
    assert run(tmp_path, "fit", text) == 0
    assert json.loads((tmp_path / "out" / "fit.json").read_text())["regime"] == regime


def test_report_summary(tmp_path):
    assert run(tmp_path, "report", "family = path\nlevel = 8") == 2
    text = "family = sierpinski_gasket\nlevel = 4\nkernel = lazy\nchecks = noninc"
    assert run(tmp_path, "verify", text) == 0
    assert run(tmp_path, "report", text) == 0
    rows = read_csv(tmp_path / "out" / "summary.csv")
    assert rows[0]["id"] == "noninc" and rows[0]["status"] == "pass"
