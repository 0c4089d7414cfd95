from pathlib import Path

import numpy as np
import pytest

from alignflow.cli import main
from alignflow.config import (OUTPUT_ROOT_ENV, bundled_scenarios, load_bundled, load_manifest,
                              parse_manifest, resolve)
from alignflow.errors import AdmissibilityViolation, ConfigParse
from alignflow.kernels import KernelSpec
from alignflow.metrics import FRAME_COLUMNS
from alignflow.runs import read_frames, read_header

SMALL = """
name = "small"
seed = 3
n = 12
output_dir = "runs/small"

[kernel]
family = "bounded_band"
psi_min = 2.5
psi_max = 3.0
radius = 4.0

[potential]
family = "quadratic"
lam = 1.0
dim = 1

[initial]
kind = "density_quantiles"
density = "uniform"
support = [-1.0, 1.0]

[initial.velocity]
kind = "sine"
amplitude = 0.5
wavenumber = 2.0

[sim]
t_final = 6.0
record_interval = 0.05
"""


@pytest.fixture
def root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "out"))
    return tmp_path


def write(path, text):
    path.write_text(text)
    return path


def test_bundled_scenarios_parse():
    names = bundled_scenarios()
    assert {"thm1-bounded", "thm1-singular", "thm2-bounded", "thm2-singular",
            "thm3-bounded", "thm3-singular"} <= set(names)
    for name in names:
        m = load_bundled(name)
        assert m.name == name and m.n == 64 and len(m.digest) == 16


def test_manifest_fields_and_digest(root):
    m = load_manifest(write(root / "a.toml", SMALL))
    assert m.n == 12 and m.seed == 3 and m.sim.t_final == 6.0
    assert isinstance(m.kernel, KernelSpec)
    again = load_manifest(write(root / "b.toml", SMALL.replace("seed = 3", "seed = 3  # same")))
    assert again.digest == m.digest
    other = load_manifest(write(root / "c.toml", SMALL.replace("seed = 3", "seed = 4")))
    assert other.digest != m.digest


def test_output_root_override(root):
    m = load_manifest(write(root / "a.toml", SMALL))
    assert m.output_path(None) == root / "out" / "runs" / "small"
    assert m.output_path(str(root / "elsewhere")) == root / "elsewhere"


@pytest.mark.parametrize("edit", [
    lambda s: s.replace('family = "bounded_band"', 'family = "gaussian"'),
    lambda s: s.replace('family = "quadratic"', 'family = "morse"'),
    lambda s: s.replace("t_final = 6.0", "t_final = 6.0\nwobble = 1"),
    lambda s: s.replace("[kernel]", "[kernal]"),
    lambda s: s + "\n[[[",
])
def test_bad_manifests(root, edit):
    with pytest.raises(ConfigParse):
        load_manifest(write(root / "bad.toml", edit(SMALL)))


def test_missing_file_and_unknown_name(root):
    with pytest.raises(ConfigParse):
        load_manifest(root / "nope.toml")
    with pytest.raises(ConfigParse):
        resolve("no-such-scenario")


def test_inadmissible_weights(root):
    text = SMALL + "\n[diagnostics]\nzeta = 50.0\n"
    with pytest.raises(AdmissibilityViolation):
        load_manifest(write(root / "z.toml", text))
    assert main(["simulate", str(root / "z.toml")]) == 3


def test_simulate_outputs_and_headers(root, capsys):
    cfg = write(root / "a.toml", SMALL)
    assert main(["simulate", str(cfg)]) == 0
    out = root / "out" / "runs" / "small"
    digest = load_manifest(cfg).digest
    for name in ("frames.csv", "final_state.csv"):
        head = read_header(out / name)
        assert head["alignflow"] and head["manifest"] == digest and head["seed"] == "3"
    text = (out / "manifest.toml").read_text()
    assert f"# manifest {digest}" in text
    frames = read_frames(out / "frames.csv")
    assert list(frames) == list(FRAME_COLUMNS)
    assert frames["t"][0] == 0.0 and frames["t"][-1] == pytest.approx(6.0)
    # the echoed manifest runs as is and reproduces the hash
    assert load_manifest(out / "manifest.toml").digest == digest


def test_repeat_simulation_is_byte_identical(root):
    cfg = write(root / "a.toml", SMALL)
    assert main(["simulate", str(cfg), "--out", str(root / "r1")]) == 0
    assert main(["simulate", str(cfg), "--out", str(root / "r2")]) == 0
    for name in ("frames.csv", "final_state.csv", "manifest.toml"):
        assert (root / "r1" / name).read_bytes() == (root / "r2" / name).read_bytes()


def test_position_diameter_tail_decreases(root):
    assert main(["simulate", "thm1-bounded", "--out", str(root / "t1")]) == 0
    frames = read_frames(root / "t1" / "frames.csv")
    tail = frames["D_eta"][frames["t"] >= 6.0]
    assert np.all(np.diff(tail) < 0)


def test_simulation_failure_exit_code(root, capsys):
    text = SMALL.replace('family = "bounded_band"\npsi_min = 2.5\npsi_max = 3.0\nradius = 4.0',
                         'family = "constant"\nvalue = 0.01').replace("lam = 1.0", "lam = 400.0")
    assert main(["simulate", str(write(root / "u.toml", text))]) == 1
    assert "simulation" in capsys.readouterr().err


def synthetic_frames(path, t, columns):
    lines = ["# alignflow 0.1.0", "# manifest abc123", "# seed 9", ",".join(["t"] + list(columns))]
    for k in range(len(t)):
        lines.append(",".join(repr(float(v)) for v in [t[k]] + [c[k] for c in columns.values()]))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_fit_command(root, capsys):
    t = np.linspace(0, 10, 200)
    src = synthetic_frames(root / "frames.csv", t, {"E": np.exp(-2 * t), "flat": np.ones_like(t),
                                                    "P": (1 + t) ** -2.0})
    assert main(["fit", str(src), "--column", "E", "--law", "exp"]) == 0
    fit = (root / "fit.csv").read_text()
    assert "# manifest abc123" in fit and "# seed 9" in fit
    value = float([ln for ln in fit.splitlines() if ln.startswith("value,")][0].split(",")[1])
    assert abs(value - 2.0) < 1e-9
    assert main(["fit", str(src), "--column", "E"]) == 0
    assert main(["fit", str(src), "--column", "flat"]) == 4
    assert main(["fit", str(src), "--column", "nope"]) == 2
    assert main(["fit", str(root / "missing.csv"), "--column", "E"]) == 2


def test_export_plot(root):
    t = np.linspace(0, 10, 200)
    src = synthetic_frames(root / "frames.csv", t, {"E": 3 * np.exp(-t)})
    assert main(["export-plot", str(src), "--spec", "E"]) == 0
    plain = read_frames(root / "plot-E.csv")
    assert list(plain) == ["t", "value", "log_t", "log_value"]
    svg = root / "E.svg"
    assert main(["export-plot", str(src), "--spec", "E:exp", "--out", str(root / "p.csv"),
                 "--svg", str(svg)]) == 0
    fitted = read_frames(root / "p.csv")
    assert list(fitted) == ["t", "value", "log_t", "log_value", "envelope", "log_envelope"]
    np.testing.assert_allclose(fitted["envelope"], 3 * np.exp(-t), rtol=1e-8)
    assert read_header(root / "p.csv")["manifest"] == "abc123"
    assert svg.read_text().startswith("<svg") and "polyline" in svg.read_text()
    assert main(["export-plot", str(src), "--spec", "E:cubic"]) == 2


def test_verify_unknown_suite_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["verify", "nonsense"])
    assert info.value.code == 2


def test_verify_writes_report(root, monkeypatch):
    import alignflow.verify as verify

    def fake_suite(name, emit=print):
        res = verify.CriterionResult(12, "stub", True, {"x": 1.0}, {"x": 1.0}, 0.0, "")
        emit(res.line())
        return [res]

    monkeypatch.setattr(verify, "run_suite", fake_suite)
    assert main(["verify", "lemmas"]) == 0
    report = root / "out" / "reports" / "verify-lemmas.txt"
    assert "PASS criterion 12" in report.read_text()
