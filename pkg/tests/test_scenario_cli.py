import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from corridors.cli import main
from corridors.scenario import (
    CheckFailure,
    ConfigError,
    RunManifest,
    emit_plot_data,
    file_sha256,
    load_config,
    run_scenario,
)

BASE = """
[grid]
extent = 10.0
n_points = 16

[time]
duration = 0.6
n_steps = 12

[physics]
mass = 1.0
hbar = 1.0
potential = free

[state]
center = 0.5
width = 1.2
momentum = 0.3

[measurement]
kappa = 0.9
observable = position

[resolution]
kind = delta

[run]
seed = 11
"""


def write_scenario(tmp_path, text=BASE, name="scene.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_config_fields(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    assert cfg.sgrid.n_points == 16 and cfg.sgrid.extent == 10.0
    assert cfg.tgrid.n_steps == 12
    assert cfg.meas.kappa == 0.9
    assert cfg.form.is_delta
    assert cfg.seed == 11
    assert cfg.center == 0.5 and cfg.momentum == 0.3
    assert cfg.outdir == tmp_path / "scene_out"
    assert cfg.snapshot["measurement"]["kappa"] == "0.9"


def test_error_width_sets_strength(tmp_path):
    text = BASE.replace("kappa = 0.9", "error_width = 0.5")
    cfg = load_config(write_scenario(tmp_path, text))
    assert_allclose(cfg.meas.kappa, 1.0 / (0.6 * 0.25), rtol=1e-12)


def test_defaults_and_overrides(tmp_path):
    minimal = """
[grid]
extent = 8.0
n_points = 8
[time]
duration = 0.4
n_steps = 4
[measurement]
kappa = 1.0
[run]
seed = 3
outdir = results
"""
    cfg = load_config(write_scenario(tmp_path, minimal))
    assert cfg.width == 1.0  # extent / 8
    assert cfg.ham.mass == 1.0
    assert cfg.outdir == tmp_path / "results"
    assert cfg.form.is_delta  # resolution section optional


@pytest.mark.parametrize(
    "mangle, hint",
    [
        (lambda s: s.replace("[measurement]", "[measurementx]"), "measurement"),
        (lambda s: s.replace("kappa = 0.9", ""), "kappa"),
        (lambda s: s.replace("kappa = 0.9", "kappa = 0.9\nerror_width = 0.5"), "exactly one"),
        (lambda s: s.replace("kappa = 0.9", "kappa = nope"), "kappa"),
        (lambda s: s.replace("n_points = 16", "n_points = 12"), "grid"),
        (lambda s: s.replace("potential = free", "potential = cubic"), "potential"),
        (lambda s: s.replace("kind = delta", "kind = boxcar"), "resolution"),
        (lambda s: s.replace("kind = delta", "kind = gaussian"), "tau"),
        (lambda s: s.replace("width = 1.2", "width = 50.0"), "width"),
        (lambda s: s.replace("seed = 11", ""), "seed"),
    ],
)
def test_config_validation_messages(tmp_path, mangle, hint):
    path = write_scenario(tmp_path, mangle(BASE))
    with pytest.raises(ConfigError, match=hint):
        load_config(path)


def test_missing_file_raises():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/scenario.ini")


def test_tables_resolve_relative_to_scenario(tmp_path):
    coords = np.linspace(-5.0, 5.0 - 10.0 / 16, 16)
    np.savetxt(tmp_path / "pot.txt", np.column_stack([coords, 0.5 * coords**2]))
    np.savetxt(tmp_path / "obs.txt", np.sign(coords))
    text = BASE.replace("potential = free", "potential = table:pot.txt").replace(
        "observable = position", "observable = table:obs.txt"
    )
    cfg = load_config(write_scenario(tmp_path, text))
    assert_allclose(cfg.obs.values, np.sign(coords))
    assert_allclose(cfg.ham.potential, 0.5 * coords**2, atol=1e-12)

    bad = text.replace("observable = table:obs.txt", "observable = table:missing.txt")
    with pytest.raises(ConfigError, match="observable"):
        load_config(write_scenario(tmp_path, bad, name="bad.ini"))


def test_emit_plot_data_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=9)
    y = rng.normal(size=9) * 1e-14
    path = emit_plot_data(tmp_path / "t.txt", [("x", x), ("y", y)], header=["demo table"])
    text = path.read_text()
    assert text.startswith("# demo table\n# columns: x  y\n")
    back = np.loadtxt(path)
    assert np.array_equal(back[:, 0], x)  # 17 digits round-trip doubles exactly
    assert np.array_equal(back[:, 1], y)


def test_emit_plot_data_edge_cases(tmp_path):
    path = emit_plot_data(tmp_path / "empty.txt", [("a", []), ("b", [])])
    assert path.read_text() == "# columns: a  b\n"
    with pytest.raises(ValueError, match="same length"):
        emit_plot_data(tmp_path / "x.txt", [("a", [1.0]), ("b", [1.0, 2.0])])


def test_manifest_digest_ignores_wall_clock(tmp_path):
    kwargs = dict(
        task="evolve", options={}, config={"run": {"seed": "1"}}, version="0.1.0",
        seed=1, workers=1, checks=[], outputs=[],
    )
    a = RunManifest(wall_clock_seconds=0.5, **kwargs)
    b = RunManifest(wall_clock_seconds=99.0, **kwargs)
    assert a.digest() == b.digest()
    a.write(tmp_path / "m.json")
    again = RunManifest.read(tmp_path / "m.json")
    assert again.digest() == a.digest()
    assert again.wall_clock_seconds == 0.5


def test_run_scenario_writes_everything_it_references(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    out = tmp_path / "run1"
    manifest = run_scenario(cfg, task="evolve", outdir=out, readout="const:0.2")
    files = {p.name for p in out.iterdir()}
    assert files == {entry["file"] for entry in manifest.outputs} | {"manifest.json"}
    for entry in manifest.outputs:
        assert file_sha256(out / entry["file"]) == entry["sha256"]
    saved = json.loads((out / "manifest.json").read_text())
    assert saved["seed"] == 11 and saved["workers"] == 1
    assert RunManifest.read(out / "manifest.json").digest() == manifest.digest()


def test_rerun_is_bit_identical(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    m1 = run_scenario(cfg, task="evolve", outdir=tmp_path / "a", readout="sample")
    m2 = run_scenario(cfg, task="evolve", outdir=tmp_path / "b", readout="sample")
    assert m1.digest() == m2.digest()
    hashes1 = {e["name"]: e["sha256"] for e in m1.outputs}
    hashes2 = {e["name"]: e["sha256"] for e in m2.outputs}
    assert hashes1 == hashes2


def test_mc_rerun_is_bit_identical(tmp_path):
    text = BASE.replace("kind = delta", "kind = gaussian\ntau = 0.08")
    cfg = load_config(write_scenario(tmp_path, text))
    runs = [
        run_scenario(cfg, task="evolve", outdir=tmp_path / d, engine="mc", samples=200)
        for d in ("a", "b")
    ]
    assert runs[0].digest() == runs[1].digest()
    assert runs[0].options["engine"] == "mc"


def test_evolve_ideal_outputs_match_engine(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    out = tmp_path / "run"
    run_scenario(cfg, task="evolve", outdir=out, readout="const:0.0")
    table = np.loadtxt(out / "state_final.txt")
    from corridors.selective import evolve_selective_ideal

    res = evolve_selective_ideal(
        cfg.initial_packet(), np.zeros(12), 0.9, cfg.ham, cfg.obs, cfg.sgrid, cfg.tgrid
    )
    assert np.array_equal(table[:, 1], res.final_state.real)
    assert np.array_equal(table[:, 2], res.final_state.imag)
    series = np.loadtxt(out / "series.txt")
    assert series.shape == (12, 4)
    assert np.all(np.diff(series[:, 1]) <= 1e-15)  # norms cannot grow


def test_average_series_and_checks(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    out = tmp_path / "avg"
    manifest = run_scenario(cfg, task="average", outdir=out, engine="lindblad", pair=(4, 12))
    names = {c["name"] for c in manifest.checks}
    assert names == {"trace_error", "hermiticity_error", "min_eigenvalue"}
    assert all(c["passed"] for c in manifest.checks)
    series = np.loadtxt(out / "series.txt")
    assert series.shape[1] == 5
    assert np.all(np.diff(series[:, 2]) <= 1e-12)  # purity decays
    density = np.loadtxt(out / "density_final.txt")
    assert density.shape == (16 * 16, 4)
    with pytest.raises(ConfigError, match="pair"):
        run_scenario(cfg, task="average", outdir=out, pair=(4, 99))


def test_average_engines_agree(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    rhos = []
    for engine in ("lindblad", "quadrature", "superpropagator"):
        out = tmp_path / engine
        run_scenario(cfg, task="average", outdir=out, engine=engine)
        table = np.loadtxt(out / "density_final.txt")
        rhos.append(table[:, 2] + 1j * table[:, 3])
    assert np.max(np.abs(rhos[1] - rhos[2])) < 1e-14  # same sweep underneath
    assert np.max(np.abs(rhos[0] - rhos[1])) < 5e-2  # master eq vs average: O(dt)


def test_unitarity_task_pass_and_fail(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    manifest = run_scenario(cfg, task="unitarity-check", outdir=tmp_path / "u")
    check = manifest.checks[0]
    assert check["passed"] and check["value"] < 1e-12
    with pytest.raises(CheckFailure) as info:
        run_scenario(cfg, task="unitarity-check", outdir=tmp_path / "u2", tol=1e-18)
    attached = info.value.manifest
    assert attached is not None and not attached.checks[0]["passed"]
    assert (tmp_path / "u2" / "manifest.json").exists()  # artifacts still written


def test_medium_compare_task(tmp_path):
    text = BASE.replace("kind = delta", "kind = gaussian\ntau = 0.1")
    cfg = load_config(write_scenario(tmp_path, text))
    out = tmp_path / "mc"
    manifest = run_scenario(
        cfg, task="medium-compare", outdir=out, corpus=12, n_slices=10, ell=2.0
    )
    assert manifest.checks[0]["value"] < 1e-12
    table = np.loadtxt(out / "medium_compare.txt")
    assert table.shape == (12, 6)
    assert np.all(table[:, 5] > 0) and np.all(table[:, 5] <= 1)


def test_medium_compare_rejects_tabulated(tmp_path):
    lags = np.linspace(-0.4, 0.4, 17)
    np.savetxt(tmp_path / "prof.txt", np.column_stack([lags, np.exp(-np.abs(lags) / 0.1)]))
    text = BASE.replace("kind = delta", "kind = tabulated\ntable = prof.txt")
    cfg = load_config(write_scenario(tmp_path, text))
    with pytest.raises(ConfigError, match="resolution"):
        run_scenario(cfg, task="medium-compare", outdir=tmp_path / "x")


def test_zeno_task_monotone(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    out = tmp_path / "z"
    manifest = run_scenario(cfg, task="zeno-sweep", outdir=out, kappas=[0.05, 0.5, 5.0])
    assert all(c["passed"] for c in manifest.checks)
    table = np.loadtxt(out / "zeno_sweep.txt")
    assert np.all(np.diff(table[:, 1]) < 0)


def test_convergence_dt_task(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    out = tmp_path / "c"
    manifest = run_scenario(cfg, task="convergence", outdir=out, study="dt", levels=3)
    table = np.loadtxt(out / "convergence_dt.txt")
    assert np.all(np.diff(table[:, 1]) < 0)
    slope = next(c["value"] for c in manifest.checks if c["name"] == "fitted_slope")
    assert 0.8 < slope < 1.3  # boundary half-step conjugation: first order

    text = BASE.replace("kind = delta", "kind = gaussian\ntau = 0.02")
    cfg2 = load_config(write_scenario(tmp_path, text, name="g.ini"))
    with pytest.raises(ConfigError, match="delta"):
        run_scenario(cfg2, task="convergence", outdir=out, study="dt")


def test_convergence_tau_task(tmp_path):
    text = (
        BASE.replace("n_points = 16", "n_points = 4")
        .replace("n_steps = 12", "n_steps = 6")
        .replace("kind = delta", "kind = gaussian\ntau = 0.02")
    )
    cfg = load_config(write_scenario(tmp_path, text))
    out = tmp_path / "ct"
    manifest = run_scenario(cfg, task="convergence", outdir=out, study="tau", levels=2)
    table = np.loadtxt(out / "convergence_tau.txt")
    assert table.shape == (2, 3)
    assert table[1, 1] < table[0, 1]
    assert manifest.options == {"study": "tau", "levels": 2}


def test_readout_sources(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    record = np.linspace(-0.5, 0.5, 12)
    np.savetxt(tmp_path / "rec.txt", record)
    out = tmp_path / "r"
    run_scenario(cfg, task="evolve", outdir=out, readout=f"file:{tmp_path / 'rec.txt'}")
    used = np.loadtxt(out / "readout_used.txt")
    assert_allclose(used[:, 1], record, rtol=0, atol=0)
    with pytest.raises(ConfigError, match="readout"):
        run_scenario(cfg, task="evolve", outdir=out, readout="random")
    with pytest.raises(ConfigError, match="12 steps"):
        np.savetxt(tmp_path / "short.txt", record[:5])
        run_scenario(cfg, task="evolve", outdir=out, readout=f"file:{tmp_path / 'short.txt'}")


def test_unknown_task_and_engine(tmp_path):
    cfg = load_config(write_scenario(tmp_path))
    with pytest.raises(ConfigError, match="task"):
        run_scenario(cfg, task="explode", outdir=tmp_path / "x")
    with pytest.raises(ConfigError, match="engine"):
        run_scenario(cfg, task="evolve", outdir=tmp_path / "x", engine="warp")


def test_cli_exit_codes(tmp_path, capsys):
    scenario = write_scenario(tmp_path)
    assert main(["evolve", str(scenario), "--outdir", str(tmp_path / "o1")]) == 0
    out = capsys.readouterr().out
    assert "manifest digest" in out and "state_final.txt" in out

    broken = write_scenario(tmp_path, BASE.replace("seed = 11", ""), name="broken.ini")
    assert main(["evolve", str(broken)]) == 1
    assert "seed" in capsys.readouterr().err

    assert main([
        "unitarity-check", str(scenario), "--tol", "1e-18",
        "--outdir", str(tmp_path / "o2"),
    ]) == 2
    captured = capsys.readouterr()
    assert "numerical check failed" in captured.err
    assert "[FAIL]" in captured.out


def test_cli_average_and_sweeps(tmp_path, capsys):
    scenario = write_scenario(tmp_path)
    assert main([
        "average", str(scenario), "--engine", "superpropagator",
        "--pair", "4,12", "--outdir", str(tmp_path / "a"),
    ]) == 0
    assert main([
        "zeno-sweep", str(scenario), "--kappas", "0.1,1,10",
        "--outdir", str(tmp_path / "z"),
    ]) == 0
    capsys.readouterr()
    assert main(["medium-compare", str(scenario), "--corpus", "5",
                 "--outdir", str(tmp_path / "m")]) == 0
