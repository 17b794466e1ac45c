import json

import numpy as np
import pytest

from flyingatom.config import SimulationConfig
from flyingatom.errors import ConfigurationError, NumericalError
from flyingatom.runner import (
    PRESETS,
    read_snapshot,
    run_preset,
    run_single,
    run_sweep,
    sha256,
    simulate,
)


@pytest.fixture
def cfg(small_config):
    return small_config.replace(n_outputs=5)


def test_run_single_writes_outputs(cfg, tmp_path):
    manifest, result = run_single(cfg, tmp_path, snapshot_times=[0.0, 1.0])
    assert manifest.status == "ok"
    assert set(manifest.files) == {"timeseries.csv", "timeseries.json", "snapshot_0.txt", "snapshot_1.txt"}
    assert manifest.verify_files()
    for key in ("norm_drift", "energy_drift", "boundary_leakage"):
        assert key in manifest.diagnostics
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["files"] == manifest.files
    header = (tmp_path / "timeseries.csv").read_text().splitlines()[0].split(",")
    assert header[:2] == ["t", "t_over_tau0"] and "n_phys_c" in header
    data = np.loadtxt(tmp_path / "timeseries.csv", delimiter=",", skiprows=1)
    assert data.shape == (cfg.n_outputs + 1, len(header))
    np.testing.assert_array_equal(data[:, header.index("n_bare_c")], result.series["n_bare_c"])
    x, amps = read_snapshot(tmp_path / "snapshot_1.txt")
    np.testing.assert_array_equal(amps, result.snapshots[1].amplitudes)


def test_deterministic_checksums(cfg, tmp_path):
    m1, _ = run_single(cfg, tmp_path / "a", observables=["p_over_k0", "n_bare_c"])
    m2, _ = run_single(cfg, tmp_path / "b", observables=["p_over_k0", "n_bare_c"])
    assert {k: v["sha256"] for k, v in m1.files.items()} == {k: v["sha256"] for k, v in m2.files.items()}


def test_tampered_file_detected(cfg, tmp_path):
    m, _ = run_single(cfg, tmp_path, observables=["p_over_k0"])
    (tmp_path / "timeseries.csv").write_text("oops\n")
    assert not m.verify_files()
    assert sha256(tmp_path / "timeseries.json") == m.files["timeseries.json"]["sha256"]


def test_norm_drift_fails_run(cfg, tmp_path, monkeypatch):
    import flyingatom.runner as runner

    monkeypatch.setattr(runner, "NORM_DRIFT_LIMIT", 0.0)
    with pytest.raises(NumericalError, match="norm drift"):
        runner.run_single(cfg, tmp_path, observables=["p_over_k0"])
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "failed"


def test_unknown_observable(cfg):
    with pytest.raises(ConfigurationError):
        simulate(cfg, ["n_virtual"])


def test_sweep_matches_single_bitwise(cfg, tmp_path):
    _, single = run_single(cfg, None)
    sweep = run_sweep(cfg, "e_k", [cfg.e_k], "n_phys_c", tmp_path)
    np.testing.assert_array_equal(sweep.members[0].series, single.series["n_phys_c"])
    assert sweep.matrix().shape == (cfg.n_outputs + 1, 1)
    assert (tmp_path / "sweep_matrix.csv").is_file() and (tmp_path / "sweep_final.csv").is_file()


def test_xi_sweep_with_overlay(cfg, tmp_path):
    res = run_sweep(cfg, "xi", [1.0, 2.0], "n_bare_c", tmp_path, overlay=True)
    assert res.manifest.status == "ok"
    header = (tmp_path / "sweep_final.csv").read_text().splitlines()[0]
    assert header.endswith("perturbative_photon_number")


def test_sweep_failure_recorded(cfg, monkeypatch):
    import flyingatom.runner as runner

    real = runner.simulate

    def flaky(c, obs=None):
        if c.e_k > 50:
            raise NumericalError("synthetic blow-up")
        return real(c, obs)

    monkeypatch.setattr(runner, "simulate", flaky)
    res = runner.run_sweep(cfg, "e_k", [40.0, 60.0], "n_bare_c")
    assert res.manifest.status == "partial"
    assert res.members[0].error is None and "synthetic" in res.members[1].error
    assert np.isnan(res.matrix()[:, 1]).all()


@pytest.mark.parametrize("values", [[2.0, 1.0], [1.0, float("nan")], []])
def test_sweep_rejects_bad_values(cfg, values):
    with pytest.raises(ConfigurationError):
        run_sweep(cfg, "e_k", values)


def test_sweep_rejects_bad_axis(cfg):
    with pytest.raises(ConfigurationError):
        run_sweep(cfg, "mass", [1.0])


def test_presets_cover_figures():
    assert set(PRESETS) == {"fig2", "fig3", "fig4", "fig4a", "fig4b", "fig6a", "fig6b", "fig7"}
    assert PRESETS["fig2"].overrides == {"e_k": 0.02, "snapshot_times": [0.0, 0.5, 1.0]}
    assert PRESETS["fig3"].overrides["e_k"] == 40.0
    assert PRESETS["fig6a"].overrides["e_k"] == 1.0
    assert PRESETS["fig7"].overlay
    with pytest.raises(ConfigurationError):
        run_preset("fig5", "unused")


def test_fig3_preset_small(small_config, tmp_path):
    m = run_preset("fig3", tmp_path, small_config.replace(n_outputs=4))
    assert m.status == "ok"
    assert sum(name.startswith("snapshot_") for name in m.files) == 3
