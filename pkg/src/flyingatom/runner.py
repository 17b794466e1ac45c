"""Single runs, parameter sweeps and figure presets, with file output.

Every run directory holds

* ``timeseries.csv``  one header line, then one row per output time
  (floats with 17 significant digits);
* ``timeseries.json`` column descriptions, config and derived parameters;
* ``snapshot_<i>.txt`` full-state snapshots (x, Re/Im per basis state);
* ``manifest.json``   config, derived values, version, wall time,
  diagnostics and the sha256 of every file above.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .config import SimulationConfig, derive_parameters, xi_to_e_k
from .errors import ConfigurationError, FlyingAtomError, NumericalError, OutputError
from .observables import standard_observers
from .perturbation import perturbative_photon_number
from .propagator import LEAKAGE_LIMIT, Grid, WavepacketState, evolve, initial_state
from .rabi_model import basis_labels

log = logging.getLogger(__name__)

NORM_DRIFT_LIMIT = 1e-8
ENERGY_DRIFT_LIMIT = 1e-6
FLOAT_FMT = "%.17g"

OBSERVABLES = {
    "p_over_k0": "mean momentum <p>/k0",
    "x_mean": "mean position <x> (units of mu_c)",
    "n_bare_c": "bare photon number <a^dag a>, Coulomb gauge",
    "n_bare_d": "bare photon number of the same state in the dipole gauge, <T^dag a^dag a T>",
    "n_bare_d_transformed": "dipole-gauge number with transformed operators, <a'^dag a'>_d",
    "n_phys_c": "physical photon number <X^- X^+>, Coulomb-gauge dressed basis",
    "n_phys_d": "physical photon number <X^- X^+>, dipole-gauge dressed basis",
    "entropy": "von Neumann entropy of the Rabi factor, log base 4",
    "pop_g0": "integrated population of |g,0>",
    "pop_e1": "integrated population of |e,1>",
    "pop_g2": "integrated population of |g,2>",
    "pop_e3": "integrated population of |e,3>",
}
DIAGNOSTICS = {
    "norm2": "squared norm of the state",
    "energy": "<p^2/2m + H_R^(c)(x)> (units of omega_c)",
    "leakage": "probability within 10% of the domain edges",
}


# --------------------------------------------------------------------------
# in-memory simulation
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    config: SimulationConfig
    t: np.ndarray
    t_over_tau0: np.ndarray
    series: dict[str, np.ndarray]
    snapshots: list[WavepacketState]
    diagnostics: dict[str, float]
    wall_time: float

    def final(self, name: str) -> float:
        return float(self.series[name][-1])


def select_observables(names: Iterable[str] | None) -> list[str]:
    if names is None:
        return list(OBSERVABLES)
    names = list(names)
    bad = [n for n in names if n not in OBSERVABLES]
    if bad:
        raise ConfigurationError(f"unknown observables {bad}; choose from {sorted(OBSERVABLES)}")
    return names


def hygiene(series: dict[str, np.ndarray]) -> dict[str, float]:
    norm2, energy = series["norm2"], series["energy"]
    return {
        "norm_drift": float(np.max(np.abs(norm2 - 1.0))),
        "energy_drift": float(np.max(np.abs(energy - energy[0])) / max(abs(energy[0]), 1e-300)),
        "boundary_leakage": float(np.max(series["leakage"])),
    }


def simulate(config: SimulationConfig, observables: Iterable[str] | None = None) -> RunResult:
    """Evolve one configuration and collect the selected observables."""
    config.validate()
    names = select_observables(observables)
    grid = Grid.from_config(config)
    state = initial_state(grid, config)
    all_obs = standard_observers(grid, config)
    obs = {n: all_obs[n] for n in names}

    t0 = time.perf_counter()
    t, tt, rows, snaps = [], [], [], []
    for rec in evolve(state, config, obs):
        t.append(rec.t)
        tt.append(rec.t_over_tau0)
        rows.append(rec.values)
        if rec.snapshot is not None:
            snaps.append(rec.snapshot)
    wall = time.perf_counter() - t0
    series = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    return RunResult(config, np.array(t), np.array(tt), series, snaps, hygiene(series), wall)


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict[str, Any]
    derived: dict[str, Any]
    version: str
    wall_time: float
    files: dict[str, dict[str, Any]] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    status: str = "ok"
    error: str | None = None
    outdir: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def verify_files(self) -> bool:
        """Every listed file exists and still matches its checksum."""
        base = Path(self.outdir or ".")
        return all(
            (base / name).is_file() and sha256(base / name) == info["sha256"]
            for name, info in self.files.items()
        )


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_table(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=FLOAT_FMT)


def write_snapshot(path: Path, state: WavepacketState, t_over_tau0: float) -> None:
    labels = basis_labels(state.dims)
    cols = [state.grid.x]
    header = ["x"]
    for i, lab in enumerate(labels):
        cols += [state.amplitudes[:, i].real, state.amplitudes[:, i].imag]
        header += [f"re_{lab}", f"im_{lab}"]
    comment = f"# t_over_tau0 = {t_over_tau0:.17g}; gauge = {state.gauge}\n"
    data = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(comment)
        np.savetxt(fh, data, header=" ".join(header), comments="# ", fmt=FLOAT_FMT)


def read_snapshot(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """``(x, amplitudes)`` from a snapshot file."""
    data = np.loadtxt(path)
    return data[:, 0], data[:, 1::2] + 1j * data[:, 2::2]


def write_run(result: RunResult, outdir: Path) -> RunManifest:
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {outdir}: {exc}") from exc
    cfg = result.config
    derived = derive_parameters(cfg)
    manifest = RunManifest(
        config=cfg.to_dict(),
        derived=derived.to_dict(),
        version=__version__,
        wall_time=result.wall_time,
        diagnostics=dict(result.diagnostics),
        outdir=str(outdir),
    )
    names = ["t", "t_over_tau0"] + list(result.series)
    files: list[str] = []
    try:
        write_table(outdir / "timeseries.csv", names, [result.t, result.t_over_tau0, *result.series.values()])
        files.append("timeseries.csv")
        meta = {
            "columns": {
                "t": "time (units of 1/omega_c)",
                "t_over_tau0": "time in units of the transit time tau0",
                **{k: OBSERVABLES.get(k, DIAGNOSTICS.get(k, "")) for k in result.series},
            },
            "config": cfg.to_dict(),
            "derived": derived.to_dict(),
            "version": __version__,
        }
        _write_json(outdir / "timeseries.json", meta)
        files.append("timeseries.json")
        for i, snap in enumerate(result.snapshots):
            name = f"snapshot_{i}.txt"
            write_snapshot(outdir / name, snap, snap.t / derived.tau0)
            files.append(name)
    except OSError as exc:
        manifest.status = "partial"
        manifest.error = f"output failed: {exc}"
    manifest.files = {f: {"sha256": sha256(outdir / f), "bytes": (outdir / f).stat().st_size} for f in files}
    try:
        _write_json(outdir / "manifest.json", manifest.to_dict())
    except OSError as exc:
        raise OutputError(f"cannot write manifest in {outdir}: {exc}") from exc
    if manifest.status == "partial":
        raise OutputError(manifest.error)
    return manifest


def check_hygiene(diag: dict[str, float]) -> list[str]:
    """Human-readable violations of the run-quality thresholds."""
    out = []
    if diag["norm_drift"] > NORM_DRIFT_LIMIT:
        out.append(f"norm drift {diag['norm_drift']:.3e} > {NORM_DRIFT_LIMIT:g}")
    if diag["energy_drift"] > ENERGY_DRIFT_LIMIT:
        out.append(f"relative energy drift {diag['energy_drift']:.3e} > {ENERGY_DRIFT_LIMIT:g}")
    if diag["boundary_leakage"] > LEAKAGE_LIMIT:
        out.append(f"boundary leakage {diag['boundary_leakage']:.3e} > {LEAKAGE_LIMIT:g}")
    return out


def run_single(
    config: SimulationConfig,
    outdir: str | Path | None = None,
    observables: Iterable[str] | None = None,
    snapshot_times: Sequence[float] | None = None,
) -> tuple[RunManifest, RunResult]:
    """Simulate, write outputs (when ``outdir`` is given) and return the manifest.

    A norm drift above 1e-8 fails the run: outputs are still written and
    the manifest says ``status = "failed"``, then :class:`NumericalError`
    is raised.  Energy-drift and leakage violations are recorded as
    warnings in the manifest.
    """
    if snapshot_times is not None:
        config = config.replace(snapshot_times=[float(t) for t in snapshot_times])
    result = simulate(config, observables)
    problems = check_hygiene(result.diagnostics)
    for p in problems:
        log.warning("%s (E_K=%g)", p, config.e_k)
    failed = result.diagnostics["norm_drift"] > NORM_DRIFT_LIMIT
    if outdir is not None:
        manifest = write_run(result, Path(outdir))
    else:
        manifest = RunManifest(
            config=config.to_dict(),
            derived=derive_parameters(config).to_dict(),
            version=__version__,
            wall_time=result.wall_time,
            diagnostics=dict(result.diagnostics),
        )
    manifest.diagnostics["warnings"] = problems
    if failed:
        manifest.status = "failed"
        manifest.error = problems[0]
    if outdir is not None:
        _write_json(Path(outdir) / "manifest.json", manifest.to_dict())
    if failed:
        raise NumericalError(f"run failed hygiene: {problems[0]}")
    return manifest, result


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


@dataclass
class SweepMember:
    value: float
    e_k: float
    xi: float
    final: float
    series: np.ndarray | None
    t_over_tau0: np.ndarray | None
    diagnostics: dict[str, float] | None
    error: str | None = None


@dataclass
class SweepResult:
    axis: str
    observable: str
    members: list[SweepMember]
    manifest: RunManifest

    @property
    def values(self) -> np.ndarray:
        return np.array([m.value for m in self.members])

    @property
    def finals(self) -> np.ndarray:
        return np.array([m.final for m in self.members])

    def matrix(self) -> np.ndarray:
        """``(n_times, n_values)``; failed members are NaN columns."""
        ref = next((m.series for m in self.members if m.series is not None), None)
        n_t = 0 if ref is None else len(ref)
        cols = [m.series if m.series is not None else np.full(n_t, np.nan) for m in self.members]
        return np.column_stack(cols) if cols else np.empty((0, 0))


def default_workers() -> int:
    env = os.environ.get("FLYINGATOM_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"FLYINGATOM_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigurationError("FLYINGATOM_WORKERS must be >= 1")
        return n
    return 1


def sweep_config(base: SimulationConfig, axis: str, value: float) -> SimulationConfig:
    if axis == "e_k":
        return base.replace(e_k=float(value))
    if axis == "xi":
        return base.replace(e_k=xi_to_e_k(float(value), base.k0, base.mu_c) * base.omega_c)
    raise ConfigurationError(f"sweep axis must be 'e_k' or 'xi', got {axis!r}")


def _sweep_job(args) -> SweepMember:
    cfg, axis, value, observable = args
    derived = derive_parameters(cfg)
    try:
        res = simulate(cfg, [observable])
    except FlyingAtomError as exc:
        return SweepMember(value, cfg.e_k, derived.xi, math.nan, None, None, None, f"{type(exc).__name__}: {exc}")
    s = res.series[observable]
    return SweepMember(value, cfg.e_k, derived.xi, float(s[-1]), s, res.t_over_tau0, res.diagnostics)


def run_sweep(
    base: SimulationConfig,
    axis: str,
    values: Sequence[float],
    observable: str = "n_phys_c",
    outdir: str | Path | None = None,
    workers: int | None = None,
    overlay: bool = False,
) -> SweepResult:
    """Independent runs over ``e_k`` or ``xi``; one failing member does not stop the rest.

    Writes ``sweep_matrix.csv`` (rows: output times, columns: axis values),
    ``sweep_final.csv`` (final value per member, plus the perturbative
    photon number when ``overlay``) and ``manifest.json``.
    """
    values = [float(v) for v in values]
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise ConfigurationError("sweep values must be finite and positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError("sweep values must be strictly increasing")
    select_observables([observable])
    configs = [sweep_config(base, axis, v).validate() for v in values]
    jobs = [(c, axis, v, observable) for c, v in zip(configs, values)]
    workers = workers or default_workers()

    t0 = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            members = list(pool.map(_sweep_job, jobs))
    else:
        members = [_sweep_job(j) for j in jobs]
    wall = time.perf_counter() - t0

    manifest = RunManifest(
        config=base.to_dict(),
        derived={},
        version=__version__,
        wall_time=wall,
        diagnostics={
            str(m.value): (m.diagnostics or {}) | ({"error": m.error} if m.error else {}) for m in members
        },
        status="ok" if all(m.error is None for m in members) else "partial",
        extra={"axis": axis, "values": values, "observable": observable, "workers": workers},
    )
    result = SweepResult(axis, observable, members, manifest)
    if outdir is not None:
        _write_sweep(result, Path(outdir), overlay, base.eta0)
    return result


def _write_sweep(result: SweepResult, outdir: Path, overlay: bool, eta0: float) -> None:
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        ref = next((m for m in result.members if m.t_over_tau0 is not None), None)
        files = []
        if ref is not None:
            header = ["t_over_tau0"] + [f"{result.axis}={m.value:.17g}" for m in result.members]
            write_table(outdir / "sweep_matrix.csv", header, [ref.t_over_tau0, *result.matrix().T])
            files.append("sweep_matrix.csv")
        header = ["value", "e_k", "xi", f"final_{result.observable}", "ok"]
        cols = [
            result.values,
            [m.e_k for m in result.members],
            [m.xi for m in result.members],
            result.finals,
            [float(m.error is None) for m in result.members],
        ]
        if overlay:
            header.append("perturbative_photon_number")
            cols.append(perturbative_photon_number(eta0, np.array([m.xi for m in result.members])))
        write_table(outdir / "sweep_final.csv", header, cols)
        files.append("sweep_final.csv")
        result.manifest.outdir = str(outdir)
        result.manifest.files = {f: {"sha256": sha256(outdir / f), "bytes": (outdir / f).stat().st_size} for f in files}
        _write_json(outdir / "manifest.json", result.manifest.to_dict())
    except OSError as exc:
        raise OutputError(f"cannot write sweep output in {outdir}: {exc}") from exc


# --------------------------------------------------------------------------
# figure presets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    kind: str  # "single" or "sweep"
    overrides: dict[str, Any]
    axis: str | None = None
    values: tuple[float, ...] = ()
    observable: str | None = None
    overlay: bool = False


FIG4_XI = tuple(float(v) for v in np.logspace(-3, 1, 13))
FIG7_EK = (5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 150.0, 200.0)

PRESETS = {
    "fig2": Preset("fig2", "reflection, E_K = 0.02, snapshots at 0, 0.5, 1 tau0", "single",
                   {"e_k": 0.02, "snapshot_times": [0.0, 0.5, 1.0]}),
    "fig3": Preset("fig3", "inelastic transmission, E_K = 40, snapshots at 0, 0.5, 1 tau0", "single",
                   {"e_k": 40.0, "snapshot_times": [0.0, 0.5, 1.0]}),
    "fig4": Preset("fig4", "physical photon number vs time and xi (heatmap)", "sweep",
                   {}, axis="xi", values=FIG4_XI, observable="n_phys_c"),
    "fig4a": Preset("fig4a", "momentum vs time for E_K = 0.02, 10, 40", "sweep",
                    {}, axis="e_k", values=(0.02, 10.0, 40.0), observable="p_over_k0"),
    "fig4b": Preset("fig4b", "entropy vs time at E_K = 40", "single", {"e_k": 40.0}),
    "fig6a": Preset("fig6a", "photon numbers in both gauges, E_K = 1 (adiabatic)", "single", {"e_k": 1.0}),
    "fig6b": Preset("fig6b", "photon numbers in both gauges, E_K = 30", "single", {"e_k": 30.0}),
    "fig7": Preset("fig7", "final photon number vs E_K with the perturbative overlay", "sweep",
                   {}, axis="e_k", values=FIG7_EK, observable="n_bare_c", overlay=True),
}


def run_preset(
    name: str,
    outdir: str | Path,
    base: SimulationConfig | None = None,
    workers: int | None = None,
) -> RunManifest:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    base = base or SimulationConfig(e_k=1.0)
    cfg = base.replace(**p.overrides)
    if p.kind == "single":
        manifest, _ = run_single(cfg, outdir)
        return manifest
    return run_sweep(cfg, p.axis, p.values, p.observable, outdir, workers, p.overlay).manifest
