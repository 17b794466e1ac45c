"""Command line: ``run``, ``sweep``, ``verify`` and ``preset``.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure,
4 contract violation, 5 output failure, 1 anything else from the package.
``FLYINGATOM_WORKERS`` sets the default sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import SimulationConfig, config_from_dict, derive_parameters, load_config_data, parse_config
from .errors import ConfigurationError, FlyingAtomError, NumericalError
from .runner import OBSERVABLES, PRESETS, _json_default, _write_json, run_preset, run_single, run_sweep

log = logging.getLogger("flyingatom")

VERIFY_LIMIT = 1e-6


def _overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        try:
            out[key.strip()] = yaml.safe_load(val)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse value for {key}: {exc}") from exc
    return out


def _load(args, require_e_k: bool = True) -> SimulationConfig:
    data = load_config_data(args.config)
    data.update(_overrides(args.set))
    if getattr(args, "n_outputs", None) is not None:
        data["n_outputs"] = args.n_outputs
    if require_e_k:
        return parse_config(data)
    # sweeps and presets set e_k per member; everything else is checked now
    cfg = config_from_dict(data)
    cfg.replace(e_k=cfg.e_k or 1.0).validate()
    return cfg


def _echo(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def cmd_run(args) -> int:
    cfg = _load(args)
    obs = args.observables.split(",") if args.observables else None
    snaps = [float(t) for t in args.snapshots.split(",")] if args.snapshots else None
    log.info("derived parameters: %s", derive_parameters(cfg).to_dict())
    manifest, _ = run_single(cfg, args.out, obs, snaps)
    _echo({"outdir": args.out, "status": manifest.status, "diagnostics": manifest.diagnostics,
           "derived": manifest.derived, "wall_time": manifest.wall_time})
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args, require_e_k=False)
    values = [float(v) for v in args.values.split(",")]
    res = run_sweep(cfg, args.axis, values, args.observable, args.out, args.workers, args.overlay)
    _echo({"outdir": args.out, "status": res.manifest.status,
           "finals": {str(m.value): m.final for m in res.members},
           "errors": {str(m.value): m.error for m in res.members if m.error}})
    return 0 if res.manifest.status == "ok" else NumericalError.exit_code


def cmd_verify(args) -> int:
    from .observables import verify_gauge_equivalence
    from .perturbation import oracle_grid

    base = SimulationConfig(e_k=args.e_k, n_phot=args.n_phot, n_guard=args.n_guard)
    report = verify_gauge_equivalence(base, n_x=args.n_x)
    rows = oracle_grid()
    worst = max(r["rel_err"] for r in rows)
    summary = {
        "gauge": report.summary(),
        "oracle_max_rel_err": worst,
        "oracle_rows": len(rows),
        "pass": report.max_discrepancy < VERIFY_LIMIT and worst < VERIFY_LIMIT,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "verify.json", summary | {"oracle": rows})
    _echo(summary)
    return 0 if summary["pass"] else NumericalError.exit_code


def cmd_preset(args) -> int:
    base = _load(args, require_e_k=False)
    base = base.replace(e_k=base.e_k or 1.0)
    manifest = run_preset(args.name, args.out, base, args.workers)
    _echo({"preset": args.name, "outdir": args.out, "status": manifest.status, "wall_time": manifest.wall_time})
    return 0 if manifest.status == "ok" else NumericalError.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flyingatom", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="YAML/JSON config file or inline YAML text")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--n-outputs", type=int, help="number of output intervals (output stride)")

    r = sub.add_parser("run", help="single simulation")
    common(r)
    r.add_argument("--observables", help=f"comma-separated subset of {','.join(OBSERVABLES)}")
    r.add_argument("--snapshots", help="comma-separated snapshot times in units of tau0")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="independent runs over E_K or xi")
    common(s)
    s.add_argument("--axis", choices=("e_k", "xi"), required=True)
    s.add_argument("--values", required=True, help="comma-separated increasing values")
    s.add_argument("--observable", default="n_phys_c", choices=sorted(OBSERVABLES))
    s.add_argument("--overlay", action="store_true", help="add the perturbative photon number")
    s.add_argument("--workers", type=int, help="parallel processes (default: $FLYINGATOM_WORKERS or 1)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="dense gauge check and perturbative oracle grid")
    v.add_argument("--out")
    v.add_argument("--e-k", type=float, default=40.0)
    v.add_argument("--n-x", type=int, default=64)
    v.add_argument("--n-phot", type=int, default=4)
    v.add_argument("--n-guard", type=int, default=10)
    v.set_defaults(func=cmd_verify)

    pr = sub.add_parser("preset", help="figure reproduction presets")
    pr.add_argument("name", choices=sorted(PRESETS))
    common(pr)
    pr.add_argument("--workers", type=int)
    pr.set_defaults(func=cmd_preset)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FlyingAtomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
