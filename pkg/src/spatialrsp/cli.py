"""Command-line front end.

Every subcommand reads an optional TOML config (see :mod:`spatialrsp.config`),
applies command-line overrides and writes plain text, CSV or JSON. Exit
status is 0 on success, 1 when a numerical step fails and 2 for usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_length, validate
from .errors import DegeneratePoint, DegenerateWindow, DomainError
from .geometry import OpticalGeometry, classify_regime, propagation_params, slit_amplitude
from .postselect import DetectorWindow, common_plane_placements, prep_figures, remote_state_finite
from .povm import (
    OUTCOMES,
    PovmSettings,
    detector_layout,
    outcome_probability,
    povm_figures,
    settings_for_target,
    total_probability,
)
from .qudit import qudit_prepared_state, qudit_settings_for_target
from .states import PureKet
from .sweep import (
    Target,
    compare_probability_maps,
    default_workers,
    export_map,
    load_map,
    povm_probability_map,
    povm_stats,
    run_postselect_sweeps,
    stats,
)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

# Table II targets: (|alpha|, arg(beta/alpha)) and the reference theory fidelities in percent.
TABLE2_ROWS = (
    (0.979, -0.113, 98.4),
    (0.776, -2.319, 89.9),
    (0.742, -1.159, 89.6),
    (0.670, 1.159, 89.6),
    (0.631, 2.319, 89.9),
    (0.201, 0.113, 98.4),
)


class UsageError(Exception):
    """Bad command-line input detected after argparse."""


# ---------------------------------------------------------------------------
# helpers


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _length(text: str) -> float:
    try:
        return parse_length(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _complex_list(text: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise UsageError("empty amplitude list")
    try:
        return np.array([complex(p.replace("i", "j")) for p in parts])
    except ValueError:
        raise UsageError(f"malformed amplitude list {text!r}") from None


def _target_from_args(args, dim: int | None = None) -> PureKet:
    if args.target is not None and args.target_file is not None:
        raise UsageError("give either --target or --target-file")
    if args.target_file is not None:
        try:
            text = Path(args.target_file).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.target_file}: {exc}") from None
    elif args.target is not None:
        text = args.target
    else:
        raise UsageError("a target is required")
    amps = _complex_list(text)
    if dim is not None and amps.size != dim:
        raise UsageError(f"target has {amps.size} amplitudes, expected {dim}")
    if not np.all(np.isfinite(amps)) or np.linalg.norm(amps) == 0:
        raise UsageError("target amplitudes must be finite and not all zero")
    return PureKet(amps).normalized()


def _ket_json(ket: PureKet):
    return [{"re": float(c.real), "im": float(c.imag)} for c in ket.amplitudes]


def _matrix_json(m):
    return [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in np.asarray(m)]


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    if getattr(args, "preset", None):
        updates["sweep_preset"] = args.preset
    if getattr(args, "format", None):
        updates["format"] = args.format
    if getattr(args, "out", None):
        updates["out"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "width", None) is not None:
        updates["width"] = args.width
    return validate(replace(cfg, **updates))


# ---------------------------------------------------------------------------
# reproduction recipes


def table2_report(geom: OpticalGeometry, width: float = 20e-6, n_z: int = 1000, n_x: int = 4001):
    """Place the detector for every Table II target in one shared plane.

    Returns ``(z_star, rows)``; each row is a dict with the target, the
    chosen ``(x, z)``, the theory fidelity in percent (or None when no
    consistent plane exists) and the reference value.
    """
    f = geom.focal_length
    z_grid = np.linspace(f, 2 * f, n_z + 1)
    half = geom.first_zone_half_width
    x_grid = np.linspace(-half, half, n_x)
    targets = [PureKet([a, math.sqrt(1 - a * a) * np.exp(1j * ph)]) for a, ph, _ in TABLE2_ROWS]
    z_star, placements = common_plane_placements(geom, targets, z_grid, x_grid, width)
    rows = []
    for (a, ph, ref), p in zip(TABLE2_ROWS, placements):
        row = {"abs_alpha": a, "arg_beta_over_alpha": ph, "reference_percent": ref}
        if p is None:
            row.update(x=None, z=None, fidelity_percent=None, probability=None, error="no consistent plane")
        else:
            row.update(x=p.x, z=p.z, fidelity_percent=100 * p.fidelity, probability=p.probability)
        rows.append(row)
    return z_star, rows


def table3_report(geom: OpticalGeometry, cfg: RunConfig, workers: int, progress=None) -> dict:
    """Figure statistics of the three strategies plus run metadata."""
    t0 = time.perf_counter()
    sweep_cfg = cfg.sweep_config()
    maps = run_postselect_sweeps(geom, sweep_cfg, workers=workers, progress=progress)
    povm = povm_stats(geom, cfg.width, cfg.povm_n_theta, cfg.povm_n_chi)
    columns = {
        "postselection_max_probability": stats(maps[Target.PROBABILITY]).as_dict(),
        "postselection_max_fidelity": stats(maps[Target.FIDELITY]).as_dict(),
        "povm": povm.as_dict(),
    }
    return {
        "header": {
            "preset": cfg.sweep_preset,
            "z_step_m": sweep_cfg.z_step,
            "detector_width_m": cfg.width,
            "grid": [sweep_cfg.grid.n_theta, sweep_cfg.grid.n_phi],
            "workers": workers,
            "wall_time_s": time.perf_counter() - t0,
        },
        "columns": columns,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_amplitude(args, cfg: RunConfig) -> int:
    geom = cfg.geometry
    slit = int(args.slit) if args.slit.lstrip("+-").isdigit() else args.slit
    z = args.z if args.z is not None else (cfg.z if cfg.z is not None else geom.focal_length)
    x = args.x if args.x is not None else (cfg.x if cfg.x is not None else 0.0)
    value = complex(slit_amplitude(geom, slit, x, z))
    regime = classify_regime(geom, z).value
    kappa = propagation_params(geom, z).kappa
    if cfg.format == "json":
        text = _dumps({"re": value.real, "im": value.imag, "regime": regime, "kappa": kappa})
    elif cfg.format == "csv":
        text = _csv(("re", "im", "regime", "kappa"), [(value.real, value.imag, regime, kappa)])
    else:
        text = f"{value.real:.12g}{value.imag:+.12g}j  regime={regime}  kappa={kappa:.6g}\n"
    _emit(text, cfg.out)
    return EXIT_OK


def cmd_postselect(args, cfg: RunConfig) -> int:
    geom = cfg.geometry
    x = args.x if args.x is not None else cfg.x
    z = args.z if args.z is not None else cfg.z
    if x is None or z is None:
        raise UsageError("postselect needs a detector position: --x and --z (or detector.x/z in the config)")
    window = DetectorWindow(x, cfg.width, z)
    fig = prep_figures(geom, window)
    rho = remote_state_finite(geom, window)
    result = {"x": x, "z": z, "width": cfg.width, "regime": classify_regime(geom, z).value,
              "P": fig.probability, "F": fig.fidelity, "Pur": fig.purity}
    if cfg.format == "csv":
        text = _csv(tuple(result), [tuple(result.values())])
    else:
        result["rho"] = _matrix_json(rho.matrix)
        text = _dumps(result)
    _emit(text, cfg.out)
    return EXIT_OK


def cmd_povm(args, cfg: RunConfig) -> int:
    geom = cfg.geometry
    if args.target is not None or args.target_file is not None:
        settings = settings_for_target(_target_from_args(args, 2))
    else:
        settings = PovmSettings(args.Theta, args.chi)
    layout = detector_layout(settings, geom)
    fig = povm_figures(settings, geom, cfg.width)
    outcomes = []
    for j, p in OUTCOMES:
        outcomes.append({"detector": f"{j}{p}", "x": layout.position(j, p),
                         "probability": outcome_probability(settings, (j, p), geom, cfg.width)})
    result = {"Theta": settings.Theta, "chi": settings.chi, "width": cfg.width,
              "P_total": float(total_probability(settings, geom, cfg.width)),
              "F": fig.fidelity, "Pur": fig.purity, "outcomes": outcomes}
    if cfg.format == "csv":
        text = _csv(("detector", "x", "probability"),
                    [(o["detector"], o["x"], o["probability"]) for o in outcomes])
    else:
        text = _dumps(result)
    _emit(text, cfg.out)
    return EXIT_OK


def _check_long_run(args, cfg: RunConfig) -> None:
    if cfg.sweep_preset == "full" and not args.long_run:
        raise UsageError("the full preset scans ~3e5 planes; pass --long-run to confirm")


def _progress(enabled: bool):
    if not enabled:
        return None

    def report(done, total):
        print(f"\r{done}/{total} chunks", end="" if done < total else "\n", file=sys.stderr, flush=True)

    return report


def _sweep_maps(args, cfg: RunConfig):
    _check_long_run(args, cfg)
    workers = args.workers or default_workers()
    return run_postselect_sweeps(cfg.geometry, cfg.sweep_config(), workers=workers,
                                 progress=_progress(args.progress))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sweep(args, cfg: RunConfig) -> int:
    maps = _sweep_maps(args, cfg)
    out = _out_dir(cfg)
    for target, m in maps.items():
        fmt = cfg.format or "csv"
        path = out / f"map_max_{target.value}.{fmt}"
        export_map(m, path, fmt)
        print(path)
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    result = {}
    for path in args.maps:
        m = load_map(path)
        result[str(path)] = {"target": m.target.value, **stats(m).as_dict()}
    _emit(_dumps(result), cfg.out)
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig) -> int:
    if args.maps:
        maps = {}
        for path in args.maps:
            m = load_map(path)
            maps[m.target] = m
    else:
        maps = _sweep_maps(args, cfg)
    out = _out_dir(cfg)
    summary = {}
    for target, m in sorted(maps.items(), key=lambda kv: kv[0].value):
        povm_p = povm_probability_map(cfg.geometry, cfg.width, m.grid)
        cmp = compare_probability_maps(m, povm_p)
        path = out / f"winner_vs_max_{target.value}.csv"
        with open(path, "w") as fh:
            fh.write("theta_index,phi_index,winner\n")
            for (i, j), w in np.ndenumerate(cmp.winner):
                fh.write(f"{i},{j},{int(w)}\n")
        summary[f"vs_max_{target.value}"] = {"povm_fraction": cmp.povm_fraction, "winner_map": str(path)}
    sys.stdout.write(_dumps(summary))
    return EXIT_OK


def cmd_table2(args, cfg: RunConfig) -> int:
    geom = cfg.geometry if args.config else OpticalGeometry.taguchi()
    z_star, rows = table2_report(geom, cfg.width)
    failed = False
    lines = [f"# shared plane z* = {z_star!r} m" if z_star is not None else "# no shared plane found"]
    lines.append("|alpha|,arg(beta/alpha),fidelity_percent,reference_percent,x_m,z_m")
    for r in rows:
        if r["fidelity_percent"] is None:
            failed = True
            lines.append(f"{r['abs_alpha']},{r['arg_beta_over_alpha']},,{r['reference_percent']},,  # {r['error']}")
        else:
            lines.append(f"{r['abs_alpha']},{r['arg_beta_over_alpha']},{r['fidelity_percent']:.3f},"
                         f"{r['reference_percent']},{r['x']!r},{r['z']!r}")
    if cfg.format == "json":
        text = _dumps({"z_star": z_star, "rows": rows})
    else:
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.out)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_table3(args, cfg: RunConfig) -> int:
    _check_long_run(args, cfg)
    workers = args.workers or default_workers()
    report = table3_report(cfg.geometry, cfg, workers, progress=_progress(args.progress))
    _emit(_dumps(report), cfg.out)
    return EXIT_OK


def cmd_qudit(args, cfg: RunConfig) -> int:
    target = _target_from_args(args)
    D = target.dim
    if not (D == 2 or (D >= 3 and D % 2 == 1)):
        raise UsageError(f"qudit dimension must be 2 or odd >= 3, got {D}")
    settings = qudit_settings_for_target(target)
    ket, prob = qudit_prepared_state(settings)
    overlap = abs(np.vdot(target.amplitudes, ket.amplitudes)) ** 2
    result = {
        "dim": D,
        "probability": prob,
        "fidelity": min(1.0, float(overlap)),
        "settings": [{"slit": k, "theta": float(t), "phase": float(p)}
                     for k, (t, p) in enumerate(zip(settings.thetas, settings.phases))],
        "prepared_state": _ket_json(ket),
    }
    if cfg.format == "csv":
        text = _csv(("slit", "theta", "phase"), [(s["slit"], s["theta"], s["phase"]) for s in result["settings"]])
    else:
        text = _dumps(result)
    _emit(text, cfg.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--preset", choices=("coarse", "full"), help="sweep resolution preset")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: all CPUs)")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="output format")
    common.add_argument("--out", default=None, help="output file (directory for sweep/compare)")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--width", type=_length, default=None, help="detector width, e.g. 20um")

    parser = argparse.ArgumentParser(prog="spatialrsp", description="Remote state preparation with spatial qubits and qudits.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("amplitude", parents=[common], help="slit amplitude at one point")
    p.add_argument("--slit", default="l", help="slit label (l/r or integer index)")
    p.add_argument("--x", type=_length, default=None)
    p.add_argument("--z", type=_length, default=None)
    p.set_defaults(func=cmd_amplitude)

    p = sub.add_parser("postselect", parents=[common], help="figures of merit for one detector window")
    p.add_argument("--x", type=_length, default=None)
    p.add_argument("--z", type=_length, default=None)
    p.set_defaults(func=cmd_postselect)

    p = sub.add_parser("povm", parents=[common], help="POVM settings, detector layout and figures")
    p.add_argument("--Theta", type=float, default=math.pi / 8)
    p.add_argument("--chi", type=float, default=0.0)
    p.add_argument("--target", default=None, help="qubit target as 'alpha,beta'")
    p.add_argument("--target-file", default=None)
    p.set_defaults(func=cmd_povm)

    for name, func, text in (("sweep", cmd_sweep, "Bloch-sphere postselection maps"),
                             ("table3", cmd_table3, "strategy statistics")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--long-run", action="store_true", help="allow the full preset")
        p.add_argument("--progress", action="store_true", help="report chunk progress on stderr")
        p.set_defaults(func=func)

    p = sub.add_parser("stats", parents=[common], help="statistics of exported maps")
    p.add_argument("maps", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", parents=[common], help="POVM versus postselection winner maps")
    p.add_argument("maps", nargs="*", help="exported maps (default: run the sweep)")
    p.add_argument("--long-run", action="store_true")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("table2", parents=[common], help="detector placements for the six reference targets")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("qudit", parents=[common], help="slit-array settings for a qudit target")
    p.add_argument("--target", default=None, help="amplitudes, e.g. '1,1j,0.5'")
    p.add_argument("--target-file", default=None)
    p.set_defaults(func=cmd_qudit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (DegeneratePoint, DegenerateWindow, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
