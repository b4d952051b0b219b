#!/usr/bin/env python3
# ------------------------------------------------------------------------------
# Quasi-periodic surface builder
#
# Solves the maximal graph Dirichlet problem on a strip with pinned zeros,
# closes the periods of the conjugate minimal immersion and writes the
# resulting surface pieces as OBJ/PLY meshes with CSV reports.
#
# Usage:
#     python -m src.main run --config config.yaml
#     python -m src.main scan-period --config config.yaml
#     python -m src.main calibrate-eta0 --config config.yaml
#     python -m src.main match-windows --config config.yaml
#     python -m src.main diagnose --config config.yaml
#     python -m src.main sequence --generator beatty --alpha sqrt2 --window -2 40
# ------------------------------------------------------------------------------

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

# Ensure src directory is in path for imports
src_dir = Path(__file__).parent
if str(src_dir) not in sys.path:
    sys.path.insert(0, str(src_dir.parent))

import numpy as np  # noqa: E402

from src.config.defaults import (  # noqa: E402
    APP_NAME,
    APP_VERSION,
    EXIT_CONFIG,
    EXIT_OK,
    GENERATORS,
)
from src.config.keys import SettingsKeys  # noqa: E402
from src.config.settings import PipelineSettings, SettingsFactory  # noqa: E402
from src.core.conjugation import integrate_u  # noqa: E402
from src.core.exceptions import CalibrationError, ConfigurationError, ConstructionError, PeriodError  # noqa: E402
from src.core.maximal_solver import triangle_gradients  # noqa: E402
from src.core.period_engine import PeriodEngine, calibrate_eta0, scan_calibration, scan_single_handle  # noqa: E402
from src.core.period_solver import SolveStatus, solve_periods  # noqa: E402
from src.core.pipeline import (  # noqa: E402
    Stage,
    configured_handles,
    exit_code_for,
    gap_sequence,
    quasi_period_shift,
    run_pipeline,
    translated_handles,
)
from src.core.sequences import match_windows, quasiperiodicity_scan  # noqa: E402
from src.core.strip_domain import StripConfig  # noqa: E402
from src.processing import reports  # noqa: E402
from src.processing.diagnostics import boundary_flux_pattern, curvature_field, divergence_ridges  # noqa: E402
from src.processing.surface_builder import build_fundamental_piece  # noqa: E402

logger = logging.getLogger("src.main")


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="src.main", description=f"{APP_NAME} {APP_VERSION}")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--config", help="YAML (.yaml/.yml) or key=value config file")
        p.add_argument("--output", help="output directory (overrides output.dir)")
        return p

    with_config(sub.add_parser("run", help="full construction: periods, surface, meshes, reports"))

    scan = with_config(sub.add_parser("scan-period", help="single-handle F(q) table"))
    scan.add_argument("--points", type=int, default=None, help="number of q samples per side")

    with_config(sub.add_parser("calibrate-eta0", help="choose eta0 from the single-handle period scan"))

    match = with_config(sub.add_parser("match-windows", help="quasi-periodicity residuals of the surface"))
    match.add_argument("--radius", type=float, default=1.0, help="half-width of the matched window in x")
    match.add_argument("--min-shift", type=float, default=0.0, help="smallest accepted translation")
    match.add_argument("--n-max", type=int, default=100, help="largest index shift searched for a repeat")
    match.add_argument("--index-radius", type=int, default=1, help="gaps g(i), |i| <= radius, that must repeat")

    with_config(sub.add_parser("diagnose", help="ridges, boundary flux and curvature at the closed periods"))

    seq = sub.add_parser("sequence", help="print and scan a handle gap sequence")
    seq.add_argument("--generator", choices=GENERATORS, default="beatty")
    seq.add_argument("--alpha", default="sqrt2")
    seq.add_argument("--window", type=int, nargs=2, default=(-30, 200), metavar=("LO", "HI"))
    seq.add_argument("--n-max", type=int, default=100)
    seq.add_argument("--radius", type=int, default=20)
    seq.add_argument("--output", help="directory for sequence.csv and scores.csv")
    return parser


def _load(args: argparse.Namespace) -> PipelineSettings:
    if args.config and not Path(args.config).exists():
        raise ConfigurationError(f"config file not found: {args.config}")
    settings = SettingsFactory.create(args.config)
    if getattr(args, "output", None):
        settings.set(SettingsKeys.Output.DIR, args.output)
    return settings


def cmd_run(args: argparse.Namespace) -> int:
    result = run_pipeline(args.config, args.output)
    if result.ok:
        print(f"done: {result.output_dir}")
    else:
        print(f"stage '{result.error.stage}' failed (exit {result.exit_code}): {result.error}; "
              f"see {result.error.report_path}", file=sys.stderr)
    return result.exit_code


def cmd_scan_period(args: argparse.Namespace) -> int:
    settings = _load(args)
    cfg = StripConfig.from_settings(settings)
    h = cfg.grid_h
    top = int((cfg.eta - 2.0 * h) / h + 1e-9)
    ks = range(-top, top + 1)
    if args.points and top > args.points:
        step = max(1, top // args.points)
        ks = [k for k in ks if k % step == 0]
    with PeriodEngine.from_settings(settings, cfg) as engine:
        rows = scan_single_handle(cfg, [k * h for k in ks], engine)
    path = reports.write_scan(Path(settings.get(SettingsKeys.Output.DIR)) / "scan.csv", rows)
    for row in rows:
        print(f"q={row.q:+.5f}  F={row.F:+.6e}  handle={row.handle_size:.6e}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    settings = _load(args)
    cfg = StripConfig.from_settings(settings)
    resolution = int(settings.get(SettingsKeys.Periods.SCAN_RESOLUTION))
    threshold = float(settings.get(SettingsKeys.Periods.F_THRESHOLD))
    with PeriodEngine.from_settings(settings, cfg) as engine:
        profile = scan_calibration(cfg, resolution, threshold, engine)
    path = reports.write_calibration(Path(settings.get(SettingsKeys.Output.DIR)) / "calibration.csv", profile)
    if profile.eta0 is None:
        raise CalibrationError(f"no scanned q keeps F >= {threshold}; profile in {path}", profile=profile)
    print(f"eta0={profile.eta0!r} (eta={cfg.eta!r}); profile in {path}")
    return EXIT_OK


def _resolve_eta0(settings: PipelineSettings, cfg: StripConfig, engine: PeriodEngine) -> float:
    if settings.get(SettingsKeys.Periods.ETA0) != "calibrate":
        return cfg.eta0
    return calibrate_eta0(cfg, int(settings.get(SettingsKeys.Periods.SCAN_RESOLUTION)),
                          float(settings.get(SettingsKeys.Periods.F_THRESHOLD)), engine)


def _solved_piece(settings: PipelineSettings, cfg: StripConfig, engine: PeriodEngine,
                  p: Tuple[int, ...], eta0: float):
    """Close the periods for handles p and build the fundamental piece at the solution."""
    trace = solve_periods(cfg, p, eta0, tol_F=float(settings.get(SettingsKeys.Periods.TOL_F)),
                          engine=engine, max_sweeps=int(settings.get(SettingsKeys.Periods.MAX_SWEEPS)))
    if trace.status == SolveStatus.FAILED:
        raise PeriodError(f"period solve for p={list(p)} failed after {trace.sweeps} sweeps")
    forms = engine.forms(trace.final_q)
    piece = build_fundamental_piece(cfg, trace.final_q, forms, mesh_tol=settings.get(SettingsKeys.Mesh.MESH_TOL))
    return trace, forms, piece


def cmd_match_windows(args: argparse.Namespace) -> int:
    settings = _load(args)
    cfg = StripConfig.from_settings(settings)
    p = configured_handles(settings)
    n = quasi_period_shift(settings, args.n_max, args.index_radius) if p else 0
    with PeriodEngine.from_settings(settings, cfg) as engine:
        eta0 = _resolve_eta0(settings, cfg, engine)
        _, _, piece_a = _solved_piece(settings, cfg, engine, p, eta0)
        if p:
            p_b = translated_handles(settings, n)
            logger.info("matching handles %s against the shift by n=%d: %s", list(p), n, list(p_b))
            _, _, piece_b = _solved_piece(settings, cfg, engine, p_b, eta0)
            min_shift = args.min_shift
        else:
            # the handle-free layer is periodic under x -> x + 2
            piece_b = piece_a
            min_shift = max(args.min_shift, 1.5)
    match = match_windows(piece_a, piece_b, window_radius=args.radius, min_shift=min_shift, centre=0.0)
    path = reports.write_csv(Path(settings.get(SettingsKeys.Output.DIR)) / "matches.csv",
                             ["n", "shift", "residual", "mesh_tol"],
                             [(n, match.shift, match.residual, piece_a.mesh_tol)])
    verdict = "within" if match.residual <= piece_a.mesh_tol else "above"
    print(f"n={n} shift={match.shift:+.6f} residual={match.residual:.3e} "
          f"({verdict} mesh_tol {piece_a.mesh_tol:.3e})")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    settings = _load(args)
    cfg = StripConfig.from_settings(settings)
    with PeriodEngine.from_settings(settings, cfg) as engine:
        eta0 = _resolve_eta0(settings, cfg, engine)
        _, forms, _ = _solved_piece(settings, cfg, engine, configured_handles(settings), eta0)
    field = forms.field
    out = Path(settings.get(SettingsKeys.Output.DIR)) / "diagnostics"

    ridges = divergence_ridges([field], settings.get(SettingsKeys.Diagnostics.RIDGE_EPS))
    pattern = boundary_flux_pattern(field, float(settings.get(SettingsKeys.Diagnostics.FLUX_TOL)))
    u_field = integrate_u(forms)
    curvature = curvature_field(u_field)

    reports.write_ridges(out / "ridges.csv", ridges)
    reports.write_flux(out / "flux.csv", pattern)

    # node |grad v|: max over the adjacent triangles
    grid = u_field.grid
    J = field.grid.axis_row
    slope_t = np.hypot(*triangle_gradients(field)).reshape(field.grid.ny - 1, -1)[J:].reshape(-1)
    node_slope = np.zeros(grid.n_nodes)
    np.maximum.at(node_slope, grid.triangles.reshape(-1), np.repeat(slope_t, 3))
    points = np.stack([np.tile(grid.x, grid.ny), np.repeat(grid.y, grid.nx)], axis=-1)
    reports.write_field_diagnostics(out / "field.csv", points, node_slope, curvature)

    print(f"ridges: {len(ridges)}; flux classes: {', '.join(c.value for _, _, c in pattern)}; "
          f"max |K| in probe region: {curvature.max_abs:.4e}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sequence(args: argparse.Namespace) -> int:
    sequence = gap_sequence(args.generator, tuple(args.window), alpha=args.alpha)
    gaps = sequence.gaps()
    scores = quasiperiodicity_scan(gaps, args.n_max, args.radius)
    print("gaps: " + " ".join(str(g) for g in gaps.values[:60]) + (" ..." if len(gaps) > 60 else ""))
    print("perfect shifts: " + " ".join(str(s.n) for s in scores))
    if args.output:
        out = Path(args.output)
        reports.write_sequence(out / "sequence.csv", list(sequence.values.indices), list(sequence.p))
        reports.write_sequence_scores(out / "scores.csv", scores)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "scan-period": cmd_scan_period,
    "calibrate-eta0": cmd_calibrate,
    "match-windows": cmd_match_windows,
    "diagnose": cmd_diagnose,
    "sequence": cmd_sequence,
}

# stage whose exit code applies when a subcommand fails outside the pipeline
COMMAND_STAGES = {
    "scan-period": Stage.PERIOD_SOLVE,
    "calibrate-eta0": Stage.CALIBRATE,
    "match-windows": Stage.PERIOD_SOLVE,
    "diagnose": Stage.PERIOD_SOLVE,
    "sequence": Stage.CONFIG,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstructionError as e:
        stage = COMMAND_STAGES.get(args.command, Stage.CONFIG)
        code = exit_code_for(e, stage)
        logger.error("%s failed: %s", args.command, e)
        print(f"{args.command} failed (exit {code}): {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
