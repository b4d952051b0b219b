from typing import Dict


class SettingsKeys:
    class Strip:
        ELL = "strip.ell"
        GRID_H = "strip.grid_h"
        X_WINDOW = "strip.x_window"

    class Handles:
        GENERATOR = "handles.generator"
        P_LIST = "handles.p_list"
        ALPHA = "handles.alpha"
        WINDOW = "handles.window"

    class Solver:
        TOL_PDE = "solver.tol_pde"
        MAX_ITER = "solver.max_iter"
        EPS_CAP = "solver.eps_cap"
        EPS_BDRY = "solver.eps_bdry"

    class Periods:
        ETA0 = "periods.eta0"
        TOL_F = "periods.tol_f"
        F_THRESHOLD = "periods.f_threshold"
        LOOP_RADIUS = "periods.loop_radius"
        SAMPLES_PER_FACE = "periods.samples_per_face"
        SCAN_RESOLUTION = "periods.scan_resolution"
        MAX_SWEEPS = "periods.max_sweeps"
        SEED = "periods.seed"

    class Mesh:
        COPIES_X = "mesh.copies_x"
        COPIES_Z = "mesh.copies_z"
        FORMAT = "mesh.format"
        MESH_TOL = "mesh.mesh_tol"

    class Diagnostics:
        FLUX_TOL = "diagnostics.flux_tol"
        RIDGE_EPS = "diagnostics.ridge_eps"

    class Output:
        DIR = "output.dir"
        THREADS = "output.threads"


# bare names accepted in key=value files
KEY_ALIASES: Dict[str, str] = {
    "ell": SettingsKeys.Strip.ELL,
    "grid_h": SettingsKeys.Strip.GRID_H,
    "h": SettingsKeys.Strip.GRID_H,
    "x_window": SettingsKeys.Strip.X_WINDOW,
    "generator": SettingsKeys.Handles.GENERATOR,
    "p_list": SettingsKeys.Handles.P_LIST,
    "alpha": SettingsKeys.Handles.ALPHA,
    "window": SettingsKeys.Handles.WINDOW,
    "tol_pde": SettingsKeys.Solver.TOL_PDE,
    "max_iter": SettingsKeys.Solver.MAX_ITER,
    "eps_cap": SettingsKeys.Solver.EPS_CAP,
    "eps_bdry": SettingsKeys.Solver.EPS_BDRY,
    "eta0": SettingsKeys.Periods.ETA0,
    "tol_f": SettingsKeys.Periods.TOL_F,
    "f_threshold": SettingsKeys.Periods.F_THRESHOLD,
    "loop_radius": SettingsKeys.Periods.LOOP_RADIUS,
    "samples_per_face": SettingsKeys.Periods.SAMPLES_PER_FACE,
    "scan_resolution": SettingsKeys.Periods.SCAN_RESOLUTION,
    "max_sweeps": SettingsKeys.Periods.MAX_SWEEPS,
    "seed": SettingsKeys.Periods.SEED,
    "copies_x": SettingsKeys.Mesh.COPIES_X,
    "copies_z": SettingsKeys.Mesh.COPIES_Z,
    "mesh_format": SettingsKeys.Mesh.FORMAT,
    "mesh_tol": SettingsKeys.Mesh.MESH_TOL,
    "flux_tol": SettingsKeys.Diagnostics.FLUX_TOL,
    "ridge_eps": SettingsKeys.Diagnostics.RIDGE_EPS,
    "output_dir": SettingsKeys.Output.DIR,
    "threads": SettingsKeys.Output.THREADS,
}


def resolve_key(name: str) -> str:
    name = name.strip()
    return KEY_ALIASES.get(name, name)
