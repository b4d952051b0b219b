"""
Dirichlet problem for the maximal graph equation on the truncated strip.

The discrete problem maximises the sum over P1 triangles of
area * sqrt(1 - |grad v|^2). Beyond |grad v| = 1 - eps_cap the integrand is
continued by its second-order Taylor polynomial in |grad v|^2, which keeps
the functional smooth and strictly concave, so damped Newton converges from
any starting point. Boundary data are contracted towards 1/2 by the factor
(1 - eps_bdry) because the tent data are exactly lightlike along y = +-ell.
"""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from .exceptions import DomainError, AdmissibilityError, NonConvergenceError, LightlikeCellError, ConstructionError
from .grid import GridSpec
from .strip_domain import StripConfig, SingularSet, check_admissible, phi_values, snap_singular_set
from ..config.defaults import (
    DEFAULT_TOL_PDE,
    DEFAULT_MAX_NEWTON_ITER,
    DEFAULT_EPS_CAP_FACTOR,
    DEFAULT_EPS_BDRY_FACTOR,
    LINE_SEARCH_ARMIJO,
    LINE_SEARCH_MIN_STEP,
    LINE_SEARCH_SHRINK,
    LINE_SEARCH_ENERGY_SLACK,
    INITIAL_CONE_SLOPE,
    MAX_REFINE_FACTOR,
    VERTEX_ZONE_CELLS,
    NESTED_START_BELOW_H,
    CSV_FLOAT_FORMAT,
)
from ..config.keys import SettingsKeys
from ..utils.parallel import parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol_pde: float = DEFAULT_TOL_PDE
    max_iter: int = DEFAULT_MAX_NEWTON_ITER
    eps_cap: Optional[float] = None
    eps_bdry: Optional[float] = None
    polish: bool = True

    def caps(self, h: float) -> Tuple[float, float]:
        eps_cap = self.eps_cap if self.eps_cap is not None else DEFAULT_EPS_CAP_FACTOR * h * h
        eps_bdry = self.eps_bdry if self.eps_bdry is not None else DEFAULT_EPS_BDRY_FACTOR * h * h
        if eps_bdry <= eps_cap:
            logger.warning("eps_bdry=%.3g does not exceed eps_cap=%.3g; boundary cells will be capped",
                           eps_bdry, eps_cap)
        return eps_cap, eps_bdry

    @classmethod
    def from_settings(cls, settings) -> "SolverOptions":
        return cls(
            tol_pde=float(settings.get(SettingsKeys.Solver.TOL_PDE)),
            max_iter=int(settings.get(SettingsKeys.Solver.MAX_ITER)),
            eps_cap=settings.get(SettingsKeys.Solver.EPS_CAP),
            eps_bdry=settings.get(SettingsKeys.Solver.EPS_BDRY),
        )


class CappedArea:
    """psi(s) = -sqrt(1 - s) for s <= s_c, quadratic continuation beyond."""

    def __init__(self, eps_cap: float):
        self.eps_cap = eps_cap
        self.s_cap = (1.0 - eps_cap) ** 2
        w = np.sqrt(1.0 - self.s_cap)
        self._psi_c = -w
        self._d1_c = 0.5 / w
        self._d2_c = 0.25 / w ** 3

    def psi(self, s: np.ndarray) -> np.ndarray:
        inside = s <= self.s_cap
        out = np.empty_like(s)
        out[inside] = -np.sqrt(1.0 - s[inside])
        ds = s[~inside] - self.s_cap
        out[~inside] = self._psi_c + self._d1_c * ds + 0.5 * self._d2_c * ds * ds
        return out

    def dpsi(self, s: np.ndarray) -> np.ndarray:
        inside = s <= self.s_cap
        out = np.empty_like(s)
        out[inside] = 0.5 / np.sqrt(1.0 - s[inside])
        out[~inside] = self._d1_c + self._d2_c * (s[~inside] - self.s_cap)
        return out

    def d2psi(self, s: np.ndarray) -> np.ndarray:
        inside = s <= self.s_cap
        out = np.full_like(s, self._d2_c)
        out[inside] = 0.25 / (1.0 - s[inside]) ** 1.5
        return out

    def weight(self, s: np.ndarray) -> np.ndarray:
        """Effective sqrt(1 - |g|^2); the flux is g / weight."""
        return 1.0 / (2.0 * self.dpsi(s))


@dataclass
class ScalarField:
    values: np.ndarray
    grid: GridSpec
    pinned: np.ndarray
    residual_norm: float = 0.0
    singular_columns: Tuple[int, ...] = ()
    singular_set: Optional[SingularSet] = None
    config: Optional[StripConfig] = None
    options: Optional[SolverOptions] = None
    eps_cap: float = 0.0
    eps_bdry: float = 0.0
    iterations: int = 0
    capped_cells: int = 0
    lightlike_cells: int = 0
    # lightlike triangles away from pinned nodes and data corners
    ridge_mask: Optional[np.ndarray] = None
    # conjugate function only: values at cell centres and axis edge midpoints
    cell_values: Optional[np.ndarray] = None
    axis_values: Optional[np.ndarray] = None

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray,
                    pinned: Optional[np.ndarray] = None, eps_cap: float = 0.0) -> "ScalarField":
        values = np.asarray(values, dtype=float).reshape(grid.shape)
        if pinned is None:
            pinned = boundary_mask(grid)
        return cls(values=values.copy(), grid=grid, pinned=np.asarray(pinned, dtype=bool),
                   eps_cap=eps_cap or grid.hx * grid.hx)

    @property
    def h(self) -> float:
        return self.grid.hx

    @property
    def ridge_cells(self) -> int:
        return 0 if self.ridge_mask is None else int(np.count_nonzero(self.ridge_mask))

    @property
    def tol_pde(self) -> float:
        return self.options.tol_pde if self.options is not None else DEFAULT_TOL_PDE

    @property
    def free_mask(self) -> np.ndarray:
        return ~self.pinned & ~boundary_mask(self.grid)

    @property
    def singular_mask(self) -> np.ndarray:
        mask = np.zeros(self.grid.shape, dtype=bool)
        if self.singular_columns:
            mask[self.grid.axis_row, list(self.singular_columns)] = True
        return mask

    def node_value(self, x: float, y: float) -> float:
        i = int(round((x - self.grid.x0) / self.grid.hx))
        j = int(round((y - self.grid.y0) / self.grid.hy))
        return float(self.values[j, i])


def boundary_mask(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def contracted_data(values, eps_bdry: float):
    return 0.5 + (1.0 - eps_bdry) * (np.asarray(values, dtype=float) - 0.5)


def dirichlet_values(grid: GridSpec, eps_bdry: float) -> np.ndarray:
    """phi_n contracted towards 1/2: tent on the horizontal rows, 0 on the vertical edges."""
    data = np.zeros(grid.shape)
    top = contracted_data(phi_values(grid.x), eps_bdry)
    data[0, :] = top
    data[-1, :] = top
    data[:, 0] = contracted_data(0.0, eps_bdry)
    data[:, -1] = contracted_data(0.0, eps_bdry)
    return data


def _initial_guess(grid: GridSpec, columns: Tuple[int, ...], eps_bdry: float) -> np.ndarray:
    xx, yy = np.meshgrid(grid.x, grid.y)
    ell = -grid.y0
    top = contracted_data(phi_values(grid.x), eps_bdry)
    guess = 0.5 + (top[None, :] - 0.5) * (yy / ell) ** 2

    floor = contracted_data(0.0, eps_bdry)
    left, right = grid.window
    guess = np.minimum(guess, floor + INITIAL_CONE_SLOPE * np.minimum(xx - left, right - xx))
    for c in columns:
        guess = np.minimum(guess, INITIAL_CONE_SLOPE * np.hypot(xx - grid.x[c], yy))
    return guess


def _symmetry_group(grid: GridSpec, columns: Tuple[int, ...]) -> List[np.ndarray]:
    """Node permutations for y -> -y and, when S and the window allow it, the
    point reflection about the window centre."""
    jj, ii = np.meshgrid(np.arange(grid.ny), np.arange(grid.nx), indexing="ij")
    flip_y = (grid.ny - 1 - jj) * grid.nx + ii
    group = [flip_y.reshape(-1)]

    mirrored = tuple(sorted(grid.nx - 1 - c for c in columns))
    if mirrored == tuple(sorted(columns)):
        point = (grid.ny - 1 - jj) * grid.nx + (grid.nx - 1 - ii)
        flip_x = jj * grid.nx + (grid.nx - 1 - ii)
        group.extend([point.reshape(-1), flip_x.reshape(-1)])
    return group


def _symmetrize(v: np.ndarray, group: List[np.ndarray]) -> np.ndarray:
    total = v.copy()
    for perm in group:
        total += v[perm]
    return total / (len(group) + 1)


def _triangle_energy(grid: GridSpec, v: np.ndarray, cap: CappedArea) -> float:
    gx, gy = grid.gradients(v)
    return grid.triangle_area * float(np.sum(cap.psi(gx * gx + gy * gy)))


def divergence(grid: GridSpec, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Discrete divergence at every node, in divergence units: sum over the
    node's triangles of area * f . grad(phi_node), divided by hx * hy."""
    dx, dy = grid.gradient_operators
    return 0.5 * (dx.T @ fx + dy.T @ fy)


def _newton(grid: GridSpec, v0: np.ndarray, pinned: np.ndarray, options: SolverOptions,
            cap: CappedArea, group: List[np.ndarray]) -> Tuple[np.ndarray, float, int]:
    dx, dy = grid.gradient_operators
    area = grid.triangle_area
    free_idx = np.flatnonzero(~pinned.reshape(-1))
    v = v0.reshape(-1).copy()

    if free_idx.size == 0:
        return v, 0.0, 0

    dx_free = dx.tocsc()[:, free_idx]
    dy_free = dy.tocsc()[:, free_idx]

    best: Optional[Tuple[np.ndarray, float]] = None
    res = np.inf
    iteration = 0

    for iteration in range(options.max_iter + 1):
        gx, gy = dx @ v, dy @ v
        s = gx * gx + gy * gy
        d1 = cap.dpsi(s)
        r = divergence(grid, 2.0 * d1 * gx, 2.0 * d1 * gy)
        res = float(np.max(np.abs(r[free_idx])))
        logger.debug("newton %d: residual %.3e, max|g| %.6f", iteration, res, float(np.sqrt(s.max())))

        if best is not None:
            # polishing step done
            if res > best[1]:
                v, res = best
            break
        if res <= options.tol_pde:
            best = (v.copy(), res)
            if not options.polish:
                break
        elif iteration >= options.max_iter:
            raise NonConvergenceError(
                f"Newton did not reach residual {options.tol_pde:.1e} in {options.max_iter} iterations",
                last_residual=res, iterations=iteration,
            )

        d2 = cap.d2psi(s)
        mxx = sparse.diags(area * (2.0 * d1 + 4.0 * d2 * gx * gx))
        mxy = sparse.diags(area * 4.0 * d2 * gx * gy)
        myy = sparse.diags(area * (2.0 * d1 + 4.0 * d2 * gy * gy))
        hessian = (dx_free.T @ mxx @ dx_free + dx_free.T @ mxy @ dy_free
                   + dy_free.T @ mxy @ dx_free + dy_free.T @ myy @ dy_free)

        grad = 2.0 * area * r[free_idx]
        step = spsolve(hessian.tocsc(), -grad)
        slope = float(grad @ step)

        energy0 = _triangle_energy(grid, v, cap)
        t = 1.0
        while True:
            trial = v.copy()
            trial[free_idx] += t * step
            energy = _triangle_energy(grid, trial, cap)
            if energy <= energy0 + LINE_SEARCH_ARMIJO * t * slope + LINE_SEARCH_ENERGY_SLACK * abs(energy0):
                break
            t *= LINE_SEARCH_SHRINK
            if t < LINE_SEARCH_MIN_STEP:
                if best is not None:
                    trial = None
                    break
                raise NonConvergenceError(
                    "line search failed to decrease the energy", last_residual=res, iterations=iteration
                )
        if trial is None:
            v, res = best
            break

        v = _symmetrize(trial, group)

    return v, res, iteration


def _field_diagnostics(grid: GridSpec, values: np.ndarray, pinned: np.ndarray,
                       cap: CappedArea) -> Tuple[int, int, np.ndarray]:
    gx, gy = grid.gradients(values)
    s = gx * gx + gy * gy
    lightlike = s >= 1.0
    return int(np.count_nonzero(s > cap.s_cap)), int(np.count_nonzero(lightlike)), lightlike & _ridge_region(grid, pinned)


def _ridge_region(grid: GridSpec, pinned: np.ndarray) -> np.ndarray:
    """Triangles where |grad v| must stay below 1: away from pins and data corners."""
    return ~grid.triangles_touching(pinned) & ~grid.vertex_zone(VERTEX_ZONE_CELLS)


def _solve_on_grid(grid: GridSpec, columns: Tuple[int, ...], options: SolverOptions,
                   initial: Optional[np.ndarray] = None,
                   pinned_values: Optional[np.ndarray] = None) -> ScalarField:
    eps_cap, eps_bdry = options.caps(grid.hx)
    cap = CappedArea(eps_cap)

    pinned = boundary_mask(grid)
    data = dirichlet_values(grid, eps_bdry) if pinned_values is None else pinned_values.copy()
    for c in columns:
        pinned[grid.axis_row, c] = True
        data[grid.axis_row, c] = 0.0

    guess = _initial_guess(grid, columns, eps_bdry) if initial is None else np.array(initial, dtype=float)
    guess[pinned] = data[pinned]

    group = _symmetry_group(grid, columns)
    values, res, iterations = _newton(grid, guess, pinned, options, cap, group)
    values = values.reshape(grid.shape)

    capped, lightlike, ridge = _field_diagnostics(grid, values, pinned, cap)
    if capped:
        logger.info("%d triangles beyond the gradient cap (|g| > %.6f)", capped, 1.0 - eps_cap)
    if ridge.any():
        logger.warning("%d lightlike triangles away from pinned nodes and data corners", int(ridge.sum()))
    elif lightlike:
        logger.info("%d lightlike triangles at pinned nodes or data corners", lightlike)

    logger.debug("solved %dx%d grid in %d iterations, residual %.3e", grid.nx, grid.ny, iterations, res)
    return ScalarField(
        values=values,
        grid=grid,
        pinned=pinned,
        residual_norm=res,
        singular_columns=tuple(columns),
        options=options,
        eps_cap=eps_cap,
        eps_bdry=eps_bdry,
        iterations=iterations,
        capped_cells=capped,
        lightlike_cells=lightlike,
        ridge_mask=ridge,
    )


def solve_dirichlet(cfg: StripConfig, S: SingularSet, tol_pde: Optional[float] = None,
                    options: Optional[SolverOptions] = None) -> ScalarField:
    options = options or SolverOptions()
    if tol_pde is not None:
        options = replace(options, tol_pde=tol_pde)

    verdict = check_admissible(cfg, S)
    if not verdict:
        raise AdmissibilityError(verdict.describe())

    grid = cfg.grid_for(S)
    columns, snapped = snap_singular_set(grid, S)

    initial = None
    if grid.hx < NESTED_START_BELOW_H:
        initial = _nested_guess(cfg, S, grid, tuple(columns), options)

    result = _solve_on_grid(grid, tuple(columns), options, initial=initial)
    result.singular_set = snapped
    result.config = cfg
    return result


def _interpolate(field: ScalarField, grid: GridSpec) -> np.ndarray:
    interpolator = RegularGridInterpolator((field.grid.y, field.grid.x), field.values)
    yy, xx = np.meshgrid(grid.y, grid.x, indexing="ij")
    return interpolator(np.stack([yy.ravel(), xx.ravel()], axis=-1)).reshape(grid.shape)


def _nested_guess(cfg: StripConfig, S: SingularSet, grid: GridSpec, columns: Tuple[int, ...],
                  options: SolverOptions) -> Optional[np.ndarray]:
    """Solution at twice the step, interpolated and pushed below the cones at the pins."""
    coarse_cfg = cfg.with_grid_h(2.0 * grid.hx)
    try:
        coarse = solve_dirichlet(coarse_cfg, S, options=replace(options, eps_cap=None, eps_bdry=None))
    except ConstructionError as e:
        logger.warning("coarse start at h=%.5g failed (%s); using the cone guess", coarse_cfg.grid_h, e)
        return None

    guess = _interpolate(coarse, grid)
    xx, yy = np.meshgrid(grid.x, grid.y)
    for c in columns:
        guess = np.minimum(guess, INITIAL_CONE_SLOPE * np.hypot(xx - grid.x[c], yy))
    logger.debug("nested start from h=%.5g (%d iterations)", coarse.h, coarse.iterations)
    return guess


def triangle_gradients(field: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
    return field.grid.gradients(field.values)


def residual(field: ScalarField) -> float:
    grid = field.grid
    gx, gy = triangle_gradients(field)
    s = gx * gx + gy * gy

    lightlike = (s >= 1.0) & _ridge_region(grid, field.pinned)
    if lightlike.any():
        raise LightlikeCellError(f"{int(lightlike.sum())} triangles with |grad v| >= 1 "
                                 f"away from pinned nodes and data corners")

    cap = CappedArea(field.eps_cap or grid.hx * grid.hx)
    d1 = cap.dpsi(s)
    r = divergence(grid, 2.0 * d1 * gx, 2.0 * d1 * gy).reshape(grid.shape)
    free = field.free_mask
    if not free.any():
        return 0.0
    return float(np.max(np.abs(r[free])))


def node_residuals(field: ScalarField) -> np.ndarray:
    grid = field.grid
    gx, gy = triangle_gradients(field)
    cap = CappedArea(field.eps_cap or grid.hx * grid.hx)
    d1 = cap.dpsi(gx * gx + gy * gy)
    return divergence(grid, 2.0 * d1 * gx, 2.0 * d1 * gy).reshape(grid.shape)


def refine_and_resolve(field: ScalarField, factor: int) -> ScalarField:
    if not isinstance(factor, int) or factor < 2 or factor > MAX_REFINE_FACTOR:
        raise DomainError(f"refinement factor must be an integer in [2, {MAX_REFINE_FACTOR}]")

    fine = field.grid.refine(factor)
    guess = _interpolate(field, fine)

    options = field.options or SolverOptions()
    columns = tuple(c * factor for c in field.singular_columns)
    pinned_values = None
    if field.config is None:
        # not a strip solve: keep the interpolated boundary values
        pinned_values = guess.copy()

    result = _solve_on_grid(fine, columns, options, initial=guess, pinned_values=pinned_values)
    result.singular_set = field.singular_set
    if field.config is not None:
        result.config = field.config.with_grid_h(fine.hx)
    logger.info("refined h=%.5g -> %.5g, residual %.3e", field.h, fine.hx, result.residual_norm)
    return result


def exhaustion_probe(cfg: StripConfig, S: SingularSet, steps: int = 3,
                     options: Optional[SolverOptions] = None,
                     centre: float = 0.0, radius: float = 1.0,
                     threads: Optional[int] = None) -> List[float]:
    """Sup-norm change of v on [centre - radius, centre + radius] x [-ell, ell]
    as both window ends move out by 2."""
    base = cfg.window_for(S)
    windows = [(base[0] - 2.0 * k, base[1] + 2.0 * k) for k in range(steps + 1)]

    def patch(window: Tuple[float, float]) -> np.ndarray:
        solved = solve_dirichlet(cfg.with_window(window), S, options=options)
        cols = np.flatnonzero(np.abs(solved.grid.x - centre) <= radius + 1e-12)
        return solved.values[:, cols]

    patches = parallel_map(patch, windows, threads)
    changes: List[float] = []
    for window, previous, current in zip(windows[1:], patches, patches[1:]):
        changes.append(float(np.max(np.abs(current - previous))))
        logger.info("exhaustion window %s: change %.3e", window, changes[-1])
    return changes


def dump_csv(field: ScalarField, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "v"])
        for j in range(grid.ny):
            for i in range(grid.nx):
                writer.writerow([
                    CSV_FLOAT_FORMAT.format(grid.x[i]),
                    CSV_FLOAT_FORMAT.format(grid.y[j]),
                    CSV_FLOAT_FORMAT.format(field.values[j, i]),
                ])
    return path


def dump_binary(field: ScalarField, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    left, right = grid.window
    header = (
        f"nx {grid.nx}\n"
        f"ny {grid.ny}\n"
        f"h {grid.hx!r} {grid.hy!r}\n"
        f"L {left!r} {right!r}\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def load_binary(path: Path) -> ScalarField:
    with open(path, "rb") as f:
        lines = [f.readline().decode("ascii").split() for _ in range(4)]
        payload = f.read()

    try:
        nx = int(lines[0][1])
        ny = int(lines[1][1])
        hx, hy = float(lines[2][1]), float(lines[2][2])
        left = float(lines[3][1])
    except (IndexError, ValueError) as e:
        raise DomainError(f"malformed field header in {path}: {e}")

    values = np.frombuffer(payload, dtype="<f8")
    if values.size != nx * ny:
        raise DomainError(f"{path}: expected {nx * ny} values, found {values.size}")

    grid = GridSpec(x0=left, nx=nx, hx=hx, y0=-hy * (ny - 1) / 2.0, ny=ny, hy=hy)
    return ScalarField.from_values(grid, values.reshape(ny, nx).copy())
