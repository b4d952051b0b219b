import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DomainError
from .grid import GridSpec
from ..config.defaults import (
    DEFAULT_GRID_H,
    DEFAULT_ETA0_FRACTION,
    DEFAULT_WINDOW_MARGIN,
    GRID_ALIGNMENT_TOL,
)
from ..config.keys import SettingsKeys
from ..utils.validators import validate_grid_h, validate_window

logger = logging.getLogger(__name__)

# slack for equality cases of the Lipschitz condition along boundary lines
LIPSCHITZ_SLACK = 1e-12


def eta_of_ell(ell: float) -> float:
    if not isinstance(ell, (int, float)) or not 0.0 < ell < 1.0:
        raise DomainError(f"ell must lie in (0, 1), got {ell!r}")
    return 1.0 - math.sqrt(1.0 - ell * ell)


@dataclass(frozen=True)
class StripConfig:
    ell: float
    grid_h: float = DEFAULT_GRID_H
    eta0: Optional[float] = None
    x_window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        eta = eta_of_ell(self.ell)

        ok, error = validate_grid_h(self.grid_h)
        if not ok:
            raise DomainError(error)

        if self.eta0 is None:
            object.__setattr__(self, "eta0", DEFAULT_ETA0_FRACTION * eta)
        elif not 0.0 < self.eta0 < eta:
            raise DomainError(f"eta0 must lie in (0, eta={eta:.6g}), got {self.eta0!r}")

        if self.x_window is not None:
            window = (float(self.x_window[0]), float(self.x_window[1]))
            ok, error = validate_window(window)
            if not ok:
                raise DomainError(error)
            object.__setattr__(self, "x_window", window)

    @property
    def eta(self) -> float:
        return eta_of_ell(self.ell)

    @property
    def odd_vertex_clearance(self) -> float:
        # dist(q, odd integer) must exceed this for admissibility
        return math.sqrt(1.0 - self.ell * self.ell)

    def with_grid_h(self, grid_h: float) -> "StripConfig":
        return replace(self, grid_h=grid_h)

    def with_window(self, window: Optional[Tuple[float, float]]) -> "StripConfig":
        return replace(self, x_window=window)

    def with_eta0(self, eta0: float) -> "StripConfig":
        return replace(self, eta0=eta0)

    def window_for(self, S: "SingularSet") -> Tuple[float, float]:
        if self.x_window is not None:
            window = self.x_window
        elif len(S) == 0:
            window = (-float(DEFAULT_WINDOW_MARGIN), float(DEFAULT_WINDOW_MARGIN))
        else:
            window = (2.0 * min(S.p) - DEFAULT_WINDOW_MARGIN, 2.0 * max(S.p) + DEFAULT_WINDOW_MARGIN)

        for q in S.q:
            if not window[0] + 1.0 <= q <= window[1] - 1.0:
                raise DomainError(f"singular point {q} is within 1 of the window ends {window}")
        return window

    def grid_for(self, S: "SingularSet") -> GridSpec:
        return GridSpec.for_strip(self.ell, self.window_for(S), self.grid_h)

    @classmethod
    def from_settings(cls, settings) -> "StripConfig":
        eta0 = settings.get(SettingsKeys.Periods.ETA0)
        if isinstance(eta0, str):
            # 'calibrate' is resolved by the pipeline
            eta0 = None
        window = settings.get(SettingsKeys.Strip.X_WINDOW)
        return cls(
            ell=float(settings.get(SettingsKeys.Strip.ELL)),
            grid_h=float(settings.get(SettingsKeys.Strip.GRID_H)),
            eta0=eta0,
            x_window=tuple(window) if window else None,
        )


@dataclass(frozen=True)
class SingularSet:
    q: Tuple[float, ...] = ()
    p: Tuple[int, ...] = ()

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        p = tuple(int(v) for v in self.p)
        if len(q) != len(p):
            raise DomainError(f"q and p must have the same length ({len(q)} != {len(p)})")
        if any(b <= a for a, b in zip(q, q[1:])):
            raise DomainError(f"q must be strictly increasing: {q}")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise DomainError(f"p must be strictly increasing: {p}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def centred(cls, p: Sequence[int]) -> "SingularSet":
        return cls(q=tuple(2.0 * v for v in p), p=tuple(p))

    @classmethod
    def empty(cls) -> "SingularSet":
        return cls()

    def __len__(self) -> int:
        return len(self.q)

    @property
    def offsets(self) -> List[float]:
        return [q - 2.0 * p for q, p in zip(self.q, self.p)]

    def with_q(self, i: int, value: float) -> "SingularSet":
        q = list(self.q)
        q[i] = value
        return SingularSet(q=tuple(q), p=self.p)

    def with_offsets(self, offsets: Sequence[float]) -> "SingularSet":
        return SingularSet(q=tuple(2.0 * p + r for p, r in zip(self.p, offsets)), p=self.p)

    def in_boxes(self, eta0: float) -> bool:
        return all(abs(r) <= eta0 + GRID_ALIGNMENT_TOL for r in self.offsets)


def phi_values(x) -> np.ndarray:
    """Tent data on y = +-ell: distance to the nearest even integer."""
    r = np.mod(np.asarray(x, dtype=float), 2.0)
    return np.minimum(r, 2.0 - r)


def phi_eval(cfg: StripConfig, point: Tuple[float, float]) -> float:
    x, y = point
    if abs(abs(y) - cfg.ell) > GRID_ALIGNMENT_TOL:
        raise DomainError(f"point {point} is not on the boundary lines y = +-{cfg.ell}")
    return float(phi_values(x))


@dataclass
class AdmissibilityVerdict:
    admissible: bool
    index: Optional[int] = None
    q: Optional[float] = None
    odd_vertex: Optional[int] = None
    distance: float = math.inf
    threshold: float = 0.0
    distances: List[float] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.admissible

    def describe(self) -> str:
        if self.admissible:
            return "admissible"
        return (
            f"q[{self.index}]={self.q:.6g} is at distance {self.distance:.6g} from the odd "
            f"vertex x={self.odd_vertex} (must exceed {self.threshold:.6g})"
        )


def check_admissible(cfg: StripConfig, S: SingularSet) -> AdmissibilityVerdict:
    threshold = cfg.odd_vertex_clearance
    distances: List[float] = []
    verdict = AdmissibilityVerdict(True, threshold=threshold)

    for i, q in enumerate(S.q):
        odd = 2 * math.floor(q / 2.0) + 1
        distance = abs(q - odd)
        distances.append(distance)
        # |q - a_{2k+1}| > 1 with a_{2k+1} = (2k+1, +-ell)
        if not distance * distance + cfg.ell * cfg.ell > 1.0 and verdict.admissible:
            verdict = AdmissibilityVerdict(
                False, index=i, q=q, odd_vertex=odd, distance=distance, threshold=threshold
            )

    verdict.distances = distances
    return verdict


@dataclass
class LipschitzVerdict:
    admissible: bool
    pair: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    values: Optional[Tuple[float, float]] = None
    excess: float = 0.0
    checked_pairs: int = 0

    def __bool__(self) -> bool:
        return self.admissible


def check_lipschitz_condition(
    cfg: StripConfig,
    points: Sequence[Tuple[float, float]],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> LipschitzVerdict:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if len(pts) != len(vals):
        raise DomainError("points and values must have the same length")
    if len(pts) < 2:
        return LipschitzVerdict(True)

    x_lo = window[0] if window is not None else -math.inf
    x_hi = window[1] if window is not None else math.inf

    ii, jj = np.triu_indices(len(pts), k=1)
    dist = np.hypot(pts[ii, 0] - pts[jj, 0], pts[ii, 1] - pts[jj, 1])
    jump = np.abs(vals[ii] - vals[jj])

    # pairs on a common boundary line may attain equality; corners lie on two lines
    same_line = np.zeros(len(ii), dtype=bool)
    for line_id, coord, target in ((2, 0, x_lo), (3, 0, x_hi), (0, 1, cfg.ell), (1, 1, -cfg.ell)):
        if not math.isfinite(target):
            continue
        on_i = np.abs(pts[ii, coord] - target) <= GRID_ALIGNMENT_TOL
        on_j = np.abs(pts[jj, coord] - target) <= GRID_ALIGNMENT_TOL
        same_line |= on_i & on_j

    strict_violation = (~same_line) & (jump >= dist) & (jump > 0)
    loose_violation = same_line & (jump > dist + LIPSCHITZ_SLACK)
    bad = np.flatnonzero(strict_violation | loose_violation)

    if bad.size == 0:
        return LipschitzVerdict(True, checked_pairs=len(ii))

    k = bad[0]
    a, b = ii[k], jj[k]
    return LipschitzVerdict(
        False,
        pair=(tuple(pts[a]), tuple(pts[b])),
        values=(float(vals[a]), float(vals[b])),
        excess=float(jump[k] - dist[k]),
        checked_pairs=len(ii),
    )


def boundary_data(cfg: StripConfig, S: SingularSet, window: Tuple[float, float],
                  samples_per_unit: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Sampled Dirichlet data of the truncated problem: phi on the horizontal
    lines, 0 on the vertical edges and on S."""
    left, right = window
    n = int(round((right - left) * samples_per_unit)) + 1
    xs = np.linspace(left, right, n)
    m = max(2, int(round(2 * cfg.ell * samples_per_unit)) + 1)
    ys = np.linspace(-cfg.ell, cfg.ell, m)[1:-1]

    points = [np.stack([xs, np.full(n, cfg.ell)], axis=-1),
              np.stack([xs, np.full(n, -cfg.ell)], axis=-1),
              np.stack([np.full(len(ys), left), ys], axis=-1),
              np.stack([np.full(len(ys), right), ys], axis=-1)]
    values = [phi_values(xs), phi_values(xs), np.zeros(len(ys)), np.zeros(len(ys))]
    if len(S):
        points.append(np.stack([np.asarray(S.q), np.zeros(len(S))], axis=-1))
        values.append(np.zeros(len(S)))
    return np.concatenate(points), np.concatenate(values)


def snap_singular_set(grid: GridSpec, S: SingularSet) -> Tuple[List[int], SingularSet]:
    """Nearest axis node per singular point; exact ties round toward 2p."""
    columns: List[int] = []
    for q, p in zip(S.q, S.p):
        pos = (q - grid.x0) / grid.hx
        lower = math.floor(pos)
        frac = pos - lower
        if abs(frac - 0.5) <= GRID_ALIGNMENT_TOL:
            target = (2.0 * p - grid.x0) / grid.hx
            column = lower if abs(lower - target) <= abs(lower + 1 - target) else lower + 1
        else:
            column = int(round(pos))
        if not 1 <= column <= grid.nx - 2:
            raise DomainError(f"singular point {q} snaps outside the grid interior")
        columns.append(int(column))

    if any(b <= a for a, b in zip(columns, columns[1:])):
        raise DomainError(f"singular points {S.q} collide after snapping to h={grid.hx}")

    snapped = SingularSet(q=tuple(float(grid.x[c]) for c in columns), p=S.p)
    return columns, snapped
