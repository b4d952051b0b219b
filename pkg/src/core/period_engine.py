import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .conjugation import (
    ConjugateForms,
    build_forms,
    closedness_bound,
    half_loop_integral,
    handle_size,
    period_integral,
)
from .exceptions import AdmissibilityError, CalibrationError, DomainError
from .maximal_solver import SolverOptions, solve_dirichlet
from .strip_domain import SingularSet, StripConfig, check_admissible, snap_singular_set
from ..config.defaults import (
    DEFAULT_F_THRESHOLD,
    DEFAULT_SAMPLES_PER_FACE,
    DEFAULT_SCAN_RESOLUTION,
    DEFAULT_SEED,
    FACE_SAMPLE_ATTEMPTS,
    GRID_ALIGNMENT_TOL,
    GUARD_BAND_FACTOR,
)
from ..config.keys import SettingsKeys
from ..utils.parallel import WorkerPool

logger = logging.getLogger(__name__)


@dataclass
class PeriodReport:
    q: SingularSet
    F: List[float]
    handle_sizes: List[float]
    half_loop_check: List[float]
    grid_h: float
    closedness_bounds: List[float] = field(default_factory=list)
    residual_norm: float = 0.0
    f_threshold: float = DEFAULT_F_THRESHOLD
    loop_radius_cells: int = 0
    ridge_cells: int = 0
    # filled by verify_solution
    reference_F: Optional[List[float]] = None
    acceptance_tol: Optional[float] = None
    verified: Optional[bool] = None

    @property
    def max_abs_F(self) -> float:
        return max((abs(f) for f in self.F), default=0.0)

    @property
    def drift(self) -> List[float]:
        if self.reference_F is None:
            return []
        return [abs(a - b) for a, b in zip(self.F, self.reference_F)]

    def rows(self) -> List[Tuple[int, int, float, float, float, float, float]]:
        return [
            (i, p, q, f, hs, check, bound)
            for i, (p, q, f, hs, check, bound) in enumerate(
                zip(self.q.p, self.q.q, self.F, self.handle_sizes, self.half_loop_check, self.closedness_bounds)
            )
        ]


def report_from_forms(forms: ConjugateForms, f_threshold: float = DEFAULT_F_THRESHOLD) -> PeriodReport:
    field_ = forms.field
    J = forms.grid.axis_row
    F, sizes, checks, bounds = [], [], [], []

    for i, column in enumerate(field_.singular_columns):
        f_i = period_integral(forms, i)
        F.append(f_i)
        sizes.append(handle_size(forms, i))
        checks.append(abs(f_i - 2.0 * half_loop_integral(forms, i, "dX1")))
        bounds.append(closedness_bound(forms, column, J))

    return PeriodReport(
        q=field_.singular_set or SingularSet.empty(),
        F=F,
        handle_sizes=sizes,
        half_loop_check=checks,
        grid_h=forms.grid.hx,
        closedness_bounds=bounds,
        residual_norm=field_.residual_norm,
        f_threshold=f_threshold,
        loop_radius_cells=forms.loop_radius_cells,
        ridge_cells=field_.ridge_cells,
    )


def periods(cfg: StripConfig, S: SingularSet, options: Optional[SolverOptions] = None,
            loop_radius: Optional[float] = None,
            f_threshold: float = DEFAULT_F_THRESHOLD) -> PeriodReport:
    solved = solve_dirichlet(cfg, S, options=options)
    report = report_from_forms(build_forms(solved, loop_radius), f_threshold)
    logger.debug("periods at q=%s: F=%s", report.q.q, ["%.4e" % f for f in report.F])
    return report


class PeriodEngine:
    """Memoised period evaluation on the snapped lattice.

    Two singular sets that snap to the same grid columns share one solve.
    """

    def __init__(
        self,
        cfg: StripConfig,
        options: Optional[SolverOptions] = None,
        loop_radius: Optional[float] = None,
        f_threshold: float = DEFAULT_F_THRESHOLD,
        threads: Optional[int] = None,
    ):
        self.cfg = cfg
        self.options = options or SolverOptions()
        self.loop_radius = loop_radius
        self.f_threshold = f_threshold
        self._pool = WorkerPool(threads)
        self._cache: Dict[Tuple, PeriodReport] = {}
        self._lock = threading.Lock()
        self._solves = 0

    @classmethod
    def from_settings(cls, settings, cfg: Optional[StripConfig] = None) -> "PeriodEngine":
        return cls(
            cfg or StripConfig.from_settings(settings),
            options=SolverOptions.from_settings(settings),
            loop_radius=settings.get(SettingsKeys.Periods.LOOP_RADIUS),
            f_threshold=float(settings.get(SettingsKeys.Periods.F_THRESHOLD)),
            threads=settings.get(SettingsKeys.Output.THREADS),
        )

    @property
    def h(self) -> float:
        return self.cfg.grid_h

    @property
    def solves(self) -> int:
        return self._solves

    def key(self, S: SingularSet) -> Tuple:
        grid = self.cfg.grid_for(S)
        columns, _ = snap_singular_set(grid, S)
        return (grid.window, grid.hx, tuple(columns), S.p)

    def evaluate(self, S: SingularSet) -> PeriodReport:
        key = self.key(S)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        report = periods(self.cfg, S, options=self.options,
                         loop_radius=self.loop_radius, f_threshold=self.f_threshold)
        with self._lock:
            self._cache.setdefault(key, report)
            self._solves += 1
        return report

    def evaluate_many(self, configs: Iterable[SingularSet]) -> List[PeriodReport]:
        return self._pool.map(self.evaluate, list(configs))

    def F(self, S: SingularSet, i: int) -> float:
        return self.evaluate(S).F[i]

    def forms(self, S: SingularSet) -> ConjugateForms:
        solved = solve_dirichlet(self.cfg, S, options=self.options)
        return build_forms(solved, self.loop_radius)

    def refined(self, factor: int = 2) -> "PeriodEngine":
        return PeriodEngine(
            self.cfg.with_grid_h(self.cfg.grid_h / factor),
            options=self.options,
            loop_radius=self.loop_radius,
            f_threshold=self.f_threshold,
            threads=self._pool.threads,
        )

    def close(self) -> None:
        self._pool.shutdown()

    def __enter__(self) -> "PeriodEngine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def lattice_half_width(h: float, eta0: float) -> float:
    """Largest multiple of h not exceeding eta0."""
    return math.floor(eta0 / h + GRID_ALIGNMENT_TOL) * h


def snapping_noise(engine: PeriodEngine, S: SingularSet, i: int, toward: int = 0) -> float:
    """Half the change of F_i over one lattice step of q_i.

    toward=0 takes the central difference when both neighbours are admissible;
    toward=+-1 takes the one-sided step q_i -> q_i + toward * h.
    """
    h = engine.h
    q = S.q[i]

    def admissible(step: float) -> bool:
        return bool(check_admissible(engine.cfg, S.with_q(i, q + step)))

    if toward == 0 and admissible(h) and admissible(-h):
        plus, minus = engine.evaluate_many([S.with_q(i, q + h), S.with_q(i, q - h)])
        return abs(plus.F[i] - minus.F[i]) / 4.0

    steps = (toward * h,) if toward else (h, -h)
    for step in steps:
        if admissible(step):
            base, moved = engine.evaluate_many([S, S.with_q(i, q + step)])
            return abs(moved.F[i] - base.F[i]) / 2.0
    raise DomainError(f"no admissible lattice neighbour of q[{i}]={q}")


def continuity_probe(cfg: StripConfig, S: SingularSet, i: int, delta_q: float,
                     engine: Optional[PeriodEngine] = None) -> float:
    engine = engine or PeriodEngine(cfg)
    if delta_q != 0.0 and abs(delta_q) < cfg.grid_h * (1.0 - GRID_ALIGNMENT_TOL):
        raise DomainError(f"delta_q={delta_q} is below the lattice resolution h={cfg.grid_h}")

    moved = S.with_q(i, S.q[i] + delta_q)
    verdict = check_admissible(cfg, moved)
    if not verdict:
        raise AdmissibilityError(f"perturbed configuration is inadmissible: {verdict.describe()}")

    base, shifted = engine.evaluate_many([S, moved])
    return abs(shifted.F[i] - base.F[i])


@dataclass
class FaceResult:
    index: int
    side: int
    q_face: float
    values: List[float]
    noise: float
    guard: float

    @property
    def passed(self) -> bool:
        return all(self.side * f >= self.guard and self.side * f > 0.0 for f in self.values)


@dataclass
class FaceSignVerdict:
    p: Tuple[int, ...]
    eta0: float
    faces: List[FaceResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(face.passed for face in self.faces)

    def __bool__(self) -> bool:
        return self.passed

    @property
    def failed_faces(self) -> List[FaceResult]:
        return [face for face in self.faces if not face.passed]

    def describe(self) -> str:
        if self.passed:
            return f"all {len(self.faces)} faces pass"
        parts = []
        for face in self.failed_faces:
            worst = min(face.side * f for f in face.values)
            parts.append(f"face q[{face.index}]={face.q_face:+.4f}: signed F {worst:.3e} < guard {face.guard:.3e}")
        return "; ".join(parts)


def _check_boxes(cfg: StripConfig, p: Sequence[int], eta0: float) -> None:
    if not 0.0 < eta0 < cfg.eta:
        raise DomainError(f"eta0 must lie in (0, eta={cfg.eta:.6g}), got {eta0!r}")
    for a, b in zip(p, p[1:]):
        if 2.0 * (b - a) - 2.0 * eta0 <= 0.0:
            raise DomainError(f"boxes around 2*{a} and 2*{b} overlap for eta0={eta0}")
    if lattice_half_width(cfg.grid_h, eta0) <= 0.0:
        raise DomainError(f"eta0={eta0} is below the lattice resolution h={cfg.grid_h}")


def _face_config(p: Tuple[int, ...], i: int, offset: float,
                 offsets: Optional[Sequence[float]] = None) -> SingularSet:
    shifts = list(offsets) if offsets is not None else [0.0] * len(p)
    shifts[i] = offset
    return SingularSet(q=tuple(2.0 * pk + r for pk, r in zip(p, shifts)), p=p)


def _admissible_samples(cfg: StripConfig, p: Tuple[int, ...], i: int, offset: float, steps: int,
                        count: int, rng: np.random.Generator) -> List[SingularSet]:
    """Random lattice points of the face q_i = 2 p_i + offset, inadmissible draws redrawn."""
    samples: List[SingularSet] = []
    attempts = 0
    while len(samples) < count and attempts < FACE_SAMPLE_ATTEMPTS * count:
        attempts += 1
        S = _face_config(p, i, offset, rng.integers(-steps, steps + 1, size=len(p)) * cfg.grid_h)
        if check_admissible(cfg, S):
            samples.append(S)
    if len(samples) < count:
        logger.warning("face q[%d]: %d of %d samples admissible after %d draws; filling with the face centre",
                       i, len(samples), count, attempts)
        samples.extend([_face_config(p, i, offset)] * (count - len(samples)))
    return samples


def face_sign_check(cfg: StripConfig, p: Sequence[int], eta0: float,
                    samples_per_face: int = DEFAULT_SAMPLES_PER_FACE,
                    seed: int = DEFAULT_SEED,
                    engine: Optional[PeriodEngine] = None,
                    guard_factor: float = GUARD_BAND_FACTOR) -> FaceSignVerdict:
    """Sampled sign test of F_i on the faces q_i = 2 p_i +- eta0 of the box."""
    p = tuple(int(v) for v in p)
    _check_boxes(cfg, p, eta0)
    if samples_per_face < 1:
        raise DomainError("samples_per_face must be at least 1")

    engine = engine or PeriodEngine(cfg)
    h = cfg.grid_h
    half = lattice_half_width(h, eta0)
    steps = int(round(half / h))
    rng = np.random.default_rng(seed)
    verdict = FaceSignVerdict(p=p, eta0=eta0)

    for i in range(len(p)):
        for side in (-1, 1):
            face = _face_config(p, i, side * half)
            if not check_admissible(cfg, face):
                raise AdmissibilityError(f"face q[{i}]={face.q[i]:+.4f} is inadmissible")
            configs = _admissible_samples(cfg, p, i, side * half, steps, samples_per_face, rng)
            reports = engine.evaluate_many(configs)
            # one step back into the box
            noise = snapping_noise(engine, face, i, toward=-side)
            result = FaceResult(
                index=i,
                side=side,
                q_face=2.0 * p[i] + side * half,
                values=[r.F[i] for r in reports],
                noise=noise,
                guard=guard_factor * noise,
            )
            logger.info("face q[%d]=%+.4f: F=%s, guard %.3e -> %s", i, result.q_face,
                        ["%.3e" % f for f in result.values], result.guard,
                        "pass" if result.passed else "FAIL")
            verdict.faces.append(result)

    return verdict


@dataclass
class CalibrationProfile:
    q: List[float]
    F_plain: List[float]
    F_distractor: List[float]
    f_threshold: float
    eta0: Optional[float] = None

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.q, self.F_plain, self.F_distractor))


def distractor_set(cfg: StripConfig, q: float) -> SingularSet:
    far = 2.0 - cfg.eta / 2.0
    return SingularSet(q=(-far, q, far), p=(-1, 0, 1))


def _scan_points(cfg: StripConfig, scan_resolution: int) -> List[float]:
    h = cfg.grid_h
    top = cfg.eta - 2.0 * h
    count = int(math.floor(top / h + GRID_ALIGNMENT_TOL))
    if count < 1:
        return []
    lattice = np.arange(1, count + 1)
    if len(lattice) > scan_resolution:
        picks = np.unique(np.round(np.linspace(1, count, scan_resolution)).astype(int))
        lattice = picks
    return [float(k * h) for k in lattice]


def scan_calibration(cfg: StripConfig, scan_resolution: int = DEFAULT_SCAN_RESOLUTION,
                     f_threshold: float = DEFAULT_F_THRESHOLD,
                     engine: Optional[PeriodEngine] = None) -> CalibrationProfile:
    engine = engine or PeriodEngine(cfg, f_threshold=f_threshold)
    qs = _scan_points(cfg, scan_resolution)
    plain = engine.evaluate_many([SingularSet(q=(q,), p=(0,)) for q in qs])
    distracted = engine.evaluate_many([distractor_set(cfg, q) for q in qs])

    profile = CalibrationProfile(
        q=qs,
        F_plain=[r.F[0] for r in plain],
        F_distractor=[r.F[1] for r in distracted],
        f_threshold=f_threshold,
    )

    # smallest q* with F >= threshold at every scanned q >= q*
    for k in range(len(qs)):
        if all(min(a, b) >= f_threshold for a, b in zip(profile.F_plain[k:], profile.F_distractor[k:])):
            profile.eta0 = qs[k]
            break
    return profile


def calibrate_eta0(cfg: StripConfig, scan_resolution: int = DEFAULT_SCAN_RESOLUTION,
                   f_threshold: float = DEFAULT_F_THRESHOLD,
                   engine: Optional[PeriodEngine] = None) -> float:
    profile = scan_calibration(cfg, scan_resolution, f_threshold, engine)
    if profile.eta0 is None:
        raise CalibrationError(
            f"no scanned q in (0, {cfg.eta - 2 * cfg.grid_h:.4f}) keeps F >= {f_threshold}",
            profile=profile,
        )
    logger.info("calibrated eta0=%.6g (eta=%.6g, threshold %.3g)", profile.eta0, cfg.eta, f_threshold)
    return profile.eta0


@dataclass
class ScanRow:
    q: float
    F: float
    handle_size: float


def scan_single_handle(cfg: StripConfig, qs: Sequence[float],
                       engine: Optional[PeriodEngine] = None) -> List[ScanRow]:
    engine = engine or PeriodEngine(cfg)
    reports = engine.evaluate_many([SingularSet(q=(q,), p=(0,)) for q in qs])
    return [ScanRow(q=r.q.q[0], F=r.F[0], handle_size=r.handle_sizes[0]) for r in reports]
