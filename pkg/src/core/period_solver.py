"""
Gauss-Seidel coordinate bisection for the period problem.

Each coordinate q_i lives on the lattice inside its box [2p_i - eta0, 2p_i + eta0].
A sweep bisects every coordinate once, left to right, with the others held
at their current values.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .exceptions import DomainError, PeriodError, SignChangeLostError
from .period_engine import PeriodEngine, PeriodReport, lattice_half_width, snapping_noise
from .strip_domain import SingularSet, StripConfig
from ..config.defaults import (
    BRACKET_RESOLUTION_CELLS,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL_F,
    GUARD_BAND_FACTOR,
)

logger = logging.getLogger(__name__)


class SolveStatus(Enum):
    CONVERGED = "converged"
    BRACKET_AT_RESOLUTION = "bracket-at-resolution"
    FAILED = "failed"


@dataclass
class TraceStep:
    sweep: int
    index: int
    q: Tuple[float, ...]
    F: Tuple[float, ...]
    widths: Tuple[float, ...]


@dataclass
class SolveTrace:
    cfg: StripConfig
    p: Tuple[int, ...]
    eta0: float
    tol_F: float
    iterations: List[TraceStep] = field(default_factory=list)
    status: SolveStatus = SolveStatus.FAILED
    final_q: SingularSet = field(default_factory=SingularSet.empty)
    final_F: List[float] = field(default_factory=list)
    noise: List[float] = field(default_factory=list)
    sweeps: int = 0

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    @property
    def offsets(self) -> List[float]:
        return self.final_q.offsets

    def rows(self) -> List[Tuple[int, int, float, float, float]]:
        """(sweep, i, q_i, F_i, bracket width) per bisection step."""
        return [
            (step.sweep, step.index, step.q[step.index], step.F[step.index], step.widths[step.index])
            for step in self.iterations
        ]


class _Box:
    """Lattice brackets in cell units relative to 2p."""

    def __init__(self, cfg: StripConfig, p: Tuple[int, ...], eta0: float):
        self.h = cfg.grid_h
        self.p = p
        self.steps = int(round(lattice_half_width(self.h, eta0) / self.h))
        if self.steps < 1:
            raise DomainError(f"eta0={eta0} is below the lattice resolution h={self.h}")
        self.lo = [-self.steps] * len(p)
        self.hi = [self.steps] * len(p)

    def config(self, offsets: Sequence[int]) -> SingularSet:
        for k in offsets:
            if abs(k) > self.steps:
                raise PeriodError(f"iterate offset {k} cells leaves the box of {self.steps} cells")
        return SingularSet(q=tuple(2.0 * pk + k * self.h for pk, k in zip(self.p, offsets)), p=self.p)

    def widths(self) -> Tuple[float, ...]:
        return tuple((b - a) * self.h for a, b in zip(self.lo, self.hi))

    def at_resolution(self) -> bool:
        return all(b - a <= BRACKET_RESOLUTION_CELLS for a, b in zip(self.lo, self.hi))


def solve_periods(cfg: StripConfig, p: Sequence[int], eta0: float, tol_F: float = DEFAULT_TOL_F,
                  engine: Optional[PeriodEngine] = None,
                  max_sweeps: int = DEFAULT_MAX_SWEEPS) -> SolveTrace:
    p = tuple(int(v) for v in p)
    engine = engine or PeriodEngine(cfg)
    trace = SolveTrace(cfg=cfg, p=p, eta0=eta0, tol_F=tol_F)

    if not p:
        trace.status = SolveStatus.CONVERGED
        return trace

    box = _Box(cfg, p, eta0)
    current = [0] * len(p)

    def F_at(offsets: Sequence[int]) -> List[float]:
        return engine.evaluate(box.config(offsets)).F

    for sweep in range(1, max_sweeps + 1):
        trace.sweeps = sweep
        for i in range(len(p)):
            lo, hi = box.lo[i], box.hi[i]
            if hi - lo <= BRACKET_RESOLUTION_CELLS:
                continue

            if sweep >= 2:
                at_lo = list(current)
                at_lo[i] = lo
                at_hi = list(current)
                at_hi[i] = hi
                f_lo, f_hi = (r.F[i] for r in engine.evaluate_many([box.config(at_lo), box.config(at_hi)]))
                if not f_lo < 0.0 < f_hi:
                    raise SignChangeLostError(
                        f"q[{i}] lost its sign change in sweep {sweep}: F({lo * box.h:+.4f})={f_lo:.3e}, "
                        f"F({hi * box.h:+.4f})={f_hi:.3e}",
                        state={"sweep": sweep, "index": i, "current": list(current),
                               "lo": list(box.lo), "hi": list(box.hi), "F_lo": f_lo, "F_hi": f_hi},
                    )

            mid = (lo + hi) // 2
            current[i] = mid
            values = F_at(current)
            if values[i] > 0.0:
                box.hi[i] = mid
            elif values[i] < 0.0:
                box.lo[i] = mid
            else:
                box.hi[i] = mid

            step = TraceStep(sweep=sweep, index=i, q=box.config(current).q,
                             F=tuple(values), widths=box.widths())
            trace.iterations.append(step)
            logger.debug("sweep %d q[%d]=%+.5f F=%.3e width %.4f", sweep, i, step.q[i], values[i], step.widths[i])

        values = F_at(current)
        if all(abs(f) <= tol_F for f in values):
            trace.status = SolveStatus.CONVERGED
            break
        if box.at_resolution():
            trace.status = SolveStatus.BRACKET_AT_RESOLUTION
            current = _best_bracket_points(box, current, F_at)
            break
    else:
        logger.warning("period solve stopped after %d sweeps without reaching resolution", max_sweeps)

    trace.final_q = box.config(current)
    trace.final_F = list(F_at(current))
    if trace.status == SolveStatus.BRACKET_AT_RESOLUTION and all(abs(f) <= tol_F for f in trace.final_F):
        trace.status = SolveStatus.CONVERGED
    trace.noise = [snapping_noise(engine, trace.final_q, i) for i in range(len(p))]

    logger.info("period solve %s after %d sweeps: q=%s, max|F|=%.3e", trace.status.value, trace.sweeps,
                ["%.4f" % q for q in trace.final_q.q], max(abs(f) for f in trace.final_F))
    return trace


def _best_bracket_points(box: _Box, current: List[int], F_at) -> List[int]:
    """Per coordinate, the bracket point with the smallest |F_i|; ties go left."""
    chosen = list(current)
    for i in range(len(current)):
        best: Optional[Tuple[float, int]] = None
        for k in range(box.lo[i], box.hi[i] + 1):
            trial = list(chosen)
            trial[i] = k
            value = abs(F_at(trial)[i])
            if best is None or value < best[0]:
                best = (value, k)
        chosen[i] = best[1]
    return chosen


def verify_solution(trace: SolveTrace, engine: Optional[PeriodEngine] = None,
                    factor: int = 2) -> PeriodReport:
    """Re-evaluate the periods at final_q on a grid refined by factor."""
    if not trace.p:
        report = PeriodReport(q=SingularSet.empty(), F=[], handle_sizes=[], half_loop_check=[],
                              grid_h=trace.cfg.grid_h / factor)
        report.reference_F = []
        report.acceptance_tol = trace.tol_F
        report.verified = True
        return report

    coarse = engine or PeriodEngine(trace.cfg)
    noise = trace.noise or [snapping_noise(coarse, trace.final_q, i) for i in range(len(trace.p))]
    reference = trace.final_F or coarse.evaluate(trace.final_q).F

    fine = coarse.refined(factor)
    report = fine.evaluate(trace.final_q)
    fine.close()

    report.reference_F = list(reference)
    report.acceptance_tol = max(trace.tol_F, GUARD_BAND_FACTOR * max(noise))
    report.verified = all(abs(f) <= report.acceptance_tol for f in report.F)
    logger.info("verification at h=%.5g: max|F|=%.3e (tol %.3e) -> %s", report.grid_h, report.max_abs_F,
                report.acceptance_tol, "verified" if report.verified else "NOT verified")
    return report


def reflect_configuration(S: SingularSet) -> SingularSet:
    """Image under (x, y) -> (-x, -y)."""
    return SingularSet(q=tuple(-q for q in reversed(S.q)), p=tuple(-p for p in reversed(S.p)))


def symmetrized_point(S: SingularSet, h: float) -> SingularSet:
    mirrored = reflect_configuration(S)
    if mirrored.p != S.p:
        raise DomainError(f"p={S.p} is not symmetric under x -> -x")
    q = [round((a + b) / 2.0 / h) * h for a, b in zip(S.q, mirrored.q)]
    return SingularSet(q=tuple(q), p=S.p)


def symmetrized_residual(cfg: StripConfig, trace: SolveTrace,
                         engine: Optional[PeriodEngine] = None) -> float:
    """max |F| at the point-reflection average of final_q."""
    if not trace.p:
        return 0.0
    engine = engine or PeriodEngine(cfg)
    point = symmetrized_point(trace.final_q, cfg.grid_h)
    return engine.evaluate(point).max_abs_F

