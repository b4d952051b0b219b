"""
Integer sequences indexed by a window of integers: gap sequences of handle
positions, the shift action n.x, and finite-window quasi-periodicity scans.
"""

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import SequenceError
from ..config.defaults import (
    COUNTING_MAX_INDEX,
    MAX_CONVERGENT_DENOMINATOR,
)

logger = logging.getLogger(__name__)

AlphaLike = Union[str, int, float, Fraction]

_SQRT_NAME = re.compile(r"^sqrt\(?(\d+)\)?$")


@dataclass(frozen=True)
class IndexedSequence:
    start: int
    values: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    @property
    def window(self) -> Tuple[int, int]:
        return (self.start, self.start + len(self.values) - 1)

    @property
    def indices(self) -> range:
        return range(self.start, self.start + len(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, i: int) -> bool:
        return self.start <= i < self.start + len(self.values)

    def __getitem__(self, i: int) -> int:
        if i not in self:
            raise SequenceError(f"index {i} outside window {self.window}")
        return self.values[i - self.start]

    def restrict(self, lo: int, hi: int) -> "IndexedSequence":
        lo = max(lo, self.start)
        hi = min(hi, self.window[1])
        if lo > hi:
            raise SequenceError(f"empty restriction of window {self.window} to [{lo}, {hi}]")
        return IndexedSequence(lo, self.values[lo - self.start:hi - self.start + 1])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


@dataclass(frozen=True)
class GapSequence:
    """Handle positions p on an index window, p(0) = 0, strictly increasing."""
    window: Tuple[int, int]
    p: Tuple[int, ...]
    generator: str = "explicit"
    alpha: Optional[str] = None

    def __post_init__(self):
        lo, hi = self.window
        if lo > 0 or hi < 0:
            raise SequenceError(f"window {self.window} must contain the index 0")
        if len(self.p) != hi - lo + 1:
            raise SequenceError(f"expected {hi - lo + 1} values for window {self.window}, got {len(self.p)}")
        if self.p[-lo] != 0:
            raise SequenceError("p(0) must be 0")
        if any(b <= a for a, b in zip(self.p, self.p[1:])):
            raise SequenceError(f"p must be strictly increasing: {self.p}")

    @property
    def values(self) -> IndexedSequence:
        return IndexedSequence(self.window[0], self.p)

    def __getitem__(self, i: int) -> int:
        return self.values[i]

    def __len__(self) -> int:
        return len(self.p)

    def gaps(self) -> IndexedSequence:
        return gaps(self.values)

    @classmethod
    def explicit(cls, p: Sequence[int]) -> "GapSequence":
        """Explicit handle list, re-indexed so that the handle nearest 0 has index 0."""
        values = sorted(int(v) for v in p)
        if not values:
            raise SequenceError("explicit sequence needs at least one value")
        zero = min(range(len(values)), key=lambda k: (abs(values[k]), k))
        shifted = tuple(v - values[zero] for v in values)
        return cls(window=(-zero, len(values) - 1 - zero), p=shifted)


def gaps(p: IndexedSequence) -> IndexedSequence:
    """g(i) = p(i) - p(i - 1) on [i_min + 1, i_max]."""
    if len(p) < 2:
        raise SequenceError("gap sequence needs at least two values")
    values = np.diff(p.as_array())
    return IndexedSequence(p.start + 1, tuple(values.tolist()))


def from_gaps(g: IndexedSequence, generator: str = "explicit", alpha: Optional[str] = None) -> GapSequence:
    """Positions with p(0) = 0 and p(i) - p(i - 1) = g(i)."""
    lo, hi = g.window
    if lo > 1 or hi < 0:
        raise SequenceError(f"gap window {g.window} must overlap index 0")
    if any(v <= 0 for v in g.values):
        raise SequenceError("gaps must be positive for p to be strictly increasing")
    start = lo - 1
    cumulative = np.concatenate([[0], np.cumsum(g.as_array())])
    p = cumulative - cumulative[-start]
    return GapSequence(window=(start, hi), p=tuple(int(v) for v in p), generator=generator, alpha=alpha)


def _sqrt_continued_fraction(n: int) -> Iterator[int]:
    a0 = math.isqrt(n)
    yield a0
    if a0 * a0 == n:
        return
    m, d, a = 0, 1, a0
    while True:
        m = d * a - m
        d = (n - m * m) // d
        a = (a0 + m) // d
        yield a


def _golden_continued_fraction() -> Iterator[int]:
    while True:
        yield 1


def _rational_continued_fraction(value: Fraction) -> Iterator[int]:
    while True:
        a = value.numerator // value.denominator
        yield a
        rest = value - a
        if rest == 0:
            return
        value = 1 / rest


def continued_fraction(alpha: AlphaLike) -> Iterator[int]:
    if isinstance(alpha, str):
        name = alpha.strip().lower().replace(" ", "")
        match = _SQRT_NAME.match(name)
        if match:
            return _sqrt_continued_fraction(int(match.group(1)))
        if name in ("golden", "phi"):
            return _golden_continued_fraction()
        try:
            alpha = Fraction(name)
        except ValueError:
            raise SequenceError(f"unrecognised alpha {alpha!r}")
    if isinstance(alpha, float):
        if not math.isfinite(alpha):
            raise SequenceError(f"alpha must be finite, got {alpha}")
        alpha = Fraction(alpha).limit_denominator(MAX_CONVERGENT_DENOMINATOR - 1)
    return _rational_continued_fraction(Fraction(alpha))


def convergents(alpha: AlphaLike, max_denominator: int = MAX_CONVERGENT_DENOMINATOR) -> List[Fraction]:
    """Continued-fraction convergents with denominators below max_denominator."""
    result: List[Fraction] = []
    h_prev, h = 1, 0
    k_prev, k = 0, 1
    for a in continued_fraction(alpha):
        h_prev, h = a * h_prev + h, h_prev
        k_prev, k = a * k_prev + k, k_prev
        if k_prev >= max_denominator:
            break
        result.append(Fraction(h_prev, k_prev))
    if not result:
        raise SequenceError(f"alpha {alpha!r} has no convergent below {max_denominator}")
    return result


def alpha_surrogate(alpha: AlphaLike) -> Fraction:
    return convergents(alpha)[-1]


def beatty_gaps(alpha: AlphaLike, window: Tuple[int, int]) -> GapSequence:
    """p(i) = floor(alpha * i), computed exactly on the best convergent of alpha."""
    surrogate = alpha_surrogate(alpha)
    if surrogate <= 1:
        raise SequenceError(f"alpha must exceed 1, got {float(surrogate):.6g}")
    lo, hi = window
    num, den = surrogate.numerator, surrogate.denominator
    p = tuple((num * i) // den for i in range(lo, hi + 1))
    return GapSequence(window=(lo, hi), p=p, generator="beatty", alpha=str(alpha))


def _counting_digits(n: int) -> str:
    """First n characters of 0123456789101112..."""
    parts: List[str] = []
    length = 0
    k = 0
    while length < n:
        text = str(k)
        parts.append(text)
        length += len(text)
        k += 1
    return "".join(parts)[:n]


def counting_sequence(window: Tuple[int, int]) -> IndexedSequence:
    """x(i) is the i-th digit of 0123456789101112... for i >= 1, and 0 for i <= 0."""
    lo, hi = window
    if hi > COUNTING_MAX_INDEX:
        raise SequenceError(f"counting sequence is implemented up to index {COUNTING_MAX_INDEX}")
    digits = _counting_digits(max(hi, 0))
    values = [int(digits[i - 1]) if i >= 1 else 0 for i in range(lo, hi + 1)]
    return IndexedSequence(lo, tuple(values))


def counting_gaps(window: Tuple[int, int]) -> GapSequence:
    """Positions whose gaps are g(i) = x(i) + 1 for the counting word x."""
    lo, hi = window
    g = counting_sequence((lo + 1, hi))
    shifted = IndexedSequence(g.start, tuple(v + 1 for v in g.values))
    sequence = from_gaps(shifted, generator="counting")
    return sequence


def shift(x: IndexedSequence, n: int) -> IndexedSequence:
    """(n.x)(i) = x(n + i), restricted to indices where both x and n.x are defined."""
    lo, hi = x.window
    new_lo = max(lo, lo - n)
    new_hi = min(hi, hi - n)
    if new_lo > new_hi:
        raise SequenceError(f"shift by {n} leaves no common window inside {x.window}")
    return IndexedSequence(new_lo, tuple(x[i + n] for i in range(new_lo, new_hi + 1)))


def sequence_distance(x: IndexedSequence, y: IndexedSequence) -> float:
    """sum of 2^-|i| |x(i) - y(i)| over the common window."""
    lo = max(x.start, y.start)
    hi = min(x.window[1], y.window[1])
    if lo > hi:
        raise SequenceError("sequences have no common window")
    return float(sum(2.0 ** -abs(i) * abs(x[i] - y[i]) for i in range(lo, hi + 1)))


@dataclass(frozen=True)
class ExtractionScore:
    n: int
    score: int
    total: int

    @property
    def perfect(self) -> bool:
        return self.score == self.total


def score_extractions(g: IndexedSequence, n_max: int, window_radius: int) -> List[ExtractionScore]:
    lo, hi = g.window
    if lo > -window_radius or hi < n_max + window_radius:
        raise SequenceError(
            f"window {g.window} must cover [-{window_radius}, {n_max + window_radius}]"
        )
    values = g.as_array()
    centre = values[-window_radius - lo:window_radius - lo + 1]
    scores = []
    for n in range(1, n_max + 1):
        moved = values[n - window_radius - lo:n + window_radius - lo + 1]
        scores.append(ExtractionScore(n=n, score=int(np.count_nonzero(moved == centre)), total=len(centre)))
    return scores


def quasiperiodicity_scan(g: IndexedSequence, n_max: int, window_radius: int) -> List[ExtractionScore]:
    """Shifts n <= n_max with g(i + n) = g(i) for every |i| <= window_radius."""
    perfect = [s for s in score_extractions(g, n_max, window_radius) if s.perfect]
    logger.debug("%d perfect extraction candidates up to n=%d (radius %d)", len(perfect), n_max, window_radius)
    return perfect


def translate_configuration(p: IndexedSequence, q: Sequence[float], n: int) -> Tuple[IndexedSequence, List[float]]:
    """q^n(i) = q(i + n) - 2 p(n) and p^n(i) = p(i + n) - p(n)."""
    if len(q) != len(p):
        raise SequenceError("q must be aligned with the window of p")
    if n not in p:
        raise SequenceError(f"index {n} outside window {p.window}")
    base = p[n]
    moved = shift(p, n)
    p_n = IndexedSequence(moved.start, tuple(v - base for v in moved.values))
    q_n = [q[i + n - p.start] - 2.0 * base for i in moved.indices]
    return p_n, q_n


def offsets(p: Sequence[int], q: Sequence[float]) -> List[float]:
    return [qi - 2.0 * pi for pi, qi in zip(p, q)]


@dataclass(frozen=True)
class WindowMatch:
    residual: float
    shift: float
    anchors: Tuple[int, int]


def _anchor_indices(mesh) -> np.ndarray:
    x = mesh.domain_points[:, 0]
    odd = np.abs(np.mod(x, 2.0) - 1.0) < 1e-9
    on_axis = np.abs(mesh.domain_points[:, 1]) < 1e-12
    return np.flatnonzero(odd & on_axis)


def match_windows(mesh_a, mesh_b, window_radius: float = 1.0, min_shift: float = 0.0,
                  centre: Optional[float] = None) -> WindowMatch:
    """Best horizontal translation (0, t, 0) carrying the central window of
    mesh_a onto mesh_b; residual is the largest nearest-vertex distance."""
    x_a = mesh_a.domain_points[:, 0]
    if centre is None:
        centre = 0.5 * (float(x_a.min()) + float(x_a.max()))
    window = np.abs(x_a - centre) <= window_radius + 1e-12
    if not window.any():
        raise SequenceError(f"no vertices of the first mesh within {window_radius} of x={centre}")

    anchors_a = [i for i in _anchor_indices(mesh_a) if abs(x_a[i] - centre) <= window_radius + 1e-12]
    anchors_b = _anchor_indices(mesh_b)
    if not anchors_a or len(anchors_b) == 0:
        raise SequenceError("meshes have no common anchor vertices on the axis at odd x")

    points = np.asarray(mesh_a.vertices)[window]
    tree = cKDTree(np.asarray(mesh_b.vertices))
    best: Optional[WindowMatch] = None

    for ia in anchors_a:
        for ib in anchors_b:
            t = float(mesh_b.vertices[ib, 1] - mesh_a.vertices[ia, 1])
            if abs(t) < min_shift:
                continue
            moved = points + np.array([0.0, t, 0.0])
            distances, _ = tree.query(moved)
            residual = float(distances.max())
            if best is None or residual < best.residual:
                best = WindowMatch(residual=residual, shift=t, anchors=(int(ia), int(ib)))

    if best is None:
        raise SequenceError(f"no anchor pair gives a shift of at least {min_shift}")
    logger.debug("window match: shift %.6f, residual %.3e", best.shift, best.residual)
    return best


def surface_window_match(mesh_a, mesh_b, tol: float, window_radius: float = 1.0,
                         min_shift: float = 0.0) -> float:
    match = match_windows(mesh_a, mesh_b, window_radius=window_radius, min_shift=min_shift)
    if match.residual > tol:
        logger.info("window match residual %.3e exceeds tolerance %.3e", match.residual, tol)
    return match.residual
