from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.core.exceptions import SequenceError
from src.core.sequences import (
    GapSequence,
    IndexedSequence,
    alpha_surrogate,
    beatty_gaps,
    convergents,
    counting_gaps,
    counting_sequence,
    from_gaps,
    gaps,
    match_windows,
    offsets,
    quasiperiodicity_scan,
    score_extractions,
    sequence_distance,
    shift,
    surface_window_match,
    translate_configuration,
)


@pytest.fixture(scope="module")
def sqrt2_gaps():
    return beatty_gaps("sqrt2", (-30, 200)).gaps()


def test_convergents_of_sqrt2():
    assert convergents("sqrt2")[:6] == [Fraction(1), Fraction(3, 2), Fraction(7, 5), Fraction(17, 12),
                                        Fraction(41, 29), Fraction(99, 70)]
    assert abs(float(alpha_surrogate("sqrt2")) - 2 ** 0.5) < 1e-15


def test_convergents_of_golden_ratio():
    assert convergents("golden")[:5] == [Fraction(1), Fraction(2), Fraction(3, 2), Fraction(5, 3), Fraction(8, 5)]


def test_rational_alpha_terminates():
    assert convergents("7/5")[-1] == Fraction(7, 5)
    with pytest.raises(SequenceError):
        convergents("not-a-number")


def test_beatty_values():
    seq = beatty_gaps("sqrt2", (-2, 5))
    assert seq.p == (-3, -2, 0, 1, 2, 4, 5, 7)
    assert seq[0] == 0
    assert seq.gaps().values == (1, 2, 1, 1, 2, 1, 2)


def test_beatty_needs_alpha_above_one():
    with pytest.raises(SequenceError):
        beatty_gaps("1/2", (-2, 2))


def test_sturmian_gaps_two_valued_and_balanced(sqrt2_gaps):
    values = sqrt2_gaps.as_array()
    assert set(values.tolist()) == {1, 2}
    counts = np.convolve((values == 2).astype(int), np.ones(10, dtype=int), mode="valid")
    assert counts.max() - counts.min() <= 1


def test_beatty_quasiperiodic_shifts(sqrt2_gaps):
    perfect = {s.n for s in quasiperiodicity_scan(sqrt2_gaps, 100, 20)}
    assert {29, 58} <= perfect
    assert not {5, 12, 70} & perfect
    assert len(score_extractions(sqrt2_gaps, 100, 20)) == 100


def test_scan_requires_window(sqrt2_gaps):
    with pytest.raises(SequenceError):
        quasiperiodicity_scan(sqrt2_gaps, 190, 20)


def test_counting_digits():
    x = counting_sequence((-2, 15))
    assert [x[i] for i in range(-2, 1)] == [0, 0, 0]
    assert "".join(str(x[i]) for i in range(1, 16)) == "012345678910111"


def test_counting_gaps_are_digits_plus_one():
    seq = counting_gaps((-3, 20))
    g = seq.gaps()
    x = counting_sequence((-2, 20))
    assert all(g[i] == x[i] + 1 for i in g.indices)
    assert seq[0] == 0


def test_counting_first_perfect_shift():
    g = counting_gaps((-2, 3002)).gaps()
    scores = quasiperiodicity_scan(g, 3000, 1)
    assert scores[0].n == 2893


def test_gaps_and_from_gaps_inverse():
    p = IndexedSequence(-2, (-5, -3, 0, 4, 5))
    g = gaps(p)
    assert g.window == (-1, 2)
    assert g.values == (2, 3, 4, 1)
    rebuilt = from_gaps(g)
    assert rebuilt.values == p


def test_from_gaps_rejects_non_positive():
    with pytest.raises(SequenceError):
        from_gaps(IndexedSequence(0, (1, 0, 2)))


def test_gap_sequence_invariants():
    with pytest.raises(SequenceError):
        GapSequence(window=(-1, 1), p=(-1, 1, 2))
    with pytest.raises(SequenceError):
        GapSequence(window=(1, 3), p=(0, 1, 2))
    with pytest.raises(SequenceError):
        GapSequence(window=(-1, 1), p=(0, 0, 1))


def test_explicit_reindexes_at_zero():
    seq = GapSequence.explicit([10, 4, 0])
    assert seq.window == (0, 2)
    assert seq.p == (0, 4, 10)
    seq = GapSequence.explicit([3, 7, -4])
    assert seq.window == (-1, 1)
    assert seq.p == (-7, 0, 4)


@given(st.integers(min_value=-10, max_value=10), st.integers(min_value=-10, max_value=10))
def test_shift_is_a_group_action(a, b):
    x = beatty_gaps("sqrt2", (-40, 40)).gaps()
    composed = shift(shift(x, a), b)
    direct = shift(x, a + b)
    for i in composed.indices:
        assert composed[i] == direct[i] == x[i + a + b]


def test_shift_without_overlap():
    with pytest.raises(SequenceError):
        shift(IndexedSequence(0, (1, 2, 3)), 5)


def test_sequence_distance():
    x = IndexedSequence(-1, (1, 2, 1))
    y = IndexedSequence(-1, (1, 1, 1))
    assert sequence_distance(x, x) == 0.0
    assert sequence_distance(x, y) == sequence_distance(y, x) == 1.0


def test_translate_configuration_preserves_offsets():
    p = IndexedSequence(-2, (-3, -1, 0, 2, 5))
    q = [2 * v + r for v, r in zip(p.values, (0.1, -0.05, 0.0, 0.02, -0.1))]
    p_n, q_n = translate_configuration(p, q, 1)
    assert p_n[0] == 0
    assert p_n.values == (-3, -2, 0, 3)
    assert offsets(p_n.values, q_n) == pytest.approx([-0.05, 0.0, 0.02, -0.1])


def _line_mesh(shift_y=0.0):
    x = np.linspace(-4.0, 4.0, 17)
    domain = np.stack([x, np.zeros_like(x)], axis=-1)
    vertices = np.stack([np.zeros_like(x), x + shift_y, np.zeros_like(x)], axis=-1)
    return SimpleNamespace(domain_points=domain, vertices=vertices)


def test_match_windows_finds_translation():
    a, b = _line_mesh(), _line_mesh(2.0)
    match = match_windows(a, b, window_radius=1.0, min_shift=0.5, centre=0.0)
    assert match.residual == pytest.approx(0.0, abs=1e-12)
    assert abs(match.shift) >= 0.5
    assert surface_window_match(a, b, tol=1e-9, window_radius=1.0, min_shift=0.5) == pytest.approx(0.0, abs=1e-12)


def test_match_windows_without_anchors():
    mesh = _line_mesh()
    mesh.domain_points[:, 1] = 0.3
    with pytest.raises(SequenceError):
        match_windows(mesh, mesh)
