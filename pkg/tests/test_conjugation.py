import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.core.conjugation import (
    axis_jumps,
    closedness_bound,
    du_from_v_gradient,
    dx1_from_u_gradient,
    dx1_from_v_gradient,
    dx2_from_u_gradient,
    dx2_from_v_gradient,
    half_loop_integral,
    handle_size,
    integrate_u,
    loop_integral,
    period_integral,
    tau_pullback,
)
from src.core.exceptions import ConjugationError, HalfStripError, LoopPlacementError
from src.core.period_engine import report_from_forms


@given(st.floats(min_value=0.0, max_value=0.999), st.floats(min_value=0.0, max_value=2 * np.pi))
def test_forms_agree_through_the_conjugate_gradient(radius, angle):
    gx = np.array([radius * np.cos(angle)])
    gy = np.array([radius * np.sin(angle)])
    weight = np.sqrt(1.0 - gx * gx - gy * gy)
    ux, uy = du_from_v_gradient(gx, gy, weight)

    for from_v, from_u in ((dx1_from_v_gradient, dx1_from_u_gradient),
                           (dx2_from_v_gradient, dx2_from_u_gradient)):
        np.testing.assert_allclose(from_v(gx, gy, weight), from_u(ux, uy), rtol=1e-9, atol=1e-12)


def test_form_lookup(single_forms):
    assert single_forms.form("dX3") is single_forms.dX3
    assert single_forms.dPhi is single_forms.du
    with pytest.raises(ConjugationError):
        single_forms.form("dY")


def test_dX3_is_dv(single_forms, single_field):
    gx, gy = single_field.grid.gradients(single_field.values)
    np.testing.assert_array_equal(single_forms.dX3[:, 0], gx)
    np.testing.assert_array_equal(single_forms.dX3[:, 1], gy)


def test_du_closed_around_regular_nodes(single_forms):
    grid = single_forms.grid
    J = grid.axis_row
    for x, row in ((-2.0, J), (2.0, J + 3), (-1.5, J - 2)):
        column = grid.column_of(x)
        loop = loop_integral(single_forms, column, row, "du", k=4)
        assert abs(loop) <= closedness_bound(single_forms, column, row, k=4) + 1e-12


def test_handle_size_is_a_genuine_period(single_forms):
    size = handle_size(single_forms, 0)
    bound = closedness_bound(single_forms, single_forms.singular_column(0), single_forms.grid.axis_row)
    assert abs(size) > 1e-3
    assert abs(size) > 100 * bound


def test_centred_period_vanishes(single_forms):
    assert abs(period_integral(single_forms, 0)) < 1e-6


def test_half_loop_identity(single_forms):
    report = report_from_forms(single_forms)
    assert report.half_loop_check[0] <= report.closedness_bounds[0] + 1e-9
    half = half_loop_integral(single_forms, 0, "dX1")
    assert report.F[0] == pytest.approx(2.0 * half, abs=1e-9)


def test_loop_must_fit_the_grid(single_forms):
    with pytest.raises(LoopPlacementError):
        loop_integral(single_forms, 1, single_forms.grid.axis_row, "du", k=4)
    with pytest.raises(LoopPlacementError):
        handle_size(single_forms, 1)


def test_tau_pullback(single_forms):
    np.testing.assert_allclose(tau_pullback(single_forms, "dX3"), single_forms.dX3, atol=1e-9)
    np.testing.assert_allclose(tau_pullback(single_forms, "du"), -single_forms.du, atol=1e-8)


def test_integrate_u_normalised_at_base(single_forms):
    u_field = integrate_u(single_forms)
    grid = u_field.grid
    assert grid.y[0] == 0.0
    assert u_field.values[0, grid.column_of(-1.0)] == pytest.approx(0.0, abs=1e-15)
    assert np.isfinite(u_field.values).all()


def test_axis_jump_is_half_the_handle(single_forms):
    u_field = integrate_u(single_forms)
    (jump,) = axis_jumps(u_field).values()
    size = handle_size(single_forms, 0)
    assert abs(jump) == pytest.approx(abs(size) / 2.0, rel=1e-6, abs=1e-8)


def test_integrate_u_rejects_lower_base(single_forms):
    with pytest.raises(HalfStripError):
        integrate_u(single_forms, base=(-1.0, -0.3))


def test_empty_configuration_has_no_periods(empty_forms):
    report = report_from_forms(empty_forms)
    assert report.F == []
    assert report.max_abs_F == 0.0
