"""Branched covering models and the fiber-sum pushforward."""

import numpy as np
import pytest

from coversmooth.covers import IdentityCover, PowerCover, VietaCover, as_glued, pushforward
from coversmooth.errors import DomainError
from coversmooth.geometry import Disk, Polydisk, field_from_function, halton_sample


def _power():
    return PowerCover(2, Disk(0.0, 1.1), Disk(0.0, 1.21))


def _vieta():
    return VietaCover(2, Polydisk((0, 0), (3.3, 3.3)), Polydisk((0, 0), (2.5, 2.0)))


def test_power_fiber_off_the_branch_point():
    f = _power().fiber(0.25)
    assert f.total_multiplicity == 2
    roots = sorted((p.coords[0] for p, _ in f.points), key=lambda c: c.real)
    assert roots[0] == pytest.approx(-0.5, abs=1e-9)
    assert roots[1] == pytest.approx(0.5, abs=1e-9)
    assert all(m == 1 for _, m in f.points)


def test_power_fiber_at_the_branch_point_is_double():
    f = _power().fiber(0.0)
    assert len(f.points) == 1
    point, mult = f.points[0]
    assert mult == 2
    assert point.coords[0] == 0.0


def test_vieta_fiber_lists_both_root_orderings():
    f = _vieta().fiber((0.0, -1.0))
    assert f.total_multiplicity == 2
    got = {tuple(round(c.real, 9) for c in p.coords) for p, _ in f.points}
    assert got == {(1.0, -1.0), (-1.0, 1.0)}


def test_vieta_fiber_at_the_diagonal_point():
    # s = 2, p = 1 is the squared root pair (1, 1)
    f = _vieta().fiber((2.0, 1.0))
    assert len(f.points) == 1
    point, mult = f.points[0]
    assert mult == 2
    assert point.coords[0] == pytest.approx(1.0, abs=1e-9)
    assert point.coords[1] == pytest.approx(1.0, abs=1e-9)


def test_discriminant_values():
    vc = _vieta()
    assert vc.discriminant_value((2.0, 1.0)) == pytest.approx(0.0, abs=1e-12)
    assert vc.discriminant_value((0.0, -1.0)) == pytest.approx(4.0, abs=1e-12)
    assert _power().discriminant_value(0.0) == pytest.approx(0.0, abs=1e-12)


def test_power_pushforward_matches_closed_form():
    """Summing |z|^2 over the two square roots of w gives 2|w|."""
    cover = _power()
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, cover.upstairs, name="sq")
    pf = pushforward(cover, f)
    W = halton_sample(cover.downstairs, 400, start=1)
    got = pf.eval_many(W)
    want = 2.0 * np.abs(W[:, 0])
    assert np.max(np.abs(got - want)) <= 1e-9


def test_vieta_pushforward_matches_root_sum_identity():
    """Sum of |z1|^2 + |z2|^2 over both orderings equals |s|^2 + |s^2 - 4p|."""
    cover = _vieta()
    f = field_from_function(
        lambda Z: np.abs(Z[:, 0]) ** 2 + np.abs(Z[:, 1]) ** 2,
        cover.upstairs,
        name="ss",
    )
    pf = pushforward(cover, f)
    B = halton_sample(cover.downstairs, 400, start=1)
    s, p = B[:, 0], B[:, 1]
    want = np.abs(s) ** 2 + np.abs(s * s - 4.0 * p)
    assert np.max(np.abs(pf.eval_many(B) - want)) <= 1e-9


def test_vieta_pushforward_frozen_spot_values():
    cover = _vieta()
    f = field_from_function(
        lambda Z: np.abs(Z[:, 0]) ** 2 + np.abs(Z[:, 1]) ** 2,
        cover.upstairs,
        name="ss",
    )
    pf = pushforward(cover, f)
    assert pf(np.array([2.0 + 0j, 1.0 + 0j])) == pytest.approx(4.0, abs=1e-9)
    assert pf(np.array([0.0 + 0j, -1.0 + 0j])) == pytest.approx(4.0, abs=1e-9)


def test_unit_pushforward_equals_the_degree_everywhere():
    for cover in (_power(), _vieta()):
        one = field_from_function(
            lambda Z: np.ones(Z.shape[0]), cover.upstairs, name="one"
        )
        pf = pushforward(cover, one)
        B = halton_sample(cover.downstairs, 400, start=1)
        assert np.array_equal(pf.eval_many(B), np.full(400, float(cover.degree)))


def test_identity_cover_pushforward_is_the_field_itself():
    dom = Disk(0.0, 1.0)
    cover = IdentityCover(dom)
    assert cover.degree == 1
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, dom, name="sq")
    pf = pushforward(cover, f)
    P = halton_sample(Disk(0.0, 0.9), 200, start=1)
    assert np.array_equal(pf.eval_many(P), f.eval_many(P))


def test_fiber_rows_map_back_to_the_base():
    cover = _power()
    B = halton_sample(cover.downstairs, 128, start=1)
    rows = cover.fiber_rows(B)
    assert rows.shape == (128, 2, 1)
    back = rows[:, :, 0] ** 2
    assert np.max(np.abs(back - B)) <= 1e-9


def test_pushforward_rejects_escaping_fibers():
    # square roots of the unit disk need the full unit disk upstairs
    bad = PowerCover(2, Disk(0.0, 0.9), Disk(0.0, 1.0))
    f = field_from_function(lambda Z: np.abs(Z[:, 0]) ** 2, Disk(0.0, 0.9), name="sq")
    with pytest.raises(DomainError):
        pushforward(bad, f)


def test_fiber_outside_the_base_chart_raises():
    with pytest.raises(DomainError):
        _vieta().fiber((30.0, 0.0))


def test_as_glued_wraps_a_single_pair():
    cover = _power()
    glued = as_glued(cover)
    assert len(glued.pairs) == 1
    assert glued.pairs[0].cover is cover
