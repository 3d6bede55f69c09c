"""Grid containers, quasinorms, exact convolution, and the norm estimator."""

import math

import numpy as np
import pytest

from lrkit.lattice import (GridFn, Potential, convolve, load_potential,
                           lorentz_quasinorm, operator_norm_estimate,
                           save_potential, weighted_norm)


def test_gridfn_indexing_and_shapes():
    u = GridFn.delta(3, 2, site=(1, -2, 0))
    assert u.values.shape == (5, 5, 5)
    assert u.value((1, -2, 0)) == 1.0
    assert u.value((0, 0, 0)) == 0.0
    with pytest.raises(IndexError):
        u.value((3, 0, 0))
    with pytest.raises(ValueError):
        GridFn(3, 2, np.zeros((5, 5)))


def test_gridfn_restricted_roundtrip():
    rng = np.random.default_rng(0)
    u = GridFn(2, 3, rng.standard_normal((7, 7)))
    big = u.restricted(5)
    assert big.value((3, -3)) == u.value((3, -3))
    assert big.value((5, 0)) == 0.0
    back = big.restricted(3)
    assert np.array_equal(back.values, u.values)


def test_norms_closed_forms():
    u = GridFn.from_sites(3, 2, [(0, 0, 0), (1, 0, 0), (0, -1, 1)], [3.0, -2.0, 1.0])
    assert u.norm_l2() == pytest.approx(math.sqrt(14.0), rel=1e-15)
    assert lorentz_quasinorm(u, 2, 2) == pytest.approx(u.norm_l2(), rel=1e-14)
    # decreasing rearrangement (3, 2, 1):
    ref21 = 3.0 + 2.0 * (math.sqrt(2) - 1) + (math.sqrt(3) - math.sqrt(2))
    assert lorentz_quasinorm(u, 2, 1) == pytest.approx(ref21, rel=1e-14)
    assert lorentz_quasinorm(u, 2, math.inf) == pytest.approx(3.0)
    assert lorentz_quasinorm(u, math.inf, math.inf) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        lorentz_quasinorm(u, math.inf, 2)
    with pytest.raises(ValueError):
        lorentz_quasinorm(u, 0.0, 1.0)
    v = GridFn.delta(3, 1, site=(1, 1, 0))
    assert weighted_norm(v, 1.0) == pytest.approx(math.sqrt(3.0), rel=1e-14)
    assert weighted_norm(v, -2.0) == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_potential_canonical_form_and_apply():
    v = Potential(2, [(1, 0), (-1, 0), (0, 0)], [2.0, 3.0, -1.0])
    assert v.support_radius() == 1
    assert v.norm_inf() == 3.0
    assert v.value((-1, 0)) == 3.0
    assert v.value((5, 5)) == 0.0
    # canonical order is lexicographic regardless of construction order
    v2 = Potential(2, [(0, 0), (1, 0), (-1, 0)], [-1.0, 2.0, 3.0])
    assert np.array_equal(v.sites, v2.sites)
    assert np.array_equal(v.vals, v2.vals)
    with pytest.raises(ValueError):
        Potential(2, [(0, 0), (0, 0)], [1.0, 2.0])
    u = GridFn.from_sites(2, 2, [(1, 0), (0, 0)], [4.0, 5.0])
    vu = v.apply(u)
    assert vu.value((1, 0)) == 8.0
    assert vu.value((0, 0)) == -5.0
    assert vu.value((-1, 0)) == 0.0


def test_potential_file_roundtrip(tmp_path):
    v = Potential(3, [(1, -2, 0), (0, 0, 0)], [0.25, -1.5])
    path = tmp_path / "well.pot"
    save_potential(path, v)
    w = load_potential(path)
    assert w.d == 3
    assert np.array_equal(w.sites, v.sites)
    assert np.array_equal(w.vals, v.vals)


def test_convolve_matches_direct_sum():
    rng = np.random.default_rng(1)
    kern = GridFn(2, 6, rng.standard_normal((13, 13)))
    f = GridFn.from_sites(2, 2, [(0, 0), (1, -1), (-2, 2)], rng.standard_normal(3))
    out = convolve(kern, f, 4)
    sites, vals = f.nonzero_sites()
    for x in [(0, 0), (3, -4), (-4, 4), (2, 2)]:
        ref = sum(v * kern.value(np.array(x) - y) for y, v in zip(sites, vals))
        assert out.value(x) == pytest.approx(ref, abs=1e-13)
    with pytest.raises(ValueError):
        convolve(kern, f, 5)  # needs offsets up to 5 + 2 = 7 > 6


def test_operator_norm_estimate_matches_svd():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((25, 25)) + 1j * rng.standard_normal((25, 25))
    est, iters, conv = operator_norm_estimate(lambda v: a @ v,
                                              lambda v: a.conj().T @ v, 25,
                                              tol=1e-13, maxiter=2000)
    ref = np.linalg.svd(a, compute_uv=False)[0]
    assert conv
    assert est == pytest.approx(ref, rel=1e-6)


def test_operator_norm_estimate_zero_operator():
    est, _, conv = operator_norm_estimate(lambda v: 0 * v, lambda v: 0 * v, 8)
    assert est == 0.0 and conv
