"""Spectral-density tables: moment identities, symmetry, and rung accuracy."""

import numpy as np
import pytest

from lrkit.resolvent import free_resolvent_rows
from lrkit.specfn import SpectralTable, spectral_table


@pytest.fixture(scope="module")
def table4():
    return spectral_table(4)


def test_moment_identities(table4):
    reps = [tuple(r) for r in table4.reps]
    m0 = table4.moment(0)
    m1 = table4.moment(1)
    i0 = reps.index((0, 0, 0))
    i1 = reps.index((1, 0, 0))
    i2 = reps.index((1, 1, 0))
    # int A_x dw = delta_{x,0}; int w A_x dw picks the symbol's Fourier data:
    # mean 6 at the origin, -1 on nearest neighbors, 0 beyond
    assert m0[i0] == pytest.approx(1.0, abs=2e-4)
    assert np.abs(np.delete(m0, i0)).max() < 2e-4
    assert m1[i0] == pytest.approx(6.0, abs=2e-3)
    assert m1[i1] == pytest.approx(-1.0, abs=1e-3)
    assert abs(m1[i2]) < 1e-3


def test_rungs_match_hybrid_resolvent_rows(table4):
    z = 2.0 + 0.025j
    rung = table4.rung_values(z)
    ref = free_resolvent_rows(3, z, table4.reps)
    rel = np.abs(rung - ref) / np.abs(ref).max()
    assert rel.max() < 1e-4
    z2 = 7.0 + 0.0125j
    ref2 = free_resolvent_rows(3, z2, table4.reps)
    rel2 = np.abs(table4.rung_values(z2) - ref2) / np.abs(ref2).max()
    assert rel2.max() < 3e-4


def test_rung_conjugation_and_validation(table4):
    z = 3.0 + 0.05j
    up = table4.rung_values(z)
    dn = table4.rung_values(np.conj(z))
    assert np.max(np.abs(up - np.conj(dn))) < 1e-13 * np.abs(up).max()
    with pytest.raises(ValueError):
        table4.rung_values(3.0)


def test_halfband_symmetry(table4):
    # h0 -> 12 - h0 under xi -> (1/2, 1/2, 1/2) - xi maps A_x(w) to
    # (-1)^{x1+x2+x3} A_x(12 - w); the node sets mirror band k into band 2-k
    m = table4.m
    signs = (-1.0) ** table4.reps.sum(axis=1)
    scale = np.abs(table4.A).max()
    for k in (0, 1, 2):
        mirrored = table4.A[2 - k, ::-1, :] * signs[None, :]
        assert np.max(np.abs(table4.A[k] - mirrored)) < 1e-6 * scale
        w_mirror = 12.0 - table4.w_nodes[2 - k][::-1]
        assert np.max(np.abs(table4.w_nodes[k] - w_mirror)) < 1e-12


def test_density_vanishes_at_band_edges(table4):
    i0 = [tuple(r) for r in table4.reps].index((0, 0, 0))
    a0 = table4.A[:, :, i0]
    assert np.all(a0 >= -1e-9)
    assert abs(table4.A[0, 0, i0]) < 1e-6
    assert abs(table4.A[2, -1, i0]) < 1e-6


def test_orthant_expansion(table4):
    class_vals = np.arange(len(table4.reps), dtype=float)
    dense = table4.expand_orthant(class_vals)
    assert dense.shape == (5, 5, 5)
    rank = {tuple(r): i for i, r in enumerate(table4.reps)}
    assert dense[1, 3, 2] == rank[(3, 2, 1)]
    assert dense[0, 0, 4] == rank[(4, 0, 0)]
    z = 5.0 + 0.1j
    assert np.array_equal(table4.rung_orthant(z),
                          table4.rung_values(z)[table4._orthant_map()])


def test_save_load_and_cache(tmp_path, table4):
    p = tmp_path / "dos.npz"
    table4.save(p)
    loaded = SpectralTable.load(p)
    assert loaded.fingerprint() == table4.fingerprint()
    assert np.array_equal(loaded.A, table4.A)
    # disk cache: a fresh build request with cache_dir hits the stored file
    t1 = spectral_table(3, cache_dir=str(tmp_path))
    t2 = SpectralTable.load(tmp_path / "specfn_x3_m160_o40.npz")
    assert t1.fingerprint() == t2.fingerprint()
