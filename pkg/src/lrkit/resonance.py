"""Threshold states of H0 + V at the bottom of the spectrum.

The compression M[a,b] = K_2(x_a - x_b) V(x_b) on supp V decides everything:
couplings that place a state exactly at energy zero are -1/mu over the real
eigenvalues mu of M, the state on the support is a null vector of I + M, and
its extension to the full lattice is u = -K_2 * (V u).  The weight
s0 = sum V u drives the dichotomy in d = 3, 4: s0 != 0 gives the slow
|x|^{2-d} tail (a resonance, not square-summable), s0 = 0 gives an
eigenfunction.  In d >= 5 the |x|^{2-d} tail is itself square-summable, so
every threshold state is an eigenfunction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import stable_sum
from .lattice import GridFn, Potential, convolve
from .quadrature import KernelTable, QuadratureConfig, kernel_Kl

__all__ = [
    "birman_schwinger_matrix",
    "threshold_couplings",
    "solve_threshold_state",
    "ThresholdState",
    "ThresholdResult",
    "classify_state",
    "decay_fit",
    "asymptote_check",
]


def _support_table(V: Potential, table: KernelTable | None,
                   cfg: QuadratureConfig | None, extra_L: int = 0) -> KernelTable:
    need = 2 * V.support_radius() + extra_L
    if table is not None:
        if table.L < need:
            raise ValueError(f"kernel table L={table.L} < required {need}")
        return table
    return kernel_Kl(V.d, 2, need, cfg)


def birman_schwinger_matrix(V: Potential, table: KernelTable | None = None,
                            cfg: QuadratureConfig | None = None):
    """M[a, b] = K_2(x_a - x_b) V(x_b) on the support sites of V."""
    table = _support_table(V, table, cfg)
    n = len(V.sites)
    M = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            M[a, b] = table.value(V.sites[a] - V.sites[b]) * V.vals[b]
    return M, V.sites


def threshold_couplings(V: Potential, table: KernelTable | None = None,
                        cfg: QuadratureConfig | None = None,
                        imag_tol: float = 1e-10):
    """Couplings g (for g*V) that support a state at the spectral bottom.

    These are -1/mu over nonzero real eigenvalues mu of the compression;
    returned sorted by magnitude together with the eigenvalues themselves.
    """
    M, _ = birman_schwinger_matrix(V, table, cfg)
    mu = np.linalg.eigvals(M)
    real = mu[np.abs(mu.imag) <= imag_tol * np.maximum(np.abs(mu), 1.0)].real
    real = real[np.abs(real) > 1e-14]
    g = -1.0 / real
    order = np.argsort(np.abs(g))
    return g[order], np.sort_complex(mu)


@dataclass
class ThresholdState:
    """One normalized state of I + M with its lattice extension."""

    d: int
    w: np.ndarray  # values on supp V, max-norm 1, first maximal entry > 0
    u: GridFn  # extension u = -K_2 * (V w) on the requested box
    s0: float  # sum_x V(x) u(x)
    sigma: float  # singular value this state came from
    null_residual: float  # ||(I+M) w||_2 / ||w||_2
    extension_residual: float  # max |u - w| on supp V, relative


@dataclass
class ThresholdResult:
    states: list
    singular_values: np.ndarray
    tol: float

    @property
    def state(self) -> ThresholdState:
        return self.states[0]

    @property
    def degenerate(self) -> bool:
        return len(self.states) > 1


def solve_threshold_state(V: Potential, box_L: int,
                          table: KernelTable | None = None,
                          cfg: QuadratureConfig | None = None,
                          null_tol: float = 1e-8) -> ThresholdResult:
    """Null vectors of I + M and their extensions on |x|_inf <= box_L.

    All singular values within null_tol * sigma_max of zero are treated as
    null directions; a degenerate threshold therefore returns every state.
    """
    table = _support_table(V, table, cfg, extra_L=box_L)
    M, sites = birman_schwinger_matrix(V, table, cfg)
    n = len(sites)
    U, s, Vh = np.linalg.svd(np.eye(n) + M)
    tol = null_tol * s[0]
    states = []
    for i in range(n):
        if s[i] > tol:
            continue
        w = Vh[i].conj()
        # real matrix, real null space; fix the max-norm gauge
        w = np.real_if_close(w, tol=1e6)
        w = w.astype(float)
        jmax = int(np.argmax(np.abs(w)))
        w = w / w[jmax]
        vw = Potential(V.d, sites, V.vals * w)
        src = GridFn.from_sites(V.d, vw.support_radius() or 1,
                                vw.sites, vw.vals)
        u = convolve(table, src, box_L)
        u = GridFn(V.d, box_L, -u.values)
        s0 = float(stable_sum(V.vals * np.array([u.value(x) for x in sites])))
        resid = float(np.linalg.norm((np.eye(n) + M) @ w) / np.linalg.norm(w))
        on_supp = np.array([u.value(x) for x in sites])
        ext_resid = float(np.max(np.abs(on_supp - w)) / np.max(np.abs(w)))
        states.append(ThresholdState(V.d, w, u, s0, float(s[i]), resid, ext_resid))
    if not states:
        raise ValueError(
            f"no null vector: smallest singular value {s[-1]:.3e} > tol {tol:.3e}")
    return ThresholdResult(states, s, tol)


def classify_state(state: ThresholdState, V: Potential,
                   tol_sum: float = 1e-8) -> dict:
    """Resonance / eigenfunction dichotomy from the weight s0.

    In d = 3 and d = 4 a nonzero s0 leaves the |x|^{2-d} tail, which is not
    square-summable there; in d >= 5 that tail is summable and the state is
    always an eigenfunction.
    """
    vu = np.abs(V.vals * np.array([state.u.value(x) for x in V.sites]))
    scale = float(np.sum(vu)) or 1.0
    s0_rel = abs(state.s0) / scale
    if state.d >= 5:
        kind = "eigenfunction"
    elif s0_rel > tol_sum:
        kind = "resonance"
    else:
        kind = "eigenfunction"
    return {"kind": kind, "s0": state.s0, "s0_rel": s0_rel, "d": state.d,
            "null_residual": state.null_residual}


def decay_fit(u: GridFn, r1: float, r2: float):
    """Log-log least squares slope of shell maxima of |u|.

    Shells are unit-width annuli in |x|_2 between r1 and r2; returns
    (slope, intercept, max_residual) of log max|u| against log r.
    """
    x = u.coords().astype(float)
    r = np.sqrt((x**2).sum(axis=-1))
    vals = np.abs(u.values)
    rs, ms = [], []
    lo = r1
    while lo < r2:
        m = (r >= lo) & (r < min(lo + 1.0, r2))
        if m.any() and vals[m].max() > 0:
            rs.append(0.5 * (lo + min(lo + 1.0, r2)))
            ms.append(vals[m].max())
        lo += 1.0
    if len(rs) < 3:
        raise ValueError("not enough shells for a decay fit")
    lx = np.log(np.asarray(rs))
    ly = np.log(np.asarray(ms))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.max(np.abs(A @ coef - ly)))
    return float(coef[0]), float(coef[1]), resid


def asymptote_check(state: ThresholdState, r1: float, r2: float):
    """Compare u against its predicted far field -s0 * c_d |x|^{2-d}.

    Returns (max_rel_dev, profile) over lattice sites with r1 <= |x|_2 <= r2;
    requires the state's box to cover radius r2.
    """
    from .quadrature import continuum_tail

    u = state.u
    x = u.coords().astype(float)
    r = np.sqrt((x**2).sum(axis=-1))
    mask = (r >= r1) & (r <= r2) & (np.abs(x).max(axis=-1) <= u.L)
    if not mask.any():
        raise ValueError("no sites in the requested radius range")
    pred = -state.s0 * continuum_tail(u.d, r[mask])
    dev = np.abs(u.values[mask] / pred - 1.0)
    return float(dev.max()), {"r": r[mask], "dev": dev}
