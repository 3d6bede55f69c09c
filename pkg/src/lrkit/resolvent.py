"""Free resolvent of the discrete Laplacian: off-axis, boundary values, ladder.

Boundary values R0(lam +- i0) are computed by factoring one lattice axis
through the exact one-dimensional resolvent

    G1_zeta(n) = t^|n| / W,  W = sqrt((2-zeta)^2 - 4),  t = (2-zeta-W)/2,

(branch with |t| < 1) and integrating the remaining torus variables on a
contour deformed into the complex torus, xi' -> xi' - i delta grad h0'(xi').
On the deformed contour the effective spectral parameter acquires a strictly
negative imaginary part ~ delta |grad h0'|^2, so the trapezoid sum converges
at machine precision for real energies, including arbitrarily small eps.

The epsilon-ladder (geometric eps_k with first-order Richardson) provides the
independent limit route with a computable convergence diagnostic; the two
routes are cross-checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridFn
from .quadrature import QuadratureConfig, kernel_Kl
from .symbol import threshold_distance

__all__ = [
    "SpectralParam",
    "LadderReport",
    "ExtrapolationLadder",
    "free_resolvent_rows",
    "boundary_value_resolvent",
    "resolvent_quadform",
    "stone_lhs",
    "h0_inverse_apply",
]


@dataclass(frozen=True)
class SpectralParam:
    """Energy lam with regularization eps >= 0 and a boundary side.

    The side tag picks the branch lam + i*0^+ vs lam - i*0^- and is
    meaningful (and required) even at eps = 0.
    """

    lam: float
    eps: float = 0.0
    side: str = "+"

    def __post_init__(self):
        if self.side not in ("+", "-"):
            raise ValueError("side must be '+' or '-'")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    @property
    def z(self) -> complex:
        s = 1.0 if self.side == "+" else -1.0
        return complex(self.lam, s * self.eps)


@dataclass
class LadderReport:
    """Outcome of a Richardson ladder run."""

    eps: np.ndarray
    values: list
    extrapolated: list
    limit: object
    diagnostic: float
    converged: bool
    tag: str  # "ok" or "near-threshold"


class ExtrapolationLadder:
    """Geometric eps_k = eps0 * ratio^k with first-order Richardson.

    With ratio 1/2 the first-order update is R_k = 2 v_{k+1} - v_k; the
    diagnostic is the relative change of the last two extrapolants.  Near a
    threshold of the spectrum the acceptance tolerance is relaxed and the
    report is tagged.
    """

    def __init__(self, eps0: float = 0.1, ratio: float = 0.5, rungs: int = 8,
                 tol: float = 1e-3, relaxed_tol: float = 5e-2,
                 threshold_margin: float = 0.5):
        if not (0 < ratio < 1) or rungs < 3:
            raise ValueError("need 0 < ratio < 1 and at least 3 rungs")
        self.eps0 = eps0
        self.ratio = ratio
        self.rungs = rungs
        self.tol = tol
        self.relaxed_tol = relaxed_tol
        self.threshold_margin = threshold_margin

    def eps_values(self) -> np.ndarray:
        return self.eps0 * self.ratio ** np.arange(self.rungs)

    def extrapolate(self, values: list):
        w = 1.0 / self.ratio
        ext = [(w * np.asarray(values[k + 1]) - np.asarray(values[k])) / (w - 1.0)
               for k in range(len(values) - 1)]
        a, b = np.asarray(ext[-1]), np.asarray(ext[-2])
        scale = max(float(np.max(np.abs(a))), 1e-300)
        diag = float(np.max(np.abs(a - b))) / scale
        return ext, diag

    def run(self, eval_fn, lam: float, d: int) -> LadderReport:
        eps = self.eps_values()
        values = [eval_fn(float(e)) for e in eps]
        ext, diag = self.extrapolate(values)
        near = threshold_distance(lam, d) < self.threshold_margin
        if diag <= self.tol:
            converged, tag = True, "ok"
        elif near and diag <= self.relaxed_tol:
            converged, tag = True, "near-threshold"
        else:
            converged, tag = False, ("near-threshold" if near else "ok")
        return LadderReport(eps, values, ext, ext[-1], diag, converged, tag)


def _hybrid_grid(d: int, z: complex) -> int:
    eps = abs(z.imag)
    near = threshold_distance(z.real, d) < 0.5
    if eps >= 0.05:
        n = 512
    elif eps >= 0.01:
        n = 768
    else:
        n = 1024
    if near and eps < 0.02:
        n = 2048
    return n


def free_resolvent_rows(d: int, z: complex, offsets, *, side: str | None = None,
                        delta: float = 2e-3, n2: int | None = None) -> np.ndarray:
    """Kernel values G_z(x) of (H0 - z)^{-1} at the given integer offsets.

    Valid for Im z != 0 and for real z with a side tag (boundary values from
    above/below).  Offsets: (n, d) integers.  The evaluation deforms the
    first d-1 torus variables; the last axis goes through the exact 1-d
    resolvent row.
    """
    offsets = np.atleast_2d(np.asarray(offsets, dtype=int))
    if offsets.shape[1] != d:
        raise ValueError("offset dimension mismatch")
    z = complex(z)
    if side is None:
        side = "-" if z.imag < 0 else "+"
    # reduce to the upper side; the kernel satisfies G_conj(z) = conj(G_z)
    flip = (z.imag < 0) or (z.imag == 0 and side == "-")
    zz = z.conjugate() if flip else z
    N2 = n2 or _hybrid_grid(d, zz)

    xi = (np.arange(N2) + 0.5) / N2 - 0.5
    g = 4.0 * np.pi * np.sin(2.0 * np.pi * xi)
    xdef = xi - 1j * delta * g
    jac1 = 1.0 - 1j * delta * 8.0 * np.pi**2 * np.cos(2.0 * np.pi * xi)
    s2 = np.sin(np.pi * xdef) ** 2

    if d == 1:
        vals = _g1_rows(zz, np.abs(offsets[:, 0]))
    else:
        shape = (N2,) * (d - 1)
        h0p = np.zeros(shape, dtype=np.complex128)
        jac = np.ones(shape, dtype=np.complex128)
        for k in range(d - 1):
            sl = [None] * (d - 1)
            sl[k] = slice(None)
            h0p = h0p + 4.0 * s2[tuple(sl)]
            jac = jac * jac1[tuple(sl)]
        zeta = zz - h0p
        W = np.sqrt((2.0 - zeta) ** 2 - 4.0)
        t = (2.0 - zeta - W) / 2.0
        bad = np.abs(t) > 1.0
        W = np.where(bad, -W, W)
        t = np.where(bad, (2.0 - zeta - W) / 2.0, t)
        base = jac / W / float(N2) ** (d - 1)

        vals = np.empty(len(offsets), dtype=np.complex128)
        a_last = np.abs(offsets[:, -1])
        if d == 2:
            pows = np.unique(offsets[:, 0])
            E = np.exp(2j * np.pi * np.outer(pows, xdef))
            pidx = np.searchsorted(pows, offsets[:, 0])
            t_acc = np.ones_like(t)
            prev = 0
            for a in np.unique(a_last):
                t_acc = t_acc * t ** int(a - prev)
                prev = int(a)
                sel = a_last == a
                row = np.einsum("pi,i->p", E, base * t_acc, optimize=False)
                vals[sel] = row[pidx[sel]]
        elif d == 3:
            p1 = np.unique(offsets[:, 0])
            p2 = np.unique(offsets[:, 1])
            E1 = np.exp(2j * np.pi * np.outer(p1, xdef))
            E2 = np.exp(2j * np.pi * np.outer(p2, xdef))
            i1 = np.searchsorted(p1, offsets[:, 0])
            i2 = np.searchsorted(p2, offsets[:, 1])
            t_acc = np.ones_like(t)
            prev = 0
            for a in np.unique(a_last):
                t_acc = t_acc * t ** int(a - prev)
                prev = int(a)
                sel = a_last == a
                core = base * t_acc
                T1 = np.einsum("pi,ij->pj", E1, core, optimize=False)
                M = np.einsum("pj,qj->pq", T1, E2, optimize=False)
                vals[sel] = M[i1[sel], i2[sel]]
        else:
            # generic dimension: one reduction per offset (small offset sets)
            phases = [np.exp(2j * np.pi * np.outer(offsets[:, k], xdef))
                      for k in range(d - 1)]
            t_pow = {}
            for n, off in enumerate(offsets):
                a = int(abs(off[-1]))
                if a not in t_pow:
                    t_pow[a] = t**a
                cur = base * t_pow[a]
                for k in range(d - 1):
                    cur = np.einsum("i,i...->...", phases[k][n], cur, optimize=False)
                vals[n] = cur
    return np.conj(vals) if flip else vals


def _g1_rows(z: complex, ns: np.ndarray) -> np.ndarray:
    W = np.sqrt((2.0 - z) ** 2 - 4.0)
    t = (2.0 - z - W) / 2.0
    if abs(t) > 1.0:
        W = -W
        t = (2.0 - z - W) / 2.0
    return t ** np.abs(ns) / W


def boundary_value_resolvent(f: GridFn, sp: SpectralParam, out_L: int,
                             *, delta: float = 2e-3,
                             n2: int | None = None) -> GridFn:
    """(R0(z) f)(x) on |x|_inf <= out_L for z = lam +- i eps, eps >= 0."""
    sites, fv = f.nonzero_sites()
    out = GridFn.zeros(f.d, out_L, np.complex128)
    ax = [np.arange(-out_L, out_L + 1)] * f.d
    xs = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, f.d)
    # unique offsets x - y over output box and source support
    offs = (xs[:, None, :] - sites[None, :, :]).reshape(-1, f.d)
    uniq, inv = np.unique(offs, axis=0, return_inverse=True)
    gv = free_resolvent_rows(f.d, sp.z, uniq, side=sp.side, delta=delta, n2=n2)
    acc = gv[inv].reshape(len(xs), len(sites))
    out.values = np.einsum("xs,s->x", acc, fv.astype(np.complex128),
                           optimize=False).reshape(out.values.shape)
    return out


def resolvent_quadform(f: GridFn, g: GridFn, sp: SpectralParam,
                       *, delta: float = 2e-3, n2: int | None = None) -> complex:
    """(f, R0(z) g) in the l^2 inner product (conjugate-linear first slot)."""
    fs, fv = f.nonzero_sites()
    gs, gv = g.nonzero_sites()
    offs = (fs[:, None, :] - gs[None, :, :]).reshape(-1, f.d)
    uniq, inv = np.unique(offs, axis=0, return_inverse=True)
    rows = free_resolvent_rows(f.d, sp.z, uniq, side=sp.side, delta=delta, n2=n2)
    K = rows[inv].reshape(len(fs), len(gs))
    return complex(np.einsum("x,xy,y->", np.conj(fv), K, gv, optimize=False))


def stone_lhs(f: GridFn, lam: float, side: str = "+",
              ladder: ExtrapolationLadder | None = None,
              *, delta: float = 2e-3):
    """Spectral density term: +-(1/pi) Im (f, R0(lam +- i eps) f), eps -> 0.

    Returns (value, LadderReport).  The sign follows the side so both
    boundary approaches give the same nonnegative density.
    """
    ladder = ladder or ExtrapolationLadder()

    def at_eps(eps):
        sp = SpectralParam(lam, eps, side)
        return resolvent_quadform(f, f, sp, delta=delta)

    report = ladder.run(at_eps, lam, f.d)
    sgn = 1.0 if side == "+" else -1.0
    value = sgn * float(np.imag(report.limit)) / np.pi
    return value, report


def h0_inverse_apply(f: GridFn, out_L: int | None = None,
                     cfg: QuadratureConfig | None = None) -> GridFn:
    """Apply H0^{-1} by exact convolution with the K_2 table (d >= 3)."""
    from .lattice import convolve

    if f.d < 3:
        raise ValueError("H0^{-1} kernel requires d >= 3")
    out_L = out_L if out_L is not None else f.L
    sites, _ = f.nonzero_sites()
    need = out_L + (int(np.abs(sites).max()) if len(sites) else 0)
    table = kernel_Kl(f.d, 2, need, cfg)
    return convolve(table, f, out_L)
