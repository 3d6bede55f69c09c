"""Weighted-resolvent norms: scans over energy, perturbed solves, nullity.

The scanned object is A(z) = <x>^{-s} R(z) <x>^{-s} compressed to a box
|x|_inf <= L.  Free-resolvent matvecs act by exact circular convolution with
the offset block G_z on |o|_inf <= 2L (FFT of size 4L+1 per axis, which is
alias-free for this geometry); the perturbed resolvent adds the finite-rank
correction

    R_V = R0 - R0 eta,   (I + V G0) eta = V (R0 u) on supp V,

a dense solve of the size of supp V.  Boundary energies z = lam +- i0 enter
through the two smallest rungs of the epsilon ladder applied to the offset
tables themselves (Richardson in the table, then one power iteration on the
extrapolated operator); the recorded diagnostic is the relative size of the
last extrapolation step.  Offset tables for many z at fixed box come from
the spectral-density machinery, so a whole scan costs minutes, not hours.

Everything here is d = 3 (the spectral-density tables are); the adjoint in
the power iteration uses that A is complex symmetric: A* v = conj(A conj v).
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

import numpy as np

from .lattice import GridFn, Potential, operator_norm_estimate
from .resolvent import ExtrapolationLadder, SpectralParam, free_resolvent_rows
from .specfn import SpectralTable, spectral_table
from .symbol import threshold_distance

__all__ = [
    "WeightedResolventOp",
    "lap_scan",
    "ScanRow",
    "ScanResult",
    "perturbed_resolvent_apply",
    "holder_modulus",
    "kernel_nullity_scan",
]


def _signed_block(orthant: np.ndarray, L: int) -> np.ndarray:
    """Expand an offset orthant (xmax+1)^3 to the signed box (2L+1)^3."""
    if orthant.shape[0] < 2 * L + 1:
        raise ValueError("orthant too small for the requested block")
    idx = np.abs(np.arange(-2 * L, 2 * L + 1))
    return orthant[np.ix_(idx, idx, idx)]


class WeightedResolventOp:
    """<x>^{-s} R(z) <x>^{-s} on a box, with optional potential correction.

    ``gblock`` holds G_z at offsets |o|_inf <= 2L.  The operator is applied
    matrix-free; matvec cost is one (4L+1)^3 FFT round trip.
    """

    def __init__(self, gblock: np.ndarray, L: int, s: float = 1.0,
                 V: Potential | None = None):
        self.L = L
        self.s = s
        S = 4 * L + 1
        if gblock.shape != (S, S, S):
            raise ValueError("gblock must cover offsets |o|_inf <= 2L")
        self.S = S
        pos = np.arange(-2 * L, 2 * L + 1) % S
        garr = np.zeros((S, S, S), dtype=np.complex128)
        garr[np.ix_(pos, pos, pos)] = gblock
        self.ghat = np.fft.fftn(garr)
        self.sel = np.arange(-L, L + 1) % S
        x = np.stack(np.meshgrid(*([np.arange(-L, L + 1)] * 3), indexing="ij"),
                     axis=-1).astype(float)
        self.w = (1.0 + (x**2).sum(axis=-1)) ** (-s / 2.0)
        self.V = V
        self.cond = None
        self.singular = False
        if V is not None:
            if V.support_radius() > L:
                raise ValueError("potential support outside the box")
            n = len(V.sites)
            B = np.empty((n, n), dtype=np.complex128)
            for a in range(n):
                for b in range(n):
                    o = V.sites[a] - V.sites[b]
                    B[a, b] = V.vals[a] * gblock[o[0] + 2 * L, o[1] + 2 * L,
                                                 o[2] + 2 * L]
            self._ivg = np.eye(n) + B
            self.cond = float(np.linalg.cond(self._ivg))
            sv = np.linalg.svd(self._ivg, compute_uv=False)
            self.singular = bool(sv[-1] < 1e-10 * sv[0])
            self._gblock = gblock

    def _conv(self, v3d: np.ndarray) -> np.ndarray:
        S = self.S
        vp = np.zeros((S, S, S), dtype=np.complex128)
        vp[np.ix_(self.sel, self.sel, self.sel)] = v3d
        out = np.fft.ifftn(np.fft.fftn(vp) * self.ghat)
        return out[np.ix_(self.sel, self.sel, self.sel)]

    def _resolvent(self, v3d: np.ndarray) -> np.ndarray:
        phi = self._conv(v3d)
        if self.V is None:
            return phi
        if self.singular:
            raise ArithmeticError("I + V G0 is numerically singular")
        L = self.L
        rhs = np.array([self.V.vals[a] * phi[tuple(x + L)]
                        for a, x in enumerate(self.V.sites)])
        eta = np.linalg.solve(self._ivg, rhs)
        out = phi.copy()
        for a, x in enumerate(self.V.sites):
            sl = tuple(slice(L - int(c), 3 * L + 1 - int(c)) for c in x)
            out -= eta[a] * self._gblock[sl]
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v3d = (self.w * v.reshape(self.w.shape)).astype(np.complex128)
        return (self.w * self._resolvent(v3d)).ravel()

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        # complex symmetric: adjoint = conjugate of the action on conjugates
        return np.conj(self.matvec(np.conj(v)))

    def norm(self, tol: float = 1e-10, maxiter: int = 300):
        n = (2 * self.L + 1) ** 3
        return operator_norm_estimate(self.matvec, self.rmatvec, n,
                                      tol=tol, maxiter=maxiter)


@dataclass
class ScanRow:
    kind: str  # "free" or "perturbed"
    lam: float
    box: int
    norm: float
    iterations: int
    converged: bool
    diagnostic: float  # relative size of the last table-extrapolation step
    tag: str  # "ok" or "near-threshold"


@dataclass
class ScanResult:
    rows: list
    s: float
    side: str
    eps_used: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("kind,lam,box,norm,iterations,converged,diagnostic,tag\n")
        for r in self.rows:
            buf.write(f"{r.kind},{format(r.lam, '.17g')},{r.box},"
                      f"{format(r.norm, '.17g')},{r.iterations},"
                      f"{int(r.converged)},{format(r.diagnostic, '.17g')},{r.tag}\n")
        return buf.getvalue()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()[:12]

    def max_norm(self, kind: str, box: int) -> float:
        vals = [r.norm for r in self.rows if r.kind == kind and r.box == box]
        return max(vals) if vals else float("nan")


def _rung_blocks(table: SpectralTable, lam: float, side: str,
                 eps_tail: np.ndarray, L: int):
    """Extrapolated offset block at lam +- i0 plus the step diagnostic."""
    sgn = 1.0 if side == "+" else -1.0
    t = [table.rung_orthant(complex(lam, sgn * e)) for e in eps_tail]
    ext_last = 2.0 * t[-1] - t[-2]
    ext_prev = 2.0 * t[-2] - t[-3]
    scale = max(float(np.max(np.abs(ext_last))), 1e-300)
    diag = float(np.max(np.abs(ext_last - ext_prev))) / scale
    return _signed_block(ext_last, L), diag


def lap_scan(V: Potential | None, lam_grid, boxes, s: float = 1.0,
             side: str = "+", *, ladder: ExtrapolationLadder | None = None,
             table: SpectralTable | None = None, tol: float = 1e-10,
             maxiter: int = 300) -> ScanResult:
    """Norms of the weighted (free and/or perturbed) resolvent over a grid.

    For each lam the offset tables at the three smallest ladder rungs are
    Richardson-extrapolated; one power iteration runs on the extrapolated
    operator per box.  Returns every (lam, box) row with its diagnostic.
    """
    boxes = sorted(int(b) for b in boxes)
    ladder = ladder or ExtrapolationLadder()
    eps_tail = ladder.eps_values()[-3:]
    if table is None:
        table = spectral_table(2 * boxes[-1])
    if table.xmax < 2 * boxes[-1]:
        raise ValueError("spectral table too small for the largest box")
    rows = []
    for lam in lam_grid:
        lam = float(lam)
        near = threshold_distance(lam, 3) < ladder.threshold_margin
        tag = "near-threshold" if near else "ok"
        block_big, diag = _rung_blocks(table, lam, side, eps_tail, boxes[-1])
        for L in boxes:
            # slice the big block down to offsets |o|_inf <= 2L
            lo = 2 * boxes[-1] - 2 * L
            hi = 2 * boxes[-1] + 2 * L + 1
            blk = block_big[lo:hi, lo:hi, lo:hi]
            kinds = [("free", None)] if V is None else [("free", None), ("perturbed", V)]
            for kind, pot in kinds:
                op = WeightedResolventOp(blk, L, s, pot)
                est, iters, conv = op.norm(tol=tol, maxiter=maxiter)
                rows.append(ScanRow(kind, lam, L, est, iters, conv, diag, tag))
    return ScanResult(rows, s, side, eps_tail)


def perturbed_resolvent_apply(V: Potential, f: GridFn, sp: SpectralParam,
                              out_L: int | None = None,
                              table: SpectralTable | None = None):
    """(H0 + V - z)^{-1} f on a box, with the solve's condition number.

    Returns (GridFn, info).  Offset values come from the spectral-density
    table when one is supplied (or buildable cheaply), else from the direct
    contour evaluator.
    """
    out_L = out_L if out_L is not None else f.L
    L = max(out_L, f.L, V.support_radius())
    if table is not None and table.xmax >= 2 * L:
        if sp.eps > 0:
            orth = table.rung_orthant(sp.z)
        else:
            e = ExtrapolationLadder().eps_values()[-2:]
            sgn = 1.0 if sp.side == "+" else -1.0
            t7, t8 = (table.rung_orthant(complex(sp.lam, sgn * ee)) for ee in e)
            orth = 2.0 * t8 - t7
        gblock = _signed_block(orth, L)
    else:
        offs = np.stack(np.meshgrid(*([np.arange(-2 * L, 2 * L + 1)] * f.d),
                                    indexing="ij"), axis=-1).reshape(-1, f.d)
        vals = free_resolvent_rows(f.d, sp.z, offs, side=sp.side)
        gblock = vals.reshape((4 * L + 1,) * f.d)
    op = WeightedResolventOp(gblock, L, 0.0, V)
    fin = f.restricted(L)
    out3d = op._resolvent(fin.values.astype(np.complex128))
    out = GridFn(f.d, L, out3d).restricted(out_L)
    info = {"cond": op.cond, "singular": op.singular}
    return out, info


def holder_modulus(V: Potential | None, lam1: float, lam2: float, s: float,
                   box: int, side: str = "+",
                   table: SpectralTable | None = None,
                   ladder: ExtrapolationLadder | None = None):
    """Operator-norm difference ||A(lam1 +- i0) - A(lam2 +- i0)|| on a box."""
    ladder = ladder or ExtrapolationLadder()
    eps_tail = ladder.eps_values()[-3:]
    if table is None:
        table = spectral_table(2 * box)
    b1, d1 = _rung_blocks(table, lam1, side, eps_tail, box)
    b2, d2 = _rung_blocks(table, lam2, side, eps_tail, box)
    op1 = WeightedResolventOp(b1, box, s, V)
    op2 = WeightedResolventOp(b2, box, s, V)

    def mv(v):
        return op1.matvec(v) - op2.matvec(v)

    def rmv(v):
        return np.conj(mv(np.conj(v)))

    est, iters, conv = operator_norm_estimate(mv, rmv, (2 * box + 1) ** 3)
    return est, {"iterations": iters, "converged": conv,
                 "diagnostic": max(d1, d2)}


def kernel_nullity_scan(V, lam_grid, side: str = "+",
                        n2: int | None = None) -> np.ndarray:
    """Smallest singular value of I + R0(lam +- i0) V on supp V, per lam.

    A spurious threshold-type kernel at energy lam would drive this to zero;
    healthy potentials keep it away from zero across the whole grid.  ``V``
    may be a single potential or a sequence; boundary rows are computed once
    per energy and shared, so batching over potentials is nearly free.
    Returns (n_lam,) for a single potential, else (n_V, n_lam).
    """
    single = isinstance(V, Potential)
    pots = [V] if single else list(V)
    d = pots[0].d
    all_offs = np.concatenate([
        (p.sites[:, None, :] - p.sites[None, :, :]).reshape(-1, d)
        for p in pots])
    uniq = np.unique(all_offs, axis=0)
    # scalar keys for fast per-potential lookup into the unique rows
    lo = uniq.min(axis=0)
    span = uniq.max(axis=0) - lo + 1
    ukeys = np.ravel_multi_index((uniq - lo).T, span)
    order = np.argsort(ukeys)
    invs = []
    for p in pots:
        po = (p.sites[:, None, :] - p.sites[None, :, :]).reshape(-1, d)
        pk = np.ravel_multi_index((po - lo).T, span)
        invs.append(order[np.searchsorted(ukeys[order], pk)])
    lams = list(lam_grid)
    out = np.empty((len(pots), len(lams)))
    for i, lam in enumerate(lams):
        sp = SpectralParam(float(lam), 0.0, side)
        rows = free_resolvent_rows(d, sp.z, uniq, side=side, n2=n2)
        for j, p in enumerate(pots):
            n = len(p.sites)
            G = rows[invs[j]].reshape(n, n)
            M = np.eye(n) + G * p.vals[None, :]
            out[j, i] = float(np.linalg.svd(M, compute_uv=False)[-1])
    return out[0] if single else out
