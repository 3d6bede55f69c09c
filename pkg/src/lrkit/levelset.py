"""Meshes on the energy surface {h0 = lam} and restriction to it.

Each surface point is produced by a graph chart: pick the axis j carrying
the largest |d_j h0| (ties to the lowest j), solve h0 = lam for xi_j over a
uniform grid in the other coordinates, for both signs of xi_j.  The argmax
partition makes the charts disjoint, so no point is double counted.  Samples
satisfy h0(xi) = lam to roundoff by construction.

Weights: sigma is the Euclidean surface element, cell * |grad h0| / |d_j h0|;
mu = sigma / |grad h0| is the spectral (delta-function) measure.  Points with
|grad h0| below the cutoff sit near the hyperbolic critical points and are
excised; their sigma/mu mass is recorded so refinement studies can monitor
it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import stable_sum
from .lattice import GridFn
from .symbol import grad_h0, h0

__all__ = [
    "LevelSetMesh",
    "level_set_mesh",
    "surface_integral",
    "restrict_fourier",
    "stone_rhs",
    "vanishing_test",
    "l2_membership",
    "l2_membership_symmetric",
]


@dataclass
class LevelSetMesh:
    lam: float
    d: int
    n: int
    cutoff: float
    samples: np.ndarray  # (M, d) points with h0 = lam
    sigma_w: np.ndarray  # (M,) surface-measure weights
    mu_w: np.ndarray  # (M,) spectral-measure weights
    chart: np.ndarray  # (M,) chart id = axis * 2 + (sign < 0)
    excised_sigma: float
    excised_mu: float

    def total_sigma(self) -> float:
        return float(stable_sum(self.sigma_w))

    def total_mu(self) -> float:
        return float(stable_sum(self.mu_w))

    def max_onsurface_defect(self) -> float:
        return float(np.max(np.abs(h0(self.samples) - self.lam)))

    def to_lines(self):
        yield f"# level-set mesh lam={format(self.lam, '.17g')} d={self.d} n={self.n} cutoff={format(self.cutoff, '.17g')}"
        yield "# chart " + " ".join(f"xi{k+1}" for k in range(self.d)) + " sigma mu"
        for c, pt, sw, mw in zip(self.chart, self.samples, self.sigma_w, self.mu_w):
            coords = " ".join(format(v, ".17g") for v in pt)
            yield f"{int(c)} {coords} {format(sw, '.17g')} {format(mw, '.17g')}"


def level_set_mesh(lam: float, n: int = 256, cutoff: float = 0.05,
                   d: int = 3) -> LevelSetMesh:
    """Chart-partitioned mesh of {h0 = lam} with sigma and mu weights."""
    if not (0.0 < lam < 4.0 * d):
        raise ValueError("lam must lie inside the spectrum (0, 4d)")
    base = (np.arange(n) + 0.5) / n - 0.5  # shifted grid on [-1/2, 1/2)
    cell = (1.0 / n) ** (d - 1)
    samples, sig, mu, charts = [], [], [], []
    exc_sig = 0.0
    exc_mu = 0.0
    mesh = np.meshgrid(*([base] * (d - 1)), indexing="ij")
    rest = np.stack([m.ravel() for m in mesh], axis=-1)  # (n^(d-1), d-1)
    s_rest = np.sin(np.pi * rest) ** 2
    for j in range(d):
        g = lam / 4.0 - s_rest.sum(axis=-1)
        ok = (g > 0.0) & (g < 1.0)
        if not ok.any():
            continue
        root = np.arcsin(np.sqrt(g[ok])) / np.pi  # xi_j in (0, 1/2)
        for sign in (1.0, -1.0):
            pts = np.empty((ok.sum(), d))
            cols = [k for k in range(d) if k != j]
            pts[:, cols] = rest[ok]
            pts[:, j] = sign * root
            grad = grad_h0(pts)
            absg = np.abs(grad)
            # chart ownership: axis with the largest |d h0|, ties -> lowest
            own = np.argmax(absg, axis=1) == j
            if not own.any():
                continue
            pts = pts[own]
            grad = grad[own]
            gnorm = np.sqrt((grad**2).sum(axis=1))
            sw = cell * gnorm / np.abs(grad[:, j])
            mw = sw / gnorm
            keep = gnorm >= cutoff
            exc_sig += float(stable_sum(sw[~keep]))
            exc_mu += float(stable_sum(mw[~keep]))
            samples.append(pts[keep])
            sig.append(sw[keep])
            mu.append(mw[keep])
            charts.append(np.full(int(keep.sum()), 2 * j + (sign < 0), dtype=int))
    if not samples:
        raise ValueError(f"empty mesh at lam={lam}")
    return LevelSetMesh(lam, d, n, cutoff,
                        np.concatenate(samples), np.concatenate(sig),
                        np.concatenate(mu), np.concatenate(charts),
                        exc_sig, exc_mu)


def surface_integral(mesh: LevelSetMesh, fvals, measure: str = "sigma") -> float:
    """Sum of fvals (per sample) against the sigma or mu weights."""
    w = mesh.sigma_w if measure == "sigma" else mesh.mu_w
    fvals = np.asarray(fvals)
    if fvals.shape != w.shape:
        raise ValueError("fvals must be per-sample")
    if np.iscomplexobj(fvals):
        return complex(stable_sum(w * fvals))
    return float(stable_sum(w * fvals))


def restrict_fourier(f: GridFn, mesh: LevelSetMesh) -> np.ndarray:
    """fhat(xi) = sum_x f(x) exp(-2 pi i x.xi) at the mesh samples.

    Axis-factored phases keep the cost at O(M * (2L+1)^2) for d=3; samples
    are processed in blocks to bound memory.
    """
    if f.d != mesh.d:
        raise ValueError("dimension mismatch")
    ax = np.arange(-f.L, f.L + 1)
    out = np.empty(len(mesh.samples), dtype=np.complex128)
    step = 8192
    for i in range(0, len(mesh.samples), step):
        xi = mesh.samples[i : i + step]
        P = [np.exp(-2j * np.pi * np.outer(xi[:, k], ax)) for k in range(f.d)]
        if f.d == 3:
            t = np.einsum("sc,abc->sab", P[2], f.values, optimize=False)
            t = np.einsum("sb,sab->sa", P[1], t, optimize=False)
            out[i : i + step] = np.einsum("sa,sa->s", P[0], t, optimize=False)
        else:
            cur = f.values[None]
            for k in range(f.d - 1, -1, -1):
                cur = np.einsum("sc,s...c->s...", P[k], cur, optimize=False)
            out[i : i + step] = cur.reshape(-1)
    return out


def stone_rhs(f: GridFn, mesh: LevelSetMesh) -> float:
    """Surface spectral density: integral of |fhat|^2 against mu."""
    fh = restrict_fourier(f, mesh)
    return float(np.real(surface_integral(mesh, np.abs(fh) ** 2, "mu")))


def vanishing_test(u: GridFn, mesh: LevelSetMesh) -> dict:
    """How small is uhat on the energy surface, relative to its l^2 size."""
    fh = restrict_fourier(u, mesh)
    sup = float(np.max(np.abs(fh)))
    scale = u.norm_l2() or 1.0
    return {"sup": sup, "rel": sup / scale, "samples": len(fh)}


def l2_membership(u: GridFn, Ls, ratio_threshold: float = 0.55) -> dict:
    """Square-summability probe from partial sums over growing boxes.

    Sums S_L = sum_{|x|_inf <= L} |u|^2 for L in Ls (increasing); increments
    that keep shrinking by at least ratio_threshold per doubling indicate a
    convergent tail, increments that stall or grow indicate divergence.
    """
    Ls = sorted(int(L) for L in Ls)
    if Ls[-1] > u.L:
        raise ValueError("largest box exceeds the grid")
    absq = np.abs(u.values) ** 2
    radius = u.abs_inf()
    sums = [float(stable_sum(absq[radius <= L].ravel())) for L in Ls]
    inc = np.diff(sums)
    ratios = [float(inc[k + 1] / inc[k]) if inc[k] > 0 else np.inf
              for k in range(len(inc) - 1)]
    member = bool(ratios) and all(r <= ratio_threshold for r in ratios)
    return {"boxes": Ls, "sums": sums, "increments": inc.tolist(),
            "ratios": ratios, "member": member}


def l2_membership_symmetric(reps: np.ndarray, values: np.ndarray,
                            mults: np.ndarray, Ls,
                            ratio_threshold: float = 0.55) -> dict:
    """Same probe from symmetry-class data (reps, values, multiplicities).

    Used when a dense grid would not fit, e.g. the d = 5 kernel tail; the
    partial sums run over |x|_inf <= L via the class representatives.
    """
    Ls = sorted(int(L) for L in Ls)
    radius = np.abs(reps).max(axis=1)
    absq = np.abs(values) ** 2 * mults
    sums = [float(stable_sum(absq[radius <= L])) for L in Ls]
    inc = np.diff(sums)
    ratios = [float(inc[k + 1] / inc[k]) if inc[k] > 0 else np.inf
              for k in range(len(inc) - 1)]
    member = bool(ratios) and all(r <= ratio_threshold for r in ratios)
    return {"boxes": Ls, "sums": sums, "increments": inc.tolist(),
            "ratios": ratios, "member": member}
