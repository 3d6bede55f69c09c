"""Functions on centered boxes of Z^d: grids, potentials, norms, convolution.

A :class:`GridFn` stores values on the box |x|_inf <= L as a dense
(2L+1)^d array indexed by x + L per axis.  Everything downstream (kernel
tables, Birman-Schwinger solves, scans) works through this one container.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import stable_sum

__all__ = [
    "GridFn",
    "Potential",
    "weighted_norm",
    "convolve",
    "lorentz_quasinorm",
    "operator_norm_estimate",
    "load_potential",
    "save_potential",
]


def box_coords(d: int, L: int) -> np.ndarray:
    """Integer coordinate array of shape (2L+1,)*d + (d,)."""
    ax = np.arange(-L, L + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack(mesh, axis=-1)


@dataclass
class GridFn:
    """Dense function on {x in Z^d : |x|_inf <= L}, zero outside."""

    d: int
    L: int
    values: np.ndarray

    def __post_init__(self):
        shape = (2 * self.L + 1,) * self.d
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")

    @classmethod
    def zeros(cls, d: int, L: int, dtype=np.float64) -> "GridFn":
        return cls(d, L, np.zeros((2 * L + 1,) * d, dtype=dtype))

    @classmethod
    def delta(cls, d: int, L: int, site=None, dtype=np.float64) -> "GridFn":
        gf = cls.zeros(d, L, dtype)
        x = (0,) * d if site is None else tuple(site)
        gf.values[gf._idx(x)] = 1.0
        return gf

    @classmethod
    def from_sites(cls, d: int, L: int, sites, vals, dtype=None) -> "GridFn":
        vals = np.asarray(vals)
        if dtype is None:
            dtype = np.complex128 if np.iscomplexobj(vals) else np.float64
        gf = cls.zeros(d, L, dtype)
        for x, v in zip(np.asarray(sites, dtype=int), vals):
            gf.values[gf._idx(x)] = v
        return gf

    def _idx(self, x) -> tuple:
        x = tuple(int(c) for c in x)
        if any(abs(c) > self.L for c in x):
            raise IndexError(f"site {x} outside box L={self.L}")
        return tuple(c + self.L for c in x)

    def value(self, x):
        return self.values[self._idx(x)]

    def coords(self) -> np.ndarray:
        return box_coords(self.d, self.L)

    def abs_inf(self) -> np.ndarray:
        """|x|_inf at every site, same shape as values."""
        return np.abs(self.coords()).max(axis=-1)

    def norm_l2(self) -> float:
        return float(np.sqrt(stable_sum(np.abs(self.values.ravel()) ** 2)))

    def nonzero_sites(self):
        """(sites, values) for the nonzero entries, lexicographic order."""
        mask = self.values != 0
        idx = np.argwhere(mask)
        sites = idx - self.L
        return sites, self.values[mask]

    def restricted(self, L: int) -> "GridFn":
        """Copy restricted (or zero-extended) to the box of half-width L."""
        out = GridFn.zeros(self.d, L, self.values.dtype)
        m = min(L, self.L)
        src = tuple(slice(self.L - m, self.L + m + 1) for _ in range(self.d))
        dst = tuple(slice(L - m, L + m + 1) for _ in range(self.d))
        out.values[dst] = self.values[src]
        return out


class Potential:
    """Real multiplication operator with finite support."""

    def __init__(self, d: int, sites, vals):
        self.d = d
        sites = np.atleast_2d(np.asarray(sites, dtype=int))
        vals = np.asarray(vals, dtype=float).ravel()
        if sites.shape[0] != vals.size:
            raise ValueError("sites/vals length mismatch")
        if sites.shape[1] != d:
            raise ValueError("site dimension mismatch")
        # canonical lexicographic site order; duplicate sites are an error
        order = np.lexsort(sites.T[::-1])
        self.sites = sites[order]
        self.vals = vals[order]
        if len(self.sites) > 1 and (np.diff(self.sites, axis=0) == 0).all(axis=1).any():
            raise ValueError("duplicate potential sites")

    @classmethod
    def delta(cls, d: int, coupling: float, site=None) -> "Potential":
        x = (0,) * d if site is None else tuple(site)
        return cls(d, [x], [coupling])

    def support_radius(self) -> int:
        return int(np.abs(self.sites).max()) if len(self.sites) else 0

    def norm_inf(self) -> float:
        return float(np.abs(self.vals).max()) if len(self.vals) else 0.0

    def value(self, x) -> float:
        hit = (self.sites == np.asarray(x, dtype=int)).all(axis=1)
        j = np.nonzero(hit)[0]
        return float(self.vals[j[0]]) if len(j) else 0.0

    def apply(self, u: GridFn) -> GridFn:
        """Pointwise product V*u on u's box (support outside the box is cut)."""
        out = GridFn.zeros(u.d, u.L, u.values.dtype)
        for x, v in zip(self.sites, self.vals):
            if np.abs(x).max() <= u.L:
                out.values[out._idx(x)] = v * u.values[u._idx(x)]
        return out


def weighted_norm(u: GridFn, s: float) -> float:
    """l^2 norm with weight <x>^s, <x> = sqrt(1 + |x|^2)."""
    x = u.coords().astype(float)
    w = (1.0 + (x**2).sum(axis=-1)) ** (s / 2.0)
    return float(np.sqrt(stable_sum(((w * np.abs(u.values)) ** 2).ravel())))


def convolve(kernel_value, f: GridFn, out_L: int) -> GridFn:
    """Exact direct sum (K * f)(x) = sum_y K(x - y) f(y) over supp f.

    ``kernel_value`` is any object with a ``value_block(d, L)`` method
    returning the dense offset block for |o|_inf <= L (kernel tables provide
    it), or a GridFn holding the kernel.  Offsets outside the kernel's stored
    range raise, they are never silently zeroed.
    """
    sites, vals = f.nonzero_sites()
    need = out_L + (int(np.abs(sites).max()) if len(sites) else 0)
    if isinstance(kernel_value, GridFn):
        if kernel_value.L < need:
            raise ValueError(f"kernel box L={kernel_value.L} < required {need}")
        K = kernel_value.values
        KL = kernel_value.L
    else:
        K = kernel_value.value_block(f.d, need)
        KL = need
    dtype = np.result_type(K.dtype, f.values.dtype)
    out = GridFn.zeros(f.d, out_L, dtype)
    # fixed source order (lexicographic from nonzero_sites) keeps the float
    # accumulation reproducible
    for y, v in zip(sites, vals):
        sl = tuple(slice(KL - out_L + int(c), KL + out_L + 1 + int(c)) for c in -y)
        out.values += v * K[sl]
    return out


def lorentz_quasinorm(u: GridFn, p: float, r: float) -> float:
    """Discrete Lorentz quasinorm ||u||_{p,r} from the decreasing rearrangement.

    r < inf:  ( sum_k a_k^r (k^{r/p} - (k-1)^{r/p}) )^(1/r)
    r = inf:  sup_k k^{1/p} a_k
    p = inf requires r = inf (the mixed case is not a norm here and is refused).
    """
    if p <= 0 or r <= 0:
        raise ValueError("p and r must be positive")
    a = np.sort(np.abs(u.values.ravel()))[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    k = np.arange(1, a.size + 1, dtype=float)
    if np.isinf(p):
        if not np.isinf(r):
            raise ValueError("p=inf requires r=inf")
        return float(a[0])
    if np.isinf(r):
        return float(np.max(k ** (1.0 / p) * a))
    w = k ** (r / p) - (k - 1.0) ** (r / p)
    return float(stable_sum(a**r * w) ** (1.0 / r))


def operator_norm_estimate(matvec, rmatvec, n: int, tol: float = 1e-10,
                           maxiter: int = 500):
    """Largest singular value via power iteration on A*A.

    Starts from the all-ones vector; stops when the Rayleigh estimate's
    relative increment drops below ``tol``.  Returns (estimate, iterations,
    converged).
    """
    v = np.ones(n, dtype=np.complex128)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, maxiter + 1):
        w = rmatvec(matvec(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0, it, True
        new = np.sqrt(nw)
        v = w / nw
        if it > 1 and abs(new - est) <= tol * max(new, 1e-300):
            return float(new), it, True
        est = new
    return float(est), maxiter, False


def load_potential(path, d: int | None = None) -> Potential:
    """Read sites from text lines 'x1 ... xd value' (no header)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(t) for t in line.split()])
    if not rows:
        raise ValueError(f"no potential records in {path}")
    ncol = len(rows[0])
    if any(len(r) != ncol for r in rows):
        raise ValueError("inconsistent column count")
    if d is None:
        d = ncol - 1
    arr = np.asarray(rows)
    return Potential(d, arr[:, :d].astype(int), arr[:, d])


def save_potential(path, v: Potential):
    with open(path, "w") as fh:
        for x, val in zip(v.sites, v.vals):
            coords = " ".join(str(int(c)) for c in x)
            fh.write(f"{coords} {format(val, '.17g')}\n")
