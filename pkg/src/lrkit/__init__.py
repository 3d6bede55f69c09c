"""lrkit: lattice Laplacian kernels, threshold states, and resolvent scans.

Submodule imports are lazy so the command-line entry point can pin the BLAS
thread environment before numpy loads (reports must be byte-reproducible
across thread-count settings).
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "backend",
    "symbol",
    "lattice",
    "quadrature",
    "resolvent",
    "resonance",
    "levelset",
    "specfn",
    "lap",
    "inequalities",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        mod = importlib.import_module(f".{name}", __name__)
        globals()[name] = mod
        return mod
    raise AttributeError(f"module 'lrkit' has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
