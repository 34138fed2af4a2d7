"""Domain types and grid primitives shared by the whole package.

Everything here is immutable after construction: arrays are stored with the
writeable flag cleared, so instances can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

PI = np.pi

# Delay regimes.  Inversion needs 2*pi/5 <= a < pi/2; the forward machinery
# (kernels, characteristic functions, spectra) is valid already for a >= pi/3.
A_MIN_INVERSE = 2.0 * PI / 5.0
A_MIN_FORWARD = PI / 3.0
A_MAX = PI / 2.0


class DelayDiracError(Exception):
    """Base class for all package errors."""


class RegimeError(DelayDiracError, ValueError):
    """Delay length outside the regime required by the requested operation."""


class GridRangeError(DelayDiracError, ValueError):
    """Point query outside a grid's interval (no extrapolation is done)."""


class RootCountError(DelayDiracError, RuntimeError):
    """Eigenvalue count did not certify against the contour integral."""


class SupportDefectError(DelayDiracError, RuntimeError):
    """Synthesized kernel has too much mass outside its allowed support."""

    def __init__(self, message, defects=None):
        super().__init__(message)
        self.defects = tuple(defects) if defects is not None else ()


class SpectraMismatchError(DelayDiracError, ValueError):
    """Two spectra fed to the inversion do not form a consistent pair."""


class BallRadiusError(DelayDiracError, ValueError):
    """Perturbed spectrum left the l2 ball required by the stability bound."""


class StepCountError(DelayDiracError, ValueError):
    """Requested integrator step is too coarse for the delay segments."""


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``m`` nodes on [lo, hi], endpoints included."""

    lo: float
    hi: float
    m: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("grid needs at least two nodes")
        if not self.hi > self.lo:
            raise ValueError("grid interval must have positive length")
        object.__setattr__(self, "nodes", _frozen(np.linspace(self.lo, self.hi, self.m), float))

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.m - 1)

    @property
    def range_tol(self) -> float:
        # Slack for round-off in arguments that land on the endpoints.
        return 64.0 * np.finfo(float).eps * max(abs(self.lo), abs(self.hi), 1.0)


def interpolate(grid: Grid, samples, x):
    """Piecewise-linear interpolation of ``samples`` at ``x``.

    Exact at the nodes.  Raises :class:`GridRangeError` for arguments outside
    [lo, hi] (up to round-off slack); there is no extrapolation.
    """
    samples = np.asarray(samples)
    if samples.shape != (grid.m,):
        raise ValueError("samples do not match the grid")
    xs = np.asarray(x, dtype=float)
    tol = grid.range_tol
    if np.any(xs < grid.lo - tol) or np.any(xs > grid.hi + tol):
        raise GridRangeError(
            f"query outside grid range [{grid.lo}, {grid.hi}]"
        )
    xc = np.clip(xs, grid.lo, grid.hi)
    if np.iscomplexobj(samples):
        out = np.interp(xc, grid.nodes, samples.real) + 1j * np.interp(xc, grid.nodes, samples.imag)
    else:
        out = np.interp(xc, grid.nodes, samples)
    if np.isscalar(x) or np.ndim(x) == 0:
        return complex(out) if np.iscomplexobj(samples) else float(out)
    return out


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.m, grid.h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def quadrature(grid: Grid, samples, c=None, d=None):
    """Integral of the piecewise-linear interpolant of ``samples`` over [c, d].

    Composite trapezoid rule; partial end cells are handled by interpolating
    the interval endpoints, so the result is exact for the interpolant itself.
    Defaults to the full grid interval.
    """
    samples = np.asarray(samples)
    if samples.shape != (grid.m,):
        raise ValueError("samples do not match the grid")
    if c is None and d is None:
        return np.sum(samples * trapezoid_weights(grid))
    c = grid.lo if c is None else float(c)
    d = grid.hi if d is None else float(d)
    if c > d:
        raise ValueError("quadrature interval has c > d")
    tol = grid.range_tol
    if c < grid.lo - tol or d > grid.hi + tol:
        raise GridRangeError("quadrature interval outside the grid")
    c = min(max(c, grid.lo), grid.hi)
    d = min(max(d, grid.lo), grid.hi)
    if d - c <= 0.0:
        return complex(0.0) if np.iscomplexobj(samples) else 0.0
    inside = grid.nodes[(grid.nodes > c) & (grid.nodes < d)]
    xs = np.concatenate(([c], inside, [d]))
    vals = interpolate(grid, samples, xs)
    return np.trapezoid(vals, xs)


def l2_norm(grid: Grid, samples, c=None, d=None) -> float:
    """L2 norm of the sampled function over [c, d] (default: whole interval)."""
    dens = np.abs(np.asarray(samples)) ** 2
    val = quadrature(grid, dens, c, d)
    return float(np.sqrt(max(val.real if np.iscomplexobj(val) else val, 0.0)))


@dataclass(frozen=True)
class DelayConfig:
    """Delay length ``a`` plus the landmark geometry derived from it.

    The default constructor requires the inverse-problem regime
    2*pi/5 <= a < pi/2.  :meth:`forward_only` relaxes the lower bound to
    pi/3 for forward computations only.
    """

    a: float
    supports_inverse: bool = True

    def __post_init__(self):
        a = float(self.a)
        lo = A_MIN_INVERSE if self.supports_inverse else A_MIN_FORWARD
        if not (lo <= a < A_MAX):
            kind = "inverse" if self.supports_inverse else "forward"
            raise RegimeError(
                f"delay a={a:.6g} outside the {kind} regime [{lo:.6g}, {A_MAX:.6g})"
            )

    @classmethod
    def forward_only(cls, a: float) -> "DelayConfig":
        return cls(a, supports_inverse=False)

    # -- landmarks on [a, pi] and on the kernel interval -------------------
    @property
    def outer_break_lo(self) -> float:
        return 1.5 * self.a

    @property
    def outer_break_hi(self) -> float:
        return PI - 0.5 * self.a

    @property
    def kernel_break(self) -> float:
        # The correlation part of the kernels lives on (-(pi-2a), pi-2a).
        return PI - 2.0 * self.a

    @property
    def landmarks(self) -> tuple:
        a = self.a
        return (a, 1.5 * a, PI - 0.5 * a, PI - 2.0 * a, 2.0 * a - PI)

    def potential_grid(self, m: int) -> Grid:
        return Grid(self.a, PI, m)

    def kernel_grid(self, m: int) -> Grid:
        # Half resolution is lost in the change of variables x -> (pi+a-x)/2,
        # hence the denser grid.
        return Grid(self.a - PI, PI - self.a, 2 * m - 1)

    def outer_mask(self, x) -> np.ndarray:
        """Closed outer set [a, 3a/2] u [pi-a/2, pi]; breaks belong to it."""
        xs = np.asarray(x, dtype=float)
        tol = 16.0 * np.finfo(float).eps * PI
        return (xs <= self.outer_break_lo + tol) | (xs >= self.outer_break_hi - tol)

    def inner_mask(self, x) -> np.ndarray:
        return ~self.outer_mask(x)


@dataclass(frozen=True)
class PotentialPair:
    """Complex samples of the two potentials on a uniform grid over [a, pi].

    Both potentials vanish identically on (0, a) by convention; that part is
    never stored.
    """

    grid: Grid
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, complex)
        p = _frozen(self.p, complex)
        if q.shape != (self.grid.m,) or p.shape != (self.grid.m,):
            raise ValueError("potential samples do not match their grid")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def scaled(self, factor: complex) -> "PotentialPair":
        return PotentialPair(self.grid, factor * self.q, factor * self.p)

    def norms(self) -> tuple:
        return l2_norm(self.grid, self.q), l2_norm(self.grid, self.p)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues lambda_n for |n| <= n_max of one boundary problem (nu, j)."""

    nu: int
    j: int
    n_max: int
    lam: np.ndarray

    def __post_init__(self):
        if self.nu not in (1, 2) or self.j not in (1, 2):
            raise ValueError("branch indices must be 1 or 2")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        lam = _frozen(self.lam, complex)
        if lam.shape != (2 * self.n_max + 1,):
            raise ValueError("expected 2*n_max+1 eigenvalues")
        object.__setattr__(self, "lam", lam)

    @property
    def shift(self) -> float:
        return (2.0 - self.nu - self.j) / 2.0

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.indices + self.shift

    @property
    def kappa(self) -> np.ndarray:
        return self.lam - self.centers

    @property
    def kappa_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.kappa) ** 2)))

    def value(self, n: int) -> complex:
        if abs(n) > self.n_max:
            raise IndexError(f"index {n} outside |n| <= {self.n_max}")
        return complex(self.lam[n + self.n_max])

    def truncated(self, n_max: int) -> "Spectrum":
        if n_max > self.n_max:
            raise ValueError("cannot extend a spectrum by truncation")
        k = self.n_max - n_max
        return Spectrum(self.nu, self.j, n_max, self.lam[k: len(self.lam) - k])


@dataclass(frozen=True)
class KernelSet:
    """The four kernel functions of one branch nu on [a-pi, pi-a].

    v1, v2 are the sine/cosine-transform kernels; u1, u2 the exponential-
    transform kernels assembled from them.
    """

    nu: int
    grid: Grid
    v1: np.ndarray
    v2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        if self.nu not in (1, 2):
            raise ValueError("branch index must be 1 or 2")
        for name in ("v1", "v2", "u1", "u2"):
            arr = _frozen(getattr(self, name), complex)
            if arr.shape != (self.grid.m,):
                raise ValueError(f"{name} does not match the kernel grid")
            object.__setattr__(self, name, arr)

    def u(self, j: int) -> np.ndarray:
        if j == 1:
            return self.u1
        if j == 2:
            return self.u2
        raise ValueError("boundary index must be 1 or 2")


@dataclass(frozen=True)
class WPair:
    """The pair w_1, w_2 on [a, pi] from which potentials are read off."""

    nu: int
    grid: Grid
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        if self.nu not in (1, 2):
            raise ValueError("branch index must be 1 or 2")
        for name in ("w1", "w2"):
            arr = _frozen(getattr(self, name), complex)
            if arr.shape != (self.grid.m,):
                raise ValueError(f"{name} does not match the grid")
            object.__setattr__(self, name, arr)

    def norms(self) -> tuple:
        return l2_norm(self.grid, self.w1), l2_norm(self.grid, self.w2)
