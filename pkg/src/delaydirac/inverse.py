"""Reconstruction of the potentials from two spectra of one branch.

Pipeline: rebuild the two characteristic functions from their zeros, read
their integer samples as Fourier data, synthesize the kernels u_{nu,1},
u_{nu,2}, check that their mass is confined to [a-pi, pi-a] (the solvability
condition), assemble the pair w_{nu,1}, w_{nu,2} on [a, pi], read the
potentials off directly on the outer set [a, 3a/2] u [pi-a/2, pi], and
correct by the quadratic integrals gamma on the inner interval.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import (
    PI,
    DelayConfig,
    Grid,
    PotentialPair,
    RegimeError,
    Spectrum,
    SpectraMismatchError,
    SupportDefectError,
    WPair,
    interpolate,
    l2_norm,
)
from .forward import compute_kernels, find_spectrum
from .hadamard import build_product, delta_at_integers

DEFAULT_SUPPORT_GATE = 1e-3

# Relative-defect denominators get this floor so that an all-noise kernel
# (zero potential at double precision) does not read as pure defect.
NORM_FLOOR = float(np.sqrt(np.finfo(float).eps))


def synthesize_u(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Truncated Fourier synthesis u(x) = (1/2pi) sum c_n exp(-i n x)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size % 2 != 1:
        raise ValueError("coefficient sequence must cover n = -N..N")
    n_fourier = coeffs.size // 2
    n = np.arange(-n_fourier, n_fourier + 1)
    x = grid.nodes
    out = np.empty(grid.m, dtype=complex)
    step = max(1, int(2**21 // max(n.size, 1)))
    for start in range(0, x.size, step):
        blk = x[start:start + step]
        out[start:start + step] = np.exp(-1j * np.multiply.outer(blk, n)) @ coeffs
    return out / (2.0 * PI)


def support_defect(u: np.ndarray, grid: Grid, cfg: DelayConfig) -> float:
    """Relative L2 mass of u outside [a-pi, pi-a] on the full period.

    Numerical surrogate for the exponential-type solvability condition: data
    coming from an actual potential leave (almost) no mass outside the
    kernel interval.
    """
    if not (np.isclose(grid.lo, -PI, atol=1e-9) and np.isclose(grid.hi, PI, atol=1e-9)):
        raise ValueError("support defect expects samples on the full period [-pi, pi]")
    total = l2_norm(grid, u)
    outside = np.sqrt(
        l2_norm(grid, u, -PI, cfg.a - PI) ** 2 + l2_norm(grid, u, PI - cfg.a, PI) ** 2
    )
    return float(outside / (NORM_FLOOR + total))


def _w_values(grid: Grid, samples: np.ndarray, pts) -> np.ndarray:
    # Single funnel for all reads of w; tests instrument it to check locality.
    return interpolate(grid, samples, pts)


def assemble_w(u1: np.ndarray, u2: np.ndarray, cfg: DelayConfig, nu: int) -> WPair:
    """Build w_{nu,1}, w_{nu,2} on [a, pi] from kernel samples on [a-pi, pi-a].

    Both reflected arguments pi+a-2x and 2x-pi-a stay inside the kernel
    interval for x in [a, pi]; on the standard grids they land exactly on
    kernel nodes.
    """
    if nu not in (1, 2):
        raise ValueError("branch index must be 1 or 2")
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    if u1.shape != u2.shape or u1.ndim != 1 or u1.size % 2 == 0:
        raise ValueError("kernel samples must share one odd-length grid")
    m = (u1.size + 1) // 2
    kgrid = cfg.kernel_grid(m)
    pgrid = cfg.potential_grid(m)
    x = pgrid.nodes
    arg_a = PI + cfg.a - 2.0 * x
    arg_b = 2.0 * x - PI - cfg.a
    u1a = interpolate(kgrid, u1, arg_a)
    u2a = interpolate(kgrid, u2, arg_a)
    u1b = interpolate(kgrid, u1, arg_b)
    u2b = interpolate(kgrid, u2, arg_b)
    if nu == 2:
        w1 = (1j * u1a - u2a) - (1j * u1b + u2b)
        w2 = (u1a + 1j * u2a) + (u1b - 1j * u2b)
    else:
        w1 = -(u1a + 1j * u2a) - (u1b - 1j * u2b)
        w2 = (1j * u1a - u2a) - (1j * u1b + u2b)
    return WPair(nu, pgrid, w1, w2)


@dataclass(frozen=True)
class PartialPotentials:
    """Potential values defined on a masked subset of a grid."""

    grid: Grid
    mask: np.ndarray
    q: np.ndarray
    p: np.ndarray


def recover_outer(w: WPair, cfg: DelayConfig) -> PartialPotentials:
    """Direct readout q = w1, p = w2 on the outer set [a, 3a/2] u [pi-a/2, pi]."""
    mask = cfg.outer_mask(w.grid.nodes)
    q = np.where(mask, w.w1, 0.0)
    p = np.where(mask, w.w2, 0.0)
    return PartialPotentials(w.grid, mask, q, p)


def gamma(w: WPair, nu: int, x: float) -> tuple:
    """The two correction integrals at a point of the open inner interval.

    gamma_1(x) = int_{x+a/2}^{pi} [w1(t) w2(t-x+a/2) - w2(t) w1(t-x+a/2)] dt
    gamma_2(x) = int_{x+a/2}^{pi} [w1(t) w1(t-x+a/2) + w2(t) w2(t-x+a/2)] dt

    The shifted argument stays inside [a, pi-a), i.e. within the already
    recovered outer set, which is what makes the correction well defined.
    """
    if nu != w.nu:
        raise ValueError("branch index does not match the w pair")
    a = w.grid.lo
    lo_break = 1.5 * a
    hi_break = PI - 0.5 * a
    if not (lo_break < x < hi_break):
        raise ValueError(f"gamma needs x strictly inside ({lo_break:.6g}, {hi_break:.6g})")
    t0 = x + 0.5 * a
    nodes = w.grid.nodes
    first = np.searchsorted(nodes, t0, side="right")
    ts = np.concatenate(([t0], nodes[first:]))
    shift = ts - x + 0.5 * a
    w1_t = _w_values(w.grid, w.w1, ts)
    w2_t = _w_values(w.grid, w.w2, ts)
    w1_s = _w_values(w.grid, w.w1, shift)
    w2_s = _w_values(w.grid, w.w2, shift)
    g1 = np.trapezoid(w1_t * w2_s - w2_t * w1_s, ts)
    g2 = np.trapezoid(w1_t * w1_s + w2_t * w2_s, ts)
    return complex(g1), complex(g2)


def recover_inner(w: WPair, nu: int, cfg: DelayConfig) -> PartialPotentials:
    """Corrected readout on the open inner interval (3a/2, pi-a/2).

    The correction enters with opposite signs on the two branches:
    q = w1 - gamma_1 for nu = 2 but q = w1 + gamma_1 for nu = 1 (and the
    same for p); flipping the sign is not optional.
    """
    if nu != w.nu:
        raise ValueError("branch index does not match the w pair")
    sign = -1.0 if nu == 2 else 1.0
    mask = cfg.inner_mask(w.grid.nodes)
    q = np.zeros(w.grid.m, dtype=complex)
    p = np.zeros(w.grid.m, dtype=complex)
    for idx in np.nonzero(mask)[0]:
        g1, g2 = gamma(w, nu, float(w.grid.nodes[idx]))
        q[idx] = w.w1[idx] + sign * g1
        p[idx] = w.w2[idx] + sign * g2
    return PartialPotentials(w.grid, mask, q, p)


@dataclass(frozen=True)
class ReconstructionReport:
    """Outcome of one inversion, including the solvability diagnostics."""

    nu: int
    support_defect_1: float
    support_defect_2: float
    residual_l2: float | None
    potentials: PotentialPair

    @property
    def support_defect(self) -> float:
        return max(self.support_defect_1, self.support_defect_2)

    def to_dict(self) -> dict:
        return {
            "support_defect_1": self.support_defect_1,
            "support_defect_2": self.support_defect_2,
            "residual_l2": self.residual_l2,
        }


def invert_spectra(
    spec1: Spectrum,
    spec2: Spectrum,
    cfg: DelayConfig,
    m: int = 1024,
    n_fourier: int | None = None,
    support_gate: float = DEFAULT_SUPPORT_GATE,
    enforce_gate: bool = True,
    verify_residual: bool = False,
) -> ReconstructionReport:
    """Full inversion of a (j=1, j=2) spectra pair for one branch.

    Raises :class:`SupportDefectError` when the synthesized kernels carry
    more than ``support_gate`` relative mass outside their allowed support
    (inconsistent or unrealizable spectra) and the gate is enforced.
    """
    if not cfg.supports_inverse:
        raise RegimeError("inversion requires 2*pi/5 <= a < pi/2")
    if spec1.nu != spec2.nu:
        raise SpectraMismatchError("spectra come from different branches nu")
    if (spec1.j, spec2.j) != (1, 2):
        raise SpectraMismatchError("need the j=1 spectrum first and the j=2 spectrum second")
    if spec1.n_max != spec2.n_max:
        raise SpectraMismatchError("spectra must be truncated at the same order")
    if n_fourier is None:
        n_fourier = spec1.n_max
    if n_fourier > spec1.n_max:
        raise ValueError("n_fourier beyond the given zeros adds no information")

    nu = spec1.nu
    coeffs = [delta_at_integers(build_product(s), n_fourier) for s in (spec1, spec2)]

    period_grid = Grid(-PI, PI, 4 * m + 1)
    defects = [support_defect(synthesize_u(c, period_grid), period_grid, cfg) for c in coeffs]
    if enforce_gate and max(defects) > support_gate:
        raise SupportDefectError(
            f"support defects {defects[0]:.3g}, {defects[1]:.3g} exceed gate {support_gate:.3g}",
            defects=defects,
        )

    kgrid = cfg.kernel_grid(m)
    u1 = synthesize_u(coeffs[0], kgrid)
    u2 = synthesize_u(coeffs[1], kgrid)
    w = assemble_w(u1, u2, cfg, nu)
    outer = recover_outer(w, cfg)
    inner = recover_inner(w, nu, cfg)
    q = np.where(outer.mask, outer.q, inner.q)
    p = np.where(outer.mask, outer.p, inner.p)
    pot = PotentialPair(cfg.potential_grid(m), q, p)

    residual = None
    if verify_residual:
        residual = 0.0
        ker = compute_kernels(pot, cfg, nu)
        for spec in (spec1, spec2):
            redone = find_spectrum(ker, spec.j, spec.n_max)
            residual += float(np.sqrt(np.sum(np.abs(redone.lam - spec.lam) ** 2)))

    return ReconstructionReport(nu, defects[0], defects[1], residual, pot)
