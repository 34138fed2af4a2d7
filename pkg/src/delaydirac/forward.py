"""Forward solver: kernels, characteristic functions, eigenvalues, ODE oracle.

The characteristic function of the boundary problem with indices (nu, j) is a
trigonometric head plus the exponential transform of a compactly supported
kernel u_{nu,j} on [a-pi, pi-a]:

    (1,1)  -sin(pi*lam) + integral u_{1,1}(x) exp(i lam x) dx
    (1,2)   cos(pi*lam) + integral u_{1,2}(x) exp(i lam x) dx
    (2,1)   cos(pi*lam) + integral u_{2,1}(x) exp(i lam x) dx
    (2,2)   sin(pi*lam) + integral u_{2,2}(x) exp(i lam x) dx

`compute_kernels` builds u from the potentials once; evaluating the
characteristic function at any lam is then a single weighted sum, which makes
full spectrum sweeps cheap.  `delta_oracle` integrates the delay system
directly by the method of steps and provides an independent check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import numpy as np

from .core import (
    PI,
    A_MIN_FORWARD,
    DelayConfig,
    KernelSet,
    PotentialPair,
    RegimeError,
    RootCountError,
    Spectrum,
    StepCountError,
    interpolate,
    trapezoid_weights,
)

DEFAULT_ORACLE_STEP = PI / 4000.0

# Residual gate for accepting a Newton root, relative to 1+|lam|.
RESIDUAL_TOL = 1e-12
# Half-widths of the per-root acceptance rectangle around the lattice guess.
ROOT_BOX_RE = 0.5
ROOT_BOX_IM = 1.0


def lattice_shift(nu: int, j: int) -> float:
    """Offset of the unperturbed eigenvalue lattice n + shift."""
    return (2.0 - nu - j) / 2.0


def trig_head(nu: int, j: int, lam):
    lam = np.asarray(lam, dtype=complex)
    if (nu, j) == (1, 1):
        return -np.sin(PI * lam)
    if (nu, j) in ((1, 2), (2, 1)):
        return np.cos(PI * lam)
    if (nu, j) == (2, 2):
        return np.sin(PI * lam)
    raise ValueError("branch indices must be 1 or 2")


def trig_head_prime(nu: int, j: int, lam):
    lam = np.asarray(lam, dtype=complex)
    if (nu, j) == (1, 1):
        return -PI * np.cos(PI * lam)
    if (nu, j) in ((1, 2), (2, 1)):
        return -PI * np.sin(PI * lam)
    if (nu, j) == (2, 2):
        return PI * np.cos(PI * lam)
    raise ValueError("branch indices must be 1 or 2")


def _check_branch(nu: int, j: int | None = None) -> None:
    if nu not in (1, 2):
        raise ValueError("branch index nu must be 1 or 2")
    if j is not None and j not in (1, 2):
        raise ValueError("boundary index j must be 1 or 2")


def compute_kernels(pot: PotentialPair, cfg: DelayConfig, nu: int) -> KernelSet:
    """Evaluate the kernels v_{nu,1}, v_{nu,2}, u_{nu,1}, u_{nu,2}.

    On the outer part of [a-pi, pi-a] the kernels read off the potentials
    directly; on the open middle part (2a-pi, pi-2a) they pick up the
    correlation integral over t in [(pi+2a-x)/2, pi], computed here by
    trapezoid quadrature with linear interpolation of the shifted argument.
    """
    _check_branch(nu)
    a = cfg.a
    pgrid = pot.grid
    if not (np.isclose(pgrid.lo, a, atol=1e-9) and np.isclose(pgrid.hi, PI, atol=1e-9)):
        raise ValueError("potential grid does not cover [a, pi] for this delay")
    kgrid = cfg.kernel_grid(pgrid.m)
    x = kgrid.nodes
    tau = 0.5 * (PI + a - x)
    q_tau = interpolate(pgrid, pot.q, tau)
    p_tau = interpolate(pgrid, pot.p, tau)

    if nu == 1:
        v1 = 0.5 * p_tau
        v2 = -0.5 * q_tau
    else:
        v1 = 0.5 * q_tau
        v2 = 0.5 * p_tau

    brk = cfg.kernel_break
    inner = (x > -brk) & (x < brk)
    nodes = pgrid.nodes
    for idx in np.nonzero(inner)[0]:
        xi = x[idx]
        t0 = 0.5 * (PI + 2.0 * a - xi)
        first = np.searchsorted(nodes, t0, side="right")
        ts = np.concatenate(([t0], nodes[first:]))
        q_t = np.concatenate(([interpolate(pgrid, pot.q, t0)], pot.q[first:]))
        p_t = np.concatenate(([interpolate(pgrid, pot.p, t0)], pot.p[first:]))
        sig = 0.5 * (xi + 2.0 * ts - PI)
        q_s = interpolate(pgrid, pot.q, sig)
        p_s = interpolate(pgrid, pot.p, sig)
        i_pp = np.trapezoid(q_t * q_s + p_t * p_s, ts)
        i_qp = np.trapezoid(q_t * p_s - p_t * q_s, ts)
        if nu == 1:
            v1[idx] -= 0.5 * i_pp
            v2[idx] += 0.5 * i_qp
        else:
            v1[idx] += 0.5 * i_qp
            v2[idx] += 0.5 * i_pp

    # The kernel grid is symmetric about 0, so v(-x) is the reversed array.
    v1r = v1[::-1]
    v2r = v2[::-1]
    u1 = (v1 - v1r) / 2j + (v2 + v2r) / 2.0
    u2 = (v2 - v2r) / 2j - (v1 + v1r) / 2.0
    return KernelSet(nu, kgrid, v1, v2, u1, u2)


def _transform(ker: KernelSet, j: int, lam_flat: np.ndarray, with_x: bool) -> np.ndarray:
    """Weighted sum approximating integral of u(x) [i x]^k exp(i lam x) dx."""
    x = ker.grid.nodes
    g = ker.u(j) * trapezoid_weights(ker.grid)
    if with_x:
        g = g * (1j * x)
    out = np.empty(lam_flat.shape, dtype=complex)
    step = max(1, int(2**22 // max(x.size, 1)))
    for start in range(0, lam_flat.size, step):
        blk = lam_flat[start:start + step]
        out[start:start + step] = np.exp(1j * np.multiply.outer(blk, x)) @ g
    return out


def _as_lambda_array(lam):
    lam_arr = np.asarray(lam, dtype=complex)
    return lam_arr.reshape(-1), lam_arr.shape, np.ndim(lam) == 0


def delta_eval(ker: KernelSet, j: int, lam):
    """Characteristic function at lam (scalar or array)."""
    _check_branch(ker.nu, j)
    flat, shape, scalar = _as_lambda_array(lam)
    vals = trig_head(ker.nu, j, flat) + _transform(ker, j, flat, with_x=False)
    return complex(vals[0]) if scalar else vals.reshape(shape)


def delta_prime(ker: KernelSet, j: int, lam):
    """Analytic lambda-derivative of the characteristic function."""
    _check_branch(ker.nu, j)
    flat, shape, scalar = _as_lambda_array(lam)
    vals = trig_head_prime(ker.nu, j, flat) + _transform(ker, j, flat, with_x=True)
    return complex(vals[0]) if scalar else vals.reshape(shape)


# -- method-of-steps oracle ----------------------------------------------------


def _rotation(lam: np.ndarray, x: float) -> np.ndarray:
    """Fundamental matrix of the potential-free system, shape (L, 2, 2)."""
    c = np.cos(lam * x)
    s = np.sin(lam * x)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[:, 0, 0] = c
    out[:, 0, 1] = -s
    out[:, 1, 0] = s
    out[:, 1, 1] = c
    return out


@dataclass(frozen=True)
class TransitionState:
    """Fundamental matrix Y(x, lam) of the delay system at one position.

    Y(0, lam) is the identity, and Y coincides with the potential-free
    rotation everywhere on [0, a].
    """

    x: float
    y: np.ndarray

    def __post_init__(self):
        arr = np.array(self.y, dtype=complex)
        if arr.shape != (2, 2):
            raise ValueError("state must hold a 2x2 matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "y", arr)

    def entry(self, nu: int, j: int) -> complex:
        """The characteristic-function entry y_{j, 3-nu}."""
        _check_branch(nu, j)
        return complex(self.y[j - 1, 2 - nu])


def _integrate_delay_system(pot, cfg, flat, step, x_stop):
    """Advance the fundamental matrix from a to x_stop by the method of steps.

    On [a, 2a] the delayed term is the exact rotation; on [2a, pi] it is read
    from the stored trajectory by linear interpolation, which only ever
    looks back into the uniformly sampled [a, 2a] segment because the
    delayed argument never exceeds pi - a <= 2a.  Classical fourth-order
    stepping throughout, vectorized over lam.
    """
    a = cfg.a
    n1 = int(np.ceil(a / step))
    h1 = a / n1
    if x_stop <= 2.0 * a:
        n_steps = int(np.ceil((x_stop - a) / h1))
        seg_nodes = a + (x_stop - a) / n_steps * np.arange(n_steps + 1)
        steps = [(seg_nodes[k], seg_nodes[k + 1] - seg_nodes[k]) for k in range(n_steps)]
    else:
        n2 = max(1, int(np.ceil((x_stop - 2.0 * a) / step)))
        h2 = (x_stop - 2.0 * a) / n2
        seg_nodes = np.concatenate((a + h1 * np.arange(n1 + 1),
                                    2.0 * a + h2 * np.arange(1, n2 + 1)))
        steps = [(seg_nodes[k], h1 if k < n1 else h2) for k in range(len(seg_nodes) - 1)]

    # Potential samples at all stage abscissae, taken once.
    stage_pts = []
    for x0, h in steps:
        stage_pts.extend((x0, x0 + 0.5 * h, x0 + h))
    stage_pts = np.clip(np.asarray(stage_pts), pot.grid.lo, pot.grid.hi)
    q_st = interpolate(pot.grid, pot.q, stage_pts)
    p_st = interpolate(pot.grid, pot.p, stage_pts)

    hist = np.empty((len(steps) + 1,) + flat.shape + (2, 2), dtype=complex)
    hist[0] = _rotation(flat, a)

    def rhs(y, qv, pv, ydel):
        # B y' = lam y - Q y(x-a)  with  B^{-1} = -B.
        out = np.empty_like(y)
        out[:, 0, :] = -flat[:, None] * y[:, 1, :] + pv * ydel[:, 0, :] - qv * ydel[:, 1, :]
        out[:, 1, :] = flat[:, None] * y[:, 0, :] - qv * ydel[:, 0, :] - pv * ydel[:, 1, :]
        return out

    def delayed(xq):
        d = xq - a
        if d <= a + 1e-12 * PI:
            return _rotation(flat, min(d, a))
        pos = (d - a) / h1
        i = min(int(pos), n1 - 1)
        th = pos - i
        return (1.0 - th) * hist[i] + th * hist[i + 1]

    y = hist[0].copy()
    for k, (x0, h) in enumerate(steps):
        qa, pa = q_st[3 * k], p_st[3 * k]
        qm, pm = q_st[3 * k + 1], p_st[3 * k + 1]
        qb, pb = q_st[3 * k + 2], p_st[3 * k + 2]
        d0 = delayed(x0)
        dm = delayed(x0 + 0.5 * h)
        d1 = delayed(x0 + h)
        k1 = rhs(y, qa, pa, d0)
        k2 = rhs(y + 0.5 * h * k1, qm, pm, dm)
        k3 = rhs(y + 0.5 * h * k2, qm, pm, dm)
        k4 = rhs(y + h * k3, qb, pb, d1)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        hist[k + 1] = y
    return y


def _check_oracle_args(cfg, step):
    if cfg.a < A_MIN_FORWARD - 1e-12:
        raise RegimeError("oracle requires the forward regime a >= pi/3")
    if step > (PI - cfg.a) / 64.0:
        raise StepCountError(
            f"step {step:.3g} gives too few steps on [a, pi]; "
            f"need step <= {(PI - cfg.a) / 64.0:.3g}"
        )


def transition_state(pot: PotentialPair, cfg: DelayConfig, lam: complex, x: float,
                     step: float = DEFAULT_ORACLE_STEP) -> TransitionState:
    """Fundamental matrix Y(x, lam) of the delay system at position x."""
    if not 0.0 <= x <= PI + 1e-12:
        raise ValueError("position must lie in [0, pi]")
    flat = np.array([lam], dtype=complex)
    if x <= cfg.a:
        return TransitionState(x, _rotation(flat, x)[0])
    _check_oracle_args(cfg, step)
    return TransitionState(x, _integrate_delay_system(pot, cfg, flat, step, x)[0])


def delta_oracle(pot: PotentialPair, cfg: DelayConfig, nu: int, j: int, lam,
                 step: float = DEFAULT_ORACLE_STEP):
    """Characteristic function via direct integration of the delay system.

    Returns the entry y_{j, 3-nu} of the fundamental matrix at pi, i.e. the
    same quantity as `delta_eval` but computed without the kernels; `lam`
    may be a scalar or an array.
    """
    _check_branch(nu, j)
    _check_oracle_args(cfg, step)
    flat, shape, scalar = _as_lambda_array(lam)
    y = _integrate_delay_system(pot, cfg, flat, step, PI)
    vals = y[:, j - 1, 2 - nu]
    return complex(vals[0]) if scalar else vals.reshape(shape)


# -- spectrum finder -------------------------------------------------------------


def _winding_count(fn, re_lo, re_hi, im_lo, im_hi,
                   samples_per_unit=8.0, phase_tol=1.0, max_points=400000) -> int:
    """Number of zeros inside a rectangle by tracking the argument of fn.

    The boundary is sampled and refined until consecutive phase steps are
    below ``phase_tol``, which rules out aliasing of full turns.
    """
    corners = np.array([re_lo + 1j * im_lo, re_hi + 1j * im_lo,
                        re_hi + 1j * im_hi, re_lo + 1j * im_hi])
    pieces = []
    for k in range(4):
        z0, z1 = corners[k], corners[(k + 1) % 4]
        n = max(8, int(np.ceil(abs(z1 - z0) * samples_per_unit)))
        pieces.append(z0 + (z1 - z0) * (np.arange(n) / n))
    z = np.concatenate(pieces)
    f = fn(z)
    while True:
        if np.any(np.abs(f) < 1e-280):
            raise RootCountError("characteristic function vanishes on the counting contour")
        dphi = np.angle(np.roll(f, -1) / f)
        bad = np.abs(dphi) > phase_tol
        if not bad.any():
            break
        if z.size > max_points:
            raise RootCountError("contour refinement did not stabilize")
        idx = np.nonzero(bad)[0]
        mids = 0.5 * (z[idx] + np.roll(z, -1)[idx])
        z = np.insert(z, idx + 1, mids)
        f = np.insert(f, idx + 1, fn(mids))
    total = float(np.sum(dphi)) / (2.0 * PI)
    count = int(np.round(total))
    if abs(total - count) > 0.25:
        raise RootCountError(f"winding number {total:.3f} is not close to an integer")
    return count


def _newton(ker: KernelSet, j: int, start: np.ndarray, iterations=60) -> np.ndarray:
    lam = np.array(start, dtype=complex)
    for _ in range(iterations):
        f = delta_eval(ker, j, lam)
        fp = delta_prime(ker, j, lam)
        fp = np.where(np.abs(fp) < 1e-300, 1.0, fp)
        delta = f / fp
        lam = lam - delta
        if np.all(np.abs(delta) <= 1e-14 * (1.0 + np.abs(lam))):
            break
    return lam


def _accepted(ker, j, roots, guesses) -> np.ndarray:
    res = np.abs(delta_eval(ker, j, roots))
    ok = res < RESIDUAL_TOL * (1.0 + np.abs(roots))
    ok &= np.abs(roots.real - guesses.real) <= ROOT_BOX_RE
    ok &= np.abs(roots.imag) <= ROOT_BOX_IM
    return ok


def _subdivision_search(fn, polish, rect, expected_max) -> list:
    """Locate all zeros in ``rect`` by recursive bisection of the count.

    ``polish``, when given, maps a starting point to a refined root; a
    refined root is kept only if it stays inside the cell and clears the
    residual gate, otherwise the cell is split further.
    """
    stack = [rect]
    roots = []
    budget = 64 * expected_max + 256
    while stack:
        budget -= 1
        if budget < 0:
            raise RootCountError("rectangle subdivision budget exhausted")
        re_lo, re_hi, im_lo, im_hi = stack.pop()
        count = _winding_count(fn, re_lo, re_hi, im_lo, im_hi)
        if count == 0:
            continue
        center = complex(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi))
        if count == 1 and polish is not None:
            root = polish(center)
            inside = (re_lo <= root.real <= re_hi) and (im_lo <= root.imag <= im_hi)
            if inside and abs(fn(np.array([root]))[0]) < RESIDUAL_TOL * (1.0 + abs(root)):
                roots.append(root)
                continue
        if max(re_hi - re_lo, im_hi - im_lo) < 1e-9:
            if count > 1:
                warnings.warn(
                    f"multiplicity {count} cluster near {center:.9g}; reported verbatim",
                    RuntimeWarning,
                )
            roots.extend([center] * count)
            continue
        # Split the longer side, with a deterministic off-center offset so the
        # cut line is unlikely to pass through a zero.
        if re_hi - re_lo >= im_hi - im_lo:
            cut = 0.5 * (re_lo + re_hi) + 0.0123456789 * (re_hi - re_lo) / 2.0
            stack.append((re_lo, cut, im_lo, im_hi))
            stack.append((cut, re_hi, im_lo, im_hi))
        else:
            cut = 0.5 * (im_lo + im_hi) + 0.0123456789 * (im_hi - im_lo) / 2.0
            stack.append((re_lo, re_hi, im_lo, cut))
            stack.append((re_lo, re_hi, cut, im_hi))
    return roots


def find_spectrum(ker: KernelSet, j: int, n_max: int) -> Spectrum:
    """Locate the eigenvalues lambda_n for |n| <= n_max of branch (ker.nu, j).

    Newton iteration from the lattice guesses n + shift, certified by an
    argument-principle count over the enclosing rectangle; a count mismatch
    triggers a rectangle-subdivision search before giving up.
    """
    _check_branch(ker.nu, j)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    s = lattice_shift(ker.nu, j)
    guesses = (np.arange(-n_max, n_max + 1) + s).astype(complex)
    roots = _newton(ker, j, guesses)
    ok = _accepted(ker, j, roots, guesses)

    expected = 2 * n_max + 1
    rect = (-n_max - 0.5 + s, n_max + 0.5 + s, -ROOT_BOX_IM, ROOT_BOX_IM)
    count = _winding_count(lambda z: delta_eval(ker, j, z), *rect)

    ordered = np.sort_complex(roots)
    distinct = bool(np.all(np.abs(np.diff(ordered)) > 1e-8)) if expected > 1 else True
    if count == expected and bool(ok.all()) and distinct:
        return Spectrum(ker.nu, j, n_max, roots)

    if count != expected:
        raise RootCountError(
            f"contour count {count} != {expected} for (nu={ker.nu}, j={j}); "
            "kernel grid too coarse or pathological potential"
        )
    found = _subdivision_search(
        lambda z: delta_eval(ker, j, z),
        lambda z0: complex(_newton(ker, j, np.array([z0]))[0]),
        rect,
        expected,
    )
    if len(found) != expected:
        raise RootCountError(
            f"subdivision found {len(found)} roots, expected {expected}; "
            "kernel grid too coarse or pathological potential"
        )
    lam = np.array(sorted(found, key=lambda z: (z.real, z.imag)), dtype=complex)
    return Spectrum(ker.nu, j, n_max, lam)
