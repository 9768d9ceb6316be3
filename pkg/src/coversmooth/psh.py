"""Plurisubharmonicity machinery.

Finite-difference Levi forms, pluriharmonicity tests, mollification by a
compactly supported radial bump, and the regularized maximum.  The Levi form
is the Hermitian matrix of mixed second derivatives d^2 u / dz_j dz_bar_k;
in the package's normalization the n=1 Levi value is a quarter of the
ordinary Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError, EmptyGridError
from .geometry import (
    ComplexPoint,
    Domain,
    Grid,
    Intersection,
    ScalarField,
    as_points,
    gauss_legendre,
    halton_sample,
)

_EVAL_CHUNK = 250_000  # stencil rows per evaluator call, keeps memory flat

# Bump profile exp(-1/(1-t^2)) on (-1,1); its integral over (-1,1), computed
# once by high-order quadrature and frozen (12 digits, regression-tested).
BUMP_INTEGRAL = 0.443993816169
BUMP_NORMALIZATION = 1.0 / BUMP_INTEGRAL


def bump_profile(t):
    """exp(-1/(1-t^2)) extended by zero; even, smooth, compact support."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


# ---------------------------------------------------------------------------
# Levi forms

@dataclass(frozen=True)
class LeviMatrix:
    entries: np.ndarray  # (n, n) complex, Hermitian-symmetrized
    location: ComplexPoint
    spacing: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(hermitian_min_eigenvalues(self.entries[None, :, :])[0])


@dataclass(frozen=True)
class PshReport:
    min_eigenvalue: float
    argmin_location: ComplexPoint
    grid: Grid
    fd_h: float

    @property
    def margin(self) -> float:
        return self.min_eigenvalue

    def to_json_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "argmin": self.argmin_location.reals(),
            "h": self.fd_h,
        }


def _levi_offsets(n: int, h: float):
    """Complex offsets of the evaluation stencil, in a fixed order.

    Layout: center; per coordinate j the four axis shifts (+x, -x, +y, -y);
    per pair j<k four cross stencils (xx, yy, xy, yx) of four corners each.
    """
    offs = [np.zeros(n, dtype=complex)]
    for j in range(n):
        for d in (h, -h, 1j * h, -1j * h):
            o = np.zeros(n, dtype=complex)
            o[j] = d
            offs.append(o)
    for j in range(n):
        for k in range(j + 1, n):
            for da, db in ((h, h), (1j * h, 1j * h), (h, 1j * h), (1j * h, h)):
                for sa in (1.0, -1.0):
                    for sb in (1.0, -1.0):
                        o = np.zeros(n, dtype=complex)
                        o[j] = sa * da
                        o[k] = sb * db
                        offs.append(o)
    return np.stack(offs, axis=0)


def levi_form_many(f, Z, h: float) -> np.ndarray:
    """Levi matrices at a block of points, shape (m, n, n), Hermitian.

    f may be a ScalarField or any callable taking (m, n) complex rows.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    Z = as_points(Z, getattr(f, "n", None))
    m, n = Z.shape
    ev = f.eval_many if isinstance(f, ScalarField) else f
    offs = _levi_offsets(n, h)
    P = (Z[:, None, :] + offs[None, :, :]).reshape(m * offs.shape[0], n)
    vals = np.empty(P.shape[0])
    for lo in range(0, P.shape[0], _EVAL_CHUNK):
        vals[lo:lo + _EVAL_CHUNK] = np.asarray(ev(P[lo:lo + _EVAL_CHUNK]),
                                               dtype=float)
    V = vals.reshape(m, offs.shape[0])

    L = np.zeros((m, n, n), dtype=complex)
    c = V[:, 0]
    pos = 1
    inv_h2 = 1.0 / (h * h)
    for j in range(n):
        px, mx, py, my = (V[:, pos], V[:, pos + 1], V[:, pos + 2], V[:, pos + 3])
        pos += 4
        L[:, j, j] = 0.25 * (px + mx + py + my - 4.0 * c) * inv_h2
    for j in range(n):
        for k in range(j + 1, n):
            cross = []
            for _ in range(4):  # xx, yy, xy, yx in stencil order
                pp, pm, mp, mm = (V[:, pos], V[:, pos + 1], V[:, pos + 2], V[:, pos + 3])
                pos += 4
                cross.append((pp - pm - mp + mm) * (0.25 * inv_h2))
            fxx, fyy, fxy, fyx = cross
            val = 0.25 * ((fxx + fyy) + 1j * (fxy - fyx))
            L[:, j, k] = val
            L[:, k, j] = np.conj(val)
    # symmetrization is structural above; enforce it against roundoff anyway
    return 0.5 * (L + np.conj(np.transpose(L, (0, 2, 1))))


def levi_form(f: ScalarField, p, h: float) -> LeviMatrix:
    Z = as_points(p, f.n)
    L = levi_form_many(f, Z, h)[0]
    return LeviMatrix(L, ComplexPoint.from_row(Z[0]), float(h))


def hermitian_min_eigenvalues(L: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of each Hermitian matrix in an (m, n, n) stack.

    Closed forms for n <= 2; cyclic Jacobi for larger n.
    """
    m, n, _ = L.shape
    if n == 1:
        return L[:, 0, 0].real.copy()
    if n == 2:
        a = L[:, 0, 0].real
        d = L[:, 1, 1].real
        b = L[:, 0, 1]
        disc = np.sqrt((a - d) ** 2 + 4.0 * (b.real ** 2 + b.imag ** 2))
        return 0.5 * (a + d - disc)
    return np.array([np.min(hermitian_eigenvalues(L[i])) for i in range(m)])


def hermitian_eigenvalues(H: np.ndarray, tol: float = 1e-12,
                          max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of one Hermitian matrix by cyclic Jacobi rotations.

    Iterates 2x2 Hermitian diagonalizations until the off-diagonal norm
    falls below tol relative to the matrix scale.
    """
    A = np.array(H, dtype=complex)
    n = A.shape[0]
    if n == 1:
        return np.array([A[0, 0].real])
    scale = max(1.0, float(np.max(np.abs(A))))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.abs(A - np.diag(np.diag(A))) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                if abs(b) <= 1e-18 * scale:
                    continue
                a = A[p, p].real
                d = A[q, q].real
                half = 0.5 * (a + d)
                r = math.hypot(0.5 * (a - d), abs(b))
                lam1 = half - r
                v1 = np.array([b, lam1 - a], dtype=complex)
                nv = np.linalg.norm(v1)
                if nv == 0.0:
                    continue
                v1 /= nv
                v2 = np.array([-np.conj(v1[1]), np.conj(v1[0])], dtype=complex)
                U = np.stack([v1, v2], axis=1)
                A[:, [p, q]] = A[:, [p, q]] @ U
                A[[p, q], :] = U.conj().T @ A[[p, q], :]
                A[p, q] = 0.0
                A[q, p] = 0.0
    return np.sort(np.diag(A).real)


def min_levi_eigenvalue(f: ScalarField, g: Grid, h: float) -> PshReport:
    """Minimum over grid nodes of the smallest Levi eigenvalue."""
    if len(g) == 0:
        raise EmptyGridError("empty grid")
    best = np.inf
    best_row = None
    for lo in range(0, len(g), _EVAL_CHUNK // 32 + 1):
        block = g.nodes[lo:lo + _EVAL_CHUNK // 32 + 1]
        L = levi_form_many(f, block, h)
        eigs = hermitian_min_eigenvalues(L)
        i = int(np.argmin(eigs))
        if eigs[i] < best:
            best = float(eigs[i])
            best_row = block[i]
    return PshReport(best, ComplexPoint.from_row(best_row), g, float(h))


def check_pluriharmonic(f: ScalarField, g: Grid, h: float,
                        tol: float) -> Tuple[bool, float]:
    """True iff the Levi matrix max-norm stays below tol over the grid."""
    if len(g) == 0:
        raise EmptyGridError("empty grid")
    dev = 0.0
    for lo in range(0, len(g), _EVAL_CHUNK // 32 + 1):
        L = levi_form_many(f, g.nodes[lo:lo + _EVAL_CHUNK // 32 + 1], h)
        dev = max(dev, float(np.max(np.abs(L))))
    return dev <= tol, dev


# ---------------------------------------------------------------------------
# C2 proxy

def laplacian_sup(f: ScalarField, g: Grid, h: float) -> float:
    """Sup over grid nodes of |discrete Laplacian|."""
    from .geometry import discrete_laplacian_many

    out = 0.0
    for lo in range(0, len(g), _EVAL_CHUNK // 8 + 1):
        vals = discrete_laplacian_many(f, g.nodes[lo:lo + _EVAL_CHUNK // 8 + 1], h)
        out = max(out, float(np.max(np.abs(vals))))
    return out


def c2_refinement_ratio(f: ScalarField, grid_h: Grid, grid_h2: Grid,
                        h: Optional[float] = None) -> float:
    """sup|Lap_{h/2}| / sup|Lap_h| over the two grids.

    Stays near 1 for C2 fields; a conical kink doubles the sup under each
    halving, so values >= 1.9 flag non-smoothness at grid resolution.
    The finite-difference step defaults to each grid's own spacing.
    """
    h = grid_h.h if h is None else h
    s1 = laplacian_sup(f, grid_h, h)
    s2 = laplacian_sup(f, grid_h2, 0.5 * h)
    if s1 == 0.0:
        return 1.0 if s2 == 0.0 else np.inf
    return s2 / s1


# ---------------------------------------------------------------------------
# mollification

@dataclass(frozen=True)
class MollifierKernel:
    offsets: np.ndarray   # (K, n) complex, inside the unit ball of R^{2n}
    weights: np.ndarray   # (K,) positive, sums to 1
    m2_unit: float        # second moment of the unit-radius discrete kernel
    order: int
    two_n: int


@lru_cache(maxsize=None)
def mollifier_kernel(two_n: int, order: int) -> MollifierKernel:
    """Tensor Gauss-Legendre discretization of the radial bump on the unit ball.

    Nodes outside the ball carry zero weight and are dropped; the remaining
    weights are normalized to total mass one, which makes constants exact and
    keeps plurisubharmonicity (positive mixture of translates).
    """
    x, w = gauss_legendre(order)
    grids = np.meshgrid(*([x] * two_n), indexing="ij")
    ws = np.meshgrid(*([w] * two_n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in ws], axis=1), axis=1)
    r = np.linalg.norm(pts, axis=1)
    rho = bump_profile(r)
    keep = rho > 0.0
    pts, wt, rho, r = pts[keep], wt[keep], rho[keep], r[keep]
    full = wt * rho
    full = full / full.sum()
    m2 = float(np.sum(full * r * r))
    cplx = pts[:, 0::2] + 1j * pts[:, 1::2]
    return MollifierKernel(cplx, full, m2, order, two_n)


def mollify(f: ScalarField, eps: float, quad_order: int = 8,
            tau_samples: int = 256) -> ScalarField:
    """Convolution with the radial bump of radius eps, by fixed quadrature.

    The valid domain shrinks by eps (in the domain's own gauge units; for
    metric domains this is the metric margin).  The result is smooth on its
    whole domain.  meta records the kernel second moment m2 = eps^2 * m2_unit
    and a sampled sup-distance estimate tau of |f_eps - f|.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kern = mollifier_kernel(2 * f.n, quad_order)
    new_domain = f.valid_on.shrink(eps)
    # probe that the shrunken domain is non-empty
    try:
        halton_sample(new_domain, 1)
    except DomainError as exc:
        raise DomainError(f"eps={eps} too large for the field domain") from exc

    offsets = kern.offsets
    weights = kern.weights
    K = offsets.shape[0]

    def _eval(Z: np.ndarray) -> np.ndarray:
        m = Z.shape[0]
        out = np.zeros(m)
        block = max(1, _EVAL_CHUNK // K)
        for lo in range(0, m, block):
            Zb = Z[lo:lo + block]
            W = (Zb[:, None, :] - eps * offsets[None, :, :]).reshape(-1, Z.shape[1])
            vals = f.eval_many(W).reshape(Zb.shape[0], K)
            out[lo:lo + block] = vals @ weights
        return out

    g = ScalarField(_eval, new_domain, smooth_on=new_domain,
                    name=f"mollify({f.name or 'f'},{eps:g})")
    pts = halton_sample(new_domain, tau_samples)
    tau = float(np.max(np.abs(g.eval_many(pts) - f.eval_many(pts))))
    g.meta.update({
        "eps": float(eps),
        "quad_order": int(quad_order),
        "kernel_nodes": int(K),
        "m2": float(eps * eps * kern.m2_unit),
        "tau_estimate": tau,
    })
    return g


# ---------------------------------------------------------------------------
# regularized maximum

@dataclass(frozen=True)
class RegMaxKernel:
    """Discretized even bump used by the regularized maximum.

    ``profile`` is the normalized bump (unit integral); nodes/weights are the
    Gauss-Legendre discretization of the profile with weights normalized to
    sum to one, which makes the max bounds, symmetry, monotonicity, convexity
    and translation equivariance hold exactly for the discrete operator.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    normalization: float = BUMP_NORMALIZATION

    def profile(self, t):
        return self.normalization * bump_profile(t)


@lru_cache(maxsize=None)
def regmax_kernel(order: int = 16) -> RegMaxKernel:
    x, w = gauss_legendre(order)
    raw = w * bump_profile(x)
    return RegMaxKernel(x, raw / raw.sum(), order)


def reg_max_many(T1: np.ndarray, T2: np.ndarray, eta: float,
                 kernel: Optional[RegMaxKernel] = None) -> np.ndarray:
    """Vectorized regularized maximum with the exact-max shortcut.

    Whenever |t1 - t2| >= 2*eta the kernel support forces the plain max and
    that is what is returned, bit for bit.  The quadrature branch is the
    double sum over the discrete kernel.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    k = kernel or regmax_kernel()
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    out = np.maximum(T1, T2)
    near = np.abs(T1 - T2) < 2.0 * eta
    if near.any():
        a = T1[near][:, None, None] + eta * k.nodes[None, :, None]
        b = T2[near][:, None, None] + eta * k.nodes[None, None, :]
        W = k.weights[:, None] * k.weights[None, :]
        out[near] = np.einsum("mij,ij->m", np.maximum(a, b), W)
    return out


def reg_max_scalar(t1: float, t2: float, eta: float,
                   kernel: Optional[RegMaxKernel] = None) -> float:
    return float(reg_max_many(np.array([t1]), np.array([t2]), eta, kernel)[0])


def reg_max_fields(u: ScalarField, v: ScalarField, eta: float,
                   kernel: Optional[RegMaxKernel] = None) -> ScalarField:
    """Pointwise regularized maximum of two fields on the common domain.

    The output is claimed smooth where both inputs are smooth; the regions
    where one input dominates by >= 2*eta inherit the dominant side's
    regularity through the shortcut branch.
    """
    if u.n != v.n:
        raise ValueError("field dimensions differ")
    dom = Intersection((u.valid_on, v.valid_on))
    k = kernel or regmax_kernel()

    def _eval(Z: np.ndarray) -> np.ndarray:
        return reg_max_many(u.eval_many(Z), v.eval_many(Z), eta, k)

    smooth = None
    if u.smooth_on is not None and v.smooth_on is not None:
        smooth = Intersection((u.smooth_on, v.smooth_on))
    return ScalarField(_eval, dom, smooth_on=smooth,
                       name=f"regmax({u.name or 'u'},{v.name or 'v'})",
                       meta={"eta": float(eta), "order": k.order})
