"""Complex domains, grids, scalar fields and the discrete operators on them.

Conventions fixed here and used everywhere else:

* points of C^n are numpy arrays of shape (m, n), complex dtype; a single
  point is the m=1 row;
* a domain exposes a boundary-distance-like function that is positive
  exactly on the interior (not necessarily the metric distance);
* lattices are anchored at the domain's center: node = center + h*(integer
  offsets) in every real coordinate, so the center is a node whenever it
  lies inside the domain;
* the dd^c normalization is the one where, for n=1, the density of dd^c u
  is the ordinary Laplacian Delta u times dx dy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptyGridError,
    UnsupportedDimensionError,
)

# Enumerating more lattice sites than this is a bug, not a work load.
_MAX_LATTICE_SITES = 40_000_000

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


# ---------------------------------------------------------------------------
# points

@dataclass(frozen=True)
class ComplexPoint:
    """A point of C^n, n >= 1, all coordinates finite."""

    coords: tuple

    def __post_init__(self):
        cs = tuple(complex(c) for c in self.coords)
        if len(cs) < 1:
            raise ValueError("ComplexPoint needs at least one coordinate")
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in cs):
            raise ValueError("ComplexPoint coordinates must be finite")
        object.__setattr__(self, "coords", cs)

    @property
    def n(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex).reshape(1, -1)

    @staticmethod
    def from_row(row: np.ndarray) -> "ComplexPoint":
        return ComplexPoint(tuple(complex(c) for c in np.asarray(row).ravel()))

    def reals(self) -> list:
        out = []
        for c in self.coords:
            out.extend((c.real, c.imag))
        return out


def as_points(z, n: Optional[int] = None) -> np.ndarray:
    """Coerce scalars / ComplexPoint / sequences / arrays to an (m, n) block."""
    if isinstance(z, ComplexPoint):
        return z.as_array()
    a = np.asarray(z, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        # one point with several coordinates, unless n == 1
        a = a.reshape(-1, 1) if n == 1 else a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("points must form an (m, n) array")
    if n is not None and a.shape[1] != n:
        raise ValueError(f"expected points in C^{n}, got shape {a.shape}")
    return a


# ---------------------------------------------------------------------------
# domains

class Domain:
    """Open subset of C^n with decidable membership.

    ``boundary_distance_many`` is positive exactly on the interior.  It is a
    gauge, not necessarily the metric distance.  ``gauge_many`` is a smooth
    variant used to build shift profiles; it never exceeds the boundary
    distance, and defaults to it.
    """

    n: int

    def contains_many(self, Z: np.ndarray) -> np.ndarray:
        return self.boundary_distance_many(as_points(Z, self.n)) > 0.0

    def boundary_distance_many(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gauge_many(self, Z: np.ndarray) -> np.ndarray:
        return self.boundary_distance_many(Z)

    @property
    def center(self) -> np.ndarray:
        raise NotImplementedError

    def bbox(self):
        """((2n,) lows, (2n,) highs) real bounding box; may raise if unbounded."""
        raise NotImplementedError

    def shrink(self, margin: float) -> "Domain":
        if margin <= 0:
            raise ValueError("shrink margin must be positive")
        return ShrunkDomain(self, margin)

    # scalar conveniences
    def contains(self, p) -> bool:
        return bool(self.contains_many(as_points(p, self.n))[0])

    def boundary_distance(self, p) -> float:
        return float(self.boundary_distance_many(as_points(p, self.n))[0])


def _softmin(columns: Sequence[np.ndarray], gap: float) -> np.ndarray:
    """Smooth lower bound of the pointwise min; softmin(x,..,x) = x - gap*log2(k)."""
    v = np.stack(columns, axis=0)
    if gap <= 0.0:
        return v.min(axis=0)
    t = gap / math.log(2.0)
    m = v.min(axis=0)
    return m - t * np.log(np.sum(np.exp(-(v - m) / t), axis=0))


@dataclass(frozen=True)
class Disk(Domain):
    center_value: complex = 0j
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "n", 1)

    def boundary_distance_many(self, Z):
        Z = as_points(Z, 1)
        return self.radius - np.abs(Z[:, 0] - self.center_value)

    def gauge_many(self, Z):
        # smooth defining function with the sign of the boundary distance
        # and bounded above by it: (R^2 - |z-c|^2)/(2R), kink-free at the
        # center where R - |z-c| is not differentiable
        Z = as_points(Z, 1)
        r2 = np.abs(Z[:, 0] - self.center_value) ** 2
        return (self.radius ** 2 - r2) / (2.0 * self.radius)

    @property
    def center(self):
        return np.array([self.center_value], dtype=complex)

    def bbox(self):
        c, r = self.center_value, self.radius
        return (np.array([c.real - r, c.imag - r]),
                np.array([c.real + r, c.imag + r]))


@dataclass(frozen=True)
class Annulus(Domain):
    center_value: complex = 0j
    r_inner: float = 0.5
    r_outer: float = 1.0

    def __post_init__(self):
        if not (0 < self.r_inner < self.r_outer):
            raise ValueError("annulus needs 0 < r_inner < r_outer")
        object.__setattr__(self, "n", 1)

    def boundary_distance_many(self, Z):
        Z = as_points(Z, 1)
        r = np.abs(Z[:, 0] - self.center_value)
        return np.minimum(r - self.r_inner, self.r_outer - r)

    @property
    def center(self):
        return np.array([self.center_value], dtype=complex)

    def bbox(self):
        c, r = self.center_value, self.r_outer
        return (np.array([c.real - r, c.imag - r]),
                np.array([c.real + r, c.imag + r]))


@dataclass(frozen=True)
class Polydisk(Domain):
    center_values: tuple = (0j,)
    radii: tuple = (1.0,)
    gauge_gap: float = 0.0  # softmin gap for the smooth gauge; 0 keeps hard min

    def __post_init__(self):
        cs = tuple(complex(c) for c in self.center_values)
        rs = tuple(float(r) for r in self.radii)
        if len(cs) != len(rs) or not rs:
            raise ValueError("polydisk needs matching centers and radii")
        if min(rs) <= 0:
            raise ValueError("polydisk radii must be positive")
        object.__setattr__(self, "center_values", cs)
        object.__setattr__(self, "radii", rs)
        object.__setattr__(self, "n", len(rs))

    def _margins(self, Z):
        Z = as_points(Z, self.n)
        return [self.radii[j] - np.abs(Z[:, j] - self.center_values[j])
                for j in range(self.n)]

    def boundary_distance_many(self, Z):
        return np.min(np.stack(self._margins(Z), axis=0), axis=0)

    def gauge_many(self, Z):
        # smooth per-axis defining functions, combined by softmin; each is
        # (R^2 - |z_j - c_j|^2)/(2R) <= R - |z_j - c_j| with matching sign
        Z = as_points(Z, self.n)
        smooth = [(self.radii[j] ** 2 - np.abs(Z[:, j] - self.center_values[j]) ** 2)
                  / (2.0 * self.radii[j]) for j in range(self.n)]
        return _softmin(smooth, self.gauge_gap)

    @property
    def center(self):
        return np.array(self.center_values, dtype=complex)

    def bbox(self):
        lo, hi = [], []
        for c, r in zip(self.center_values, self.radii):
            lo.extend((c.real - r, c.imag - r))
            hi.extend((c.real + r, c.imag + r))
        return np.array(lo), np.array(hi)


@dataclass(frozen=True)
class LevelRegion(Domain):
    """Sublevel set {level(z) < threshold} of a vectorized level function.

    ``grad_scale`` converts level units into the common gauge scale so that
    nesting margins of level regions remain comparable with metric ones.
    The bounding box and the anchor point must be supplied because the level
    function is opaque.
    """

    level: Callable[[np.ndarray], np.ndarray]
    threshold: float
    dim: int
    anchor: tuple
    bounds: tuple  # ((2n,) lows, (2n,) highs)
    grad_scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.dim))

    def boundary_distance_many(self, Z):
        Z = as_points(Z, self.n)
        return (self.threshold - np.asarray(self.level(Z), dtype=float)) / self.grad_scale

    @property
    def center(self):
        return np.array(self.anchor, dtype=complex)

    def bbox(self):
        lo, hi = self.bounds
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


@dataclass(frozen=True)
class Intersection(Domain):
    members: tuple
    gauge_gap: float = 0.0
    anchor: Optional[tuple] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty intersection")
        ns = {d.n for d in self.members}
        if len(ns) != 1:
            raise ValueError("intersection members must share a dimension")
        object.__setattr__(self, "n", ns.pop())

    def boundary_distance_many(self, Z):
        Z = as_points(Z, self.n)
        return np.min(np.stack([d.boundary_distance_many(Z) for d in self.members]), axis=0)

    def gauge_many(self, Z):
        Z = as_points(Z, self.n)
        return _softmin([d.gauge_many(Z) for d in self.members], self.gauge_gap)

    @property
    def center(self):
        if self.anchor is not None:
            return np.array(self.anchor, dtype=complex)
        return self.members[0].center

    def bbox(self):
        # members without a box (opaque preimages) still constrain membership,
        # they just don't narrow the sampling box
        los, his = [], []
        for d in self.members:
            try:
                lo, hi = d.bbox()
            except (NotImplementedError, ValueError):
                continue
            los.append(lo)
            his.append(hi)
        if not los:
            raise ValueError("no intersection member provides a bounding box")
        return np.max(np.stack(los), axis=0), np.min(np.stack(his), axis=0)


@dataclass(frozen=True)
class UnionRegion(Domain):
    members: tuple
    anchor: Optional[tuple] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty union")
        ns = {d.n for d in self.members}
        if len(ns) != 1:
            raise ValueError("union members must share a dimension")
        object.__setattr__(self, "n", ns.pop())

    def boundary_distance_many(self, Z):
        Z = as_points(Z, self.n)
        return np.max(np.stack([d.boundary_distance_many(Z) for d in self.members]), axis=0)

    @property
    def center(self):
        if self.anchor is not None:
            return np.array(self.anchor, dtype=complex)
        return self.members[0].center

    def bbox(self):
        los, his = zip(*(d.bbox() for d in self.members))
        return np.min(np.stack(los), axis=0), np.max(np.stack(his), axis=0)


@dataclass(frozen=True)
class Complement(Domain):
    """Points outside the closure of ``inner``, optionally clipped to ``within``."""

    inner: Domain
    within: Optional[Domain] = None

    def __post_init__(self):
        if self.within is not None and self.within.n != self.inner.n:
            raise ValueError("dimension mismatch")
        object.__setattr__(self, "n", self.inner.n)

    def boundary_distance_many(self, Z):
        Z = as_points(Z, self.n)
        d = -self.inner.boundary_distance_many(Z)
        if self.within is not None:
            d = np.minimum(d, self.within.boundary_distance_many(Z))
        return d

    @property
    def center(self):
        if self.within is not None:
            return self.within.center
        raise ValueError("unbounded complement has no canonical center")

    def bbox(self):
        if self.within is not None:
            return self.within.bbox()
        raise ValueError("unbounded complement has no bbox")


@dataclass(frozen=True)
class MappedRegion(Domain):
    """Preimage of ``target`` under a vectorized coordinate transform.

    Membership and gauge are read off in target coordinates; points where the
    transform blows up are outside.  Used for bookkeeping regions expressed
    in another chart's coordinates, never for grids.
    """

    target: Domain
    transform: Callable[[np.ndarray], np.ndarray]
    dim: int
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.dim))

    def boundary_distance_many(self, Z):
        Z = as_points(Z, self.n)
        W = np.asarray(self.transform(Z), dtype=complex)
        good = np.all(np.isfinite(W.view(float).reshape(W.shape[0], -1)), axis=1)
        out = np.full(Z.shape[0], -np.inf)
        if good.any():
            out[good] = self.target.boundary_distance_many(W[good])
        return out


@dataclass(frozen=True)
class ShrunkDomain(Domain):
    base: Domain
    margin: float

    def __post_init__(self):
        object.__setattr__(self, "n", self.base.n)

    def boundary_distance_many(self, Z):
        return self.base.boundary_distance_many(Z) - self.margin

    def gauge_many(self, Z):
        return self.base.gauge_many(Z) - self.margin

    @property
    def center(self):
        return self.base.center

    def bbox(self):
        lo, hi = self.base.bbox()
        return lo + self.margin, hi - self.margin

    def shrink(self, margin: float) -> "Domain":
        return ShrunkDomain(self.base, self.margin + margin)


def nesting_margin(inner: Domain, outer: Domain, samples: int = 4096,
                   start: int = 1) -> float:
    """Operational nesting margin of inner inside outer.

    Minimum of outer's boundary distance over a deterministic dense sample
    of the inner closure.  Positive iff (at sampling resolution) the inner
    closure sits strictly inside outer.
    """
    pts = halton_sample(inner, samples, start=start)
    return float(np.min(outer.boundary_distance_many(pts)))


# ---------------------------------------------------------------------------
# low-discrepancy sampling

def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    idx = indices.astype(np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    denom = 1.0
    while idx.max(initial=0) > 0:
        denom *= base
        out += (idx % base) / denom
        idx //= base
    return out


def halton(dim: int, count: int, start: int = 1) -> np.ndarray:
    """Halton points in [0,1)^dim, deterministic, indexed from ``start``."""
    if dim > len(_PRIMES):
        raise ValueError("halton dimension too large")
    idx = np.arange(start, start + count)
    return np.stack([_radical_inverse(idx, _PRIMES[k]) for k in range(dim)], axis=1)


def halton_sample(domain: Domain, count: int, start: int = 1) -> np.ndarray:
    """First ``count`` Halton points of the domain's bbox that land inside.

    Deterministic; the Halton index stream starts at ``start`` and is shared
    by every caller that passes the same arguments.
    """
    lo, hi = domain.bbox()
    dim = lo.size
    found = []
    got = 0
    idx = start
    # thin shells in a fat bbox (discriminant bands) can sit near 1e-3
    # acceptance; the budget has to survive those before giving up
    budget = 2048 + 3000 * count
    while got < count and idx - start < budget:
        block = min(4 * count + 256, budget - (idx - start))
        u = halton(dim, block, start=idx)
        idx += block
        X = lo + u * (hi - lo)
        Z = X[:, 0::2] + 1j * X[:, 1::2]
        keep = domain.contains_many(Z)
        if keep.any():
            found.append(Z[keep])
            got += int(keep.sum())
    if got < count:
        raise DomainError(
            f"could not draw {count} sample points inside the domain "
            f"(found {got}); the region may be too thin for its bbox")
    return np.concatenate(found, axis=0)[:count]


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray  # (m, n) complex
    h: float
    domain: Domain

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[0] == 0:
            raise EmptyGridError("grid has no nodes")

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return self.nodes.shape[0]


def sample_grid(domain: Domain, h: float) -> Grid:
    """Uniform lattice of spacing h inside the domain, anchored at its center.

    The anchor is always part of the candidate lattice, so a grid over a
    centered domain contains the center point whenever the center is inside.
    """
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    lo, hi = domain.bbox()
    c = domain.center
    creal = np.empty(lo.size)
    creal[0::2] = c.real
    creal[1::2] = c.imag
    axes = []
    total = 1
    for k in range(lo.size):
        kmin = math.ceil((lo[k] - creal[k]) / h - 1e-12)
        kmax = math.floor((hi[k] - creal[k]) / h + 1e-12)
        if kmax < kmin:
            kmin = kmax = 0
        axes.append(creal[k] + h * np.arange(kmin, kmax + 1))
        total *= len(axes[-1])
        if total > _MAX_LATTICE_SITES:
            raise MemoryError("lattice enumeration too large; increase h")
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    Z = X[:, 0::2] + 1j * X[:, 1::2]
    keep = domain.contains_many(Z)
    if not keep.any():
        raise EmptyGridError("no lattice point of spacing %g lies inside the domain" % h)
    return Grid(Z[keep], float(h), domain)


def sample_slice_grid(domain: Domain, h: float, free_axis: int, basepoint) -> Grid:
    """2D lattice varying one complex coordinate, others pinned at basepoint.

    Makes dense grids affordable on higher-dimensional domains: verification
    sweeps use unions of slices through the interesting locus.
    """
    base = as_points(basepoint, domain.n)[0]
    if not (0 <= free_axis < domain.n):
        raise ValueError("free_axis out of range")
    lo, hi = domain.bbox()
    kre, kim = 2 * free_axis, 2 * free_axis + 1
    c_re, c_im = base[free_axis].real, base[free_axis].imag
    re = c_re + h * np.arange(math.ceil((lo[kre] - c_re) / h - 1e-12),
                              math.floor((hi[kre] - c_re) / h + 1e-12) + 1)
    im = c_im + h * np.arange(math.ceil((lo[kim] - c_im) / h - 1e-12),
                              math.floor((hi[kim] - c_im) / h + 1e-12) + 1)
    if re.size * im.size > _MAX_LATTICE_SITES:
        raise MemoryError("slice lattice too large; increase h")
    RR, II = np.meshgrid(re, im, indexing="ij")
    m = RR.size
    Z = np.tile(base, (m, 1))
    Z[:, free_axis] = RR.ravel() + 1j * II.ravel()
    keep = domain.contains_many(Z)
    if not keep.any():
        raise EmptyGridError("slice grid is empty")
    return Grid(Z[keep], float(h), domain)


# ---------------------------------------------------------------------------
# scalar fields

@dataclass
class ScalarField:
    """Real-valued function on a complex domain.

    ``evaluator`` maps an (m, n) complex block to an (m,) float block and
    must be pure.  Evaluation outside ``valid_on`` raises; there is no
    silent extrapolation.  ``smooth_on`` is the sub-domain where the field
    is claimed infinitely differentiable (None = no claim).
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    valid_on: Domain
    smooth_on: Optional[Domain] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.valid_on.n

    def eval_many(self, Z, check: bool = True) -> np.ndarray:
        Z = as_points(Z, self.n)
        if check:
            ok = self.valid_on.contains_many(Z)
            if not ok.all():
                bad = Z[~ok][0]
                raise DomainError(
                    f"field {self.name or '<anonymous>'} evaluated outside its "
                    f"domain, e.g. at {tuple(bad)}")
        out = np.asarray(self.evaluator(Z), dtype=float)
        if out.shape != (Z.shape[0],):
            raise ValueError("field evaluator returned a wrong shape")
        return out

    def __call__(self, p) -> float:
        return float(self.eval_many(as_points(p, self.n))[0])


def field_from_function(fn: Callable[[np.ndarray], np.ndarray], domain: Domain,
                        smooth_on: Optional[Domain] = None, name: str = "",
                        meta: Optional[dict] = None) -> ScalarField:
    return ScalarField(fn, domain, smooth_on=smooth_on, name=name, meta=dict(meta or {}))


def constant_field(value: float, domain: Domain, name: str = "const") -> ScalarField:
    v = float(value)
    return ScalarField(lambda Z: np.full(Z.shape[0], v), domain,
                       smooth_on=domain, name=name)


# ---------------------------------------------------------------------------
# discrete operators

def _laplacian_stencil(Z: np.ndarray, h: float) -> np.ndarray:
    """Stack of 4n+1 shifted copies: center, then +/-h along each real axis."""
    m, n = Z.shape
    shifts = [Z]
    for j in range(n):
        for delta in (h, -h, 1j * h, -1j * h):
            W = Z.copy()
            W[:, j] = W[:, j] + delta
            shifts.append(W)
    return np.concatenate(shifts, axis=0)


def discrete_laplacian_many(f: ScalarField, Z, h: float) -> np.ndarray:
    """Central second-difference Laplacian over all 2n real directions."""
    Z = as_points(Z, f.n)
    m, n = Z.shape
    vals = f.eval_many(_laplacian_stencil(Z, h))
    center = vals[:m]
    acc = np.zeros(m)
    for k in range(2 * n):
        plus = vals[(1 + 2 * k) * m:(2 + 2 * k) * m]
        minus = vals[(2 + 2 * k) * m:(3 + 2 * k) * m]
        acc += plus + minus - 2.0 * center
    return acc / (h * h)


def discrete_laplacian(f: ScalarField, p, h: float) -> float:
    if h <= 0:
        raise ValueError("h must be positive")
    return float(discrete_laplacian_many(f, p, h)[0])


def mass_integral(f: ScalarField, disk: Domain, h: float) -> float:
    """Integral of the Laplacian density over a planar region.

    Midpoint quadrature over lattice cells of the discrete Laplacian; the
    inner differences telescope, so the value is a discrete boundary flux
    and tolerates isolated interior kinks of the potential.
    """
    if disk.n != 1:
        raise UnsupportedDimensionError("mass_integral is restricted to one variable")
    grid = sample_grid(disk, h)
    lap = discrete_laplacian_many(f, grid.nodes, h)
    return float(np.sum(lap) * h * h)


# ---------------------------------------------------------------------------
# quadrature helpers

def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1]."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    return np.polynomial.legendre.leggauss(int(order))


# ---------------------------------------------------------------------------
# serialization

def csv_header(n: int) -> list:
    cols = []
    for j in range(1, n + 1):
        cols.extend((f"re_{j}", f"im_{j}"))
    cols.append("value")
    return cols


def dump_field_csv(f: ScalarField, grid: Grid, path: str) -> None:
    """Grid dump with header re_1,im_1,...,re_n,im_n,value."""
    vals = f.eval_many(grid.nodes)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(grid.n))
        for row, v in zip(grid.nodes, vals):
            rec = []
            for c in row:
                rec.extend((repr(float(c.real)), repr(float(c.imag))))
            rec.append(repr(float(v)))
            writer.writerow(rec)
