"""Branched covering models: fibers, multiplicities, pushforward, discriminants.

Two local models cover everything shipped here:

* the power map w = z^d on a disk;
* the Vieta map C^n -> C^n sending an ordered tuple of roots to the
  elementary symmetric values, implemented on ordered tuples so its degree
  is n! and the fiber over a generic point lists all orderings.

A glued cover is a finite family of (downstairs chart, upstairs chart,
local model) assignments; projective scenarios are built from Vieta models
in inverted coordinates, so no separate machinery is needed for them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, RootSolveError, UnsupportedDimensionError
from .geometry import (
    ComplexPoint,
    Domain,
    Intersection,
    LevelRegion,
    ScalarField,
    as_points,
    halton_sample,
)


@dataclass(frozen=True)
class Fiber:
    """Fiber points with multiplicities; multiplicities sum to the degree."""

    base: ComplexPoint
    points: Tuple[Tuple[ComplexPoint, int], ...]

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.points)


# root clustering radius for multiplicity detection; relative to root size
CLUSTER_TOL = 1e-7


def _cluster(values: np.ndarray) -> List[Tuple[complex, int]]:
    """Greedy clustering of near-coincident roots."""
    tol = CLUSTER_TOL * (1.0 + float(np.max(np.abs(values), initial=0.0)))
    groups: List[List[complex]] = []
    for v in values:
        for g in groups:
            if abs(v - g[0]) <= tol:
                g.append(v)
                break
        else:
            groups.append([complex(v)])
    return [(complex(np.mean(g)), len(g)) for g in groups]


class Cover:
    """Common interface of the local covering models."""

    degree: int
    n: int
    upstairs: Domain
    downstairs: Domain
    kind: str = ""

    def fiber_rows(self, B: np.ndarray) -> np.ndarray:
        """All fiber points over each base row, shape (m, degree, n).

        Raw ordered lists (no clustering): the pushforward sums over them,
        which keeps it symmetric in the sheets and hence continuous across
        the branch locus.
        """
        raise NotImplementedError

    def map_many(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def discriminant_many(self, B: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # scalar conveniences -------------------------------------------------
    def fiber(self, b) -> Fiber:
        B = as_points(b, self.n)
        if not self.downstairs.contains_many(B)[0]:
            raise DomainError("base point outside the downstairs chart")
        rows = self.fiber_rows(B)[0]  # (degree, n)
        if self.n == 1:
            clusters = _cluster(rows[:, 0])
            pts = tuple((ComplexPoint((c,)), m) for c, m in clusters)
        else:
            # tuple clustering: group equal tuples up to the cluster radius
            used = np.zeros(rows.shape[0], dtype=bool)
            tol = CLUSTER_TOL * (1.0 + float(np.max(np.abs(rows))))
            out = []
            for i in range(rows.shape[0]):
                if used[i]:
                    continue
                same = np.all(np.abs(rows - rows[i]) <= tol, axis=1)
                used |= same
                out.append((ComplexPoint.from_row(rows[i]), int(same.sum())))
            pts = tuple(out)
        f = Fiber(ComplexPoint.from_row(B[0]), pts)
        if f.total_multiplicity != self.degree:
            raise RootSolveError("fiber multiplicities do not sum to the degree")
        return f

    def discriminant_value(self, b) -> float:
        return float(self.discriminant_many(as_points(b, self.n))[0])


@dataclass(frozen=True)
class PowerCover(Cover):
    """w = z^d from a disk upstairs onto a disk downstairs."""

    d: int
    upstairs: Domain = None
    downstairs: Domain = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("power degree must be >= 1")
        object.__setattr__(self, "degree", self.d)
        object.__setattr__(self, "n", 1)
        object.__setattr__(self, "kind", f"power_{self.d}")

    def fiber_rows(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, 1)
        w = B[:, 0]
        r = np.abs(w) ** (1.0 / self.d)
        theta = np.angle(w) / self.d
        ks = 2.0 * np.pi * np.arange(self.d) / self.d
        roots = r[:, None] * np.exp(1j * (theta[:, None] + ks[None, :]))
        return roots[:, :, None]

    def map_many(self, Z: np.ndarray) -> np.ndarray:
        Z = as_points(Z, 1)
        return Z ** self.d

    def discriminant_many(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, 1)
        return np.abs(B[:, 0])


def _elementary_symmetric(Z: np.ndarray) -> np.ndarray:
    m, n = Z.shape
    out = np.empty((m, n), dtype=complex)
    if n == 1:
        out[:, 0] = Z[:, 0]
    elif n == 2:
        out[:, 0] = Z[:, 0] + Z[:, 1]
        out[:, 1] = Z[:, 0] * Z[:, 1]
    elif n == 3:
        z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
        out[:, 0] = z1 + z2 + z3
        out[:, 1] = z1 * z2 + z1 * z3 + z2 * z3
        out[:, 2] = z1 * z2 * z3
    else:
        raise UnsupportedDimensionError("elementary symmetric: n <= 3")
    return out


def _poly_coeffs(E: np.ndarray) -> np.ndarray:
    """Monic coefficients [1, -e1, e2, -e3, ...] per row."""
    m, n = E.shape
    C = np.empty((m, n + 1), dtype=complex)
    C[:, 0] = 1.0
    for j in range(1, n + 1):
        C[:, j] = ((-1.0) ** j) * E[:, j - 1]
    return C


def _newton_polish(roots: np.ndarray, C: np.ndarray, steps: int = 2) -> np.ndarray:
    """A couple of Newton steps on the monic polynomial, per root.

    Steps are skipped where the derivative is small, which is exactly the
    near-multiple-root case where Newton would do more harm than good.
    """
    m, n = roots.shape
    deg = C.shape[1] - 1
    for _ in range(steps):
        p = np.zeros_like(roots)
        dp = np.zeros_like(roots)
        for j in range(deg + 1):
            dp = dp * roots + p
            p = p * roots + C[:, j][:, None]
        scale = 1.0 + np.abs(roots)
        ok = np.abs(dp) > 1e-8 * scale ** (deg - 1)
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        roots = roots - step
    return roots


def _roots_batched(E: np.ndarray) -> np.ndarray:
    """Roots of t^n - e1 t^{n-1} + ... per row, shape (m, n)."""
    m, n = E.shape
    if n == 1:
        return E.copy()
    if n == 2:
        s, p = E[:, 0], E[:, 1]
        sq = np.sqrt(s * s - 4.0 * p + 0j)
        r1 = 0.5 * (s + sq)
        r2 = 0.5 * (s - sq)
        return np.stack([r1, r2], axis=1)
    C = _poly_coeffs(E)
    comp = np.zeros((m, n, n), dtype=complex)
    comp[:, 1:, :-1] = np.eye(n - 1)
    comp[:, 0, :] = -C[:, 1:]
    roots = np.linalg.eigvals(comp)
    roots = _newton_polish(roots, C)
    # residual check on the worst root
    p = np.zeros_like(roots)
    for j in range(n + 1):
        p = p * roots + C[:, j][:, None]
    scale = (1.0 + np.abs(roots)) ** n
    if np.max(np.abs(p) / scale) > 1e-6:
        raise RootSolveError("polynomial residual too large after polishing")
    return roots


@dataclass(frozen=True)
class VietaCover(Cover):
    """Ordered tuples (z_1..z_n) over their elementary symmetric values."""

    dim: int
    upstairs: Domain = None
    downstairs: Domain = None

    def __post_init__(self):
        if not (1 <= self.dim <= 3):
            raise UnsupportedDimensionError("Vieta cover shipped for n <= 3")
        object.__setattr__(self, "degree", math.factorial(self.dim))
        object.__setattr__(self, "n", self.dim)
        object.__setattr__(self, "kind", f"vieta_{self.dim}")

    def fiber_rows(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, self.n)
        roots = _roots_batched(B)  # (m, n)
        perms = list(itertools.permutations(range(self.n)))
        return np.stack([roots[:, list(p)] for p in perms], axis=1)

    def map_many(self, Z: np.ndarray) -> np.ndarray:
        return _elementary_symmetric(as_points(Z, self.n))

    def discriminant_many(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, self.n)
        if self.n == 1:
            return np.ones(B.shape[0])
        if self.n == 2:
            s, p = B[:, 0], B[:, 1]
            return np.abs(s * s - 4.0 * p)
        e1, e2, e3 = B[:, 0], B[:, 1], B[:, 2]
        disc = (18.0 * e1 * e2 * e3 - 4.0 * e1 ** 3 * e3 + (e1 * e2) ** 2
                - 4.0 * e2 ** 3 - 27.0 * e3 ** 2)
        return np.abs(disc)


@dataclass(frozen=True)
class IdentityCover(Cover):
    """Trivial cover of a chart by itself; degree one, no branch locus."""

    domain: Domain = None

    def __post_init__(self):
        object.__setattr__(self, "degree", 1)
        object.__setattr__(self, "n", self.domain.n)
        object.__setattr__(self, "upstairs", self.domain)
        object.__setattr__(self, "downstairs", self.domain)
        object.__setattr__(self, "kind", "identity")

    def fiber_rows(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, self.n)
        return B[:, None, :]

    def map_many(self, Z: np.ndarray) -> np.ndarray:
        return as_points(Z, self.n)

    def discriminant_many(self, B: np.ndarray) -> np.ndarray:
        B = as_points(B, self.n)
        return np.full(B.shape[0], np.inf)


def branch_sublevel(cover: Cover, radius: float, anchor=None,
                    label: str = "") -> Domain:
    """Sublevel neighbourhood {|discriminant| < radius} of the branch locus."""
    if radius <= 0:
        raise ValueError("sublevel radius must be positive")
    lo, hi = cover.downstairs.bbox()
    if anchor is None:
        anchor = tuple(cover.downstairs.center)
    region = LevelRegion(
        level=lambda B: cover.discriminant_many(B),
        threshold=float(radius), dim=cover.n, anchor=tuple(anchor),
        bounds=(lo, hi), label=label or f"disc<{radius:g}")
    return Intersection((region, cover.downstairs), anchor=tuple(anchor))


def smooth_locus(cover: Cover, within: Optional[Domain] = None) -> Domain:
    """Open set where the discriminant is nonzero, clipped to a chart."""
    dom = within or cover.downstairs
    lo, hi = dom.bbox()
    region = LevelRegion(
        level=lambda B: -cover.discriminant_many(B),
        threshold=0.0, dim=cover.n, anchor=tuple(dom.center),
        bounds=(lo, hi), label="disc!=0")
    return Intersection((region, dom))


def pushforward(cover: Cover, f: ScalarField,
                probe_samples: int = 128) -> ScalarField:
    """Sum of f over the fiber, counted with multiplicities.

    Continuous whenever f is; smooth off the closure of the branch locus.
    Construction probes that sampled fibers stay inside f's domain; every
    later evaluation re-checks membership exactly (a fiber escaping the
    upstairs chart raises rather than extrapolating).
    """
    if f.n != cover.n:
        raise ValueError("field and cover dimensions differ")
    deg = cover.degree

    def _eval(B: np.ndarray) -> np.ndarray:
        rows = cover.fiber_rows(B)
        vals = f.eval_many(rows.reshape(-1, cover.n)).reshape(B.shape[0], deg)
        return vals.sum(axis=1)

    if probe_samples > 0:
        P = halton_sample(cover.downstairs, probe_samples)
        rows = cover.fiber_rows(P).reshape(-1, cover.n)
        ok = f.valid_on.contains_many(rows)
        if not ok.all():
            bad = rows[~ok][0]
            raise DomainError(
                f"fiber point {tuple(bad)} escapes the upstairs chart; "
                "the cover does not satisfy fiber containment")

    out = ScalarField(_eval, cover.downstairs,
                      smooth_on=smooth_locus(cover),
                      name=f"pushforward[{cover.kind}]({f.name or 'f'})")
    out.meta.update({"cover": cover.kind, "degree": deg,
                     "cluster_tol": CLUSTER_TOL})
    return out


@dataclass(frozen=True)
class ChartPair:
    """One downstairs chart with its assigned upstairs chart and local model."""

    downstairs_name: str
    upstairs_name: str
    cover: Cover


@dataclass(frozen=True)
class GluedCover:
    """A finite family of chart-pair local covering models."""

    pairs: Tuple[ChartPair, ...]
    kind: str = "glued"

    def __post_init__(self):
        degs = {p.cover.degree for p in self.pairs}
        if len(degs) != 1:
            raise ValueError("all chart pairs must share the covering degree")

    @property
    def degree(self) -> int:
        return self.pairs[0].cover.degree

    def pair_for(self, downstairs_name: str) -> ChartPair:
        for p in self.pairs:
            if p.downstairs_name == downstairs_name:
                return p
        raise KeyError(downstairs_name)


def as_glued(cover, downstairs_name: str = "base",
             upstairs_name: str = "total") -> GluedCover:
    if isinstance(cover, GluedCover):
        return cover
    return GluedCover((ChartPair(downstairs_name, upstairs_name, cover),))
