"""Potential cocycles on chart atlases and mass integrals along curves.

A cocycle is a finite chart atlas carrying one local potential per chart,
with declared overlaps along which the potentials differ by pluriharmonic
functions.  Curves are given as parametrized patches inside single charts;
the mass of the associated (1,1)-density along a curve is computed patch by
patch with tensor Gauss-Legendre quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CoverageError, DomainError
from .geometry import Domain, ScalarField, as_points, gauss_legendre, halton_sample
from .psh import check_pluriharmonic, levi_form_many


@dataclass(frozen=True)
class CocycleChart:
    name: str
    domain: Domain
    potential: ScalarField

    def __post_init__(self):
        if self.domain.n != self.potential.n:
            raise ValueError("chart domain and potential dimensions differ")


@dataclass(frozen=True)
class ChartOverlap:
    """Declared overlap: region inside chart `src`, mapped into chart `dst`.

    transform takes (m, n) complex rows in src coordinates to dst
    coordinates and must be holomorphic on the region.
    """

    src: str
    dst: str
    region: Domain
    transform: Callable[[np.ndarray], np.ndarray]

    def map_many(self, Z: np.ndarray) -> np.ndarray:
        W = self.transform(as_points(Z, self.region.n))
        return as_points(W, None)


@dataclass
class KahlerCocycle:
    charts: Tuple[CocycleChart, ...]
    overlaps: Tuple[ChartOverlap, ...] = ()

    def __post_init__(self):
        self.charts = tuple(self.charts)
        self.overlaps = tuple(self.overlaps)
        names = [c.name for c in self.charts]
        if len(set(names)) != len(names):
            raise ValueError("duplicate chart names")

    def chart(self, name: str) -> CocycleChart:
        for c in self.charts:
            if c.name == name:
                return c
        raise KeyError(name)

    def replace_potential(self, name: str, new: ScalarField) -> "KahlerCocycle":
        charts = tuple(
            CocycleChart(c.name, c.domain, new) if c.name == name else c
            for c in self.charts)
        return KahlerCocycle(charts, self.overlaps)


def validate_cocycle(cocycle: KahlerCocycle, h: float = 1e-3,
                     samples: int = 64, tol: float = 1e-4,
                     start: int = 1) -> Dict[str, float]:
    """Check each declared overlap: the potential difference phi_src - phi_dst(T)
    must be pluriharmonic there.  Returns max |Levi| deviation per overlap.

    Sample points are pulled back from the overlap region with enough slack
    for the finite-difference stencil on both sides.
    """
    devs: Dict[str, float] = {}
    for ov in cocycle.overlaps:
        src = cocycle.chart(ov.src)
        dst = cocycle.chart(ov.dst)
        probe = ov.region.shrink(4.0 * h)
        Z = halton_sample(probe, samples, start=start)

        def diff(P: np.ndarray, _ov=ov, _src=src, _dst=dst) -> np.ndarray:
            return (_src.potential.eval_many(P, check=False)
                    - _dst.potential.eval_many(_ov.map_many(P), check=False))

        L = levi_form_many(diff, Z, h)
        dev = float(np.max(np.abs(L)))
        devs[f"{ov.src}->{ov.dst}"] = dev
        if dev > tol:
            raise CoverageError(
                f"overlap {ov.src}->{ov.dst}: potential difference is not "
                f"pluriharmonic (|Levi| = {dev:.3e} > {tol:g})")
    return devs


@dataclass(frozen=True)
class CurvePatch:
    """One parametrized piece of a curve, inside a single chart.

    map_many takes flattened parameter rows (k, 2) of (s, t) to chart
    coordinates (k, n).  Tangents ds/dt are analytic when supplied,
    otherwise centered finite differences in parameter space.
    """

    chart_name: str
    map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    s_range: Tuple[float, float]
    t_range: Tuple[float, float]
    ds: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    dt: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    label: str = ""

    def points(self, S: np.ndarray, T: np.ndarray) -> np.ndarray:
        Z = self.map(S, T)
        return as_points(Z, None)

    def tangents(self, S: np.ndarray, T: np.ndarray,
                 fd_h: float = 1e-5) -> Tuple[np.ndarray, np.ndarray]:
        if self.ds is not None and self.dt is not None:
            return (as_points(self.ds(S, T), None),
                    as_points(self.dt(S, T), None))
        a = (self.points(S + fd_h, T) - self.points(S - fd_h, T)) / (2 * fd_h)
        b = (self.points(S, T + fd_h) - self.points(S, T - fd_h)) / (2 * fd_h)
        return a, b


def curve_mass_patch(potential: ScalarField, patch: CurvePatch,
                     quad_order: int = 24, h: float = 1e-3) -> float:
    """Mass of dd^c(potential) restricted to one curve patch.

    The pulled-back density at parameter (s,t) with tangents a = dz/ds,
    b = dz/dt is -4 Im( sum_jk L_jk a_j conj(b_k) ), integrated ds dt.
    """
    x, wx = gauss_legendre(quad_order)
    s0, s1 = patch.s_range
    t0, t1 = patch.t_range
    S = 0.5 * (s1 - s0) * x + 0.5 * (s1 + s0)
    T = 0.5 * (t1 - t0) * x + 0.5 * (t1 + t0)
    SS, TT = np.meshgrid(S, T, indexing="ij")
    W = np.outer(wx, wx) * (0.25 * (s1 - s0) * (t1 - t0))
    Sf, Tf = SS.ravel(), TT.ravel()

    Z = patch.points(Sf, Tf)
    a, b = patch.tangents(Sf, Tf)
    L = levi_form_many(lambda P: potential.eval_many(P, check=False), Z, h)
    pair = np.einsum("mjk,mj,mk->m", L, a, np.conj(b))
    density = -4.0 * np.imag(pair)
    return float(np.sum(density * W.ravel()))


def curve_mass(cocycle: KahlerCocycle, patches: Sequence[CurvePatch],
               quad_order: int = 24, h: float = 1e-3) -> float:
    """Total mass along a curve given as disjoint patches.

    Patches must not overlap (their contributions add); chart potentials
    differing by pluriharmonic transitions give the same density, so the
    split between charts does not matter as long as the union covers the
    curve once.
    """
    total = 0.0
    for patch in patches:
        pot = cocycle.chart(patch.chart_name).potential
        total += curve_mass_patch(pot, patch, quad_order=quad_order, h=h)
    return total
