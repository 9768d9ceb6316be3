"""Local smoothing of continuous psh potentials and the gluing sweep.

The local step replaces a continuous psh potential phi on a nested triple
U cc V cc W by

    psi = M_eta( phi, phi_eps + 2*delta*sigma )

where phi_eps is the mollification, sigma a smooth shift profile equal to
+1 on U and -1 outside V, and M_eta the regularized max.  When the
quantitative gates below hold, psi is psh, smooth on U, equal to phi
outside the closure of V (bit for bit here: the evaluator returns phi's
own values there), and psh-positive on the transition band.

Gates, checked against measured quantities and raised as ParameterError
with the violated condition string:

    margin > 0              nesting margins and mollification slack
    tau_bound < delta       sup of (phi_eps - phi) over the band V minus U
    eta <= delta/2          shortcut collar fits inside the exactness gap
    2*delta*K_sigma < m/2   shift curvature loses to the psh lower bound m

plus, when the max branch is not the mollified field's own source,

    2*delta >= s_max + 2*eta   smooth branch still wins on all of U

The gluing sweep applies the local step chart by chart, smoothing the
accumulated field each time; corrections are lifted to the other charts
through the declared overlaps, so the cocycle relations are untouched.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ParameterError
from .cocycle import CocycleChart, KahlerCocycle
from .geometry import (
    Complement,
    Domain,
    Intersection,
    ScalarField,
    UnionRegion,
    as_points,
    halton_sample,
    nesting_margin,
)
from .psh import (
    hermitian_min_eigenvalues,
    levi_form_many,
    mollify,
    regmax_kernel,
    reg_max_many,
)


def _bump(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def flat_step(t: np.ndarray) -> np.ndarray:
    """Monotone C-infinity step: 0 for t<=0, 1 for t>=1, exactly flat at both ends."""
    t = np.asarray(t, dtype=float)
    a = _bump(t)
    b = _bump(1.0 - t)
    return a / (a + b + np.where((a + b) == 0.0, 1.0, 0.0))


@dataclass(frozen=True)
class NestedOpens:
    """Nested triple U cc V cc W carrying the cutoff geometry."""

    U: Domain
    V: Domain
    W: Optional[Domain] = None

    def __post_init__(self):
        if self.U.n != self.V.n or (self.W is not None and self.W.n != self.V.n):
            raise ValueError("triple members must share the dimension")


@dataclass(frozen=True)
class SmoothingParams:
    eps: float
    delta: float
    eta: float
    h: float
    moll_order: int = 8
    regmax_order: int = 16
    band_samples: int = 400
    u_samples: int = 256
    delta_step: float = 0.0
    halton_start: int = 1

    def __post_init__(self):
        for name in ("eps", "delta", "eta", "h"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} > 0", f"{name} = {getattr(self, name)!r}")

    def with_delta(self, delta: float) -> "SmoothingParams":
        return dataclasses.replace(self, delta=delta)


def _ramp(sU: np.ndarray, sV: np.ndarray) -> np.ndarray:
    """1 where sU >= 0, 0 where sV <= 0, flat smooth blend between."""
    out = np.zeros(sU.shape[0])
    inner = sU >= 0.0
    out[inner] = 1.0
    mid = (~inner) & (sV > 0.0)
    if mid.any():
        t = sV[mid] / (sV[mid] - sU[mid])
        out[mid] = flat_step(t)
    return out


def make_shift_profile(U: Domain, V: Domain) -> Callable[[np.ndarray], np.ndarray]:
    """sigma: +1 on U, -1 outside V, smooth monotone blend between.

    Built from the smooth gauges of U and V; exactly +-1 on the plateaus
    (the blend profile is flat to all orders at its ends), so any gauge
    kinks buried inside U or outside V never reach sigma.

    Aligned intersections get one ramp per member pair, multiplied.  A
    single ramp of the combined (softmin) gauges carries a curvature
    spike along the corner where the active member switches; the product
    form has no corner term, only the sum of the members' own
    curvatures, which is what the absorption budget is priced for.
    """
    if (isinstance(U, Intersection) and isinstance(V, Intersection)
            and len(U.members) == len(V.members)):
        pairs = list(zip(U.members, V.members))

        def sigma_product(Z: np.ndarray) -> np.ndarray:
            Z = as_points(Z, U.n)
            prod = np.ones(Z.shape[0])
            for A, B in pairs:
                prod *= _ramp(A.gauge_many(Z), B.gauge_many(Z))
            return 2.0 * prod - 1.0

        return sigma_product

    def sigma_many(Z: np.ndarray) -> np.ndarray:
        Z = as_points(Z, U.n)
        out = _ramp(U.gauge_many(Z), V.gauge_many(Z))
        return 2.0 * out - 1.0

    return sigma_many


@dataclass
class LocalSmoothResult:
    psi: ScalarField
    correction: ScalarField
    phi_eps: ScalarField
    sigma: Callable[[np.ndarray], np.ndarray]
    opens: NestedOpens
    params: SmoothingParams
    measurements: Dict[str, float]


def _measure_band(phi: ScalarField, phi_eps: ScalarField, sigma, opens: NestedOpens,
                  params: SmoothingParams,
                  gate_region: Optional[Domain] = None) -> Tuple[Dict[str, float], np.ndarray]:
    band: Domain = Complement(opens.U, within=opens.V)
    if gate_region is not None:
        band = Intersection((band, gate_region))
    B = halton_sample(band, params.band_samples, start=params.halton_start)
    tau_bound = float(np.max(phi_eps.eval_many(B) - phi.eval_many(B)))
    L = levi_form_many(phi_eps, B, params.h)
    m = float(np.min(hermitian_min_eigenvalues(L)))
    Ls = levi_form_many(lambda P: sigma(P), B, params.h)
    eigs_lo = hermitian_min_eigenvalues(Ls)
    eigs_hi = -hermitian_min_eigenvalues(-Ls)
    K_sigma = float(np.max(np.maximum(np.abs(eigs_lo), np.abs(eigs_hi))))
    return ({"tau_bound": tau_bound, "m": m, "K_sigma": K_sigma}, B)


def validate_params(measurements: Dict[str, float],
                    params: SmoothingParams) -> None:
    """Raise ParameterError naming the first violated gate."""
    if measurements.get("margin", 1.0) <= 0.0:
        raise ParameterError("margin > 0",
                             f"margin = {measurements.get('margin')!r}")
    if not (measurements["tau_bound"] < params.delta):
        raise ParameterError(
            "tau_bound < delta",
            f"tau_bound = {measurements['tau_bound']:.6e}, delta = {params.delta:.6e}")
    if not (params.eta <= params.delta / 2.0):
        raise ParameterError(
            "eta <= delta/2",
            f"eta = {params.eta:.6e}, delta = {params.delta:.6e}")
    if not (2.0 * params.delta * measurements["K_sigma"] < measurements["m"] / 2.0):
        raise ParameterError(
            "2*delta*K_sigma < m/2",
            f"delta = {params.delta:.6e}, K_sigma = {measurements['K_sigma']:.6e}, "
            f"m = {measurements['m']:.6e}")
    if "s_max" in measurements:
        if not (2.0 * params.delta >= measurements["s_max"] + 2.0 * params.eta):
            raise ParameterError(
                "2*delta >= s_max + 2*eta",
                f"s_max = {measurements['s_max']:.6e}, delta = {params.delta:.6e}, "
                f"eta = {params.eta:.6e}")


def local_smooth(phi: ScalarField, opens: NestedOpens, params: SmoothingParams,
                 moll_source: Optional[ScalarField] = None,
                 extra_measurements: Optional[Dict[str, float]] = None,
                 gate_region: Optional[Domain] = None,
                 ) -> LocalSmoothResult:
    """One smoothing step on the triple.

    phi is the field entering the max (and passed through untouched outside
    V).  moll_source, when given, is the field that gets mollified instead
    of phi; the default is phi itself.  The returned psi evaluates phi's
    own values outside V, so agreement there is exact by construction and
    the interesting content is that the gates make the formula consistent
    with that shortcut across the seam.

    gate_region, when given, intersects the regions the finite-difference
    gate measurements sample.  The band margin m is a stencil quantity and
    chart windows can push the band across points where the entering field
    is merely continuous; the gate window keeps the measurement on the part
    of the band where the stencil is trustworthy.  The construction itself
    is unchanged.
    """
    src = moll_source if moll_source is not None else phi
    if phi.n != opens.U.n:
        raise ValueError("field and triple dimensions differ")

    phi_eps = mollify(src, params.eps, quad_order=params.moll_order)
    sigma = make_shift_profile(opens.U, opens.V)
    kern = regmax_kernel(params.regmax_order)

    # nesting and stencil slack; every measured point needs the mollified
    # field defined a stencil width around it
    margins = [nesting_margin(opens.U, opens.V, start=params.halton_start),
               nesting_margin(opens.V, phi_eps.valid_on.shrink(3.0 * params.h),
                              start=params.halton_start)]
    if opens.W is not None:
        margins.append(nesting_margin(opens.V, opens.W, start=params.halton_start))
    measurements = {"margin": float(min(margins))}

    band_meas, band_pts = _measure_band(phi, phi_eps, sigma, opens, params,
                                        gate_region=gate_region)
    measurements.update(band_meas)

    # smooth-branch dominance over U; for a psh field mollified from itself
    # this is automatic (s_max <= 0), for a foreign base it is a real gate.
    # Pointwise sup, no stencil, so the gate window does not apply here.
    Upts = halton_sample(opens.U, params.u_samples, start=params.halton_start)
    s_max = float(np.max(phi.eval_many(Upts) - phi_eps.eval_many(Upts)))
    measurements["s_max"] = s_max
    if extra_measurements:
        measurements.update(extra_measurements)

    validate_params(measurements, params)

    two_delta = 2.0 * params.delta
    V = opens.V

    def _psi_eval(Z: np.ndarray) -> np.ndarray:
        Z = as_points(Z, phi.n)
        out = phi.eval_many(Z, check=False)
        inV = V.contains_many(Z)
        if inV.any():
            Zi = Z[inV]
            branch = phi_eps.eval_many(Zi) + two_delta * sigma(Zi)
            out[inV] = reg_max_many(out[inV], branch, params.eta, kern)
        return out

    def _chi_eval(Z: np.ndarray) -> np.ndarray:
        Z = as_points(Z, phi.n)
        out = np.zeros(Z.shape[0])
        inV = V.contains_many(Z)
        if inV.any():
            Zi = Z[inV]
            base = phi.eval_many(Zi, check=False)
            branch = phi_eps.eval_many(Zi) + two_delta * sigma(Zi)
            out[inV] = reg_max_many(base, branch, params.eta, kern) - base
        return out

    outside = Complement(V, within=opens.W) if opens.W is not None else None
    if phi.smooth_on is not None and outside is not None:
        smooth_on = UnionRegion((opens.U, _SmoothIntersect(phi.smooth_on, outside)))
    else:
        smooth_on = opens.U

    psi = ScalarField(_psi_eval, phi.valid_on, smooth_on=smooth_on,
                      name=f"smooth({phi.name or 'phi'})")
    psi.meta.update({"eps": params.eps, "delta": params.delta, "eta": params.eta,
                     **measurements})
    chi = ScalarField(_chi_eval, phi.valid_on, name="correction")
    chi.meta.update({"support": "closure(V)"})
    return LocalSmoothResult(psi, chi, phi_eps, sigma, opens, params, measurements)


def _SmoothIntersect(a: Domain, b: Domain) -> Domain:
    from .geometry import Intersection
    return Intersection((a, b))


@dataclass(frozen=True)
class GlueStep:
    """One sweep step: which chart to smooth and on which nested triple.

    The triple lives in that chart's coordinates.  Names follow the
    sweep's role for them: corrections vanish outside closure(opens.V).
    params, when given, replaces the sweep defaults for this step (each
    chart has its own curvature floor and shift profile, so the budgets
    are per-step quantities).
    """

    chart_name: str
    opens: NestedOpens
    label: str = ""
    params: Optional[SmoothingParams] = None
    gate_region: Optional[Domain] = None


@dataclass
class StepRecord:
    step: GlueStep
    delta_k: float
    result: LocalSmoothResult
    omega: Optional[Domain]


@dataclass
class GlueResult:
    cocycle: KahlerCocycle
    steps: List[StepRecord]

    @property
    def measurements(self) -> List[Dict[str, float]]:
        return [r.result.measurements for r in self.steps]


def _lift_through_overlaps(cocycle: KahlerCocycle, chart_name: str,
                           chi: ScalarField) -> KahlerCocycle:
    """Add chi (living on chart_name) to every other chart that declares an
    overlap into chart_name; outside the overlap the lift is exactly zero,
    consistent with chi vanishing outside its triple."""
    out = cocycle
    for ov in cocycle.overlaps:
        if ov.dst != chart_name or ov.src == chart_name:
            continue
        src_chart = out.chart(ov.src)
        old = src_chart.potential

        def _lift(Z: np.ndarray, _old=old, _ov=ov, _chi=chi) -> np.ndarray:
            Z = as_points(Z, _old.n)
            vals = _old.eval_many(Z, check=False)
            inside = _ov.region.contains_many(Z)
            if inside.any():
                vals[inside] = vals[inside] + _chi.eval_many(
                    _ov.map_many(Z[inside]), check=False)
            return vals

        lifted = ScalarField(_lift, old.valid_on, smooth_on=old.smooth_on,
                             name=old.name)
        lifted.meta.update(old.meta)
        out = out.replace_potential(ov.src, lifted)
    return out


def global_glue(cocycle: KahlerCocycle, steps: Sequence[GlueStep],
                params: SmoothingParams, X1: Optional[Domain] = None,
                X2: Optional[Domain] = None) -> GlueResult:
    """Sweep the local step across charts, lifting corrections as it goes.

    Step k smooths the accumulated field of its chart, mollifying that
    field itself; since corrections of earlier steps keep it psh, the
    mollification dominates it and the s_max gate holds automatically.
    Step k uses delta_k = delta + (k-1)*delta_step unless the step carries
    its own params.  A single step reproduces local_smooth exactly.
    """
    current = cocycle
    records: List[StepRecord] = []
    covered: Optional[Domain] = X1
    for k, step in enumerate(steps, start=1):
        if step.params is not None:
            params_k = step.params
        else:
            params_k = params.with_delta(params.delta + (k - 1) * params.delta_step)
        delta_k = params_k.delta
        chart = current.chart(step.chart_name)
        try:
            res = local_smooth(chart.potential, step.opens, params_k,
                               gate_region=step.gate_region)
        except ParameterError as exc:
            raise ParameterError(exc.condition,
                                 f"glue step {k} ({step.chart_name}): {exc.detail}")

        omega = None
        if covered is not None:
            omega = _SmoothIntersect(step.opens.V, covered)
        covered = (UnionRegion((covered, step.opens.U))
                   if covered is not None else step.opens.U)

        current = current.replace_potential(step.chart_name, res.psi)
        current = _lift_through_overlaps(current, step.chart_name, res.correction)
        records.append(StepRecord(step, delta_k, res, omega))
    return GlueResult(current, records)


@dataclass
class PushforwardRun:
    raw: KahlerCocycle
    glued: GlueResult

    @property
    def cocycle(self) -> KahlerCocycle:
        return self.glued.cocycle


def smooth_pushforward(cover, upstairs: KahlerCocycle,
                       downstairs_overlaps: Sequence,
                       steps: Sequence[GlueStep], params: SmoothingParams,
                       X1: Optional[Domain] = None,
                       X2: Optional[Domain] = None) -> PushforwardRun:
    """Push the upstairs potentials down, then run the gluing sweep.

    cover is a Cover or GluedCover; each chart pair contributes one
    downstairs chart whose potential is the fiber sum of the assigned
    upstairs potential.
    """
    from .covers import as_glued, pushforward as push

    glued_cover = as_glued(cover)
    charts = []
    for pair in glued_cover.pairs:
        up = upstairs.chart(pair.upstairs_name)
        phi = push(pair.cover, up.potential)
        charts.append(CocycleChart(pair.downstairs_name, pair.cover.downstairs, phi))
    raw = KahlerCocycle(tuple(charts), tuple(downstairs_overlaps))
    glue = global_glue(raw, steps, params, X1=X1, X2=X2)
    return PushforwardRun(raw, glue)
