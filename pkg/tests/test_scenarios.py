"""Scenario construction, the agreement check, and report shape."""

import numpy as np
import pytest

from coversmooth.errors import ScenarioError
from coversmooth.geometry import Annulus, Disk, field_from_function
from coversmooth.scenarios import (
    SCENARIO_IDS,
    build_scenario,
    check_passes,
    scenario_defaults,
    verify_agreement,
)

S1_DEFAULTS = {
    "h": 0.01,
    "eps": 0.035,
    "delta": 5e-4,
    "eta": 1e-4,
    "n_radius": 0.6,
    "nprime_radius": 0.4,
}


def test_shipped_scenario_ids():
    assert SCENARIO_IDS == ("S1", "S2", "S3", "S4")


def test_scenario_defaults_frozen_for_s1():
    assert scenario_defaults("S1") == S1_DEFAULTS


def test_scenario_defaults_returns_a_copy():
    d = scenario_defaults("S1")
    d["h"] = 99.0
    assert scenario_defaults("S1") == S1_DEFAULTS


def test_build_s1_at_defaults():
    s = build_scenario("S1")
    assert s.scenario_id == "S1"
    assert s.cover.degree == 2
    assert s.config["nprime_radius"] == 0.4
    assert isinstance(s.X2, Disk)
    assert s.X2.radius == 0.6
    assert len(s.steps) == 1
    assert s.steps[0].chart_name == "w"


def test_unknown_scenario_id():
    with pytest.raises(ScenarioError, match="unknown scenario id"):
        build_scenario("S9")


def test_unknown_override_key_names_the_allowed_set():
    with pytest.raises(ScenarioError, match="allowed"):
        build_scenario("S1", {"bogus": 1.0})


def test_non_finite_override_rejected():
    with pytest.raises(ScenarioError):
        build_scenario("S1", {"eps": float("nan")})
    with pytest.raises(ScenarioError):
        build_scenario("S1", {"h": -0.01})


def test_broken_nesting_is_rejected():
    with pytest.raises(ScenarioError, match="N' cc N"):
        build_scenario("S1", {"nprime_radius": 0.8})


def test_shrinking_n_drags_nprime_along():
    """Overriding only the outer radius keeps the nesting feasible."""
    s = build_scenario("S2", {"n_radius": 0.5})
    assert s.config["nprime_radius"] == pytest.approx(0.5 * 0.5 / 1.15)
    # the glued region threshold follows the override
    level = s.X2.members[0]
    assert level.threshold == pytest.approx(0.5)
    assert level.label == "disc<0.5"


def test_explicit_nprime_override_is_taken_literally():
    s = build_scenario("S1", {"n_radius": 0.5, "nprime_radius": 0.3})
    assert s.config["nprime_radius"] == 0.3


def _field(fn, dom, name):
    return field_from_function(fn, dom, name=name)


def test_verify_agreement_passes_on_identical_fields():
    dom = Disk(0.0, 1.0)
    phi = _field(lambda Z: np.abs(Z[:, 0]) ** 2, dom, "phi")
    out = verify_agreement(phi, phi, Annulus(0.0, 0.6, 0.9), 2000)
    assert out["pass"] is True
    assert out["value"] == 0.0
    assert out["tol"] == 0.0
    assert out["name"] == "agreement_outside_N_sup"


def test_verify_agreement_flags_a_one_ulp_scale_defect():
    # an injected 1e-9 offset must fail: the contract is exact equality
    dom = Disk(0.0, 1.0)
    phi = _field(lambda Z: np.abs(Z[:, 0]) ** 2, dom, "phi")
    psi = _field(lambda Z: np.abs(Z[:, 0]) ** 2 + 1e-9, dom, "psi")
    out = verify_agreement(psi, phi, Annulus(0.0, 0.6, 0.9), 2000)
    assert out["pass"] is False
    assert out["value"] == pytest.approx(1e-9, rel=1e-12)


def test_verify_agreement_skips_regions_that_touch_the_support():
    dom = Disk(0.0, 1.0)
    phi = _field(lambda Z: np.abs(Z[:, 0]) ** 2, dom, "phi")
    psi = _field(lambda Z: np.abs(Z[:, 0]) ** 2 + 1e-9, dom, "psi")
    out = verify_agreement(
        psi, phi, Annulus(0.0, 0.6, 0.9), 2000, correction_support=Disk(0.0, 0.7)
    )
    assert out["status"] == "not-applicable"
    assert out["pass"] is True
    assert out["value"] == 0.0
    # a disjoint support keeps the check live
    out2 = verify_agreement(
        psi, phi, Annulus(0.0, 0.6, 0.9), 2000, correction_support=Disk(0.0, 0.3)
    )
    assert "status" not in out2
    assert out2["pass"] is False


def test_check_passes_semantics():
    assert check_passes({"name": "a", "value": 0.5, "tol": 1.0, "kind": "le", "pass": True})
    assert not check_passes({"name": "a", "value": 2.0, "tol": 1.0, "kind": "le", "pass": True})
    assert check_passes({"name": "a", "value": 2.0, "tol": 1.0, "kind": "ge", "pass": True})
    assert not check_passes({"name": "a", "value": 0.5, "tol": 1.0, "kind": "ge", "pass": True})
    na = {"name": "a", "value": 0.0, "tol": 0.0, "kind": "le", "pass": True,
          "status": "not-applicable"}
    assert check_passes(na)
    err = {"name": "pipeline", "value": 1.0, "tol": 0.0, "kind": "le", "pass": False,
           "error": "ParameterError: eta <= delta/2", "error_type": "ParameterError"}
    assert not check_passes(err)


def test_report_shape_and_environment(scenario_runs):
    for sid, (report, _) in scenario_runs.items():
        assert set(report) == {"scenario", "params", "checks", "pass", "env"}
        assert report["scenario"] == sid
        assert set(report["params"]) == set(S1_DEFAULTS)
        for check in report["checks"]:
            assert {"name", "value", "tol", "pass", "kind"} <= set(check)
            assert isinstance(check["pass"], bool)
        env = report["env"]
        assert env["halton_start"] == 1
        assert env["agreement_samples"] == 10000
        assert "numpy" in env and "python" in env


def test_every_shipped_scenario_passes_at_defaults(scenario_runs):
    for sid, (report, _) in scenario_runs.items():
        failing = [c["name"] for c in report["checks"] if not c["pass"]]
        assert report["pass"] is True, (sid, failing)
