import math

import numpy as np
import pytest

from dualbilliards.crash import (CrashProfileParams, build_crash_profile, chord_residuals, construct_crash_orbit,
                                 crash_sequence, crash_setup, no_crash_diagnostic, power_law_limit,
                                 subsolution_residuals)
from dualbilliards.errors import InvalidParams, SandwichFailed

DEMO = CrashProfileParams(c=0.9, strict=False, sign="abs")


@pytest.fixture(scope="module")
def demo_orbit():
    return construct_crash_orbit(DEMO, 80)


@pytest.mark.parametrize("kw", [dict(b=0.5), dict(k=0.9), dict(b=-1.0, k=1.5), dict(c=0.01),
                                dict(c=-1.0), dict(N=1), dict(sign="even")])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        CrashProfileParams(**kw).validate()


def test_lenient_allows_large_c():
    CrashProfileParams(c=0.5, strict=False).validate()
    with pytest.raises(InvalidParams):
        CrashProfileParams(c=1.0, strict=False).validate()


def test_crash_sequence():
    a = crash_sequence(-0.5, 10)
    assert math.isnan(a[0])
    assert a[4] == pytest.approx(-0.5)
    assert np.all(np.diff(a[1:]) > 0) and np.all(a[1:] < 0)


def test_profile_closes_and_stays_positive():
    prof = build_crash_profile(DEMO, 60, "abs")
    assert prof.closure_defect() < 1e-12
    assert prof.min_rho() > 0
    smooth = build_crash_profile(DEMO, 60, "abs", smooth=True)
    assert smooth.closure_defect() < 1e-12


def test_closed_form_residuals_match_chords():
    # two routes: piecewise-constant closed form versus chord integrals of the built curve
    dm, sign = crash_setup(DEMO, 40)
    a = crash_sequence(DEMO.b, 60)
    direct = chord_residuals(dm, a[38:60])
    closed = subsolution_residuals(DEMO, 60, sign)[37:57]
    assert np.max(np.abs(direct - closed)) < 1e-11


def test_demo_orbit(demo_orbit):
    o = demo_orbit
    assert o.residual < 1e-10
    assert np.all(np.diff(o.x) > 0)
    assert np.all(o.x >= o.sandwich.sub.x - 1e-12)
    assert np.all(o.x <= o.sandwich.sup.x + 1e-12)
    assert o.gamma[0] / o.gamma[-1] > 10
    assert np.all(o.sandwich.sup_residuals <= 1e-12)


def test_demo_orbit_is_an_orbit(demo_orbit):
    o = demo_orbit
    dm, _ = crash_setup(DEMO, 80)
    r = chord_residuals(dm, o.x)
    assert np.max(np.abs(r)) < 1e-9


def test_strict_parameters_fail_honestly():
    with pytest.raises(SandwichFailed) as exc:
        construct_crash_orbit(CrashProfileParams(), 40)
    assert exc.value.code == "SandwichFailed"


def test_power_law_limit_recovers_exact_sequence():
    n = np.arange(10, 200, dtype=float)
    x = 0.3 - 2.0 * n ** -0.5
    assert power_law_limit(n, x, -0.5) == pytest.approx(0.3, abs=1e-12)


def test_no_crash_diagnostic_ellipse(maps):
    r = no_crash_diagnostic(maps["ellipse"], 0.0, 1e-3, 2000)
    assert r.linear_growth
    assert not r.cauchy
    assert r.min_delta > 0
    assert 0.5 < r.ratio_min <= 1 <= r.ratio_max < 2
