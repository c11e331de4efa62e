"""Acceptance suite: one test (and one printed line) per criterion and dimension.

The suite runs once per dimension on the desk grids with the committed
calibration file; criterion 17 reruns the other sixteen from a fresh
context and compares the report bytes, so the d=2 pass takes a while.
"""

import pytest

from hsbmo import acceptance
from hsbmo.calibration import load_calibration

# Every tolerance the suite uses, pinned here so a silent change to the
# library constants makes this file fail instead of moving the goalposts.
PINNED_TOLERANCES = {
    "normalization": 1e-8,
    "semigroup": 1e-10,
    "residual_ratio": 1.0,
    "harmonic_rel": 1e-4,
    "homogeneity": 1e-6,
    "band_stability": 0.10,
    "degenerate_bmo": 1e-12,
    "holder_slope": 0.10,
    "vertical_slope_min": 0.9,
    "vertical_persist": 0.5,
    "upsilon_slack": 1e-6,
    "calderon_64": 1e-4,
    "calderon_floor": 1e-10,
    "molecule_slope": 0.15,
    "theta_mean": 1e-8,
    "vanish": 0.1,
    "persist": 0.5,
    "runtime_d1_s": 600.0,
    "runtime_d2_s": 1200.0,
}
PINNED_MARGIN = 1.25
SEED = 0

NUMBERS = [num for num, _, _ in acceptance.CRITERIA]
KEYS = {num: key for num, key, _ in acceptance.CRITERIA}


def test_tolerances_are_pinned():
    assert acceptance.TOLERANCES == PINNED_TOLERANCES
    assert acceptance.MARGIN == PINNED_MARGIN


def test_calibration_file_is_intact():
    cal = load_calibration()
    for d in (1, 2):
        for s in acceptance.SYSTEMS:
            lo, hi = cal.band(d, s, "carleson_bmo")
            assert 0 < lo < 1 < hi


@pytest.fixture(scope="module")
def suite_results():
    cal = load_calibration()
    cache = {}

    def get(d):
        if d not in cache:
            cache[d] = {r.number: r for r in acceptance.run_suite((d,), None, SEED, cal)}
        return cache[d]

    return get


@pytest.mark.parametrize("d", [1, 2], ids=["d1", "d2"])
@pytest.mark.parametrize("number", NUMBERS, ids=[f"C{n:02d}-{KEYS[n]}" for n in NUMBERS])
def test_criterion(suite_results, capsys, d, number):
    r = suite_results(d)[number]
    with capsys.disabled():
        print("\n" + acceptance.format_line(r))
    assert r.error is None, r.error
    assert r.passed, acceptance.format_line(r)
