import math

import numpy as np
import pytest

from membrane_logistic import (
    Geometry,
    InvariantError,
    NotStagnating,
    ProblemSpec,
    RefugeRegion,
    find_lambda_infinity,
    find_lambda_star,
)
from membrane_logistic.discretize import discretize
from membrane_logistic.limits import (
    alpha_sweep,
    blowup_sweep,
    exterior_compact,
    exterior_convergence,
    minimal_large_solution,
)
from membrane_logistic.spectral import discrete_ceiling, sigma_of_lambda


@pytest.fixture(scope="module")
def small_deg():
    spec = ProblemSpec(
        Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=3.0,
        a1=100.0, a2=100.0,
        refuges=(RefugeRegion(1, (0.2, 0.3)), RefugeRegion(2, (0.6, 0.8))),
    )
    return discretize(spec, 320)


def test_alpha_sweep_records(small_deg):
    recs = alpha_sweep(small_deg, [0.0, 1.0, 10.0, 100.0, 1000.0])
    lams = [r.lam_alpha for r in recs]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    assert recs[0].lam_alpha == pytest.approx(find_lambda_star(small_deg),
                                              abs=1e-8)
    for r in recs:
        assert min(r.lemma_slack) >= -1e-8 * (1.0 + r.lam_alpha)
        assert 0.0 <= r.refuge_mass_fraction <= 1.0
    fracs = [r.refuge_mass_fraction for r in recs]
    assert fracs[-1] > fracs[0]


def test_alpha_sweep_bound(small_deg):
    recs = alpha_sweep(small_deg, [1.0, 100.0, 10000.0])
    bound = sigma_of_lambda(small_deg, 0.0, domain="refuges") / \
        float(np.min(small_deg.m_vec))
    assert all(r.lam_alpha < bound for r in recs)


def test_alpha_sweep_requires_ascending(small_deg):
    with pytest.raises(InvariantError):
        alpha_sweep(small_deg, [10.0, 1.0])


def test_blowup_sweep_growth_and_window(small_deg):
    ceiling = discrete_ceiling(small_deg)
    lam_inf = find_lambda_infinity(small_deg).lambda_inf
    lams = [ceiling * (1 - 0.1 * 2.0 ** (-j)) for j in range(4)]
    lams.append(lam_inf * 1.5)  # out of window, recorded not raised
    recs = blowup_sweep(small_deg, lams)
    good = [r for r in recs if r.error is None]
    assert len(good) == 4
    assert "WindowViolation" in recs[-1].error
    m2 = [r.max_on_K2 for r in good]
    assert all(b > a for a, b in zip(m2, m2[1:]))
    # States are node-wise nondecreasing along the sweep.
    for a, b in zip(good, good[1:]):
        assert np.all(b.solution.global_vector() >=
                      a.solution.global_vector() - 1e-7)


def test_ramp_monotone_and_stagnating(equal_case_disc):
    lam = discrete_ceiling(equal_case_disc)
    approx = minimal_large_solution(equal_case_disc, lam,
                                    [10.0, 100.0, 1000.0, 10000.0])
    assert approx.mode == "both"
    for a, b in zip(approx.solutions, approx.solutions[1:]):
        assert np.all(b.global_vector() >= a.global_vector() - 1e-9)
    diffs = approx.diffs_on_compact
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] <= 1e-3


def test_ramp_not_stagnating_near_refuge(equal_case_disc):
    lam = discrete_ceiling(equal_case_disc)
    tight = exterior_compact(equal_case_disc, margin=0.005)
    with pytest.raises(NotStagnating):
        minimal_large_solution(equal_case_disc, lam,
                               [10.0, 100.0, 1000.0, 10000.0],
                               compact=tight)


def test_ramp_requires_increasing(equal_case_disc):
    with pytest.raises(InvariantError):
        minimal_large_solution(equal_case_disc, 100.0, [100.0, 10.0])


def test_winner_mode_pins_loser(small_deg):
    info = find_lambda_infinity(small_deg)
    assert info.case == "SecondSmaller"
    lam = discrete_ceiling(small_deg)
    approx = minimal_large_solution(small_deg, lam, [10.0, 100.0],
                                    stagnation_tol=math.inf)
    assert approx.mode == "winner"
    mesh = small_deg.mesh
    u = approx.extrapolated.global_vector()
    loser_refuge = np.concatenate([mesh.refuge_mask_1,
                                   np.zeros(mesh.n2, dtype=bool)])
    winner_refuge = np.concatenate([np.zeros(mesh.n1, dtype=bool),
                                    mesh.refuge_mask_2])
    assert np.all(u[loser_refuge] == 0.0)
    assert np.all(u[winner_refuge] == 100.0)


def test_exterior_convergence_decreasing(equal_case_disc):
    ceiling = discrete_ceiling(equal_case_disc)
    lams = [ceiling * (1 - 0.1 * 2.0 ** (-j)) for j in range(5)]
    recs = blowup_sweep(equal_case_disc, lams)
    assert all(r.error is None for r in recs)
    large = minimal_large_solution(equal_case_disc, ceiling,
                                   [10.0, 100.0, 1000.0, 10000.0])
    pairs = exterior_convergence(equal_case_disc, recs, large)
    diffs = [d for _, d in pairs]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
