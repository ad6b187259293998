"""Acceptance suite: every headline claim at its stated tolerance.

Each test prints one pass line through the terminal-summary hook; a failed
assertion surfaces as an ordinary pytest failure.  Desk scale throughout:
1D meshes up to 1024 cells per side, 2D up to 129 x 129 nodes per
subdomain.
"""

import math

import numpy as np
import pytest

from conftest import record_acceptance
from membrane_logistic import (
    Geometry,
    ProblemSpec,
    RefugeRegion,
    KLambdaSpec,
    find_lambda_infinity,
    find_lambda_star,
    sigma_of_lambda,
    spectral_radius_K,
)
from membrane_logistic.discretize import discretize
from membrane_logistic.limits import (
    alpha_sweep,
    blowup_sweep,
    exterior_convergence,
    minimal_large_solution,
)
from membrane_logistic.spectral import discrete_ceiling
from membrane_logistic.steady import (
    build_bracket,
    constant_bracket,
    continuation,
    monotone_solve,
    two_sided_solve,
)

PI2 = math.pi ** 2


def richardson(coarse, fine):
    return fine + (fine - coarse) / 3.0


# -- spectral oracles ---------------------------------------------------------


def test_threshold_symmetric_oracle(sym_spec):
    values = {}
    for mu in (0.1, 1.0, 10.0):
        spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5), mu=mu)
        lam_c = find_lambda_star(discretize(spec, 256))
        lam_f = find_lambda_star(discretize(spec, 512))
        values[mu] = richardson(lam_c, lam_f)
        assert abs(values[mu] - PI2) <= 1e-4
    spread = max(values.values()) - min(values.values())
    assert spread <= 1e-6
    record_acceptance(
        f"PASS threshold symmetric oracle: |lambda*-pi^2| <= "
        f"{max(abs(v - PI2) for v in values.values()):.1e}, "
        f"mu-spread {spread:.1e}")


def test_threshold_decoupled_oracle(decoupled_spec):
    oracle = (0.75 * math.pi) ** 2
    lam_c = find_lambda_star(discretize(decoupled_spec, 256))
    disc = discretize(decoupled_spec, 512)
    lam_f = find_lambda_star(disc)
    extrap = richardson(lam_c, lam_f)
    assert abs(extrap - oracle) <= 1e-4
    _, eig = sigma_of_lambda(disc, lam_f, return_eig=True)
    dead_norm = float(np.linalg.norm(eig.eigenfunction.u1))
    assert dead_norm <= 1e-8
    record_acceptance(
        f"PASS threshold decoupled oracle: error {abs(extrap - oracle):.1e},"
        f" vanishing-component norm {dead_norm:.1e}")


def test_refuge_ceiling_oracle(two_refuge_disc):
    info_c = find_lambda_infinity(two_refuge_disc, n_refuge=256)
    info_f = find_lambda_infinity(two_refuge_disc, n_refuge=512)
    oracles = (100 * PI2, 25 * PI2)
    errs = []
    for k in range(2):
        extrap = richardson(info_c.per_refuge[k], info_f.per_refuge[k])
        errs.append(abs(extrap - oracles[k]) / oracles[k])
        assert errs[-1] <= 1e-3
    assert info_f.lambda_inf == info_f.per_refuge[1]
    assert info_f.case == "SecondSmaller"
    record_acceptance(
        f"PASS refuge ceiling oracle: relative errors "
        f"{errs[0]:.1e}, {errs[1]:.1e}")


def test_threshold_2d_oracle():
    spec = ProblemSpec(Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.5),
                       mu=1.0)
    lam_c = find_lambda_star(discretize(spec, 64, ny=64))
    lam_f = find_lambda_star(discretize(spec, 128, ny=128))
    extrap = richardson(lam_c, lam_f)
    rel = abs(extrap - 2 * PI2) / (2 * PI2)
    assert rel <= 1e-3
    record_acceptance(f"PASS 2D threshold oracle: relative error {rel:.1e}")


# -- steady-state theorems ------------------------------------------------------


def test_existence_threshold(sym_disc):
    lam_star = find_lambda_star(sym_disc)
    low = monotone_solve(sym_disc, 0.9 * lam_star,
                         constant_bracket(sym_disc, 0.9 * lam_star),
                         tol=1e-10, from_above=True)
    assert low.sup_norm <= 1e-8

    lam = 1.5 * lam_star
    state = monotone_solve(sym_disc, lam, build_bracket(sym_disc, lam),
                           tol=1e-10, from_above=True)
    res = sym_disc.residual(lam, state)
    interior_min = float(np.min(state.global_vector()[sym_disc.free]))
    assert res <= 1e-10
    assert interior_min > 0.0
    record_acceptance(
        f"PASS existence threshold: trivial sup {low.sup_norm:.1e}, "
        f"positive-branch residual {res:.1e}, interior min "
        f"{interior_min:.2e}")


@pytest.fixture(scope="module")
def branch_diagram(sym_spec):
    disc = discretize(sym_spec, 512)
    lam_star = find_lambda_star(disc)
    grid = list(np.linspace(1.01, 3.0, 20) * lam_star)
    return disc, continuation(disc, grid, tol=1e-10)


def test_branch_monotone_and_linear_onset(branch_diagram):
    disc, diagram = branch_diagram
    assert not diagram.failures
    sups = diagram.sup_norms()
    assert len(sups) == 20
    assert np.all(np.diff(sups) > 0)
    assert sups[0] <= 0.05 * sups[-1]
    x = diagram.lambdas()[:5] - diagram.lambda_star
    y = sups[:5]
    design = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    r2 = 1.0 - np.sum((y - fitted) ** 2) / np.sum((y - np.mean(y)) ** 2)
    assert r2 >= 0.99
    record_acceptance(
        f"PASS branch growth: strictly increasing, onset ratio "
        f"{sups[0] / sups[-1]:.3f}, linear-fit R^2 {r2:.6f}")


def test_uniqueness_two_sided_limits(two_refuge_spec, equal_case_spec):
    configs = []
    sym = ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5), mu=1.0)
    configs.append(("nondeg interval symmetric", discretize(sym, 256), 1.5))
    asym = ProblemSpec(Geometry("interval", (0.0, 1.0), 1.0 / 3.0),
                       mu=5.0, m2=2.0)
    configs.append(("nondeg interval asymmetric", discretize(asym, 256),
                    1.7))
    rect = ProblemSpec(Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.4),
                       mu=0.5, m2=2.0)
    configs.append(("nondeg rectangle", discretize(rect, 32, ny=32), 1.6))
    configs.append(("deg two-refuge", discretize(two_refuge_spec, 320),
                    0.35))
    configs.append(("deg equal-case", discretize(equal_case_spec, 320),
                    0.3))
    rect_deg = ProblemSpec(
        Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.5), mu=2.0, p=2.0,
        a1=10.0, a2=10.0,
        refuges=(RefugeRegion(1, (0.15, 0.35, 0.4, 0.6)),
                 RefugeRegion(2, (0.6, 0.85, 0.3, 0.7))))
    configs.append(("deg rectangle", discretize(rect_deg, 40, ny=40), 0.4))

    worst = 0.0
    for name, disc, frac in configs:
        lam_star = find_lambda_star(disc)
        if disc.spec.degenerate:
            lam_inf = find_lambda_infinity(disc).lambda_inf
            lam = lam_star + frac * (lam_inf - lam_star)
        else:
            lam = frac * lam_star
        bracket = build_bracket(disc, lam)
        below, above = two_sided_solve(disc, lam, bracket, tol=1e-9)
        gap = float(np.max(np.abs(below.global_vector() -
                                  above.global_vector())))
        assert gap <= 1e-7, f"{name}: two-sided gap {gap}"
        worst = max(worst, gap)
    record_acceptance(
        f"PASS uniqueness: two-sided limits agree on 6 configurations, "
        f"worst gap {worst:.1e}")


def test_certificates_along_branch(branch_diagram):
    disc, diagram = branch_diagram
    p = disc.spec.p
    worst0, worstp = 0.0, math.inf
    for point in diagram.points:
        u = point.state.global_vector()
        pot = disc.a_vec * np.abs(u) ** (p - 1.0)
        c0 = sigma_of_lambda(disc, point.lam, extra_potential=pot)
        cp = sigma_of_lambda(disc, point.lam, extra_potential=p * pot)
        assert abs(c0) <= 1e-6
        assert cp > 0.0
        worst0 = max(worst0, abs(c0))
        worstp = min(worstp, cp)
    record_acceptance(
        f"PASS solution certificates: |Sigma| <= {worst0:.1e} and "
        f"linearized Sigma >= {worstp:.2e} at 20 branch points")


# -- penalization and blow-up -----------------------------------------------------


def test_penalization_program(two_refuge_disc):
    info = find_lambda_infinity(two_refuge_disc)
    recs = alpha_sweep(two_refuge_disc, [10.0 ** j for j in range(7)])
    lams = [r.lam_alpha for r in recs]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    for r in recs:
        assert min(r.lemma_slack) >= -1e-8 * (1.0 + r.lam_alpha)
    gap = abs(lams[-1] - info.lambda_inf) / info.lambda_inf
    assert gap <= 1e-2

    eig = recs[-1].eig
    phi = eig.eigenfunction.global_vector()
    mass = two_refuge_disc.Mm * phi * phi
    mesh = two_refuge_disc.mesh
    winner_refuge = np.concatenate(
        [np.zeros(mesh.n1, dtype=bool), mesh.refuge_mask_2])
    winner_frac = float(mass[winner_refuge].sum() / mass.sum())
    loser_norm = math.sqrt(float(
        eig.eigenfunction.u1 @ (two_refuge_disc.Mm[:mesh.n1] *
                                eig.eigenfunction.u1)))
    assert winner_frac >= 0.99
    assert loser_norm <= 0.05
    record_acceptance(
        f"PASS penalization program: ceiling gap {gap:.1e}, winner refuge "
        f"share {winner_frac:.4f}, loser norm {loser_norm:.1e}")


@pytest.fixture(scope="module")
def blowup_records(two_refuge_disc):
    ceiling = discrete_ceiling(two_refuge_disc)
    lams = [ceiling * (1.0 - 0.1 * 2.0 ** (-j)) for j in range(7)]
    return blowup_sweep(two_refuge_disc, lams)


def test_blowup_on_refuge_compacts(blowup_records):
    recs = blowup_records
    assert all(r.error is None for r in recs)
    winner = [r.max_on_K2 for r in recs]
    loser = [r.max_on_K1 for r in recs]
    assert all(b > a for a, b in zip(winner, winner[1:]))
    assert winner[-1] >= 2.0 * winner[0]
    # The losing component stays bounded; relative to the diverging
    # winner its refuge profile decays toward zero strictly.
    assert max(loser) <= 10.0 * loser[0]
    relative = [lo / wi for lo, wi in zip(loser, winner)]
    assert all(b < a for a, b in zip(relative, relative[1:]))
    assert relative[-1] <= 1e-4
    record_acceptance(
        f"PASS blow-up sweep: winner growth x{winner[-1] / winner[0]:.0f}, "
        f"loser bounded at {max(loser):.2f} with relative share falling "
        f"to {relative[-1]:.1e}")


def test_exterior_limit_program(equal_case_disc):
    ceiling = discrete_ceiling(equal_case_disc)
    large = minimal_large_solution(equal_case_disc, ceiling,
                                   [10.0, 100.0, 1000.0, 10000.0],
                                   stagnation_tol=1e-3)
    for a, b in zip(large.solutions, large.solutions[1:]):
        assert np.all(b.global_vector() >= a.global_vector() - 1e-9)
    assert large.diffs_on_compact[-1] <= 1e-3

    lams = [ceiling * (1.0 - 0.1 * 2.0 ** (-j)) for j in range(7)]
    recs = blowup_sweep(equal_case_disc, lams)
    assert all(r.error is None for r in recs)
    pairs = exterior_convergence(equal_case_disc, recs, large)
    diffs = [d for _, d in pairs]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] <= 0.05 * diffs[0]
    record_acceptance(
        f"PASS exterior limit: ramp stagnates at "
        f"{large.diffs_on_compact[-1]:.1e}, sweep distance falls from "
        f"{diffs[0]:.2e} to {diffs[-1]:.2e}")


# -- positive-operator identities ---------------------------------------------------


def test_resolvent_radius_identities(decoupled_spec):
    specs = [
        ("symmetric", ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5),
                                  mu=1.0), 32 * 8, None, None),
        ("asymmetric+potential",
         ProblemSpec(Geometry("interval", (0.0, 1.0), 1.0 / 3.0), mu=5.0,
                     m2=2.0), 256, None, (0.5, 0.25)),
        ("rectangle", ProblemSpec(
            Geometry("rectangle", (0.0, 1.0, 0.0, 1.0), 0.5), mu=2.0),
         24, 24, None),
    ]
    worst = 0.0
    for name, spec, n, ny, pot in specs:
        disc = discretize(spec, n, ny)
        sF = sigma_of_lambda(disc, 0.0, extra_potential=pot)
        omega = sF + 1.0
        cap = 3.0
        r0 = spectral_radius_K(disc, KLambdaSpec(0.0, cap, omega),
                               potential=pot)
        err = abs(r0 - (cap + omega) / (cap + sF))
        assert err <= 1e-8, name
        worst = max(worst, err)

    disc = discretize(decoupled_spec, 256)
    sF = sigma_of_lambda(disc, 0.0)
    omega = 0.6 * sF
    cap = 3.0
    lo, hi = 0.0, 40.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if sigma_of_lambda(disc, mid) > omega:
            lo = mid
        else:
            hi = mid
    lam_bar = 0.5 * (lo + hi)
    r_bar = spectral_radius_K(disc, KLambdaSpec(lam_bar, cap, omega))
    assert abs(r_bar - 1.0) <= 1e-6
    radii = [spectral_radius_K(disc, KLambdaSpec(lam, cap, omega))
             for lam in np.linspace(0.0, 2.0 * lam_bar, 5)]
    assert all(b > a for a, b in zip(radii, radii[1:]))
    record_acceptance(
        f"PASS resolvent-radius identities: worst identity error "
        f"{worst:.1e}, unit radius matched to {abs(r_bar - 1.0):.1e}, "
        f"radius increasing on the grid")


def test_monotonicity_battery(two_refuge_disc):
    rng = np.random.default_rng(5)
    spec = ProblemSpec(Geometry("interval", (0.0, 1.0), 1.0 / 3.0), mu=1.0,
                       m2=1.5)
    disc = discretize(spec, 256)
    for lam in rng.uniform(0.0, 25.0, size=10):
        assert sigma_of_lambda(disc, lam + rng.uniform(0.1, 3.0)) < \
            sigma_of_lambda(disc, lam)

    from membrane_logistic import sigma_in_mu
    sigmas = [s for _, s in sigma_in_mu(disc, [0.0, 0.5, 1.0, 5.0, 50.0])]
    assert all(b > a for a, b in zip(sigmas, sigmas[1:]))

    base = sigma_of_lambda(disc, 5.0)
    bumped = sigma_of_lambda(disc, 5.0, extra_potential=(0.8, 0.3))
    assert bumped > base

    full = sigma_of_lambda(two_refuge_disc, 30.0)
    restricted = sigma_of_lambda(two_refuge_disc, 30.0, domain="refuges")
    assert restricted > full
    record_acceptance(
        "PASS monotonicity battery: sigma falls in lambda, grows in mu, "
        "in the potential, and under restriction to the refuges")


def test_validate_command_and_determinism(tmp_path):
    from membrane_logistic.config import parse_config
    from membrane_logistic.runner import emit, run

    nondeg = """
[geometry]
kind = "interval"

[mesh]
n_per_side = 128

[command]
name = "Validate"
"""
    deg = """
[geometry]
kind = "interval"

[coefficients]
p = 3.0
a1 = 100.0
a2 = 100.0

[refuges]
regions = [ { subdomain = 1, box = [0.2, 0.3] },
            { subdomain = 2, box = [0.6, 0.8] } ]

[mesh]
n_per_side = 128

[command]
name = "Validate"
"""
    checks = 0
    for label, text in (("nondeg", nondeg), ("deg", deg)):
        out = tmp_path / label
        env = run(parse_config(text))
        assert env.ok, env.failures
        rows = env.results["tables"]["validate"]["rows"]
        assert {r[1] for r in rows} == {128, 256}
        assert all(r[2] == 1 for r in rows)
        checks += len(rows)
        emit(env, str(out))
        first = (out / "validate.csv").read_bytes()
        emit(run(parse_config(text)), str(out))
        assert (out / "validate.csv").read_bytes() == first
    record_acceptance(
        f"PASS validation and determinism: {checks} invariant rows hold at "
        f"both resolutions; repeated runs are byte-identical")
