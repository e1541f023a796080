"""Acceptance criteria, one pytest test and one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py`` to print them directly.
Criterion 2 is expected to fail; see the decisions ledger.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402

from pdd.branching import (BranchingSpec, check_marked_assumptions,  # noqa: E402
                           estimate_branching, fit_positive_part, simulate_tree, tree_scores)
from pdd.feynman_kac import LinearBvpSpec, estimate_point  # noqa: E402
from pdd.geometry import BoxDomain, FaceKind  # noqa: E402
from pdd.orchestrator import PddConfig, benchmark, max_error, run_pdd  # noqa: E402
from pdd.pde import EllipticProblem2D, solve_elliptic_2d, solve_parabolic_1d  # noqa: E402
from pdd.problems import (CvaSpec, KppSpec, ManufacturedElliptic, kpp_exact,  # noqa: E402
                          manufactured_u)
from pdd.sde import DiffusionCoefficients, PathScalars, RngStream, simulate_paths  # noqa: E402

SEED = 20240611


@dataclass
class Check:
    label: str
    passed: bool
    detail: str


def report(number: int, title: str, checks: list) -> bool:
    ok = all(c.passed for c in checks)
    parts = "; ".join(f"{c.label}: {'ok' if c.passed else 'FAIL'} ({c.detail})" for c in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} [{title}] {parts}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# -- 1: KPP pointwise ---------------------------------------------------------------

def criterion_kpp_pointwise() -> list:
    truth = 1.0 - (1.0 + math.exp(-5.0 / 6.0)) ** -2
    est = estimate_branching([0.0], KppSpec().branching_spec(), [1.0], 100_000,
                             RngStream(SEED, (10,))).at(1.0)
    gap = abs(est.value - truth)
    return [Check("u(0,1)", gap <= 3 * est.std_error,
                  f"{est.value:.5f} vs {truth:.5f}, |gap| {gap:.2e} <= 3 SE {3 * est.std_error:.2e}")]


# -- 2: PDD vs monolithic ----------------------------------------------------------

def criterion_pdd_vs_monolithic() -> list:
    common = dict(problem=KppSpec(-20.0, 20.0), levels=11, dx=1e-2, dt_solver=1e-4,
                  master_seed=SEED)
    pdd, _ = run_pdd(PddConfig(subdomains=4, samples=100_000, **common))
    mono, _ = run_pdd(PddConfig(subdomains=1, **common))
    e_pdd = max_error(pdd, kpp_exact, 1.0, (-5.0, 5.0))
    e_mono = max_error(mono, kpp_exact, 1.0, (-5.0, 5.0))
    ratio = e_pdd / e_mono
    return [Check("error ratio", ratio <= 4.0,
                  f"PDD {e_pdd:.2e} / monolithic {e_mono:.2e} = {ratio:.3g}, bound 4")]


# -- 3: scalability ----------------------------------------------------------------

def criterion_scalability() -> list:
    cfg = PddConfig(KppSpec(-200.0, 200.0), levels=11, samples=500, dx=1e-2, dt_solver=2e-3,
                    master_seed=SEED)
    runs = benchmark(cfg, (1, 2, 4, 8), repeats=5)
    t1 = runs[1].solve_model()
    checks = []
    for p in (2, 4, 8):
        dev = runs[p].solve_model() / (t1 / p) - 1.0
        checks.append(Check(f"solve p={p}", abs(dev) <= 0.20,
                            f"{runs[p].solve_model():.4f}s vs T1/p {t1 / p:.4f}s, {dev:+.1%}"))
    # p = 1 has no interface and no Monte Carlo stage
    mc = {p: runs[p].mc_model() for p in (2, 4, 8)}
    ref = mc[2]
    for p in (4, 8):
        dev = mc[p] / ref - 1.0
        checks.append(Check(f"MC p={p}", abs(dev) <= 0.25,
                            f"{mc[p]:.3f}s vs {ref:.3f}s at p=2, {dev:+.1%}"))
    return checks


# -- 4: elliptic manufactured ------------------------------------------------------

def criterion_elliptic() -> list:
    spec = ManufacturedElliptic().linear_bvp_spec()
    checks = []
    points = [(0.25, 0.25), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.75, 0.75)]
    for k, p in enumerate(points):
        est = estimate_point(list(p), 0.0, spec, 10_000, 1e-4, RngStream(SEED, (40, k)))
        truth = float(manufactured_u(*p))
        gap = abs(est.value - truth)
        bound = 3 * est.std_error + 0.02
        checks.append(Check(f"FK {p}", gap <= bound, f"|gap| {gap:.3f} <= {bound:.3f}"))
    prob = ManufacturedElliptic().elliptic_problem()
    errors = []
    for n in (10, 20, 40, 80):
        sol = solve_elliptic_2d(prob, 1.0 / n, 1.0 / n)
        X, Y = np.meshgrid(*sol.axes, indexing="ij")
        errors.append(float(np.max(np.abs(sol.values - manufactured_u(X, Y)))))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    checks.append(Check("mesh halving", all(3.2 <= r <= 4.8 for r in ratios),
                        "ratios " + ", ".join(f"{r:.2f}" for r in ratios)))
    return checks


# -- 5: CVA --------------------------------------------------------------------------

def _cva_l(s):
    coeffs = [abs(a) for a in CvaSpec().coefficients]
    return sum(a * s**k for k, a in enumerate(coeffs)) - s


def criterion_cva() -> list:
    target = (0.0586, 0.5, 0.8199, 0.0, -0.4095)
    fit = fit_positive_part(4).coefficients
    dev = max(abs(a - b) for a, b in zip(fit, target))
    checks = [Check("quartic fit", dev <= 2e-2, f"max deviation {dev:.1e}")]

    cva = CvaSpec()
    report_ = check_marked_assumptions(cva.branching_spec())
    mpmath.mp.dps = 30
    oracle = float(mpmath.quad(lambda s: 1 / _cva_l(s), [1, 2, 10, mpmath.inf]))
    gap = abs(report_.horizon_bound - oracle)
    checks.append(Check("case (iii) T*", report_.case == "iii" and gap <= 1e-4,
                        f"case {report_.case}, T* {report_.horizon_bound:.6f} vs {oracle:.6f}"))

    x0, t = 0.5, cva.horizon
    est = estimate_branching([x0], cva.branching_spec(), [t], 100_000,
                             RngStream(SEED, (50,))).at(t)
    grid = solve_parabolic_1d(cva.parabolic_problem(), 1e-2, 1e-4, tol=1e-10, store_times=[t])
    x = grid.axes[0]
    ref = float(grid.values[-1][np.argmin(np.abs(x - x0))])
    gap = abs(est.value - ref)
    checks.append(Check("marked vs CN", gap <= 3 * est.std_error,
                        f"{est.value:.5f} vs {ref:.5f}, |gap| {gap:.1e} <= {3 * est.std_error:.1e}"))
    return checks


# -- 6: property suites --------------------------------------------------------------

def _ones(x, t=None):
    return np.ones(np.shape(x)[0])


def _cosine(x):
    return 0.5 + 0.4 * np.cos(np.asarray(x)[:, 0])


def criterion_properties() -> list:
    checks = []

    a, _ = run_pdd(PddConfig(KppSpec(-10.0, 10.0), subdomains=4, samples=300, levels=6,
                             dx=0.05, dt_solver=1e-2, master_seed=SEED, workers=1))
    b, _ = run_pdd(PddConfig(KppSpec(-10.0, 10.0), subdomains=4, samples=300, levels=6,
                             dx=0.05, dt_solver=1e-2, master_seed=SEED, workers=4))
    spec = ManufacturedElliptic().linear_bvp_spec()
    f1 = estimate_point([0.3, 0.6], 0.0, spec, 3000, 1e-3, RngStream(SEED), 500, 1)
    f3 = estimate_point([0.3, 0.6], 0.0, spec, 3000, 1e-3, RngStream(SEED), 500, 3)
    same = (np.array_equal(a.values, b.values) and f1.value == f3.value
            and f1.std_error == f3.std_error)
    checks.append(Check("determinism", same, "PDD 1 vs 4 workers, FK 1 vs 3 workers"))

    box = BoxDomain.interval(0.0, 1.0, FaceKind.ABSORBING, FaceKind.REFLECTING)
    batch = simulate_paths(np.full((2000, 1), 0.5), math.inf, box,
                           DiffusionCoefficients.brownian(), PathScalars(), 1e-3, RngStream(SEED))
    checks.append(Check("xi monotone", bool(batch.xi_monotone and np.all(batch.xi >= 0)),
                        f"{int(np.count_nonzero(batch.xi))} of 2000 paths reflected"))

    law = BranchingSpec(1.0, (0.3, 0.2, 0.3, 0.2), _ones, horizon=1.0)
    stream = RngStream(SEED, (60,))
    bad = 0
    for r in range(10_000):
        tree = simulate_tree([0.0], law, [1.0], stream.child(r))
        if tree.alive_count != 1 + sum(ev.offspring - 1 for ev in tree.branch_events):
            bad += 1
    checks.append(Check("bookkeeping", bad == 0, f"{bad} mismatches in 10000 trees"))

    square = BoxDomain((0.0, 0.0), (1.0, 1.0))
    const_fk = estimate_point([0.2, 0.7], 0.0, LinearBvpSpec(square, DiffusionCoefficients.brownian(),
                                                            g=_ones), 500, 1e-2, RngStream(SEED))
    const_br = estimate_branching([0.0], BranchingSpec(1.0, (0.1, 0.4, 0.5), _ones, dirichlet=_ones,
                                                       domain=BoxDomain.interval(-1.0, 1.0)),
                                  [1.0], 500, RngStream(SEED)).at(1.0)
    zero = (const_fk.value == 1.0 and const_fk.std_error == 0.0
            and const_br.value == 1.0 and const_br.std_error == 0.0)
    checks.append(Check("zero variance", zero, "constant data, FK and branching"))

    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(10):
        b1, b2 = rng.uniform(-3, 3, 2)
        c = -rng.uniform(0, 5)
        prob = EllipticProblem2D(square, 1.0, 1.0, b1, b2, c, 0.0,
                                 lambda x, y: 1.0 + np.sin(5 * x) * np.cos(3 * y))
        sol = solve_elliptic_2d(prob, 1 / 16, 1 / 16)
        v = sol.values
        edge = np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])
        worst = max(worst, v.max() - edge.max(), -v.min())
    checks.append(Check("maximum principle", worst <= 1e-10,
                        f"largest excursion {worst:.1e} over 10 random problems"))

    alpha = (0.25, 0.25, 0.5)
    classical = BranchingSpec(1.0, alpha, _cosine, psi_norm=0.9)
    marked = BranchingSpec(1.0, tuple(lambda x, t, a=a: a for a in alpha), _cosine,
                           offspring_law=alpha, psi_norm=0.9, alpha_norms=alpha)
    s1, _, _ = tree_scores([0.3], classical, [1.0], RngStream(SEED), range(2000))
    s2, _, _ = tree_scores([0.3], marked, [1.0], RngStream(SEED), range(2000))
    checks.append(Check("weight-1 equivalence", bool(np.array_equal(s1, s2)),
                        "classical and marked scores identical on 2000 trees"))
    return checks


CRITERIA = [
    (1, "KPP pointwise", criterion_kpp_pointwise),
    (2, "PDD vs monolithic", criterion_pdd_vs_monolithic),
    (3, "scalability (max-over-workers model)", criterion_scalability),
    (4, "elliptic manufactured", criterion_elliptic),
    (5, "CVA", criterion_cva),
    (6, "property suites", criterion_properties),
]


@pytest.mark.slow
@pytest.mark.parametrize("number, title, run", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_acceptance(number, title, run):
    checks = run()
    assert report(number, title, checks), "; ".join(c.detail for c in checks if not c.passed)


if __name__ == "__main__":
    results = [report(number, title, run()) for number, title, run in CRITERIA]
    sys.exit(0 if all(results) else 1)
