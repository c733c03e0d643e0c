"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.
"""

import math
import time

import numpy as np
import pytest

import vmfb
from vmfb import (
    AbsValue,
    AffineSubspace,
    Ball,
    Box,
    CocoerciveOperator,
    FBProblem,
    HalfLine,
    HalfSpace,
    Indicator,
    L1Norm,
    LinearMap,
    Metric,
    Quadratic,
    ScalarComposition,
    ScalarQuadratic,
    Singleton,
    StoppingRule,
    Zero,
    auto_steps,
    b_drift_diagnostic,
    block_schedule,
    constant_schedule,
    constant_steps,
    fb_solve,
    fejer_diagnostic,
    geometric_errors,
    increasing_schedule,
    kkt_residual,
    linear_monotone,
    normal_cone,
    perturbed_schedule,
    prox_metric,
    prox_quadratic_metric,
    project_metric,
    qp_oracle,
    reference_fb,
    resolvent_inverse_identity,
    resolvent_metric,
    scalar_prox_oracle,
    scalar_schedule,
    solve_best_approximation,
    solve_cocoercive_pd,
    solve_strong_duality,
    solve_strongly_convex_min,
    subdifferential,
    validate_corollary62,
    zero_operator,
)
from vmfb.cocoercive_duality import (
    admissible_scalar_metric,
    assemble_product_metric_matrix,
    composite_min_problem,
)
from vmfb.oracles import reference_pd_fixed_metric
from vmfb.strong_duality import (
    DualBlock,
    StronglyMonotoneProblem,
    primal_recovery,
    product_dual_problem,
    strongly_convex_problem,
)
from conftest import random_diag_metric, random_metric, random_spd


def report(num, ok, desc):
    line = f"[{'PASS' if ok else 'FAIL'}] acceptance {num}: {desc}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. resolvent-calculus identity suite
# ---------------------------------------------------------------------------

def test_criterion_1_resolvent_identity_suite():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        dim = int(rng.integers(2, 21))
        gamma = float(rng.uniform(0.1, 10.0))
        family = trial % 5
        if family == 0:
            A = subdifferential(Quadratic(random_spd(rng, dim),
                                          rng.normal(size=dim)))
            U = random_metric(rng, dim)
        elif family == 1:
            P = random_spd(rng, dim)
            S = rng.normal(size=(dim, dim)) * 0.3
            A = linear_monotone(P + (S - S.T), rng.normal(size=dim))
            U = random_metric(rng, dim)
        elif family == 2:
            A = normal_cone(HalfSpace(rng.normal(size=dim), rng.normal()))
            U = random_metric(rng, dim)
        elif family == 3:
            A = subdifferential(L1Norm(dim, float(rng.uniform(0.2, 1.5))))
            U = random_diag_metric(rng, dim)
        else:
            bound = rng.uniform(0.5, 1.5, size=dim)
            A = normal_cone(Box(-bound, bound))
            U = random_diag_metric(rng, dim)
        x = rng.normal(size=dim) * 2.0

        p_direct = resolvent_metric(A, gamma, U, x)
        S_half = U.sqrt()
        conj = A.conjugated_by_sqrt(S_half)
        p_conj = S_half.apply(conj.resolvent(gamma, Metric.identity(dim),
                                             S_half.solve(x)))
        p_inv = resolvent_inverse_identity(A, gamma, U, x)
        worst = max(worst,
                    float(np.max(np.abs(p_direct - p_conj))),
                    float(np.max(np.abs(p_direct - p_inv))),
                    float(np.max(np.abs(p_conj - p_inv))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    report(1, ok, f"three resolvent paths agree on 100 triples "
                  f"(worst {worst:.2e}, {elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. closed-form prox correctness against the oracles
# ---------------------------------------------------------------------------

def test_criterion_2_closed_form_prox_vs_oracles():
    rng = np.random.default_rng(202)
    worst = 0.0

    # half-space projection under random metrics vs the QP oracle
    for _ in range(50):
        dim = int(rng.integers(2, 9))
        U = random_metric(rng, dim)
        H = HalfSpace(rng.normal(size=dim), rng.normal())
        x = rng.normal(size=dim) * 2
        p = project_metric(H, U, x)
        sol = qp_oracle(U.mat, -U.apply(x), [H])
        worst = max(worst, float(np.linalg.norm(p - sol.point)))

    # scalar compositions vs the independent scalar oracle (plus the QP
    # oracle for the half-line case) and local optimality
    for k in range(50):
        dim = int(rng.integers(2, 7))
        U = random_metric(rng, dim)
        u = rng.normal(size=dim)
        phi = [AbsValue(), HalfLine(float(rng.normal())),
               ScalarQuadratic(float(rng.uniform(0.5, 2.0)),
                               float(rng.normal()))][k % 3]
        f = ScalarComposition(phi, u)
        gamma = float(rng.uniform(0.3, 2.0))
        x = rng.normal(size=dim) * 2
        p = prox_metric(f, gamma, U, x)
        w = float(u @ U.solve(u))
        t = float(x @ u)
        s_star = scalar_prox_oracle(phi, gamma * w, t)
        p_oracle = x + ((s_star - t) / w) * U.solve(u)
        worst = max(worst, float(np.linalg.norm(p - p_oracle)))
        if isinstance(phi, HalfLine):
            sol = qp_oracle(U.mat, -U.apply(x), [HalfSpace(u, phi.xi)])
            worst = max(worst, float(np.linalg.norm(p - sol.point)))
        base = gamma * f.value(p) + 0.5 * U.norm_of(p - x) ** 2
        for _ in range(10):
            d = rng.normal(size=dim)
            d *= 1e-4 / np.linalg.norm(d)
            assert gamma * f.value(p + d) + 0.5 * U.norm_of(p + d - x) ** 2 \
                >= base - 1e-12

    # quadratic prox as a single dense solve vs the QP oracle
    for _ in range(50):
        dim = int(rng.integers(2, 9))
        U = random_metric(rng, dim)
        Aq = random_spd(rng, dim)
        uvec = rng.normal(size=dim)
        x = rng.normal(size=dim)
        p = prox_quadratic_metric(Aq, uvec, U, x)
        sol = qp_oracle(Aq + U.mat, uvec - U.apply(x))
        worst = max(worst, float(np.linalg.norm(p - sol.point)))

    # assembled least-squares composite vs the QP oracle
    for _ in range(50):
        dim = int(rng.integers(2, 7))
        U = random_metric(rng, dim)
        terms = [(float(rng.uniform(0.2, 2.0)),
                  rng.normal(size=(int(rng.integers(1, 5)), dim)),
                  None) for _ in range(2)]
        terms = [(w, L, rng.normal(size=L.shape[0])) for w, L, _ in terms]
        f = vmfb.least_squares(terms)
        x = rng.normal(size=dim)
        p = prox_metric(f, 1.0, U, x)
        sol = qp_oracle(f.A + U.mat, f.u - U.apply(x))
        worst = max(worst, float(np.linalg.norm(p - sol.point)))
        grad = f.A @ p + f.u + U.apply(p - x)
        worst = max(worst, float(np.linalg.norm(grad)))

    report(2, worst <= 1e-8,
           f"prox catalog matches oracles on 4x50 instances (worst {worst:.2e})")


# ---------------------------------------------------------------------------
# 3. cocoercive composition constants
# ---------------------------------------------------------------------------

def test_criterion_3_cocoercive_composition_sampling():
    rng = np.random.default_rng(303)
    violations = 0
    for inst in range(20):
        dim = int(rng.integers(3, 7))
        nterms = int(rng.integers(1, 4))
        terms = []
        nonlinear = inst % 2 == 1
        for _ in range(nterms):
            gdim = int(rng.integers(2, 6))
            L = LinearMap(rng.normal(size=(gdim, dim)))
            if nonlinear and rng.random() < 0.5:
                bound = rng.uniform(0.3, 1.0, size=gdim)
                lo, hi = -bound, bound
                T = CocoerciveOperator(
                    gdim, 1.0,
                    lambda t, lo=lo, hi=hi: np.clip(t, lo, hi))
            else:
                T = CocoerciveOperator.gradient_of_quadratic(
                    random_spd(rng, gdim, 0.2, 2.0))
            terms.append((L, T))
        comp = vmfb.cocoercive_sum(terms)
        beta = comp.beta
        xs = rng.normal(size=(10_000, dim)) * 2
        ys = rng.normal(size=(10_000, dim)) * 2
        for x, y in zip(xs, ys):
            d = comp(x) - comp(y)
            if float(np.dot(x - y, d)) < beta * float(np.dot(d, d)) - 1e-9:
                violations += 1
    report(3, violations == 0,
           f"composition constant held on 20x10^4 sampled pairs "
           f"({violations} violations)")


# ---------------------------------------------------------------------------
# 4./5. variable-metric convergence and inexactness tolerance
# ---------------------------------------------------------------------------

def _theorem_fixtures():
    """Ten fixtures: 4 projections, 3 lasso dim 10, 3 VIs dim 5."""
    rng = np.random.default_rng(404)
    fixtures = []

    proj_specs = [
        ("halfspace-2", HalfSpace([1.0, 1.0], 1.0), 2, False),
        ("halfspace-5", HalfSpace(rng.normal(size=5), 0.4), 5, False),
        ("box-3", Box(-np.ones(3) * 0.5, np.ones(3) * 0.5), 3, True),
        ("affine-4", AffineSubspace(rng.normal(size=(2, 4)),
                                    rng.normal(size=2) * 0.3), 4, False),
    ]
    for name, cset, dim, need_diag in proj_specs:
        c = rng.normal(size=dim) * 2
        B = CocoerciveOperator.translation(c)
        A = normal_cone(cset)
        base = (random_diag_metric(rng, dim, 0.9, 1.3) if need_diag
                else random_metric(rng, dim, 0.9, 1.3))
        ms = perturbed_schedule(base, 0.5, 0.3, seed=hash(name) % 1000)
        oracle = qp_oracle(np.eye(dim), -c, [cset]).point
        fixtures.append((name, FBProblem(A, B), ms, oracle, 1e-10))

    for k in range(3):
        M = rng.normal(size=(10, 10)) * 0.5 + np.eye(10)
        b = rng.normal(size=10)
        f = L1Norm(10, 0.1)
        B = CocoerciveOperator.least_squares_gradient(M, b)
        A = subdifferential(f)
        ms = perturbed_schedule(random_diag_metric(rng, 10, 0.9, 1.2),
                                0.5, 0.3, seed=500 + k)
        oracle = reference_fb(A, B, B.beta, np.zeros(10), 1_000_000,
                              target=1e-12).point
        fixtures.append((f"lasso-{k}", FBProblem(A, B), ms, oracle, 1e-9))

    for k in range(3):
        P = random_spd(rng, 5, 0.8, 2.0)
        S = rng.normal(size=(5, 5))
        B = CocoerciveOperator.affine_monotone(P + (S - S.T),
                                               rng.normal(size=5))
        box = Box(-np.ones(5), np.ones(5))
        A = subdifferential(Indicator(box))
        ms = perturbed_schedule(random_diag_metric(rng, 5, 0.9, 1.2),
                                0.5, 0.3, seed=600 + k)
        oracle = reference_fb(A, B, B.beta, np.zeros(5), 1_000_000,
                              target=1e-12).point
        fixtures.append((f"vi-{k}", FBProblem(A, B), ms, oracle, 1e-9))
    return fixtures


FIXTURES_41 = _theorem_fixtures()


def test_criterion_4_variable_metric_convergence():
    ok = True
    details = []
    for name, prob, ms, oracle, tol in FIXTURES_41:
        ss = auto_steps(prob.B.beta, ms.mu_bound)
        x, trace = fb_solve(prob, ms, ss, x0=np.zeros(prob.dim),
                            stop=StoppingRule(tol, 100_000), z_ref=oracle)
        dist = float(np.linalg.norm(x - oracle))
        fej = fejer_diagnostic(trace, oracle, ms)
        drift = b_drift_diagnostic(trace, oracle, prob.B)
        tail = np.array(trace.residual)[len(trace.residual) // 2:]
        tail_monotone = bool(np.all(np.diff(tail) <= 1e-12)) if tail.size > 1 else True
        good = (trace.terminated_reason == "converged"
                and trace.final_residual <= 1e-8
                and dist <= 1e-6
                and fej.max_violation <= 1e-9
                and drift.last_quarter_share < 0.01
                and tail_monotone)
        ok = ok and good
        details.append(f"{name}:{'ok' if good else 'BAD'}")
    report(4, ok, "theorem-4.1 suite on 10 fixtures "
                  f"({', '.join(details)})")


def test_criterion_5_inexactness_tolerance():
    ok = True
    details = []
    for idx, (name, prob, ms, oracle, tol) in enumerate(FIXTURES_41):
        ss = auto_steps(prob.B.beta, ms.mu_bound)
        es = geometric_errors(prob.dim, total_a=1.0, total_b=1.0, rate=0.5,
                              seed=900 + idx)
        x, trace = fb_solve(prob, ms, ss, es=es, x0=np.zeros(prob.dim),
                            stop=StoppingRule(tol, 100_000), z_ref=oracle)
        dist = float(np.linalg.norm(x - oracle))
        fej = fejer_diagnostic(trace, oracle, ms, es)
        good = dist <= 1e-5 and fej.max_violation <= 1e-9
        ok = ok and good
        details.append(f"{name}:{'ok' if good else 'BAD'}")
    report(5, ok, "unit-budget error schedules still converge "
                  f"({', '.join(details)})")


# ---------------------------------------------------------------------------
# 6. strongly monotone duality
# ---------------------------------------------------------------------------

def _strong_fixture_suite():
    rng = np.random.default_rng(606)
    suite = []

    # (a) box f, box dual block -> QP oracle
    n = 5
    z = rng.normal(size=n)
    f = Indicator(Box(np.zeros(n), np.ones(n)))
    L = rng.normal(size=(2, n)) * 0.6
    r = rng.normal(size=2) * 0.1
    blocks = [(Indicator(Box(-0.4 * np.ones(2), 0.4 * np.ones(2))), None, L, r)]
    cons = [Box(np.zeros(n), np.ones(n))]
    for i in range(2):
        cons.append((L[i], 0.4 + r[i]))
        cons.append((-L[i], 0.4 - r[i]))
    suite.append(("box-box", z, f, blocks,
                  qp_oracle(np.eye(n), -z, cons).point,
                  [scalar_schedule(0.8, 2)]))

    # (b) half-line dual block in R^1
    n = 4
    z = rng.normal(size=n)
    f = Indicator(Box(-np.ones(n), np.ones(n)))
    Lrow = rng.normal(size=(1, n))
    xi = 0.3
    blocks = [(Indicator(Box(np.array([-np.inf]), np.array([xi]))), None,
               Lrow, np.zeros(1))]
    cons = [Box(-np.ones(n), np.ones(n)), (Lrow[0], xi)]
    suite.append(("halfline", z, f, blocks,
                  qp_oracle(np.eye(n), -z, cons).point,
                  [increasing_schedule(Metric.from_diagonal([0.9]), 0.5, 0.2,
                                       seed=2)]))

    # (c) quadratic smoothing -> smoothed-gradient oracle
    n, m = 4, 3
    z = rng.normal(size=n)
    nu = 2.0
    L = rng.normal(size=(m, n)) * 0.5
    r = rng.normal(size=m) * 0.2
    D = Box(-0.3 * np.ones(m), 0.3 * np.ones(m))
    blocks = [(Indicator(D), nu, L, r)]

    def grad(t):
        y = L @ t - r
        return (t - z) + nu * (L.T @ (y - np.clip(y, D.lower, D.upper)))
    beta_s = 1.0 / (1.0 + nu * np.linalg.norm(L, 2) ** 2)
    oracle = reference_fb(zero_operator(n),
                          CocoerciveOperator(n, beta_s, grad), beta_s, z,
                          500_000, target=1e-11).point
    suite.append(("smoothed", z, Zero(n), blocks, oracle,
                  [scalar_schedule(0.5, m)]))

    # (d) equality block: saddle linear system
    n, m = 4, 2
    z = rng.normal(size=n)
    L = rng.normal(size=(m, n))
    r = rng.normal(size=m) * 0.3
    blocks = [(Indicator(Singleton(r)), None, L, np.zeros(m))]
    KKT = np.block([[np.eye(n), L.T], [L, np.zeros((m, m))]])
    xstar = np.linalg.solve(KKT, np.concatenate([z, r]))[:n]
    suite.append(("equality", z, Zero(n), blocks, xstar,
                  [scalar_schedule(0.4, m)]))

    # (e) quadratic f with a box block
    n = 4
    z = rng.normal(size=n)
    Aq = random_spd(rng, n, 0.3, 1.5)
    uq = rng.normal(size=n)
    f = Quadratic(Aq, uq)
    L = rng.normal(size=(2, n)) * 0.5
    blocks = [(Indicator(Box(-0.3 * np.ones(2), 0.3 * np.ones(2))), None, L,
               np.zeros(2))]
    cons = []
    for i in range(2):
        cons.append((L[i], 0.3))
        cons.append((-L[i], 0.3))
    oracle = qp_oracle(np.eye(n) + Aq, uq - z, cons).point
    suite.append(("quad-f", z, f, blocks, oracle, [scalar_schedule(0.7, 2)]))
    return suite


def test_criterion_6_strong_duality_suite():
    ok = True
    details = []
    for name, z, f, blocks, oracle, dual_ms in _strong_fixture_suite():
        x, v, trace = solve_strongly_convex_min(
            z, f, blocks, dual_ms, stop=StoppingRule(1e-11, 400_000))
        p = strongly_convex_problem(z, f, blocks)
        dist = float(np.linalg.norm(x - oracle))
        recovery = float(np.linalg.norm(x - primal_recovery(p, v)))

        # independent product-space path over a fixed iteration budget
        from vmfb import beta_dual
        ss = auto_steps(beta_dual(p), max(m.mu_bound for m in dual_ms))
        x_a, v_a, tr_a = solve_strong_duality(p, dual_ms, ss=ss,
                                              stop=StoppingRule(0.0, 150))
        prod = product_dual_problem(p)
        gdim = sum(bl.gdim for bl in p.blocks)
        _, tr_b = fb_solve(prod, block_schedule(dual_ms), ss,
                           x0=np.zeros(gdim), stop=StoppingRule(0.0, 150))
        dual_gap = max(float(np.max(np.abs(tr_a.duals[k] - tr_b.x[k])))
                       for k in range(len(tr_a.duals)))

        good = dist <= 1e-6 and recovery <= 1e-8 and dual_gap <= 1e-12
        ok = ok and good
        details.append(f"{name}:{'ok' if good else 'BAD'}")
    report(6, ok, f"strongly monotone duality suite ({', '.join(details)})")


# ---------------------------------------------------------------------------
# 7. best approximation
# ---------------------------------------------------------------------------

def test_criterion_7_best_approximation():
    rng = np.random.default_rng(707)
    ok = True
    details = []
    cases = []

    z = np.array([1.5, -1.0])
    C = HalfSpace([1.0, 0.5], 0.6)
    L = rng.normal(size=(3, 2)) * 0.6
    r = rng.normal(size=3) * 0.1
    D = Box(-0.4 * np.ones(3), 0.4 * np.ones(3))
    cases.append(("halfspace-box", z, C, [(D, L, r)]))

    z = rng.normal(size=6) * 1.5
    C = Box(-np.ones(6) * 0.8, np.ones(6) * 0.8)
    L = rng.normal(size=(2, 6)) * 0.4
    r = rng.normal(size=2) * 0.05
    D = Box(-0.25 * np.ones(2), 0.25 * np.ones(2))
    cases.append(("box-box-6", z, C, [(D, L, r)]))

    for name, z, C, blocks in cases:
        coupling = sum(np.linalg.norm(L, 2) ** 2 for _, L, _ in blocks)
        sigma = 1.5 / coupling  # enforce the step-norm condition
        dual_ms = [scalar_schedule(sigma, L.shape[0]) for _, L, _ in blocks]
        assert max(m.mu_bound for m in dual_ms) * coupling < 2.0
        x, trace = solve_best_approximation(z, C, blocks, dual_ms,
                                            stop=StoppingRule(1e-11, 400_000))
        cons = [C]
        for D, L, r in blocks:
            for i in range(L.shape[0]):
                cons.append((L[i], D.upper[i] + r[i]))
                cons.append((-L[i], D.upper[i] - r[i]))
        sol = qp_oracle(np.eye(z.size), -z, cons)
        dist = float(np.linalg.norm(x - sol.point))
        good = dist <= 1e-6 and trace.terminated_reason == "converged"
        ok = ok and good
        details.append(f"{name}:{'ok' if good else 'BAD'} ({dist:.1e})")
    report(7, ok, f"best approximation vs QP oracle ({', '.join(details)})")


# ---------------------------------------------------------------------------
# 8. unit-step primal-dual scaling and convergence
# ---------------------------------------------------------------------------

def _coco_fixture_suite():
    rng = np.random.default_rng(808)
    suite = []

    def lasso(n, m, rows, seed):
        M = rng.normal(size=(rows, n)) * 0.5
        b = rng.normal(size=rows)
        grad_h = CocoerciveOperator.least_squares_gradient(M, b)
        f = L1Norm(n, 0.15)
        L = rng.normal(size=(m, n)) * 0.4
        g = Indicator(Box(-0.5 * np.ones(m), 0.5 * np.ones(m)))
        return composite_min_problem(np.zeros(n), f, grad_h,
                                     [(g, None, L, np.zeros(m))])

    suite.append(("lasso-4", lasso(4, 2, 6, 1)))
    suite.append(("lasso-6", lasso(6, 3, 8, 2)))

    # box f with quadratic h and two blocks
    n = 4
    Q = random_spd(rng, n, 0.4, 1.4)
    grad_h = CocoerciveOperator.gradient_of_quadratic(Q, rng.normal(size=n))
    f = Indicator(Box(-np.ones(n), np.ones(n)))
    blocks = [(Indicator(Box(-0.4 * np.ones(2), 0.4 * np.ones(2))), None,
               rng.normal(size=(2, n)) * 0.4, np.zeros(2)),
              (Indicator(Ball(np.zeros(2), 0.6)), None,
               rng.normal(size=(2, n)) * 0.3, rng.normal(size=2) * 0.05)]
    suite.append(("two-blocks", composite_min_problem(
        rng.normal(size=n), f, grad_h, blocks)))

    # smoothed block
    n, m = 3, 2
    Q = random_spd(rng, n, 0.5, 1.5)
    grad_h = CocoerciveOperator.gradient_of_quadratic(Q)
    blocks = [(Indicator(Box(-0.3 * np.ones(m), 0.3 * np.ones(m))), 1.5,
               rng.normal(size=(m, n)) * 0.5, np.zeros(m))]
    suite.append(("smoothed", composite_min_problem(
        rng.normal(size=n), Zero(n), grad_h, blocks)))

    # no blocks
    suite.append(("no-blocks", composite_min_problem(
        rng.normal(size=3), Zero(3),
        CocoerciveOperator.gradient_of_quadratic(np.eye(3)), [])))
    return suite


def test_criterion_8_unit_step_primal_dual():
    # scalar-metric closed form of the contraction quantity
    rng = np.random.default_rng(809)
    closed_form_worst = 0.0
    for _ in range(20):
        tau, sigma = rng.uniform(0.1, 1.0, size=2)
        L = LinearMap(rng.normal(size=(int(rng.integers(1, 5)),
                                       int(rng.integers(2, 5)))))
        rep = validate_corollary62(
            scalar_schedule(tau, L.shape[1]), [scalar_schedule(sigma, L.shape[0])],
            [L], beta=100.0, epsilon=0.5, n_check=2)
        hand = 1.0 / (math.sqrt(sigma * tau) * L.norm) - 1.0
        closed_form_worst = max(closed_form_worst,
                                abs(rep.extras["delta"][0] - hand))

    ok = closed_form_worst <= 1e-12
    details = [f"delta-closed-form:{closed_form_worst:.1e}"]

    for name, p in _coco_fixture_suite():
        t = admissible_scalar_metric(p)
        ms_p = increasing_schedule(Metric.from_diagonal(np.full(p.dim, t)),
                                   0.5, 0.3 * t, seed=11)
        ms_d = [increasing_schedule(
            Metric.from_diagonal(np.full(bl.gdim, t)), 0.5, 0.3 * t, seed=12)
            for bl in p.blocks]
        eps = 0.9 * min(1.0, p.beta)
        x, v, trace = solve_cocoercive_pd(p, ms_p, ms_d, epsilon=eps,
                                          stop=StoppingRule(1e-8, 400_000),
                                          n_check=60)
        res = kkt_residual(p, x, v)

        rep = validate_corollary62(ms_p, ms_d, [bl.L for bl in p.blocks],
                                   p.beta, eps, n_check=5)
        spd_ok = rep.passed
        sampler = np.random.default_rng(810)
        for n_idx in (0, 2):
            V = assemble_product_metric_matrix(
                p, ms_p.metric(n_idx), [m.metric(n_idx) for m in ms_d])
            zeta = rep.extras["zeta"][n_idx]
            for _ in range(1000):
                w = sampler.normal(size=V.shape[0])
                if float(w @ V @ w) < zeta * float(w @ w) - 1e-10:
                    spd_ok = False
                    break
        good = res <= 1e-7 and spd_ok
        ok = ok and good
        details.append(f"{name}:{'ok' if good else 'BAD'} (kkt {res:.1e})")
    report(8, ok, f"unit-step primal-dual suite ({', '.join(details)})")


# ---------------------------------------------------------------------------
# 9. fixed-metric regressions
# ---------------------------------------------------------------------------

def test_criterion_9_fixed_metric_regressions():
    rng = np.random.default_rng(909)

    # (a) identity metrics against the classical loop, 1000 iterations
    M = rng.normal(size=(10, 10)) * 0.4 + np.eye(10)
    b = rng.normal(size=10)
    A = subdifferential(L1Norm(10, 0.1))
    B = CocoerciveOperator.least_squares_gradient(M, b)
    gamma = B.beta
    ss = constant_steps(min(1.0, B.beta) * 0.9, gamma, 1.0)
    _, trace = fb_solve(FBProblem(A, B), constant_schedule(Metric.identity(10)),
                        ss, x0=np.zeros(10), stop=StoppingRule(0.0, 1000))
    ident = Metric.identity(10)
    x = np.zeros(10)
    worst_a = 0.0
    for n in range(1001):
        worst_a = max(worst_a, float(np.max(np.abs(trace.x[n] - x))))
        if n < 1000:
            x = A.resolvent(gamma, ident, x - gamma * B(x))

    # (b) scalar metrics against the hand-coded fixed-metric variant
    p = _coco_fixture_suite()[0][1]
    t = admissible_scalar_metric(p)
    lam = 0.9
    _, _, tr = solve_cocoercive_pd(p, scalar_schedule(t, p.dim),
                                   [scalar_schedule(t, bl.gdim)
                                    for bl in p.blocks], lam=lam,
                                   stop=StoppingRule(0.0, 1000), n_check=20)
    xs, vs = reference_pd_fixed_metric(p, t, [t] * len(p.blocks), lam, 1000)
    worst_b = 0.0
    for k in range(len(xs)):
        worst_b = max(worst_b, float(np.max(np.abs(tr.x[k] - xs[k]))))
        worst_b = max(worst_b, float(np.max(np.abs(tr.duals[k] - vs[k]))))

    ok = worst_a <= 1e-12 and worst_b <= 1e-12
    report(9, ok, f"fixed-metric regressions (classical {worst_a:.1e}, "
                  f"primal-dual {worst_b:.1e})")


# ---------------------------------------------------------------------------
# 10. negative controls
# ---------------------------------------------------------------------------

def test_criterion_10_negative_controls(tmp_path):
    from vmfb.cli import EXIT_VALIDATION, main

    # (a) tangent disk/half-plane intersection with an off-axis target:
    # no primal solution exists; the solver must not report convergence
    disk = Ball(np.array([1.0, 0.0]), 1.0)
    halfplane = Box(np.array([-np.inf, -np.inf]), np.array([0.0, np.inf]))
    p = StronglyMonotoneProblem(
        np.array([0.7, 1.3]), 1.0, normal_cone(disk),
        [DualBlock(LinearMap(np.eye(2)), normal_cone(halfplane),
                   CocoerciveOperator.zero(2), np.zeros(2))])
    x, v, trace = solve_strong_duality(p, [scalar_schedule(0.4, 2)],
                                       stop=StoppingRule(1e-8, 20_000))
    infeasible_ok = (trace.terminated_reason == "max_iter"
                     and trace.final_residual > 1e-8)

    # (b) out-of-range step refused with exit code 2 and no trace
    code = main(["run", "--config", "gamma_out_of_range.cfg",
                 "--out-dir", str(tmp_path / "gamma")])
    gate_ok = code == EXIT_VALIDATION and not (
        tmp_path / "gamma" / "gamma_out_of_range_trace.csv").exists()

    # (c) infeasible metric scaling reported as such
    rep = validate_corollary62(scalar_schedule(1.0, 2),
                               [scalar_schedule(1.0, 2)],
                               [LinearMap(2.0 * np.eye(2))],
                               beta=10.0, epsilon=0.5, n_check=2)
    delta_check = next(c for c in rep.checks if c.name == "delta-positive")
    scaling_ok = (not delta_check.passed
                  and "too large for the coupling" in delta_check.detail)
    code = main(["run", "--config", "infeasible_scaling.cfg",
                 "--out-dir", str(tmp_path / "scaling")])
    scaling_ok = scaling_ok and code == EXIT_VALIDATION

    ok = infeasible_ok and gate_ok and scaling_ok
    report(10, ok, "negative controls "
                   f"(infeasible fixture:{'ok' if infeasible_ok else 'BAD'}, "
                   f"strict gate:{'ok' if gate_ok else 'BAD'}, "
                   f"scaling:{'ok' if scaling_ok else 'BAD'})")
