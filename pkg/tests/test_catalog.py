import numpy as np
import pytest

from vmfb import (
    AbsValue,
    AffineSubspace,
    Ball,
    Box,
    CatalogError,
    EuclideanNorm,
    HalfLine,
    HalfSpace,
    Indicator,
    L1Norm,
    Metric,
    Quadratic,
    ScalarComposition,
    ScalarQuadratic,
    Singleton,
    Support,
    Zero,
    least_squares,
    project_metric,
    prox_metric,
    prox_metric_via_conjugate,
    prox_quadratic_metric,
    support_prox_metric,
)
from vmfb.oracles import qp_oracle, scalar_prox_oracle
from conftest import random_diag_metric, random_metric


class TestProjections:
    def test_point_inside_is_fixed(self, rng):
        box = Box(np.zeros(3), np.ones(3))
        U = random_diag_metric(rng, 3)
        x = np.array([0.2, 0.8, 0.5])
        assert np.allclose(project_metric(box, U, x), x)

    def test_halfspace_euclidean(self):
        H = HalfSpace([1.0, 0.0], 1.0)
        p = project_metric(H, Metric.identity(2), [3.0, 2.0])
        assert np.allclose(p, [1.0, 2.0])

    def test_halfspace_metric_frozen_example(self):
        # U=diag(2,1), u=(1,1), offset 1, x=(2,2) -> (1,0)
        H = HalfSpace([1.0, 1.0], 1.0)
        U = Metric(np.diag([2.0, 1.0]))
        p = project_metric(H, U, [2.0, 2.0])
        assert np.allclose(p, [1.0, 0.0], atol=1e-12)
        # agrees with the constrained-QP oracle on the same instance
        sol = qp_oracle(U.mat, -U.apply([2.0, 2.0]), [H])
        assert np.allclose(p, sol.point, atol=1e-9)

    def test_box_componentwise_under_diagonal(self):
        box = Box(np.zeros(2), np.ones(2))
        U = Metric(np.diag([1.0, 5.0]))
        assert np.allclose(project_metric(box, U, [2.0, -1.0]), [1.0, 0.0])

    def test_box_rejects_dense_metric(self, rng):
        with pytest.raises(CatalogError):
            project_metric(Box(np.zeros(2), np.ones(2)), random_metric(rng, 2),
                           [2.0, 2.0])

    def test_affine_projection_variational_inequality(self, rng):
        C = AffineSubspace(rng.normal(size=(2, 5)), rng.normal(size=2))
        U = random_metric(rng, 5)
        x = rng.normal(size=5) * 2.0
        p = project_metric(C, U, x)
        assert C.contains(p, tol=1e-9)
        for _ in range(50):
            y = C.sample_point(rng, scale=2.0)
            # <x - p, y - p>_U <= 0 characterizes the metric projection
            assert U.inner(x - p, y - p) <= 1e-9

    def test_ball_projection_metric(self, rng):
        C = Ball(rng.normal(size=4), 0.7)
        U = random_metric(rng, 4)
        x = C.center + rng.normal(size=4) * 3.0
        p = project_metric(C, U, x)
        assert abs(np.linalg.norm(p - C.center) - 0.7) <= 1e-9 or C.contains(x)
        for _ in range(50):
            y = C.sample_point(rng)
            assert U.inner(x - p, y - p) <= 1e-9

    def test_singleton(self, rng):
        C = Singleton([1.0, 2.0])
        assert np.allclose(project_metric(C, random_metric(rng, 2), [9.0, 9.0]),
                           [1.0, 2.0])


class TestProxCatalog:
    def test_zero_function(self, rng):
        U = random_metric(rng, 3)
        x = rng.normal(size=3)
        assert np.allclose(prox_metric(Zero(3), 1.7, U, x), x)

    def test_l1_soft_threshold(self):
        f = L1Norm(2)
        p = prox_metric(f, 1.0, Metric.identity(2), [2.0, 0.5])
        assert np.allclose(p, [1.0, 0.0])

    def test_l1_diagonal_metric_thresholds(self, rng):
        f = L1Norm(4, 0.5)
        U = random_diag_metric(rng, 4)
        x = rng.normal(size=4) * 2
        p = prox_metric(f, 2.0, U, x)
        expected = np.sign(x) * np.maximum(np.abs(x) - 2.0 * 0.5 / U.diagonal, 0.0)
        assert np.allclose(p, expected)

    def test_l1_rejects_dense_metric(self, rng):
        with pytest.raises(CatalogError):
            prox_metric(L1Norm(3), 1.0, random_metric(rng, 3), np.ones(3))

    def test_quadratic_prox_trivia(self, rng):
        U = random_metric(rng, 3)
        x = rng.normal(size=3)
        assert np.allclose(prox_quadratic_metric(np.zeros((3, 3)), np.zeros(3), U, x), x)
        p = prox_quadratic_metric(np.eye(3), np.zeros(3), Metric.identity(3), x)
        assert np.allclose(p, x / 2)

    def test_quadratic_prox_residual(self, rng):
        # stationarity: Aq p + u + U (p - x) = 0 to 1e-10 relative
        from conftest import random_spd
        Aq = random_spd(rng, 5)
        u = rng.normal(size=5)
        U = random_metric(rng, 5)
        x = rng.normal(size=5)
        p = prox_quadratic_metric(Aq, u, U, x)
        resid = Aq @ p + u + U.apply(p - x)
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(x))

    def test_least_squares_assembly(self, rng):
        # gradient of the assembled objective vanishes at the prox point of
        # the unregularized problem with U absorbed
        L1, r1 = rng.normal(size=(4, 3)), rng.normal(size=4)
        L2, r2 = rng.normal(size=(2, 3)), rng.normal(size=2)
        f = least_squares([(1.5, L1, r1), (0.7, L2, r2)])
        U = random_metric(rng, 3)
        x = rng.normal(size=3)
        p = prox_metric(f, 1.0, U, x)
        grad = 1.5 * L1.T @ (L1 @ p - r1) + 0.7 * L2.T @ (L2 @ p - r2) + U.apply(p - x)
        assert np.linalg.norm(grad) <= 1e-10

    def test_scalar_composition_against_grid_oracle(self, rng):
        for phi, wphi in [(AbsValue(), None), (HalfLine(0.3), None),
                          (ScalarQuadratic(2.0, -0.5), None)]:
            u = rng.normal(size=4)
            f = ScalarComposition(phi, u)
            U = random_metric(rng, 4)
            x = rng.normal(size=4)
            gamma = 0.8
            p = prox_metric(f, gamma, U, x)
            w = float(u @ U.solve(u))
            s_oracle = scalar_prox_oracle(phi, gamma * w, float(x @ u))
            expected = x + ((s_oracle - float(x @ u)) / w) * U.solve(u)
            assert np.allclose(p, expected, atol=1e-8)

    def test_halfline_composition_matches_halfspace(self, rng):
        # phi = indicator of (-inf, xi] makes the composition the half-space
        u = rng.normal(size=3)
        xi = 0.4
        U = random_metric(rng, 3)
        x = rng.normal(size=3) * 2
        f = ScalarComposition(HalfLine(xi), u)
        p1 = prox_metric(f, 1.0, U, x)
        p2 = project_metric(HalfSpace(u, xi), U, x)
        assert np.allclose(p1, p2, atol=1e-10)

    def test_support_of_origin_is_identity(self, rng):
        f = Support(Singleton(np.zeros(3)))
        U = random_metric(rng, 3)
        x = rng.normal(size=3)
        assert np.allclose(prox_metric(f, 2.0, U, x), x)

    def test_support_of_box_is_soft_threshold(self):
        f = Support(Box(-np.ones(3), np.ones(3)))
        x = np.array([2.0, -0.5, 1.5])
        p = support_prox_metric(Box(-np.ones(3), np.ones(3)), 1.0,
                                Metric.identity(3), x)
        assert np.allclose(p, np.sign(x) * np.maximum(np.abs(x) - 1.0, 0.0))
        assert np.allclose(prox_metric(f, 1.0, Metric.identity(3), x), p)

    def test_euclidean_norm_prox_1d_oracle(self, rng):
        # under a scaled identity the prox shrinks the radius; check against
        # a fine-grid line search along x
        f = EuclideanNorm(3, 1.2)
        U = Metric.scaled_identity(0.8, 3)
        x = rng.normal(size=3) * 2
        p = prox_metric(f, 0.9, U, x)
        ts = np.linspace(0.0, 1.2, 20001)
        vals = [0.9 * f.value(t * x) + 0.5 * U.norm_of(t * x - x) ** 2 for t in ts]
        t_best = ts[int(np.argmin(vals))]
        assert np.linalg.norm(p - t_best * x) <= 2e-4 * max(1.0, np.linalg.norm(x))

    def test_descriptor_outside_catalog_rejected(self, rng):
        U = Metric.identity(2)
        with pytest.raises(CatalogError):
            prox_metric(object(), 1.0, U, np.zeros(2))
        with pytest.raises(CatalogError):
            project_metric("not-a-set", U, np.zeros(2))

    def test_ball_support_prox_dense_metric_optimality(self, rng):
        # prox of the norm (support of the unit ball) under a dense metric,
        # validated by local optimality around the returned point
        ball = Ball(np.zeros(3), 1.0)
        U = random_metric(rng, 3)
        x = rng.normal(size=3) * 2
        gamma = 0.7
        p = support_prox_metric(ball, gamma, U, x)
        f = EuclideanNorm(3, 1.0)
        assert np.allclose(p, prox_metric(f, gamma, U, x), atol=1e-12)
        base = gamma * f.value(p) + 0.5 * U.norm_of(p - x) ** 2
        for _ in range(200):
            d = rng.normal(size=3)
            d *= 1e-3 * rng.random() / np.linalg.norm(d)
            assert gamma * f.value(p + d) + 0.5 * U.norm_of(p + d - x) ** 2 \
                >= base - 1e-12

    def test_prox_optimality_against_perturbations(self, rng):
        # the prox point beats 200 random nearby points for every catalog f
        dim = 4
        U = random_diag_metric(rng, dim)
        x = rng.normal(size=dim)
        gamma = 1.3
        from conftest import random_spd
        cases = [
            L1Norm(dim, 0.7),
            Indicator(Box(-np.ones(dim), np.ones(dim))),
            Quadratic(random_spd(rng, dim), rng.normal(size=dim)),
            ScalarComposition(AbsValue(), rng.normal(size=dim)),
            EuclideanNorm(dim, 0.5),
        ]
        for f in cases:
            p = prox_metric(f, gamma, U, x)
            base = gamma * f.value(p) + 0.5 * U.norm_of(p - x) ** 2
            for _ in range(200):
                d = rng.normal(size=dim)
                d *= 1e-3 * rng.random() / np.linalg.norm(d)
                val = gamma * f.value(p + d) + 0.5 * U.norm_of(p + d - x) ** 2
                assert val >= base - 1e-12


class TestConjugateIdentities:
    def test_moreau_identity_l1_box(self, rng):
        # the conjugate pair (l1, box indicator) under random diagonal metrics
        f = L1Norm(5, 0.8)
        U = random_diag_metric(rng, 5)
        x = rng.normal(size=5) * 2
        for gamma in (0.3, 1.0, 2.7):
            direct = prox_metric(f, gamma, U, x)
            via_conj = prox_metric_via_conjugate(f, gamma, U, x)
            assert np.allclose(direct, via_conj, atol=1e-9)

    def test_moreau_identity_quadratic(self, rng):
        from conftest import random_spd
        f = Quadratic(random_spd(rng, 4), rng.normal(size=4), 0.3)
        U = random_metric(rng, 4)
        x = rng.normal(size=4)
        direct = prox_metric(f, 1.4, U, x)
        via_conj = prox_metric_via_conjugate(f, 1.4, U, x)
        assert np.allclose(direct, via_conj, atol=1e-9)

    def test_support_indicator_duality(self, rng):
        box = Box(-np.ones(3), 2 * np.ones(3))
        assert isinstance(Indicator(box).conjugate(), Support)
        assert isinstance(Support(box).conjugate(), Indicator)
        f = EuclideanNorm(3, 2.0)
        fc = f.conjugate()
        assert isinstance(fc, Indicator) and isinstance(fc.set, Ball)
        assert fc.set.radius == pytest.approx(2.0)

    def test_quadratic_conjugate_value(self, rng):
        from conftest import random_spd
        f = Quadratic(random_spd(rng, 3), rng.normal(size=3), -0.2)
        fstar = f.conjugate()
        v = rng.normal(size=3)
        # f*(v) = sup_x <x,v> - f(x), attained at the stationary point
        xstar = np.linalg.solve(f.A, v - f.u)
        assert fstar.value(v) == pytest.approx(
            float(xstar @ v) - f.value(xstar), abs=1e-9)
