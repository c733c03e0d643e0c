"""Closed-form catalog of convex sets, prox-friendly functions, and their
metric projections and proximity operators.

Every prox here is closed form.  The normative definition used throughout is

    prox(f, gamma, U, x) = argmin_y  gamma * f(y) + 0.5 * ||y - x||_U^2,

so the scale ``gamma`` is folded into the function rather than carried as a
separate metric factor.  Separable functions (box indicators, weighted l1)
are only supported against diagonal metrics; for a dense metric the
conjugation-by-square-root identity applies only when the composed function
stays in the catalog, and construction fails otherwise rather than falling
back to a silent inner loop.

All descriptors are immutable and their evaluations pure.
"""

import numpy as np

from .metric import Metric, DimensionMismatch, as_vector

__all__ = [
    "CatalogError",
    "ConvexSet",
    "HalfSpace",
    "Box",
    "AffineSubspace",
    "Ball",
    "Singleton",
    "ProxFunction",
    "Zero",
    "Indicator",
    "Support",
    "L1Norm",
    "EuclideanNorm",
    "Quadratic",
    "ScalarComposition",
    "AbsValue",
    "HalfLine",
    "ScalarQuadratic",
    "least_squares",
    "prox_metric",
    "prox_metric_via_conjugate",
    "prox_quadratic_metric",
    "project_metric",
    "support_prox_metric",
    "moreau_envelope_value",
    "infimal_with_quadratic",
]


class CatalogError(ValueError):
    """Requested operation has no closed form in the catalog."""


def _check_dim(x, dim, name="x"):
    return as_vector(x, dim, name=name)


# ---------------------------------------------------------------------------
# Convex sets
# ---------------------------------------------------------------------------

class ConvexSet:
    """Descriptor of a nonempty closed convex set with metric projections."""

    dim = None

    def contains(self, x, tol=1e-9):
        raise NotImplementedError

    def project(self, U, x):
        """Projection onto the set in the norm induced by ``U``."""
        raise NotImplementedError

    def support(self, x):
        """Support function value; raises ``CatalogError`` when unbounded."""
        raise CatalogError(f"support function of {type(self).__name__} not available")

    def linear_image(self, S):
        """Image of the set under an SPD map ``S`` when it stays in catalog."""
        raise CatalogError(f"linear image of {type(self).__name__} not in catalog")

    def preimage_sqrt(self, S):
        """Descriptor of ``{x : S x in C}`` for SPD ``S`` when in catalog."""
        raise CatalogError(f"preimage of {type(self).__name__} not in catalog")

    def sample_point(self, rng, scale=1.0):
        """A point of the set, for sampling-based checks."""
        raise NotImplementedError


class HalfSpace(ConvexSet):
    """Half-space ``{x : <x, u> <= offset}`` with nonzero normal ``u``."""

    def __init__(self, normal, offset):
        self.normal = as_vector(normal, name="normal")
        if not np.any(self.normal):
            raise ValueError("half-space normal must be nonzero")
        self.offset = float(offset)
        self.dim = self.normal.size

    def contains(self, x, tol=1e-9):
        x = _check_dim(x, self.dim)
        return float(np.dot(x, self.normal)) <= self.offset + tol

    def project(self, U, x):
        x = _check_dim(x, self.dim)
        s = float(np.dot(x, self.normal))
        if s <= self.offset:
            return x.copy()
        uinv_n = U.solve(self.normal)
        denom = float(np.dot(self.normal, uinv_n))
        return x + ((self.offset - s) / denom) * uinv_n

    def preimage_sqrt(self, S):
        return HalfSpace(S.apply(self.normal), self.offset)

    def sample_point(self, rng, scale=1.0):
        y = rng.normal(size=self.dim) * scale
        return self.project(Metric.identity(self.dim), y)


class Box(ConvexSet):
    """Axis-aligned box ``[lower, upper]``; entries may be infinite."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DimensionMismatch("box bounds must be 1-D arrays of equal length")
        if np.any(self.lower > self.upper):
            raise ValueError("box has empty interior (lower > upper)")
        self.dim = self.lower.size

    def contains(self, x, tol=1e-9):
        x = _check_dim(x, self.dim)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, U, x):
        x = _check_dim(x, self.dim)
        if not U.is_diagonal:
            raise CatalogError(
                "box projection under a non-diagonal metric is not separable; "
                "no closed form in catalog"
            )
        return np.clip(x, self.lower, self.upper)

    def support(self, x):
        x = _check_dim(x, self.dim)
        with np.errstate(invalid="ignore"):
            vals = np.where(x > 0, self.upper * x, np.where(x < 0, self.lower * x, 0.0))
        return float(np.sum(vals))

    def linear_image(self, S):
        if not S.is_diagonal:
            raise CatalogError("box image under a dense map is not a box")
        d = S.diagonal
        return Box(self.lower * d, self.upper * d)

    def preimage_sqrt(self, S):
        if not S.is_diagonal:
            raise CatalogError("box preimage under a dense map is not a box")
        d = S.diagonal
        return Box(self.lower / d, self.upper / d)

    def sample_point(self, rng, scale=1.0):
        lo = np.where(np.isfinite(self.lower), self.lower, -scale)
        hi = np.where(np.isfinite(self.upper), self.upper, scale)
        return lo + rng.random(self.dim) * (hi - lo)


class AffineSubspace(ConvexSet):
    """Affine subspace ``{x : C x = d}`` for a full-row-rank ``C``."""

    def __init__(self, C, d):
        self.C = np.asarray(C, dtype=float)
        if self.C.ndim != 2:
            raise DimensionMismatch("constraint matrix must be 2-D")
        self.d = as_vector(d, self.C.shape[0], name="d")
        self.dim = self.C.shape[1]
        if np.linalg.matrix_rank(self.C) < self.C.shape[0]:
            raise ValueError("constraint matrix must have full row rank")

    def contains(self, x, tol=1e-9):
        x = _check_dim(x, self.dim)
        return float(np.linalg.norm(self.C @ x - self.d)) <= tol

    def project(self, U, x):
        x = _check_dim(x, self.dim)
        Uinv_Ct = np.column_stack([U.solve(row) for row in self.C])
        gram = self.C @ Uinv_Ct
        lam = np.linalg.solve(gram, self.C @ x - self.d)
        return x - Uinv_Ct @ lam

    def preimage_sqrt(self, S):
        return AffineSubspace(self.C @ S.mat, self.d)

    def sample_point(self, rng, scale=1.0):
        y = rng.normal(size=self.dim) * scale
        return self.project(Metric.identity(self.dim), y)


class Ball(ConvexSet):
    """Euclidean ball ``{x : ||x - center|| <= radius}``."""

    def __init__(self, center, radius):
        self.center = as_vector(center, name="center")
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        self.dim = self.center.size

    def contains(self, x, tol=1e-9):
        x = _check_dim(x, self.dim)
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def project(self, U, x):
        x = _check_dim(x, self.dim)
        w = x - self.center
        dist = float(np.linalg.norm(w))
        if dist <= self.radius:
            return x.copy()
        if self.radius == 0.0:
            return self.center.copy()
        evals = U.eigenvalues
        if U.is_diagonal:
            wt = w
        else:
            wt = U._evecs.T @ w
        # p = center + (U + lam I)^{-1} U w with lam solving ||.|| = radius;
        # the residual norm is strictly decreasing in lam, so bisection with
        # a Newton polish reaches machine precision.
        coef = evals * wt

        def resid2(lam):
            return float(np.sum((coef / (evals + lam)) ** 2))

        target = self.radius ** 2
        lo, hi = 0.0, float(np.max(evals)) * dist / self.radius
        while resid2(hi) > target:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if resid2(mid) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        lam = 0.5 * (lo + hi)
        scaled = coef / (evals + lam)
        if U.is_diagonal:
            p = self.center + scaled
        else:
            p = self.center + U._evecs @ scaled
        return p

    def support(self, x):
        x = _check_dim(x, self.dim)
        return float(np.dot(self.center, x)) + self.radius * float(np.linalg.norm(x))

    def linear_image(self, S):
        d = S.diagonal
        if d is None or not np.allclose(d, d[0], rtol=0, atol=0):
            raise CatalogError("ball image is a ball only under scaled identities")
        s = float(d[0])
        return Ball(self.center * s, self.radius * s)

    def preimage_sqrt(self, S):
        d = S.diagonal
        if d is None or not np.allclose(d, d[0], rtol=0, atol=0):
            raise CatalogError("ball preimage is a ball only under scaled identities")
        s = float(d[0])
        return Ball(self.center / s, self.radius / s)

    def sample_point(self, rng, scale=1.0):
        y = rng.normal(size=self.dim)
        y *= rng.random() ** (1.0 / self.dim) / max(np.linalg.norm(y), 1e-300)
        return self.center + self.radius * y


class Singleton(ConvexSet):
    """One-point set ``{point}``."""

    def __init__(self, point):
        self.point = as_vector(point, name="point")
        self.dim = self.point.size

    def contains(self, x, tol=1e-9):
        x = _check_dim(x, self.dim)
        return float(np.linalg.norm(x - self.point)) <= tol

    def project(self, U, x):
        _check_dim(x, self.dim)
        return self.point.copy()

    def support(self, x):
        x = _check_dim(x, self.dim)
        return float(np.dot(self.point, x))

    def linear_image(self, S):
        return Singleton(S.apply(self.point))

    def preimage_sqrt(self, S):
        return Singleton(S.solve(self.point))

    def sample_point(self, rng, scale=1.0):
        return self.point.copy()


# ---------------------------------------------------------------------------
# Scalar functions for one-dimensional compositions
# ---------------------------------------------------------------------------

class ScalarFunction:
    """Convex scalar function with a closed-form prox of ``w * phi``."""

    def value(self, t):
        raise NotImplementedError

    def prox(self, t, w):
        """argmin_s  w * phi(s) + 0.5 (s - t)^2"""
        raise NotImplementedError


class AbsValue(ScalarFunction):
    def value(self, t):
        return abs(t)

    def prox(self, t, w):
        return float(np.sign(t) * max(abs(t) - w, 0.0))


class HalfLine(ScalarFunction):
    """Indicator of the half line ``(-inf, xi]``.

    Evaluation tolerates boundary float noise, like the set indicators.
    """

    def __init__(self, xi=0.0):
        self.xi = float(xi)

    def value(self, t, tol=1e-9):
        return 0.0 if t <= self.xi + tol * max(1.0, abs(self.xi)) else np.inf

    def prox(self, t, w):
        return min(float(t), self.xi)


class ScalarQuadratic(ScalarFunction):
    """``0.5 * curv * t^2 + slope * t`` with ``curv >= 0``."""

    def __init__(self, curv=1.0, slope=0.0):
        if curv < 0:
            raise ValueError("curvature must be nonnegative")
        self.curv = float(curv)
        self.slope = float(slope)

    def value(self, t):
        return 0.5 * self.curv * t * t + self.slope * t

    def prox(self, t, w):
        return (float(t) - w * self.slope) / (1.0 + w * self.curv)


# ---------------------------------------------------------------------------
# Prox-friendly functions
# ---------------------------------------------------------------------------

class ProxFunction:
    """A convex function with a closed-form metric prox.

    ``prox(x, gamma, U)`` returns ``argmin_y gamma*f(y) + 0.5*||y-x||_U^2``.
    ``conjugate`` and ``compose_sqrt`` are provided only where the result
    stays inside the catalog.
    """

    dim = None

    def value(self, x):
        raise NotImplementedError

    def prox(self, x, gamma, U):
        raise NotImplementedError

    def conjugate(self):
        raise CatalogError(f"conjugate of {type(self).__name__} not in catalog")

    def compose_sqrt(self, S):
        """Descriptor of ``x -> f(S x)`` for an SPD ``S`` when in catalog."""
        raise CatalogError(f"composition of {type(self).__name__} not in catalog")


class Zero(ProxFunction):
    """Identically zero function."""

    def __init__(self, dim=None):
        self.dim = dim

    def value(self, x):
        return 0.0

    def prox(self, x, gamma, U):
        return as_vector(x, self.dim).copy()

    def conjugate(self):
        if self.dim is None:
            raise CatalogError("conjugate of Zero needs a fixed dimension")
        return Indicator(Singleton(np.zeros(self.dim)))

    def compose_sqrt(self, S):
        return Zero(S.dim)


class Indicator(ProxFunction):
    """Indicator function of a catalog convex set."""

    def __init__(self, cset):
        self.set = cset
        self.dim = cset.dim

    def value(self, x, tol=1e-9):
        return 0.0 if self.set.contains(x, tol=tol) else np.inf

    def prox(self, x, gamma, U):
        return self.set.project(U, x)

    def conjugate(self):
        return Support(self.set)

    def compose_sqrt(self, S):
        return Indicator(self.set.preimage_sqrt(S))


class Support(ProxFunction):
    """Support function of a catalog convex set."""

    def __init__(self, cset):
        self.set = cset
        self.dim = cset.dim

    def value(self, x):
        return self.set.support(x)

    def prox(self, x, gamma, U):
        # prox of gamma * sigma_C in metric U:
        #   x - gamma * U^{-1} P_C^{U^{-1}}(U x / gamma)
        x = _check_dim(x, self.dim)
        uinv = U.inverse()
        p = self.set.project(uinv, U.apply(x) / gamma)
        return x - gamma * U.solve(p)

    def conjugate(self):
        return Indicator(self.set)

    def compose_sqrt(self, S):
        return Support(self.set.linear_image(S))


class L1Norm(ProxFunction):
    """Weighted l1 norm ``sum_i w_i |x_i|`` with positive weights."""

    def __init__(self, dim, weight=1.0):
        self.dim = dim
        w = np.asarray(weight, dtype=float)
        self.weights = np.full(dim, float(w)) if w.ndim == 0 else as_vector(w, dim, name="weight")
        if np.any(self.weights <= 0):
            raise ValueError("l1 weights must be positive")

    def value(self, x):
        x = _check_dim(x, self.dim)
        return float(np.sum(self.weights * np.abs(x)))

    def prox(self, x, gamma, U):
        x = _check_dim(x, self.dim)
        if not U.is_diagonal:
            raise CatalogError(
                "l1 prox under a non-diagonal metric is not separable; "
                "no closed form in catalog"
            )
        thresh = gamma * self.weights / U.diagonal
        return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)

    def conjugate(self):
        return Indicator(Box(-self.weights, self.weights))

    def compose_sqrt(self, S):
        if not S.is_diagonal:
            raise CatalogError("l1 composed with a dense map is not separable")
        return L1Norm(self.dim, self.weights * S.diagonal)


class EuclideanNorm(ProxFunction):
    """``weight * ||x||``, the support function of the ``weight``-ball."""

    def __init__(self, dim, weight=1.0):
        if weight <= 0:
            raise ValueError("weight must be positive")
        self.dim = dim
        self.weight = float(weight)
        self._support = Support(Ball(np.zeros(dim), self.weight))

    def value(self, x):
        x = _check_dim(x, self.dim)
        return self.weight * float(np.linalg.norm(x))

    def prox(self, x, gamma, U):
        return self._support.prox(x, gamma, U)

    def conjugate(self):
        return Indicator(Ball(np.zeros(self.dim), self.weight))


class Quadratic(ProxFunction):
    """``0.5 <A x, x> + <u, x> + const`` with symmetric PSD ``A``."""

    def __init__(self, A, u=None, const=0.0):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise DimensionMismatch("quadratic matrix must be square")
        if np.linalg.norm(self.A - self.A.T) > 1e-10 * max(1.0, np.linalg.norm(self.A)):
            raise ValueError("quadratic matrix must be symmetric")
        self.A = 0.5 * (self.A + self.A.T)
        self.dim = self.A.shape[0]
        self.u = np.zeros(self.dim) if u is None else as_vector(u, self.dim, name="u")
        self.const = float(const)
        evals = np.linalg.eigvalsh(self.A)
        if evals[0] < -1e-10 * max(1.0, abs(evals[-1])):
            raise ValueError("quadratic matrix must be positive semidefinite")

    def value(self, x):
        x = _check_dim(x, self.dim)
        return 0.5 * float(x @ self.A @ x) + float(np.dot(self.u, x)) + self.const

    def gradient(self, x):
        x = _check_dim(x, self.dim)
        return self.A @ x + self.u

    def prox(self, x, gamma, U):
        # stationarity: gamma*(A p + u) + U (p - x) = 0
        x = _check_dim(x, self.dim)
        lhs = U.mat + gamma * self.A
        rhs = U.apply(x) - gamma * self.u
        return np.linalg.solve(lhs, rhs)

    def conjugate(self):
        evals = np.linalg.eigvalsh(self.A)
        if evals[0] <= 1e-12 * max(1.0, evals[-1]):
            raise CatalogError("conjugate of a singular quadratic is not a quadratic")
        Ainv = np.linalg.inv(self.A)
        Ainv = 0.5 * (Ainv + Ainv.T)
        ustar = -Ainv @ self.u
        cstar = 0.5 * float(self.u @ Ainv @ self.u) - self.const
        return Quadratic(Ainv, ustar, cstar)

    def compose_sqrt(self, S):
        return Quadratic(S.mat @ self.A @ S.mat, S.apply(self.u), self.const)


class ScalarComposition(ProxFunction):
    """``phi(<x, u>)`` for a catalog scalar ``phi`` and nonzero ``u``."""

    def __init__(self, phi, u):
        if not isinstance(phi, ScalarFunction):
            raise CatalogError("phi must be a catalog scalar function")
        self.phi = phi
        self.u = as_vector(u, name="u")
        if not np.any(self.u):
            raise ValueError("direction u must be nonzero")
        self.dim = self.u.size

    def value(self, x):
        x = _check_dim(x, self.dim)
        return float(self.phi.value(float(np.dot(x, self.u))))

    def prox(self, x, gamma, U):
        # reduce along u: with w = <u, U^{-1} u>, the prox moves x along
        # U^{-1} u by (prox of (gamma*w)*phi at <x,u>  -  <x,u>) / w
        x = _check_dim(x, self.dim)
        uinv_u = U.solve(self.u)
        w = float(np.dot(self.u, uinv_u))
        t = float(np.dot(x, self.u))
        s = self.phi.prox(t, gamma * w)
        return x + ((s - t) / w) * uinv_u

    def compose_sqrt(self, S):
        return ScalarComposition(self.phi, S.apply(self.u))


def least_squares(terms):
    """Assemble ``0.5 * sum_i w_i ||L_i x - r_i||^2`` into a Quadratic.

    ``terms`` is an iterable of ``(weight, L_i, r_i)`` with ``L_i`` a dense
    matrix and ``r_i`` a target vector.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("least_squares needs at least one term")
    dim = np.asarray(terms[0][1]).shape[1]
    A = np.zeros((dim, dim))
    u = np.zeros(dim)
    const = 0.0
    for w, L, r in terms:
        L = np.asarray(L, dtype=float)
        r = as_vector(r, L.shape[0], name="r")
        if L.shape[1] != dim:
            raise DimensionMismatch("least-squares terms have inconsistent dimensions")
        A += w * (L.T @ L)
        u -= w * (L.T @ r)
        const += 0.5 * w * float(np.dot(r, r))
    return Quadratic(A, u, const)


# ---------------------------------------------------------------------------
# Free-function entry points
# ---------------------------------------------------------------------------

def prox_metric(f, gamma, U, x):
    """``argmin_y gamma*f(y) + 0.5*||y - x||_U^2`` for a catalog ``f``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not isinstance(f, ProxFunction):
        raise CatalogError(f"descriptor {type(f).__name__} outside catalog")
    return f.prox(x, gamma, U)


def prox_metric_via_conjugate(f, gamma, U, x):
    """Metric prox computed through the conjugate decomposition.

    Evaluates ``x - gamma * U^{-1} prox(f*, 1/gamma, U^{-1}, U x / gamma)``,
    which must agree with :func:`prox_metric` whenever both paths exist.
    """
    fstar = f.conjugate()
    x = as_vector(x, f.dim)
    uinv = U.inverse()
    inner = fstar.prox(U.apply(x) / gamma, 1.0 / gamma, uinv)
    return x - gamma * U.solve(inner)


def prox_quadratic_metric(Aq, u, U, x):
    """Metric prox of ``0.5<Aq y, y> + <u, y>`` via one dense solve."""
    q = Quadratic(Aq, u)
    return q.prox(x, 1.0, U)


def project_metric(cset, U, x):
    """Metric projection onto a catalog convex set."""
    if not isinstance(cset, ConvexSet):
        raise CatalogError(f"descriptor {type(cset).__name__} outside catalog")
    return cset.project(U, x)


def support_prox_metric(cset, gamma, U, x):
    """Metric prox of ``gamma * sigma_C`` through the projection identity."""
    return Support(cset).prox(x, gamma, U)


def moreau_envelope_value(f, w, smoothing=1.0):
    """Value of ``min_y f(y) + ||w - y||^2 / (2 * smoothing)``."""
    ident = Metric.identity(as_vector(w).size)
    p = f.prox(w, smoothing, ident)
    return f.value(p) + float(np.dot(w - p, w - p)) / (2.0 * smoothing)


def infimal_with_quadratic(g, nu, y):
    """Value of the infimal convolution of ``g`` with ``nu/2 * ||.||^2``."""
    return moreau_envelope_value(g, y, smoothing=1.0 / nu)
