"""Monotone and cocoercive operator abstractions with metric resolvents.

Set-valued maximally monotone operators are represented exclusively through
their resolvent oracles; the graph is never materialized, because the
splitting iterations only ever call the resolvent.  Cocoercive operators are
single-valued maps carrying their declared cocoercivity constant.

Operator objects are immutable and shareable; evaluations are pure and
reentrant.
"""

import numpy as np
import scipy.linalg

from .catalog import CatalogError, Indicator, ProxFunction, Quadratic, Singleton
from .metric import DimensionMismatch, Metric, as_vector

__all__ = [
    "LinearMap",
    "CocoerciveOperator",
    "ResolventOperator",
    "zero_operator",
    "subdifferential",
    "normal_cone",
    "linear_monotone",
    "resolvent_metric",
    "resolvent_inverse_identity",
    "block_resolvent",
    "block_of",
    "cocoercive_sum",
    "ProductMetric",
    "block_metric",
    "stack_blocks",
    "split_blocks",
]


class LinearMap:
    """Dense linear map with its operator norm cached."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise DimensionMismatch("linear map must be a 2-D matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("linear map contains non-finite entries")
        self.shape = self.matrix.shape
        self.norm = float(np.linalg.norm(self.matrix, 2))

    @property
    def is_zero(self):
        return self.norm == 0.0

    def __call__(self, x):
        return self.matrix @ as_vector(x, self.shape[1])

    def adjoint(self, y):
        return self.matrix.T @ as_vector(y, self.shape[0])

    def __repr__(self):
        return f"LinearMap(shape={self.shape}, norm={self.norm:.3g})"


class CocoerciveOperator:
    """Single-valued operator with a declared cocoercivity constant ``beta``.

    ``beta = inf`` marks the zero operator (the infinite-modulus case used
    when a parallel-sum smoothing term is absent).
    """

    def __init__(self, dim, beta, fn, descriptor="custom"):
        if not (beta > 0):
            raise ValueError("cocoercivity constant must be positive")
        self.dim = dim
        self.beta = float(beta)
        self._fn = fn
        self.descriptor = descriptor

    def __call__(self, x):
        return self._fn(as_vector(x, self.dim))

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, dim):
        return cls(dim, np.inf, lambda x: np.zeros(dim), descriptor="zero")

    @classmethod
    def translation(cls, target):
        """``x -> x - target``, the gradient of ``0.5*||x - target||^2``."""
        c = as_vector(target)
        return cls(c.size, 1.0, lambda x: x - c, descriptor="translation")

    @classmethod
    def scaled_identity(cls, rho, dim):
        if rho <= 0:
            raise ValueError("rho must be positive")
        return cls(dim, 1.0 / rho, lambda x: rho * x, descriptor="scaled_identity")

    @classmethod
    def gradient_of_quadratic(cls, Q, u=None):
        """Gradient ``x -> Q x + u`` of a convex quadratic; beta = 1/||Q||."""
        q = Quadratic(Q, u)
        lip = float(np.linalg.norm(q.A, 2))
        beta = np.inf if lip == 0.0 else 1.0 / lip
        return cls(q.dim, beta, q.gradient, descriptor="quadratic_gradient")

    @classmethod
    def least_squares_gradient(cls, M, b):
        """Gradient of ``0.5*||M x - b||^2``; beta = 1/||M||^2."""
        M = np.asarray(M, dtype=float)
        b = as_vector(b, M.shape[0], name="b")
        lip = float(np.linalg.norm(M, 2)) ** 2
        beta = np.inf if lip == 0.0 else 1.0 / lip
        return cls(
            M.shape[1], beta,
            lambda x: M.T @ (M @ x - b),
            descriptor="least_squares_gradient",
        )

    @classmethod
    def affine_monotone(cls, M, u=None):
        """``x -> M x + u`` for monotone ``M`` (possibly with a skew part).

        The cocoercivity constant is the smallest generalized eigenvalue of
        ``sym(M)`` against ``M^T M``; ``M`` must make it strictly positive,
        which requires an invertible ``M`` with positive definite
        symmetric part.
        """
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        if M.shape != (n, n):
            raise DimensionMismatch("affine_monotone needs a square matrix")
        u = np.zeros(n) if u is None else as_vector(u, n, name="u")
        sym = 0.5 * (M + M.T)
        gram = M.T @ M
        if np.linalg.eigvalsh(gram)[0] <= 1e-14 * max(1.0, np.linalg.norm(gram)):
            raise ValueError("matrix must be invertible to certify cocoercivity")
        beta = float(scipy.linalg.eigh(sym, gram, eigvals_only=True)[0])
        if beta <= 0:
            raise ValueError("operator is not cocoercive (nonpositive constant)")
        return cls(n, beta, lambda x: M @ x + u, descriptor="affine_monotone")


class ResolventOperator:
    """Maximally monotone operator exposed through its metric resolvent.

    The oracle ``resolvent(gamma, U, x)`` computes the resolvent of
    ``gamma * U * A`` at ``x``, equivalently the unique ``p`` with
    ``U^{-1}(x - p) in gamma * A p``.
    """

    def __init__(self, dim, oracle, descriptor, catalog_inverse=None,
                 evaluate=None, conjugator=None):
        self.dim = dim
        self._oracle = oracle
        self.descriptor = descriptor
        self._catalog_inverse = catalog_inverse  # callable returning operator
        self.evaluate = evaluate  # optional single-valued A(x)
        self._conjugator = conjugator  # callable S -> operator for sqrt(U) A sqrt(U)
        self._inverse = None

    def resolvent(self, gamma, U, x):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        x = as_vector(x, self.dim)
        return self._oracle(gamma, U, x)

    @property
    def catalog_inverse(self):
        """Inverse operator from the catalog pair, when one exists."""
        if self._catalog_inverse is None:
            raise CatalogError(
                f"no catalog inverse available for {self.descriptor}"
            )
        inv = self._catalog_inverse
        return inv() if callable(inv) else inv

    def inverse(self):
        """Inverse operator whose resolvent uses the inversion identity.

        ``J of (gamma U A^{-1})`` applied as
        ``x - gamma U J_{(1/gamma) U^{-1} A}(U^{-1} x / gamma)``; always
        available, regardless of a catalog pair.
        """
        if self._inverse is None:
            base = self

            def oracle(gamma, U, x):
                inner = base.resolvent(1.0 / gamma, U.inverse(), U.solve(x) / gamma)
                return x - gamma * U.apply(inner)

            self._inverse = ResolventOperator(
                self.dim, oracle, descriptor=f"inverse({self.descriptor})",
                catalog_inverse=lambda: base,
            )
            self._inverse._inverse = self
        return self._inverse

    def conjugated_by_sqrt(self, S):
        """Operator ``S A S`` for an SPD ``S`` (used with ``S = sqrt(U)``)."""
        if self._conjugator is None:
            raise CatalogError(
                f"conjugation of {self.descriptor} is outside the catalog"
            )
        return self._conjugator(S)

    def __repr__(self):
        return f"ResolventOperator(dim={self.dim}, {self.descriptor})"


# ---------------------------------------------------------------------------
# Resolvent constructors
# ---------------------------------------------------------------------------

def zero_operator(dim):
    """The zero operator; its resolvent is the identity for any metric."""
    return ResolventOperator(
        dim,
        lambda gamma, U, x: x.copy(),
        descriptor="zero",
        catalog_inverse=lambda: normal_cone(Singleton(np.zeros(dim))),
        evaluate=lambda x: np.zeros(dim),
        conjugator=lambda S: zero_operator(dim),
    )


def subdifferential(f):
    """Subdifferential of a catalog function, as a resolvent oracle.

    The resolvent of ``gamma U ∂f`` is the metric prox of ``gamma*f`` in the
    inverse metric, which is how the variable-metric iterations consume it.
    """
    if not isinstance(f, ProxFunction):
        raise CatalogError(f"descriptor {type(f).__name__} outside catalog")
    if f.dim is None:
        raise CatalogError("subdifferential needs a fixed-dimension descriptor")

    def oracle(gamma, U, x):
        return f.prox(x, gamma, U.inverse())

    def catalog_inverse():
        return subdifferential(f.conjugate())

    evaluate = f.gradient if isinstance(f, Quadratic) else None

    def conjugator(S):
        return subdifferential(f.compose_sqrt(S))

    return ResolventOperator(
        f.dim, oracle, descriptor=f"subdifferential({type(f).__name__})",
        catalog_inverse=catalog_inverse, evaluate=evaluate, conjugator=conjugator,
    )


def normal_cone(cset):
    """Normal cone operator of a catalog convex set."""
    return subdifferential(Indicator(cset))


def linear_monotone(M, offset=None):
    """Affine maximally monotone operator ``x -> M x + offset``.

    Requires ``M + M^T`` positive semidefinite.  The resolvent solves the
    dense linear system ``(I + gamma U M) p = x - gamma U offset``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionMismatch("linear_monotone needs a square matrix")
    offset = np.zeros(n) if offset is None else as_vector(offset, n, name="offset")
    sym_eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if sym_eigs[0] < -1e-10 * max(1.0, abs(sym_eigs[-1])):
        raise ValueError("matrix is not monotone (symmetric part indefinite)")

    def oracle(gamma, U, x):
        lhs = np.eye(n) + gamma * (U.mat @ M)
        rhs = x - gamma * U.apply(offset)
        try:
            return np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise CatalogError(f"resolvent solve failed: {exc}") from exc

    def catalog_inverse():
        Minv = np.linalg.inv(M)
        return linear_monotone(Minv, -Minv @ offset)

    invertible = abs(np.linalg.det(M)) > 1e-12

    return ResolventOperator(
        n, oracle, descriptor="linear_monotone",
        catalog_inverse=catalog_inverse if invertible else None,
        evaluate=lambda x: M @ x + offset,
        conjugator=lambda S: linear_monotone(S.mat @ M @ S.mat, S.apply(offset)),
    )


# ---------------------------------------------------------------------------
# Resolvent calculus entry points
# ---------------------------------------------------------------------------

def resolvent_metric(A, gamma, U, x):
    """Resolvent of ``gamma U A`` at ``x``."""
    return A.resolvent(gamma, U, x)


def resolvent_inverse_identity(A, gamma, U, x):
    """Resolvent of ``gamma U A`` computed through the catalog inverse of A.

    Evaluates ``x - gamma U J_{(1/gamma) U^{-1} A^{-1}}(U^{-1} x / gamma)``
    with the inverse operator taken from the catalog pair (not the generic
    inversion wrapper), so the two routes are genuinely independent.
    """
    Ainv = A.catalog_inverse
    x = as_vector(x, A.dim)
    inner = Ainv.resolvent(1.0 / gamma, U.inverse(), U.solve(x) / gamma)
    return x - gamma * U.apply(inner)


# ---------------------------------------------------------------------------
# Product-space helpers
# ---------------------------------------------------------------------------

def stack_blocks(blocks):
    return np.concatenate([as_vector(b) for b in blocks])


def split_blocks(x, dims):
    x = as_vector(x, int(np.sum(dims)))
    out = []
    pos = 0
    for d in dims:
        out.append(x[pos:pos + d])
        pos += d
    return out


class ProductMetric(Metric):
    """Block-diagonal metric that remembers its per-block factors."""

    __slots__ = ("blocks", "block_dims")

    def __init__(self, metrics):
        self.blocks = tuple(metrics)
        self.block_dims = tuple(m.dim for m in metrics)
        mat = scipy.linalg.block_diag(*[m.mat for m in metrics])
        super().__init__(mat, alpha=min(m.alpha for m in metrics))

    def inverse(self):
        if self._inverse is None:
            inv = ProductMetric([m.inverse() for m in self.blocks])
            inv._inverse = self
            self._inverse = inv
        return self._inverse


def block_metric(metrics):
    """Direct sum of metrics on a product space."""
    return ProductMetric(metrics)


def block_resolvent(pairs, gamma, x):
    """Componentwise resolvent on a product space.

    ``pairs`` is a list of ``(operator, metric)``; the product resolvent
    applies each block's resolvent to the matching slice of ``x``.
    """
    dims = [op.dim for op, _ in pairs]
    parts = split_blocks(x, dims)
    out = []
    for (op, U), part in zip(pairs, parts):
        if U.dim != op.dim:
            raise DimensionMismatch("block metric does not match operator dimension")
        out.append(op.resolvent(gamma, U, part))
    return stack_blocks(out)


def block_of(operators):
    """Product operator applying per-block resolvents componentwise.

    The metric passed at call time must be a :class:`ProductMetric` with
    matching block dimensions (a dense metric cannot be split safely).
    """
    operators = list(operators)
    dims = tuple(op.dim for op in operators)
    total = int(np.sum(dims))

    def oracle(gamma, U, x):
        if not isinstance(U, ProductMetric) or U.block_dims != dims:
            raise CatalogError(
                "block resolvent needs a ProductMetric with matching blocks"
            )
        return block_resolvent(list(zip(operators, U.blocks)), gamma, x)

    return ResolventOperator(total, oracle, descriptor="block")


# ---------------------------------------------------------------------------
# Cocoercive composition
# ---------------------------------------------------------------------------

def cocoercive_sum(terms):
    """Composite ``sum_i L_i^* T_i L_i`` with its certified constant.

    Each term is ``(L_i, T_i)`` with ``T_i`` declared ``beta_i``-cocoercive;
    the composite constant is ``1 / sum_i ||L_i||^2 / beta_i``.  Terms with
    an infinite constant (zero operators) contribute nothing to the sum in
    the denominator.  Zero couplings are rejected.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("cocoercive_sum needs at least one term")
    dim = terms[0][0].shape[1]
    denom = 0.0
    for L, T in terms:
        if L.is_zero:
            raise ValueError("coupling maps must be nonzero")
        if L.shape[1] != dim:
            raise DimensionMismatch("terms act on inconsistent domains")
        if L.shape[0] != T.dim:
            raise DimensionMismatch("coupling range does not match operator domain")
        if np.isfinite(T.beta):
            denom += L.norm ** 2 / T.beta
    beta = np.inf if denom == 0.0 else 1.0 / denom

    def fn(x):
        acc = np.zeros(dim)
        for L, T in terms:
            acc += L.adjoint(T(L(x)))
        return acc

    return CocoerciveOperator(dim, beta, fn, descriptor="composite_sum")
