"""Dense symmetric positive definite metrics and the inner products they induce.

A :class:`Metric` wraps an SPD matrix together with a certified lower
eigenvalue bound and cached factorizations (eigendecomposition, inverse,
square root).  All objects are immutable after construction and safe to
share across threads; every operation is pure.

Target scale is dense desk-size problems (dimension up to ~2000), where a
full symmetric eigendecomposition is cheap and lets order predicates be
certified instead of sampled.
"""

import numpy as np

__all__ = [
    "Metric",
    "MetricError",
    "DimensionMismatch",
    "as_vector",
    "metric_inner",
    "metric_norm",
    "metric_sqrt",
    "metric_inverse",
    "loewner_geq",
]

# Relative asymmetry below this is treated as float noise and symmetrized away.
SYMMETRY_RTOL = 1e-12
# Metrics more ill-conditioned than this are rejected outright.
MAX_CONDITION = 1e12


class MetricError(ValueError):
    """Raised when a matrix cannot be certified as a usable SPD metric."""


class DimensionMismatch(ValueError):
    """Raised when operand dimensions disagree."""


def as_vector(x, dim=None, name="x"):
    """Coerce to a finite 1-D float array, checking the dimension if given."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if dim is not None and arr.size != dim:
        raise DimensionMismatch(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


def _symmetrize(matrix):
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise MetricError(f"metric matrix must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise MetricError("metric matrix contains non-finite entries")
    scale = max(1.0, float(np.linalg.norm(mat)))
    asym = float(np.linalg.norm(mat - mat.T))
    if asym > SYMMETRY_RTOL * scale:
        raise MetricError(
            f"matrix is not symmetric (relative asymmetry {asym / scale:.3e})"
        )
    return 0.5 * (mat + mat.T)


class Metric:
    """An SPD matrix with a certified lower eigenvalue bound ``alpha``.

    Parameters
    ----------
    matrix : array_like
        Symmetric positive definite matrix.  Relative asymmetry below
        1e-12 is symmetrized; anything larger is rejected.
    alpha : float, optional
        Claimed lower bound on the spectrum.  Construction fails if the
        computed smallest eigenvalue falls below it.  Defaults to the
        computed smallest eigenvalue.
    """

    __slots__ = (
        "mat", "dim", "alpha", "_diag", "_evals", "_evecs",
        "_norm", "_inv_mat", "_inverse", "_sqrt",
    )

    def __init__(self, matrix, alpha=None):
        mat = _symmetrize(matrix)
        n = mat.shape[0]
        diag = np.diag(mat).copy()
        offdiag_free = np.count_nonzero(mat - np.diag(diag)) == 0
        if offdiag_free:
            evals = diag
            evecs = None
        else:
            try:
                evals, evecs = np.linalg.eigh(mat)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise MetricError(f"eigendecomposition failed: {exc}") from exc
        lmin = float(np.min(evals))
        lmax = float(np.max(evals))
        if lmin <= 0.0:
            raise MetricError(f"matrix is not positive definite (min eigenvalue {lmin:.3e})")
        if lmax / lmin > MAX_CONDITION:
            raise MetricError(
                f"condition number {lmax / lmin:.3e} exceeds {MAX_CONDITION:.0e}"
            )
        if alpha is None:
            alpha = lmin
        else:
            alpha = float(alpha)
            if alpha <= 0.0:
                raise MetricError("alpha must be positive")
            if lmin < alpha * (1.0 - 1e-12) - 1e-15:
                raise MetricError(
                    f"claimed lower bound alpha={alpha:.6e} exceeds the smallest "
                    f"eigenvalue {lmin:.6e}"
                )
        self.mat = mat
        self.mat.setflags(write=False)
        self.dim = n
        self.alpha = float(alpha)
        self._diag = diag if offdiag_free else None
        self._evals = np.asarray(evals, dtype=float)
        self._evecs = evecs
        self._norm = lmax
        self._inv_mat = None
        self._inverse = None
        self._sqrt = None

    # -- constructors -------------------------------------------------

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), alpha=1.0)

    @classmethod
    def from_diagonal(cls, diag, alpha=None):
        d = as_vector(diag, name="diag")
        return cls(np.diag(d), alpha=alpha)

    @classmethod
    def scaled_identity(cls, scale, dim):
        if scale <= 0:
            raise MetricError("scale must be positive")
        return cls(np.diag(np.full(dim, float(scale))), alpha=float(scale))

    # -- basic queries ------------------------------------------------

    @property
    def is_diagonal(self):
        return self._diag is not None

    @property
    def diagonal(self):
        return self._diag

    @property
    def norm(self):
        """Operator norm (largest eigenvalue)."""
        return self._norm

    @property
    def eigenvalues(self):
        return self._evals

    @property
    def inv_matrix(self):
        if self._inv_mat is None:
            if self._diag is not None:
                self._inv_mat = np.diag(1.0 / self._diag)
            else:
                self._inv_mat = (self._evecs / self._evals) @ self._evecs.T
                self._inv_mat = 0.5 * (self._inv_mat + self._inv_mat.T)
            self._inv_mat.setflags(write=False)
        return self._inv_mat

    # -- actions ------------------------------------------------------

    def apply(self, x):
        """Matrix-vector product ``U x``."""
        x = as_vector(x, self.dim)
        if self._diag is not None:
            return self._diag * x
        return self.mat @ x

    def solve(self, x):
        """Solve ``U y = x`` through the cached factorization."""
        x = as_vector(x, self.dim)
        if self._diag is not None:
            return x / self._diag
        return self._evecs @ ((self._evecs.T @ x) / self._evals)

    def inner(self, x, y):
        """Induced inner product ``<U x, y>``."""
        y = as_vector(y, self.dim, name="y")
        return float(np.dot(self.apply(x), y))

    def norm_of(self, x):
        """Induced norm ``sqrt(<U x, x>)``; zero only at the origin."""
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    # -- derived metrics ----------------------------------------------

    def inverse(self):
        """Inverse metric, with certified lower bound ``1 / norm``."""
        if self._inverse is None:
            inv = Metric(self.inv_matrix, alpha=1.0 / self._norm)
            inv._inverse = self
            self._inverse = inv
        return self._inverse

    def sqrt(self):
        """SPD square root; reproduces the matrix to 1e-10 relative error."""
        if self._sqrt is None:
            if self._diag is not None:
                root = Metric(np.diag(np.sqrt(self._diag)), alpha=np.sqrt(self.alpha))
            else:
                try:
                    smat = (self._evecs * np.sqrt(self._evals)) @ self._evecs.T
                except FloatingPointError as exc:  # pragma: no cover
                    raise MetricError(f"square root factorization failed: {exc}") from exc
                root = Metric(0.5 * (smat + smat.T), alpha=np.sqrt(self.alpha))
            self._sqrt = root
        return self._sqrt

    def __repr__(self):
        kind = "diagonal" if self.is_diagonal else "dense"
        return f"Metric(dim={self.dim}, {kind}, alpha={self.alpha:.3g}, norm={self._norm:.3g})"


def _as_matrix(obj):
    if isinstance(obj, Metric):
        return obj.mat
    return _symmetrize(obj)


def metric_inner(U, x, y):
    """Inner product ``<U x, y>`` induced by the metric ``U``."""
    return U.inner(x, y)


def metric_norm(U, x):
    """Norm ``sqrt(<U x, x>)`` induced by the metric ``U``."""
    return U.norm_of(x)


def metric_sqrt(U):
    """SPD square root of a metric."""
    return U.sqrt()


def metric_inverse(U):
    """Inverse of a metric, certified bounded below by ``1 / U.norm``."""
    return U.inverse()


def loewner_geq(A, B, slack=0.0):
    """Whether ``A - B`` is positive semidefinite up to ``slack``.

    Decided from the full symmetric eigendecomposition of the difference,
    which is exact at desk scale; smallest eigenvalue of ``A - B`` must be
    at least ``-slack``.
    """
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    amat = _as_matrix(A)
    bmat = _as_matrix(B)
    if amat.shape != bmat.shape:
        raise DimensionMismatch(
            f"operands have shapes {amat.shape} and {bmat.shape}"
        )
    diff = amat - bmat
    d = np.diag(diff)
    if np.count_nonzero(diff - np.diag(d)) == 0:
        smallest = float(np.min(d)) if d.size else 0.0
    else:
        smallest = float(np.linalg.eigvalsh(diff)[0])
    return smallest >= -slack
