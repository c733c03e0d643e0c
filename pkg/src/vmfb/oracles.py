"""Independent reference solvers used by tests and diagnostics only.

These prefer exactness over speed: dense KKT solves with exhaustive
active-set enumeration for small quadratic programs, golden-section scalar
minimization, and a separately coded classical fixed-step splitting loop as
a high-accuracy reference.  Certificates are recomputed from scratch so an
oracle never trusts its own solve path.

Everything here is a pure function; fixtures can be solved in parallel.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import AffineSubspace, Box, HalfSpace, Singleton
from .metric import Metric, as_vector

__all__ = [
    "OracleSolution",
    "OracleFailure",
    "qp_oracle",
    "scalar_prox_oracle",
    "reference_fb",
    "reference_pd_fixed_metric",
]

CERT_TOL = 1e-10
ENUM_CAP = 2 ** 20


class OracleFailure(RuntimeError):
    """The oracle could not certify a solution."""


@dataclass
class OracleSolution:
    point: np.ndarray
    certificate: dict = field(default_factory=dict)
    method: str = ""

    @property
    def residual(self):
        return max(self.certificate.values(), default=0.0)


def _gather_constraints(dim, constraints):
    """Flatten catalog set descriptors into inequality and equality rows."""
    A_rows, b_vals = [], []
    E_rows, d_vals = [], []
    for c in constraints:
        if isinstance(c, HalfSpace):
            A_rows.append(c.normal)
            b_vals.append(c.offset)
        elif isinstance(c, Box):
            for i in range(c.dim):
                e = np.zeros(dim)
                e[i] = 1.0
                if np.isfinite(c.upper[i]):
                    A_rows.append(e.copy())
                    b_vals.append(c.upper[i])
                if np.isfinite(c.lower[i]):
                    A_rows.append(-e)
                    b_vals.append(-c.lower[i])
        elif isinstance(c, AffineSubspace):
            E_rows.extend(list(c.C))
            d_vals.extend(list(c.d))
        elif isinstance(c, Singleton):
            E_rows.extend(list(np.eye(dim)))
            d_vals.extend(list(c.point))
        elif isinstance(c, tuple) and len(c) == 2:
            # raw (row, offset) inequality
            A_rows.append(as_vector(c[0], dim))
            b_vals.append(float(c[1]))
        else:
            raise OracleFailure(f"unsupported constraint descriptor {type(c).__name__}")
    A = np.array(A_rows) if A_rows else np.zeros((0, dim))
    b = np.array(b_vals)
    E = np.array(E_rows) if E_rows else np.zeros((0, dim))
    d = np.array(d_vals)
    return A, b, E, d


def _kkt_certificate(Q, c, A, b, E, d, x, lam, mu):
    grad = Q @ x + c
    if E.size:
        grad = grad + E.T @ mu
    if A.size:
        grad = grad + A.T @ lam
    scale = max(1.0, np.linalg.norm(Q), np.linalg.norm(c))
    cert = {"stationarity": float(np.linalg.norm(grad)) / scale}
    feas = 0.0
    comp = 0.0
    if A.size:
        slack = A @ x - b
        feas = max(feas, float(np.max(slack, initial=0.0)))
        comp = float(np.max(np.abs(lam * slack), initial=0.0)) / scale
        if np.min(lam, initial=0.0) < 0:
            cert["stationarity"] = math.inf
    if E.size:
        feas = max(feas, float(np.max(np.abs(E @ x - d), initial=0.0)))
    cert["feasibility"] = feas
    cert["complementarity"] = comp
    return cert


def qp_oracle(Q, c, constraints=(), tol=CERT_TOL):
    """KKT-certified minimizer of ``0.5 x'Qx + c'x`` over catalog constraints.

    Inequality constraints are searched by exhaustive active-set
    enumeration in order of increasing active-set size (any KKT point of a
    strictly convex program is the global minimum, so the first certified
    subset wins).  Enumeration is capped at ``2**20`` subsets; beyond the
    cap a projected-gradient fallback handles pure box constraints.
    """
    Q = np.asarray(Q, dtype=float)
    dim = Q.shape[0]
    c = as_vector(c, dim, name="c")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] <= 0:
        raise OracleFailure("objective matrix must be positive definite")
    A, b, E, d = _gather_constraints(dim, constraints)
    m = A.shape[0]

    if m > 20:
        sol = _projected_gradient_box(Q, c, constraints, tol)
        if sol is not None:
            return sol
        raise OracleFailure(
            f"{m} inequality rows exceed the enumeration budget and the "
            "instance is not a pure box problem"
        )

    total = 0
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            total += 1
            if total > ENUM_CAP:
                raise OracleFailure("active-set enumeration budget exceeded")
            S = list(subset)
            As = A[S]
            k_eq = E.shape[0]
            k_act = len(S)
            n_sys = dim + k_eq + k_act
            KKT = np.zeros((n_sys, n_sys))
            KKT[:dim, :dim] = Q
            rhs = np.concatenate([-c, d, b[S]])
            if k_eq:
                KKT[:dim, dim:dim + k_eq] = E.T
                KKT[dim:dim + k_eq, :dim] = E
            if k_act:
                KKT[:dim, dim + k_eq:] = As.T
                KKT[dim + k_eq:, :dim] = As
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:dim]
            mu = sol[dim:dim + k_eq]
            lam_S = sol[dim + k_eq:]
            if np.min(lam_S, initial=0.0) < -1e-11:
                continue
            lam = np.zeros(m)
            lam[S] = np.maximum(lam_S, 0.0)
            cert = _kkt_certificate(Q, c, A, b, E, d, x, lam, mu)
            if max(cert.values()) <= tol:
                return OracleSolution(x, cert, method=f"active-set({len(S)} active)")
    raise OracleFailure("no active set certified; the constraint set may be infeasible")


def _projected_gradient_box(Q, c, constraints, tol):
    boxes = [c_ for c_ in constraints if isinstance(c_, Box)]
    others = [c_ for c_ in constraints if not isinstance(c_, Box)]
    if others or len(boxes) != 1:
        return None
    box = boxes[0]
    dim = Q.shape[0]
    step = 1.0 / float(np.linalg.norm(Q, 2))
    x = np.clip(np.zeros(dim), box.lower, box.upper)
    for _ in range(2_000_000):
        g = Q @ x + c
        x_new = np.clip(x - step * g, box.lower, box.upper)
        if np.linalg.norm(x_new - x) <= 1e-13 * step:
            x = x_new
            break
        x = x_new
    resid = float(np.linalg.norm(x - np.clip(x - (Q @ x + c), box.lower, box.upper)))
    if resid > tol:
        raise OracleFailure(f"projected gradient stalled at residual {resid:.3e}")
    cert = {"stationarity": resid, "feasibility": 0.0, "complementarity": 0.0}
    return OracleSolution(x, cert, method="projected-gradient")


def _golden_min(f, lo, hi, tol=1e-13):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c_ = b - invphi * (b - a)
    d_ = a + invphi * (b - a)
    fc, fd = f(c_), f(d_)
    while (b - a) > tol * max(1.0, abs(a), abs(b)):
        if fc <= fd:
            b, d_, fd = d_, c_, fc
            c_ = b - invphi * (b - a)
            fc = f(c_)
        else:
            a, c_, fc = c_, d_, fd
            d_ = a + invphi * (b - a)
            fd = f(d_)
    return 0.5 * (a + b)


def scalar_prox_oracle(phi, weight, t):
    """Reference minimizer of ``weight*phi(s) + 0.5*(s-t)^2``.

    For the three catalog scalars the stationarity condition is solved in
    one line, coded here independently of the library's prox methods.
    Anything else falls back to golden section, which localizes the
    minimizer only to about sqrt(machine eps) on smooth objectives (the
    comparison-based limit), hence the closed forms for certified work.
    """
    from .catalog import AbsValue, HalfLine, ScalarQuadratic

    if weight <= 0:
        raise ValueError("weight must be positive")
    t = float(t)
    if isinstance(phi, AbsValue):
        # stationarity: s - t + weight * sign(s) = 0, else s = 0
        if t > weight:
            return t - weight
        if t < -weight:
            return t + weight
        return 0.0
    if isinstance(phi, HalfLine):
        return t if t <= phi.xi else phi.xi
    if isinstance(phi, ScalarQuadratic):
        # weight*(curv*s + slope) + s - t = 0
        return (t - weight * phi.slope) / (1.0 + weight * phi.curv)

    span = abs(t) + weight * (1.0 + abs(phi.value(t))) + 1.0
    return _golden_min(lambda s: weight * phi.value(s) + 0.5 * (s - t) ** 2,
                       t - 2.0 * span, t + 2.0 * span)


def reference_fb(A, B, gamma, x0, iterations, target=CERT_TOL):
    """Classical fixed-step forward-backward loop, coded on its own.

    Runs ``x <- J_{gamma A}(x - gamma B x)`` with the identity metric and
    returns the last iterate with its fixed-point residual as certificate.
    Fails when the residual does not reach ``target`` within the budget.
    """
    if np.isfinite(B.beta) and not (0.0 < gamma < 2.0 * B.beta):
        raise ValueError("classical step must satisfy 0 < gamma < 2 beta")
    ident = Metric.identity(A.dim)
    x = as_vector(x0, A.dim).copy()
    resid = math.inf
    for _ in range(iterations):
        p = A.resolvent(gamma, ident, x - gamma * B(x))
        resid = float(np.linalg.norm(p - x))
        x = p
        if resid <= target * 1e-2:
            break
    # recompute the certificate from scratch
    resid = float(np.linalg.norm(A.resolvent(gamma, ident, x - gamma * B(x)) - x))
    if resid > target:
        raise OracleFailure(
            f"reference splitting stalled at residual {resid:.3e} > {target:.1e}"
        )
    return OracleSolution(x, {"fixed_point_residual": resid}, method="reference-fb")


def reference_pd_fixed_metric(problem, tau, sigmas, lam, iterations, x0=None, v0=None):
    """Hand-coded scalar-metric primal-dual loop used as a regression pin.

    Mirrors the unit-step structured recursion with ``U_n = tau*I`` and
    ``U_{i,n} = sigma_i*I`` written in plain scalar arithmetic.
    """
    ident_h = Metric.identity(problem.dim)
    idents = [Metric.identity(bl.L.shape[0]) for bl in problem.blocks]
    x = np.zeros(problem.dim) if x0 is None else as_vector(x0, problem.dim).copy()
    if v0 is None:
        v = [np.zeros(bl.L.shape[0]) for bl in problem.blocks]
    else:
        v = [as_vector(vi, bl.L.shape[0]).copy() for vi, bl in zip(v0, problem.blocks)]
    xs = [x.copy()]
    vs = [np.concatenate(v) if v else np.zeros(0)]
    for _ in range(iterations):
        forward = problem.C(x) - problem.z
        for bl, vi in zip(problem.blocks, v):
            forward = forward + bl.L.adjoint(vi)
        p = problem.A.resolvent(tau, ident_h, x - tau * forward)
        y = 2.0 * p - x
        x = x + lam * (p - x)
        new_v = []
        for bl, vi, sig, ident_g in zip(problem.blocks, v, sigmas, idents):
            w = vi + sig * (bl.L(y) - bl.r - bl.Dinv(vi))
            inner = bl.B.resolvent(1.0 / sig, ident_g, w / sig)
            q = w - sig * inner
            new_v.append(vi + lam * (q - vi))
        v = new_v
        xs.append(x.copy())
        vs.append(np.concatenate(v) if v else np.zeros(0))
    return xs, vs
