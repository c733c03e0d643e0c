"""Unit-step primal-dual splitting for cocoercive composite inclusions.

The solver iterates jointly on a primal variable and one dual variable per
composite block, using the structured recursion directly: it only ever
applies the per-space metrics and the coupling maps, never the dense
product-space metric (which exists in closed form and is exercised by the
test-only helpers below).  The step size is fixed at one, the only degree
of freedom the underlying analysis leaves here; relaxation remains free.

Within one iteration the dual block updates are independent given the
reflected primal point and may run in parallel; the primal update must
complete first.  Iterations are serial.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .catalog import CatalogError
from .forward_backward import SolveTrace, StoppingRule, _policy_gate
from .metric import Metric, as_vector
from .operators import CocoerciveOperator, ResolventOperator, subdifferential
from .schedules import validate_corollary62
from .strong_duality import DualBlock, smoothing_from_quadratic

__all__ = [
    "CocoerciveProblem",
    "CocoerciveErrors",
    "ProductPoint",
    "solve_cocoercive_pd",
    "solve_composite_min",
    "composite_min_problem",
    "composite_objective",
    "composite_dual_objective",
    "kkt_residual",
    "assemble_product_metric_matrix",
    "PDProductMetric",
    "product_metric_schedule",
    "product_resolvent",
    "product_forward_operator",
]


@dataclass(frozen=True)
class ProductPoint:
    """A primal point together with its dual blocks, as one object."""

    x: np.ndarray
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x))
        object.__setattr__(self, "v", tuple(as_vector(vi) for vi in self.v))

    @property
    def stacked(self):
        return np.concatenate([self.x] + list(self.v))

    @classmethod
    def from_stacked(cls, w, primal_dim, dual_dims):
        w = as_vector(w, primal_dim + int(np.sum(dual_dims)))
        parts = []
        pos = primal_dim
        for d in dual_dims:
            parts.append(w[pos:pos + d])
            pos += d
        return cls(w[:primal_dim], tuple(parts))


@dataclass(frozen=True)
class CocoerciveProblem:
    """Composite inclusion whose smooth part is a declared cocoercive map."""

    z: np.ndarray
    A: object
    C: CocoerciveOperator
    blocks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "z", as_vector(self.z, name="z"))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.A.dim != self.z.size or self.C.dim != self.z.size:
            raise ValueError("operator dimensions do not match z")
        for bl in self.blocks:
            if bl.L.shape[1] != self.z.size:
                raise ValueError("coupling domain does not match the primal space")
        if not (self.beta > 0):
            raise ValueError("smallest cocoercivity modulus must be positive")

    @property
    def dim(self):
        return self.z.size

    @property
    def dual_dims(self):
        return [bl.gdim for bl in self.blocks]

    @property
    def beta(self):
        moduli = [self.C.beta] + [bl.nu for bl in self.blocks]
        return min(moduli)


class CocoerciveErrors:
    """Error slots of the structured recursion.

    ``a``/``c`` perturb the primal backward and forward steps, ``b_i`` and
    ``d_i`` the per-block dual backward and forward steps.
    """

    def __init__(self, a_fn=None, c_fn=None, block_b=None, block_d=None):
        self.a_fn = a_fn
        self.c_fn = c_fn
        self.block_b = block_b
        self.block_d = block_d

    @classmethod
    def none(cls):
        return cls()

    @property
    def is_zero(self):
        return all(v is None for v in
                   (self.a_fn, self.c_fn, self.block_b, self.block_d))

    def a(self, n, dim):
        return np.zeros(dim) if self.a_fn is None else self.a_fn(n)

    def c(self, n, dim):
        return np.zeros(dim) if self.c_fn is None else self.c_fn(n)

    def b(self, i, n, dim):
        return np.zeros(dim) if self.block_b is None else self.block_b[i](n)

    def d(self, i, n, dim):
        return np.zeros(dim) if self.block_d is None else self.block_d[i](n)


def admissible_scalar_metric(p, epsilon=None, safety=0.95):
    """Largest safe common scale for scalar primal/dual metrics.

    With every metric equal to ``t * I`` the scaling condition reduces to
    ``(1 - t * S) / t >= 1 / (2 beta - epsilon)`` for the stacked coupling
    norm ``S``, i.e. ``t <= 1 / (floor + S)``; returns ``safety`` times
    that bound.
    """
    beta = p.beta
    if epsilon is None:
        epsilon = 0.9 * min(1.0, beta)
    floor = 0.0 if math.isinf(beta) else 1.0 / (2.0 * beta - epsilon)
    S = math.sqrt(sum(bl.L.norm ** 2 for bl in p.blocks))
    if floor + S <= 0.0:
        return 1.0
    return safety / (floor + S)


def kkt_residual(p, x, v):
    """Joint optimality residual at a primal-dual pair, in the unit metric.

    The max of the primal fixed-point gap
    ``||x - J_A(x - (sum_i L_i^* v_i + C x - z))||`` and each block's dual
    gap ``||v_i - J_{B_i^{-1}}(v_i + (L_i x - r_i - Dinv_i v_i))||``; zero
    exactly at solutions of the coupled inclusions.
    """
    x = as_vector(x, p.dim)
    ident = Metric.identity(p.dim)
    forward = p.C(x) - p.z
    for bl, vi in zip(p.blocks, v):
        forward = forward + bl.L.adjoint(vi)
    res = float(np.linalg.norm(x - p.A.resolvent(1.0, ident, x - forward)))
    for bl, vi in zip(p.blocks, v):
        vi = as_vector(vi, bl.gdim)
        w = vi + (bl.L(x) - bl.r - bl.Dinv(vi))
        ident_g = Metric.identity(bl.gdim)
        res = max(res, float(np.linalg.norm(
            vi - bl.B.inverse().resolvent(1.0, ident_g, w))))
    return res


def solve_cocoercive_pd(p, ms_primal, ms_dual, lam=1.0, epsilon=None,
                        errors=None, x0=None, v0=None, stop=None,
                        policy="strict", n_check=None, kkt_every=1):
    """Structured unit-step primal-dual iteration.

    Parameters
    ----------
    p : CocoerciveProblem
    ms_primal : MetricSchedule
        Primal metrics; must be monotone nondecreasing.
    ms_dual : list of MetricSchedule
        Per-block dual metrics, also nondecreasing.
    lam : float or callable
        Relaxation sequence with values in ``[epsilon, 1]``.
    epsilon : float, optional
        Slack parameter in ``(0, min(1, beta))``; defaults to 90% of that
        bound.
    stop : StoppingRule
        The solver stops once the joint KKT residual (checked every
        ``kkt_every`` iterations) falls below ``stop.tol``.

    Returns
    -------
    (x, v, trace)
    """
    stop = stop or StoppingRule()
    errors = errors or CocoerciveErrors.none()
    ms_dual = list(ms_dual)
    if len(ms_dual) != len(p.blocks):
        raise ValueError("need one dual metric schedule per block")
    beta = p.beta
    if epsilon is None:
        epsilon = 0.9 * min(1.0, beta)
    lam_fn = lam if callable(lam) else (lambda n, _l=float(lam): _l)

    meta = {
        "solver": "cocoercive_pd",
        "beta": beta,
        "epsilon": epsilon,
        "alpha": min([ms_primal.alpha] + [m.alpha for m in ms_dual]),
        "mu": max([ms_primal.mu_bound] + [m.mu_bound for m in ms_dual]),
        "assumptions": [
            "the primal inclusion has a solution (range condition asserted by caller)",
        ],
    }
    trace = SolveTrace(meta)
    report = validate_corollary62(ms_primal, ms_dual, [bl.L for bl in p.blocks],
                                  beta, epsilon,
                                  n_check=n_check or stop.max_iter + 1)
    lam_vals = [lam_fn(n) for n in range(min(stop.max_iter + 1, 1000))]
    lam_ok = all(epsilon <= l <= 1.0 for l in lam_vals)
    report.add("lambda-in-range", lam_ok,
               min(min(l - epsilon, 1.0 - l) for l in lam_vals),
               detail=f"relaxation within [{epsilon:.6g}, 1]")
    _policy_gate(report, policy, trace.metadata)

    x = (np.zeros(p.dim) if x0 is None else as_vector(x0, p.dim)).copy()
    dims = p.dual_dims
    if v0 is None:
        v = [np.zeros(d) for d in dims]
    else:
        v = [as_vector(vi, d).copy() for vi, d in zip(v0, dims)]
    inverses = [bl.B.inverse() for bl in p.blocks]
    guard = 1e12 * (1.0 + float(np.linalg.norm(x)))
    t0 = time.perf_counter_ns()

    n = 0
    residual = math.inf
    while True:
        if n % kkt_every == 0 or n >= stop.max_iter:
            residual = kkt_residual(p, x, v)
        last = (residual <= stop.tol) or (n >= stop.max_iter)
        trace.append(n=n, x=x, y=None, gamma=1.0, lam=lam_fn(n),
                     residual=residual, wall_ns=time.perf_counter_ns() - t0,
                     dual=np.concatenate(v) if v else np.zeros(0))
        if last:
            trace.terminated_reason = ("converged" if residual <= stop.tol
                                       else "max_iter")
            return x, v, trace

        U = ms_primal.metric(n)
        lam_n = lam_fn(n)
        forward = p.C(x) - p.z
        for bl, vi in zip(p.blocks, v):
            forward = forward + bl.L.adjoint(vi)
        if errors.c_fn is not None:
            forward = forward + errors.c(n, p.dim)
        pn = p.A.resolvent(1.0, U, x - U.apply(forward))
        if errors.a_fn is not None:
            pn = pn + errors.a(n, p.dim)
        y = 2.0 * pn - x
        x = x + lam_n * (pn - x) if lam_n != 1.0 else pn.copy()

        v_new = []
        for i, (bl, vi, inv) in enumerate(zip(p.blocks, v, inverses)):
            Ui = ms_dual[i].metric(n)
            inner = bl.L(y) - bl.Dinv(vi) - bl.r
            if errors.block_d is not None:
                inner = inner - errors.d(i, n, bl.gdim)
            qi = inv.resolvent(1.0, Ui, vi + Ui.apply(inner))
            if errors.block_b is not None:
                qi = qi + errors.b(i, n, bl.gdim)
            v_new.append(vi + lam_n * (qi - vi) if lam_n != 1.0 else qi)
        v = v_new

        flat = np.concatenate([x] + v)
        if not np.all(np.isfinite(flat)):
            trace.terminated_reason = "nan"
            return x, v, trace
        if float(np.linalg.norm(flat)) > guard:
            trace.terminated_reason = "diverged"
            return x, v, trace
        n += 1


# ---------------------------------------------------------------------------
# Composite minimization preset
# ---------------------------------------------------------------------------

def composite_min_problem(z, f, grad_h, blocks):
    """Problem object for ``f + sum_i (g_i smoothed by l_i)(L_i . - r_i)
    + h - <., z>``.

    ``grad_h`` is a cocoercive operator (the gradient of the smooth term),
    ``blocks`` a list of ``(g_i, smoothing, L_i, r_i)`` where ``smoothing``
    is ``None`` or a positive quadratic modulus.
    """
    from .operators import LinearMap

    built = []
    for g, smoothing, L, r in blocks:
        L = L if isinstance(L, LinearMap) else LinearMap(L)
        gdim = L.shape[0]
        Dinv = (CocoerciveOperator.zero(gdim) if smoothing is None
                else smoothing_from_quadratic(float(smoothing), gdim))
        built.append(DualBlock(L, subdifferential(g), Dinv, as_vector(r, gdim)))
    return CocoerciveProblem(as_vector(z), subdifferential(f), grad_h,
                             tuple(built))


def composite_objective(z, f, h_value, blocks, x):
    """Primal objective value of the composite minimization preset."""
    from .catalog import infimal_with_quadratic
    from .operators import LinearMap

    x = as_vector(x)
    val = f.value(x) + h_value(x) - float(np.dot(x, as_vector(z)))
    for g, smoothing, L, r in blocks:
        L = L if isinstance(L, LinearMap) else LinearMap(L)
        y = L(x) - as_vector(r)
        val += g.value(y) if smoothing is None else infimal_with_quadratic(
            g, float(smoothing), y)
    return val


def composite_dual_objective(z, f, h_conj_value, blocks, v):
    """Dual objective where the conjugate pieces are evaluable.

    ``h_conj_value`` evaluates the conjugate of the smooth term; the
    leading infimal convolution reduces to it when the nonsmooth term is
    zero, the only case supported here.  Blocks contribute
    ``g_i^*(v_i) + l_i^*(v_i) + <v_i, r_i>``.  Raises ``CatalogError``
    when a needed conjugate value is unavailable.
    """
    from .catalog import Zero
    from .operators import LinearMap

    if f is not None and not isinstance(f, Zero):
        raise CatalogError(
            "dual objective evaluable only for a zero nonsmooth term"
        )
    z = as_vector(z)
    w = z.copy()
    for (g, smoothing, L, r), vi in zip(blocks, v):
        L = L if isinstance(L, LinearMap) else LinearMap(L)
        w -= L.adjoint(vi)
    val = h_conj_value(w)
    for (g, smoothing, L, r), vi in zip(blocks, v):
        vi = as_vector(vi)
        val += g.conjugate().value(vi) + float(np.dot(vi, as_vector(r)))
        if smoothing is not None:
            val += float(np.dot(vi, vi)) / (2.0 * float(smoothing))
    return val


def solve_composite_min(z, f, grad_h, blocks, ms_primal, ms_dual, lam=1.0,
                        epsilon=None, errors=None, x0=None, v0=None,
                        stop=None, policy="strict", n_check=None,
                        kkt_every=1):
    """Composite minimization through the structured primal-dual iteration."""
    p = composite_min_problem(z, f, grad_h, blocks)
    x, v, trace = solve_cocoercive_pd(
        p, ms_primal, ms_dual, lam=lam, epsilon=epsilon, errors=errors,
        x0=x0, v0=v0, stop=stop, policy=policy, n_check=n_check,
        kkt_every=kkt_every)
    return x, v, trace


# ---------------------------------------------------------------------------
# Explicit product-space embedding (test-support path)
# ---------------------------------------------------------------------------

def assemble_product_metric_matrix(p, U_primal, U_duals):
    """Dense product-space matrix coupling the inverse metrics and couplings.

    Rows: the primal block ``[U^{-1}, -L_1^T, ..., -L_m^T]`` and one block
    ``[-L_i, U_i^{-1}]`` per dual space.  SPD exactly when the scaling
    validator's contraction condition holds.
    """
    h = p.dim
    dims = p.dual_dims
    total = h + int(np.sum(dims))
    V = np.zeros((total, total))
    V[:h, :h] = U_primal.inv_matrix
    pos = h
    for bl, Ui in zip(p.blocks, U_duals):
        d = bl.gdim
        V[pos:pos + d, pos:pos + d] = Ui.inv_matrix
        V[pos:pos + d, :h] = -bl.L.matrix
        V[:h, pos:pos + d] = -bl.L.matrix.T
        pos += d
    return V


class PDProductMetric(Metric):
    """Inverse of the explicit product matrix, keeping the structured parts."""

    __slots__ = ("primal", "duals")

    def __init__(self, p, U_primal, U_duals):
        V = assemble_product_metric_matrix(p, U_primal, U_duals)
        super().__init__(np.linalg.inv(V))
        self.primal = U_primal
        self.duals = tuple(U_duals)


def product_metric_schedule(p, ms_primal, ms_dual, mu_bound):
    """Metric schedule of the product-space embedding, for ``fb_solve``.

    The metrics are nondecreasing whenever the structured schedules are,
    so the perturbation sequence is identically zero; ``mu_bound`` comes
    from the scaling validator (the norms increase towards ``2 beta -
    epsilon``).
    """
    from .schedules import MetricSchedule

    coupling = math.sqrt(sum(bl.L.norm ** 2 for bl in p.blocks))
    alpha = 1.0 / (1.0 / min([ms_primal.alpha] + [m.alpha for m in ms_dual])
                   + coupling)
    cache = {}

    def metric_fn(n):
        key = (id(ms_primal.metric(n)),) + tuple(id(m.metric(n)) for m in ms_dual)
        got = cache.get(key)
        if got is None:
            got = PDProductMetric(p, ms_primal.metric(n),
                                  [m.metric(n) for m in ms_dual])
            cache[key] = got
        return got

    settles = [ms_primal.settled_at] + [m.settled_at for m in ms_dual]
    settled = None if any(s is None for s in settles) else max(settles)
    return MetricSchedule(
        metric_fn, lambda n: 0.0, eta_tail_sum=0.0, mu_bound=mu_bound,
        alpha=alpha, dim=p.dim + int(np.sum(p.dual_dims)),
        monotone_up_flag=False, compatibility_flag=True,
        settled_at=settled, descriptor="pd-product",
    )


def product_resolvent(p):
    """Resolvent oracle of the product-space monotone operator.

    Valid only at unit step against a :class:`PDProductMetric`; solves the
    coupled system through the structured two-stage formula (primal first,
    then each dual block against the reflected primal component).
    """
    h = p.dim
    dims = p.dual_dims
    offsets = np.cumsum([0] + dims)
    total = h + int(offsets[-1])
    inverses = [bl.B.inverse() for bl in p.blocks]

    def oracle(gamma, U, s):
        if abs(gamma - 1.0) > 1e-15:
            raise CatalogError("product resolvent is defined at unit step only")
        if not isinstance(U, PDProductMetric):
            raise CatalogError("product resolvent needs the structured metric")
        sx = s[:h]
        svs = [s[h + offsets[i]:h + offsets[i + 1]] for i in range(len(dims))]
        Un = U.primal
        forward = np.zeros(h)
        for bl, svi in zip(p.blocks, svs):
            forward += bl.L.adjoint(svi)
        px = p.A.resolvent(1.0, Un, sx - Un.apply(forward - p.z))
        out = [px]
        for bl, svi, Ui, inv in zip(p.blocks, svs, U.duals, inverses):
            arg = svi + Ui.apply(2.0 * bl.L(px) - bl.L(sx) - bl.r)
            out.append(inv.resolvent(1.0, Ui, arg))
        return np.concatenate(out)

    return ResolventOperator(total, oracle, descriptor="pd-product")


def product_forward_operator(p):
    """The product-space cocoercive map ``(x, v) -> (C x, Dinv_i v_i)``."""
    h = p.dim
    dims = p.dual_dims
    offsets = np.cumsum([0] + dims)
    total = h + int(offsets[-1])

    def fn(w):
        x = w[:h]
        parts = [p.C(x)]
        for i, bl in enumerate(p.blocks):
            parts.append(bl.Dinv(w[h + offsets[i]:h + offsets[i + 1]]))
        return np.concatenate(parts)

    return CocoerciveOperator(total, p.beta, fn, descriptor="pd-product-forward")
