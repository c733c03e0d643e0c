"""Metric, step-size, relaxation, and error sequences with hypothesis validators.

Infinite hypotheses (norm bounds over all iterations, summability of the
perturbation sequence) are certified by closed-form construction and then
re-checked on a finite prefix by the validators, which report rather than
throw; solvers decide through a strict/warn policy flag whether a failed
report blocks the run.

Schedules are pure generators of immutable objects and safe to share;
validation is read-only.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .metric import Metric, MetricError, as_vector, loewner_geq

__all__ = [
    "MetricSchedule",
    "StepSchedule",
    "ErrorSchedule",
    "HypothesisCheck",
    "ValidationReport",
    "ScheduleValidationError",
    "constant_schedule",
    "scalar_schedule",
    "perturbed_schedule",
    "increasing_schedule",
    "block_schedule",
    "constant_steps",
    "auto_steps",
    "zero_errors",
    "geometric_errors",
    "validate_theorem41",
    "validate_corollary62",
]

LOEWNER_SLACK = 1e-10


class ScheduleValidationError(RuntimeError):
    """Raised by strict-mode solvers when a hypothesis report fails."""

    def __init__(self, report):
        self.report = report
        super().__init__("schedule validation failed:\n" + report.text())


class MetricSchedule:
    """A sequence of SPD metrics with its certified perturbation budget.

    Parameters
    ----------
    metric_fn : callable
        Map from the iteration index to a :class:`Metric`.
    eta_fn : callable
        Certified per-step perturbation bound: ``(1+eta(n)) U_{n+1} >= U_n``.
    eta_tail_sum : float
        Closed-form bound on the sum of the whole eta sequence.
    mu_bound : float
        Claimed uniform bound on the metric operator norms.
    alpha : float
        Uniform lower eigenvalue bound.
    monotone_up_flag : bool
        Whether the reverse chain ``(1+nu(n)) U_n >= U_{n+1}`` is certified.
    compatibility_flag : bool
        Whether ``U_{n+1} >= U_n`` holds exactly (needed by the primal-dual
        solver with unit step size).
    settled_at : int or None
        Index from which the generator returns one fixed object, letting
        validators skip redundant work.
    """

    def __init__(self, metric_fn, eta_fn, eta_tail_sum, mu_bound, alpha, dim,
                 monotone_up_flag=False, compatibility_flag=False,
                 nu_fn=None, settled_at=None, descriptor="custom"):
        self._metric_fn = metric_fn
        self._eta_fn = eta_fn
        self.eta_tail_sum = float(eta_tail_sum)
        self.mu_bound = float(mu_bound)
        self.alpha = float(alpha)
        self.dim = dim
        self.monotone_up_flag = monotone_up_flag
        self.compatibility_flag = compatibility_flag
        self._nu_fn = nu_fn
        self.settled_at = settled_at
        self.descriptor = descriptor
        self._cache = {}

    def metric(self, n):
        if self.settled_at is not None and n >= self.settled_at:
            n = self.settled_at
        got = self._cache.get(n)
        if got is None:
            got = self._metric_fn(n)
            self._cache[n] = got
        return got

    def eta(self, n):
        if self.settled_at is not None and n >= self.settled_at:
            return 0.0
        return float(self._eta_fn(n))

    def nu(self, n):
        if self._nu_fn is None:
            return None
        if self.settled_at is not None and n >= self.settled_at:
            return 0.0
        return float(self._nu_fn(n))

    @property
    def eta_sup(self):
        """Largest perturbation factor (the sequences here are nonincreasing)."""
        return self.eta(0)


def constant_schedule(U):
    """Fixed metric; the classical single-metric setting."""
    return MetricSchedule(
        lambda n: U, lambda n: 0.0, eta_tail_sum=0.0,
        mu_bound=U.norm, alpha=U.alpha, dim=U.dim,
        monotone_up_flag=True, compatibility_flag=True,
        nu_fn=lambda n: 0.0, settled_at=0, descriptor="constant",
    )


def scalar_schedule(scale, dim):
    """Fixed scaled-identity metric."""
    return constant_schedule(Metric.scaled_identity(scale, dim))


def _default_direction(base, seed, rng_key):
    rng = np.random.default_rng([seed] + rng_key)
    if base.is_diagonal:
        d = rng.uniform(-1.0, 1.0, size=base.dim)
        d /= max(np.max(np.abs(d)), 1e-12)
        return np.diag(d)
    D = rng.normal(size=(base.dim, base.dim))
    D = 0.5 * (D + D.T)
    D /= np.linalg.norm(D, 2)
    return D


def perturbed_schedule(U_base, rho, amplitude, direction=None, vary=False, seed=0):
    """Geometrically decaying perturbation of a base metric.

    ``U_n = U_base + amplitude * rho^n * D_n`` for symmetric ``D_n`` with
    unit operator norm.  The per-step bound ``eta(n)`` is the smallest
    factor certifying the Loewner step, computed from a generalized
    eigenvalue ratio and cached; the closed-form geometric budget bounds
    its sum.  Construction fails when the perturbation could push the
    smallest eigenvalue below zero.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError("decay rate must lie in (0, 1)")
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return constant_schedule(U_base)

    if direction is not None:
        directions = [np.asarray(direction, dtype=float)]
        vary = False
    elif vary:
        directions = None
    else:
        directions = [_default_direction(U_base, seed, [0])]

    def direction_at(n):
        if directions is not None:
            return directions[0]
        return _default_direction(U_base, seed, [n])

    dir_norm = 1.0 if directions is None else float(np.linalg.norm(directions[0], 2))
    base_lmin = float(np.min(U_base.eigenvalues))
    alpha = base_lmin - amplitude * dir_norm
    if alpha <= 0:
        raise MetricError(
            "perturbation amplitude violates the uniform lower eigenvalue bound"
        )
    mu_bound = U_base.norm + amplitude * dir_norm
    # settle once the perturbation falls below double-precision resolution
    settle = int(math.ceil(math.log(1e-17 / max(amplitude, 1e-300)) / math.log(rho)))
    settle = max(settle, 1)

    def metric_fn(n):
        if n >= settle:
            return U_base
        pert = amplitude * rho ** n * direction_at(n)
        return Metric(U_base.mat + pert, alpha=alpha)

    sched = MetricSchedule(
        metric_fn, None, eta_tail_sum=amplitude * (1.0 + rho) * dir_norm / (alpha * (1.0 - rho)),
        mu_bound=mu_bound, alpha=alpha, dim=U_base.dim,
        monotone_up_flag=True, compatibility_flag=False,
        settled_at=settle, descriptor="perturbed",
    )

    def chain_factor(forward, n):
        # smallest t with (1+t) * successor >= predecessor
        a = sched.metric(n if forward else n + 1)
        b = sched.metric(n + 1 if forward else n)
        if a is b:
            return 0.0
        if a.is_diagonal and b.is_diagonal:
            ratio = float(np.max(a.diagonal / b.diagonal))
        else:
            ratio = float(scipy.linalg.eigh(a.mat, b.mat, eigvals_only=True)[-1])
        return max(0.0, ratio - 1.0)

    sched._eta_fn = lambda n: chain_factor(True, n)
    sched._nu_fn = lambda n: chain_factor(False, n)
    return sched


def increasing_schedule(U_limit, rho, amplitude, direction=None, seed=0):
    """Monotone nondecreasing metrics approaching a limit from below.

    ``U_n = U_limit - amplitude * rho^n * D`` with a fixed PSD ``D``, so
    ``U_{n+1} >= U_n`` holds exactly, as the unit-step primal-dual solver
    requires.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError("decay rate must lie in (0, 1)")
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return constant_schedule(U_limit)
    if direction is None:
        rng = np.random.default_rng([seed, 7])
        if U_limit.is_diagonal:
            D = np.diag(rng.uniform(0.2, 1.0, size=U_limit.dim))
        else:
            G = rng.normal(size=(U_limit.dim, U_limit.dim))
            D = G @ G.T
        D /= np.linalg.norm(D, 2)
    else:
        D = np.asarray(direction, dtype=float)
        if np.linalg.eigvalsh(0.5 * (D + D.T))[0] < -1e-12:
            raise ValueError("direction must be positive semidefinite")
    dir_norm = float(np.linalg.norm(D, 2))
    lim_lmin = float(np.min(U_limit.eigenvalues))
    alpha = lim_lmin - amplitude * dir_norm
    if alpha <= 0:
        raise MetricError(
            "perturbation amplitude violates the uniform lower eigenvalue bound"
        )
    settle = max(int(math.ceil(math.log(1e-17 / max(amplitude, 1e-300)) / math.log(rho))), 1)

    def metric_fn(n):
        if n >= settle:
            return U_limit
        return Metric(U_limit.mat - amplitude * rho ** n * D, alpha=alpha)

    def nu_fn(n):
        # (1+nu) U_n >= U_{n+1} with U_{n+1}-U_n = amplitude rho^n (1-rho) D
        return amplitude * rho ** n * (1.0 - rho) * dir_norm / alpha

    return MetricSchedule(
        metric_fn, lambda n: 0.0, eta_tail_sum=0.0,
        mu_bound=U_limit.norm, alpha=alpha, dim=U_limit.dim,
        monotone_up_flag=True, compatibility_flag=True,
        nu_fn=nu_fn, settled_at=settle, descriptor="increasing",
    )


def block_schedule(schedules):
    """Direct sum of metric schedules on a product space."""
    from .operators import block_metric

    schedules = list(schedules)
    settles = [s.settled_at for s in schedules]
    settled_at = None if any(s is None for s in settles) else max(settles)
    return MetricSchedule(
        lambda n: block_metric([s.metric(n) for s in schedules]),
        lambda n: max(s.eta(n) for s in schedules),
        eta_tail_sum=sum(s.eta_tail_sum for s in schedules),
        mu_bound=max(s.mu_bound for s in schedules),
        alpha=min(s.alpha for s in schedules),
        dim=sum(s.dim for s in schedules),
        monotone_up_flag=all(s.monotone_up_flag for s in schedules),
        compatibility_flag=all(s.compatibility_flag for s in schedules),
        settled_at=settled_at, descriptor="block",
    )


# ---------------------------------------------------------------------------
# Step and error schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Step sizes and relaxation factors with their slack parameter."""

    epsilon: float
    gamma_fn: object
    lambda_fn: object

    def gamma(self, n):
        return float(self.gamma_fn(n))

    def lam(self, n):
        return float(self.lambda_fn(n))


def constant_steps(epsilon, gamma, lam=1.0):
    return StepSchedule(float(epsilon), lambda n: gamma, lambda n: lam)


def auto_steps(beta, mu, gamma=None, lam=1.0, safety=0.9):
    """Near-maximal slack and an admissible step for given constants.

    ``epsilon = safety * min(1, 2 beta / (mu + 1))`` keeps the admissible
    step interval nonempty while allowing the widest relaxation range.
    """
    if not np.isfinite(beta):
        beta = 1e6  # effectively unconstrained forward term
    eps = safety * min(1.0, 2.0 * beta / (mu + 1.0))
    hi = (2.0 * beta - eps) / mu
    if gamma is None:
        gamma = max(eps, min(beta, hi))
    return constant_steps(eps, float(gamma), float(lam))


class ErrorSchedule:
    """Absolutely summable error sequences for the two inexactness slots.

    ``a(n)`` perturbs the backward (resolvent) step, ``b(n)`` the forward
    (operator evaluation) step; both budgets are closed-form sums.
    """

    def __init__(self, dim, a_fn=None, b_fn=None, a_budget=0.0, b_budget=0.0,
                 descriptor="custom"):
        self.dim = dim
        self._zero = np.zeros(dim)
        self._a_fn = a_fn
        self._b_fn = b_fn
        self.a_budget = float(a_budget)
        self.b_budget = float(b_budget)
        self.descriptor = descriptor

    @property
    def is_zero(self):
        return self._a_fn is None and self._b_fn is None

    def a(self, n):
        return self._zero if self._a_fn is None else self._a_fn(n)

    def b(self, n):
        return self._zero if self._b_fn is None else self._b_fn(n)


def zero_errors(dim):
    return ErrorSchedule(dim, descriptor="zero")


def geometric_errors(dim, total_a=1.0, total_b=1.0, rate=0.5, seed=0):
    """Seeded random directions with geometrically decaying norms.

    The norm of the n-th term is ``total * (1-rate) * rate^n``, so each
    sequence's norms sum exactly to its total.
    """
    if not (0.0 < rate < 1.0):
        raise ValueError("rate must lie in (0, 1)")

    def term(total, tag):
        def fn(n):
            scale = total * (1.0 - rate) * rate ** n
            if scale < 1e-300:
                return np.zeros(dim)
            rng = np.random.default_rng([seed, tag, n])
            v = rng.normal(size=dim)
            return (scale / np.linalg.norm(v)) * v
        return fn

    return ErrorSchedule(
        dim,
        a_fn=term(total_a, 0) if total_a > 0 else None,
        b_fn=term(total_b, 1) if total_b > 0 else None,
        a_budget=total_a, b_budget=total_b, descriptor="geometric",
    )


# ---------------------------------------------------------------------------
# Validation reports
# ---------------------------------------------------------------------------

@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    margin: float
    worst_n: int = None
    detail: str = ""

    def line(self):
        mark = "pass" if self.passed else "FAIL"
        where = "" if self.worst_n is None else f" at n={self.worst_n}"
        detail = f" ({self.detail})" if self.detail else ""
        return f"[{mark}] {self.name}: worst margin {self.margin:.3e}{where}{detail}"


@dataclass
class ValidationReport:
    title: str
    checks: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def add(self, *args, **kwargs):
        self.checks.append(HypothesisCheck(*args, **kwargs))

    def text(self):
        head = f"{self.title}: {'all hypotheses hold' if self.passed else 'FAILED'}"
        return "\n".join([head] + ["  " + c.line() for c in self.checks])


def _interval_check(report, name, values_fn, lo, hi, n_check):
    worst = math.inf
    worst_n = None
    for n in range(n_check):
        v = values_fn(n)
        m = min(v - lo, hi - v)
        if m < worst:
            worst, worst_n = m, n
    report.add(name, worst >= 0.0, worst, worst_n,
               detail=f"interval [{lo:.6g}, {hi:.6g}]")


def _chain_margin(pred, succ, factor):
    """Smallest eigenvalue of ``(1+factor) succ - pred``."""
    if pred is succ and factor >= 0.0:
        return factor * pred.alpha
    mat = (1.0 + factor) * succ.mat - pred.mat
    d = np.diag(mat)
    if np.count_nonzero(mat - np.diag(d)) == 0:
        return float(np.min(d))
    return float(np.linalg.eigvalsh(mat)[0])


def validate_theorem41(ms, ss, beta, n_check=200):
    """Check every hypothesis of the variable-metric splitting theorem.

    Reports pass/fail with the worst margin for each condition over the
    prefix ``n < n_check``; never raises.
    """
    rep = ValidationReport("forward-backward hypotheses")
    mu = ms.mu_bound
    eps = ss.epsilon
    eps_hi = min(1.0, 2.0 * beta / (mu + 1.0)) if np.isfinite(beta) else 1.0
    rep.add("epsilon-in-range", 0.0 < eps <= eps_hi, min(eps, eps_hi - eps),
            detail=f"0 < {eps:.6g} <= {eps_hi:.6g}")
    gamma_hi = (2.0 * beta - eps) / mu if np.isfinite(beta) else math.inf
    _interval_check(rep, "gamma-in-range", ss.gamma, eps, gamma_hi, n_check)
    _interval_check(rep, "lambda-in-range", ss.lam, eps, 1.0, n_check)

    checked = set()
    norm_worst, norm_n = math.inf, None
    low_worst, low_n = math.inf, None
    chain_worst, chain_n = math.inf, None
    for n in range(n_check):
        U = ms.metric(n)
        if id(U) not in checked:
            checked.add(id(U))
            m = mu - U.norm
            if m < norm_worst:
                norm_worst, norm_n = m, n
            m = float(np.min(U.eigenvalues)) - ms.alpha
            if m < low_worst:
                low_worst, low_n = m, n
        Unext = ms.metric(n + 1)
        if U is not Unext or chain_n is None:
            m = _chain_margin(U, Unext, ms.eta(n))
            if m < chain_worst:
                chain_worst, chain_n = m, n
    rep.add("metric-norm-bound", norm_worst >= -1e-12 * max(1.0, mu), norm_worst, norm_n,
            detail=f"sup norm <= {mu:.6g}")
    rep.add("metric-lower-bound", low_worst >= -1e-10 * max(1.0, ms.alpha), low_worst, low_n,
            detail=f"eigenvalues >= {ms.alpha:.6g}")
    rep.add("loewner-chain", chain_worst >= -LOEWNER_SLACK, chain_worst, chain_n,
            detail="(1+eta_n) U_{n+1} >= U_n")
    rep.add("eta-summable", np.isfinite(ms.eta_tail_sum), ms.eta_tail_sum,
            detail=f"closed-form tail sum {ms.eta_tail_sum:.6g}")
    return rep


def _coupling_norm(U_dual, L, U_primal):
    """Largest singular value of ``sqrt(U_dual) L sqrt(U_primal)``."""
    mat = U_dual.sqrt().mat @ L.matrix @ U_primal.sqrt().mat
    return float(np.linalg.norm(mat, 2))


def validate_corollary62(primal_ms, dual_ms, Ls, beta, epsilon, n_check=200):
    """Validate the unit-step primal-dual scaling conditions.

    Computes the coupling contraction ``delta_n`` and the induced lower
    bound ``zeta_n`` for ``n < n_check``, checking ``delta_n > 0`` and
    ``zeta_n >= 1/(2 beta - epsilon)``; monotonicity of every metric
    sequence is verified on the same prefix.  Returns the report with the
    ``delta`` and ``zeta`` sequences attached.
    """
    rep = ValidationReport("primal-dual scaling hypotheses")
    dual_ms = list(dual_ms)
    Ls = list(Ls)
    rep.add("epsilon-in-range", 0.0 < epsilon < min(1.0, beta),
            min(epsilon, min(1.0, beta) - epsilon),
            detail=f"0 < {epsilon:.6g} < {min(1.0, beta):.6g}")

    for label, ms in [("primal", primal_ms)] + [
            (f"dual[{i}]", m) for i, m in enumerate(dual_ms)]:
        worst, worst_n = math.inf, None
        for n in range(n_check):
            U, Unext = ms.metric(n), ms.metric(n + 1)
            m = _chain_margin(U, Unext, 0.0)
            if m < worst:
                worst, worst_n = m, n
            if U is Unext:
                break
        rep.add(f"metric-monotone-{label}", worst >= -LOEWNER_SLACK, worst, worst_n,
                detail="U_{n+1} >= U_n")

    floor = 1.0 / (2.0 * beta - epsilon)
    delta = np.empty(n_check)
    zeta = np.empty(n_check)
    cache = {}
    for n in range(n_check):
        Up = primal_ms.metric(n)
        Uds = [ms.metric(n) for ms in dual_ms]
        key = (id(Up),) + tuple(id(U) for U in Uds)
        got = cache.get(key)
        if got is None:
            if Ls:
                total = sum(_coupling_norm(Ud, L, Up) ** 2 for Ud, L in zip(Uds, Ls))
                d = 1.0 / math.sqrt(total) - 1.0 if total > 0 else math.inf
            else:
                d = math.inf
            max_norm = max([Up.norm] + [U.norm for U in Uds])
            if math.isinf(d):
                z = 1.0 / max_norm
            elif d <= -1.0:
                z = -math.inf
            else:
                z = d / ((1.0 + d) * max_norm)
            got = (d, z)
            cache[key] = got
        delta[n], zeta[n] = got

    dmin = float(np.min(delta))
    n_dmin = int(np.argmin(delta))
    rep.add("delta-positive", dmin > 0.0, dmin, n_dmin,
            detail="coupling contraction; nonpositive means the metrics are "
                   "too large for the coupling maps")
    zmin = float(np.min(zeta))
    n_zmin = int(np.argmin(zeta))
    rep.add("zeta-lower-bound", zmin >= floor, zmin - floor, n_zmin,
            detail=f"zeta_n >= {floor:.6g}")
    rep.extras["delta"] = delta
    rep.extras["zeta"] = zeta
    return rep
