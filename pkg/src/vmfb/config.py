"""Strict experiment-config schema and object builders for the CLI runner.

Configs are JSON text with a closed schema: unknown fields are rejected
with the offending path, every vector/matrix is either an inline row-major
list or a ``{"file": name}`` reference to a whitespace-separated text file
resolved against the config's directory, and parse -> serialize -> parse is
the identity on the normalized form.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import catalog as cat
from . import cocoercive_duality as coco
from . import operators as ops
from . import schedules as sch
from .forward_backward import FBProblem, StoppingRule, fb_solve
from .metric import Metric
from .strong_duality import (
    solve_best_approximation,
    solve_strong_duality,
    strongly_convex_problem,
)

__all__ = ["ConfigError", "ExperimentConfig", "Experiment"]

SOLVERS = ("fb", "strong_pd", "cocoercive_pd")


class ConfigError(ValueError):
    """Config parse/validation failure, carrying the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _check_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}", "unknown field (strict schema)")
    for key in required:
        if key not in obj:
            raise ConfigError(path, f"missing required field '{key}'")


def _number(obj, path, positive=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, "expected a number")
    v = float(obj)
    if positive and not v > 0:
        raise ConfigError(path, "must be positive")
    return v


def _integer(obj, path, minimum=None):
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigError(path, "expected an integer")
    if minimum is not None and obj < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return obj


class _Ctx:
    """Carries the config directory for file-referenced arrays."""

    def __init__(self, base_dir):
        self.base_dir = base_dir

    def load_file(self, name, path):
        full = os.path.join(self.base_dir, name)
        if not os.path.exists(full):
            raise ConfigError(path, f"referenced file not found: {full}")
        try:
            return np.loadtxt(full, ndmin=1)
        except Exception as exc:
            raise ConfigError(path, f"failed to load {full}: {exc}") from exc


def _vector(obj, ctx, path):
    if isinstance(obj, dict):
        _check_keys(obj, path, ("file",))
        return np.atleast_1d(ctx.load_file(obj["file"], path).ravel())
    if not isinstance(obj, list):
        raise ConfigError(path, "expected a list of numbers or a file reference")
    try:
        arr = np.array([float(v) for v in obj])
    except (TypeError, ValueError):
        raise ConfigError(path, "entries must be numbers") from None
    return arr


def _matrix(obj, ctx, path):
    if isinstance(obj, dict):
        _check_keys(obj, path, ("file",))
        arr = ctx.load_file(obj["file"], path)
        return np.atleast_2d(arr)
    if not isinstance(obj, list) or not obj or not isinstance(obj[0], list):
        raise ConfigError(path, "expected a list of rows or a file reference")
    try:
        return np.array([[float(v) for v in row] for row in obj])
    except (TypeError, ValueError):
        raise ConfigError(path, "entries must be numbers") from None


# ---------------------------------------------------------------------------
# Descriptor builders
# ---------------------------------------------------------------------------

def _build_set(obj, ctx, path):
    _check_keys(obj, path, ("kind",),
                ("normal", "offset", "lower", "upper", "matrix", "rhs",
                 "center", "radius", "point"))
    kind = obj["kind"]
    if kind == "halfspace":
        _check_keys(obj, path, ("kind", "normal", "offset"))
        return cat.HalfSpace(_vector(obj["normal"], ctx, f"{path}.normal"),
                             _number(obj["offset"], f"{path}.offset"))
    if kind == "box":
        _check_keys(obj, path, ("kind", "lower", "upper"))
        return cat.Box(_vector(obj["lower"], ctx, f"{path}.lower"),
                       _vector(obj["upper"], ctx, f"{path}.upper"))
    if kind == "affine":
        _check_keys(obj, path, ("kind", "matrix", "rhs"))
        return cat.AffineSubspace(_matrix(obj["matrix"], ctx, f"{path}.matrix"),
                                  _vector(obj["rhs"], ctx, f"{path}.rhs"))
    if kind == "ball":
        _check_keys(obj, path, ("kind", "center", "radius"))
        return cat.Ball(_vector(obj["center"], ctx, f"{path}.center"),
                        _number(obj["radius"], f"{path}.radius"))
    if kind == "point":
        _check_keys(obj, path, ("kind", "point"))
        return cat.Singleton(_vector(obj["point"], ctx, f"{path}.point"))
    raise ConfigError(f"{path}.kind", f"unknown set kind {kind!r}")


def _build_phi(obj, path):
    _check_keys(obj, path, ("kind",), ("xi", "curv", "slope"))
    kind = obj["kind"]
    if kind == "abs":
        return cat.AbsValue()
    if kind == "halfline":
        return cat.HalfLine(_number(obj.get("xi", 0.0), f"{path}.xi"))
    if kind == "quadratic":
        return cat.ScalarQuadratic(_number(obj.get("curv", 1.0), f"{path}.curv"),
                                   float(obj.get("slope", 0.0)))
    raise ConfigError(f"{path}.kind", f"unknown scalar kind {kind!r}")


def _build_function(obj, ctx, path):
    _check_keys(obj, path, ("kind",),
                ("dim", "weight", "matrix", "linear", "constant", "terms",
                 "set", "phi", "direction"))
    kind = obj["kind"]
    if kind == "zero":
        _check_keys(obj, path, ("kind", "dim"))
        return cat.Zero(_integer(obj["dim"], f"{path}.dim", 1))
    if kind == "l1":
        _check_keys(obj, path, ("kind", "dim"), ("weight",))
        dim = _integer(obj["dim"], f"{path}.dim", 1)
        w = obj.get("weight", 1.0)
        weight = _vector(w, ctx, f"{path}.weight") if isinstance(w, (list, dict)) \
            else _number(w, f"{path}.weight", positive=True)
        return cat.L1Norm(dim, weight)
    if kind == "quadratic":
        _check_keys(obj, path, ("kind", "matrix"), ("linear", "constant"))
        A = _matrix(obj["matrix"], ctx, f"{path}.matrix")
        u = _vector(obj["linear"], ctx, f"{path}.linear") if "linear" in obj else None
        return cat.Quadratic(A, u, float(obj.get("constant", 0.0)))
    if kind == "least_squares":
        _check_keys(obj, path, ("kind", "terms"))
        terms = []
        for i, t in enumerate(obj["terms"]):
            tpath = f"{path}.terms[{i}]"
            _check_keys(t, tpath, ("matrix", "target"), ("weight",))
            terms.append((
                _number(t.get("weight", 1.0), f"{tpath}.weight", positive=True),
                _matrix(t["matrix"], ctx, f"{tpath}.matrix"),
                _vector(t["target"], ctx, f"{tpath}.target"),
            ))
        return cat.least_squares(terms)
    if kind == "indicator":
        _check_keys(obj, path, ("kind", "set"))
        return cat.Indicator(_build_set(obj["set"], ctx, f"{path}.set"))
    if kind == "support":
        _check_keys(obj, path, ("kind", "set"))
        return cat.Support(_build_set(obj["set"], ctx, f"{path}.set"))
    if kind == "euclidean_norm":
        _check_keys(obj, path, ("kind", "dim"), ("weight",))
        return cat.EuclideanNorm(_integer(obj["dim"], f"{path}.dim", 1),
                                 _number(obj.get("weight", 1.0), f"{path}.weight",
                                         positive=True))
    if kind == "scalar_composition":
        _check_keys(obj, path, ("kind", "phi", "direction"))
        return cat.ScalarComposition(_build_phi(obj["phi"], f"{path}.phi"),
                                     _vector(obj["direction"], ctx,
                                             f"{path}.direction"))
    raise ConfigError(f"{path}.kind", f"unknown function kind {kind!r}")


def _build_cocoercive(obj, ctx, path):
    _check_keys(obj, path, ("kind",),
                ("dim", "target", "matrix", "linear", "offset", "rho"))
    kind = obj["kind"]
    if kind == "zero":
        _check_keys(obj, path, ("kind", "dim"))
        return ops.CocoerciveOperator.zero(_integer(obj["dim"], f"{path}.dim", 1))
    if kind == "translation":
        _check_keys(obj, path, ("kind", "target"))
        return ops.CocoerciveOperator.translation(
            _vector(obj["target"], ctx, f"{path}.target"))
    if kind == "least_squares_gradient":
        _check_keys(obj, path, ("kind", "matrix", "target"))
        return ops.CocoerciveOperator.least_squares_gradient(
            _matrix(obj["matrix"], ctx, f"{path}.matrix"),
            _vector(obj["target"], ctx, f"{path}.target"))
    if kind == "quadratic_gradient":
        _check_keys(obj, path, ("kind", "matrix"), ("linear",))
        u = _vector(obj["linear"], ctx, f"{path}.linear") if "linear" in obj else None
        return ops.CocoerciveOperator.gradient_of_quadratic(
            _matrix(obj["matrix"], ctx, f"{path}.matrix"), u)
    if kind == "affine_monotone":
        _check_keys(obj, path, ("kind", "matrix"), ("offset",))
        u = _vector(obj["offset"], ctx, f"{path}.offset") if "offset" in obj else None
        return ops.CocoerciveOperator.affine_monotone(
            _matrix(obj["matrix"], ctx, f"{path}.matrix"), u)
    if kind == "scaled_identity":
        _check_keys(obj, path, ("kind", "rho", "dim"))
        return ops.CocoerciveOperator.scaled_identity(
            _number(obj["rho"], f"{path}.rho", positive=True),
            _integer(obj["dim"], f"{path}.dim", 1))
    raise ConfigError(f"{path}.kind", f"unknown cocoercive kind {kind!r}")


def _build_resolvent(obj, ctx, path):
    _check_keys(obj, path, ("kind",), ("dim", "function", "set", "matrix", "offset"))
    kind = obj["kind"]
    if kind == "zero":
        _check_keys(obj, path, ("kind", "dim"))
        return ops.zero_operator(_integer(obj["dim"], f"{path}.dim", 1))
    if kind == "subdifferential":
        _check_keys(obj, path, ("kind", "function"))
        return ops.subdifferential(
            _build_function(obj["function"], ctx, f"{path}.function"))
    if kind == "normal_cone":
        _check_keys(obj, path, ("kind", "set"))
        return ops.normal_cone(_build_set(obj["set"], ctx, f"{path}.set"))
    if kind == "linear_monotone":
        _check_keys(obj, path, ("kind", "matrix"), ("offset",))
        u = _vector(obj["offset"], ctx, f"{path}.offset") if "offset" in obj else None
        return ops.linear_monotone(_matrix(obj["matrix"], ctx, f"{path}.matrix"), u)
    raise ConfigError(f"{path}.kind", f"unknown operator kind {kind!r}")


def _build_base_metric(obj, ctx, path):
    _check_keys(obj, path, (), ("matrix", "diagonal", "scale", "dim"))
    if "matrix" in obj:
        _check_keys(obj, path, ("matrix",))
        return Metric(_matrix(obj["matrix"], ctx, f"{path}.matrix"))
    if "diagonal" in obj:
        _check_keys(obj, path, ("diagonal",))
        return Metric.from_diagonal(_vector(obj["diagonal"], ctx, f"{path}.diagonal"))
    if "scale" in obj and "dim" in obj:
        _check_keys(obj, path, ("scale", "dim"))
        return Metric.scaled_identity(_number(obj["scale"], f"{path}.scale", True),
                                      _integer(obj["dim"], f"{path}.dim", 1))
    raise ConfigError(path, "metric needs 'matrix', 'diagonal', or 'scale'+'dim'")


def _build_metric_schedule(obj, ctx, path, default_seed):
    _check_keys(obj, path, ("kind",),
                ("dim", "matrix", "diagonal", "scale", "base", "limit",
                 "rate", "amplitude", "seed", "vary"))
    kind = obj["kind"]
    if kind == "identity":
        _check_keys(obj, path, ("kind", "dim"))
        return sch.constant_schedule(Metric.identity(
            _integer(obj["dim"], f"{path}.dim", 1)))
    if kind == "scalar":
        _check_keys(obj, path, ("kind", "scale", "dim"))
        return sch.scalar_schedule(_number(obj["scale"], f"{path}.scale", True),
                                   _integer(obj["dim"], f"{path}.dim", 1))
    if kind == "constant":
        sub = {k: v for k, v in obj.items() if k != "kind"}
        return sch.constant_schedule(_build_base_metric(sub, ctx, path))
    if kind == "perturbed":
        _check_keys(obj, path, ("kind", "base", "rate", "amplitude"),
                    ("seed", "vary"))
        base = _build_base_metric(obj["base"], ctx, f"{path}.base")
        return sch.perturbed_schedule(
            base, _number(obj["rate"], f"{path}.rate", True),
            _number(obj["amplitude"], f"{path}.amplitude"),
            vary=bool(obj.get("vary", False)),
            seed=_integer(obj.get("seed", default_seed), f"{path}.seed"))
    if kind == "increasing":
        _check_keys(obj, path, ("kind", "limit", "rate", "amplitude"), ("seed",))
        limit = _build_base_metric(obj["limit"], ctx, f"{path}.limit")
        return sch.increasing_schedule(
            limit, _number(obj["rate"], f"{path}.rate", True),
            _number(obj["amplitude"], f"{path}.amplitude"),
            seed=_integer(obj.get("seed", default_seed), f"{path}.seed"))
    raise ConfigError(f"{path}.kind", f"unknown metric schedule kind {kind!r}")


def _build_errors(obj, ctx, path, dim, default_seed):
    if obj is None:
        return sch.zero_errors(dim)
    _check_keys(obj, path, ("kind",), ("total_a", "total_b", "rate", "seed"))
    kind = obj["kind"]
    if kind == "zero":
        _check_keys(obj, path, ("kind",))
        return sch.zero_errors(dim)
    if kind == "geometric":
        _check_keys(obj, path, ("kind",), ("total_a", "total_b", "rate", "seed"))
        return sch.geometric_errors(
            dim,
            total_a=_number(obj.get("total_a", 1.0), f"{path}.total_a"),
            total_b=_number(obj.get("total_b", 1.0), f"{path}.total_b"),
            rate=_number(obj.get("rate", 0.5), f"{path}.rate", True),
            seed=_integer(obj.get("seed", default_seed), f"{path}.seed"))
    raise ConfigError(f"{path}.kind", f"unknown error kind {kind!r}")


def _build_steps(obj, path, beta, mu):
    if obj is None:
        return sch.auto_steps(beta, mu)
    _check_keys(obj, path, (), ("epsilon", "gamma", "lambda"))
    eps = obj.get("epsilon", "auto")
    gam = obj.get("gamma", "auto")
    lam = _number(obj.get("lambda", 1.0), f"{path}.lambda", positive=True)
    if eps == "auto":
        eps_val = 0.9 * min(1.0, 2.0 * beta / (mu + 1.0)) if np.isfinite(beta) else 0.9
    else:
        eps_val = _number(eps, f"{path}.epsilon", positive=True)
    if gam == "auto":
        hi = (2.0 * beta - eps_val) / mu if np.isfinite(beta) else 1.0
        gam_val = max(eps_val, min(beta if np.isfinite(beta) else 1.0, hi))
    else:
        gam_val = _number(gam, f"{path}.gamma", positive=True)
    return sch.constant_steps(eps_val, gam_val, lam)


# ---------------------------------------------------------------------------
# Experiment assembly
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    x: np.ndarray
    trace: object
    converged: bool
    reason: str
    elapsed_s: float
    extra: dict = field(default_factory=dict)


class Experiment:
    """Built experiment: validate without running, or run to completion."""

    def __init__(self, kind, runner, validator, meta):
        self.kind = kind
        self._runner = runner
        self._validator = validator
        self.meta = meta

    def validate(self):
        return self._validator()

    def run(self):
        import time
        t0 = time.perf_counter()
        result = self._runner()
        result.elapsed_s = time.perf_counter() - t0
        return result


class ExperimentConfig:
    """Parsed, normalized experiment description."""

    def __init__(self, data, base_dir="."):
        self.base_dir = base_dir
        self.data = self._normalize(data)

    # -- parsing ------------------------------------------------------

    @classmethod
    def from_text(cls, text, base_dir="."):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno} col {exc.colno}", exc.msg) from exc
        return cls(data, base_dir=base_dir)

    @classmethod
    def from_path(cls, path):
        with open(path) as fh:
            text = fh.read()
        return cls.from_text(text, base_dir=os.path.dirname(os.path.abspath(path)))

    def _normalize(self, data):
        _check_keys(data, "config", ("solver", "problem", "schedules"),
                    ("seed", "policy", "stop", "outputs"))
        if data["solver"] not in SOLVERS:
            raise ConfigError("config.solver",
                              f"must be one of {', '.join(SOLVERS)}")
        seed = _integer(data.get("seed", 0), "config.seed")
        policy = data.get("policy", "strict")
        if policy not in ("strict", "warn"):
            raise ConfigError("config.policy", "must be 'strict' or 'warn'")
        stop = data.get("stop", {})
        _check_keys(stop, "config.stop", (), ("tol", "max_iter"))
        outputs = data.get("outputs", {})
        _check_keys(outputs, "config.outputs", (), ("trace", "summary"))
        norm = {
            "solver": data["solver"],
            "seed": seed,
            "policy": policy,
            "stop": {
                "tol": _number(stop.get("tol", 1e-8), "config.stop.tol", True),
                "max_iter": _integer(stop.get("max_iter", 100_000),
                                     "config.stop.max_iter", 1),
            },
            "outputs": {
                "trace": outputs.get("trace", "trace.csv"),
                "summary": outputs.get("summary", "summary.json"),
            },
            "problem": data["problem"],
            "schedules": data["schedules"],
        }
        # building validates the nested descriptors eagerly
        self._build_from(norm)
        return norm

    def to_dict(self):
        return json.loads(json.dumps(self.data))

    def serialize(self):
        return json.dumps(self.data, indent=2, sort_keys=True)

    @property
    def solver(self):
        return self.data["solver"]

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def outputs(self):
        return self.data["outputs"]

    def stopping(self, max_iter_override=None):
        stop = self.data["stop"]
        return StoppingRule(stop["tol"],
                            max_iter_override or stop["max_iter"])

    # -- building -----------------------------------------------------

    def build(self, policy_override=None, max_iter_override=None):
        return self._build_from(self.data, policy_override, max_iter_override)

    def _build_from(self, data, policy_override=None, max_iter_override=None):
        ctx = _Ctx(self.base_dir)
        solver = data["solver"]
        policy = policy_override or data["policy"]
        seed = data["seed"]
        stop = StoppingRule(data["stop"]["tol"],
                            max_iter_override or data["stop"]["max_iter"])
        if solver == "fb":
            return self._build_fb(data, ctx, policy, seed, stop)
        if solver == "strong_pd":
            return self._build_strong(data, ctx, policy, seed, stop)
        return self._build_cocoercive_pd(data, ctx, policy, seed, stop)

    def _build_fb(self, data, ctx, policy, seed, stop):
        prob = data["problem"]
        _check_keys(prob, "config.problem", ("operator", "forward", "x0"),
                    ("dim", "reference"))
        A = _build_resolvent(prob["operator"], ctx, "config.problem.operator")
        B = _build_cocoercive(prob["forward"], ctx, "config.problem.forward")
        x0 = _vector(prob["x0"], ctx, "config.problem.x0")
        z_ref = (_vector(prob["reference"], ctx, "config.problem.reference")
                 if "reference" in prob else None)
        problem = FBProblem(A, B)
        schedules = data["schedules"]
        _check_keys(schedules, "config.schedules", ("metric",),
                    ("steps", "errors"))
        ms = _build_metric_schedule(schedules["metric"], ctx,
                                    "config.schedules.metric", seed)
        ss = _build_steps(schedules.get("steps"), "config.schedules.steps",
                          B.beta, ms.mu_bound)
        es = _build_errors(schedules.get("errors"), ctx,
                           "config.schedules.errors", problem.dim, seed)

        def validator():
            return sch.validate_theorem41(ms, ss, B.beta,
                                          n_check=stop.max_iter + 1)

        def runner():
            x, trace = fb_solve(problem, ms, ss, es=es, x0=x0, stop=stop,
                                z_ref=z_ref, policy=policy)
            return RunResult(x, trace, trace.terminated_reason == "converged",
                             trace.terminated_reason, 0.0)

        return Experiment("fb", runner, validator,
                          {"dim": problem.dim, "beta": B.beta})

    def _parse_blocks(self, blocks, ctx, path, need):
        out = []
        for i, b in enumerate(blocks):
            bpath = f"{path}[{i}]"
            if need == "function":
                _check_keys(b, bpath, ("g", "L", "r"), ("smoothing",))
                g = _build_function(b["g"], ctx, f"{bpath}.g")
                smoothing = b.get("smoothing")
                if smoothing is not None:
                    smoothing = _number(smoothing, f"{bpath}.smoothing", True)
                out.append((g, smoothing,
                            _matrix(b["L"], ctx, f"{bpath}.L"),
                            _vector(b["r"], ctx, f"{bpath}.r")))
            else:
                _check_keys(b, bpath, ("set", "L", "r"))
                out.append((_build_set(b["set"], ctx, f"{bpath}.set"),
                            _matrix(b["L"], ctx, f"{bpath}.L"),
                            _vector(b["r"], ctx, f"{bpath}.r")))
        return out

    def _build_strong(self, data, ctx, policy, seed, stop):
        prob = data["problem"]
        _check_keys(prob, "config.problem", ("variant", "z", "blocks"),
                    ("f", "set", "v0"))
        variant = prob["variant"]
        z = _vector(prob["z"], ctx, "config.problem.z")
        schedules = data["schedules"]
        _check_keys(schedules, "config.schedules", ("dual_metrics",), ("steps",))
        dual_ms = [
            _build_metric_schedule(m, ctx, f"config.schedules.dual_metrics[{i}]", seed)
            for i, m in enumerate(schedules["dual_metrics"])]

        if variant == "min":
            if "f" not in prob:
                raise ConfigError("config.problem", "variant 'min' needs 'f'")
            f = _build_function(prob["f"], ctx, "config.problem.f")
            blocks = self._parse_blocks(prob["blocks"], ctx,
                                        "config.problem.blocks", "function")
            p = strongly_convex_problem(z, f, blocks)
            from .strong_duality import beta_dual
            beta = beta_dual(p)
            prod = sch.block_schedule(dual_ms)
            ss = _build_steps(schedules.get("steps"), "config.schedules.steps",
                              beta, prod.mu_bound)

            def validator():
                return sch.validate_theorem41(prod, ss, beta,
                                              n_check=stop.max_iter + 1)

            def runner():
                x, v, trace = solve_strong_duality(p, dual_ms, ss=ss, stop=stop,
                                                   policy=policy)
                return RunResult(x, trace,
                                 trace.terminated_reason == "converged",
                                 trace.terminated_reason, 0.0, {"v": v})

            return Experiment("strong_pd", runner, validator,
                              {"dim": p.dim, "beta": beta})

        if variant == "best_approximation":
            if "set" not in prob:
                raise ConfigError("config.problem",
                                  "variant 'best_approximation' needs 'set'")
            C = _build_set(prob["set"], ctx, "config.problem.set")
            blocks = self._parse_blocks(prob["blocks"], ctx,
                                        "config.problem.blocks", "set")

            def validator():
                from .schedules import ValidationReport
                mu = max(ms.mu_bound for ms in dual_ms)
                coupling = sum(np.linalg.norm(L, 2) ** 2 for _, L, _ in blocks)
                rep = ValidationReport("best-approximation step condition")
                rep.add("step-norm-condition", mu * coupling < 2.0,
                        2.0 - mu * coupling,
                        detail="(max_i sup_n ||U_{i,n}||) * sum ||L_i||^2 < 2")
                return rep

            def runner():
                x, trace = solve_best_approximation(z, C, blocks, dual_ms,
                                                    stop=stop, policy=policy)
                return RunResult(x, trace,
                                 trace.terminated_reason == "converged",
                                 trace.terminated_reason, 0.0)

            return Experiment("strong_pd", runner, validator, {"dim": z.size})

        raise ConfigError("config.problem.variant",
                          f"unknown variant {variant!r}")

    def _build_cocoercive_pd(self, data, ctx, policy, seed, stop):
        prob = data["problem"]
        _check_keys(prob, "config.problem", ("z", "f", "h", "blocks"),
                    ("x0", "v0"))
        z = _vector(prob["z"], ctx, "config.problem.z")
        f = _build_function(prob["f"], ctx, "config.problem.f")
        grad_h = _build_cocoercive(prob["h"], ctx, "config.problem.h")
        blocks = self._parse_blocks(prob["blocks"], ctx,
                                    "config.problem.blocks", "function")
        p = coco.composite_min_problem(z, f, grad_h, blocks)
        x0 = (_vector(prob["x0"], ctx, "config.problem.x0")
              if "x0" in prob else None)

        schedules = data["schedules"]
        _check_keys(schedules, "config.schedules",
                    ("primal_metric", "dual_metrics"), ("lambda", "epsilon"))
        ms_p = _build_metric_schedule(schedules["primal_metric"], ctx,
                                      "config.schedules.primal_metric", seed)
        ms_d = [
            _build_metric_schedule(m, ctx, f"config.schedules.dual_metrics[{i}]", seed)
            for i, m in enumerate(schedules["dual_metrics"])]
        lam = _number(schedules.get("lambda", 1.0), "config.schedules.lambda", True)
        eps = schedules.get("epsilon", "auto")
        if eps == "auto":
            eps = 0.9 * min(1.0, p.beta) if np.isfinite(p.beta) else 0.9
        else:
            eps = _number(eps, "config.schedules.epsilon", positive=True)

        def validator():
            rep = sch.validate_corollary62(ms_p, ms_d,
                                           [bl.L for bl in p.blocks],
                                           p.beta, eps,
                                           n_check=stop.max_iter + 1)
            return rep

        def runner():
            x, v, trace = coco.solve_cocoercive_pd(
                p, ms_p, ms_d, lam=lam, epsilon=eps, x0=x0, stop=stop,
                policy=policy)
            return RunResult(x, trace, trace.terminated_reason == "converged",
                             trace.terminated_reason, 0.0, {"v": v})

        return Experiment("cocoercive_pd", runner, validator,
                          {"dim": p.dim, "beta": p.beta})
