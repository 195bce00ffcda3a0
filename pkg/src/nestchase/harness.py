"""Episode runner, offline optimum and competitive-ratio reports.

``run_episode`` drives an adversary and a chaser in lockstep and records a
:class:`Trace`; ``competitive_report`` turns a trace into a :class:`Report`
with every bound check that applies to the instance.  Both are
deterministic given the config seeds.
"""
from __future__ import annotations

import copy
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chaser import make_chaser
from .config import ConfigError, EpisodeConfig, build_stream, parse_config
from .geom import (
    ConvexBody,
    GeometryError,
    NormSpec,
    lp_norm,
    max_violation,
    project,
    support_batch,
)
from .selector import (
    SupportCache,
    _budget_from_values,
    antipodal_directions,
    hausdorff_nested,
    mean_steiner_budget,
)

TRACE_SCHEMA = "nestchase.trace/1"
REPORT_SCHEMA = "nestchase.report/1"
SWEEP_SCHEMA = "nestchase.sweep/1"
RATIO_FLOOR = 1e-9

TRACE_COLUMNS = ("step", "cost", "cost_l2", "extra_l2", "lambda", "lambda_stderr", "cut",
                 "cuts", "sampler_kept", "steiner_mc_err", "violation")


class EpisodeError(RuntimeError):
    """A module error raised mid-episode, with the step index and state."""

    def __init__(self, step, state, cause):
        self.step = step
        self.state = state
        self.cause = cause
        super().__init__(f"episode aborted at step {step}: {type(cause).__name__}: {cause}")


def _f(v):
    return repr(float(v))


@dataclass
class StepRecord:
    step: int
    played: np.ndarray
    cost: float  # episode norm
    cost_l2: float
    extra_l2: float = 0.0  # internal charge reported by the chaser, not movement
    lam: float = 0.0
    lam_stderr: float = 0.0
    cut: bool = False
    cuts: int = 0
    sampler_kept: float = float("nan")
    steiner_mc_err: float = 0.0
    violation: float = 0.0


@dataclass
class Trace:
    x0: np.ndarray
    norm: NormSpec
    steps: list = field(default_factory=list)
    stream: dict | None = None  # materialized request sequence
    chaser_kind: str = ""
    adversary_kind: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def T(self):
        return len(self.steps)

    @property
    def total_cost(self):
        return float(math.fsum(s.cost for s in self.steps))

    @property
    def total_cost_l2(self):
        return float(math.fsum(s.cost_l2 for s in self.steps))

    @property
    def total_extra_l2(self):
        return float(math.fsum(s.extra_l2 for s in self.steps))

    @property
    def total_cuts(self):
        return int(sum(s.cuts for s in self.steps))

    def bodies(self):
        """``[K_0, K_1, ..., K_T]`` rebuilt from the materialized stream."""
        if self.stream is None:
            raise ValueError("trace has no recorded request sequence")
        return [ConvexBody.from_dict(self.stream["initial"])] + [
            ConvexBody.from_dict(b) for b in self.stream["requests"]]

    def to_csv(self):
        d = len(self.x0)
        out = io.StringIO()
        cols = list(TRACE_COLUMNS) + [f"x{i}" for i in range(d)]
        out.write(f"# schema={TRACE_SCHEMA}\n")
        out.write(",".join(cols) + "\n")
        out.write(",".join(["0"] + ["0.0"] * 3 + ["", "", "0", "0", "", "0.0", "0.0"]
                           + [_f(v) for v in self.x0]) + "\n")
        for s in self.steps:
            row = [str(s.step), _f(s.cost), _f(s.cost_l2), _f(s.extra_l2), _f(s.lam),
                   _f(s.lam_stderr), str(int(s.cut)), str(s.cuts), _f(s.sampler_kept),
                   _f(s.steiner_mc_err), _f(s.violation)] + [_f(v) for v in s.played]
            out.write(",".join(row) + "\n")
        return out.getvalue()

    def digest(self):
        h = hashlib.sha256(self.to_csv().encode())
        if self.stream is not None:
            h.update(json.dumps(self.stream, sort_keys=True).encode())
        return h.hexdigest()


def _steiner_like(chaser):
    return hasattr(chaser, "steiner_point") and hasattr(chaser, "cache")


def _rngs(cfg):
    ss = np.random.SeedSequence([cfg.chaser_seed, cfg.adversary_seed, 0x5EED])
    diag_ss, budget_ss, haus_ss = ss.spawn(3)
    return (np.random.default_rng(cfg.chaser_seed), np.random.default_rng(cfg.adversary_seed),
            np.random.default_rng(diag_ss), np.random.default_rng(budget_ss),
            np.random.default_rng(haus_ss))


def run_episode(cfg, stream=None, chaser=None):
    """Play one episode; returns a :class:`Trace`.

    ``stream`` and ``chaser`` override the ones built from ``cfg``; the
    config still supplies the norm, seeds and diagnostics settings.
    """
    if isinstance(cfg, dict):
        cfg = parse_config(cfg)
    rng_ch, rng_adv, rng_diag, _, _ = _rngs(cfg)
    if stream is None:
        stream = build_stream(cfg.adversary, cfg.dim, rng_adv)
    if stream.dim != cfg.dim:
        raise ConfigError([f"adversary produces dim {stream.dim}, config says {cfg.dim}"])
    if chaser is None:
        chaser = make_chaser(cfg.chaser["kind"], cfg.dim, cfg.norm, rng_ch,
                             **cfg.chaser.get("params", {}))
    K0 = stream.initial
    diag = SupportCache(antipodal_directions(rng_diag, cfg.diagnostics["n_dirs"], cfg.dim))
    diag.update(K0)
    if isinstance(cfg.x0, str):
        if cfg.x0 == "origin":
            x0 = np.zeros(cfg.dim)
        elif _steiner_like(chaser):
            x0 = chaser.steiner_point(K0)
        else:
            x0 = diag.steiner().point
            if max_violation(K0, x0) > 0:
                x0 = project(K0, x0)
    else:
        x0 = np.asarray(cfg.x0, dtype=float)
    chaser.start(K0, x0)
    trace = Trace(x0.copy(), cfg.norm, chaser_kind=cfg.chaser["kind"],
                  adversary_kind=cfg.adversary["kind"])
    feas = cfg.tolerances["feasibility"]
    played = x0.copy()
    half = diag.directions.shape[0] // 2
    step = 0
    K = None
    try:
        K = stream.next(played)
        while K is not None:
            step += 1
            prev_vals = diag.values.copy()
            prev_arg = chaser.cache.argmax.copy() if (
                _steiner_like(chaser) and chaser.cache.argmax is not None) else None
            x = np.asarray(chaser.step(K), dtype=float)
            viol = max_violation(K, x)
            if viol > feas * max(1.0, K.radius):
                raise GeometryError(f"played point violates the request by {viol:.3g}")
            diag.update(K)
            bud = _budget_from_values(prev_vals, diag.values, half)
            info = chaser.last_info or {}
            mc = 0.0
            if prev_arg is not None:
                delta = chaser.cache.argmax - prev_arg
                n = delta.shape[0]
                mc = float(np.linalg.norm(delta.std(axis=0, ddof=1))) / math.sqrt(n)
            move = x - played
            rec = StepRecord(step, x.copy(), lp_norm(cfg.norm, move), float(np.linalg.norm(move)),
                             float(info.get("extra_l2", 0.0)), bud.value, bud.stderr,
                             bool(info.get("cuts", 0)), int(info.get("cuts", 0)),
                             float(info.get("sampler_kept", float("nan"))), mc, float(viol))
            trace.steps.append(rec)
            played = x
            K = stream.next(played)
    except (GeometryError, ArithmeticError, ValueError, RuntimeError) as exc:
        state = {
            "step": step,
            "played": [float(v) for v in played],
            "request": K.to_dict() if K is not None else None,
            "chaser": cfg.chaser["kind"],
            "adversary": cfg.adversary["kind"],
        }
        raise EpisodeError(step, state, exc) from exc
    trace.stream = stream.materialize()
    if hasattr(chaser, "phase_cuts"):
        trace.extras["phase_cuts"] = list(chaser.phase_cuts)
    if hasattr(stream, "signs"):
        trace.extras["signs"] = [float(s) for s in stream.signs]
    return trace


# ---------------------------------------------------------------------------
# offline optimum


def _norm_subgradient(norm, v):
    """A subgradient of the norm at ``v``."""
    if not np.any(v):
        return np.zeros_like(v)
    if norm.is_inf:
        g = np.zeros_like(v)
        i = int(np.argmax(np.abs(v)))
        g[i] = np.sign(v[i])
        return g
    if norm.p == 1.0:
        return np.sign(v)
    a = np.abs(v) / np.max(np.abs(v))
    g = np.sign(v) * a ** (norm.p - 1)
    return g / np.sum(a ** norm.p) ** ((norm.p - 1) / norm.p)


def opt_cost(trace, norm=None, iters=300, tol=1e-9):
    """Offline optimum of a nested episode: the distance from ``x0`` to ``K_T``.

    The Euclidean projection gives the answer for p = 2 and a starting point
    otherwise, which projected subgradient descent then improves.
    """
    norm = trace.norm if norm is None else (norm if isinstance(norm, NormSpec) else NormSpec(norm))
    if not trace.steps:
        return 0.0
    KT = ConvexBody.from_dict(trace.stream["requests"][-1]) if trace.stream else None
    x0 = np.asarray(trace.x0, dtype=float)
    if max_violation(KT, x0) <= 0:
        return 0.0
    y = project(KT, x0, tol)
    best = lp_norm(norm, x0 - y)
    if norm.p == 2.0 and not norm.is_inf:
        return best
    step0 = float(np.linalg.norm(x0 - y))
    for k in range(iters):
        g = _norm_subgradient(norm, x0 - y)
        gn = float(np.linalg.norm(g))
        if gn == 0:
            break
        y = project(KT, y + (step0 / math.sqrt(k + 1.0)) * 0.1 * g / gn, tol)
        best = min(best, lp_norm(norm, x0 - y))
    return best


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    slack: float = 0.0
    relation: str = "<="

    @property
    def passed(self):
        if self.relation == "<=":
            return bool(self.lhs <= self.rhs + self.slack)
        return bool(self.lhs >= self.rhs - self.slack)

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "relation": self.relation, "rhs": self.rhs,
                "slack": self.slack, "pass": self.passed}


@dataclass
class Report:
    total_cost: float
    total_cost_l2: float
    total_extra_l2: float
    opt_cost: float
    opt_cost_l2: float
    competitive_ratio: float
    competitive_ratio_l2: float
    hausdorff: float
    memoryless_ratio: float
    normalized: bool
    checks: list
    diagnostics: dict
    runtime: float = 0.0
    T: int = 0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, include_runtime=True):
        out = {
            "schema_version": REPORT_SCHEMA,
            "T": self.T,
            "total_cost": self.total_cost,
            "total_cost_l2": self.total_cost_l2,
            "total_extra_l2": self.total_extra_l2,
            "opt_cost": self.opt_cost,
            "opt_cost_l2": self.opt_cost_l2,
            "competitive_ratio": self.competitive_ratio,
            "competitive_ratio_l2": self.competitive_ratio_l2,
            "hausdorff": self.hausdorff,
            "memoryless_ratio": self.memoryless_ratio,
            "normalized": self.normalized,
            "checks": [c.to_dict() for c in self.checks],
            "all_passed": self.passed,
            "diagnostics": self.diagnostics,
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out

    def to_json(self, include_runtime=True):
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True)


def _concavity_term(lam):
    if not 0 < lam < 1:
        return 0.0, 0.0
    L = math.log(1.0 / lam)
    val = lam * math.sqrt(L)
    deriv = math.sqrt(L) - 1.0 / (2.0 * math.sqrt(L)) if L > 0 else 0.0
    return val, abs(deriv)


def competitive_report(trace, cfg, runtime=0.0):
    """Assemble the :class:`Report` for a finished trace."""
    if isinstance(cfg, dict):
        cfg = parse_config(cfg)
    _, _, _, rng_budget, rng_haus = _rngs(cfg)
    sigma = cfg.tolerances["sigma"]
    d = cfg.dim
    checks = []
    diagnostics = {}
    total = trace.total_cost
    total_l2 = trace.total_cost_l2
    opt = opt_cost(trace, cfg.norm)
    opt2 = opt_cost(trace, NormSpec(2.0))
    ratio = total / max(opt, RATIO_FLOOR)
    ratio2 = total_l2 / max(opt2, RATIO_FLOOR)
    max_viol = max((s.violation for s in trace.steps), default=0.0)
    checks.append(BoundCheck("feasibility", max_viol, 0.0, cfg.tolerances["feasibility"]))
    if opt > 0:
        checks.append(BoundCheck("ratio_sanity", ratio, 1.0,
                                 cfg.tolerances["ratio"] + 10 * cfg.tolerances["feasibility"] / opt,
                                 ">="))
    haus = 0.0
    normalized = True
    memoryless = float("nan")
    if trace.T >= 1:
        bodies = trace.bodies()
        K0, K1, KT = bodies[0], bodies[1], bodies[-1]
        h = hausdorff_nested(K1, KT, cfg.diagnostics["hausdorff_dirs"], rng_haus)
        haus = h.value
        normalized = haus <= 1.0 + 1e-9
        memoryless = total_l2 / max(haus, RATIO_FLOOR)
        diagnostics["hausdorff_flag"] = h.flag
        # budget accounting: steps 2..T telescope from K_1 to K_T
        lam = [s.lam for s in trace.steps[1:]]
        lam_se = [s.lam_stderr for s in trace.steps[1:]]
        lam_sum = float(math.fsum(lam))
        wb = mean_steiner_budget(K1, KT, cfg.diagnostics["budget_dirs"], rng_budget)
        se_sum = float(math.sqrt(sum(v * v for v in lam_se)))
        diagnostics.update({"lambda_sum": lam_sum, "width_K1": wb.width_prev,
                            "width_KT": wb.width_next, "half_width_drop": wb.value,
                            "half_width_drop_stderr": wb.stderr})
        if trace.T >= 2:
            checks.append(BoundCheck("lambda_budget", lam_sum, wb.value,
                                     sigma * math.hypot(wb.stderr, se_sum)))
            terms = [_concavity_term(v) for v in lam]
            conc = float(math.fsum(t[0] for t in terms))
            conc_se = float(sum(t[1] * se for t, se in zip(terms, lam_se)))
            diagnostics["concavity_sum"] = conc
            if lam_sum <= 1.0 and normalized:
                checks.append(BoundCheck("concavity", conc, math.sqrt(math.log(trace.T)),
                                         sigma * conc_se))
        if trace.chaser_kind == "steiner":
            mc = float(math.fsum(s.steiner_mc_err for s in trace.steps))
            diagnostics["steiner_mc_error"] = mc
            inside_unit = float(np.linalg.norm(K0.center)) + K0.radius <= 1.0 + 1e-12
            moved = total_l2 - trace.steps[0].cost_l2
            if inside_unit:
                checks.append(BoundCheck("steiner_total_movement", moved, float(d), 5.0 * mc))
            checks.append(BoundCheck("steiner_budget_form", moved, d * wb.value,
                                     5.0 * mc + d * sigma * wb.stderr))
            diagnostics["steiner_budget_form_unscaled"] = wb.value
        kind = trace.adversary_kind
        if kind == "hadamard":
            p = cfg.norm.p
            per = d ** (1.0 / p - 1.0)
            cap = d ** (1.0 / p - 0.5)
            checks.append(BoundCheck("hadamard_step_movement", min(s.cost for s in trace.steps),
                                     per, 0.01, ">="))
            checks.append(BoundCheck("hadamard_opt", opt, cap, 0.01))
            tol = float(cfg.adversary.get("params", {}).get("tol", 1e-6))
            hT, _ = _widths(KT, rng_budget, 256)
            checks.append(BoundCheck("hadamard_final_diameter", hT, 10 * tol))
            if trace.chaser_kind == "steiner" and cfg.norm.p == 2.0:
                checks.append(BoundCheck("hadamard_ratio_l2", ratio2, math.sqrt(d), 0.2, ">="))
        if kind == "cap_cutting":
            checks.append(BoundCheck("cap_origin_kept", max_violation(KT, np.zeros(d)), 0.0))
            if trace.chaser_kind == "steiner" and d == 2:
                checks.append(BoundCheck("cap_steiner_movement", total_l2, 0.01, 0.0, ">="))
        if kind == "product_slab" and trace.chaser_kind == "lazy_steiner":
            still = sum(1 for s in trace.steps if s.cost_l2 == 0.0)
            checks.append(BoundCheck("lazy_moves_every_step", float(still), 0.0))
    diagnostics["normalized"] = normalized
    if "phase_cuts" in trace.extras:
        diagnostics["phase_cuts"] = trace.extras["phase_cuts"]
    return Report(total, total_l2, trace.total_extra_l2, opt, opt2, ratio, ratio2, haus,
                  memoryless, normalized, checks, diagnostics, runtime, trace.T)


def _widths(K, rng, n):
    """Largest sampled width of ``K`` (a diameter lower estimate)."""
    th = antipodal_directions(rng, n, K.dim)
    h, _ = support_batch(K, th)
    w = h[: n // 2] + h[n // 2:]
    return float(np.max(w)), float(np.mean(w))


# ---------------------------------------------------------------------------
# episode + report bundles and sweeps


def run_and_report(cfg):
    if isinstance(cfg, dict):
        cfg = parse_config(cfg)
    t0 = time.perf_counter()
    trace = run_episode(cfg)
    rep = competitive_report(trace, cfg, runtime=0.0)
    rep.runtime = time.perf_counter() - t0
    return trace, rep


def write_outputs(trace, report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.csv"), "w") as fh:
        fh.write(trace.to_csv())
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "bodies.json"), "w") as fh:
        json.dump(trace.stream, fh)


def expand_sweep(data):
    """Grid of episode configs from a config carrying a ``sweep`` block.

    ``sweep`` may list ``dims``, ``seeds``, ``chasers`` (kind names) and
    ``norms``; a seed ``s`` becomes ``{"chaser": s, "adversary": s}``.
    """
    sweep = data.get("sweep")
    if not isinstance(sweep, dict):
        raise ConfigError(["sweep: required object with dims/seeds/chasers/norms lists"])
    bad = set(sweep) - {"dims", "seeds", "chasers", "norms", "jobs"}
    if bad:
        raise ConfigError([f"sweep: unknown keys {sorted(bad)}"])
    base = {k: v for k, v in data.items() if k != "sweep"}
    dims = sweep.get("dims", [base.get("dim")])
    seeds = sweep.get("seeds")
    norms = sweep.get("norms", [base.get("norm", 2)])
    chasers = sweep.get("chasers", [None])
    configs = []
    errors = []
    for dim in dims:
        for norm in norms:
            for ch in chasers:
                for s in (seeds if seeds is not None else [None]):
                    c = copy.deepcopy(base)
                    c["dim"] = dim
                    c["norm"] = norm
                    if ch is not None:
                        c["chaser"] = {"kind": ch, "params": {}} if isinstance(ch, str) else ch
                    if s is not None:
                        c["seeds"] = {"chaser": s, "adversary": s}
                    try:
                        configs.append(parse_config(c))
                    except ConfigError as exc:
                        errors.extend(f"[dim={dim} norm={norm} chaser={ch} seed={s}] {e}"
                                      for e in exc.errors)
    if errors:
        raise ConfigError(errors)
    return configs


SWEEP_COLUMNS = ("adversary", "dim", "norm", "chaser", "chaser_seed", "adversary_seed", "T",
                 "total_cost", "total_cost_l2", "opt_cost", "competitive_ratio", "hausdorff",
                 "memoryless_ratio", "checks_passed", "trace_digest")


def _sweep_row(cfg):
    trace, rep = run_and_report(cfg)
    return {
        "adversary": cfg.adversary["kind"], "dim": cfg.dim, "norm": cfg.norm.to_json(),
        "chaser": cfg.chaser["kind"], "chaser_seed": cfg.chaser_seed,
        "adversary_seed": cfg.adversary_seed, "T": trace.T, "total_cost": trace.total_cost,
        "total_cost_l2": trace.total_cost_l2, "opt_cost": rep.opt_cost,
        "competitive_ratio": rep.competitive_ratio, "hausdorff": rep.hausdorff,
        "memoryless_ratio": rep.memoryless_ratio, "checks_passed": rep.passed,
        "trace_digest": trace.digest(),
    }


def run_sweep(configs, jobs=1):
    """Run every config; rows come back sorted by config key."""
    configs = sorted(configs, key=EpisodeConfig.key)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_row, configs))
    else:
        rows = [_sweep_row(c) for c in configs]
    return rows


def sweep_csv(rows):
    out = io.StringIO()
    out.write(f"# schema={SWEEP_SCHEMA}\n")
    out.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        vals = []
        for c in SWEEP_COLUMNS:
            v = r[c]
            vals.append(_f(v) if isinstance(v, float) else str(v))
        out.write(",".join(vals) + "\n")
    return out.getvalue()
