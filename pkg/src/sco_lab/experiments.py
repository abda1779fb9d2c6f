"""Seeded Monte Carlo harness: success-probability estimation, empirical
sample-size search, log-log rate fitting, uniform-deviation measurement, and
the two-atom adversarial construction for unbounded quadratics.

Trial seeds are derived by hashing (master_seed, experiment id, m, trial), so
trials are reproducible and embarrassingly parallel; aggregation is a
commutative reduction over per-trial records. Excess values always come from
closed-form population objectives, never from empirical estimates.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import __version__
from .families import Feasible, LossFamily, family_from_spec
from .lattice import enumerate_integer_points
from .solvers import (
    coin_erm_box,
    erm_block_gadget,
    erm_continuous,
    erm_quadratic_integer_box,
    majority_vertex_from_counts,
    projected_sgd,
    tent_erm,
)

TRIAL_CSV_COLUMNS = ("experiment_id", "family", "rule", "d", "R", "eps",
                     "delta", "m", "trial", "seed", "excess", "success")


def derive_seed(master_seed: int, experiment_id: str, m: int, trial: int) -> int:
    """64-bit splittable-style seed for one trial; deterministic across
    platforms and disjoint across (experiment, m, trial)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(f"{int(master_seed)}|{experiment_id}|{int(m)}|{int(trial)}".encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    family: dict
    feasible: dict
    rule: str  # erm | erm_continuous | majority | sgd
    epsilon: float
    delta: float
    m_grid: tuple[int, ...]
    trials: int
    master_seed: int
    randomize_instance: bool = True

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not self.m_grid or any(m < 1 for m in self.m_grid):
            raise ValueError("m_grid must contain positive integers")
        if list(self.m_grid) != sorted(set(self.m_grid)):
            raise ValueError("m_grid must be strictly increasing")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def to_spec(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "family": self.family,
            "feasible": self.feasible,
            "rule": self.rule,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "m_grid": list(self.m_grid),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "randomize_instance": self.randomize_instance,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "ExperimentConfig":
        return cls(
            experiment_id=spec["experiment_id"],
            family=spec["family"],
            feasible=spec["feasible"],
            rule=spec["rule"],
            epsilon=spec["epsilon"],
            delta=spec["delta"],
            m_grid=tuple(spec["m_grid"]),
            trials=spec["trials"],
            master_seed=spec["master_seed"],
            randomize_instance=spec.get("randomize_instance", True),
        )


@dataclass(frozen=True)
class TrialRecord:
    m: int
    trial: int
    seed: int
    hidden: str
    excess: float
    success: bool
    error: bool = False


def _hidden_descriptor(family: LossFamily) -> str:
    b = getattr(family, "b", None)
    if b is not None:
        return "b=" + "".join("+" if v == 1 else "-" for v in b)
    hidden = getattr(family, "hidden", None)
    if hidden is not None:
        return f"u={hidden}"
    return "fixed"


def _apply_rule(rule: str, family: LossFamily, feasible: Feasible,
                m: int, rng) -> np.ndarray:
    if rule == "sgd":
        return projected_sgd(family, feasible, m, rng)
    if rule == "erm_continuous":
        stat = family.sample_statistic(m, rng)
        return erm_continuous(stat, family.mu, feasible)
    if rule == "majority":
        counts = family.sample_statistic(m, rng)
        return majority_vertex_from_counts(counts, feasible.radius)
    if rule == "erm":
        tag = family.tag
        if tag == "coin_linear":
            counts = family.sample_statistic(m, rng)
            return coin_erm_box(counts, feasible.radius)
        if tag == "tent":
            counts = family.sample_statistic(m, rng)
            idx = tent_erm(counts, family.packing)
            return np.asarray(family.packing.centers[idx], dtype=float)
        if tag == "block_gadget":
            stat = family.sample_statistic(m, rng)
            return erm_block_gadget(stat, family, feasible.radius)
        if tag in ("quad_gaussian", "small_kappa_quad"):
            stat = family.sample_statistic(m, rng)
            return erm_quadratic_integer_box(stat, family.mu, feasible.radius)
        raise ValueError(f"no ERM rule wired for family {tag!r}")
    raise ValueError(f"unknown rule {rule!r}")


def run_trial(config: ExperimentConfig, m: int, trial: int) -> TrialRecord:
    seed = derive_seed(config.master_seed, config.experiment_id, m, trial)
    rng = np.random.default_rng(seed)
    family = family_from_spec(config.family, rng=rng,
                              randomize=config.randomize_instance)
    feasible = Feasible.from_spec(config.feasible)
    hidden = _hidden_descriptor(family)
    try:
        xhat = _apply_rule(config.rule, family, feasible, m, rng)
        excess = family.excess(feasible, xhat)
    except Exception:
        return TrialRecord(m, trial, seed, hidden, math.inf, False, error=True)
    return TrialRecord(m, trial, seed, hidden, float(excess),
                       bool(excess <= config.epsilon))


def clopper_pearson(successes: int, trials: int,
                    alpha: float = 0.05) -> tuple[float, float]:
    """Two-sided exact binomial confidence interval."""
    if not 0 <= successes <= trials or trials < 1:
        raise ValueError("need 0 <= successes <= trials")
    lo = 0.0 if successes == 0 else \
        float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else \
        float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


def clopper_pearson_lower(successes: int, trials: int,
                          alpha: float = 0.05) -> float:
    """One-sided exact lower confidence bound at level 1 - alpha."""
    if successes == 0:
        return 0.0
    return float(stats.beta.ppf(alpha, successes, trials - successes + 1))


@dataclass(frozen=True)
class SuccessEstimate:
    m: int
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    records: tuple[TrialRecord, ...]


def estimate_success(config: ExperimentConfig, m: int) -> SuccessEstimate:
    """Run config.trials independent trials at sample size m; success means
    closed-form population excess at most epsilon. Solver errors count as
    failures, flagged on their records."""
    records = tuple(run_trial(config, m, t) for t in range(config.trials))
    k = sum(r.success for r in records)
    lo, hi = clopper_pearson(k, config.trials)
    return SuccessEstimate(m, config.trials, k, k / config.trials, lo, hi, records)


@dataclass(frozen=True)
class MinSampleSearch:
    m_hat: int | None
    estimates: tuple[SuccessEstimate, ...]


def find_min_m(config: ExperimentConfig, stop_early: bool = True) -> MinSampleSearch:
    """Smallest grid m whose success point estimate reaches 1 - delta.

    No monotone smoothing is applied: the raw grid decision is recorded, and
    the per-m confidence intervals are reported alongside.
    """
    target = 1.0 - config.delta
    ests = []
    m_hat = None
    for m in config.m_grid:
        est = estimate_success(config, m)
        ests.append(est)
        if est.p_hat >= target:
            m_hat = m
            if stop_early:
                break
    return MinSampleSearch(m_hat, tuple(ests))


@dataclass(frozen=True)
class RateFit:
    points: tuple[tuple[float, float], ...]  # (epsilon, m_hat)
    slope: float
    intercept: float
    r_squared: float


def fit_rate(pairs) -> RateFit:
    """Least squares of ln(m_hat) on ln(1/epsilon); the slope is the
    empirical exponent of 1/epsilon."""
    pts = tuple((float(e), float(m)) for e, m in pairs)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if len({e for e, _ in pts}) < 2:
        raise ValueError("epsilon values are degenerate")
    if any(e <= 0 or m <= 0 for e, m in pts):
        raise ValueError("epsilon and m_hat must be positive")
    x = np.log([1.0 / e for e, _ in pts])
    y = np.log([m for _, m in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return RateFit(pts, float(slope), float(intercept), r2)


def rate_fit_to_dict(fit: RateFit) -> dict:
    return {"points": [[e, m] for e, m in fit.points], "slope": fit.slope,
            "intercept": fit.intercept, "r_squared": fit.r_squared}


# ---------------------------------------------------------------------------
# uniform-convergence deviation for the anchored quadratic family

def uc_deviation_quadratic(d: int, floor_r: int, mu: float, sigma: float,
                           theta, m: int, trials: int, seed: int,
                           cross_check: bool = False,
                           budget: int = 1_000_000) -> np.ndarray:
    """Empirical distribution of the anchored sup-deviation over the integer
    box for the quadratic Gaussian family: per trial the sup has the closed
    form floor_r * ||Zbar - theta||_1.

    With cross_check=True every trial is also maximized by brute force over
    the enumerated lattice (budget permitting) and must agree exactly.
    """
    if not math.isfinite(floor_r):
        raise ValueError("deviation measurement needs a finite box")
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    pts = None
    if cross_check:
        pts = np.asarray(
            enumerate_integer_points(d, floor_r, "linf", budget=budget).points,
            dtype=float)
    sups = np.empty(trials)
    for t in range(trials):
        zs = theta + sigma * rng.standard_normal((m, d))
        diff = zs.mean(axis=0) - theta
        sup = float(np.sum(np.abs(diff) * floor_r))
        if cross_check:
            brute = float(np.max(np.abs((pts * diff).sum(axis=1))))
            if brute != sup:
                raise AssertionError(
                    f"closed-form sup {sup!r} != brute-force sup {brute!r}")
        sups[t] = sup
    return sups


# ---------------------------------------------------------------------------
# coin-correlation ceiling

@dataclass(frozen=True)
class CorrelationReport:
    estimate: float
    std_error: float
    ceiling: float
    within_ceiling: bool
    trials: int


def correlation_experiment(d: int, R: float, rho: float, m: int, trials: int,
                           seed: int, rule: str = "majority") -> CorrelationReport:
    """Mean normalized correlation E[<B, Y>/d] of a box-valued rule against
    the information-theoretic ceiling rho * sqrt(2m/d)."""
    rng = np.random.default_rng(seed)
    vals = np.empty(trials)
    feasible = Feasible.box_continuous(R)
    spec = {"kind": "coin_linear", "d": d, "R": R, "rho": rho, "mode": "dimension"}
    for t in range(trials):
        family = family_from_spec(spec, rng=rng, randomize=True)
        xhat = _apply_rule(rule, family, feasible, m, rng)
        vals[t] = np.dot(family.b, xhat / R) / d
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials))
    ceiling = rho * math.sqrt(2 * m / d)
    return CorrelationReport(est, se, ceiling, est <= ceiling + 3 * se, trials)


# ---------------------------------------------------------------------------
# necessity of centered tail control on unbounded domains

@dataclass(frozen=True)
class NecessityReport:
    m: int
    delta: float
    epsilon: float
    p_zero: float
    atom: float
    population_minimizer: float
    excess_at_default: float
    failure_freq: float
    ci_low: float
    exceeds_delta: bool
    trials: int


def adversarial_necessity_demo(rule, mu: float, epsilon: float, delta: float,
                               m: int, trials: int, seed: int) -> NecessityReport:
    """Two-atom distribution that defeats a fixed rule on 1-d quadratics
    f(x; z) = (mu/2)(x - z)^2.

    The atom at zero has mass p = (delta^(1/m) + 1)/2 > delta^(1/m); the other
    atom is placed so the population minimizer sits ceil(2*sqrt(eps/mu)) away
    from the rule's all-zero response, which then incurs excess >= 2*eps.
    Reports the frequency of {all samples zero and excess > eps} with a
    one-sided 95% lower confidence bound to compare against delta.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon <= 0 or mu <= 0 or m < 1:
        raise ValueError("need epsilon > 0, mu > 0, m >= 1")
    rng = np.random.default_rng(seed)
    a0 = float(rule(np.zeros(m)))
    shift = math.ceil(2 * math.sqrt(epsilon / mu))
    p = (delta ** (1.0 / m) + 1.0) / 2.0
    mean = a0 + shift
    atom = mean / (1.0 - p)
    excess_at_default = 0.5 * mu * (a0 - mean) ** 2
    failures = 0
    for _ in range(trials):
        zero_mask = rng.random(m) < p
        samples = np.where(zero_mask, 0.0, atom)
        xhat = float(rule(samples))
        excess = 0.5 * mu * (xhat - mean) ** 2
        failures += bool(zero_mask.all() and excess > epsilon)
    freq = failures / trials
    lo = clopper_pearson_lower(failures, trials)
    return NecessityReport(m, delta, epsilon, p, atom, mean, excess_at_default,
                           freq, lo, lo > delta, trials)


# ---------------------------------------------------------------------------
# per-epsilon hard-instance builders

def coin_instance_spec(d: int, R: float, epsilon: float,
                       mode: str = "dimension") -> dict:
    """Coin family with bias rho = 4*eps/R (capped at 1/2)."""
    rho = min(0.5, 4.0 * epsilon / R)
    return {"kind": "coin_linear", "d": d, "R": R, "rho": rho, "mode": mode}

def gadget_instance_spec(d: int, mu: float, L: float, floor_r: int,
                         epsilon: float, sigma: float = 1.0,
                         c1: float = 0.3) -> dict:
    """Block gadget with tilt gap gamma = eps/(c1 * n_blocks) and the widest
    admissible tau; requires gamma <= mu/24."""
    n_blocks = d // 2
    kappa = L / mu
    tau = max(1, int(min(math.sqrt(kappa), floor_r)) // 4)
    gamma = epsilon / (c1 * n_blocks)
    if gamma > mu / 24:
        raise ValueError(
            f"epsilon {epsilon} too large: gamma {gamma:.4g} exceeds mu/24; "
            f"admissible epsilon <= {c1 * n_blocks * mu / 24:.4g}")
    return {"kind": "block_gadget", "d": d, "mu": mu, "L": L, "tau": tau,
            "gamma": gamma, "sigma": sigma}


def tent_instance_spec(packing_spec: dict, radius: float, epsilon: float) -> dict:
    """Tent family with bias rho = 8*eps/r (capped at 1/2)."""
    rho = min(0.5, 8.0 * epsilon / radius)
    return {"kind": "tent", "packing": packing_spec, "rho": rho}


def quad_instance_spec(d: int, mu: float, sigma: float, theta=None) -> dict:
    theta = list(theta) if theta is not None else [0.0] * d
    return {"kind": "quad_gaussian", "d": d, "mu": mu, "sigma": sigma,
            "theta": theta}


# ---------------------------------------------------------------------------
# experiment I/O and parallel driver

def _records_for_m(config: ExperimentConfig, m: int):
    return m, tuple(run_trial(config, m, t) for t in range(config.trials))


def run_experiment(config: ExperimentConfig, threads: int = 1) -> dict:
    """Full sweep over the m grid; returns the summary dict with per-m
    success estimates and the raw records (ordered by (m, trial))."""
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(_records_for_m, [config] * len(config.m_grid),
                                    config.m_grid))
    else:
        results = dict(_records_for_m(config, m) for m in config.m_grid)
    per_m = []
    all_records = []
    m_hat = None
    for m in config.m_grid:
        records = results[m]
        all_records.extend(records)
        k = sum(r.success for r in records)
        lo, hi = clopper_pearson(k, config.trials)
        p_hat = k / config.trials
        per_m.append({"m": m, "trials": config.trials, "successes": k,
                      "p_hat": p_hat, "ci_low": lo, "ci_high": hi})
        if m_hat is None and p_hat >= 1 - config.delta:
            m_hat = m
    summary = {
        "experiment_id": config.experiment_id,
        "config": config.to_spec(),
        "epsilon": config.epsilon,
        "delta": config.delta,
        "per_m": per_m,
        "m_hat": m_hat,
    }
    return {"summary": summary, "records": tuple(all_records)}


def write_trials_csv(config: ExperimentConfig, records, path):
    fam = config.family.get("kind", "?")
    d = config.family.get("d",
                          config.family.get("packing", {}).get("d", ""))
    radius = config.feasible.get("radius", "")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_CSV_COLUMNS)
        for r in records:
            w.writerow([config.experiment_id, fam, config.rule, d, radius,
                        repr(config.epsilon), repr(config.delta), r.m, r.trial,
                        r.seed, repr(r.excess), int(r.success)])


def read_trials_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(TRIAL_CSV_COLUMNS) - set(rows[0].keys() if rows else TRIAL_CSV_COLUMNS)
    if missing:
        raise ValueError(f"trial CSV missing columns: {sorted(missing)}")
    return rows


def write_experiment_artifacts(config: ExperimentConfig, outcome: dict, out_dir,
                               extra_manifest: dict | None = None):
    """Write trials.csv, summary.json and manifest.json under out_dir."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    write_trials_csv(config, outcome["records"], os.path.join(out_dir, "trials.csv"))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(outcome["summary"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {"tool": "sco-lab", "version": __version__,
                "config": config.to_spec()}
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# the central desk-scale rate-separation experiment

def rate_separation(d: int = 4, mu: float = 1.0, L: float = 64.0,
                    sigma: float = 1.0, floor_r: int = 8,
                    eps_ladder=(0.4, 0.2, 0.1, 0.05), eps_scale: float = 0.0475,
                    c1: float = 0.3, delta: float = 0.25, trials: int = 500,
                    master_seed: int = 2024, max_m_exp: int = 20) -> dict:
    """Empirical sample-size exponents for integer ERM on per-epsilon gadget
    instances versus continuous ERM on a fixed quadratic instance.

    The nominal epsilon ladder is multiplied by eps_scale so every induced
    tilt gap gamma = eps/(c1 * n_blocks) stays within its admissible range
    (0, mu/24]; with the defaults the gaps also exceed the epsilons, so a
    single wrongly decoded block already fails a trial. Grid sizes are
    powers of two; slopes near 2 (integer) and 1 (continuous) are expected.
    """
    eps_values = [e * eps_scale for e in eps_ladder]
    m_grid = tuple(2 ** k for k in range(max_m_exp + 1))
    out = {"eps_values": eps_values, "integer": {}, "continuous": {}}
    pairs_int, pairs_cont = [], []
    searches_int, searches_cont = [], []
    for eps in eps_values:
        cfg = ExperimentConfig(
            experiment_id=f"rate-int-eps{eps:.6g}",
            family=gadget_instance_spec(d, mu, L, floor_r, eps, sigma, c1),
            feasible=Feasible.box_integer(floor_r).to_spec(),
            rule="erm", epsilon=eps, delta=delta, m_grid=m_grid,
            trials=trials, master_seed=master_seed)
        search = find_min_m(cfg)
        searches_int.append(search)
        if search.m_hat is not None:
            pairs_int.append((eps, search.m_hat))
        cfg_c = ExperimentConfig(
            experiment_id=f"rate-cont-eps{eps:.6g}",
            family=quad_instance_spec(d, mu, sigma),
            feasible=Feasible.all_space().to_spec(),
            rule="erm_continuous", epsilon=eps, delta=delta, m_grid=m_grid,
            trials=trials, master_seed=master_seed, randomize_instance=False)
        search_c = find_min_m(cfg_c)
        searches_cont.append(search_c)
        if search_c.m_hat is not None:
            pairs_cont.append((eps, search_c.m_hat))
    out["integer"] = {"pairs": pairs_int, "searches": searches_int,
                      "fit": fit_rate(pairs_int) if len(pairs_int) >= 3 else None}
    out["continuous"] = {"pairs": pairs_cont, "searches": searches_cont,
                         "fit": fit_rate(pairs_cont) if len(pairs_cont) >= 3 else None}
    return out
