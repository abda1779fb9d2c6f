"""Learning rules: exact ERM per family/feasible-set pair, brute-force ERM
over explicit point lists, the coin majority decoder, the tent-frequency
decoder, and a projected SGD baseline.

Every argmin breaks ties toward the lexicographically smallest point so that
runs are replayable; closed-form solvers are anchored to the brute-force
``erm_enumerated`` oracle by tests rather than trusted on their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .families import (
    BlockGadgetFamily,
    Feasible,
    LossFamily,
    NonDifferentiableError,
    gadget_block_value,
    integer_quadratic_argmin,
)
from .lattice import IntegerPointSet, _round_half_toward_zero


class WindowOverflowError(RuntimeError):
    """Block ERM search window grew past its budget (pathological inputs)."""


@dataclass(frozen=True)
class EmpiricalSummary:
    """Sufficient statistic of an m-sample for one family: per-coordinate
    signed counts (coins), per-center activation counts (tents), or the
    sample-mean vector (Gaussian-tilt families)."""

    family_tag: str
    m: int
    statistic: np.ndarray

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("summary needs m >= 1")
        object.__setattr__(self, "statistic", np.asarray(self.statistic))


def summarize(family: LossFamily, samples) -> EmpiricalSummary:
    """Reduce raw samples to the family's sufficient statistic."""
    samples = list(samples)
    return EmpiricalSummary(family.tag, len(samples),
                            family.sufficient_statistic(samples))


def sample_summary(family: LossFamily, m: int, rng) -> EmpiricalSummary:
    """Draw the m-sample sufficient statistic from its exact distribution."""
    return EmpiricalSummary(family.tag, m, family.sample_statistic(m, rng))


def empirical_objective(family: LossFamily, summary: EmpiricalSummary, x) -> float:
    if summary.family_tag != family.tag:
        raise ValueError(f"summary for {summary.family_tag!r} used with {family.tag!r}")
    return family.empirical_objective_from_stat(summary.statistic, summary.m, x)


def _coerce_summary(data, family: LossFamily) -> EmpiricalSummary:
    return data if isinstance(data, EmpiricalSummary) else summarize(family, data)


def erm_enumerated(data, family: LossFamily, points) -> tuple[np.ndarray, float]:
    """Exact argmin of the empirical objective over an explicit point list;
    ties go to the lexicographically smallest point.

    ``data`` is an EmpiricalSummary or a list of raw samples.
    """
    summary = _coerce_summary(data, family)
    if isinstance(points, IntegerPointSet):
        points = points.points
    pts = sorted(tuple(p) for p in points)
    if not pts:
        raise ValueError("empty feasible point list")
    best, best_val = None, math.inf
    for p in pts:
        v = empirical_objective(family, summary, np.asarray(p, dtype=float))
        if v < best_val:
            best, best_val = p, v
    return np.asarray(best, dtype=float), best_val


def erm_quadratic_integer_box(zbar, mu: float, floor_r) -> np.ndarray:
    """Coordinatewise exact ERM for (mu/2)||x||^2 - <zbar, x> over the integer
    box of radius floor_r (may be inf); ties toward the smaller integer."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    zbar = np.asarray(zbar, dtype=float)
    lo = -floor_r if math.isfinite(floor_r) else -math.inf
    hi = floor_r if math.isfinite(floor_r) else math.inf
    return np.array([integer_quadratic_argmin(c, mu, lo, hi) for c in zbar],
                    dtype=float)


def _erm_one_block(mu, L, tau, z1, z2, floor_r, budget):
    """Exact integer argmin of one gadget block via strong-convexity window
    enumeration around the continuous minimizer."""
    y_cont = 0.5 + 2.0 * (z2 + tau * z1) / L
    x_cont = tau * y_cont + z1 / (2.0 * mu)
    finite = math.isfinite(floor_r)

    def clamp(v):
        return min(max(v, -floor_r), floor_r) if finite else v

    cx = int(_round_half_toward_zero(clamp(x_cont)))
    cy = int(_round_half_toward_zero(clamp(y_cont)))
    val_cont = gadget_block_value(mu, L, tau, z1, z2, x_cont, y_cont)
    val_cand = gadget_block_value(mu, L, tau, z1, z2, cx, cy)
    rad = math.sqrt(max(0.0, 2.0 * (val_cand - val_cont) / mu))
    x_lo, x_hi = math.ceil(x_cont - rad), math.floor(x_cont + rad)
    y_lo, y_hi = math.ceil(y_cont - rad), math.floor(y_cont + rad)
    if finite:
        r = int(floor_r)
        x_lo, x_hi = max(x_lo, -r), min(x_hi, r)
        y_lo, y_hi = max(y_lo, -r), min(y_hi, r)
    n_window = max(0, x_hi - x_lo + 1) * max(0, y_hi - y_lo + 1)
    if n_window > budget:
        raise WindowOverflowError(
            f"block search window of {n_window} points exceeds budget {budget}")
    best, best_val = (cx, cy), val_cand
    for x in range(x_lo, x_hi + 1):
        for y in range(y_lo, y_hi + 1):
            v = gadget_block_value(mu, L, tau, z1, z2, x, y)
            if v < best_val or (v == best_val and (x, y) < best):
                best, best_val = (x, y), v
    return best


def erm_block_gadget(zbar, family: BlockGadgetFamily, floor_r,
                     budget: int = 1_000_000) -> np.ndarray:
    """Exact ERM for the block-gadget empirical objective over the integer box.

    Solves each 2-variable block by rounding the continuous minimizer and
    enumerating the integer points inside the strong-convexity ball that
    could still beat it; the leftover odd coordinate is a scalar quadratic.
    Ties break lexicographically, blockwise (the objective is separable).
    """
    if math.isfinite(floor_r) and floor_r < family.tau:
        raise ValueError("box must contain the block vertices (floor_r >= tau)")
    zbar = np.asarray(zbar, dtype=float)
    out = np.zeros(family.d)
    for j in range(family.n_blocks):
        x, y = _erm_one_block(family.mu, family.L, family.tau,
                              zbar[2 * j], zbar[2 * j + 1], floor_r, budget)
        out[2 * j], out[2 * j + 1] = x, y
    if family.d % 2:
        lo = -floor_r if math.isfinite(floor_r) else -math.inf
        out[-1] = integer_quadratic_argmin(zbar[-1], family.mu, lo, floor_r)
    return out


def erm_continuous(zbar, mu: float, feasible: Feasible) -> np.ndarray:
    """ERM for the quadratic Gaussian-tilt family over a continuous set:
    zbar/mu, clamped coordinatewise for a box."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    x = np.asarray(zbar, dtype=float) / mu
    if feasible.kind == "all_space":
        return x
    if feasible.kind == "box_continuous":
        return np.clip(x, -feasible.radius, feasible.radius)
    raise ValueError(f"continuous ERM does not support {feasible.kind!r}")


def tent_erm(counts, packing) -> int:
    """Index of the most-activated center (the empirical minimizer over the
    ball sits there, with value -count/m * r/4); ties to the smallest index."""
    counts = np.asarray(counts)
    if len(counts) != len(packing):
        raise ValueError("counts length must match the packing size")
    return int(np.argmax(counts))


def majority_vertex_from_counts(counts, R: float) -> np.ndarray:
    """Vertex R * sign(counts), with zero or unseen coordinates sent to +R."""
    counts = np.asarray(counts)
    signs = np.where(counts >= 0, 1.0, -1.0)
    return float(R) * signs


def coin_majority_decoder(samples, d: int, R: float) -> np.ndarray:
    """Coordinatewise majority vote over coin samples (j, k), returning the
    box vertex R * b_hat. Zero-sum and unseen coordinates default to +1."""
    if d < 1:
        raise ValueError("d must be >= 1")
    counts = np.zeros(d, dtype=np.int64)
    for j, k in samples:
        counts[j] += k
    return majority_vertex_from_counts(counts, R)


def coin_erm_box(counts, floor_r: float) -> np.ndarray:
    """ERM vertex for the coin empirical objective -<counts, x>/m over the box:
    sign of counts, with exact zeros tie-broken to the lex-smaller -floor_r."""
    counts = np.asarray(counts)
    signs = np.where(counts > 0, 1.0, -1.0)
    return float(floor_r) * signs


def _project(x: np.ndarray, feasible: Feasible) -> np.ndarray:
    if feasible.kind == "all_space":
        return x
    if feasible.kind == "box_continuous":
        return np.clip(x, -feasible.radius, feasible.radius)
    if feasible.kind == "l2_ball":
        n = np.linalg.norm(x)
        return x if n <= feasible.radius else x * (feasible.radius / n)
    raise ValueError(f"projection onto {feasible.kind!r} is not supported")


def projected_sgd(family: LossFamily, feasible: Feasible, m: int, rng,
                  step_rule: str = "strongly_convex", averaging: bool = True,
                  lipschitz: float | None = None) -> np.ndarray:
    """Projected SGD baseline from x_1 = 0 with per-sample gradients.

    step_rule "strongly_convex" uses eta_t = 1/(mu t); "convex" uses
    eta_t = R/(G sqrt(t)) and needs a Lipschitz bound G and a bounded set.
    Returns the suffix average over the last half of the iterates (or the
    final iterate when averaging is off).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if type(family).grad is LossFamily.grad:
        raise NonDifferentiableError(f"{family.tag} supplies no per-sample gradient")
    x = np.zeros(family.d)
    if step_rule == "strongly_convex":
        mu = getattr(family, "mu", None)
        if mu is None:
            raise ValueError("strongly_convex step rule needs a family with mu")
        eta = lambda t: 1.0 / (mu * t)
    elif step_rule == "convex":
        if feasible.kind not in ("box_continuous", "l2_ball"):
            raise ValueError("convex step rule needs a bounded feasible set")
        G = lipschitz
        if G is None:
            raise ValueError("convex step rule needs a Lipschitz bound")
        R = feasible.radius
        eta = lambda t: R / (G * math.sqrt(t))
    else:
        raise ValueError(f"unknown step rule {step_rule!r}")
    suffix_start = m // 2 + 1
    acc = np.zeros(family.d)
    n_acc = 0
    for t in range(1, m + 1):
        z = family.sample(rng)
        g = family.grad(x, z)
        x = _project(x - eta(t) * g, feasible)
        if t >= suffix_start:
            acc += x
            n_acc += 1
    return acc / n_acc if averaging and n_acc else x


def solver_record_row(solver_id: str, family_id: str, m: int, xhat,
                      empirical_value: float, population_excess: float) -> list:
    """CSV row schema for solver outputs."""
    return [solver_id, family_id, m, *[float(v) for v in np.atleast_1d(xhat)],
            empirical_value, population_excess]
