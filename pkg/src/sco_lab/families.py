"""Loss families with exact sampling, closed-form population objectives and
closed-form population minimizers over the feasible sets they support.

Discrete samples (coins, tent activations) are drawn by inverse CDF with the
acceptance threshold compared in exact rational arithmetic; Gaussian samples
come from the caller-owned generator's standard normal. Family descriptors
are immutable; all randomness flows through explicit rng arguments.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import ScaledPacking


class UnsupportedFeasibleError(ValueError):
    """The (family, feasible set) pair has no implemented minimizer."""


class NonDifferentiableError(TypeError):
    """Gradient requested from a family without one."""


# ---------------------------------------------------------------------------
# feasible sets

@dataclass(frozen=True)
class Feasible:
    """Feasible-set descriptor: a box (continuous or integer), an l2 ball,
    an explicit point list, or all of R^d."""

    kind: str  # box_continuous | box_integer | l2_ball | explicit | all_space
    radius: float | None = None
    points: tuple[tuple, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("box_continuous", "box_integer", "l2_ball",
                             "explicit", "all_space"):
            raise ValueError(f"unknown feasible kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.points:
                raise ValueError("explicit feasible set needs points")
        elif self.kind != "all_space":
            if self.radius is None or self.radius <= 0:
                raise ValueError(f"{self.kind} needs a positive radius")

    @classmethod
    def box_continuous(cls, R):
        return cls("box_continuous", radius=float(R))

    @classmethod
    def box_integer(cls, floor_r):
        return cls("box_integer", radius=float(floor_r))

    @classmethod
    def l2_ball(cls, R):
        return cls("l2_ball", radius=float(R))

    @classmethod
    def explicit(cls, points):
        return cls("explicit", points=tuple(tuple(p) for p in points))

    @classmethod
    def all_space(cls):
        return cls("all_space")

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "all_space":
            return True
        if self.kind == "box_continuous":
            return bool(np.all(np.abs(x) <= self.radius + tol))
        if self.kind == "box_integer":
            if not np.all(np.abs(x - np.round(x)) <= tol):
                return False
            return not math.isfinite(self.radius) or \
                bool(np.all(np.abs(x) <= self.radius + tol))
        if self.kind == "l2_ball":
            return bool(np.linalg.norm(x) <= self.radius + tol)
        return any(np.allclose(x, np.asarray(p, float), atol=tol)
                   for p in self.points)

    def to_spec(self) -> dict:
        out = {"kind": self.kind}
        if self.radius is not None:
            out["radius"] = "inf" if math.isinf(self.radius) else self.radius
        if self.points is not None:
            out["points"] = [list(p) for p in self.points]
        return out

    @classmethod
    def from_spec(cls, spec: dict) -> "Feasible":
        radius = spec.get("radius")
        if radius == "inf":
            radius = math.inf
        points = spec.get("points")
        return cls(spec["kind"], radius=radius,
                   points=tuple(tuple(p) for p in points) if points else None)


def _bernoulli_exact(p: Fraction, rng) -> bool:
    """Inverse-CDF Bernoulli draw with the threshold compared as a rational."""
    return Fraction(rng.random()) < p


def integer_quadratic_argmin(c: float, mu: float, lo: float, hi: float) -> int:
    """argmin over integers in [lo, hi] of (mu/2) x^2 - c x, ties to the
    smaller integer; lo/hi may be -inf/inf."""
    f = math.floor(c / mu)
    x = f if c <= mu * (f + 0.5) else f + 1
    if math.isfinite(lo):
        x = max(x, int(math.ceil(lo)))
    if math.isfinite(hi):
        x = min(x, int(math.floor(hi)))
    return int(x)


def gadget_block_value(mu: float, L: float, tau: int, c1: float, c2: float,
                       x: float, y: float) -> float:
    """Two-variable block objective mu(x-tau*y)^2 + (L/4)(y-1/2)^2 - c1*x - c2*y."""
    return mu * (x - tau * y) ** 2 + 0.25 * L * (y - 0.5) ** 2 - c1 * x - c2 * y


# ---------------------------------------------------------------------------
# base class

class LossFamily:
    """A distribution over loss functions f(.; z) with closed forms for the
    population objective and its minimizer over supported feasible sets."""

    tag: str = "abstract"
    d: int
    anchored: bool = False

    def sample(self, rng):
        raise NotImplementedError

    def sample_many(self, m: int, rng) -> list:
        return [self.sample(rng) for _ in range(m)]

    def loss(self, x, z) -> float:
        raise NotImplementedError

    def population_objective(self, x) -> float:
        raise NotImplementedError

    def population_minimizer(self, feasible: Feasible):
        raise NotImplementedError

    def excess(self, feasible: Feasible, x) -> float:
        """Population excess of x over the feasible minimum; rejects
        infeasible points and clips rounding noise below 1e-12."""
        if not feasible.contains(x):
            raise ValueError(f"{x} is not feasible for {feasible.kind}")
        _, best = self.population_minimizer(feasible)
        gap = self.population_objective(x) - best
        if gap < -1e-12:
            raise AssertionError(f"negative excess {gap}; closed forms disagree")
        return max(gap, 0.0)

    def grad(self, x, z) -> np.ndarray:
        raise NonDifferentiableError(f"{self.tag} has no per-sample gradient")

    # sufficient statistics (where the empirical objective has one)
    def sufficient_statistic(self, samples) -> np.ndarray:
        raise NotImplementedError(f"{self.tag} has no sufficient statistic")

    def sample_statistic(self, m: int, rng) -> np.ndarray:
        """Draw the sufficient statistic of an m-sample directly from its
        exact sampling distribution."""
        return self.sufficient_statistic(self.sample_many(m, rng))

    def empirical_objective_from_stat(self, stat, m: int, x) -> float:
        raise NotImplementedError(f"{self.tag} has no sufficient statistic")

    def _minimize_over_points(self, points):
        pts = sorted(tuple(p) for p in points)
        if not pts:
            raise ValueError("empty feasible point list")
        best, best_val = None, math.inf
        for p in pts:
            v = self.population_objective(np.asarray(p, dtype=float))
            if v < best_val:
                best, best_val = p, v
        return np.asarray(best, dtype=float), best_val


def _check_pm_one(vec, name):
    if any(v not in (-1, 1) for v in vec):
        raise ValueError(f"{name} must be a +-1 vector, got {vec}")


# ---------------------------------------------------------------------------
# coin-flip linear losses on the box

@dataclass(frozen=True)
class CoinLinearFamily(LossFamily):
    """Linear losses f(x; (j,k)) = -k * x_j driven by biased coin flips.

    In dimension mode the sample picks a uniformly random coordinate j and a
    sign with mean rho*b_j; in confidence mode only coordinate 0 is active.
    The population objective is -(rho/d) <b, x>, resp. -rho*b*x_0.
    """

    d: int
    R: float
    rho: float
    b: tuple[int, ...]
    mode: str = "dimension"

    tag = "coin_linear"
    anchored = True

    def __post_init__(self):
        if self.mode not in ("dimension", "confidence"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 < self.rho <= 0.5:
            raise ValueError(f"rho must lie in (0, 1/2], got {self.rho}")
        if self.R <= 0 or self.d < 1:
            raise ValueError("need R > 0 and d >= 1")
        b = tuple(int(v) for v in self.b)
        object.__setattr__(self, "b", b)
        _check_pm_one(b, "b")
        n_active = self.d if self.mode == "dimension" else 1
        if len(b) != n_active:
            raise ValueError(f"b must have length {n_active} in {self.mode} mode")
        # probabilities over [d] x {+-1} sum to one, checked exactly
        rho_f = Fraction(self.rho)
        total = sum(Fraction(1, n_active) * (1 + rho_f * k * bj) / 2
                    for bj in b for k in (1, -1))
        assert total == 1

    def _p_plus(self, j: int) -> Fraction:
        return (1 + Fraction(self.rho) * self.b[j]) / 2

    def sample(self, rng):
        j = int(rng.integers(len(self.b)))
        k = 1 if _bernoulli_exact(self._p_plus(j), rng) else -1
        return (j, k)

    def loss(self, x, z) -> float:
        j, k = z
        x = np.asarray(x, dtype=float)
        if len(x) != self.d:
            raise ValueError(f"expected dimension {self.d}, got {len(x)}")
        return float(-k * x[j])

    def grad(self, x, z) -> np.ndarray:
        j, k = z
        g = np.zeros(self.d)
        g[j] = -k
        return g

    def population_objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.mode == "dimension":
            return float(-(self.rho / self.d) * np.dot(self.b, x))
        return float(-self.rho * self.b[0] * x[0])

    def population_minimizer(self, feasible: Feasible):
        if feasible.kind in ("box_continuous", "box_integer"):
            r = feasible.radius
            if not math.isfinite(r):
                raise UnsupportedFeasibleError("coin losses need a bounded box")
            if self.mode == "dimension":
                x = float(r) * np.asarray(self.b, dtype=float)
            else:
                x = np.zeros(self.d)
                x[0] = float(r) * self.b[0]
            return x, self.population_objective(x)
        if feasible.kind == "explicit":
            return self._minimize_over_points(feasible.points)
        raise UnsupportedFeasibleError(
            f"coin_linear does not support feasible kind {feasible.kind!r}")

    def sufficient_statistic(self, samples) -> np.ndarray:
        counts = np.zeros(self.d, dtype=np.int64)
        for j, k in samples:
            counts[j] += k
        return counts

    def sample_statistic(self, m: int, rng) -> np.ndarray:
        n_active = len(self.b)
        # cell layout: (j, +1), (j, -1) for each active coordinate
        pcells = np.empty(2 * n_active)
        for j in range(n_active):
            pp = float(self._p_plus(j)) / n_active
            pcells[2 * j] = pp
            pcells[2 * j + 1] = 1.0 / n_active - pp
        pcells = pcells / pcells.sum()
        cells = rng.multinomial(m, pcells)
        signed = cells[0::2] - cells[1::2]
        counts = np.zeros(self.d, dtype=np.int64)
        counts[:n_active] = signed
        return counts

    def empirical_objective_from_stat(self, stat, m: int, x) -> float:
        return float(-np.dot(stat, np.asarray(x, dtype=float)) / m)


# ---------------------------------------------------------------------------
# tent losses hiding a packing center

@dataclass(frozen=True)
class TentFamily(LossFamily):
    """Negative tents of height r/4 at packing centers; the hidden center's
    activation probability is (1+rho)/2 against (1-rho)/2 elsewhere.

    A sample is the activated subset of centers, encoded as a 0/1 tuple in
    packing order. Separation of the packing makes the tent supports
    pairwise disjoint, which the constructor re-checks.
    """

    packing: ScaledPacking
    hidden: int
    rho: float

    tag = "tent"
    anchored = True

    def __post_init__(self):
        if not 0 < self.rho <= 0.5:
            raise ValueError(f"rho must lie in (0, 1/2], got {self.rho}")
        if not 0 <= self.hidden < len(self.packing):
            raise ValueError(f"hidden index {self.hidden} out of range")
        C = self.packing.centers_array()
        r = self.packing.radius
        # pairwise distance >= r implies disjoint supports of radius r/4
        for i in range(len(C)):
            for j in range(i + 1, len(C)):
                if np.linalg.norm(C[i] - C[j]) < r / 2:
                    raise ValueError("packing separation too weak for disjoint tents")

    @property
    def d(self) -> int:
        return self.packing.dimension

    @property
    def n_centers(self) -> int:
        return len(self.packing)

    def _psi(self, x) -> np.ndarray:
        """Tent heights at x for every center; at most one is positive."""
        C = self.packing.centers_array()
        r = self.packing.radius
        dist = np.linalg.norm(C - np.asarray(x, dtype=float), axis=1)
        return np.maximum(0.0, r / 4.0 - dist)

    def _p_active(self, i: int) -> Fraction:
        rho_f = Fraction(self.rho)
        return (1 + rho_f) / 2 if i == self.hidden else (1 - rho_f) / 2

    def sample(self, rng):
        return tuple(int(_bernoulli_exact(self._p_active(i), rng))
                     for i in range(self.n_centers))

    def loss(self, x, z) -> float:
        psi = self._psi(x)
        active = [psi[i] for i, on in enumerate(z) if on]
        return float(-max(active, default=0.0))

    def population_objective(self, x) -> float:
        psi = self._psi(x)
        i = int(np.argmax(psi))
        if psi[i] <= 0.0:
            return 0.0
        return float(-float(self._p_active(i)) * psi[i])

    def population_minimizer(self, feasible: Feasible):
        u = np.asarray(self.packing.centers[self.hidden], dtype=float)
        if feasible.kind == "l2_ball":
            if self.packing.radius > feasible.radius + 1e-9:
                raise UnsupportedFeasibleError("ball does not contain the centers")
        elif feasible.kind == "explicit":
            if not feasible.contains(u):
                raise UnsupportedFeasibleError("explicit set misses the hidden center")
        else:
            raise UnsupportedFeasibleError(
                f"tent does not support feasible kind {feasible.kind!r}")
        return u, self.population_objective(u)

    def sufficient_statistic(self, samples) -> np.ndarray:
        return np.sum(np.asarray(samples, dtype=np.int64), axis=0)

    def sample_statistic(self, m: int, rng) -> np.ndarray:
        probs = [float(self._p_active(i)) for i in range(self.n_centers)]
        return rng.binomial(m, probs).astype(np.int64)

    def empirical_objective_from_stat(self, stat, m: int, x) -> float:
        psi = self._psi(x)
        i = int(np.argmax(psi))
        if psi[i] <= 0.0:
            return 0.0
        return float(-stat[i] / m * psi[i])


# ---------------------------------------------------------------------------
# Gaussian-mean quadratic losses

class _GaussianQuadBase(LossFamily):
    """Shared mechanics for losses of the form det_part(x) - <Z, x> with
    Z ~ N(theta, sigma^2 I)."""

    sigma: float

    def gaussian_mean(self) -> np.ndarray:
        raise NotImplementedError

    def _det_part(self, x) -> float:
        raise NotImplementedError

    def _det_grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng) -> np.ndarray:
        return self.gaussian_mean() + self.sigma * rng.standard_normal(self.d)

    def loss(self, x, z) -> float:
        x = np.asarray(x, dtype=float)
        return self._det_part(x) - float(np.dot(z, x))

    def grad(self, x, z) -> np.ndarray:
        return self._det_grad(np.asarray(x, dtype=float)) - np.asarray(z, float)

    def population_objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self._det_part(x) - float(np.dot(self.gaussian_mean(), x))

    def sufficient_statistic(self, samples) -> np.ndarray:
        return np.mean(np.asarray(samples, dtype=float), axis=0)

    def sample_statistic(self, m: int, rng) -> np.ndarray:
        return self.gaussian_mean() + \
            (self.sigma / math.sqrt(m)) * rng.standard_normal(self.d)

    def empirical_objective_from_stat(self, stat, m: int, x) -> float:
        x = np.asarray(x, dtype=float)
        return self._det_part(x) - float(np.dot(stat, x))


@dataclass(frozen=True)
class QuadGaussianFamily(_GaussianQuadBase):
    """f(x; Z) = (mu/2)||x||^2 - <Z, x> with Z ~ N(theta, sigma^2 I)."""

    d: int
    mu: float
    sigma: float
    theta: tuple[float, ...]

    tag = "quad_gaussian"
    anchored = True

    def __post_init__(self):
        if self.mu <= 0 or self.sigma < 0 or self.d < 1:
            raise ValueError("need mu > 0, sigma >= 0, d >= 1")
        th = tuple(float(v) for v in self.theta)
        if len(th) != self.d:
            raise ValueError("theta length must equal d")
        object.__setattr__(self, "theta", th)

    def gaussian_mean(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)

    def _det_part(self, x) -> float:
        return 0.5 * self.mu * float(np.dot(x, x))

    def _det_grad(self, x) -> np.ndarray:
        return self.mu * x

    def hessian(self, x, z) -> np.ndarray:
        return self.mu * np.eye(self.d)

    def population_minimizer(self, feasible: Feasible):
        theta = self.gaussian_mean()
        if feasible.kind == "all_space":
            x = theta / self.mu
        elif feasible.kind == "box_continuous":
            x = np.clip(theta / self.mu, -feasible.radius, feasible.radius)
        elif feasible.kind == "l2_ball":
            x = theta / self.mu
            n = np.linalg.norm(x)
            if n > feasible.radius:
                x = x * (feasible.radius / n)
        elif feasible.kind == "box_integer":
            r = feasible.radius
            x = np.array([integer_quadratic_argmin(t, self.mu, -r, r)
                          for t in theta], dtype=float)
        elif feasible.kind == "explicit":
            return self._minimize_over_points(feasible.points)
        else:
            raise UnsupportedFeasibleError(feasible.kind)
        return x, self.population_objective(x)


@dataclass(frozen=True)
class SmallKappaQuadFamily(_GaussianQuadBase):
    """Quadratic Gaussian-mean loss whose mean (mu/2)*1 + gamma*b places the
    per-coordinate integer minimizer at 1 for b_j = +1 and 0 for b_j = -1."""

    d: int
    mu: float
    gamma: float
    b: tuple[int, ...]
    sigma: float

    tag = "small_kappa_quad"
    anchored = True

    def __post_init__(self):
        if self.mu <= 0 or self.sigma < 0 or self.d < 1:
            raise ValueError("need mu > 0, sigma >= 0, d >= 1")
        if not 0 < self.gamma <= self.mu / 72:
            raise ValueError(f"gamma must lie in (0, mu/72], got {self.gamma}")
        b = tuple(int(v) for v in self.b)
        _check_pm_one(b, "b")
        if len(b) != self.d:
            raise ValueError("b length must equal d")
        object.__setattr__(self, "b", b)

    def gaussian_mean(self) -> np.ndarray:
        return 0.5 * self.mu + self.gamma * np.asarray(self.b, dtype=float)

    def _det_part(self, x) -> float:
        return 0.5 * self.mu * float(np.dot(x, x))

    def _det_grad(self, x) -> np.ndarray:
        return self.mu * x

    def hessian(self, x, z) -> np.ndarray:
        return self.mu * np.eye(self.d)

    def population_minimizer(self, feasible: Feasible):
        if feasible.kind == "box_integer":
            if feasible.radius < 1:
                raise UnsupportedFeasibleError("box must contain {0, 1}")
            x = np.array([1.0 if bj == 1 else 0.0 for bj in self.b])
            return x, self.population_objective(x)
        if feasible.kind == "explicit":
            return self._minimize_over_points(feasible.points)
        raise UnsupportedFeasibleError(feasible.kind)


@dataclass(frozen=True)
class BlockGadgetFamily(_GaussianQuadBase):
    """Per-block losses mu(x - tau*y)^2 + (L/4)(y - 1/2)^2 plus a Gaussian
    linear tilt that hides one sign per block.

    The quadratic part ties the integer points (0,0) and (tau,1) of each
    block exactly; the tilt with mean gamma*b_j/tau on the block's first
    coordinate breaks the tie toward (tau,1) for b_j = +1 and (0,0) for
    b_j = -1, with gap gamma. An odd leftover coordinate gets (mu/2) x_d^2.
    """

    d: int
    mu: float
    L: float
    tau: int
    gamma: float
    b: tuple[int, ...]
    sigma: float

    tag = "block_gadget"

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("block gadget needs d >= 2")
        if self.mu <= 0 or self.L < 64 * self.mu:
            raise ValueError("need mu > 0 and kappa = L/mu >= 64")
        if self.tau < 1 or 16 * self.mu * self.tau ** 2 > self.L:
            raise ValueError(f"need integer tau >= 1 with tau^2 <= kappa/16")
        if not 0 < self.gamma <= self.mu / 24:
            raise ValueError(f"gamma must lie in (0, mu/24], got {self.gamma}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        b = tuple(int(v) for v in self.b)
        _check_pm_one(b, "b")
        if len(b) != self.d // 2:
            raise ValueError(f"b must have length floor(d/2) = {self.d // 2}")
        object.__setattr__(self, "b", b)

    @property
    def n_blocks(self) -> int:
        return self.d // 2

    def gaussian_mean(self) -> np.ndarray:
        theta = np.zeros(self.d)
        for j, bj in enumerate(self.b):
            theta[2 * j] = self.gamma * bj / self.tau
        return theta

    def _det_part(self, x) -> float:
        total = 0.0
        for j in range(self.n_blocks):
            total += gadget_block_value(self.mu, self.L, self.tau, 0.0, 0.0,
                                        x[2 * j], x[2 * j + 1])
        if self.d % 2:
            total += 0.5 * self.mu * x[-1] ** 2
        return total

    def _det_grad(self, x) -> np.ndarray:
        g = np.zeros(self.d)
        for j in range(self.n_blocks):
            xo, ye = x[2 * j], x[2 * j + 1]
            p = xo - self.tau * ye
            g[2 * j] = 2 * self.mu * p
            g[2 * j + 1] = -2 * self.mu * self.tau * p + 0.5 * self.L * (ye - 0.5)
        if self.d % 2:
            g[-1] = self.mu * x[-1]
        return g

    def empirical_objective_from_stat(self, stat, m: int, x) -> float:
        # block-grouped evaluation, shared with the block ERM solver so that
        # exact ties are seen identically on both paths
        x = np.asarray(x, dtype=float)
        total = 0.0
        for j in range(self.n_blocks):
            total += gadget_block_value(self.mu, self.L, self.tau,
                                        stat[2 * j], stat[2 * j + 1],
                                        x[2 * j], x[2 * j + 1])
        if self.d % 2:
            total += 0.5 * self.mu * x[-1] ** 2 - stat[-1] * x[-1]
        return float(total)

    def population_objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.empirical_objective_from_stat(self.gaussian_mean(), 1, x)

    def hessian(self, x, z) -> np.ndarray:
        H = np.zeros((self.d, self.d))
        for j in range(self.n_blocks):
            a, bb = 2 * j, 2 * j + 1
            H[a, a] = 2 * self.mu
            H[a, bb] = H[bb, a] = -2 * self.mu * self.tau
            H[bb, bb] = 2 * self.mu * self.tau ** 2 + 0.5 * self.L
        if self.d % 2:
            H[-1, -1] = self.mu
        return H

    def block_minimizers(self) -> np.ndarray:
        x = np.zeros(self.d)
        for j, bj in enumerate(self.b):
            if bj == 1:
                x[2 * j] = self.tau
                x[2 * j + 1] = 1.0
        return x

    def decode_blocks(self, x) -> np.ndarray:
        """Per-block sign readout: +1 iff the block sits exactly at (tau, 1).

        The population excess of any integer point dominates
        (gamma/24) * sum_j (1 - b_j * decoded_j)."""
        x = np.asarray(x, dtype=float)
        out = np.empty(self.n_blocks, dtype=np.int64)
        for j in range(self.n_blocks):
            out[j] = 1 if (x[2 * j] == self.tau and x[2 * j + 1] == 1.0) else -1
        return out

    def population_minimizer(self, feasible: Feasible):
        if feasible.kind == "box_integer":
            if feasible.radius < self.tau:
                raise UnsupportedFeasibleError("box must contain the block vertices")
            x = self.block_minimizers()
            return x, self.population_objective(x)
        if feasible.kind == "explicit":
            return self._minimize_over_points(feasible.points)
        raise UnsupportedFeasibleError(feasible.kind)


def block_gadget_window_check(mu, L, tau: int, gamma,
                              x_window=None, y_window=None) -> dict:
    """Exact-rational enumeration of one gadget block over an integer window.

    Confirms the unique minimizers (tau,1) / (0,0) of the two tilt signs, the
    gap of exactly gamma at the opposite vertex, the >= 3*gamma margin at
    every other window point, and the Hessian identities det = mu*L,
    trace <= L. All comparisons are exact (Fraction arithmetic).
    """
    Fm, FL, Fg = Fraction(mu), Fraction(L), Fraction(gamma)
    if Fm <= 0 or FL < 64 * Fm or tau < 1 or 16 * Fm * tau * tau > FL:
        raise ValueError("parameters violate kappa >= 64, tau^2 <= kappa/16")
    if not 0 < Fg <= Fm / 24:
        raise ValueError("gamma must lie in (0, mu/24]")
    xs = x_window if x_window is not None else range(-4 * tau, 4 * tau + 1)
    ys = y_window if y_window is not None else range(-4, 4 + 1)

    def phi(bsign, x, y):
        return (Fm * (x - tau * y) ** 2 + FL * (2 * y - 1) ** 2 / 16
                - Fg * bsign * Fraction(x, tau))

    out = {"det_ok": None, "trace_ok": None}
    det = 2 * Fm * (2 * Fm * tau * tau + FL / 2) - (2 * Fm * tau) ** 2
    out["det_ok"] = det == Fm * FL
    out["trace_ok"] = 2 * Fm + 2 * Fm * tau * tau + FL / 2 <= FL
    for bsign, vertex, other in ((1, (tau, 1), (0, 0)), (-1, (0, 0), (tau, 1))):
        vals = {(x, y): phi(bsign, x, y) for x in xs for y in ys}
        vmin = vals[vertex]
        unique = all(v > vmin for k, v in vals.items() if k != vertex)
        gap = vals[other] - vmin
        rest = [v - vmin for k, v in vals.items() if k not in (vertex, other)]
        key = "plus" if bsign == 1 else "minus"
        out[f"unique_min_{key}"] = unique
        out[f"gap_exact_{key}"] = gap == Fg
        out[f"margin3_{key}"] = all(v >= 3 * Fg for v in rest)
    out["ok"] = all(v for v in out.values() if isinstance(v, bool))
    return out


# ---------------------------------------------------------------------------
# regularized logistic losses

@dataclass(frozen=True)
class LogisticFamily(LossFamily):
    """Ridge-regularized logistic loss with features uniform on the radius-M
    sphere and labels sign(<a, w0>) flipped with probability eta.

    Each sample loss is mu-strongly convex and (mu + M^2/4)-smooth; the
    quadratic term is deterministic, so centered increments are bounded by
    2M||x - y||, like a Lipschitz family with constant M.
    """

    d: int
    mu: float
    M: float
    eta: float = 0.0
    w0: tuple[float, ...] | None = None

    tag = "logistic"

    def __post_init__(self):
        if self.mu <= 0 or self.M <= 0 or self.d < 1:
            raise ValueError("need mu > 0, M > 0, d >= 1")
        if not 0 <= self.eta < 0.5:
            raise ValueError(f"label flip eta must lie in [0, 1/2), got {self.eta}")
        w = self.w0 if self.w0 is not None else (1.0,) + (0.0,) * (self.d - 1)
        w = np.asarray(w, dtype=float)
        n = np.linalg.norm(w)
        if len(w) != self.d or n == 0:
            raise ValueError("w0 must be a nonzero vector of length d")
        object.__setattr__(self, "w0", tuple(w / n))

    def sample(self, rng):
        g = rng.standard_normal(self.d)
        n = np.linalg.norm(g)
        if n == 0.0:
            g[0], n = 1.0, 1.0
        a = self.M * g / n
        clean = 1 if float(np.dot(a, self.w0)) >= 0 else -1
        flip = self.eta > 0 and _bernoulli_exact(Fraction(self.eta), rng)
        return (a, -clean if flip else clean)

    def loss(self, x, z) -> float:
        a, b = z
        x = np.asarray(x, dtype=float)
        margin = b * float(np.dot(a, x))
        return 0.5 * self.mu * float(np.dot(x, x)) + float(np.logaddexp(0.0, -margin))

    def grad(self, x, z) -> np.ndarray:
        a, b = z
        x = np.asarray(x, dtype=float)
        margin = b * float(np.dot(a, x))
        return self.mu * x - (b / (1.0 + math.exp(margin))) * np.asarray(a, float)

    def hessian(self, x, z) -> np.ndarray:
        a, b = z
        a = np.asarray(a, float)
        margin = b * float(np.dot(a, x))
        s = 1.0 / (1.0 + math.exp(-margin))
        return self.mu * np.eye(self.d) + s * (1 - s) * np.outer(a, a)

    def population_objective(self, x) -> float:
        """Quadrature over the sphere angle pair; exact mixture over the flip."""
        x = np.asarray(x, dtype=float)
        w0 = np.asarray(self.w0, dtype=float)
        alpha = float(np.dot(x, w0))
        beta = float(np.linalg.norm(x - alpha * w0))

        def softplus(u):
            return np.logaddexp(0.0, -u)

        def g(t1, t2):
            s = np.where(t1 >= 0, 1.0, -1.0)
            u = self.M * (alpha * t1 + beta * t2)
            return (1 - self.eta) * softplus(s * u) + self.eta * softplus(-s * u)

        quad = 0.5 * self.mu * float(np.dot(x, x))
        return quad + _sphere_pair_expectation(g, self.d)

    def population_minimizer(self, feasible: Feasible):
        raise UnsupportedFeasibleError(
            "logistic population minimizer has no closed form")


def _gauss_legendre(a: float, b: float, order: int = 96):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * nodes, half * weights


def _sphere_pair_expectation(g, d: int, order: int = 96) -> float:
    """E[g(T1, T2)] for (T1, T2) the first two coordinates of a uniform unit
    vector in R^d. Integration splits at T1 = 0 where g may kink."""
    if d == 1:
        return 0.5 * (float(g(np.array(1.0), np.array(0.0)))
                      + float(g(np.array(-1.0), np.array(0.0))))
    if d == 2:
        total = 0.0
        for a, b in ((0, 0.5), (0.5, 1.5), (1.5, 2.0)):
            t, w = _gauss_legendre(a * math.pi, b * math.pi, order)
            total += float(np.sum(w * g(np.cos(t), np.sin(t))))
        return total / (2 * math.pi)
    num = 0.0
    den = 0.0
    psi, wpsi = _gauss_legendre(0.0, math.pi, order)
    cos_psi = np.cos(psi)
    wp = wpsi * np.sin(psi) ** (d - 3)
    for a, b in ((0.0, 0.5), (0.5, 1.0)):
        phi, wphi = _gauss_legendre(a * math.pi, b * math.pi, order)
        sphi = np.sin(phi)
        wf = wphi * sphi ** (d - 2)
        t1 = np.cos(phi)[:, None]
        t2 = sphi[:, None] * cos_psi[None, :]
        vals = g(np.broadcast_to(t1, t2.shape), t2)
        num += float(wf @ vals @ wp)
        den += float(np.sum(wf) * np.sum(wp))
    return num / den


# ---------------------------------------------------------------------------
# regularity verification

@dataclass(frozen=True)
class RegularityCheck:
    name: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class RegularityReport:
    family_tag: str
    checks: tuple[RegularityCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def summary(self) -> str:
        lines = [f"[{self.family_tag}]"]
        for c in self.checks:
            lines.append(f"  {'PASS' if c.ok else 'FAIL'} {c.name}: {c.detail}")
        return "\n".join(lines)


def _fd_grad(f, x, step):
    g = np.zeros(len(x))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _fd_hessian(grad, x, step):
    d = len(x)
    H = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * step)
    return 0.5 * (H + H.T)


def _domain_point(family, rng) -> np.ndarray:
    if isinstance(family, CoinLinearFamily):
        return rng.uniform(-family.R, family.R, size=family.d)
    if isinstance(family, TentFamily):
        R = float(family.packing.enclosing_radius.value)
        v = rng.standard_normal(family.d)
        v /= np.linalg.norm(v)
        return R * rng.uniform() ** (1.0 / family.d) * v
    return rng.uniform(-3.0, 3.0, size=family.d)


def verify_regularity(family: LossFamily, trials: int = 200, seed: int = 0,
                      increment_draws: int = 100_000) -> RegularityReport:
    """Randomized audit of a family's declared analytic properties.

    Checks, as applicable: anchoring f(0; z) = 0; Lipschitz ratios against
    the declared constant; analytic gradient and Hessian against central
    finite differences (step 1e-4 * (1 + ||x||), relative error 1e-5);
    Hessian eigenvalues within [mu, L]; bounded centered increments for
    Lipschitz-type families; empirical centered-increment variance within
    [0.9, 1.1] * sigma^2 ||x-y||^2 for the Gaussian families.
    """
    rng = np.random.default_rng(seed)
    checks: list[RegularityCheck] = []

    def add(name, ok, detail):
        checks.append(RegularityCheck(name, bool(ok), detail))

    zs = [family.sample(rng) for _ in range(min(trials, 256))]

    if family.anchored:
        zero = np.zeros(family.d)
        bad = sum(1 for z in zs if family.loss(zero, z) != 0.0)
        add("anchoring", bad == 0, f"{bad} nonzero values of f(0; z)")

    lip = None
    if isinstance(family, CoinLinearFamily):
        lip = (1.0, lambda v: float(np.max(np.abs(v))), "linf")
    elif isinstance(family, TentFamily):
        lip = (1.0, lambda v: float(np.linalg.norm(v)), "l2")
    if lip is not None:
        const, norm, label = lip
        worst = 0.0
        for _ in range(trials):
            x, y = _domain_point(family, rng), _domain_point(family, rng)
            z = zs[int(rng.integers(len(zs)))]
            denom = norm(x - y)
            if denom > 0:
                worst = max(worst, abs(family.loss(x, z) - family.loss(y, z)) / denom)
        add(f"lipschitz_{label}", worst <= const + 1e-9,
            f"max ratio {worst:.6f} vs declared {const}")

    has_grad = not isinstance(family, TentFamily)
    if has_grad:
        worst = 0.0
        for _ in range(min(trials, 32)):
            x = _domain_point(family, rng)
            z = zs[int(rng.integers(len(zs)))]
            step = 1e-4 * (1.0 + float(np.linalg.norm(x)))
            fd = _fd_grad(lambda v: family.loss(v, z), x, step)
            g = family.grad(x, z)
            worst = max(worst, float(np.max(np.abs(fd - g)))
                        / max(1.0, float(np.max(np.abs(g)))))
        add("gradient_fd", worst <= 1e-5, f"max relative error {worst:.2e}")

    if hasattr(family, "hessian"):
        worst = 0.0
        eig_lo, eig_hi = math.inf, -math.inf
        for _ in range(min(trials, 16)):
            x = _domain_point(family, rng)
            z = zs[int(rng.integers(len(zs)))]
            step = 1e-4 * (1.0 + float(np.linalg.norm(x)))
            H = family.hessian(x, z)
            fd = _fd_hessian(lambda v: family.grad(v, z), x, step)
            worst = max(worst, float(np.max(np.abs(fd - H)))
                        / max(1.0, float(np.max(np.abs(H)))))
            w = np.linalg.eigvalsh(H)
            eig_lo, eig_hi = min(eig_lo, w[0]), max(eig_hi, w[-1])
        add("hessian_fd", worst <= 1e-5, f"max relative error {worst:.2e}")
        mu = family.mu
        if isinstance(family, BlockGadgetFamily):
            L = family.L
        elif isinstance(family, LogisticFamily):
            L = family.mu + family.M ** 2 / 4
        else:
            L = family.mu
        tol = 1e-9 * max(1.0, L)
        add("hessian_eigenvalues", eig_lo >= mu - tol and eig_hi <= L + tol,
            f"eigenvalues in [{eig_lo:.6f}, {eig_hi:.6f}] vs [{mu}, {L}]")

    if isinstance(family, BlockGadgetFamily):
        rep = block_gadget_window_check(family.mu, family.L, family.tau, family.gamma)
        add("gadget_window_exact", rep["ok"],
            "unique minimizers, exact gap, 3*gamma margin, det/trace identities")

    if isinstance(family, _GaussianQuadBase):
        theta = family.gaussian_mean()
        ok_var, details = True, []
        for _ in range(3):
            x, y = _domain_point(family, rng), _domain_point(family, rng)
            w = x - y
            scale = family.sigma ** 2 * float(np.dot(w, w))
            if scale == 0.0:
                continue
            zmat = theta + family.sigma * rng.standard_normal((increment_draws, family.d))
            inc = -(zmat - theta) @ w
            ratio = float(np.var(inc)) / scale
            details.append(f"{ratio:.4f}")
            ok_var = ok_var and 0.9 <= ratio <= 1.1
        add("increment_variance", ok_var,
            f"empirical/theory variance ratios: {', '.join(details)}")
    elif lip is not None or isinstance(family, LogisticFamily):
        if isinstance(family, LogisticFamily):
            const = family.M
            norm = lambda v: float(np.linalg.norm(v))
        else:
            const, norm, _ = lip
        ok_inc, worst = True, 0.0
        for _ in range(8):
            x, y = _domain_point(family, rng), _domain_point(family, rng)
            denom = norm(x - y)
            if denom == 0:
                continue
            fx = family.population_objective(x)
            fy = family.population_objective(y)
            for z in zs:
                c = abs(family.loss(x, z) - family.loss(y, z) - fx + fy)
                worst = max(worst, c / denom)
        ok_inc = worst <= 2 * const + 1e-6
        add("bounded_centered_increments", ok_inc,
            f"max |centered increment| / ||x-y|| = {worst:.4f} vs 2*{const}")

    return RegularityReport(family.tag, tuple(checks))


# ---------------------------------------------------------------------------
# serialization

def family_to_spec(family: LossFamily) -> dict:
    if isinstance(family, CoinLinearFamily):
        return {"kind": family.tag, "d": family.d, "R": family.R,
                "rho": family.rho, "mode": family.mode, "b": list(family.b)}
    if isinstance(family, TentFamily):
        return {"kind": family.tag, "packing": family.packing.to_spec(),
                "hidden": family.hidden, "rho": family.rho}
    if isinstance(family, QuadGaussianFamily):
        return {"kind": family.tag, "d": family.d, "mu": family.mu,
                "sigma": family.sigma, "theta": list(family.theta)}
    if isinstance(family, SmallKappaQuadFamily):
        return {"kind": family.tag, "d": family.d, "mu": family.mu,
                "gamma": family.gamma, "sigma": family.sigma, "b": list(family.b)}
    if isinstance(family, BlockGadgetFamily):
        return {"kind": family.tag, "d": family.d, "mu": family.mu, "L": family.L,
                "tau": family.tau, "gamma": family.gamma, "sigma": family.sigma,
                "b": list(family.b)}
    if isinstance(family, LogisticFamily):
        return {"kind": family.tag, "d": family.d, "mu": family.mu, "M": family.M,
                "eta": family.eta, "w0": list(family.w0)}
    raise TypeError(f"cannot serialize {type(family).__name__}")


def family_from_spec(spec: dict, rng=None, randomize: bool = False) -> LossFamily:
    """Rebuild a family from its JSON spec; with randomize=True the hidden
    instance (sign vector or center index) is drawn fresh from rng."""
    kind = spec["kind"]
    if randomize and rng is None:
        raise ValueError("randomize=True needs an rng")

    def hidden_signs(n):
        if randomize:
            return tuple(int(v) for v in rng.integers(0, 2, size=n) * 2 - 1)
        if "b" not in spec or spec["b"] is None:
            raise ValueError(f"fixed-instance {kind} spec needs 'b'")
        return tuple(spec["b"])

    if kind == "coin_linear":
        n = spec["d"] if spec.get("mode", "dimension") == "dimension" else 1
        return CoinLinearFamily(d=spec["d"], R=spec["R"], rho=spec["rho"],
                                b=hidden_signs(n),
                                mode=spec.get("mode", "dimension"))
    if kind == "tent":
        packing = ScaledPacking.from_spec(spec["packing"])
        if randomize:
            hidden = int(rng.integers(len(packing)))
        else:
            if "hidden" not in spec or spec["hidden"] is None:
                raise ValueError("fixed-instance tent spec needs 'hidden'")
            hidden = spec["hidden"]
        return TentFamily(packing=packing, hidden=hidden, rho=spec["rho"])
    if kind == "quad_gaussian":
        return QuadGaussianFamily(d=spec["d"], mu=spec["mu"], sigma=spec["sigma"],
                                  theta=tuple(spec["theta"]))
    if kind == "small_kappa_quad":
        return SmallKappaQuadFamily(d=spec["d"], mu=spec["mu"], gamma=spec["gamma"],
                                    b=hidden_signs(spec["d"]), sigma=spec["sigma"])
    if kind == "block_gadget":
        return BlockGadgetFamily(d=spec["d"], mu=spec["mu"], L=spec["L"],
                                 tau=spec["tau"], gamma=spec["gamma"],
                                 b=hidden_signs(spec["d"] // 2), sigma=spec["sigma"])
    if kind == "logistic":
        return LogisticFamily(d=spec["d"], mu=spec["mu"], M=spec["M"],
                              eta=spec.get("eta", 0.0),
                              w0=tuple(spec["w0"]) if spec.get("w0") else None)
    raise ValueError(f"unknown family kind {kind!r}")


def write_trace_csv(family: LossFamily, samples, path):
    """Serialize raw samples for replay: coins as (j, k) rows, tent subsets
    as 0/1 indicator rows, Gaussian vectors and logistic (a, b) as reals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(family, CoinLinearFamily):
            w.writerow(["j", "k"])
            w.writerows(samples)
        elif isinstance(family, TentFamily):
            w.writerow([f"w{i}" for i in range(family.n_centers)])
            w.writerows(samples)
        elif isinstance(family, _GaussianQuadBase):
            w.writerow([f"z{i + 1}" for i in range(family.d)])
            for z in samples:
                w.writerow([repr(float(v)) for v in z])
        elif isinstance(family, LogisticFamily):
            w.writerow([f"a{i + 1}" for i in range(family.d)] + ["b"])
            for a, b in samples:
                w.writerow([repr(float(v)) for v in a] + [b])
        else:
            raise TypeError(f"cannot trace {type(family).__name__}")


def read_trace_csv(family: LossFamily, path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    if isinstance(family, CoinLinearFamily):
        return [(int(a), int(b)) for a, b in rows]
    if isinstance(family, TentFamily):
        return [tuple(int(v) for v in row) for row in rows]
    if isinstance(family, _GaussianQuadBase):
        return [np.array([float(v) for v in row]) for row in rows]
    if isinstance(family, LogisticFamily):
        return [(np.array([float(v) for v in row[:-1]]), int(row[-1]))
                for row in rows]
    raise TypeError(f"cannot read trace for {type(family).__name__}")
