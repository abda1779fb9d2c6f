"""Information-theoretic calculators and theoretical sample-size formulas.

All logarithms are natural. Constants that the underlying arguments make
explicit (512, 32, 1024, 96, 6144) are hardcoded; unnamed absolute constants
enter as a free multiplicative ``constant`` parameter defaulting to 1.
Infinite KL divergence is returned as ``math.inf`` rather than raised, so
downstream compositions degrade gracefully.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import RadiusSpec, h2


@dataclass(frozen=True)
class BoundQuery:
    """Inputs shared by the bound evaluators; mu/L/sigma are only needed by
    the strongly convex formulas."""

    d: int
    R: RadiusSpec
    epsilon: float
    delta: float
    mu: float | None = None
    L: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "R", RadiusSpec.coerce(self.R))
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        for name in ("mu", "L", "sigma"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.mu is not None and self.L is not None and self.L < self.mu:
            raise ValueError(f"need L >= mu, got L={self.L}, mu={self.mu}")

    @property
    def kappa(self) -> float:
        if self.mu is None or self.L is None:
            raise ValueError("kappa requires both mu and L")
        return self.L / self.mu


def bernoulli_kl(p: float, q: float) -> float:
    """KL(Bern(p) || Bern(q)) in nats, with the 0*ln(0) = 0 convention.

    Degenerate q in {0, 1} yields math.inf unless p matches the atom.
    """
    if not 0 <= p <= 1 or not 0 <= q <= 1:
        raise ValueError("p and q must lie in [0, 1]")
    out = 0.0
    for a, b in ((p, q), (1 - p, 1 - q)):
        if a == 0:
            continue
        if b == 0:
            return math.inf
        out += a * math.log(a / b)
    return out


def symmetric_coin_kl(alpha: float) -> tuple[float, float]:
    """Exact KL(Bern(1/2+a) || Bern(1/2-a)) and the quadratic bound 16*a^2."""
    if not 0 <= alpha <= 0.25:
        raise ValueError(f"alpha must lie in [0, 1/4], got {alpha}")
    if alpha == 0:
        return 0.0, 0.0
    exact = 2 * alpha * math.log((1 + 2 * alpha) / (1 - 2 * alpha))
    return exact, 16 * alpha * alpha


def gaussian_product_kl(theta, theta_prime, sigma: float, m: int) -> float:
    """KL between m-fold products of spherical Gaussians with common scale:
    m * ||theta - theta'||^2 / (2 sigma^2)."""
    t, tp = np.asarray(theta, float), np.asarray(theta_prime, float)
    if t.shape != tp.shape:
        raise ValueError(f"dimension mismatch: {t.shape} vs {tp.shape}")
    if sigma <= 0 or m < 1:
        raise ValueError("need sigma > 0 and m >= 1")
    return m * float(np.sum((t - tp) ** 2)) / (2 * sigma * sigma)


def fano_error_lower_bound(avg_kl: float, V_size: int) -> float:
    """Lower bound on the average error of any |V|-ary test, clamped at 0."""
    if V_size < 2:
        raise ValueError(f"need |V| >= 2, got {V_size}")
    if avg_kl < 0:
        raise ValueError("avg_kl must be nonnegative")
    return max(0.0, 1.0 - (avg_kl + math.log(2)) / math.log(V_size))


def two_point_kl_threshold(delta: float) -> float:
    """Minimum KL any (1-delta, delta)-separating experiment must supply."""
    if not 0 < delta <= 0.25:
        raise ValueError(f"delta must lie in (0, 1/4], got {delta}")
    return 0.5 * math.log(1.0 / (2.0 * delta))


def pinsker_tv_bound(kl: float) -> float:
    """Total-variation upper bound sqrt(kl / 2)."""
    if kl < 0:
        raise ValueError("kl must be nonnegative")
    return math.sqrt(kl / 2.0)


@dataclass(frozen=True)
class LinfLowerBounds:
    dimension_term: float
    confidence_term: float
    combined: float
    regime_ok: bool


def linf_lower_bounds(q: BoundQuery) -> LinfLowerBounds:
    """Sample-size lower bounds for linear losses over the box of radius R.

    dimension_term = R^2 d / (512 eps^2),
    confidence_term = (R^2 / (32 eps^2)) ln(1/(2 delta)),
    combined = (R^2 / (1024 eps^2)) (d + ln(1/delta)).

    Valid in the regime eps <= R/8, delta <= 1/4, R >= 1; outside it the
    values are still computed and ``regime_ok`` is False.
    """
    if not q.R.is_finite:
        raise ValueError("linf lower bounds require a finite radius")
    R = float(q.R.value)
    eps, delta, d = q.epsilon, q.delta, q.d
    regime_ok = eps <= R / 8 and delta <= 0.25 and R >= 1
    r2e2 = R * R / (eps * eps)
    dim = r2e2 * d / 512.0
    conf = (r2e2 / 32.0) * math.log(1.0 / (2.0 * delta))
    comb = (r2e2 / 1024.0) * (d + math.log(1.0 / delta))
    return LinfLowerBounds(dim, conf, comb, regime_ok)


def tent_lower_bound(r: float, epsilon: float, delta: float, log_W: float) -> float:
    """Sample-size lower bound for identifying a hidden packing center from
    biased tent activations: (r^2 / (6144 eps^2)) (log|W| + ln(1/delta))."""
    if r <= 0 or log_W <= 0:
        raise ValueError("need r > 0 and log_W > 0")
    if not 0 < epsilon <= r / 16:
        raise ValueError(f"epsilon must lie in (0, r/16], got {epsilon}")
    if not 0 < delta <= 0.25:
        raise ValueError(f"delta must lie in (0, 1/4], got {delta}")
    rho = 8.0 * epsilon / r
    return (1.0 / 96.0) * rho ** -2 * (log_W + math.log(1.0 / delta))


@dataclass(frozen=True)
class ScRates:
    auc_rate: float
    erm_rate: float
    continuous_erm_rate: float


def sc_rate_formulas(q: BoundQuery, constant: float = 1.0) -> ScRates:
    """Sample-size scales for strongly convex losses on the integer box.

    auc_rate  = C sigma^2 floor(R)^2 d (d + ln(1/delta)) / eps^2  (inf if R = inf)
    erm_rate  = C sigma^2 d min(kappa, floor(R)^2) (d + ln(1/delta)) / eps^2
    continuous_erm_rate = C (sigma^2 / (mu eps)) (d + ln(1/delta))
    """
    if q.mu is None or q.L is None or q.sigma is None:
        raise ValueError("sc_rate_formulas requires mu, L and sigma")
    if constant <= 0:
        raise ValueError("constant must be positive")
    tail = q.d + math.log(1.0 / q.delta)
    s2 = q.sigma * q.sigma
    fr = q.R.floor_r
    if math.isinf(fr):
        auc = math.inf
        cap = q.kappa
    else:
        auc = constant * s2 * float(fr) ** 2 * q.d * tail / q.epsilon ** 2
        cap = min(q.kappa, float(fr) ** 2)
    erm = constant * s2 * q.d * cap * tail / q.epsilon ** 2
    cont = constant * (s2 / (q.mu * q.epsilon)) * tail
    return ScRates(auc, erm, cont)


def evaluate_bounds(q: BoundQuery, constant: float = 1.0) -> dict:
    """Every formula evaluable from a BoundQuery, plus an input echo."""
    out = {
        "query": {
            "d": q.d,
            "R": float(q.R.value) if not isinstance(q.R.value, str) else q.R.value,
            "epsilon": q.epsilon,
            "delta": q.delta,
            "mu": q.mu,
            "L": q.L,
            "sigma": q.sigma,
        },
        "constant": constant,
    }
    if q.R.is_finite:
        out["h2"] = h2(q.d, q.R)
        lb = linf_lower_bounds(q)
        out["linf_lower_bounds"] = {
            "dimension_term": lb.dimension_term,
            "confidence_term": lb.confidence_term,
            "combined": lb.combined,
            "regime_ok": lb.regime_ok,
        }
    if q.delta <= 0.25:
        out["two_point_kl_threshold"] = two_point_kl_threshold(q.delta)
    if q.mu is not None and q.L is not None and q.sigma is not None:
        rates = sc_rate_formulas(q, constant)
        out["sc_rates"] = {
            "auc_rate": rates.auc_rate,
            "erm_rate": rates.erm_rate,
            "continuous_erm_rate": rates.continuous_erm_rate,
        }
    return out
