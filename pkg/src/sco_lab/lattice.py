"""Exact geometry of integer points in l2 and linf balls.

Enumeration, counting and packing certificates all reduce radius comparisons
to integer arithmetic on floor(R^2): an integer vector x satisfies
``||x||_2 <= R`` iff ``sum(x_j^2) <= floor(R^2)``, so boundary points are
classified without floating-point drift.  Randomized packing constructions
are re-verified exactly before they are returned.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import isqrt

import numpy as np

DEFAULT_ENUMERATION_BUDGET = 10_000_000


class BudgetExceededError(ValueError):
    """Requested enumeration or count is larger than the configured budget."""


class PackingConstructionError(ValueError):
    """Batch resampling exhausted max_attempts without a valid packing."""


@dataclass(frozen=True)
class RadiusSpec:
    """A positive radius, possibly infinite, with exact floor accessors."""

    value: float | Fraction

    def __post_init__(self):
        v = self.value
        if isinstance(v, Fraction):
            if v <= 0:
                raise ValueError(f"radius must be positive, got {v}")
            return
        v = float(v)
        if math.isnan(v) or v <= 0:
            raise ValueError(f"radius must be positive, got {v}")
        object.__setattr__(self, "value", v)

    @classmethod
    def coerce(cls, radius) -> "RadiusSpec":
        return radius if isinstance(radius, RadiusSpec) else cls(radius)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.value, Fraction) or math.isfinite(self.value)

    def as_fraction(self) -> Fraction:
        """Exact rational value; float inputs use their binary expansion."""
        if not self.is_finite:
            raise ValueError("infinite radius has no rational value")
        return Fraction(self.value)

    @property
    def floor_r(self):
        """floor(R); infinity maps to infinity."""
        if not self.is_finite:
            return math.inf
        return int(self.as_fraction())

    @property
    def floor_r2(self):
        """floor(R^2) computed in exact rational arithmetic."""
        if not self.is_finite:
            return math.inf
        f = self.as_fraction()
        return int(f * f)


def h2(d: int, radius) -> float:
    """Combinatorial scale of the integer points in the l2 ball of radius R.

    Zero for R < 1; otherwise s*ln(e*d/s) with s = min(d, floor(R^2)),
    which equals d exactly once floor(R^2) >= d.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    r = RadiusSpec.coerce(radius)
    if not r.is_finite:
        raise ValueError("h2 requires a finite radius")
    if r.as_fraction() < 1:
        return 0.0
    s = min(d, r.floor_r2)
    if s >= d:
        return float(d)
    return s * math.log(math.e * d / s)


def covering_bound(d: int, R: float, r: float) -> float:
    """Volumetric upper bound (1 + 2R/r)^d on the covering number at scale r."""
    if d < 1 or R <= 0 or r <= 0:
        raise ValueError("need d >= 1, R > 0, r > 0")
    return (1.0 + 2.0 * R / r) ** d


@dataclass(frozen=True)
class IntegerPointSet:
    """Canonical (lexicographically sorted) list of integer points in a ball."""

    dimension: int
    points: tuple[tuple[int, ...], ...]
    norm: str  # "l2" | "linf"
    radius: RadiusSpec

    def __post_init__(self):
        if self.norm not in ("l2", "linf"):
            raise ValueError(f"unknown norm tag {self.norm!r}")
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if list(pts) != sorted(set(pts)):
            raise ValueError("points must be unique and lexicographically sorted")
        fr, fr2 = self.radius.floor_r, self.radius.floor_r2
        for p in pts:
            if len(p) != self.dimension:
                raise ValueError("point dimension mismatch")
            if self.norm == "l2":
                ok = sum(c * c for c in p) <= fr2
            else:
                ok = all(abs(c) <= fr for c in p)
            if not ok:
                raise ValueError(f"point {p} lies outside the declared ball")

    def __len__(self):
        return len(self.points)


def _l2_points(d: int, q: int):
    """Yield integer vectors of length d with squared norm <= q, in lex order."""
    if d == 0:
        yield ()
        return
    k0 = isqrt(q)
    for k in range(-k0, k0 + 1):
        for rest in _l2_points(d - 1, q - k * k):
            yield (k,) + rest


def enumerate_integer_points(d: int, radius, norm: str = "l2",
                             budget: int = DEFAULT_ENUMERATION_BUDGET) -> IntegerPointSet:
    """Enumerate the integer points of an l2 or linf ball, lexicographically."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    r = RadiusSpec.coerce(radius)
    if not r.is_finite:
        raise ValueError("enumeration requires a finite radius")
    fr = r.floor_r
    estimate = (2 * fr + 1) ** d
    if estimate > budget:
        raise BudgetExceededError(
            f"estimated {estimate} candidate points exceeds budget {budget}")
    if norm == "linf":
        pts = tuple(itertools.product(range(-fr, fr + 1), repeat=d))
    elif norm == "l2":
        pts = tuple(_l2_points(d, r.floor_r2))
    else:
        raise ValueError(f"unknown norm tag {norm!r}")
    return IntegerPointSet(d, pts, norm, r)


@lru_cache(maxsize=None)
def _count_l2(d: int, q: int) -> int:
    if d == 0:
        return 1
    total = _count_l2(d - 1, q)
    k = 1
    while k * k <= q:
        total += 2 * _count_l2(d - 1, q - k * k)
        k += 1
    return total


def count_integer_points_l2(d: int, radius,
                            budget: int = DEFAULT_ENUMERATION_BUDGET) -> int:
    """Exact |B_R^(2) cap Z^d| via the coordinate recursion, memoized on
    (dimension, remaining squared radius)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    r = RadiusSpec.coerce(radius)
    if not r.is_finite:
        raise ValueError("counting requires a finite radius")
    q = r.floor_r2
    if d * max(q, 1) > budget:
        raise BudgetExceededError(
            f"memo table of size about {d * max(q, 1)} exceeds budget {budget}")
    return _count_l2(d, q)


@dataclass(frozen=True)
class SignPacking:
    """Set of sparse sign vectors with pairwise inner products at most s/2."""

    dimension: int
    support_size: int
    vectors: tuple[tuple[int, ...], ...]
    seed: int | None = None

    def __post_init__(self):
        vecs = tuple(tuple(int(c) for c in v) for v in self.vectors)
        object.__setattr__(self, "vectors", tuple(sorted(vecs)))
        self.verify()

    def verify(self):
        d, s = self.dimension, self.support_size
        if not 1 <= s <= d:
            raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
        if len(self.vectors) < 2:
            raise ValueError("a packing needs at least two vectors")
        if len(set(self.vectors)) != len(self.vectors):
            raise ValueError("duplicate vectors in packing")
        for u in self.vectors:
            if len(u) != d or any(c not in (-1, 0, 1) for c in u):
                raise ValueError(f"{u} is not a length-{d} sign vector")
            if sum(c * c for c in u) != s:
                raise ValueError(f"{u} has support size != {s}")
        for u, v in itertools.combinations(self.vectors, 2):
            ip = sum(a * b for a, b in zip(u, v))
            if 2 * ip > s:
                raise ValueError(f"inner product {ip} of {u}, {v} exceeds s/2")

    def __len__(self):
        return len(self.vectors)


def sparse_sign_packing(d: int, s: int, target_size: int,
                        max_attempts: int = 256, seed: int = 0) -> SignPacking:
    """Randomized packing of size-s sign vectors, accepted batch-at-a-time.

    Each attempt samples ``target_size`` vectors with a uniform size-s support
    and independent uniform signs, and keeps the whole batch only if every
    pairwise inner product is at most s/2 (checked in integer arithmetic).
    Deterministic given the seed.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    if target_size < 2:
        raise ValueError("target_size must be at least 2")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        vecs = np.zeros((target_size, d), dtype=np.int64)
        for i in range(target_size):
            support = rng.choice(d, size=s, replace=False)
            vecs[i, support] = rng.integers(0, 2, size=s) * 2 - 1
        gram = vecs @ vecs.T
        off = gram[~np.eye(target_size, dtype=bool)]
        if np.all(2 * off <= s):
            return SignPacking(d, s, tuple(map(tuple, vecs.tolist())), seed=seed)
    raise PackingConstructionError(
        f"no valid batch of size {target_size} in {max_attempts} attempts "
        f"(d={d}, s={s}); reduce target_size")


@dataclass(frozen=True)
class ScaledPacking:
    """Integer (or scaled-sign) centers of common norm r in the ball of radius R.

    Centers are ``scale * u`` for sign vectors u with ||u||^2 = support_size.
    For integral packings the scale is the integer ``q``; the continuous
    variant (``q is None``) uses scale R/sqrt(d) and waives integrality.
    All separation invariants are re-verified exactly on the sign vectors.
    """

    dimension: int
    enclosing_radius: RadiusSpec
    sign_vectors: tuple[tuple[int, ...], ...]
    support_size: int
    q: int | None = 1
    seed: int | None = None

    def __post_init__(self):
        vecs = tuple(sorted(tuple(int(c) for c in v) for v in self.sign_vectors))
        object.__setattr__(self, "sign_vectors", vecs)
        self.verify()

    @property
    def integral(self) -> bool:
        return self.q is not None

    @property
    def scale_sq(self) -> Fraction:
        """Exact squared scale factor."""
        if self.q is not None:
            return Fraction(self.q * self.q)
        rf = self.enclosing_radius.as_fraction()
        return rf * rf / self.dimension

    @property
    def r_squared(self) -> Fraction:
        return self.scale_sq * self.support_size

    @property
    def radius(self) -> float:
        """Common l2 norm of the centers."""
        return math.sqrt(self.r_squared)

    @property
    def centers(self) -> tuple[tuple, ...]:
        if self.q is not None:
            return tuple(tuple(self.q * c for c in u) for u in self.sign_vectors)
        scale = math.sqrt(self.scale_sq)
        return tuple(tuple(scale * c for c in u) for u in self.sign_vectors)

    def centers_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float)

    def verify(self):
        d, s = self.dimension, self.support_size
        SignPacking(d, s, self.sign_vectors)  # sign-vector invariants
        rf2 = self.enclosing_radius.as_fraction() ** 2
        r2 = self.r_squared
        if not (4 * r2 >= rf2 and r2 <= rf2):
            raise ValueError(f"radius r={math.sqrt(r2):.6g} outside [R/2, R]")
        if self.q is not None:
            # integer centers inside the ball: q^2 * s <= floor(R^2) suffices
            if self.q < 1:
                raise ValueError("integer scale q must be >= 1")
            if self.q * self.q * s > self.enclosing_radius.floor_r2:
                raise ValueError("scaled centers leave the enclosing ball")

    def __len__(self):
        return len(self.sign_vectors)

    def to_spec(self) -> dict:
        return {
            "d": self.dimension,
            "R": _radius_to_json(self.enclosing_radius),
            "sign_vectors": [list(u) for u in self.sign_vectors],
            "support_size": self.support_size,
            "q": self.q,
            "seed": self.seed,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "ScaledPacking":
        return cls(
            dimension=spec["d"],
            enclosing_radius=RadiusSpec(_radius_from_json(spec["R"])),
            sign_vectors=tuple(tuple(v) for v in spec["sign_vectors"]),
            support_size=spec["support_size"],
            q=spec["q"],
            seed=spec.get("seed"),
        )


def _radius_to_json(r: RadiusSpec):
    if not r.is_finite:
        return "inf"
    return float(r.value) if not isinstance(r.value, Fraction) else str(r.value)


def _radius_from_json(v):
    if v == "inf":
        return math.inf
    if isinstance(v, str):
        return Fraction(v)
    return v


def l2_integer_packing(d: int, radius, seed: int = 0, target_size: int = 2,
                       max_attempts: int = 256) -> ScaledPacking:
    """Packing of integer points of common norm r in [R/2, R] inside the
    l2 ball of radius R >= 1, built by scaling a sparse sign packing."""
    r = RadiusSpec.coerce(radius)
    if not r.is_finite or r.as_fraction() < 1:
        raise ValueError("l2_integer_packing requires finite R >= 1")
    fr2 = r.floor_r2
    s = min(d, fr2)
    signs = sparse_sign_packing(d, s, target_size, max_attempts, seed)
    if s == fr2:
        q = 1
    else:
        # q = floor(R / sqrt(d)), via q^2 <= R^2 / d in exact arithmetic
        q = isqrt(int(r.as_fraction() ** 2 / d))
    return ScaledPacking(d, r, signs.vectors, s, q=q, seed=seed)


def continuous_sign_packing(d: int, radius, seed: int = 0, target_size: int = 2,
                            max_attempts: int = 256) -> ScaledPacking:
    """Packing of norm-R points (R/sqrt(d) times full-support sign vectors)
    in the continuous l2 ball; integrality of centers is waived."""
    r = RadiusSpec.coerce(radius)
    if not r.is_finite:
        raise ValueError("continuous_sign_packing requires a finite radius")
    signs = sparse_sign_packing(d, d, target_size, max_attempts, seed)
    return ScaledPacking(d, r, signs.vectors, d, q=None, seed=seed)


def _round_half_toward_zero(x: float) -> int:
    f = math.floor(x)
    frac = x - f
    if frac < 0.5:
        return f
    if frac > 0.5:
        return f + 1
    return f if x > 0 else f + 1


def box_rounding(u, floor_r) -> np.ndarray:
    """Round a box point to the integer box: interior coordinates go to the
    nearest integer (half-ties toward zero), coordinates at +-floor_r stay.

    Guarantees ||q - u||_2 <= sqrt(d)/2 and ||q||_inf <= floor_r.
    """
    u = np.asarray(u, dtype=float)
    finite = math.isfinite(floor_r)
    if finite:
        floor_r = int(floor_r)
        if np.any(np.abs(u) > floor_r):
            raise ValueError(f"input {u} outside the box of radius {floor_r}")
    out = np.empty(u.shape, dtype=np.int64)
    for j, uj in enumerate(u):
        if finite and abs(uj) == floor_r:
            out[j] = int(uj)
        else:
            out[j] = _round_half_toward_zero(uj)
    return out


def localization_radius(d: int, kappa: float, floor_r, s: float, mu: float) -> float:
    """Search radius 2*sqrt(d*min(kappa, floor_r^2) + s/mu) around the optimum
    that contains every feasible point with excess at most s."""
    if d < 1 or kappa < 1 or mu <= 0 or s < 0:
        raise ValueError("need d >= 1, kappa >= 1, mu > 0, s >= 0")
    cap = kappa if not math.isfinite(floor_r) else min(kappa, float(floor_r) ** 2)
    return 2.0 * math.sqrt(d * cap + s / mu)


def write_points_csv(point_set: IntegerPointSet, path):
    """One integer vector per row, columns x1..xd."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(point_set.dimension)])
        w.writerows(point_set.points)


def write_packing_csv(packing, path):
    """One-line JSON header {d, s or r, size, seed}, then one center per row."""
    if isinstance(packing, SignPacking):
        header = {"d": packing.dimension, "s": packing.support_size,
                  "size": len(packing), "seed": packing.seed}
        rows = packing.vectors
    else:
        header = {"d": packing.dimension, "r": packing.radius,
                  "size": len(packing), "seed": packing.seed}
        rows = packing.centers
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(header) + "\n")
        w = csv.writer(fh)
        w.writerows(rows)
