"""Constructive compact subsets of the complex plane.

Each set answers distance, membership, measure and sampling queries exactly
(up to floating point at the oracle boundary).  Cantor sets are realized at a
finite generation depth; their interval endpoints are computed with
``fractions.Fraction`` so measures never drift.

Sets serialize to plain dicts via :func:`to_dict` / :func:`from_dict`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import PreconditionError

DEFAULT_DEPTH = 14
# points produced by floating-point trig land within a few ulps of a circle
_CURVE_SNAP = 1e-14


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**12)


def _as_complex(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


class PlanarCompactSet:
    """Base class.  Subclasses implement ``distance`` and ``measure2``."""

    def distance(self, z) -> np.ndarray:
        raise NotImplementedError

    def contains(self, z) -> np.ndarray:
        return self.distance(z) == 0.0

    def measure2(self):
        """Two-dimensional Lebesgue measure, or ``None`` when it is not known exactly."""
        raise NotImplementedError

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        raise NotImplementedError

    def bounding_radius(self) -> float:
        """Radius of a closed disk about 0 that contains the set."""
        raise NotImplementedError

    @property
    def truncation_error(self) -> float:
        """Bound on the distance error between the depth-truncated and the ideal set."""
        return 0.0


@dataclass(frozen=True)
class FiniteSet(PlanarCompactSet):
    points: tuple

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        if not pts:
            raise PreconditionError("FiniteSet needs at least one point")
        object.__setattr__(self, "points", pts)

    @cached_property
    def _arr(self):
        return np.array(self.points, dtype=complex)

    def distance(self, z):
        z = _as_complex(z)
        return np.min(np.abs(z[..., None] - self._arr), axis=-1)

    def measure2(self):
        return 0.0

    def sample(self, n, seed=0):
        return self._arr[np.arange(n) % len(self._arr)]

    def bounding_radius(self):
        return float(np.max(np.abs(self._arr)))

    def min_separation(self) -> float:
        if len(self.points) < 2:
            return math.inf
        d = np.abs(self._arr[:, None] - self._arr[None, :])
        d[np.diag_indices_from(d)] = np.inf
        return float(d.min())


@dataclass(frozen=True)
class CantorLine(PlanarCompactSet):
    """Depth-truncated Cantor set in [0, 1] (on the real axis).

    At generation n an open middle interval of length ``schedule[n-1]`` is
    removed from each of the 2^(n-1) remaining intervals.
    """

    schedule: tuple
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        sched = tuple(_frac(l) for l in self.schedule)
        if self.depth < 1:
            raise PreconditionError("depth must be >= 1")
        if len(sched) < self.depth:
            raise PreconditionError(f"schedule has {len(sched)} terms, depth {self.depth}")
        sched = sched[: self.depth]
        if any(l <= 0 for l in sched):
            raise PreconditionError("removal lengths must be positive")
        object.__setattr__(self, "schedule", sched)
        # validates that each removal fits inside its interval
        _ = self.exact_intervals

    @cached_property
    def exact_intervals(self) -> list[tuple[Fraction, Fraction]]:
        ivs = [(Fraction(0), Fraction(1))]
        for n, l in enumerate(self.schedule, start=1):
            length = ivs[0][1] - ivs[0][0]
            if l >= length:
                raise PreconditionError(
                    f"removal length {l} at generation {n} exhausts intervals of length {length}"
                )
            nxt = []
            for a, b in ivs:
                m = (a + b) / 2
                nxt.append((a, m - l / 2))
                nxt.append((m + l / 2, b))
            ivs = nxt
        return ivs

    @cached_property
    def _lr(self):
        ivs = self.exact_intervals
        return (np.array([float(a) for a, _ in ivs]), np.array([float(b) for _, b in ivs]))

    def measure1(self) -> Fraction:
        return 1 - sum(2 ** (n - 1) * l for n, l in enumerate(self.schedule, start=1))

    @property
    def interval_length(self) -> float:
        a, b = self.exact_intervals[0]
        return float(b - a)

    @property
    def truncation_error(self) -> float:
        return self.interval_length

    def distance_1d(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left, right = self._lr
        i = np.searchsorted(left, x, side="right") - 1
        ic = np.clip(i, 0, len(left) - 1)
        inside = (i >= 0) & (x <= right[ic])
        d_left_iv = np.where(i >= 0, x - right[ic], np.inf)  # gap to interval on the left
        j = np.clip(i + 1, 0, len(left) - 1)
        d_right_iv = np.where(i + 1 < len(left), left[j] - x, np.inf)
        d = np.minimum(np.abs(d_left_iv), np.abs(d_right_iv))
        return np.where(inside, 0.0, d)

    def distance(self, z):
        z = _as_complex(z)
        return np.hypot(self.distance_1d(z.real), z.imag)

    def measure2(self):
        return 0.0

    def sample_1d(self, n, rng) -> np.ndarray:
        left, right = self._lr
        k = rng.integers(0, len(left), size=n)
        u = rng.random(n)
        x = left[k] + u * (right[k] - left[k])
        return np.clip(x, left[k], right[k])

    def sample(self, n, seed=0):
        return self.sample_1d(n, np.random.default_rng(seed)).astype(complex)

    def bounding_radius(self):
        return 1.0


def fat_cantor_line(schedule, depth: int = DEFAULT_DEPTH) -> CantorLine:
    """Cantor line with removal lengths ``schedule`` (a sequence or callable n -> l_n).

    Rejects schedules whose total removed length reaches 1.
    """
    if callable(schedule):
        sched = [_frac(schedule(n)) for n in range(1, depth + 1)]
    else:
        sched = [_frac(l) for l in schedule][:depth]
    total = sum(2 ** (n - 1) * l for n, l in enumerate(sched, start=1))
    if total >= 1:
        raise PreconditionError("schedule removes the whole interval")
    return CantorLine(tuple(sched), depth)


def geometric_schedule(ratio, coeff=1, depth: int = DEFAULT_DEPTH) -> tuple:
    q, c = _frac(ratio), _frac(coeff)
    return tuple(c * q**n for n in range(1, depth + 1))


def geometric_limit_measure(ratio, coeff=1) -> Fraction:
    """1 - sum_{n>=1} 2^(n-1) c q^n for the untruncated geometric schedule."""
    q, c = _frac(ratio), _frac(coeff)
    if 2 * q >= 1:
        return Fraction(0)
    return max(Fraction(0), 1 - c * q / (1 - 2 * q))


@dataclass(frozen=True)
class CantorProduct(PlanarCompactSet):
    """{x + iy : x in first, y in second}."""

    first: CantorLine
    second: CantorLine

    def distance(self, z):
        z = _as_complex(z)
        return np.hypot(self.first.distance_1d(z.real), self.second.distance_1d(z.imag))

    def measure2(self):
        return float(self.measure2_exact())

    def measure2_exact(self) -> Fraction:
        return self.first.measure1() * self.second.measure1()

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return self.first.sample_1d(n, rng) + 1j * self.second.sample_1d(n, rng)

    def bounding_radius(self):
        return math.sqrt(2.0)

    @property
    def truncation_error(self):
        return math.hypot(self.first.interval_length, self.second.interval_length)


@dataclass(frozen=True)
class Circle(PlanarCompactSet):
    center: complex
    radius: float

    def distance(self, z):
        d = np.abs(np.abs(_as_complex(z) - self.center) - self.radius)
        return np.where(d <= _CURVE_SNAP * max(self.radius, 1.0), 0.0, d)

    def measure2(self):
        return 0.0

    def sample(self, n, seed=0):
        phase = np.random.default_rng(seed).random()
        t = 2 * np.pi * (np.arange(n) + phase) / n
        return self.center + self.radius * np.exp(1j * t)

    def bounding_radius(self):
        return abs(self.center) + self.radius


@dataclass(frozen=True)
class Segment(PlanarCompactSet):
    start: complex
    end: complex

    def distance(self, z):
        z = _as_complex(z)
        a, b = complex(self.start), complex(self.end)
        ab = b - a
        if ab == 0:
            return np.abs(z - a)
        t = np.clip(((z - a) * np.conj(ab)).real / abs(ab) ** 2, 0.0, 1.0)
        d = np.abs(z - (a + t * ab))
        return np.where(d <= _CURVE_SNAP * max(abs(ab), 1.0), 0.0, d)

    def measure2(self):
        return 0.0

    def sample(self, n, seed=0):
        t = np.random.default_rng(seed).random(n)
        return self.start + t * (self.end - self.start)

    def bounding_radius(self):
        return max(abs(self.start), abs(self.end))


@dataclass(frozen=True)
class ClosedDisk(PlanarCompactSet):
    center: complex
    radius: float

    def distance(self, z):
        return np.maximum(np.abs(_as_complex(z) - self.center) - self.radius, 0.0)

    def measure2(self):
        return math.pi * self.radius**2

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        r = self.radius * np.sqrt(rng.random(n))
        return self.center + r * np.exp(2j * np.pi * rng.random(n))

    def bounding_radius(self):
        return abs(self.center) + self.radius


@dataclass(frozen=True)
class Annulus(PlanarCompactSet):
    center: complex
    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0 <= self.r_in <= self.r_out:
            raise PreconditionError("need 0 <= r_in <= r_out")

    def distance(self, z):
        r = np.abs(_as_complex(z) - self.center)
        return np.maximum(np.maximum(self.r_in - r, r - self.r_out), 0.0)

    def measure2(self):
        return math.pi * (self.r_out**2 - self.r_in**2)

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        r = np.sqrt(self.r_in**2 + (self.r_out**2 - self.r_in**2) * rng.random(n))
        return self.center + r * np.exp(2j * np.pi * rng.random(n))

    def bounding_radius(self):
        return abs(self.center) + self.r_out


@dataclass(frozen=True)
class Union(PlanarCompactSet):
    members: tuple

    def __post_init__(self):
        if not self.members:
            raise PreconditionError("empty union")
        object.__setattr__(self, "members", tuple(self.members))

    def distance(self, z):
        return np.min(np.stack([np.asarray(m.distance(z), float) for m in self.members]), axis=0)

    def measure2(self):
        ms = [m.measure2() for m in self.members]
        if len(ms) == 1:
            return ms[0]
        if all(m == 0.0 for m in ms):
            return 0.0
        return None

    def sample(self, n, seed=0):
        k = len(self.members)
        parts = [m.sample(n // k + (i < n % k), seed + i) for i, m in enumerate(self.members)]
        out = np.empty(n, complex)
        # interleave so any prefix visits every member
        pos = 0
        for j in range(max(len(p) for p in parts)):
            for p in parts:
                if j < len(p):
                    out[pos] = p[j]
                    pos += 1
        return out

    def bounding_radius(self):
        return max(m.bounding_radius() for m in self.members)

    @property
    def truncation_error(self):
        return max(m.truncation_error for m in self.members)


@dataclass(frozen=True)
class Rescale(PlanarCompactSet):
    """Image of ``inner`` under z -> scale * z + offset (scale may be complex)."""

    inner: PlanarCompactSet
    scale: complex
    offset: complex = 0j

    def __post_init__(self):
        if self.scale == 0:
            raise PreconditionError("scale must be nonzero")

    def _pull(self, z):
        return (_as_complex(z) - self.offset) / self.scale

    def distance(self, z):
        return abs(self.scale) * self.inner.distance(self._pull(z))

    def measure2(self):
        m = self.inner.measure2()
        return None if m is None else abs(self.scale) ** 2 * m

    def sample(self, n, seed=0):
        return self.scale * self.inner.sample(n, seed) + self.offset

    def bounding_radius(self):
        if isinstance(self.inner, (CantorProduct, CantorLine)):
            corners = np.array([0, 1, 1j, 1 + 1j]) if isinstance(self.inner, CantorProduct) else np.array([0, 1])
            return float(np.max(np.abs(self.scale * corners + self.offset)))
        return abs(self.scale) * self.inner.bounding_radius() + abs(self.offset)

    @property
    def truncation_error(self):
        return abs(self.scale) * self.inner.truncation_error


def cantor_square(ratio="1/4", depth: int = DEFAULT_DEPTH, side: float = 0.5) -> Rescale:
    """Product of a geometric-schedule Cantor line with itself, centered at 0 with the given side."""
    line = fat_cantor_line(geometric_schedule(ratio, depth=depth), depth)
    return Rescale(CantorProduct(line, line), side, -(side / 2) * (1 + 1j))


def middle_thirds_square(depth: int = DEFAULT_DEPTH, side: float = 0.5) -> Rescale:
    return cantor_square("1/3", depth, side)


# ---------------------------------------------------------------------------
# serialization


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _pair(z: complex) -> list:
    return [z.real, z.imag]


def _schedule_from_dict(d: dict, depth: int) -> tuple:
    if "lengths" in d:
        return tuple(_frac(x) for x in d["lengths"])
    return geometric_schedule(d["ratio"], d.get("coeff", 1), depth)


def from_dict(d: dict) -> PlanarCompactSet:
    try:
        return _from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise PreconditionError(f"bad set description {d!r}: {type(exc).__name__} {exc}") from exc


def _from_dict(d: dict) -> PlanarCompactSet:
    kind = d["kind"]
    if kind == "finite":
        return FiniteSet(tuple(_cplx(p) for p in d["points"]))
    if kind == "cantor_line":
        depth = int(d.get("depth", DEFAULT_DEPTH))
        return fat_cantor_line(_schedule_from_dict(d["schedule"], depth), depth)
    if kind == "cantor_product":
        return CantorProduct(_from_dict(d["x"]), _from_dict(d["y"]))
    if kind == "circle":
        return Circle(_cplx(d.get("center", 0)), float(d["radius"]))
    if kind == "segment":
        return Segment(_cplx(d["start"]), _cplx(d["end"]))
    if kind == "disk":
        return ClosedDisk(_cplx(d.get("center", 0)), float(d["radius"]))
    if kind == "annulus":
        return Annulus(_cplx(d.get("center", 0)), float(d["r_in"]), float(d["r_out"]))
    if kind == "union":
        return Union(tuple(_from_dict(m) for m in d["members"]))
    if kind == "rescale":
        return Rescale(_from_dict(d["inner"]), _cplx(d["scale"]), _cplx(d.get("offset", 0)))
    if kind == "cantor_square":
        return cantor_square(d.get("ratio", "1/4"), int(d.get("depth", DEFAULT_DEPTH)), float(d.get("side", 0.5)))
    raise PreconditionError(f"unknown set kind {kind!r}")


def to_dict(s: PlanarCompactSet) -> dict:
    if isinstance(s, FiniteSet):
        return {"kind": "finite", "points": [_pair(p) for p in s.points]}
    if isinstance(s, CantorLine):
        return {"kind": "cantor_line", "depth": s.depth, "schedule": {"lengths": [str(l) for l in s.schedule]}}
    if isinstance(s, CantorProduct):
        return {"kind": "cantor_product", "x": to_dict(s.first), "y": to_dict(s.second)}
    if isinstance(s, Circle):
        return {"kind": "circle", "center": _pair(complex(s.center)), "radius": s.radius}
    if isinstance(s, Segment):
        return {"kind": "segment", "start": _pair(complex(s.start)), "end": _pair(complex(s.end))}
    if isinstance(s, ClosedDisk):
        return {"kind": "disk", "center": _pair(complex(s.center)), "radius": s.radius}
    if isinstance(s, Annulus):
        return {"kind": "annulus", "center": _pair(complex(s.center)), "r_in": s.r_in, "r_out": s.r_out}
    if isinstance(s, Union):
        return {"kind": "union", "members": [to_dict(m) for m in s.members]}
    if isinstance(s, Rescale):
        return {"kind": "rescale", "inner": to_dict(s.inner), "scale": _pair(complex(s.scale)),
                "offset": _pair(complex(s.offset))}
    raise TypeError(type(s))


def contained_in_half_disk(s: PlanarCompactSet) -> bool:
    return s.bounding_radius() < 0.5
