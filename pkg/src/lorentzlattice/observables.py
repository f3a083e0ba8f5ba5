"""Discrete Cauchy surfaces, currents, surface norms and velocities.

A surface is a path through the dual lattice.  Dual vertex ``cell(a, b)``
sits at lightlike position ``(a - 1/2, b - 1/2)``.  Walking to the right,
an ``R`` step moves ``cell(a, b) -> cell(a, b - 1)`` and crosses the wire
carrying ``psi_plus(a, b - 1)``; an ``L`` step moves ``cell(a, b) ->
cell(a + 1, b)`` and crosses the wire carrying ``psi_minus(a, b)``.  Step
``n`` leads from vertex ``P_n`` to ``P_{n+1}`` and ``P_0 = cell(r0, l0)``
for origin ``(r0, l0)``, so the origin is the point just above ``P_0``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import LightCoord, SpacetimeField

STEP = {"R": (0, -1), "L": (1, 0)}
VELOCITY_TOL = 1e-12


class SurfaceError(ValueError):
    """Malformed surface, or a surface that misses part of the field."""


@dataclass(frozen=True)
class CauchySurface:
    """``sigma: Z -> {R, L}`` with an origin.

    ``labels`` gives ``sigma(n)`` for ``window_start <= n < window_start +
    len(labels)``.  Outside that window ``sigma`` repeats ``tail``: on the
    right ``sigma(n) = tail[(n - phase_right) % len(tail)]``, on the left
    the same with ``phase_left``.  The default tail is the constant-time
    one (L on even n, R on odd n).
    """

    origin: LightCoord = LightCoord(0, 0)
    window_start: int = 0
    labels: str = ""
    tail: str = "LR"
    phase_right: int = 0
    phase_left: int = 0

    def __post_init__(self):
        object.__setattr__(self, "origin", LightCoord(*self.origin))
        if set(self.labels) - {"R", "L"}:
            raise SurfaceError(f"labels must be R or L, got {self.labels!r}")
        if set(self.tail) != {"R", "L"}:
            raise SurfaceError(f"the tail must contain both R and L, got {self.tail!r}")

    @property
    def window_end(self) -> int:
        return self.window_start + len(self.labels)

    def __getitem__(self, n: int) -> str:
        if self.window_start <= n < self.window_end:
            return self.labels[n - self.window_start]
        phase = self.phase_right if n >= self.window_end else self.phase_left
        return self.tail[(n - phase) % len(self.tail)]

    def run_lengths(self) -> list[int]:
        """Lengths of maximal equal-label runs over the window and one tail period each side."""
        k = len(self.tail)
        seq = "".join(self[n] for n in range(self.window_start - k, self.window_end + k))
        runs, cur = [], 1
        for a, b in zip(seq, seq[1:]):
            if a == b:
                cur += 1
            else:
                runs.append(cur)
                cur = 1
        runs.append(cur)
        return runs

    def materialize(self, lo: int, hi: int) -> "CauchySurface":
        """Same surface with the explicit window widened to cover ``[lo, hi)``."""
        lo, hi = min(lo, self.window_start), max(hi, self.window_end)
        if (lo, hi) == (self.window_start, self.window_end):
            return self
        labels = "".join(self[n] for n in range(lo, hi))
        return replace(self, window_start=lo, labels=labels)

    def vertex(self, n: int) -> tuple[int, int]:
        """Dual vertex ``P_n``."""
        a, b = self.origin
        if n >= 0:
            for k in range(n):
                da, db = STEP[self[k]]
                a, b = a + da, b + db
        else:
            for k in range(-1, n - 1, -1):
                da, db = STEP[self[k]]
                a, b = a - da, b - db
        return a, b

    def to_dict(self) -> dict:
        out = {"origin": [self.origin.r, self.origin.l], "window_start": self.window_start, "labels": self.labels}
        if (self.tail, self.phase_right, self.phase_left) != ("LR", 0, 0):
            out.update(tail=self.tail, phase_right=self.phase_right, phase_left=self.phase_left)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CauchySurface":
        return cls(
            LightCoord(*data["origin"]),
            int(data.get("window_start", 0)),
            data.get("labels", ""),
            data.get("tail", "LR"),
            int(data.get("phase_right", 0)),
            int(data.get("phase_left", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def constant_time_surface(t: int = 0, lo: int = 0, hi: int = 0) -> CauchySurface:
    """The constant-t surface, explicit on steps ``[lo, hi)``."""
    return CauchySurface(LightCoord((t + 1) // 2, t // 2)).materialize(lo, hi)


@dataclass
class SurfaceNorm:
    value: float
    contributions: list = field(default_factory=list)  # (n, ("+"|"-", r, l), current)


@dataclass(frozen=True)
class Crossing:
    n: int
    side: str
    point: tuple[int, int]


def crossings(s: CauchySurface, lo: int, hi: int):
    """Crossed wires for steps ``lo <= n < hi``."""
    a, b = s.vertex(lo)
    out = []
    for n in range(lo, hi):
        lab = s[n]
        if lab == "R":
            out.append(Crossing(n, "+", (a, b - 1)))
        else:
            out.append(Crossing(n, "-", (a, b)))
        da, db = STEP[lab]
        a, b = a + da, b + db
    return out


def _evolved(f: SpacetimeField):
    """Predicate: is the stored value at ``(r, l)`` part of the evolved solution?"""
    meta = f.meta
    lz = meta.get("lorentz")
    if lz and "source_t0" in lz:
        a, b, t0, t1 = lz["alpha"], lz["beta"], lz["source_t0"], lz["source_t1"]
        return lambda r, l: t0 <= r // a + l // b <= t1
    if "t0" in meta and "t1" in meta:
        t0, t1 = meta["t0"], meta["t1"]
        return lambda r, l: t0 <= r + l <= t1
    return lambda r, l: True


def _walk_bounds(f: SpacetimeField, s: CauchySurface) -> tuple[int, int]:
    """Step range outside of which every crossing misses the field window."""
    w = f.window
    hi = max(s.window_end, 0)
    a, b = s.vertex(hi)
    while a <= w.r_max and b >= w.l_min:
        da, db = STEP[s[hi]]
        a, b, hi = a + da, b + db, hi + 1
    lo = min(s.window_start, 0)
    a, b = s.vertex(lo)
    while a >= w.r_min and b - 1 <= w.l_max:
        da, db = STEP[s[lo - 1]]
        a, b, lo = a - da, b - db, lo - 1
    return lo, hi


def surface_norm(f: SpacetimeField, s: CauchySurface) -> SurfaceNorm:
    """``sum_i j(i)`` over the wires crossed by ``s``.

    Crossings outside the explicit window must carry no current, and every
    crossed in-window point must belong to the evolved part of ``f``.
    """
    lo, hi = _walk_bounds(f, s)
    evolved = _evolved(f)
    total, contrib = 0.0, []
    for c in crossings(s, lo, hi):
        if c.point not in f.window:
            continue
        j = float(np.sum(np.abs(f.get(c.point, c.side)) ** 2))
        if not evolved(*c.point):
            if j == 0 and not (s.window_start <= c.n < s.window_end):
                continue
            raise SurfaceError(f"surface crosses psi_{c.side}{c.point}, outside the evolved layers of the field")
        if not (s.window_start <= c.n < s.window_end) and j > 0:
            raise SurfaceError(
                f"field support reaches crossing {c.n} (psi_{c.side}{c.point}) beyond the surface window "
                f"[{s.window_start}, {s.window_end})"
            )
        if j > 0:
            contrib.append((c.n, (c.side, *c.point), j))
            total += j
    return SurfaceNorm(total, contrib)


def swap_move(s: CauchySurface, n: int) -> CauchySurface:
    """Exchange ``sigma(n)`` and ``sigma(n + 1)``; moves the origin when ``n == -1``."""
    s = s.materialize(n, n + 2)
    a, b = s[n], s[n + 1]
    if a == b:
        raise SurfaceError(f"steps {n}, {n + 1} are {a}{b}; a swap needs an RL or LR pair")
    k = n - s.window_start
    labels = s.labels[:k] + b + a + s.labels[k + 2 :]
    origin = s.origin
    if n == -1:
        d_old, d_new = STEP[a], STEP[b]
        origin = LightCoord(origin.r - d_old[0] + d_new[0], origin.l - d_old[1] + d_new[1])
    return replace(s, labels=labels, origin=origin)


def random_swaps(s: CauchySurface, count: int, rng: np.random.Generator, span: int = 8) -> CauchySurface:
    """Apply ``count`` random valid swaps at positions in ``[-span, span)``."""
    s = s.materialize(-span, span + 1)
    for _ in range(count):
        options = [n for n in range(-span, span) if s[n] != s[n + 1]]
        s = swap_move(s, int(rng.choice(options)))
    return s


def _expand(labels: str, alpha: int, beta: int) -> str:
    return "".join("L" * alpha if c == "L" else "R" * beta for c in labels)


def transform_surface(s: CauchySurface, alpha: int, beta: int) -> CauchySurface:
    """Replace each L by ``L^alpha`` and each R by ``R^beta`` outward from step 0."""
    if alpha < 1 or beta < 1:
        raise ValueError("alpha and beta must be >= 1")
    s = s.materialize(0, 1)
    right = _expand(s.labels[-s.window_start :], alpha, beta)
    left = _expand(s.labels[: -s.window_start], alpha, beta)
    tail = _expand(s.tail, alpha, beta)
    offsets = np.cumsum([0] + [alpha if c == "L" else beta for c in s.tail])

    def new_phase(n_old: int, n_new: int) -> int:
        k = (n_old - s.phase_right) % len(s.tail)
        return (n_new - int(offsets[k])) % len(tail)

    end_new = len(right)
    start_new = -len(left)
    phase_right = new_phase(s.window_end, end_new)
    # on the left, sigma(window_start - 1) ends right before start_new
    k = (s.window_start - 1 - s.phase_left) % len(s.tail)
    phase_left = (start_new - int(offsets[k + 1])) % len(tail)
    return CauchySurface(
        LightCoord(alpha * s.origin.r, beta * s.origin.l),
        start_new,
        left + right,
        tail,
        phase_right,
        phase_left,
    )


# -- velocities -----------------------------------------------------------


class ZeroDensityError(ValueError):
    """Local velocity is undefined where the density vanishes."""


def local_velocity(f: SpacetimeField, c) -> float:
    """``(|psi_plus|^2 - |psi_minus|^2) / ||psi||^2`` at one point."""
    p = float(np.sum(np.abs(f.get(c, "+")) ** 2))
    m = float(np.sum(np.abs(f.get(c, "-")) ** 2))
    if p + m == 0:
        raise ZeroDensityError(f"zero density at {tuple(c)}")
    return (p - m) / (p + m)


def state_with_velocity(v: float) -> np.ndarray:
    if abs(v) > 1:
        raise ValueError(f"|v| must be <= 1, got {v}")
    return np.array([math.sqrt((1 + v) / 2), math.sqrt((1 - v) / 2)])


def boost_velocity(alpha: int, beta: int) -> float:
    return (alpha - beta) / (alpha + beta)


def velocity_addition_check(v: float, alpha: int, beta: int) -> tuple[float, float]:
    """Velocity after ``S = diag(1/sqrt(beta), 1/sqrt(alpha))`` and the relativistic sum."""
    psi = state_with_velocity(v) * np.array([1 / math.sqrt(beta), 1 / math.sqrt(alpha)])
    p, m = psi**2
    u = boost_velocity(alpha, beta)
    return float((p - m) / (p + m)), (v + u) / (1 + v * u)


def mean_velocity_forms(f: SpacetimeField, t: int) -> tuple[float, float]:
    """``<sigma_3>`` on layer ``t``, as a difference of weights and as ``sum p(i) v(i)``."""
    w = f.window
    rs = w.layer(t)
    if rs.size == 0:
        raise ValueError(f"layer t={t} does not meet window {w}")
    ir, il = rs - w.r_min, t - rs - w.l_min
    p = np.sum(np.abs(f.plus[ir, il]) ** 2, axis=1)
    m = np.sum(np.abs(f.minus[ir, il]) ** 2, axis=1)
    dens = p + m
    total = float(dens.sum())
    if total == 0:
        raise ValueError(f"layer t={t} is empty")
    sigma3 = float(np.sum(p - m)) / total
    occ = dens > 0
    weighted = float(np.sum(dens[occ] / total * (p[occ] - m[occ]) / dens[occ]))
    return sigma3, weighted


def mean_velocity(f: SpacetimeField, t: int) -> float:
    a, b = mean_velocity_forms(f, t)
    if abs(a - b) > VELOCITY_TOL:
        raise ArithmeticError(f"mean velocity forms disagree: {a} vs {b}")
    return a
