"""Lightlike grid, wire storage and index arithmetic.

All positions are integer multiples of the lattice spacing ``eps``;
``eps`` itself is only carried as metadata.  A point ``(r, l)`` holds the
two wire values entering the gate at that point: ``plus`` arrives from
``(r - 1, l)`` and ``minus`` arrives from ``(r, l - 1)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

TOL = 1e-12

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)


class WindowOverflowError(RuntimeError):
    """A nonzero value was about to be written outside the field window."""


class LightCoord(NamedTuple):
    r: int
    l: int

    @property
    def t(self) -> int:
        return self.r + self.l

    @property
    def x(self) -> int:
        return self.r - self.l


def floor_multiple(x: int, step: int) -> int:
    """Largest multiple of ``step`` that is <= ``x``."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    return (x // step) * step


def coord_convert(c: LightCoord | tuple[int, int]) -> tuple[int, int]:
    r, l = c
    return r + l, r - l


def coord_from_tx(t: int, x: int) -> LightCoord:
    if (t + x) % 2:
        raise ValueError(f"(t={t}, x={x}) is not a lattice point: t + x must be even")
    return LightCoord((t + x) // 2, (t - x) // 2)


def is_unitary(m: np.ndarray, tol: float = TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return unitarity_defect(m) <= tol


def unitarity_defect(m: np.ndarray) -> float:
    """``max |M^dagger M - Id|`` entrywise."""
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))


def is_isometry(m: np.ndarray, tol: float = TOL) -> bool:
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])))) <= tol


@dataclass(frozen=True)
class Window:
    r_min: int
    l_min: int
    n_r: int
    n_l: int

    def __post_init__(self):
        if self.n_r < 1 or self.n_l < 1:
            raise ValueError(f"window extents must be positive, got {self.n_r} x {self.n_l}")

    @property
    def r_max(self) -> int:
        return self.r_min + self.n_r - 1

    @property
    def l_max(self) -> int:
        return self.l_min + self.n_l - 1

    def __contains__(self, c) -> bool:
        r, l = c
        return self.r_min <= r <= self.r_max and self.l_min <= l <= self.l_max

    def layer(self, t: int) -> np.ndarray:
        """r-indices of the in-window points on the constant-t line."""
        lo = max(self.r_min, t - self.l_max)
        hi = min(self.r_max, t - self.l_min)
        return np.arange(lo, hi + 1)

    @property
    def t_range(self) -> tuple[int, int]:
        return self.r_min + self.l_min, self.r_max + self.l_max


@dataclass
class SpacetimeField:
    """Wire values on a rectangular lightlike window.

    ``plus`` has shape ``(n_r, n_l, d_plus)`` and ``minus`` shape
    ``(n_r, n_l, d_minus)``.  The two wire dimensions coincide for every
    model except the Clock QW with ``p != q``.
    """

    window: Window
    plus: np.ndarray
    minus: np.ndarray
    eps: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = self.window
        self.plus = np.asarray(self.plus, dtype=complex)
        self.minus = np.asarray(self.minus, dtype=complex)
        if self.plus.shape[:2] != (w.n_r, w.n_l) or self.minus.shape[:2] != (w.n_r, w.n_l):
            raise ValueError("wire arrays do not match the window shape")
        if self.plus.ndim != 3 or self.minus.ndim != 3:
            raise ValueError("wire arrays must be (n_r, n_l, d)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @classmethod
    def zeros(cls, window: Window, wire_dim, eps: float = 1.0, meta: dict | None = None):
        dp, dm = (wire_dim, wire_dim) if np.isscalar(wire_dim) else wire_dim
        return cls(
            window,
            np.zeros((window.n_r, window.n_l, dp), dtype=complex),
            np.zeros((window.n_r, window.n_l, dm), dtype=complex),
            eps,
            dict(meta or {}),
        )

    @property
    def plus_dim(self) -> int:
        return self.plus.shape[2]

    @property
    def minus_dim(self) -> int:
        return self.minus.shape[2]

    @property
    def wire_dim(self):
        if self.plus_dim == self.minus_dim:
            return self.plus_dim
        return (self.plus_dim, self.minus_dim)

    def _index(self, c) -> tuple[int, int]:
        return c[0] - self.window.r_min, c[1] - self.window.l_min

    def get(self, c, side: str) -> np.ndarray:
        arr = self._side(side)
        if c not in self.window:
            return np.zeros(arr.shape[2], dtype=complex)
        return arr[self._index(c)].copy()

    def set(self, c, side: str, value) -> None:
        if c not in self.window:
            raise WindowOverflowError(f"write to {tuple(c)} outside window {self.window}")
        arr = self._side(side)
        value = np.asarray(value, dtype=complex).reshape(-1)
        if value.shape[0] != arr.shape[2]:
            raise ValueError(f"expected a vector of length {arr.shape[2]}, got {value.shape[0]}")
        arr[self._index(c)] = value

    def value(self, c) -> np.ndarray:
        """``psi(r, l) = psi_plus (+) psi_minus``."""
        return np.concatenate([self.get(c, "+"), self.get(c, "-")])

    def _side(self, side: str) -> np.ndarray:
        if side in ("+", "plus"):
            return self.plus
        if side in ("-", "minus"):
            return self.minus
        raise ValueError(f"side must be '+' or '-', got {side!r}")

    def points(self) -> Iterator[LightCoord]:
        w = self.window
        for r in range(w.r_min, w.r_max + 1):
            for l in range(w.l_min, w.l_max + 1):
                yield LightCoord(r, l)

    def layer_norm(self, t: int) -> float:
        rs = self.window.layer(t)
        if rs.size == 0:
            return 0.0
        ir = rs - self.window.r_min
        il = t - rs - self.window.l_min
        return float(np.sum(np.abs(self.plus[ir, il]) ** 2) + np.sum(np.abs(self.minus[ir, il]) ** 2))

    def copy(self) -> "SpacetimeField":
        return SpacetimeField(self.window, self.plus.copy(), self.minus.copy(), self.eps, json.loads(json.dumps(self.meta)))

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        meta = dict(self.meta)
        meta.setdefault("model", "")
        meta.setdefault("params", {})
        meta["eps"] = self.eps
        meta["wire_dim"] = self.wire_dim if np.isscalar(self.wire_dim) else list(self.wire_dim)
        w = self.window
        return {
            "meta": meta,
            "window": {"r_min": w.r_min, "l_min": w.l_min, "n_r": w.n_r, "n_l": w.n_l},
            "plus": _encode_complex(self.plus),
            "minus": _encode_complex(self.minus),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpacetimeField":
        w = Window(**{k: int(data["window"][k]) for k in ("r_min", "l_min", "n_r", "n_l")})
        meta = dict(data.get("meta", {}))
        eps = float(meta.pop("eps", 1.0))
        wire_dim = meta.pop("wire_dim", None)
        plus = _decode_complex(data["plus"], w)
        minus = _decode_complex(data["minus"], w)
        f = cls(w, plus, minus, eps, meta)
        if wire_dim is not None:
            expected = wire_dim if np.isscalar(wire_dim) else tuple(wire_dim)
            if f.wire_dim != expected:
                raise ValueError(f"wire_dim {wire_dim} does not match stored vectors {f.wire_dim}")
        return f

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load_json(cls, path) -> "SpacetimeField":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save_csv(self, path) -> None:
        """One row per point in (t, x) coordinates, plus the norm of its layer."""
        layer_norms = {}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "plus_sq", "minus_sq", "density", "layer_norm"])
            for c in sorted(self.points(), key=lambda c: (c.t, c.x)):
                ip, im = self._index(c)
                ps = float(np.sum(np.abs(self.plus[ip, im]) ** 2))
                ms = float(np.sum(np.abs(self.minus[ip, im]) ** 2))
                if c.t not in layer_norms:
                    layer_norms[c.t] = self.layer_norm(c.t)
                writer.writerow([c.t, c.x, repr(ps), repr(ms), repr(ps + ms), repr(layer_norms[c.t])])


def _encode_complex(arr: np.ndarray) -> list:
    # row-major over (r, l); each entry is a list of [re, im] pairs
    n_r, n_l, _ = arr.shape
    return [
        [[[float(z.real), float(z.imag)] for z in arr[i, j]] for j in range(n_l)]
        for i in range(n_r)
    ]


def _decode_complex(data: list, w: Window) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 4 or arr.shape[:2] != (w.n_r, w.n_l) or arr.shape[3] != 2:
        raise ValueError(f"wire payload of shape {arr.shape} does not fit window {w}")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True)
class InitialRow:
    """Compactly supported data on the constant-t line ``t``.

    Entry ``k`` sits at ``(r_start + k, t - r_start - k)``.
    """

    t: int
    r_start: int
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=complex)
        minus = np.asarray(self.minus, dtype=complex)
        if plus.ndim == 1:
            plus = plus[:, None]
        if minus.ndim == 1:
            minus = minus[:, None]
        if plus.shape[0] != minus.shape[0] or plus.shape[0] < 1:
            raise ValueError("plus and minus must list the same, nonzero number of sites")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @property
    def n_sites(self) -> int:
        return self.plus.shape[0]

    def norm(self) -> float:
        return float(np.sum(np.abs(self.plus) ** 2) + np.sum(np.abs(self.minus) ** 2))

    @classmethod
    def delta(cls, plus, minus, t: int = 0, r: int = 0) -> "InitialRow":
        return cls(t, r, np.atleast_2d(np.asarray(plus, dtype=complex)), np.atleast_2d(np.asarray(minus, dtype=complex)))

    @classmethod
    def random(cls, n_sites: int, wire_dim, rng: np.random.Generator, t: int = 0, r_start: int = 0) -> "InitialRow":
        dp, dm = (wire_dim, wire_dim) if np.isscalar(wire_dim) else wire_dim
        plus = rng.normal(size=(n_sites, dp)) + 1j * rng.normal(size=(n_sites, dp))
        minus = rng.normal(size=(n_sites, dm)) + 1j * rng.normal(size=(n_sites, dm))
        nrm = np.sqrt(np.sum(np.abs(plus) ** 2) + np.sum(np.abs(minus) ** 2))
        return cls(t, r_start, plus / nrm, minus / nrm)
