"""Convergence-order fits, the encoding uniqueness search, the second-order
counterexample, and the Clock QW decoupling / Klein-Gordon checks."""
from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .lattice import TOL, SpacetimeField, Window
from .lorentz import Encoding, LorentzParams, covariance_residual
from .models import ClockWalkSpec, dirac_coin, dirac_matrix
from .observables import surface_norm
from .patch import build_patch

EXACT_TOL = TOL
MIN_R2 = 0.99
SLOPE_TOL = 0.1


def worker_count() -> int:
    """Thread cap from ``LORENTZLATTICE_THREADS`` (default: cpu count)."""
    raw = os.environ.get("LORENTZLATTICE_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"LORENTZLATTICE_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def parallel_map(fn, items) -> list:
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- order fits -----------------------------------------------------------


@dataclass
class OrderFit:
    eps_values: np.ndarray
    residuals: np.ndarray
    slope: float | None
    intercept: float | None
    r_squared: float | None
    status: str

    @property
    def conclusive(self) -> bool:
        return self.r_squared is not None and self.r_squared >= MIN_R2

    def order(self) -> int | None:
        return int(self.status.split("_")[1]) if self.status.startswith("order_") else None


def fit_loglog(eps_values, residuals) -> tuple[float, float, float]:
    x, y = np.log(eps_values), np.log(residuals)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def order_fit(residual_fn: Callable[[float], float] | Sequence[float], eps_values) -> OrderFit:
    """Least-squares slope of ``log residual`` against ``log eps``.

    ``status`` is ``"exact"`` when every residual is below 1e-12,
    ``"order_k"`` for a conclusive fit within 0.1 of the integer ``k``,
    ``"fail"`` otherwise.
    """
    eps = np.asarray(eps_values, dtype=float)
    if eps.size < 4:
        raise ValueError("order_fit needs at least 4 eps values")
    if np.any(eps <= 0):
        raise ValueError("eps values must be positive")
    if math.log10(eps.max() / eps.min()) < 3 - 1e-9:
        raise ValueError("eps values must span at least 3 decades")
    if callable(residual_fn):
        res = np.asarray(parallel_map(residual_fn, eps), dtype=float)
    else:
        res = np.asarray(residual_fn, dtype=float)
    if res.shape != eps.shape:
        raise ValueError("one residual per eps value is needed")
    order = np.argsort(-eps)
    eps, res = eps[order], res[order]
    if np.all(res <= EXACT_TOL):
        return OrderFit(eps, res, None, None, None, "exact")
    if np.any(res <= 0):
        return OrderFit(eps, res, None, None, None, "fail")
    slope, intercept, r2 = fit_loglog(eps, res)
    k = round(slope)
    ok = r2 >= MIN_R2 and abs(slope - k) <= SLOPE_TOL and k > 0
    return OrderFit(eps, res, slope, intercept, r2, f"order_{k}" if ok else "fail")


def make_report(check: str, status: str, slope=None, r2=None, details: dict | None = None) -> dict:
    return {"check": check, "status": status, "slope": slope, "r2": r2, "details": details or {}}


def fit_report(check: str, fit: OrderFit, details: dict | None = None) -> dict:
    d = {"eps": fit.eps_values.tolist(), "residuals": fit.residuals.tolist()}
    d.update(details or {})
    return make_report(check, fit.status, fit.slope, fit.r_squared, d)


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)


# -- encoding uniqueness ----------------------------------------------------


@dataclass
class EncodingCandidate:
    v_plus: np.ndarray
    v_minus: np.ndarray
    first_order_residual: float
    distance: float = 0.0
    covariance_residual: float | None = None

    def __post_init__(self):
        for name in ("v_plus", "v_minus"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if abs(np.linalg.norm(v) - 1) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")
            setattr(self, name, v)


@dataclass
class UniquenessResult:
    best: EncodingCandidate
    flat: EncodingCandidate
    floor: float
    floor_candidate: EncodingCandidate
    n_tested: int
    min_distance: float
    converged: bool = True
    details: dict = field(default_factory=dict)


def first_order_residual(v_plus, v_minus, alpha: int, beta: int, m: float) -> float:
    """``|m v+ - m'(sum v-) 1_beta|^2 + |m v- - m'(sum v+) 1_alpha|^2`` with ``m' = m / sqrt(alpha beta)``."""
    v_plus, v_minus = np.asarray(v_plus), np.asarray(v_minus)
    mp = m / math.sqrt(alpha * beta)
    a = m * v_plus - mp * v_minus.sum() * np.ones(beta)
    b = m * v_minus - mp * v_plus.sum() * np.ones(alpha)
    return float(np.vdot(a, a).real + np.vdot(b, b).real)


def flat_distance(v_plus, v_minus) -> float:
    """Distance from ``(v+, v-)`` to the common-phase flat family ``e^{i lambda} (1/sqrt(beta), 1/sqrt(alpha))``."""
    beta, alpha = len(v_plus), len(v_minus)
    overlap = np.sum(v_plus) / math.sqrt(beta) + np.sum(v_minus) / math.sqrt(alpha)
    return math.sqrt(max(0.0, 4 - 2 * abs(overlap)))


def _unpack(x, alpha, beta):
    z = x[: alpha + beta] + 1j * x[alpha + beta :]
    vp, vm = z[:beta], z[beta:]
    return vp / np.linalg.norm(vp), vm / np.linalg.norm(vm)


def encoding_uniqueness_search(
    alpha: int,
    beta: int,
    m: float = 1.0,
    eps: float = 1e-3,
    n_samples: int = 4000,
    n_refine: int = 8,
    min_distance: float = 0.1,
    seed: int = 0,
) -> UniquenessResult:
    """Minimise the first-order covariance residual over unit ``v+, v-``.

    Random sampling of the product of spheres, then local refinement.  The
    floor is the smallest residual among tested candidates at distance
    ``>= min_distance`` from the flat family (refined under that
    constraint).
    """
    if m <= 0:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    n = alpha + beta

    def F(x):
        vp, vm = _unpack(x, alpha, beta)
        return first_order_residual(vp, vm, alpha, beta, m)

    def dist(x):
        return flat_distance(*_unpack(x, alpha, beta))

    xs = rng.normal(size=(n_samples, 2 * n))
    vals = np.array([F(x) for x in xs])
    dists = np.array([dist(x) for x in xs])

    any_success = False
    best_x, best_val = None, np.inf
    for k in np.argsort(vals)[:n_refine]:
        res = minimize(F, xs[k], method="BFGS", options={"gtol": 1e-12})
        any_success |= bool(res.success)
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)

    far = np.flatnonzero(dists >= min_distance)
    floor_x, floor_val = xs[far[np.argmin(vals[far])]], float(vals[far].min())
    cons = {"type": "ineq", "fun": lambda x: dist(x) - min_distance}
    for k in far[np.argsort(vals[far])][:n_refine]:
        res = minimize(F, xs[k], method="SLSQP", constraints=[cons], options={"ftol": 1e-14, "maxiter": 500})
        if dist(res.x) >= min_distance - 1e-9 and res.fun < floor_val:
            floor_x, floor_val = res.x, float(res.fun)

    gate = dirac_coin(m, eps)
    params = LorentzParams(alpha, beta, "dirac")

    def candidate(vp, vm):
        enc = (Encoding.from_vector(vp), Encoding.from_vector(vm))
        return EncodingCandidate(
            vp, vm, first_order_residual(vp, vm, alpha, beta, m), flat_distance(vp, vm), covariance_residual(gate, params, enc)
        )

    flat = candidate(np.ones(beta) / math.sqrt(beta), np.ones(alpha) / math.sqrt(alpha))
    return UniquenessResult(
        best=candidate(*_unpack(best_x, alpha, beta)),
        flat=flat,
        floor=floor_val,
        floor_candidate=candidate(*_unpack(floor_x, alpha, beta)),
        n_tested=n_samples + 2 * n_refine,
        converged=any_success or best_val <= 1e-16,  # squared residual: ~sqrt(machine eps) in amplitude
        min_distance=min_distance,
    )


# -- second-order counterexample --------------------------------------------


def second_order_counterexample(m: float = 1.0, eps: float = 1e-2) -> tuple[complex, complex, float]:
    """Outgoing left-mover wires of a 2 x 1 patch fed by a lone left-mover.

    Both should equal the next patch's flat input; returns the two values
    and their gap divided by ``eps**2``.
    """
    alpha, beta = 2, 1
    gate = dirac_coin(m / math.sqrt(alpha * beta), eps)
    patch = build_patch(gate, alpha, beta)
    inputs = np.array([0.0, 1 / math.sqrt(2), 1 / math.sqrt(2)], dtype=complex)
    out = patch.boundary_minus @ inputs
    return complex(out[0]), complex(out[1]), float(abs(out[0] - out[1]) / eps**2)


# -- Clock QW decoupling ----------------------------------------------------


def kg_stencil_residual(f: SpacetimeField, p: int, q: int, inner_coin, t_range=None) -> np.ndarray:
    """Per-point, per-component stencil values ``psi(r,l) - a psi(r-p,l) - d psi(r,l-q) + det psi(r-p,l-q)``.

    Returns an array over the points whose whole stencil lies in the
    window and in the evolved layers ``t0 <= t - p - q``, ``t <= t1``.
    """
    (a, _), (_, d) = np.asarray(inner_coin)
    det = np.linalg.det(np.asarray(inner_coin))
    w = f.window
    t0, t1 = t_range or (f.meta.get("t0", w.t_range[0]), f.meta.get("t1", w.t_range[1]))
    if t1 - t0 + 1 < p + q + 1:
        raise ValueError(f"need at least {p + q + 1} evolved layers, field has {t1 - t0 + 1}")
    psi = np.concatenate([f.plus, f.minus], axis=2)
    if psi.shape[0] <= p or psi.shape[1] <= q:
        raise ValueError("window too small for the stencil")
    s = psi[p:, q:] - a * psi[:-p, q:] - d * psi[p:, :-q] + det * psi[:-p, :-q]
    r = np.arange(w.r_min + p, w.r_max + 1)[:, None]
    l = np.arange(w.l_min + q, w.l_max + 1)[None, :]
    mask = (r + l - p - q >= t0) & (r + l <= t1)
    return s[mask]


def kg_decoupling_residual(f: SpacetimeField, spec: ClockWalkSpec, t_range=None) -> float:
    vals = kg_stencil_residual(f, spec.p, spec.q, spec.inner_coin, t_range)
    if vals.size == 0:
        raise ValueError("no point of the window carries a complete stencil")
    return float(np.abs(vals).max())


@dataclass
class KGMassResult:
    predicted_mass: float
    second_order_coefficient: complex
    expected_coefficient: float
    relative_error: float
    matches: bool


def series_coefficients(fn: Callable[[float], complex], degree: int = 8, eps_max: float = 0.1, n: int = 40) -> np.ndarray:
    """Even Taylor coefficients ``c_0, c_2, ..., c_degree`` of ``fn`` by least squares near 0."""
    eps = np.linspace(eps_max / n, eps_max, n)
    vals = np.array([fn(e) for e in eps], dtype=complex)
    powers = np.arange(0, degree + 1, 2)
    A = eps[:, None] ** powers[None, :]
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return coef


def kg_mass_check(p: int, q: int, m: float, coin_fn: Callable[[float], np.ndarray] | None = None) -> KGMassResult:
    """Check that the coin diagonal is ``1 - eps^2 m^2 / 2 + O(eps^4)`` and return ``m / sqrt(pq)``.

    ``coin_fn(eps)`` gives the inner coin; the default is the Dirac coin
    at mass ``m``.
    """
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    coin_fn = coin_fn or (lambda e: dirac_matrix(m, e))
    for e in (1e-3, 1e-2, 1e-1):
        c = np.asarray(coin_fn(e))
        det = np.linalg.det(c)
        if abs(det - 1) > 1e-10:
            raise ValueError(f"the decoupled form needs det(C) = 1, got {det:.6g} at eps={e}")
        if abs(c[0, 0] - c[1, 1]) > 1e-10:
            raise ValueError("the decoupled form needs equal diagonal coin entries a = d")
    coef = series_coefficients(lambda e: np.asarray(coin_fn(e))[0, 0])
    expected = -(m**2) / 2
    c2 = complex(coef[1])
    rel = abs(c2 - expected) / abs(expected) if expected else abs(c2)
    return KGMassResult(m / math.sqrt(p * q), c2, expected, float(rel), rel <= 1e-10 and abs(coef[0] - 1) <= 1e-10)


# -- sampling ---------------------------------------------------------------


def sampled_continuum_field(f: SpacetimeField, spec: ClockWalkSpec) -> SpacetimeField:
    """One value per ``p x q`` patch, read from the ``h = 0`` counters at its corner.

    ``psi'(R, L) = (psi_plus(pR, qL)[0] / sqrt(q), psi_minus(pR, qL)[0] / sqrt(p))``.
    """
    p, q = spec.p, spec.q
    if f.plus_dim != p or f.minus_dim != q:
        raise ValueError(f"field wire dims {f.plus_dim}+{f.minus_dim} do not match p={p}, q={q}")
    w = f.window
    R0, L0 = -(-w.r_min // p), -(-w.l_min // q)
    R1, L1 = (w.r_max + 1) // p, (w.l_max + 1) // q
    if R1 <= R0 or L1 <= L0:
        raise ValueError(f"window {w} holds no complete {p} x {q} patch")
    if (R0 * p, L0 * q, R1 * p - 1, L1 * q - 1) != (w.r_min, w.l_min, w.r_max, w.l_max):
        warnings.warn(f"window {w} is not tiled by {p} x {q} patches; partial patches dropped", stacklevel=2)
    ir = np.arange(R0, R1) * p - w.r_min
    il = np.arange(L0, L1) * q - w.l_min
    plus = f.plus[np.ix_(ir, il)][..., :1] / math.sqrt(q)
    minus = f.minus[np.ix_(ir, il)][..., :1] / math.sqrt(p)
    meta = {"model": "sampled_clock_qw", "params": {"p": p, "q": q}}
    lz = f.meta.get("lorentz")
    if lz and "source_t0" in lz and (lz["alpha"], lz["beta"]) == (p, q):
        meta["t0"], meta["t1"] = lz["source_t0"], lz["source_t1"]
    return SpacetimeField(Window(R0, L0, R1 - R0, L1 - L0), plus, minus, f.eps, meta)


def sampled_surface_norm(g: SpacetimeField, s, p: int, q: int) -> float:
    """Surface norm of a sampled field with each value spread back over its patch:
    right crossings count ``q`` times, left crossings ``p`` times."""
    total = 0.0
    for _, (side, _, _), j in surface_norm(g, s).contributions:
        total += j * (q if side == "+" else p)
    return total
