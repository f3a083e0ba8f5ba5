"""Gates and single-step evolution for the FD Dirac scheme, the Dirac QW,
the Clock QW and the Clock QCA."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import (
    TOL,
    InitialRow,
    SpacetimeField,
    Window,
    WindowOverflowError,
    is_unitary,
)

QW_MODELS = ("dirac", "fd_dirac", "clock_qw")
ALL_MODELS = QW_MODELS + ("clock_qca",)

# Clock QCA wire basis, in this order
QCA_BASIS = ("q", "0", "1")
Q, ZERO, ONE = 0, 1, 2


@dataclass(frozen=True, eq=False)
class CoinOperator:
    """A ``(d+ + d-) x (d+ + d-)`` QW gate acting on ``psi_plus (+) psi_minus``.

    The first ``plus_dim`` outputs travel to ``(r + 1, l)``, the rest to
    ``(r, l + 1)``.
    """

    matrix: np.ndarray
    model: str
    params: dict
    plus_dim: int
    minus_dim: int
    unitary: bool = True

    kind = "direct_sum"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.plus_dim + self.minus_dim
        if m.shape != (n, n):
            raise ValueError(f"coin of shape {m.shape} does not match wire dims {self.plus_dim}+{self.minus_dim}")
        object.__setattr__(self, "matrix", m)

    @property
    def lightlike(self) -> np.ndarray:
        return self.matrix

    @property
    def wire_dim(self):
        return self.plus_dim if self.plus_dim == self.minus_dim else (self.plus_dim, self.minus_dim)

    def descriptor(self) -> dict:
        return model_descriptor(self.model, self.params)


@dataclass(frozen=True, eq=False)
class ScatteringOperator:
    """Clock QCA scattering unitary.

    ``matrix`` follows the defining rules literally: both input and output
    are ordered (left wire) (x) (right wire) in space.  The left input is
    the right-mover ``psi_plus``; the left output is the left-mover
    ``psi_minus``.  ``lightlike`` reorders the output so that both sides
    read ``psi_plus (x) psi_minus``, which is what patches compose.
    """

    matrix: np.ndarray
    inner_coin: np.ndarray
    params: dict = field(default_factory=dict)

    kind = "tensor"
    model = "clock_qca"
    plus_dim = 3
    minus_dim = 3
    wire_dim = 3
    unitary = True

    @property
    def lightlike(self) -> np.ndarray:
        return _SWAP9 @ self.matrix

    def descriptor(self) -> dict:
        return model_descriptor(self.model, self.params)


def _swap(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            s[b * d + a, a * d + b] = 1
    return s


_SWAP9 = _swap(3)


def _check_inner_coin(coin) -> np.ndarray:
    c = np.asarray(coin, dtype=complex)
    if c.shape != (2, 2):
        raise ValueError(f"inner coin must be 2x2, got {c.shape}")
    if not is_unitary(c):
        raise ValueError("inner coin is not unitary")
    return c


def dirac_matrix(m: float, eps: float) -> np.ndarray:
    c, s = np.cos(m * eps), np.sin(m * eps)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def dirac_coin(m: float, eps: float) -> CoinOperator:
    """``exp(-i m eps sigma_1)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return CoinOperator(dirac_matrix(m, eps), "dirac", {"m": float(m), "eps": float(eps)}, 1, 1)


def fd_dirac_coin(m: float, eps: float) -> CoinOperator:
    """The first-order finite-difference gate ``[[1, -i eps m], [-i eps m, 1]]``.

    Not unitary unless ``m * eps == 0``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mat = np.array([[1, -1j * eps * m], [-1j * eps * m, 1]], dtype=complex)
    return CoinOperator(mat, "fd_dirac", {"m": float(m), "eps": float(eps)}, 1, 1, unitary=(m * eps == 0))


@dataclass(frozen=True, eq=False)
class ClockWalkSpec:
    p: int
    q: int
    inner_coin: np.ndarray

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"p and q must be >= 1, got p={self.p}, q={self.q}")
        object.__setattr__(self, "inner_coin", _check_inner_coin(self.inner_coin))

    @property
    def dim(self) -> int:
        return self.p + self.q

    def basis(self) -> list[tuple[Fraction, str]]:
        """Counter labels ``(h, s)`` in matrix order: ``i/p`` for ``+`` then ``j/q`` for ``-``."""
        return [(Fraction(i, self.p), "+") for i in range(self.p)] + [
            (Fraction(j, self.q), "-") for j in range(self.q)
        ]

    def index(self, h, s: str) -> int:
        h = Fraction(h)
        n = self.p if s == "+" else self.q
        k = h * n
        if k.denominator != 1 or not 0 <= k < n:
            raise KeyError(f"{h}{s} is not a counter state for p={self.p}, q={self.q}")
        return int(k) if s == "+" else self.p + int(k)


def clock_walk_operator(spec: ClockWalkSpec):
    """Shift table and coin ``C_{p,q}`` with ``W_{p,q} = T_{p,q} C_{p,q}``.

    The shift table lists ``(h, s, dx)`` per basis state.
    """
    p, q = spec.p, spec.q
    (a, b), (c, d) = spec.inner_coin
    n = p + q
    C = np.zeros((n, n), dtype=complex)
    for k in range(p - 1):
        C[k, k + 1] = 1
    C[p - 1, 0] = a
    C[p - 1, p] = b
    for k in range(q - 1):
        C[p + k, p + k + 1] = 1
    C[n - 1, 0] = c
    C[n - 1, p] = d
    shifts = [(h, s, 1 if s == "+" else -1) for h, s in spec.basis()]
    return shifts, C


def clock_walk_map(spec: ClockWalkSpec, x: int, h, s: str) -> dict:
    """One step of the Clock QW on a basis state ``|x, h^s>``, case by case.

    Returns ``{(x', h', s'): amplitude}``.  At ``h = 0`` the coin column
    convention matches the matrix form (and the Dirac QW).
    """
    h = Fraction(h)
    spec.index(h, s)
    (a, b), (c, d) = spec.inner_coin
    top_p, top_q = Fraction(spec.p - 1, spec.p), Fraction(spec.q - 1, spec.q)
    if s == "+" and 0 < h <= top_p:
        return {(x + 1, h - Fraction(1, spec.p), "+"): 1.0}
    if s == "-" and 0 < h <= top_q:
        return {(x - 1, h - Fraction(1, spec.q), "-"): 1.0}
    if s == "+":
        return {(x + 1, top_p, "+"): a, (x - 1, top_q, "-"): c}
    return {(x + 1, top_p, "+"): b, (x - 1, top_q, "-"): d}


def clock_coin(p: int, q: int, inner_coin) -> CoinOperator:
    spec = ClockWalkSpec(p, q, inner_coin)
    _, C = clock_walk_operator(spec)
    params = {"p": int(p), "q": int(q), "coin": np.asarray(spec.inner_coin).tolist()}
    return CoinOperator(C, "clock_qw", params, p, q)


def clock_qca_scattering(inner_coin) -> ScatteringOperator:
    (a, b), (c, d) = coin = _check_inner_coin(inner_coin)
    U = np.zeros((9, 9), dtype=complex)

    def put(src, dst, amp=1.0):
        U[dst[0] * 3 + dst[1], src[0] * 3 + src[1]] += amp

    put((Q, Q), (Q, Q))
    put((Q, ZERO), (ZERO, Q))
    put((ZERO, Q), (Q, ZERO))
    put((ZERO, ZERO), (ZERO, ZERO))
    put((ONE, ONE), (ONE, ONE))
    put((ONE, Q), (Q, ONE))
    put((Q, ONE), (ONE, Q))
    put((ONE, ZERO), (ZERO, ONE), a)
    put((ONE, ZERO), (ONE, ZERO), b)
    put((ZERO, ONE), (ZERO, ONE), c)
    put((ZERO, ONE), (ONE, ZERO), d)
    return ScatteringOperator(U, coin, {"coin": coin.tolist()})


def particle_number_projector(n_wires: int, count: int) -> np.ndarray:
    """Diagonal projector onto basis states of ``n_wires`` wires holding ``count`` |1>s."""
    diag = np.zeros(3**n_wires)
    for idx in range(3**n_wires):
        digits = np.base_repr(idx, 3).zfill(n_wires)
        if digits.count(str(ONE)) == count:
            diag[idx] = 1
    return np.diag(diag)


# -- descriptors --------------------------------------------------------


def default_coin(m: float, eps: float) -> np.ndarray:
    return dirac_matrix(m, eps)


def model_descriptor(model: str, params: dict) -> dict:
    out = {"model": model}
    for k, v in params.items():
        if k == "coin":
            out["coin"] = [[[float(np.real(z)), float(np.imag(z))] for z in row] for row in np.asarray(v, dtype=complex)]
        else:
            out[k] = v
    return out


def _parse_coin(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float) if not isinstance(raw, np.ndarray) else raw
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    if arr.shape == (2, 2, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.shape == (2, 2):
        return arr.astype(complex)
    raise ValueError(f"coin must be 2x2 (entries real or [re, im]), got shape {arr.shape}")


def build_gate(model: str, params: dict):
    """Gate for ``model`` from a parameter dict (the model descriptor minus ``model``)."""
    if model not in ALL_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {', '.join(ALL_MODELS)}")
    if model in ("dirac", "fd_dirac"):
        m, eps = float(params.get("m", 0.0)), float(params.get("eps", 1.0))
        return dirac_coin(m, eps) if model == "dirac" else fd_dirac_coin(m, eps)
    if "coin" in params and params["coin"] is not None:
        coin = _parse_coin(params["coin"])
    else:
        coin = default_coin(float(params.get("m", 0.0)), float(params.get("eps", 1.0)))
    if model == "clock_qw":
        return clock_coin(int(params.get("p", 1)), int(params.get("q", 1)), coin)
    return clock_qca_scattering(coin)


def gate_from_descriptor(desc: dict):
    desc = dict(desc)
    if "model" not in desc:
        raise ValueError("model descriptor is missing the 'model' field")
    model = desc.pop("model")
    return build_gate(model, desc)


# -- evolution ----------------------------------------------------------


def qw_window(initial: InitialRow, steps: int) -> Window:
    """Smallest window holding the light cone of ``initial`` over ``steps`` steps."""
    r_lo = initial.r_start
    r_hi = initial.r_start + initial.n_sites - 1
    l_lo, l_hi = initial.t - r_hi, initial.t - r_lo
    return Window(r_lo, l_lo, r_hi - r_lo + 1 + steps, l_hi - l_lo + 1 + steps)


def qw_evolve(initial: InitialRow, coin: CoinOperator, steps: int, window: Window | None = None) -> SpacetimeField:
    """Fill a field layer by layer from data on one constant-t line.

    Each point applies ``coin`` to ``psi_plus (+) psi_minus`` and routes the
    top block to ``(r + 1, l)``, the bottom block to ``(r, l + 1)``.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    dp, dm = coin.plus_dim, coin.minus_dim
    if initial.plus.shape[1] != dp or initial.minus.shape[1] != dm:
        raise ValueError(
            f"initial data has wire dims {initial.plus.shape[1]}+{initial.minus.shape[1]}, coin expects {dp}+{dm}"
        )
    window = window or qw_window(initial, steps)
    meta = {
        "model": coin.model,
        "params": coin.descriptor(),
        "t0": initial.t,
        "t1": initial.t + steps,
    }
    meta["params"].pop("model")
    f = SpacetimeField.zeros(window, (dp, dm), eps=float(coin.params.get("eps", 1.0)), meta=meta)
    for k in range(initial.n_sites):
        c = (initial.r_start + k, initial.t - initial.r_start - k)
        if c not in window:
            if np.any(initial.plus[k]) or np.any(initial.minus[k]):
                raise WindowOverflowError(f"initial data at {c} lies outside window {window}")
            continue
        f.set(c, "+", initial.plus[k])
        f.set(c, "-", initial.minus[k])

    G = coin.matrix
    for t in range(initial.t, initial.t + steps):
        rs = window.layer(t)
        if rs.size == 0:
            continue
        ir = rs - window.r_min
        il = t - rs - window.l_min
        inp = np.concatenate([f.plus[ir, il], f.minus[ir, il]], axis=1)
        out = inp @ G.T
        out_p, out_m = out[:, :dp], out[:, dp:]
        _scatter(f.plus, ir + 1, il, out_p, window, rs, t, "+")
        _scatter(f.minus, ir, il + 1, out_m, window, rs, t, "-")
    return f


def _scatter(arr, ir, il, vals, window, rs, t, side):
    ok = (ir < window.n_r) & (il < window.n_l)
    if not np.all(ok):
        bad = np.flatnonzero(~ok & np.any(vals != 0, axis=1))
        if bad.size:
            r = int(rs[bad[0]])
            src = (r, t - r)
            dst = (r + 1, t - r) if side == "+" else (r, t - r + 1)
            raise WindowOverflowError(f"psi_{side} written from {src} to {dst}, outside window {window}")
    arr[ir[ok], il[ok]] = vals[ok]


def solution_residual(f: SpacetimeField, coin: CoinOperator, t_min: int | None = None, t_max: int | None = None) -> float:
    """Max mismatch of ``coin psi(r, l)`` against the stored successor wires.

    Only points whose two successors are in the window and with
    ``t_min <= t < t_max`` are checked.
    """
    w = f.window
    t_lo, t_hi = w.t_range
    t_min = t_lo if t_min is None else t_min
    t_max = t_hi if t_max is None else t_max
    dp = coin.plus_dim
    worst = 0.0
    for t in range(t_min, t_max):
        rs = w.layer(t)
        rs = rs[(rs < w.r_max) & (t - rs < w.l_max)]
        if rs.size == 0:
            continue
        ir, il = rs - w.r_min, t - rs - w.l_min
        out = np.concatenate([f.plus[ir, il], f.minus[ir, il]], axis=1) @ coin.matrix.T
        worst = max(
            worst,
            float(np.max(np.abs(out[:, :dp] - f.plus[ir + 1, il]))),
            float(np.max(np.abs(out[:, dp:] - f.minus[ir, il + 1]))),
        )
    return worst


@dataclass
class QCAState:
    """Many-body state on ``n_wires`` periodic wires, each in span{|q>, |0>, |1>}."""

    n_wires: int
    amplitudes: np.ndarray
    phase_parity: int = 0

    def __post_init__(self):
        if self.n_wires < 2 or self.n_wires % 2:
            raise ValueError(f"n_wires must be even and positive, got {self.n_wires}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 3**self.n_wires:
            raise ValueError("amplitude vector must have dimension 3**n_wires")

    @classmethod
    def from_config(cls, labels: str, phase_parity: int = 0) -> "QCAState":
        idx = 0
        for ch in labels:
            idx = idx * 3 + QCA_BASIS.index(ch)
        amps = np.zeros(3 ** len(labels), dtype=complex)
        amps[idx] = 1
        return cls(len(labels), amps, phase_parity)

    @classmethod
    def random(cls, n_wires: int, rng: np.random.Generator) -> "QCAState":
        v = rng.normal(size=3**n_wires) + 1j * rng.normal(size=3**n_wires)
        return cls(n_wires, v / np.linalg.norm(v))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def occupation(self) -> np.ndarray:
        """Probability of |1> on each wire."""
        probs = np.abs(self.amplitudes.reshape((3,) * self.n_wires)) ** 2
        return np.array(
            [probs.take(ONE, axis=k).sum() for k in range(self.n_wires)]
        )


def qca_sublayer(state: QCAState, U: ScatteringOperator, parity: int) -> QCAState:
    """Apply ``U`` to every pair ``(k, k + 1)`` with ``k = parity mod 2``, periodically."""
    N = state.n_wires
    psi = state.amplitudes.reshape((3,) * N)
    U4 = U.matrix.reshape(3, 3, 3, 3)
    for k in range(parity % 2, N, 2):
        i, j = k, (k + 1) % N
        psi = np.tensordot(U4, psi, axes=([2, 3], [i, j]))
        psi = np.moveaxis(psi, [0, 1], [i, j])
    return QCAState(N, psi.reshape(-1), (parity + 1) % 2)


def qca_step(state: QCAState, U: ScatteringOperator) -> QCAState:
    """One brickwork step: the pending sub-layer, then the other one."""
    if state.n_wires % 2:
        raise ValueError("the brickwork needs an even number of wires")
    s = qca_sublayer(state, U, state.phase_parity)
    return qca_sublayer(s, U, s.phase_parity)
