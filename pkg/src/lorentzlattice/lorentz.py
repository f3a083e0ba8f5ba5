"""Discrete Lorentz transforms: encodings, parameter maps, covariance
residuals, field transforms and their inverse, and non-homogeneous
stretching of gate networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable

import numpy as np
from scipy.linalg import block_diag

from .lattice import TOL, SpacetimeField, Window
from .models import Q, build_gate
from .patch import build_patch

ENCODING_KINDS = ("dirac_flat", "clock_embed", "qca_vacuum_pad")
SUBSPACE_TOL = 1e-10


class HomogeneityError(ValueError):
    """The model's parameter map depends on (alpha, beta)."""


class SubspaceError(ValueError):
    """Patch wires are not in the image of the encoding."""


# -- encodings ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Encoding:
    """Isometry from one wire into ``alpha`` wires.

    ``block_dim`` is the dimension of each output wire; it differs from
    ``in_dim`` only for ``clock_embed`` with a counter scale.
    """

    alpha: int
    kind: str
    matrix: np.ndarray
    in_dim: int
    block_dim: int
    combination: str = "direct_sum"
    counter_scale: int = 1

    @property
    def projector(self) -> np.ndarray:
        return self.matrix @ self.matrix.conj().T

    @classmethod
    def from_vector(cls, v, d: int = 1) -> "Encoding":
        """``psi -> v (x) psi`` for a unit vector ``v``."""
        v = np.asarray(v, dtype=complex).reshape(-1, 1)
        return cls(v.shape[0], "custom", np.kron(v, np.eye(d)), d, d)


def make_encoding(kind: str, alpha: int, d: int, counter_scale: int = 1) -> Encoding:
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if kind == "dirac_flat":
        mat = np.kron(np.ones((alpha, 1)) / math.sqrt(alpha), np.eye(d))
        return Encoding(alpha, kind, mat.astype(complex), d, d)
    if kind == "clock_embed":
        # |k/d> -> |(s k)/(s d)> in the bottom summand
        s = counter_scale
        mat = np.zeros((alpha * s * d, d), dtype=complex)
        mat[s * np.arange(d), np.arange(d)] = 1
        return Encoding(alpha, kind, mat, d, s * d, counter_scale=s)
    if kind == "qca_vacuum_pad":
        if d != 3:
            raise ValueError("vacuum padding is defined for the three-level Clock QCA wire")
        mat = np.zeros((3**alpha, 3), dtype=complex)
        for a in range(3):
            mat[a * 3 ** (alpha - 1) + Q, a] = 1
        return Encoding(alpha, kind, mat, 3, 3, combination="tensor")
    raise ValueError(f"unknown encoding kind {kind!r}; expected one of {', '.join(ENCODING_KINDS)}")


def stack_encoding(outer: Encoding, inner: Encoding) -> np.ndarray:
    """``(oplus_outer E_inner) E_outer`` or its tensor analogue."""
    if outer.combination == "tensor":
        big = reduce(np.kron, [inner.matrix] * outer.alpha)
    else:
        big = block_diag(*([inner.matrix] * outer.alpha))
    return big @ outer.matrix


def combine(e_plus: Encoding, e_minus: Encoding) -> np.ndarray:
    """``E_bar = E_beta (+) E_alpha`` (QW) or ``E_beta (x) E_alpha`` (QCA)."""
    if e_plus.combination == "tensor":
        return np.kron(e_plus.matrix, e_minus.matrix)
    return block_diag(e_plus.matrix, e_minus.matrix)


def model_encodings(model: str, alpha: int, beta: int, plus_dim: int = 1, minus_dim: int = 1):
    """Default ``(E_beta, E_alpha)`` pair for a model, given the source wire dims."""
    if model in ("dirac", "fd_dirac"):
        return make_encoding("dirac_flat", beta, plus_dim), make_encoding("dirac_flat", alpha, minus_dim)
    if model == "clock_qw":
        return (
            make_encoding("clock_embed", beta, plus_dim, counter_scale=alpha),
            make_encoding("clock_embed", alpha, minus_dim, counter_scale=beta),
        )
    if model == "clock_qca":
        return make_encoding("qca_vacuum_pad", beta, 3), make_encoding("qca_vacuum_pad", alpha, 3)
    raise ValueError(f"no encoding known for model {model!r}")


def encodings_for_gate(gate, alpha: int, beta: int):
    return model_encodings(gate.model, alpha, beta, gate.plus_dim, gate.minus_dim)


# -- parameter maps -----------------------------------------------------


@dataclass(frozen=True)
class MassMap:
    name: str
    apply: Callable[[int, int, dict], dict]
    frame_dependent: bool


def _dirac_map(alpha, beta, params):
    return {**params, "m": params["m"] / math.sqrt(alpha * beta)}


def _clock_map(alpha, beta, params):
    return {**params, "p": alpha * params["p"], "q": beta * params["q"]}


def _identity_map(alpha, beta, params):
    return dict(params)


MASS_MAPS = {
    "dirac": MassMap("dirac", _dirac_map, True),
    "clock_qw": MassMap("clock_qw", _clock_map, True),
    "identity": MassMap("identity", _identity_map, False),
}
MODEL_MASS_MAP = {"dirac": "dirac", "fd_dirac": "dirac", "clock_qw": "clock_qw", "clock_qca": "identity"}


@dataclass(frozen=True)
class LorentzParams:
    alpha: int
    beta: int
    mass_map: str | None = None

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise ValueError(f"alpha and beta must be positive integers, got {self.alpha}, {self.beta}")
        if self.mass_map is not None and self.mass_map not in MASS_MAPS:
            raise ValueError(f"unknown mass map {self.mass_map!r}")

    @classmethod
    def for_model(cls, model: str, alpha: int, beta: int) -> "LorentzParams":
        return cls(alpha, beta, MODEL_MASS_MAP[model])

    @property
    def velocity(self) -> float:
        return (self.alpha - self.beta) / (self.alpha + self.beta)

    @property
    def scale(self) -> float:
        return math.sqrt(self.alpha * self.beta)

    def map_params(self, params: dict) -> dict:
        if self.mass_map is None:
            raise ValueError("a Lorentz transform needs a parameter map m -> m'")
        return MASS_MAPS[self.mass_map].apply(self.alpha, self.beta, params)

    def inverse_params(self, params: dict) -> dict:
        if self.mass_map == "dirac":
            return {**params, "m": params["m"] * self.scale}
        if self.mass_map == "clock_qw":
            return {**params, "p": params["p"] // self.alpha, "q": params["q"] // self.beta}
        return dict(params)


def gate_params(gate) -> dict:
    desc = gate.descriptor()
    desc.pop("model")
    return desc


def transformed_gate(gate, params: LorentzParams):
    return build_gate(gate.model, params.map_params(gate_params(gate)))


# -- covariance ---------------------------------------------------------


def covariance_residual(gate, params: LorentzParams, enc_pair=None) -> float:
    """``max | E_bar gate_m - boundary(patch(gate_m')) E_bar |``."""
    if params.mass_map is None:
        raise ValueError("covariance_residual needs LorentzParams with a mass map")
    e_plus, e_minus = enc_pair or encodings_for_gate(gate, params.alpha, params.beta)
    new_gate = transformed_gate(gate, params)
    E = combine(e_plus, e_minus)
    if E.shape[1] != gate.lightlike.shape[0]:
        raise ValueError("encodings do not match the gate's wire dimensions")
    lhs = E @ gate.lightlike
    rhs = build_patch(new_gate, params.alpha, params.beta).boundary @ E
    return float(np.max(np.abs(lhs - rhs)))


# -- field transforms ---------------------------------------------------


def _encode_field(f: SpacetimeField, e_plus: Encoding, e_minus: Encoding) -> np.ndarray:
    if f.plus_dim != e_plus.in_dim or f.minus_dim != e_minus.in_dim:
        raise ValueError("encodings do not match the field's wire dimensions")
    return np.concatenate(
        [f.plus @ e_plus.matrix.T, f.minus @ e_minus.matrix.T], axis=2
    )


def lorentz_transform_field(f: SpacetimeField, gate, params: LorentzParams, enc_pair=None) -> SpacetimeField:
    """Replace every point by an alpha x beta patch fed by its encoded wires."""
    if gate.kind != "direct_sum":
        raise TypeError("field transforms are defined for QW models only; QCA covariance is operator level")
    a, b = params.alpha, params.beta
    e_plus, e_minus = enc_pair or encodings_for_gate(gate, a, b)
    new_gate = transformed_gate(gate, params)
    interiors = build_patch(new_gate, a, b).interior_maps()  # (a, b, k, n_in)
    checked = _encode_field(f, e_plus, e_minus)  # (n_r, n_l, n_in)
    vals = np.einsum("ijkn,rln->riljk", interiors, checked)
    w = f.window
    n_r, n_l = w.n_r, w.n_l
    vals = vals.reshape(n_r * a, n_l * b, -1)
    dp = new_gate.plus_dim
    new_w = Window(a * w.r_min, b * w.l_min, a * n_r, b * n_l)
    params_new = gate_params(new_gate)
    meta = {
        "model": gate.model,
        "params": params_new,
        "lorentz": {
            "alpha": a,
            "beta": b,
            "mass_map": params.mass_map,
            "encoding": e_plus.kind,
            "source_params": gate_params(gate),
            "source_window": [w.r_min, w.l_min, w.n_r, w.n_l],
        },
    }
    for key in ("t0", "t1"):
        if key in f.meta:
            meta["lorentz"]["source_" + key] = f.meta[key]
    return SpacetimeField(new_w, vals[..., :dp], vals[..., dp:], f.eps, meta)


def unzoom_field(fp: SpacetimeField, params: LorentzParams, enc_pair=None, model: str | None = None) -> SpacetimeField:
    """Read each patch's incoming wires back through ``E^dagger``.

    Every patch's incoming wires must lie in the image of the encoding,
    otherwise ``SubspaceError`` names the first offending patch.
    """
    a, b = params.alpha, params.beta
    w = fp.window
    if w.r_min % a or w.l_min % b or w.n_r % a or w.n_l % b:
        raise ValueError(f"window {w} is not tiled by {a} x {b} patches")
    model = model or fp.meta.get("model")
    if enc_pair is None:
        if model == "clock_qw":
            dims = (fp.plus_dim // a, fp.minus_dim // b)
        else:
            dims = (fp.plus_dim, fp.minus_dim)
        enc_pair = model_encodings(model, a, b, *dims)
    e_plus, e_minus = enc_pair
    n_r, n_l = w.n_r // a, w.n_l // b
    # incoming rows: psi_plus(a r, b l + j); incoming columns: psi_minus(a r + i, b l)
    rows = fp.plus[::a].reshape(n_r, n_l, b * fp.plus_dim)
    cols = fp.minus[:, ::b].reshape(n_r, a, n_l, fp.minus_dim).transpose(0, 2, 1, 3).reshape(n_r, n_l, a * fp.minus_dim)
    for name, wires, enc in (("+", rows, e_plus), ("-", cols, e_minus)):
        leak = wires - wires @ enc.projector.T
        bad = np.abs(leak).max(axis=2) > SUBSPACE_TOL
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            src = (w.r_min // a + i, w.l_min // b + j)
            raise SubspaceError(
                f"incoming psi_{name} wires of the patch at {(a * src[0], b * src[1])} (source point {src}) "
                f"leave the encoding subspace by {np.abs(leak[i, j]).max():.3e}"
            )
    plus = rows @ e_plus.matrix.conj()
    minus = cols @ e_minus.matrix.conj()
    meta = {k: v for k, v in fp.meta.items() if k != "lorentz"}
    lz = fp.meta.get("lorentz", {})
    if "source_params" in lz:
        meta["params"] = lz["source_params"]
    elif "params" in fp.meta:
        meta["params"] = params.inverse_params(fp.meta["params"])
    for key in ("t0", "t1"):
        if "source_" + key in lz:
            meta[key] = lz["source_" + key]
    return SpacetimeField(Window(w.r_min // a, w.l_min // b, n_r, n_l), plus, minus, fp.eps, meta)


def gluing_mismatch(f: SpacetimeField, gate, params: LorentzParams, enc_pair=None, t_range=None) -> float:
    """Largest gap between a patch's outgoing wires and the next patches' incoming ones.

    Checks every source point with ``t0 <= t < t1`` whose successors are in
    the window; ``t_range`` defaults to the evolved layers of ``f``.
    """
    a, b = params.alpha, params.beta
    e_plus, e_minus = enc_pair or encodings_for_gate(gate, a, b)
    new_gate = transformed_gate(gate, params)
    B = build_patch(new_gate, a, b).boundary
    checked = _encode_field(f, e_plus, e_minus)
    n_plus = e_plus.matrix.shape[0]
    w = f.window
    t0, t1 = t_range or (f.meta.get("t0", w.t_range[0]), f.meta.get("t1", w.t_range[1]))
    out = checked[:-1, :-1] @ B.T
    want_plus = checked[1:, :-1, :n_plus]
    want_minus = checked[:-1, 1:, n_plus:]
    r = np.arange(w.r_min, w.r_max)[:, None]
    l = np.arange(w.l_min, w.l_max)[None, :]
    mask = (r + l >= t0) & (r + l < t1)
    if not mask.any():
        return 0.0
    gap = np.concatenate([out[..., :n_plus] - want_plus, out[..., n_plus:] - want_minus], axis=2)
    return float(np.abs(gap[mask]).max())


def transformed_solution_residual(fp: SpacetimeField, gate_prime, alpha: int, beta: int, src_t_range) -> float:
    """Local consistency of a transformed field with the mapped gate.

    Only points whose own patch and whose successor's patch come from
    source layers in ``[t0, t1]`` are compared.
    """
    w = fp.window
    t0, t1 = src_t_range
    dp = gate_prime.plus_dim
    out = np.concatenate([fp.plus, fp.minus], axis=2) @ gate_prime.matrix.T
    r = np.arange(w.r_min, w.r_max + 1)[:, None]
    l = np.arange(w.l_min, w.l_max + 1)[None, :]
    src_t = r // alpha + l // beta
    own = (src_t >= t0) & (src_t <= t1)
    worst = 0.0
    nxt_r = (r + 1) // alpha + l // beta
    m = own[:-1] & (nxt_r[:-1] <= t1)
    if m.any():
        worst = max(worst, float(np.abs(out[:-1, :, :dp] - fp.plus[1:])[m].max()))
    nxt_l = r // alpha + (l + 1) // beta
    m = own[:, :-1] & (nxt_l[:, :-1] <= t1)
    if m.any():
        worst = max(worst, float(np.abs(out[:, :-1, dp:] - fp.minus[:, 1:])[m].max()))
    return worst


def reevolve_transformed(fp: SpacetimeField, gate_prime, alpha: int, beta: int, src_t_range) -> SpacetimeField:
    """Recompute a transformed field from its earliest wires with ``gate_prime``.

    Every point owned by a source layer in ``[t0, t1]`` whose predecessor is
    also owned gets its wire from the predecessor's gate output; the rest
    keep their stored values and act as initial data.
    """
    w = fp.window
    t0, t1 = src_t_range
    r = np.arange(w.r_min, w.r_max + 1)[:, None]
    l = np.arange(w.l_min, w.l_max + 1)[None, :]
    own = (r // alpha + l // beta >= t0) & (r // alpha + l // beta <= t1)
    out = fp.copy()
    dp = gate_prime.plus_dim
    G = gate_prime.matrix
    lo, hi = w.t_range
    for t in range(lo, hi):
        rs = w.layer(t)
        ir, il = rs - w.r_min, t - rs - w.l_min
        keep = own[ir, il]
        ir, il = ir[keep], il[keep]
        if ir.size == 0:
            continue
        res = np.concatenate([out.plus[ir, il], out.minus[ir, il]], axis=1) @ G.T
        ok = ir + 1 < w.n_r
        ok[ok] = own[ir[ok] + 1, il[ok]]
        out.plus[ir[ok] + 1, il[ok]] = res[ok, :dp]
        ok = il + 1 < w.n_l
        ok[ok] = own[ir[ok], il[ok] + 1]
        out.minus[ir[ok], il[ok] + 1] = res[ok, dp:]
    return out


# -- non-homogeneous transforms ------------------------------------------


@dataclass
class NonHomogParams:
    """One alpha per right-moving line ``r`` and one beta per left-moving line ``l``.

    Lines absent from the maps use 1.
    """

    alpha_by_r: dict = field(default_factory=dict)
    beta_by_l: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, mp in (("alpha", self.alpha_by_r), ("beta", self.beta_by_l)):
            for k, v in mp.items():
                if int(v) < 1:
                    raise ValueError(f"{name} at line {k} must be >= 1, got {v}")

    def alpha(self, r: int) -> int:
        return int(self.alpha_by_r.get(r, 1))

    def beta(self, l: int) -> int:
        return int(self.beta_by_l.get(l, 1))

    def to_dict(self) -> dict:
        return {"alpha_runs": _rle(self.alpha_by_r), "beta_runs": _rle(self.beta_by_l)}

    @classmethod
    def from_dict(cls, data: dict) -> "NonHomogParams":
        return cls(_unrle(data.get("alpha_runs", [])), _unrle(data.get("beta_runs", [])))


def _rle(mp: dict) -> list:
    runs = []
    for k in sorted(mp):
        v = int(mp[k])
        if runs and runs[-1][1] == k and runs[-1][2] == v:
            runs[-1][1] = k + 1
        else:
            runs.append([k, k + 1, v])
    return runs


def _unrle(runs) -> dict:
    return {k: int(v) for start, stop, v in runs for k in range(int(start), int(stop))}


@dataclass(frozen=True, eq=False)
class GateNetwork:
    """The same gate at every point of a lightlike window."""

    window: Window
    gate: object

    @property
    def n_rows(self) -> int:
        return self.window.n_l

    @property
    def n_cols(self) -> int:
        return self.window.n_r


@dataclass(frozen=True, eq=False)
class StretchedNetwork:
    """A network after a (possibly non-homogeneous) transform.

    ``row_groups[k]`` lists the new rows fed by original row ``l_min + k``;
    the first one carries the encoded value, the others vacuum padding.
    """

    source: GateNetwork
    nh: NonHomogParams
    gate: object
    row_groups: list
    col_groups: list
    patch_residual: float

    @property
    def n_rows(self) -> int:
        return sum(len(g) for g in self.row_groups)

    @property
    def n_cols(self) -> int:
        return sum(len(g) for g in self.col_groups)

    @property
    def consistent(self) -> bool:
        return self.patch_residual <= TOL

    def patch_shape(self, r: int, l: int) -> tuple[int, int]:
        return self.nh.alpha(r), self.nh.beta(l)


def nonhomog_transform(network: GateNetwork, nh: NonHomogParams, gate=None) -> StretchedNetwork:
    gate = gate or network.gate
    mm = MODEL_MASS_MAP.get(gate.model)
    if mm is None or MASS_MAPS[mm].frame_dependent:
        raise HomogeneityError(
            f"homogeneity condition violated: model {gate.model!r} maps its parameters differently for each "
            "(alpha, beta), so a non-homogeneous transform would put a different gate in each patch; only "
            "models whose parameter map does not depend on (alpha, beta) qualify"
        )
    w = network.window
    alphas = [nh.alpha(r) for r in range(w.r_min, w.r_max + 1)]
    betas = [nh.beta(l) for l in range(w.l_min, w.l_max + 1)]
    col_groups = _groups(alphas)
    row_groups = _groups(betas)
    new_gate = transformed_gate(gate, LorentzParams(1, 1, mm))
    worst = 0.0
    for a in sorted(set(alphas)):
        for b in sorted(set(betas)):
            worst = max(worst, covariance_residual(gate, LorentzParams(a, b, mm)))
    return StretchedNetwork(network, nh, new_gate, row_groups, col_groups, worst)


def lorentz_transform_network(network: GateNetwork, alpha: int, beta: int) -> StretchedNetwork:
    w = network.window
    nh = NonHomogParams(
        {r: alpha for r in range(w.r_min, w.r_max + 1)},
        {l: beta for l in range(w.l_min, w.l_max + 1)},
    )
    return nonhomog_transform(network, nh)


def _groups(sizes):
    out, k = [], 0
    for s in sizes:
        out.append(list(range(k, k + s)))
        k += s
    return out


def _sparse_gate(gate):
    G = gate.lightlike
    d = gate.plus_dim
    table = {}
    for a in range(d):
        for b in range(d):
            col = G[:, a * d + b]
            table[(a, b)] = [(int(k) // d, int(k) % d, col[k]) for k in np.flatnonzero(col)]
    return table


def simulate_network(gate, n_cols: int, n_rows: int, state: dict) -> dict:
    """Run a uniform tensor network cell by cell on a sparse state.

    Keys are basis configurations ``(row legs..., column legs...)``, rows
    bottom to top then columns left to right, as for patches.
    """
    table = _sparse_gate(gate)
    for i in range(n_cols):
        for j in range(n_rows):
            a_leg, b_leg = j, n_rows + i
            new = {}
            for cfg, amp in state.items():
                for a2, b2, g in table[(cfg[a_leg], cfg[b_leg])]:
                    c2 = list(cfg)
                    c2[a_leg], c2[b_leg] = a2, b2
                    c2 = tuple(c2)
                    new[c2] = new.get(c2, 0) + g * amp
            state = new
    return state


def encode_network_state(net: StretchedNetwork, state: dict) -> dict:
    n_rows = len(net.row_groups)
    out = {}
    for cfg, amp in state.items():
        rows = []
        for k, grp in enumerate(net.row_groups):
            rows += [cfg[k]] + [Q] * (len(grp) - 1)
        cols = []
        for k, grp in enumerate(net.col_groups):
            cols += [cfg[n_rows + k]] + [Q] * (len(grp) - 1)
        out[tuple(rows + cols)] = amp
    return out


def decode_network_state(net: StretchedNetwork, state: dict):
    """Strip vacuum padding; returns the decoded state and the weight off the padded subspace."""
    out, leak = {}, 0.0
    firsts = [g[0] for g in net.row_groups] + [net.n_rows + g[0] for g in net.col_groups]
    pads = [x for g in net.row_groups for x in g[1:]] + [net.n_rows + x for g in net.col_groups for x in g[1:]]
    for cfg, amp in state.items():
        if any(cfg[p] != Q for p in pads):
            leak = max(leak, abs(amp))
            continue
        key = tuple(cfg[k] for k in firsts)
        out[key] = out.get(key, 0) + amp
    return out, leak


def network_gluing_check(net: StretchedNetwork, state: dict) -> float:
    """Max amplitude difference between the stretched and the original network on ``state``."""
    src = net.source
    ref = simulate_network(src.gate, src.n_cols, src.n_rows, state)
    big = simulate_network(net.gate, net.n_cols, net.n_rows, encode_network_state(net, state))
    got, leak = decode_network_state(net, big)
    keys = set(ref) | set(got)
    gap = max((abs(ref.get(k, 0) - got.get(k, 0)) for k in keys), default=0.0)
    return float(max(gap, leak))


def observer_rescaling(traj, start=(0, 0)) -> NonHomogParams:
    """Line parameters that bring a piecewise-inertial observer to rest.

    Segment ``k`` moves ``a_k`` steps right then ``b_k`` steps left; with
    ``M_k = lcm(a_k, b_k)`` its r-lines get ``M_k / a_k`` and its l-lines
    ``M_k / b_k``.
    """
    traj = list(traj)
    if not traj:
        raise ValueError("trajectory is empty")
    r, l = start
    alpha, beta = {}, {}
    for a, b in traj:
        if a < 1 or b < 1:
            raise ValueError(f"step counts must be >= 1, got ({a}, {b})")
        M = math.lcm(a, b)
        for k in range(r, r + a):
            alpha[k] = M // a
        for k in range(l, l + b):
            beta[k] = M // b
        r, l = r + a, l + b
    return NonHomogParams(alpha, beta)
