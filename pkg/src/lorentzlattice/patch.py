"""The alpha x beta lightlike rectangle circuit built from one gate.

Wire ordering, used everywhere a patch is touched: the input (and the
boundary output) lists the ``beta`` row wires ``psi_plus(r, l + j)`` for
``j = 0 .. beta-1`` first, then the ``alpha`` column wires
``psi_minus(r + i, l)`` for ``i = 0 .. alpha-1``, each bottom to top.
Row ``j`` carries the right-movers through cells ``(0, j) .. (alpha-1, j)``
and leaves as ``psi_plus(r + alpha, l + j)``; column ``i`` carries the
left-movers and leaves as ``psi_minus(r + i, l + beta)``.

QW patches combine wires with a direct sum, QCA patches with a tensor
product.  In the tensor case every wire is one tensor leg, in the same
order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import is_unitary


@dataclass(frozen=True, eq=False)
class PatchOperator:
    alpha: int
    beta: int
    gate: object
    boundary: np.ndarray

    @property
    def combination(self) -> str:
        return self.gate.kind

    @property
    def plus_dim(self) -> int:
        return self.gate.plus_dim

    @property
    def minus_dim(self) -> int:
        return self.gate.minus_dim

    @property
    def input_dim(self) -> int:
        if self.combination == "tensor":
            return self.gate.plus_dim ** (self.alpha + self.beta)
        return self.beta * self.plus_dim + self.alpha * self.minus_dim

    @property
    def boundary_plus(self) -> np.ndarray:
        """Rows of the boundary map giving the right-outgoing wires (direct sum only)."""
        self._require_direct_sum()
        return self.boundary[: self.beta * self.plus_dim]

    @property
    def boundary_minus(self) -> np.ndarray:
        self._require_direct_sum()
        return self.boundary[self.beta * self.plus_dim :]

    def _require_direct_sum(self):
        if self.combination != "direct_sum":
            raise TypeError("the boundary of a tensor patch does not split into +/- blocks")

    def slots(self, i: int, j: int) -> np.ndarray:
        """Vector indices of row ``j`` and column ``i`` (direct sum)."""
        dp, dm = self.plus_dim, self.minus_dim
        row = np.arange(j * dp, (j + 1) * dp)
        col = self.beta * dp + np.arange(i * dm, (i + 1) * dm)
        return np.concatenate([row, col])

    def interior(self, i: int, j: int) -> np.ndarray:
        """The map from patch inputs to ``psi(r + i, l + j)``.

        Recomputed on every call.  For a tensor patch this is the whole
        register just before cell ``(i, j)`` fires; the point's two wires
        are legs ``j`` and ``beta + i``.
        """
        if not (0 <= i < self.alpha and 0 <= j < self.beta):
            raise IndexError(f"cell ({i}, {j}) outside the {self.alpha} x {self.beta} patch")
        op = _run_cells(self.gate, self.alpha, self.beta, stop=(i, j))
        if self.combination == "tensor":
            return op
        return op[self.slots(i, j)]

    def interior_maps(self) -> np.ndarray:
        """All direct-sum interior maps at once, shape ``(alpha, beta, dp + dm, input_dim)``."""
        self._require_direct_sum()
        return _all_interiors(self.gate, self.alpha, self.beta)


def build_patch(gate, alpha: int, beta: int, wire_dim=None) -> PatchOperator:
    if alpha < 1 or beta < 1:
        raise ValueError(f"alpha and beta must be >= 1, got {alpha}, {beta}")
    if wire_dim is not None and wire_dim != gate.wire_dim:
        raise ValueError(f"gate has wire dimension {gate.wire_dim}, expected {wire_dim}")
    if gate.kind == "tensor" and gate.plus_dim != gate.minus_dim:
        raise ValueError("tensor patches need equal wire dimensions")
    if getattr(gate, "unitary", True) and not is_unitary(gate.lightlike):
        raise ValueError("gate is flagged unitary but is not")
    return PatchOperator(alpha, beta, gate, _run_cells(gate, alpha, beta))


def patch_interior(p: PatchOperator, i: int, j: int, inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=complex)
    if inputs.shape[0] != p.input_dim:
        raise ValueError(f"patch expects {p.input_dim} input components, got {inputs.shape[0]}")
    return p.interior(i, j) @ inputs


def _cells(alpha, beta):
    for i in range(alpha):
        for j in range(beta):
            yield i, j


def _run_cells(gate, alpha, beta, stop=None):
    if gate.kind == "tensor":
        return _run_tensor(gate, alpha, beta, stop)
    dp, dm = gate.plus_dim, gate.minus_dim
    n = beta * dp + alpha * dm
    M = np.eye(n, dtype=complex)
    G = gate.lightlike
    for i, j in _cells(alpha, beta):
        if (i, j) == stop:
            break
        idx = np.concatenate([np.arange(j * dp, (j + 1) * dp), beta * dp + np.arange(i * dm, (i + 1) * dm)])
        M[idx] = G @ M[idx]
    return M


def _all_interiors(gate, alpha, beta):
    dp, dm = gate.plus_dim, gate.minus_dim
    n = beta * dp + alpha * dm
    M = np.eye(n, dtype=complex)
    G = gate.lightlike
    out = np.empty((alpha, beta, dp + dm, n), dtype=complex)
    for i, j in _cells(alpha, beta):
        idx = np.concatenate([np.arange(j * dp, (j + 1) * dp), beta * dp + np.arange(i * dm, (i + 1) * dm)])
        out[i, j] = M[idx]
        M[idx] = G @ M[idx]
    return out


def apply_gate_on_legs(G4: np.ndarray, psi: np.ndarray, a: int, b: int) -> np.ndarray:
    """Contract a two-leg gate (shape ``(d, d, d, d)``, out-out-in-in) into legs ``a, b``."""
    psi = np.tensordot(G4, psi, axes=([2, 3], [a, b]))
    return np.moveaxis(psi, [0, 1], [a, b])


def _run_tensor(gate, alpha, beta, stop=None, columns=None):
    d = gate.plus_dim
    n = alpha + beta
    N = d**n
    G4 = gate.lightlike.reshape(d, d, d, d)
    op = (np.eye(N, dtype=complex) if columns is None else columns).reshape((d,) * n + (-1,))
    for i, j in _cells(alpha, beta):
        if (i, j) == stop:
            break
        op = apply_gate_on_legs(G4, op, j, beta + i)
    return op.reshape(N, -1)


def tensor_patch_apply(gate, alpha: int, beta: int, vectors: np.ndarray) -> np.ndarray:
    """``U_bar @ vectors`` without forming ``U_bar``."""
    return _run_tensor(gate, alpha, beta, columns=np.asarray(vectors, dtype=complex))
