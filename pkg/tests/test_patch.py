import itertools
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzlattice.lattice import is_unitary
from lorentzlattice.models import ONE, ZERO, clock_coin, clock_qca_scattering, dirac_coin, fd_dirac_coin
from lorentzlattice.patch import build_patch, patch_interior, tensor_patch_apply

from conftest import random_unitary


def naive_patch(gate, alpha, beta, inputs):
    """Wire-by-wire evaluation with explicit row/column registers."""
    dp = gate.plus_dim
    rows = [inputs[j * dp : (j + 1) * dp] for j in range(beta)]
    off = beta * dp
    dm = gate.minus_dim
    cols = [inputs[off + i * dm : off + (i + 1) * dm] for i in range(alpha)]
    inner = {}
    for i in range(alpha):
        for j in range(beta):
            inner[i, j] = np.concatenate([rows[j], cols[i]])
            out = gate.matrix @ inner[i, j]
            rows[j], cols[i] = out[:dp], out[dp:]
    return np.concatenate(rows + cols), inner


@pytest.mark.parametrize("alpha,beta", [(1, 1), (2, 1), (1, 3), (3, 2)])
def test_direct_sum_patch_matches_naive(alpha, beta, rng):
    gate = clock_coin(2, 1, random_unitary(rng))
    patch = build_patch(gate, alpha, beta)
    x = rng.normal(size=patch.input_dim) + 1j * rng.normal(size=patch.input_dim)
    out, inner = naive_patch(gate, alpha, beta, x)
    assert np.allclose(patch.boundary @ x, out)
    maps = patch.interior_maps()
    for (i, j), val in inner.items():
        assert np.allclose(patch_interior(patch, i, j, x), val)
        assert np.allclose(maps[i, j] @ x, val)


def test_single_cell_patch_is_the_gate():
    g = dirac_coin(0.3, 0.1)
    assert np.allclose(build_patch(g, 1, 1).boundary, g.matrix)


def test_massless_patch_passes_wires_straight_through():
    p = build_patch(dirac_coin(0.0, 0.1), 3, 2)
    assert np.allclose(p.boundary, np.eye(5))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_boundary_unitary_and_arity(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    g = clock_coin(1, 2, random_unitary(rng))
    p = build_patch(g, alpha, beta)
    assert p.input_dim == beta * 1 + alpha * 2
    assert is_unitary(p.boundary)
    assert p.boundary_plus.shape[0] == beta and p.boundary_minus.shape[0] == 2 * alpha


def test_non_unitary_gate_allowed_when_flagged():
    p = build_patch(fd_dirac_coin(1.0, 0.1), 2, 2)
    assert not is_unitary(p.boundary)


def test_patch_argument_validation():
    with pytest.raises(ValueError):
        build_patch(dirac_coin(1, 0.1), 0, 1)
    with pytest.raises(ValueError, match="wire dimension"):
        build_patch(dirac_coin(1, 0.1), 1, 1, wire_dim=2)
    with pytest.raises(IndexError):
        build_patch(dirac_coin(1, 0.1), 2, 2).interior(2, 0)
    with pytest.raises(ValueError):
        patch_interior(build_patch(dirac_coin(1, 0.1), 2, 2), 0, 0, np.ones(3))


def embed(G, legs, n):
    """Dense ``G`` acting on legs ``(a, b)`` of ``n`` three-level legs, by explicit index loops."""
    a, b = legs
    N = 3**n
    M = np.zeros((N, N), dtype=complex)
    for src in itertools.product(range(3), repeat=n):
        col = int(np.ravel_multi_index(src, (3,) * n))
        for xa in range(3):
            for xb in range(3):
                amp = G[xa * 3 + xb, src[a] * 3 + src[b]]
                if amp:
                    dst = list(src)
                    dst[a], dst[b] = xa, xb
                    M[int(np.ravel_multi_index(dst, (3,) * n)), col] += amp
    return M


@pytest.mark.parametrize("alpha,beta", [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_tensor_patch_matches_dense_product(alpha, beta, rng):
    g = clock_qca_scattering(random_unitary(rng))
    n = alpha + beta
    cells = [embed(g.lightlike, (j, beta + i), n) for i in range(alpha) for j in range(beta)]
    want = reduce(lambda acc, c: c @ acc, cells, np.eye(3**n))
    p = build_patch(g, alpha, beta)
    assert np.allclose(p.boundary, want)
    assert p.input_dim == 3**n
    v = rng.normal(size=(3**n, 2))
    assert np.allclose(tensor_patch_apply(g, alpha, beta, v), want @ v)
    with pytest.raises(TypeError):
        p.boundary_plus


def test_qca_one_particle_sector_acts_as_transposed_coin(rng):
    C = random_unitary(rng)
    G = clock_qca_scattering(C).lightlike
    # particle on the right-moving wire, interacting vacuum on the other
    plus_in = np.zeros(9)
    plus_in[ONE * 3 + ZERO] = 1
    out = G @ plus_in
    assert np.isclose(out[ONE * 3 + ZERO], C[0, 0])
    assert np.isclose(out[ZERO * 3 + ONE], C[0, 1])
