import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentzlattice.lattice import InitialRow, LightCoord, SpacetimeField, Window
from lorentzlattice.lorentz import LorentzParams, lorentz_transform_field
from lorentzlattice.models import clock_coin, dirac_coin, qw_evolve
from lorentzlattice.observables import (
    CauchySurface,
    SurfaceError,
    ZeroDensityError,
    constant_time_surface,
    crossings,
    local_velocity,
    mean_velocity,
    mean_velocity_forms,
    random_swaps,
    surface_norm,
    swap_move,
    transform_surface,
    velocity_addition_check,
)

from conftest import random_unitary


def random_dirac_solution(rng, sites=8, steps=12, m=1.0, eps=0.1):
    row = InitialRow.random(sites, 1, rng, r_start=-(sites // 2))
    return qw_evolve(row, dirac_coin(m, eps), steps)


def test_constant_time_surface_crosses_one_layer():
    for t in range(-3, 4):
        s = constant_time_surface(t, -6, 6)
        for c in crossings(s, -6, 6):
            assert sum(c.point) == t


def test_delta_has_unit_norm():
    f = qw_evolve(InitialRow.delta([1.0], [0.0]), dirac_coin(1.0, 0.1), 6)
    for t in range(7):
        assert math.isclose(surface_norm(f, constant_time_surface(t, -10, 10)).value, 1.0, rel_tol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_constant_time_norm_is_layer_sum(seed):
    f = random_dirac_solution(np.random.default_rng(seed))
    for t in (0, 5, 12):
        assert math.isclose(surface_norm(f, constant_time_surface(t, -30, 30)).value, f.layer_norm(t), rel_tol=1e-12)


def test_swap_is_an_involution_and_moves_origin():
    s = constant_time_surface(0, -4, 4)
    for n in range(-4, 3):
        assert swap_move(swap_move(s, n), n) == s
    moved = swap_move(s, -1)  # R L -> L R at steps -1, 0
    assert moved.origin == LightCoord(1, 1)  # pushed one step to the future
    assert moved.vertex(1) == s.vertex(1)
    assert moved.vertex(-1) == s.vertex(-1)
    with pytest.raises(SurfaceError, match="RL or LR"):
        swap_move(CauchySurface(labels="LL"), 0)


def test_swap_changes_only_one_vertex():
    s = constant_time_surface(2, -6, 6)
    t = swap_move(s, 3)
    assert [s.vertex(n) for n in range(-5, 8) if n != 4] == [t.vertex(n) for n in range(-5, 8) if n != 4]


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_norm_invariant_under_swaps(seed, n_swaps):
    rng = np.random.default_rng(seed)
    f = random_dirac_solution(rng, steps=2 * n_swaps + 4)
    ref = surface_norm(f, constant_time_surface(0, -40, 40)).value
    s = random_swaps(constant_time_surface(n_swaps + 2, -40, 40), n_swaps, rng, span=n_swaps)
    assert abs(surface_norm(f, s).value - ref) < 1e-12


def test_surface_beyond_evolved_layers_is_rejected(rng):
    f = random_dirac_solution(rng, steps=4)
    with pytest.raises(SurfaceError, match="evolved"):
        surface_norm(f, constant_time_surface(6, -20, 20))


def test_support_outside_explicit_window_is_rejected(rng):
    f = random_dirac_solution(rng, steps=4)
    with pytest.raises(SurfaceError, match="beyond the surface window"):
        surface_norm(f, constant_time_surface(2, -1, 1))


def test_transform_surface_example():
    s = CauchySurface(window_start=-1, labels="RL")
    out = transform_surface(s, 3, 2)
    assert out.window_start == -2 and out.labels == "RRLLL"
    assert "".join(out[n] for n in range(-2, 3)) == "RRLLL"


def test_transform_of_alternating_surface():
    out = transform_surface(constant_time_surface(0), 2, 1)
    assert "".join(out[n] for n in range(-6, 6)) == "LLR" * 4


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_transform_surface_crosses_image_wires(a, b, n_swaps, seed):
    rng = np.random.default_rng(seed)
    s = random_swaps(constant_time_surface(0, -8, 8), n_swaps, rng, span=6)
    img = transform_surface(s, a, b)
    # each step maps to a run of steps, and vertices scale
    for n in range(-4, 5):
        r, l = s.vertex(n)
        assert img.vertex(sum_steps(s, n, a, b)) == (a * r, b * l)


def sum_steps(s, n, a, b):
    w = lambda c: a if c == "L" else b
    if n >= 0:
        return sum(w(s[k]) for k in range(n))
    return -sum(w(s[k]) for k in range(n, 0))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_transformed_norm_matches(a, b, seed):
    rng = np.random.default_rng(seed)
    g = dirac_coin(0.8, 0.1)
    f = random_dirac_solution(rng, sites=6, steps=8, m=0.8)
    ref = surface_norm(f, constant_time_surface(0, -30, 30)).value
    fp = lorentz_transform_field(f, g, LorentzParams(a, b, "dirac"))
    s = random_swaps(constant_time_surface(4, -30, 30), 3, rng, span=3)
    assert abs(surface_norm(fp, transform_surface(s, a, b)).value - ref) < 1e-12


def test_clock_walk_norm_is_conserved(rng):
    g = clock_coin(2, 1, random_unitary(rng))
    f = qw_evolve(InitialRow.random(4, (2, 1), rng), g, 10)
    ref = f.layer_norm(0)
    s = random_swaps(constant_time_surface(5, -30, 30), 4, rng, span=4)
    assert abs(surface_norm(f, s).value - ref) < 1e-12


def test_surface_json_round_trip():
    s = transform_surface(CauchySurface(LightCoord(2, -1), -1, "RL"), 3, 2)
    assert CauchySurface.from_dict(s.to_dict()) == s
    import json

    assert CauchySurface.from_dict(json.loads(s.to_json())) == s
    assert constant_time_surface().to_dict() == {"origin": [0, 0], "window_start": 0, "labels": ""}


def test_bad_labels_rejected():
    with pytest.raises(SurfaceError):
        CauchySurface(labels="RX")
    with pytest.raises(SurfaceError):
        CauchySurface(tail="RR")


def point_field(plus, minus):
    w = Window(0, 0, 1, 1)
    return SpacetimeField(w, np.array([[[plus]]], dtype=complex), np.array([[[minus]]], dtype=complex), 0.1)


def test_local_velocity_examples():
    assert math.isclose(local_velocity(point_field(math.sqrt(3) / 2, 0.5), (0, 0)), 0.5)
    assert local_velocity(point_field(1, 0), (0, 0)) == 1
    assert local_velocity(point_field(0, 1j), (0, 0)) == -1
    with pytest.raises(ZeroDensityError):
        local_velocity(point_field(0, 0), (0, 0))


def test_velocity_addition_examples():
    got, want = velocity_addition_check(0.0, 3, 1)
    assert math.isclose(got, 0.5) and math.isclose(want, 0.5)
    got, want = velocity_addition_check(0.5, 3, 1)
    assert math.isclose(got, 0.8) and math.isclose(want, 0.8)


@given(st.floats(-0.999, 0.999), st.integers(1, 6), st.integers(1, 6))
def test_velocity_addition(v, a, b):
    got, want = velocity_addition_check(v, a, b)
    assert abs(got - want) < 1e-12


def test_zitterbewegung_first_layer():
    m, eps = 1.3, 0.1
    f = qw_evolve(InitialRow.delta([1.0], [0.0]), dirac_coin(m, eps), 3)
    assert mean_velocity(f, 0) == 1
    assert math.isclose(mean_velocity(f, 1), math.cos(2 * m * eps), rel_tol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_mean_velocity_forms_agree(seed):
    f = random_dirac_solution(np.random.default_rng(seed))
    for t in range(0, 12, 3):
        a, b = mean_velocity_forms(f, t)
        assert abs(a - b) < 1e-12 and -1 <= a <= 1
