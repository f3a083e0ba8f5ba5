"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are written
straight to the terminal even when output capture is on.
"""
import math

import numpy as np
import pytest

from lorentzlattice.analysis import (
    encoding_uniqueness_search,
    kg_decoupling_residual,
    order_fit,
    second_order_counterexample,
)
from lorentzlattice.lattice import InitialRow, SpacetimeField, Window
from lorentzlattice.lorentz import (
    GateNetwork,
    LorentzParams,
    NonHomogParams,
    covariance_residual,
    lorentz_transform_field,
    network_gluing_check,
    nonhomog_transform,
    observer_rescaling,
    unzoom_field,
)
from lorentzlattice.models import ONE, Q, ZERO, ClockWalkSpec, clock_coin, clock_qca_scattering, dirac_coin, dirac_matrix, qw_evolve
from lorentzlattice.observables import (
    constant_time_surface,
    random_swaps,
    surface_norm,
    transform_surface,
    velocity_addition_check,
)

GRID3 = [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]
SWEEP = [1e-1, 1e-2, 1e-3, 1e-4]


@pytest.fixture
def verdict(capsys, request):
    def emit(ok: bool, detail: str):
        name = request.node.name.removeprefix("test_")
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail

    return emit


def test_criterion_01_clock_walk_exact_covariance(verdict):
    coin = dirac_matrix(1.0, 0.1)
    worst = max(
        covariance_residual(clock_coin(p, q, coin), LorentzParams(a, b, "clock_qw"))
        for a, b in GRID3
        for p in (1, 2)
        for q in (1, 2)
    )
    verdict(worst < 1e-12, f"max residual {worst:.2e} over 36 cases")


def test_criterion_02_clock_qca_exact_covariance(verdict):
    g = clock_qca_scattering(dirac_matrix(1.0, 0.3))
    worst = max(covariance_residual(g, LorentzParams(a, b, "identity")) for a, b in GRID3)
    verdict(worst < 1e-12, f"max residual {worst:.2e}, largest patch 3^6")


def test_criterion_03_dirac_first_order_only(verdict):
    lines, ok = [], True
    for a, b in [(2, 1), (1, 2), (2, 3)]:
        lp = LorentzParams(a, b, "dirac")
        fit = order_fit(lambda e: covariance_residual(dirac_coin(1.0, e), lp), SWEEP)
        smallest = fit.residuals[-1]
        good = fit.slope is not None and abs(fit.slope - 2) <= 0.1 and smallest > 1e-13
        ok &= good
        lines.append(f"({a},{b}) slope {fit.slope:.3f} r(1e-4)={smallest:.1e}")
    verdict(ok, "; ".join(lines))


def test_criterion_04_flat_encoding_unique(verdict):
    lines, ok = [], True
    for a, b in [(2, 1), (3, 2)]:
        res = encoding_uniqueness_search(a, b, m=1.0)
        flat = res.flat.first_order_residual
        good = flat < 1e-10 and res.floor >= 10 * flat and res.floor > 0
        ok &= good
        lines.append(f"({a},{b}) flat {flat:.1e} floor {res.floor:.4f} at d>={res.min_distance}")
    verdict(ok, "; ".join(lines))


def test_criterion_05_second_order_counterexample(verdict):
    sweep = [1e-1, 1e-2, 1e-3, 1e-4]
    gaps = [second_order_counterexample(1.0, e)[2] * e**2 for e in sweep]
    over_eps = [g / e for g, e in zip(gaps, sweep)]
    decreasing = all(x > y for x, y in zip(over_eps, over_eps[1:]))
    ratios = [g / e**2 for g, e in zip(gaps[1:], sweep[1:])]
    spread = (max(ratios) - min(ratios)) / min(ratios)
    massless = second_order_counterexample(0.0, 1e-2)[2]
    ok = decreasing and spread < 0.01 and massless == 0
    verdict(ok, f"gap/eps^2 {ratios[0]:.6f}..{ratios[-1]:.6f} (spread {spread:.1e}), m=0 gap {massless}")


def test_criterion_06_surface_norms(verdict):
    rng = np.random.default_rng(6)
    gate = dirac_coin(1.0, 0.1)
    n_swaps, steps, span = 10, 24, 64 + 2 * 24 + 4
    swap_gap = lorentz_gap = 0.0
    for _ in range(20):
        f = qw_evolve(InitialRow.random(64, 1, rng, r_start=-32), gate, steps)
        base = constant_time_surface(0, -span, span)
        ref = surface_norm(f, base).value
        assert math.isclose(ref, 1.0, rel_tol=1e-12)
        for _ in range(10):
            s = random_swaps(constant_time_surface(steps // 2, -span, span), n_swaps, rng, span=n_swaps)
            swap_gap = max(swap_gap, abs(surface_norm(f, s).value - ref))
        for a, b in GRID3:
            fp = lorentz_transform_field(f, gate, LorentzParams(a, b, "dirac"))
            lorentz_gap = max(lorentz_gap, abs(surface_norm(fp, transform_surface(base, a, b)).value - ref))
    ok = swap_gap < 1e-12 and lorentz_gap < 1e-12
    verdict(ok, f"swap gap {swap_gap:.1e}, transformed gap {lorentz_gap:.1e}")


def test_criterion_07_velocity_addition(verdict):
    worst = 0.0
    for v in np.linspace(-0.9, 0.9, 37):
        for a, b in GRID3:
            got, want = velocity_addition_check(float(v), a, b)
            worst = max(worst, abs(got - want))
    verdict(worst < 1e-12, f"max gap {worst:.1e} on 37 x 9 points")


def test_criterion_08_klein_gordon(verdict):
    rng = np.random.default_rng(8)
    coin = dirac_matrix(1.0, 0.1)
    stencil = 0.0
    for p in (1, 2, 3):
        for q in (1, 2, 3):
            f = qw_evolve(InitialRow.random(4, (p, q), rng), clock_coin(p, q, coin), 200)
            stencil = max(stencil, kg_decoupling_residual(f, ClockWalkSpec(p, q, coin)))
    m = 1.0
    literal = order_fit(lambda e: abs(dirac_matrix(m, e)[0, 0] - 1 - e**2 * m**2 / 2), SWEEP)
    coefficient_ok = literal.slope is not None and abs(literal.slope - 4) <= 0.2
    w = f.window
    noise = SpacetimeField(
        w,
        rng.normal(size=f.plus.shape) + 1j * rng.normal(size=f.plus.shape),
        rng.normal(size=f.minus.shape) + 1j * rng.normal(size=f.minus.shape),
        0.1,
        {"t0": w.t_range[0], "t1": w.t_range[1]},
    )
    control = kg_decoupling_residual(noise, ClockWalkSpec(3, 3, coin))
    ok = stencil < 1e-10 and coefficient_ok and control > 1e-3
    verdict(
        ok,
        f"stencil {stencil:.1e}; a-1-eps^2 m^2/2 slope {literal.slope:.3f} (need 4+-0.2); control {control:.2f}",
    )


def test_criterion_09_nonhomogeneous_stretch(verdict):
    rng = np.random.default_rng(9)
    window = Window(0, -2, 3, 4)
    nh = NonHomogParams({}, {l: 2 for l in range(0, 2)})
    net = nonhomog_transform(GateNetwork(window, clock_qca_scattering(dirac_matrix(1.0, 0.4))), nh)
    n_legs = window.n_r + window.n_l
    gap = net.patch_residual
    for _ in range(5):
        state = {}
        for _ in range(3):
            cfg = list(rng.choice([Q, ZERO], size=n_legs))
            for k in rng.choice(n_legs, size=2, replace=False):
                cfg[k] = ONE
            state[tuple(int(x) for x in cfg)] = complex(rng.normal(), rng.normal())
        gap = max(gap, network_gluing_check(net, state))

    traj = [(1, 1), (2, 1)]
    obs = observer_rescaling(traj, start=(0, -1))
    reproduces = obs.beta(-1) == 1 and obs.beta(0) == 2 and all(obs.alpha(r) == 1 for r in range(0, 3))
    reproduces &= all(obs.beta(l) == nh.beta(l) and obs.alpha(r) == nh.alpha(r) for l in (-1, 0) for r in range(3))
    r, l = 0, -1
    balanced = True
    for a, b in traj:
        right = sum(obs.alpha(k) for k in range(r, r + a))
        left = sum(obs.beta(k) for k in range(l, l + b))
        balanced &= right == left
        r, l = r + a, l + b
    ok = gap < 1e-12 and reproduces and balanced
    verdict(ok, f"gluing gap {gap:.1e}; parameters reproduced {reproduces}; balanced steps {balanced}")


def test_criterion_10_round_trip(verdict):
    rng = np.random.default_rng(10)
    worst = 0.0
    cases = [(dirac_coin(1.0, 0.1), 1, "dirac"), (clock_coin(2, 1, dirac_matrix(1.0, 0.1)), (2, 1), "clock_qw")]
    for gate, dims, mass_map in cases:
        f = qw_evolve(InitialRow.random(5, dims, rng), gate, 8)
        for a, b in GRID3:
            lp = LorentzParams(a, b, mass_map)
            back = unzoom_field(lorentz_transform_field(f, gate, lp), lp)
            assert back.window == f.window
            worst = max(worst, np.abs(back.plus - f.plus).max(), np.abs(back.minus - f.minus).max())
    verdict(worst < 1e-12, f"max deviation {worst:.1e}")
