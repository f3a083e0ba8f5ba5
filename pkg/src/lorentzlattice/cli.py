"""Command-line front end: simulate, transform, verify, analyze.

Exit codes: 0 success, 1 a requested check failed (its report is still
written), 2 bad configuration, 3 numerical failure (norm drift).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    encoding_uniqueness_search,
    fit_report,
    kg_decoupling_residual,
    kg_mass_check,
    make_report,
    order_fit,
    parallel_map,
    second_order_counterexample,
    write_report,
)
from .lattice import InitialRow, SpacetimeField, Window
from .lorentz import (
    GateNetwork,
    HomogeneityError,
    LorentzParams,
    NonHomogParams,
    covariance_residual,
    encodings_for_gate,
    gluing_mismatch,
    lorentz_transform_field,
    network_gluing_check,
    nonhomog_transform,
)
from .models import ALL_MODELS, ClockWalkSpec, QCAState, build_gate, gate_from_descriptor, qca_step, qw_evolve
from .observables import (
    constant_time_surface,
    mean_velocity,
    random_swaps,
    surface_norm,
    transform_surface,
    velocity_addition_check,
)

log = logging.getLogger("lorentzlattice")

NORM_DRIFT_TOL = 1e-9
CHECK_TOL = 1e-12
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_SWEEP = (1e-1, 1e-2, 1e-3, 1e-4)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: str = "dirac"
    m: float = 0.0
    eps: float = 0.1
    p: int = 1
    q: int = 1
    alpha: int = 1
    beta: int = 1
    steps: int = 10
    seed: int | None = None
    sites: int = 8
    init: str = "delta_plus"
    out: str = "out"
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.model not in ALL_MODELS:
            raise ConfigError(f"--model: unknown model {self.model!r}; choose from {', '.join(ALL_MODELS)}")
        if not self.eps > 0:
            raise ConfigError(f"--eps must be positive, got {self.eps}")
        if not math.isfinite(self.m):
            raise ConfigError(f"--m must be finite, got {self.m}")
        for name in ("p", "q", "alpha", "beta", "sites"):
            if getattr(self, name) < 1:
                raise ConfigError(f"--{name} must be >= 1, got {getattr(self, name)}")
        if self.steps < 0:
            raise ConfigError(f"--steps must be >= 0, got {self.steps}")

    def model_params(self) -> dict:
        params = {"m": self.m, "eps": self.eps}
        if self.model == "clock_qw":
            params.update(p=self.p, q=self.q)
        return params

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(0 if self.seed is None else self.seed)


def _config(args, command: str) -> RunConfig:
    keys = RunConfig.__dataclass_fields__
    vals = {k: getattr(args, k) for k in keys if k not in ("command", "extra") and getattr(args, k, None) is not None}
    cfg = RunConfig(command=command, **vals)
    cfg.validate()
    return cfg


def _provenance(cfg: RunConfig, **extra) -> dict:
    prov = {
        "tool": "lorentzlattice",
        "version": __version__,
        "command": cfg.command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    prov.update(extra)
    return prov


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh)


def _out_paths(out: str) -> tuple[Path, Path]:
    base = Path(out)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    return base.with_suffix(".json"), base.with_suffix(".csv")


# -- simulate -------------------------------------------------------------


def initial_row(cfg: RunConfig, gate) -> InitialRow:
    dp, dm = gate.plus_dim, gate.minus_dim
    if cfg.init == "random":
        return InitialRow.random(cfg.sites, (dp, dm), cfg.rng(), t=0, r_start=-(cfg.sites // 2))
    plus, minus = np.zeros((1, dp)), np.zeros((1, dm))
    if cfg.init == "delta_plus":
        plus[0, 0] = 1
    elif cfg.init == "delta_minus":
        minus[0, 0] = 1
    else:
        raise ConfigError(f"--init: unknown initial state {cfg.init!r}")
    return InitialRow(0, 0, plus, minus)


def cmd_simulate(cfg: RunConfig) -> int:
    json_path, csv_path = _out_paths(cfg.out)
    gate = build_gate(cfg.model, cfg.model_params())
    if cfg.model == "clock_qca":
        return _simulate_qca(cfg, gate, json_path, csv_path)
    f = qw_evolve(initial_row(cfg, gate), gate, cfg.steps)
    norms = [f.layer_norm(t) for t in range(0, cfg.steps + 1)]
    payload = f.to_dict()
    payload["provenance"] = _provenance(cfg, seed=cfg.seed, init=cfg.init)
    _write_json(json_path, payload)
    f.save_csv(csv_path)
    drift = max(abs(n - norms[0]) for n in norms)
    if gate.unitary and drift > NORM_DRIFT_TOL:
        log.error("layer norm drifted by %.3e (tolerance %.0e)", drift, NORM_DRIFT_TOL)
        return EXIT_NUMERIC
    return EXIT_OK


def _simulate_qca(cfg: RunConfig, gate, json_path: Path, csv_path: Path) -> int:
    n = cfg.sites + cfg.sites % 2
    if cfg.init == "random":
        state = QCAState.random(n, cfg.rng())
    elif cfg.init in ("delta_plus", "delta_minus"):
        labels = ["0"] * n
        labels[n // 2 - (cfg.init == "delta_minus")] = "1"
        state = QCAState.from_config("".join(labels))
    else:
        if len(cfg.init) != n or set(cfg.init) - set("q01"):
            raise ConfigError(f"--init: expected delta_plus, delta_minus, random or a {n}-letter q/0/1 string")
        state = QCAState.from_config(cfg.init)
    occ, norms = [state.occupation().tolist()], [state.norm()]
    for _ in range(cfg.steps):
        state = qca_step(state, gate)
        occ.append(state.occupation().tolist())
        norms.append(state.norm())
    desc = gate.descriptor()
    desc.pop("model")
    payload = {
        "meta": {"model": "clock_qca", "params": desc, "n_wires": n, "steps": cfg.steps},
        "occupations": occ,
        "norms": norms,
        "provenance": _provenance(cfg, seed=cfg.seed, init=cfg.init),
    }
    _write_json(json_path, payload)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "wire", "occupation", "norm"])
        for t, row in enumerate(occ):
            for k, val in enumerate(row):
                w.writerow([t, k, repr(val), repr(norms[t])])
    if max(abs(x - norms[0]) for x in norms) > NORM_DRIFT_TOL:
        return EXIT_NUMERIC
    return EXIT_OK


# -- transform ------------------------------------------------------------


def cmd_transform(cfg: RunConfig) -> int:
    json_path, csv_path = _out_paths(cfg.out)
    nh_path = cfg.extra.get("nonhomog")
    src = cfg.extra.get("input")
    if nh_path:
        return _transform_nonhomog(cfg, Path(nh_path), src, json_path)
    if not src:
        raise ConfigError("--in: a field file is required for a homogeneous transform")
    f = _load_field(src)
    gate = gate_from_descriptor({"model": f.meta.get("model"), **f.meta.get("params", {})})
    params = LorentzParams.for_model(gate.model, cfg.alpha, cfg.beta)
    enc = encodings_for_gate(gate, cfg.alpha, cfg.beta)
    fp = lorentz_transform_field(f, gate, params, enc)
    mismatch = gluing_mismatch(f, gate, params, enc)
    payload = fp.to_dict()
    payload["provenance"] = _provenance(
        cfg,
        source=str(src),
        transform={"alpha": cfg.alpha, "beta": cfg.beta, "encoding": enc[0].kind},
        mass_map=params.mass_map,
        gluing_mismatch=mismatch,
    )
    _write_json(json_path, payload)
    fp.save_csv(csv_path)
    if mismatch > CHECK_TOL:
        print(f"gluing check failed: max mismatch {mismatch:.3e} between adjacent patches", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _load_field(path) -> SpacetimeField:
    try:
        return SpacetimeField.load_json(path)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"--in: cannot read field file {path}: {exc}") from exc


def _transform_nonhomog(cfg: RunConfig, nh_path: Path, src, json_path: Path) -> int:
    try:
        nh = NonHomogParams.from_dict(json.loads(nh_path.read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"--nonhomog: cannot read parameter file {nh_path}: {exc}") from exc
    if src:
        f = _load_field(src)
        model, params = f.meta.get("model"), f.meta.get("params", {})
        window = f.window
    else:
        model, params = cfg.model, cfg.model_params()
        n = cfg.sites
        window = Window(0, 0, n, n)
    gate = gate_from_descriptor({"model": model, **params})
    try:
        net = nonhomog_transform(GateNetwork(window, gate), nh)
    except HomogeneityError as exc:
        print(f"non-homogeneous transform rejected: {exc}", file=sys.stderr)
        return EXIT_CHECK
    rng = cfg.rng()
    n_legs = net.source.n_rows + net.source.n_cols
    worst = net.patch_residual
    for _ in range(4):
        cfgs = [tuple(int(x) for x in rng.integers(0, 3, size=n_legs)) for _ in range(3)]
        amps = rng.normal(size=3) + 1j * rng.normal(size=3)
        worst = max(worst, network_gluing_check(net, dict(zip(cfgs, amps / np.linalg.norm(amps)))))
    payload = {
        "model": model,
        "params": params,
        "source_window": asdict(window),
        "row_groups": net.row_groups,
        "col_groups": net.col_groups,
        "gluing_mismatch": worst,
        "provenance": _provenance(cfg, source=str(src) if src else None, transform=nh.to_dict(), mass_map="identity"),
    }
    _write_json(json_path, payload)
    if worst > CHECK_TOL:
        print(f"gluing check failed: max mismatch {worst:.3e}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# -- verify ---------------------------------------------------------------


def cmd_verify(cfg: RunConfig) -> int:
    check = cfg.extra["check"]
    json_path, _ = _out_paths(cfg.out)
    if check == "covariance":
        report = verify_covariance(cfg)
    elif check == "norm":
        report = verify_norm(cfg)
    else:
        raise ConfigError(f"unknown check {check!r}")
    write_report(report, json_path)
    print(json.dumps({k: report[k] for k in ("check", "status", "slope", "r2")}))
    return EXIT_OK if report["status"] in ("exact", "pass") or report["status"].startswith("order_") else EXIT_CHECK


def verify_covariance(cfg: RunConfig) -> dict:
    base = cfg.model_params()
    lp = LorentzParams.for_model(cfg.model, cfg.alpha, cfg.beta)
    details = {"model": cfg.model, "alpha": cfg.alpha, "beta": cfg.beta, "mass_map": lp.mass_map}
    if cfg.extra.get("sweep_eps"):
        eps_values = cfg.extra.get("eps_values") or DEFAULT_SWEEP

        def residual(e):
            return covariance_residual(build_gate(cfg.model, {**base, "eps": e}), lp)

        return fit_report("covariance", order_fit(residual, eps_values), details)
    res = covariance_residual(build_gate(cfg.model, base), lp)
    details["residual"] = res
    return make_report("covariance", "exact" if res <= CHECK_TOL else "fail", details=details)


def verify_norm(cfg: RunConfig) -> dict:
    """Random Dirac solutions: the t=0 norm against swap-deformed surfaces
    (and, if alpha or beta > 1, the transformed surface on the transformed field)."""
    n_surf, n_swaps = cfg.extra.get("surfaces", 10), cfg.extra.get("swaps", 20)
    rng = cfg.rng()
    gate = build_gate("dirac", {"m": cfg.m, "eps": cfg.eps})
    steps = max(cfg.steps, 2 * n_swaps + 4)
    f = qw_evolve(InitialRow.random(cfg.sites, 1, rng, t=0, r_start=-(cfg.sites // 2)), gate, steps)
    span = cfg.sites + 2 * steps + 4
    base = constant_time_surface(0, -span, span)
    ref = surface_norm(f, base).value
    t_mid = steps // 2
    seeds = rng.integers(0, 2**31, size=n_surf)

    def one(seed):
        s = random_swaps(constant_time_surface(t_mid, -span, span), n_swaps, np.random.default_rng(seed), span=n_swaps)
        return abs(surface_norm(f, s).value - ref)

    gaps = parallel_map(one, seeds)
    details = {"reference_norm": ref, "surfaces": n_surf, "swaps": n_swaps, "max_gap": max(gaps)}
    if cfg.alpha > 1 or cfg.beta > 1:
        lp = LorentzParams.for_model("dirac", cfg.alpha, cfg.beta)
        fp = lorentz_transform_field(f, gate, lp)
        gap = abs(surface_norm(fp, transform_surface(base, cfg.alpha, cfg.beta)).value - ref)
        details["lorentz_gap"] = gap
        gaps.append(gap)
    return make_report("norm", "pass" if max(gaps) <= CHECK_TOL else "fail", details=details)


# -- analyze --------------------------------------------------------------


def cmd_analyze(cfg: RunConfig) -> int:
    what = cfg.extra["analysis"]
    json_path, csv_path = _out_paths(cfg.out)
    rows = None
    if what == "uniqueness":
        m = cfg.m if cfg.m > 0 else 1.0
        res = encoding_uniqueness_search(cfg.alpha, cfg.beta, m, cfg.eps, seed=cfg.seed or 0)
        ok = res.flat.first_order_residual < 1e-10 and res.floor > 0
        report = make_report(
            "encoding_uniqueness",
            "pass" if ok else "fail",
            details={
                "flat_residual": res.flat.first_order_residual,
                "floor": res.floor,
                "floor_distance": res.floor_candidate.distance,
                "best_residual": res.best.first_order_residual,
                "best_distance": res.best.distance,
                "n_tested": res.n_tested,
                "converged": res.converged,
            },
        )
    elif what == "counterexample":
        m = cfg.m if cfg.m > 0 else 1.0
        rows = []
        for e in DEFAULT_SWEEP:
            lhs, rhs, g2 = second_order_counterexample(m, e)
            rows.append({"eps": e, "lhs": lhs.real, "rhs": rhs.real, "gap_over_eps": g2 * e, "gap_over_eps2": g2})
        fit = order_fit([r["gap_over_eps2"] * r["eps"] ** 2 for r in rows], DEFAULT_SWEEP)
        report = fit_report("second_order_counterexample", fit, {"m": m, "rows": rows})
    elif what == "kg":
        gate = build_gate("clock_qw", {**cfg.model_params(), "p": cfg.p, "q": cfg.q})
        spec = ClockWalkSpec(cfg.p, cfg.q, gate.params["coin"])
        f = qw_evolve(InitialRow.random(cfg.sites, (cfg.p, cfg.q), cfg.rng()), gate, cfg.steps)
        res = kg_decoupling_residual(f, spec)
        mass = kg_mass_check(cfg.p, cfg.q, cfg.m) if cfg.m > 0 else None
        details = {"p": cfg.p, "q": cfg.q, "stencil_residual": res}
        if mass:
            details.update(predicted_mass=mass.predicted_mass, coefficient_relative_error=mass.relative_error)
        ok = res < 1e-10 and (mass is None or mass.matches)
        report = make_report("klein_gordon", "pass" if ok else "fail", details=details)
    elif what == "velocity":
        rows = []
        for v in np.linspace(-0.9, 0.9, 37):
            got, want = velocity_addition_check(float(v), cfg.alpha, cfg.beta)
            rows.append({"v": float(v), "v_transformed": got, "v_predicted": want})
        gap = max(abs(r["v_transformed"] - r["v_predicted"]) for r in rows)
        report = make_report("velocity_addition", "pass" if gap < CHECK_TOL else "fail", details={"max_gap": gap})
    elif what == "zitterbewegung":
        gate = build_gate("dirac", {"m": cfg.m, "eps": cfg.eps})
        f = qw_evolve(initial_row(cfg, gate), gate, cfg.steps)
        rows = [{"t": t, "mean_velocity": mean_velocity(f, t)} for t in range(cfg.steps + 1)]
        spread = max(r["mean_velocity"] for r in rows) - min(r["mean_velocity"] for r in rows)
        report = make_report("zitterbewegung", "pass", details={"spread": spread, "rows": rows})
    else:
        raise ConfigError(f"unknown analysis {what!r}")
    write_report(report, json_path)
    if rows:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    print(json.dumps({k: report[k] for k in ("check", "status", "slope", "r2")}))
    ok = report["status"] == "pass" or report["status"].startswith("order_")
    return EXIT_OK if ok else EXIT_CHECK


# -- argument parsing -----------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help=f"one of {', '.join(ALL_MODELS)}")
    p.add_argument("--m", type=float, help="mass")
    p.add_argument("--eps", type=float, help="lattice spacing")
    p.add_argument("--p", type=int, help="Clock QW right counter period")
    p.add_argument("--q", type=int, help="Clock QW left counter period")
    p.add_argument("--alpha", type=int)
    p.add_argument("--beta", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sites", type=int, help="support of random initial data (QCA: wire count)")
    p.add_argument("--out", help="output path prefix")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorentzlattice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve a model and write the field (JSON + CSV)")
    _common(p)
    p.add_argument("--init", help="delta_plus | delta_minus | random (QCA: also a q/0/1 string)")

    p = sub.add_parser("transform", help="Lorentz-transform a stored field")
    _common(p)
    p.add_argument("--in", dest="input", help="field JSON written by simulate")
    p.add_argument("--nonhomog", help="JSON file with alpha_runs / beta_runs")

    p = sub.add_parser("verify", help="covariance or norm checks; writes a report")
    _common(p)
    p.add_argument("check", choices=("covariance", "norm"))
    p.add_argument("--sweep-eps", action="store_true", help="fit the residual order over eps = 1e-1 .. 1e-4")
    p.add_argument("--surfaces", type=int, default=10)
    p.add_argument("--swaps", type=int, default=20)

    p = sub.add_parser("analyze", help="uniqueness, counterexample, kg, velocity, zitterbewegung")
    _common(p)
    p.add_argument("analysis", choices=("uniqueness", "counterexample", "kg", "velocity", "zitterbewegung"))
    p.add_argument("--init", help="initial state for zitterbewegung")
    return parser


COMMANDS = {"simulate": cmd_simulate, "transform": cmd_transform, "verify": cmd_verify, "analyze": cmd_analyze}
EXTRA_KEYS = ("input", "nonhomog", "check", "sweep_eps", "surfaces", "swaps", "analysis")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = _config(args, args.command)
        cfg.extra = {k: getattr(args, k) for k in EXTRA_KEYS if getattr(args, k, None) is not None}
        if cfg.command == "verify" and cfg.extra["check"] == "norm":
            for k in ("surfaces", "swaps"):
                if cfg.extra[k] < 1:
                    raise ConfigError(f"--{k} must be >= 1")
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
