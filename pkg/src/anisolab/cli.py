"""Command-line entry point: ``anisolab {solve,selfsim,probe,geometry,validate}``.

Exit codes: 0 success, 1 a validation check failed, 2 bad configuration or
arguments, 3 the solver aborted.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, geometry as geo, probes
from .anisotropy import AnisotropyParams, ExponentError, validate_exponents
from .config import ConfigError, ExperimentConfig, load
from .selfsim import FitError, run_until_spread, scaling_report, spike_init, write_outputs
from .solver import (Bump, Field, Grid, NumericalAbort, SolverConfig, Trajectory, adaptive_dt,
                     barenblatt_with_mass, centroid, exact_travelling_wave, mass, read_snapshot,
                     read_trajectory, run, step, support_box, weak_residual, write_trajectory)
from .solver.io import dumps

log = logging.getLogger("anisolab")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
PROBES = ("harnack", "paraboloid", "extrinsic", "supbound", "oscillation", "holder")


class UsageError(ValueError):
    pass


# -- experiment assembly ----------------------------------------------------------------
def _params(cfg: ExperimentConfig) -> AnisotropyParams:
    return validate_exponents(cfg.exponents)


def _grid(cfg: ExperimentConfig) -> Grid:
    g = cfg.grid
    return Grid.uniform(g.lo, g.hi, g.dims, g.boundary)


def _profile(cfg: ExperimentConfig):
    if cfg.initial.kind == "travelling-wave":
        return exact_travelling_wave(cfg.exponents[0], cfg.initial.c)
    return None


def initial_field(cfg: ExperimentConfig) -> Field:
    ini = cfg.initial
    if ini.kind == "snapshot":
        return read_snapshot(ini.path)
    grid = _grid(cfg)
    if ini.kind == "spike":
        return spike_init(grid, ini.mass, ini.width_cells)
    if ini.kind == "constant":
        return Field(grid, np.full(grid.dims, ini.value))
    if ini.kind == "travelling-wave":
        return Field.from_function(grid, _profile(cfg), 0.0)
    b = barenblatt_with_mass(cfg.exponents[0], len(cfg.exponents), ini.mass, ini.t_shift)
    return Field.from_function(grid, b, 0.0)


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    r = cfg.run
    snaps = list(r.snapshots) or [r.horizon * (k + 1) / r.snapshot_count
                                  for k in range(r.snapshot_count)]
    return SolverConfig(safety=r.safety, dt_min=r.dt_min, dt_max=r.dt_max,
                        snapshot_times=tuple(snaps), gradient_floor=r.gradient_floor,
                        max_steps=r.max_steps, threads=cfg.threads, flux_sign=r.flux_sign)


def make_trajectory(cfg: ExperimentConfig) -> Trajectory:
    """Spike data evolve until the support fills ``selfsim.frac``; anything else runs to the horizon."""
    params = _params(cfg)
    fld = initial_field(cfg)
    if cfg.initial.kind == "spike":
        s = cfg.selfsim
        return run_until_spread(fld, params, s.frac, s.eps_rel, s.growth, solver_config(cfg))
    return run(fld, cfg.run.horizon, solver_config(cfg), params, _profile(cfg))


def _write_config(out: Path, cfg: ExperimentConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(cfg.dumps())


# -- subcommands ------------------------------------------------------------------------
def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    params = _params(cfg)
    fld = initial_field(cfg)
    _write_config(out, cfg)
    try:
        traj = run(fld, cfg.run.horizon, solver_config(cfg), params, _profile(cfg))
    except NumericalAbort as exc:
        if exc.partial is not None:
            write_trajectory(out, exc.partial, {"aborted": str(exc)})
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_trajectory(out, traj)
    (out / "runlog.json").write_text(dumps(traj.metadata["runlog"]))
    print(f"wrote {len(traj)} snapshots to {out}")
    return EXIT_OK


def cmd_selfsim(cfg: ExperimentConfig, out: Path) -> int:
    params = _params(cfg)
    _write_config(out, cfg)
    traj = make_trajectory(cfg)
    rep = scaling_report(traj, params, cfg.selfsim.eps_rel)
    files = write_outputs(out, rep, traj, cfg.selfsim.eps_rel)
    print(dumps({"alpha_hat": rep.alpha_hat, "alpha_i_hat": rep.alpha_i_hat,
                 "eta_hat": rep.eta_hat, "files": sorted(files.values())}), end="")
    return EXIT_OK


def _vertex_box(traj: Trajectory, shrink: float = 1.0):
    last = traj[-1]
    c = centroid(last)
    hw = support_box(last) * shrink
    g = traj.grid
    lo = np.maximum(c - hw, [x[0] for x in g.axes()])
    hi = np.minimum(c + hw, [x[-1] for x in g.axes()])
    return lo, hi, c


def run_probe(name: str, traj: Trajectory, cfg: ExperimentConfig) -> probes.ProbeReport:
    params = _params(cfg)
    pc = cfg.probe
    x_box = None
    if pc.x_box == "support":
        lo, hi, _ = _vertex_box(traj)
        x_box = (tuple(lo), tuple(hi))
    spec = probes.SampleSpec(n=pc.n, seed=cfg.seed, rho_range=tuple(pc.rho_range),
                             theta_range=tuple(pc.theta_range) or None, x_box=x_box,
                             side_C3=pc.side_C3 or None)

    def c3():
        if pc.C3 > 0:
            return pc.C3
        return max(pc.C2, probes.harnack_probe(traj, params, pc.C1, pc.C2, spec).aggregate["C3"])

    if name == "harnack":
        return probes.harnack_probe(traj, params, pc.C1, pc.C2, spec)
    if name == "paraboloid":
        return probes.paraboloid_probe(traj, params, pc.C1, pc.C2, c3(), spec)
    if name == "extrinsic":
        eta = pc.eta_tilde or scaling_report(traj, params, cfg.selfsim.eps_rel).eta_hat
        return probes.extrinsic_harnack_probe(traj, params, pc.C1, c3(), eta, None, pc.C2, spec)
    if name == "supbound":
        return probes.supbound_probe(traj, params, tuple(pc.lambda_range), pc.M, spec)
    if name == "oscillation":
        _, _, c = _vertex_box(traj)
        return probes.oscillation_decay(traj, c, traj.times[-1], pc.R, params, None, pc.C1,
                                        pc.C2, c3(), pc.n_max)
    lo, hi, _ = _vertex_box(traj, 0.5)
    T = traj.times[-1]
    K = geo.SpaceTimeBox(tuple(lo), tuple(hi), traj.times[0] + 0.5 * (T - traj.times[0]),
                         traj.times[0] + 0.9 * (T - traj.times[0]))
    return probes.holder_modulus(traj, K, params, pc.C1, pc.n_pairs, c3(), seed=cfg.seed,
                                 pair_radius=pc.pair_radius or None)


def cmd_probe(cfg: ExperimentConfig, out: Path, name: str, traj_dir: str | None) -> int:
    _write_config(out, cfg)
    traj = read_trajectory(traj_dir) if traj_dir else make_trajectory(cfg)
    rep = run_probe(name, traj, cfg)
    (out / f"probe_{name}.json").write_text(rep.to_json())
    (out / f"probe_{name}.csv").write_text(rep.to_csv())
    summary = {k: v for k, v in rep.to_dict()["aggregate"].items()
               if not isinstance(v, (list, dict))}
    print(dumps({"probe": name, "aggregate": summary}), end="")
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_geometry(args) -> int:
    params = validate_exponents(_floats(args.p))
    N = params.N
    kind = args.shape
    if kind == "cube":
        center = _floats(args.center) if args.center else [0.0] * N
        cube = geo.IntrinsicCube(tuple(center), args.rho, args.theta, params)
        res = cube.to_dict()
    elif kind == "cylinder":
        center = _floats(args.center) if args.center else [0.0] * N
        cyl = geo.IntrinsicCylinder.make(center, args.t, args.rho, args.theta, args.C, args.kind,
                                         params)
        res = cyl.to_dict()
    elif kind == "net":
        center = _floats(args.center) if args.center else [0.0] * N
        net = geo.build_net(center, args.s, args.R, args.omega, args.C1, args.C2, args.C3, params,
                            args.levels)
        res = net.to_dict()
    elif kind == "chain":
        rep = geo.liouville_chain(_floats(args.a), _floats(args.b), params, args.c1, args.c2,
                                  args.c4, args.delta, args.n_max)
        res = rep.to_dict()
        res["verdict"] = ("all inclusions hold" if rep.all_hold
                          else "some inclusion fails")
    else:
        x = _floats(args.x) if args.x else [0.0] * N
        P = geo.Paraboloid(tuple(x), args.t, args.theta, args.varrho, args.C2, args.sign, params)
        res = P.to_dict()
        if args.point:
            q = _floats(args.point)
            res["point"] = q
            res["contains"] = bool(P.contains(np.asarray(q[:N]), q[N]))
    print(dumps(res), end="")
    if kind == "chain":
        print(res["verdict"])
    return EXIT_OK


# -- built-in oracle suite --------------------------------------------------------------
def _check_exponents(rng, sign):
    worst, mismatch = 0.0, 0
    for _ in range(200):
        N = int(rng.integers(3, 6))
        p = np.sort(rng.uniform(2.0, 4.0, N))
        P = AnisotropyParams(tuple(p))
        worst = max(worst, abs(sum(P.alpha_i) - P.alpha))
        pb = N / np.sum(1 / p)
        brute = bool(p[0] > 2 and p[-1] < pb * (1 + 1 / N) and pb < N)
        mismatch += brute != P.in_range
    return worst <= 1e-12 and mismatch == 0, {"max_identity_error": worst, "mismatches": mismatch}


def _check_wave(rng, sign):
    tw = exact_travelling_wave(3.0, 1.0)
    params = validate_exponents([3.0])
    grid = Grid.uniform([-1.0], [4.0], [256], "dirichlet-profile")
    fld = Field.from_function(grid, tw, 0.0)
    try:
        traj = run(fld, 0.5, SolverConfig(safety=0.9, flux_sign=sign), params, tw)
    except NumericalAbort as exc:
        return False, {"error": str(exc)}
    exact = tw(grid.mesh(), 0.5)
    err = float(np.abs(traj[-1].values - exact).max() / exact.max())
    return err <= 1e-3, {"relative_linf_error": err}


def _check_comparison(rng, sign):
    params = validate_exponents([2.5, 3.0])
    grid = Grid.uniform([0.0, 0.0], [1.0, 1.0], [24, 24], "dirichlet-zero")
    worst = math.inf
    for _ in range(10):
        v = rng.uniform(0.0, 1.0, grid.dims)
        u = v + rng.uniform(0.0, 0.5, grid.dims)
        fu, fv = Field(grid, u), Field(grid, v)
        try:
            for _ in range(50):
                dt = min(adaptive_dt(fu, params), adaptive_dt(fv, params))
                fu, fv = step(fu, dt, params, sign=sign), step(fv, dt, params, sign=sign)
        except NumericalAbort as exc:
            return False, {"error": str(exc)}
        worst = min(worst, float((fu.values - fv.values).min()))
    return worst >= -1e-12, {"min_difference": worst}


def _check_conservation(rng, sign):
    params = validate_exponents([2.2, 2.5, 2.8])
    grid = Grid.uniform([0.0] * 3, [1.0] * 3, [16] * 3, "periodic")
    x = grid.mesh()
    fld = Field(grid, 1.0 + 0.5 * np.prod(np.sin(2 * np.pi * x), axis=-1))
    m0 = mass(fld)
    for _ in range(30):
        fld = step(fld, adaptive_dt(fld, params), params, sign=sign)
    drift = abs(mass(fld) - m0) / m0
    return drift <= 1e-10, {"relative_mass_drift": drift}


def _check_residual(rng, sign):
    tw = exact_travelling_wave(3.0, 1.0)
    params = validate_exponents([3.0])
    grid = Grid.uniform([-1.0], [4.0], [512], "dirichlet-zero")
    times = np.linspace(0.0, 1.0, 201)
    exact = Trajectory([Field.from_function(grid, tw, t) for t in times])
    bumps = [Bump((1.5,), (1.4,), 0.5, 0.5), Bump((2.0,), (1.0,), 0.3, 0.6)]
    r_exact = weak_residual(exact, bumps, params).relative
    pert = Trajectory([s.scaled(1.1) for s in exact])
    r_pert = weak_residual(pert, bumps, params).relative
    return r_pert > 10 * r_exact, {"exact": r_exact, "perturbed": r_pert}


CHECKS = (("exponent-identities", _check_exponents), ("travelling-wave", _check_wave),
          ("comparison-ordering", _check_comparison), ("conservation", _check_conservation),
          ("weak-residual", _check_residual))


def cmd_validate(seed: int, fault: str | None) -> int:
    sign = -1.0 if fault == "flux-sign" else 1.0
    rng = np.random.default_rng(seed)
    results, failed = {}, []
    for name, fn in CHECKS:
        ok, detail = fn(rng, sign)
        results[name] = {"ok": bool(ok), **detail}
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        if not ok:
            failed.append(name)
    print(dumps({"checks": results, "failed": failed}), end="")
    return EXIT_VALIDATION if failed else EXIT_OK


# -- argument parsing -------------------------------------------------------------------
def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="TOML experiment file")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--seed", type=int, default=d, help="sampling seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, default=d, help="solver threads")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisolab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    _global_flags(ap, False)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, True)
    sub.add_parser("solve", parents=[common], help="run the solver and store snapshots")
    sub.add_parser("selfsim", parents=[common], help="fit self-similar scaling of a spike run")
    pp = sub.add_parser("probe", parents=[common], help="run an empirical estimate probe")
    pp.add_argument("name", choices=PROBES)
    pp.add_argument("--traj", help="existing trajectory directory (skips the solve)")
    vp = sub.add_parser("validate", parents=[common], help="run the built-in oracle suite")
    vp.add_argument("--fault", choices=["flux-sign"], help="test hook: inject a defect")

    gp = sub.add_parser("geometry", parents=[common], help="describe intrinsic regions")
    gsub = gp.add_subparsers(dest="shape", required=True)

    def shape(name, **extra):
        sp = gsub.add_parser(name, parents=[common])
        sp.add_argument("--p", default="2.1,2.1,2.1", help="comma-separated exponents")
        for flag, (typ, default) in extra.items():
            sp.add_argument(f"--{flag}", type=typ, default=default)
        return sp

    shape("cube", theta=(float, 1.0), rho=(float, 1.0), center=(str, None))
    cyl = shape("cylinder", theta=(float, 1.0), rho=(float, 1.0), C=(float, 1.0), t=(float, 0.0),
                center=(str, None))
    cyl.add_argument("--kind", choices=geo.KINDS, default="backward")
    shape("net", levels=(int, 5), R=(float, 1.0), omega=(float, 1.0), s=(float, 0.0),
          C1=(float, 1.0), C2=(float, 1.0), C3=(float, 2.0), center=(str, None))
    shape("chain", a=(str, None), b=(str, None), c1=(float, 2.0), c2=(float, 2.0),
          c4=(float, 2.0), delta=(float, 0.5), n_max=(int, 5))
    par = shape("paraboloid", x=(str, None), t=(float, 0.0), theta=(float, 1.0),
                varrho=(float, 1.0), C2=(float, 1.0), point=(str, None))
    par.add_argument("--sign", type=int, choices=(1, -1), default=1)
    return ap


def _load_config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "geometry":
            if args.shape == "chain" and (args.a is None or args.b is None):
                raise UsageError("chain needs --a and --b")
            return cmd_geometry(args)
        cfg = _load_config(args)
        if args.command == "validate":
            return cmd_validate(cfg.seed, args.fault)
        out = Path(cfg.out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "selfsim":
            return cmd_selfsim(cfg, out)
        return cmd_probe(cfg, out, args.name, args.traj)
    except (ConfigError, ExponentError, UsageError, geo.GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (probes.ProbeError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
