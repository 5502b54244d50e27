import numpy as np
import pytest
import sympy as sp

from anisolab import validate_exponents
from anisolab.selfsim import spike_init
from anisolab.solver import (AnisoCone, Bump, Field, Grid, GridError, NumericalAbort, SolverConfig,
                             StabilityError, Trajectory, adaptive_dt, backend,
                             barenblatt_with_mass, exact_aniso_cone, exact_isotropic_barenblatt,
                             exact_travelling_wave, face_flux, mass, run, step, sup, support_box,
                             touches_boundary, weak_residual)

KERNELS = backend.available()


@pytest.fixture(params=KERNELS)
def kernel(request):
    backend.use(request.param)
    yield request.param
    backend.use(None)


def test_compiled_backend_built():
    assert "compiled" in KERNELS
    assert backend.name() in KERNELS


# -- closed forms checked by symbolic substitution -------------------------------------
@pytest.mark.parametrize("p", [sp.Integer(3), sp.Integer(4), sp.Rational(5, 2)])
def test_travelling_wave_solves_equation(p):
    x, t, c = sp.symbols("x t c", positive=True)
    a = c ** (1 / (p - 2)) * ((p - 2) / (p - 1)) ** ((p - 1) / (p - 2))
    s = 1 - x + c * t
    # on the positivity set u_x < 0, so |u_x|^{p-2} u_x = -(-u_x)^{p-1}
    u = a * s ** ((p - 1) / (p - 2))
    res = sp.diff(u, t) + sp.diff((-sp.diff(u, x)) ** (p - 1), x)
    assert sp.simplify(res.subs(x, 1 + c * t - sp.Symbol("z", positive=True))) == 0
    tw = exact_travelling_wave(float(p), 1.3)
    for xv, tv in [(0.2, 0.1), (-0.5, 0.7)]:
        assert tw(xv, tv) == pytest.approx(float(u.subs({x: xv, t: tv, c: 1.3})), rel=1e-12)


def test_p3_wave_closed_form():
    tw = exact_travelling_wave(3.0, 1.0)
    x = np.linspace(-1, 4, 101)
    assert np.allclose(tw(x, 0.5), 0.25 * np.maximum(1 - x + 0.5, 0) ** 2, rtol=1e-14)
    assert tw(x, 0.3).min() >= 0 and np.ptp(tw(x, 0.3)) > 0
    assert tw.front(2.0) == 3.0 and tw(3.0 - 1e-9, 2.0) > 0 and tw(3.0 + 1e-9, 2.0) == 0


def test_isotropic_barenblatt_solves_equation():
    p, N = sp.Rational(5, 2), 2
    xs = sp.symbols("x1 x2", positive=True)
    t = sp.Symbol("t", positive=True)
    b = exact_isotropic_barenblatt(float(p), N, 1.0)
    k = sp.Rational(N) / (N * (p - 2) + p)
    q = (p - 2) / p * (k / N) ** (1 / (p - 1))
    r, m = p / (p - 1), (p - 1) / (p - 2)
    u = t ** (-k) * (1 - q * sum((xi * t ** (-k / N)) ** r for xi in xs)) ** m
    res = sp.diff(u, t) + sum(sp.diff((-sp.diff(u, xi)) ** (p - 1), xi) for xi in xs)
    for pt in [(0.1, 0.2, 0.5), (0.3, 0.05, 1.1)]:
        exact = {v: sp.Rational(str(c)) for v, c in zip((*xs, t), pt)}
        assert abs(res.subs(exact).evalf(60)) < 1e-50
        assert b(np.array(pt[:2]), pt[2]) == pytest.approx(
            float(u.subs({xs[0]: pt[0], xs[1]: pt[1], t: pt[2]})), rel=1e-12)
    assert b.k == pytest.approx(validate_exponents([2.5, 2.5]).alpha, rel=1e-14)


def test_barenblatt_mass_constant_in_time():
    b = barenblatt_with_mass(2.5, 3, 0.7, t_shift=0.01)
    g = Grid.uniform([-1] * 3, [1] * 3, [64] * 3)
    for t in (0.0, 0.002, 0.01):
        assert mass(Field.from_function(g, b, t)) == pytest.approx(0.7, rel=2e-3)


def test_cone_orientations():
    P = validate_exponents([2.2, 2.5])
    a = (0.7, 1.1)
    with pytest.raises(ValueError):
        exact_aniso_cone(P, a, c=1.0)
    default = exact_aniso_cone(P, a)
    assert default(np.zeros(2), 0.0) == 1.0
    # the classical orientation needs c = sum a_i^(p_i-1), which differs from the side-condition value
    flipped = AnisoCone(P, a, default.flux_divergence(), time_sign=1)
    assert exact_aniso_cone(P, a, time_sign=1).c == default.c
    g = Grid.uniform([-1, -1], [1, 1], [96, 96])
    times = np.linspace(0, 0.2, 81)
    bumps = [Bump((0.2, -0.1), (0.5, 0.6), 0.1, 0.15)]
    r = {}
    for name, cone in (("default", default), ("flipped", flipped)):
        traj = Trajectory([Field.from_function(g, cone, t) for t in times])
        r[name] = weak_residual(traj, bumps, P).relative
    assert r["flipped"] < 1e-3 < r["default"]


# -- scheme -----------------------------------------------------------------------------
def test_flux_constant_and_linear(kernel):
    P = validate_exponents([2.3, 2.6, 3.0])
    g = Grid.uniform([0] * 3, [1] * 3, [6, 7, 8])
    assert all(np.all(face_flux(Field(g, np.full(g.dims, 3.0)), a, P) == 0) for a in range(3))
    for a, slope in enumerate((0.5, -2.0, 1.5)):
        fld = Field(g, slope * g.mesh()[..., a])
        F = face_flux(fld, a, P)
        assert np.allclose(F, abs(slope) ** (P.p[a] - 2) * slope, rtol=1e-12)
        nxt = step(fld, 0.5 * adaptive_dt(fld, P), P)
        interior = tuple(slice(1, -1) for _ in range(3))
        assert np.allclose(nxt.values[interior], fld.values[interior], atol=1e-14)


def test_flux_against_scalar_reference(kernel):
    P = validate_exponents([2.2, 2.7])
    g = Grid.uniform([0, 0], [2, 1], [9, 7])
    rng = np.random.default_rng(0)
    fld = Field(g, rng.uniform(0, 1, g.dims))
    for a in range(2):
        F = face_flux(fld, a, P)
        u, h = fld.values, g.spacing[a]
        for idx in np.ndindex(F.shape):
            j = list(idx)
            lo = tuple(j)
            j[a] += 1
            D = (u[tuple(j)] - u[lo]) / h
            assert F[idx] == pytest.approx(abs(D) ** (P.p[a] - 2) * D, rel=1e-12, abs=1e-300)


def test_adaptive_dt(kernel):
    P = validate_exponents([3.0])
    g = Grid.uniform([0], [1], [32])
    cfg = SolverConfig(dt_max=0.25)
    assert adaptive_dt(Field(g, np.zeros(32)), P, config=cfg) == 0.25
    slope = Field(g, 2.0 * g.mesh()[..., 0])
    fine = Grid.uniform([0], [0.5], [32])
    slope_f = Field(fine, 2.0 * fine.mesh()[..., 0])
    assert adaptive_dt(slope, P) / adaptive_dt(slope_f, P) == pytest.approx(4.0, rel=1e-12)
    P2 = validate_exponents([2.5])
    r = adaptive_dt(Field(g, g.mesh()[..., 0]), P2) / adaptive_dt(Field(g, 4 * g.mesh()[..., 0]), P2)
    assert r == pytest.approx(4 ** 0.5, rel=1e-12)


def test_step_rejects_unstable_dt(kernel):
    P = validate_exponents([2.5, 2.5])
    g = Grid.uniform([0, 0], [1, 1], [16, 16])
    fld = Field(g, np.random.default_rng(1).uniform(0, 1, g.dims))
    dt = adaptive_dt(fld, P, safety=1.0)
    step(fld, dt, P)
    with pytest.raises(StabilityError):
        step(fld, 1.5 * dt, P)


def test_constant_unchanged(kernel):
    P = validate_exponents([2.1, 2.2, 2.3])
    g = Grid.uniform([0] * 3, [1] * 3, [8] * 3, "periodic")
    traj = run(Field(g, np.full(g.dims, 0.3)), 0.05, SolverConfig(snapshot_times=(0.01, 0.02)), P)
    assert len(traj) == 4
    assert all(np.array_equal(s.values, traj[0].values) for s in traj)


def test_backends_agree():
    if len(KERNELS) < 2:
        pytest.skip("compiled backend not built")
    P = validate_exponents([2.2, 2.5, 2.9])
    g = Grid.uniform([-1] * 3, [1] * 3, [20] * 3)
    fld = spike_init(g, 1.0, 3)
    out = {}
    for k in KERNELS:
        backend.use(k)
        traj = run(fld, 2e-4, SolverConfig(), P)
        out[k] = (traj[-1].values, traj.metadata["runlog"]["steps"])
    backend.use(None)
    a, b = out["compiled"], out["python"]
    assert a[1] == b[1]
    assert np.abs(a[0] - b[0]).max() <= 1e-13 * np.abs(a[0]).max()


def test_wave_converges(kernel):
    tw = exact_travelling_wave(3.0, 1.0)
    P = validate_exponents([3.0])
    errs = []
    for n in (128, 256):
        g = Grid.uniform([-1], [4], [n], "dirichlet-profile")
        traj = run(Field.from_function(g, tw, 0.0), 0.5, SolverConfig(safety=0.9), P, tw)
        errs.append(np.abs(traj[-1].values - tw(g.mesh(), 0.5)).max())
    assert errs[1] < 0.6 * errs[0]


def test_generic_profile_boundary():
    # a profile that is not a travelling wave goes through the python ghost loop
    P = validate_exponents([3.0])
    g = Grid.uniform([-1], [4], [64], "dirichlet-profile")
    tw = exact_travelling_wave(3.0, 1.0)
    traj = run(Field.from_function(g, tw, 0.0), 0.2, SolverConfig(), P, lambda x, t: tw(x, t))
    ref = run(Field.from_function(g, tw, 0.0), 0.2, SolverConfig(), P, tw)
    assert np.allclose(traj[-1].values, ref[-1].values, rtol=0, atol=1e-12)


def test_profile_boundary_needs_profile():
    g = Grid.uniform([-1], [4], [16], "dirichlet-profile")
    with pytest.raises(ValueError):
        run(Field(g, np.zeros(16)), 0.1, SolverConfig(), validate_exponents([3.0]))


@pytest.mark.parametrize("bc", ["periodic", "noflux"])
def test_conservation_closures(kernel, bc):
    P = validate_exponents([2.2, 2.6])
    g = Grid.uniform([0, 0], [1, 1], [24, 24], bc)
    rng = np.random.default_rng(2)
    fld = Field(g, rng.uniform(0, 1, g.dims))
    traj = run(fld, 5e-3, SolverConfig(), P)
    assert abs(mass(traj[-1]) - mass(fld)) <= 1e-12 * mass(fld)


def test_positivity_and_comparison(kernel):
    P = validate_exponents([2.4, 3.0])
    g = Grid.uniform([0, 0], [1, 1], [20, 20])
    rng = np.random.default_rng(3)
    v = Field(g, rng.uniform(0, 1, g.dims))
    u = Field(g, v.values + rng.uniform(0, 0.3, g.dims))
    for _ in range(100):
        dt = min(adaptive_dt(u, P), adaptive_dt(v, P))
        u, v = step(u, dt, P), step(v, dt, P)
        assert (u.values - v.values).min() >= -1e-12
        assert v.values.min() >= -1e-12


def test_non_finite_field_rejected():
    g = Grid.uniform([0], [1], [8])
    vals = np.ones(8)
    vals[3] = np.nan
    with pytest.raises(GridError):
        Field(g, vals)


def test_forced_dt_aborts_with_partial():
    P = validate_exponents([2.5])
    g = Grid.uniform([0], [1], [32])
    fld = Field(g, np.sin(np.pi * g.mesh()[..., 0]))
    with pytest.raises(NumericalAbort) as exc:
        run(fld, 1.0, SolverConfig(dt_min=0.5), P)
    assert exc.value.partial is not None and len(exc.value.partial) == 1


def test_step_budget_abort():
    P = validate_exponents([2.5])
    g = Grid.uniform([0], [1], [32])
    fld = Field(g, np.sin(np.pi * g.mesh()[..., 0]))
    with pytest.raises(NumericalAbort):
        run(fld, 1.0, SolverConfig(max_steps=5), P)


def test_scheme_rejects_subquadratic():
    g = Grid.uniform([0], [1], [8])
    with pytest.raises(ValueError):
        step(Field(g, np.zeros(8)), 1e-3, validate_exponents([1.5]))


def test_grid_validation():
    with pytest.raises(GridError):
        Grid.uniform([0], [1], [3])
    with pytest.raises(GridError):
        Grid.uniform([0], [1], [8], "reflecting")


# -- measurements -----------------------------------------------------------------------
def test_measures_bump_and_zero():
    g = Grid.uniform([-1, -1], [1, 1], [80, 80])
    x = g.mesh()
    w = 0.3
    fld = Field(g, (np.abs(x) < w).all(axis=-1).astype(float))
    assert sup(fld) == 1.0
    assert np.all(np.abs(support_box(fld) - w) <= g.spacing[0])
    zero = Field(g, np.zeros(g.dims))
    assert (mass(zero), sup(zero)) == (0.0, 0.0)
    assert np.array_equal(support_box(zero), [0.0, 0.0])
    assert not touches_boundary(fld)


def test_wave_mass_matches_integral():
    tw = exact_travelling_wave(3.0, 1.0)
    g = Grid.uniform([-1], [4], [2000])
    # int_{-1}^{1.5} 0.25 (1.5 - x)^2 dx = (2.5)^3 / 12
    assert mass(Field.from_function(g, tw, 0.5)) == pytest.approx(2.5**3 / 12, rel=1e-5)
