"""Acceptance criteria. Each test prints one ``PASS``/``FAIL`` line."""

import time
import warnings

import numpy as np
import pytest

from activedoi import Params
from activedoi.diagnostics import energy_budget_slack, energy_increments, entropy_tol, total_mass
from activedoi.driver import Discretization, initialize_config, initialize_velocity, picard_step, initial_state, run_simulation
from activedoi.errors import NonConvergence
from activedoi.flow import assemble_flow, solve_flow
from activedoi.grids import NO_SLIP, PERIODIC, DomainGrid, OrientationGrid, angular_derivative, laplace_beltrami, surface_divergence, surface_gradient
from activedoi.io import LEDGER_FILE, write_outputs
from activedoi.potential import MollifierKernel, build_potential, mollify
from activedoi.regularization import QL, Q0L, entropy_F, entropy_F_d2, entropy_FL, entropy_FL_d2
from activedoi.smoluchowski import assemble_config, solve_config
from oracles import LoopGrid, config_oracle, dense_stokes_solve, flow_oracle, potential_values


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail
    return emit


def params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Params(**kw)


def trig_poly(angles, rng, degree, lead=()):
    f = np.full(lead + angles.shape, 0.0) + rng.standard_normal(lead + (1,))
    for k in range(1, degree + 1):
        f = f + rng.standard_normal(lead + (1,)) * np.cos(k * angles) + rng.standard_normal(lead + (1,)) * np.sin(k * angles)
    return f


# the perturbed active nematic used for the time-stepping criteria
BENCHMARK = dict(alpha=1.0, U0=2.0, init_psi="perturbed", init_perturbation=0.3, init_sharpness=2.0,
                 init_velocity="vortex", init_velocity_amplitude=0.1, seed=2024)


def test_formula_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    og = OrientationGrid(32)
    phi = og.angles
    w = og.weight
    deg = og.M // 4
    errs = {}

    # integration by parts on the circle for tangential v = g t
    worst = 0.0
    for _ in range(20):
        f, g = trig_poly(phi, rng, deg), trig_poly(phi, rng, deg)
        v = g[:, None] * og.t
        worst = max(worst, abs(w * np.sum(surface_divergence(v, og) * f) + w * np.sum(np.sum(v * surface_gradient(f, og), -1))))
    errs["integration by parts"] = worst

    worst = 0.0
    for _ in range(20):
        f, g = trig_poly(phi, rng, deg), trig_poly(phi, rng, deg)
        lhs = w * np.sum(laplace_beltrami(f, og) * g)
        rhs = -w * np.sum(np.sum(surface_gradient(f, og) * surface_gradient(g, og), -1))
        worst = max(worst, abs(lhs - rhs))
    errs["Laplace-Beltrami duality"] = worst

    worst = 0.0
    for _ in range(20):
        A = rng.standard_normal((2, 2))
        A -= 0.5 * np.trace(A) * np.eye(2)
        f = trig_poly(phi, rng, deg)
        proj = A @ og.m.T
        proj = proj.T - np.einsum("ja,ja->j", og.m, proj.T)[:, None] * og.m
        lhs = w * np.sum(np.sum(proj * surface_gradient(f, og), -1))
        rhs = w * np.sum(f * np.einsum("jab,ab->j", 2 * og.mm - np.eye(2), A))
        worst = max(worst, abs(lhs - rhs))
    errs["stress identity"] = worst

    # closed-form surface gradient of U against the spectral derivative of a direct kernel sum
    g16 = DomainGrid(16, 16, bc_mode=PERIODIC)
    kernel = MollifierKernel.build(g16, 0.2)
    psi = 2.0 + 0.3 * trig_poly(phi, rng, deg, lead=(16, 16)) / deg
    P = build_potential(psi, 1.7, kernel, g16, og)
    direct = potential_values(psi, 1.7, 0.2, LoopGrid(16, 16, True), 32)
    errs["potential values"] = float(np.abs(P.values(og) - direct).max())
    errs["grad_g U formula"] = float(np.abs(P.grad_g_tangential(og) - angular_derivative(direct, og)).max())

    worst_adj = worst_l2 = 0.0
    for bc in (PERIODIC, NO_SLIP):
        g = DomainGrid(16, 16, bc_mode=bc)
        k = MollifierKernel.build(g, 0.2)
        for _ in range(10):
            f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
            worst_adj = max(worst_adj, abs(g.vol * np.sum(mollify(f, k, g) * h) - g.vol * np.sum(f * mollify(h, k, g))))
            worst_l2 = max(worst_l2, np.linalg.norm(mollify(f, k, g)) - np.linalg.norm(f))
    errs["mollifier adjointness"] = worst_adj
    errs["mollifier L2 stability excess"] = max(worst_l2, 0.0)

    secs = time.perf_counter() - t0
    ok = all(v <= 1e-12 for v in errs.values()) and secs < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f"; {secs:.2f} s"
    report(1, "formula suite", ok, detail)


def test_regularization_suite(report):
    s = np.concatenate([np.linspace(0.0, 200.0, 5000), np.geomspace(1e-8, 1e4, 5000)])
    assert s.size == 10_000
    failures = []
    d2_err = 0.0
    for L in (2.0, 10.0, 50.0):
        FL, F = np.asarray(entropy_FL(s, L)), np.asarray(entropy_F(s))
        d2 = np.asarray(entropy_FL_d2(s[s > 0], L))
        d2_err = max(d2_err, float(np.abs(d2 - 1 / np.asarray(QL(s[s > 0], L))).max()))
        if not np.all(d2 >= 1 / L):
            failures.append(f"convexity L={L}")
        if not np.all(FL >= F):
            failures.append(f"F^L >= F L={L}")
        for delta in (0.5, 0.1, 0.01):
            lhs = np.asarray(entropy_FL(np.asarray(QL(s, L)) + delta, L))
            if not np.all(lhs <= delta + delta ** 2 / 2 + np.asarray(entropy_F(s + delta))):
                failures.append(f"cut-off shift L={L} delta={delta}")
        for delta in (0.9, 0.5, 0.1, 0.01):
            if not np.all(np.asarray(entropy_F_d2(s + delta)) <= 1 / delta):
                failures.append(f"F'' bound delta={delta}")
        # quadratic growth witness: F^L(s) - s^2 / (4L) stays bounded below on [0, 100 L]
        sg = np.concatenate([[0.0], np.geomspace(1e-8, 100 * L, 10_000)])
        growth = np.asarray(entropy_FL(sg, L)) - sg ** 2 / (4 * L)
        if not (np.all(np.isfinite(growth)) and growth[-1] >= growth.min() and growth[-1] > 0):
            failures.append(f"quadratic growth L={L}")
        r = np.random.default_rng(int(L)).standard_normal((2, 10_000)) * 3 * L
        for q in (QL, Q0L):
            if not np.all(np.abs(np.asarray(q(r[0], L)) - np.asarray(q(r[1], L))) <= np.abs(r[0] - r[1])):
                failures.append(f"{q.__name__} Lipschitz L={L}")
        if not np.all(np.abs(np.asarray(Q0L(r[0], L))) <= np.abs(np.asarray(QL(r[0], L)))) or \
                not np.all(np.abs(np.asarray(QL(r[0], L))) <= np.abs(r[0])):
            failures.append(f"cut-off ordering L={L}")
    ok = not failures and d2_err <= 1e-12
    report(2, "regularization inequalities", ok,
           f"failures: {failures or 'none'}; max |(F^L)'' - 1/Q^L| = {d2_err:.1e}")


def test_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    errs = dict(flow_matrix=0.0, flow_rhs=0.0, config_matrix=0.0, config_rhs=0.0, flow_solution=0.0, config_solution=0.0)
    for bc in (PERIODIC, NO_SLIP):
        prm = params(nx=4, ny=4, M=8, bc_mode=bc, alpha=-1.5, U0=2.0, eps=0.3, L=3.0, gamma=0.4, Re=2.0, De=0.7,
                     tau=1e-2, T=1e-2)
        d = Discretization.from_params(prm)
        lg = LoopGrid(4, 4, bc == PERIODIC)
        pb, pp = 3.5 * rng.random((4, 4, 8)) - 0.1, rng.random((4, 4, 8))
        up = rng.standard_normal(d.grid.nvel)
        P = (d.potential(pb) + d.potential(pp)).scaled(0.5)
        fsys = assemble_flow(d.grid, d.ogrid, prm, pb, pp, up, P)
        A, f = flow_oracle(lg, 8, prm, pb, pp, up)
        errs["flow_matrix"] = max(errs["flow_matrix"], np.abs(fsys.matrix.toarray() - A).max())
        errs["flow_rhs"] = max(errs["flow_rhs"], np.abs(fsys.rhs - f).max())
        fs = solve_flow(fsys)
        errs["flow_solution"] = max(errs["flow_solution"], np.abs(fs.u - dense_stokes_solve(A, f, lg)[0]).max())
        csys = assemble_config(d.grid, d.ogrid, prm, fs.u, pb, pp, P)
        A, b = config_oracle(lg, 8, prm, fs.u, pb, pp)
        errs["config_matrix"] = max(errs["config_matrix"], np.abs(csys.matrix.toarray() - A).max())
        errs["config_rhs"] = max(errs["config_rhs"], np.abs(csys.rhs - b).max())
        cs = solve_config(csys)
        errs["config_solution"] = max(errs["config_solution"], np.abs(cs.psi.ravel() - np.linalg.solve(A, b)).max())
    secs = time.perf_counter() - t0
    ok = (max(errs[k] for k in ("flow_matrix", "flow_rhs", "config_matrix", "config_rhs")) <= 1e-12
          and errs["flow_solution"] <= 1e-9 and errs["config_solution"] <= 1e-9 and secs < 10)
    report(3, "oracle equivalence", ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f"; {secs:.2f} s")


def test_mass_conservation(report):
    t0 = time.perf_counter()
    prm = params(nx=32, ny=32, M=32, tau=5e-3, T=0.5, **BENCHMARK)
    res = run_simulation(prm)
    mass = np.array([row["mass"] for row in res.ledger])
    drift = float(np.abs(mass - mass[0]).max() / mass[0])
    secs = time.perf_counter() - t0
    ok = len(res.ledger) == 101 and drift <= 1e-8 and secs <= 300
    report(4, "mass conservation", ok, f"100 steps at 32x32x32, relative drift {drift:.2e}; {secs:.0f} s")


def test_equilibrium_fidelity(report):
    worst_u = worst_psi = 0.0
    for alpha, U0 in [(0.0, 0.0), (1.0, 2.0), (-4.0, 5.0), (4.0, 10.0)]:
        prm = params(nx=16, ny=16, M=16, bc_mode=PERIODIC, alpha=alpha, U0=U0, tau=5e-3, T=5e-2)
        c = 1 / (2 * np.pi)
        peak = {"u": 0.0, "psi": 0.0}

        def track(state, _res):
            peak["u"] = max(peak["u"], float(np.abs(state.u).max()))
            peak["psi"] = max(peak["psi"], float(np.abs(state.psi - c).max()))

        res = run_simulation(prm, callback=track)
        assert len(res.ledger) == 11
        worst_u, worst_psi = max(worst_u, peak["u"]), max(worst_psi, peak["psi"])
    ok = worst_u <= 1e-10 and worst_psi <= 1e-10
    report(5, "isotropic equilibrium", ok, f"max |u| {worst_u:.1e}, max |psi - c| {worst_psi:.1e} over 10 steps")


def _source_free(n):
    kw = dict(BENCHMARK, alpha=0.0, U0=0.0)
    return params(nx=n, ny=n, M=32, bc_mode=PERIODIC, tol_fp=1e-10, tau=5e-3, T=2.5e-2, **kw)


def test_entropy_dissipation(report):
    tols, monotone = {}, True
    for n in (16, 32):
        res = run_simulation(_source_free(n))
        tol = entropy_tol(res.defects)
        tols[n] = tol
        monotone &= bool(np.all(energy_increments(res.ledger) <= tol))
    ratio = tols[16] / tols[32]
    ok = monotone and ratio >= 1.8
    report(6, "source-free entropy dissipation", ok,
           f"entropy_tol(16) {tols[16]:.2e}, entropy_tol(32) {tols[32]:.2e}, ratio {ratio:.2f}; "
           f"energy non-increasing within tol: {monotone}")


def test_active_energy_budget(report):
    lines, ok = [], True
    for alpha in (1.0, -1.0, 4.0, -4.0):
        slack = {}
        for n in (16, 32):
            kw = dict(BENCHMARK, alpha=alpha)
            res = run_simulation(params(nx=n, ny=n, M=16, tau=5e-3, T=5e-2, **kw))
            slack[n] = energy_budget_slack(res.ledger)
        ok &= slack[32] <= slack[16]
        lines.append(f"alpha={alpha:+g}: slack {slack[16]:.1e} -> {slack[32]:.1e}")
    report(7, "active energy budget", ok, "; ".join(lines))


def test_initialization_bounds(report):
    rng = np.random.default_rng(808)
    worst_u = worst_psi = -np.inf
    for k in range(100):
        bc = PERIODIC if k % 2 else NO_SLIP
        g = DomainGrid(12, 12, bc_mode=bc)
        L = float(rng.uniform(1.5, 50.0))
        u0 = rng.standard_normal(g.nvel) * rng.uniform(0.1, 10)
        u = initialize_velocity(u0, g, L)
        ops = g.ops
        worst_u = max(worst_u, ops.l2_norm2(u) + ops.h1_seminorm2(u) / L - ops.l2_norm2(u0))
        psi0 = rng.random(g.shape + (8,)) * rng.uniform(0.1, 3 * L)
        psi = initialize_config(psi0, L)
        og = OrientationGrid(8)
        excess = max(total_mass(psi, g, og) - total_mass(psi0, g, og), float(psi.max()) - L, -float(psi.min()))
        worst_psi = max(worst_psi, excess)
    ok = worst_u <= 1e-10 and worst_psi <= 1e-10
    report(8, "initialization bounds", ok,
           f"velocity energy excess {worst_u:.1e}, configuration mass/range excess {worst_psi:.1e} (100 samples each)")


def test_fixed_point_behaviour(report):
    counts = {}
    for tau in (1e-2, 5e-3):
        prm = params(nx=16, ny=16, M=16, tau=tau, T=3 * tau, tol_fp=1e-8, max_picard=50, **BENCHMARK)
        res = run_simulation(prm)
        counts[tau] = max(row["picard_iters"] for row in res.ledger[1:])
    raised = False
    try:
        run_simulation(params(nx=16, ny=16, M=16, tau=1e-2, T=1e-2, max_picard=1, **BENCHMARK))
    except NonConvergence as exc:
        raised = exc.step == 1 and len(exc.history) == 1
    ok = all(c <= 50 for c in counts.values()) and raised
    report(9, "fixed-point iteration", ok,
           f"max iterations {counts}; NonConvergence with max_picard=1: {raised}")


def test_determinism(report, tmp_path):
    prm = params(nx=12, ny=12, M=12, tau=5e-3, T=2.5e-2, **dict(BENCHMARK, init_velocity="random"))
    blobs = []
    for name in ("a", "b"):
        res = run_simulation(prm)
        write_outputs(res.ledger, [], tmp_path / name)
        blobs.append((tmp_path / name / LEDGER_FILE).read_bytes())
    ok = blobs[0] == blobs[1]
    report(10, "determinism", ok, f"ledger CSVs identical: {ok} ({len(blobs[0])} bytes)")
