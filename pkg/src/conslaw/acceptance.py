"""The acceptance suite: one callable check per criterion.

Each criterion function builds its own fixtures, measures, and returns an
AcceptanceResult with pass/fail and the numbers behind the verdict.  The
pytest module tests/test_acceptance.py asserts each one; the CLI verb
`accept` prints one line per criterion and exits nonzero on any failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .characteristics import backward_characteristic, cone_max_principle_check
from .decay import bootstrap_gamma, decay_experiment, fit_decay_exponent
from .degiorgi import oscillation_bound_check, truncation_ladder
from .fields import ScalarField, field_from_function, spacetime_frames
from .fluxes import (
    estimate_alpha,
    get_flux,
    hormander_order,
    make_generalized_burgers,
    nondegeneracy_constant,
)
from .kinetic import default_level_grid, entropy_dissipation
from .scaling import apply_scaling, build_scaling, gamma_zero, rescale_flux
from .solver import (
    cfl_dt,
    default_levels,
    entropy_residual_report,
    exact_decay_solution,
    grid_floor,
    residual_tolerance,
    solve,
    step,
)
from .structure import auto_threshold, jump_set, oscillation_modulus


@dataclass
class AcceptanceResult:
    cid: int
    name: str
    passed: bool
    elapsed: float
    details: list[str] = dc_field(default_factory=list)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.cid}: {self.name} ({self.elapsed:.1f}s) :: " + "; ".join(
            self.details
        )


def _result(cid, name, t0, checks: list[tuple[bool, str]]) -> AcceptanceResult:
    return AcceptanceResult(
        cid=cid,
        name=name,
        passed=all(ok for ok, _ in checks),
        elapsed=time.perf_counter() - t0,
        details=[("ok: " if ok else "FAIL: ") + msg for ok, msg in checks],
    )


def criterion_1() -> AcceptanceResult:
    """Optimal-decay oracle: sup norms track (t+1)^(-1/2) and the fitted
    exponent is 1/2."""
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    u0 = field_from_function(lambda x: exact_decay_solution(1, 0.0, x), [4096], [-1.0], [5.0])
    probe = [1.0, 3.0, 7.0, 15.0]
    times = sorted(set(np.geomspace(0.5, 15.0, 20).tolist() + probe))
    series = decay_experiment(flux, u0, 15.0, times=times)
    checks = []
    for t in probe:
        i = int(np.argmin(np.abs(series.times - t)))
        got, want = series.sup_norms[i], (t + 1) ** -0.5
        rel = abs(got - want) / want
        checks.append((rel <= 0.03, f"max u at t={t:g}: {got:.5f} vs {want:.5f} ({rel:.2%})"))
    gamma_hat, _ = fit_decay_exponent(series, 2.0)
    checks.append((abs(gamma_hat - 0.5) <= 0.02, f"fitted exponent {gamma_hat:.4f} vs 0.5"))
    elapsed = time.perf_counter() - t0
    checks.append((elapsed < 60.0, f"runtime {elapsed:.1f}s < 60s"))
    return _result(1, "optimal decay oracle (N=4096)", t0, checks)


def criterion_2() -> AcceptanceResult:
    """Closed-form decay exponents and the quadratic bootstrap."""
    t0 = time.perf_counter()
    checks = [
        (gamma_zero(get_flux("burgers")) == 0.5, "gamma0(burgers) == 1/2 exactly")
    ]
    for d in (1, 2, 3):
        want = 1.0 / (1 + d * (d + 1) / 2)
        got = gamma_zero(make_generalized_burgers(d))
        checks.append((got == want, f"gamma0(gen burgers d={d}) == {want} exactly (got {got})"))
    g0 = 0.5
    seq = bootstrap_gamma(g0, g0 / 2, 6)
    checks.append(
        (abs(seq[-1] - g0) < 1e-8, f"bootstrap from gamma0/2: |gap| = {abs(seq[-1] - g0):.2e} < 1e-8 in 6 iterations")
    )
    elapsed = time.perf_counter() - t0
    checks.append((elapsed < 1.0, f"runtime {elapsed:.2f}s < 1s"))
    return _result(2, "closed-form exponents and bootstrap", t0, checks)


def criterion_3() -> AcceptanceResult:
    """Shock dissipation mass, flag locality, and vanishing for continuous
    solutions."""
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    checks = []

    # total kinetic mass of the unit-window shock
    u0 = field_from_function(lambda x: np.where(x < 0.0, 1.0, 0.0), [2048], [-0.5], [1.5])
    traj = solve(u0, flux, 1.0, np.linspace(0, 1, 9))
    mu = entropy_dissipation(traj, flux, default_level_grid(0.0, 1.0, 64))
    rel = abs(mu.total - 1 / 12) * 12
    checks.append((rel <= 0.10, f"shock total mass {mu.total:.5f} vs 1/12 ({rel:.2%})"))

    # flag locality: windows matched to the cell scale
    dx = traj.grid.spacing[0]
    traj_f = solve(u0, flux, 0.25, np.linspace(0, 0.25, 129))
    mu_f = entropy_dissipation(traj_f, flux, default_level_grid(0.0, 1.0, 16))
    mask = jump_set(mu_f, [dx], auto_threshold(1.0))
    idx = mask.flagged_indices()
    tc = mu_f.window_centers()
    xc = traj_f.grid.axis_centers(0)
    devs = np.array([abs(xc[j] - tc[k] / 2) / dx for k, j in idx])
    cover = all(
        any(abs(xc[j] - t / 2) <= 2 * dx for k2, j in idx if k2 == k) for k, t in enumerate(tc)
    )
    checks.append(
        (len(idx) > 0 and devs.max() <= 2.0 + 1e-9,
         f"{len(idx)} flags, max deviation from x=t/2: {devs.max():.2f} cells (<= 2)")
    )
    checks.append((cover, "every time window flags the shock line"))

    # continuous solutions: no flags, vanishing mass under refinement
    u0r = field_from_function(lambda x: 0.5 * (1 + np.tanh(x / 0.1)), [1024], [-1.0], [2.0])
    trr = solve(u0r, flux, 1.0, np.linspace(0, 1, 17))
    mur = entropy_dissipation(trr, flux, default_level_grid(0.0, 1.0, 64))
    mr = jump_set(mur, [trr.grid.spacing[0], 2 * trr.grid.spacing[0]], 0.01)
    checks.append((int(mr.flagged.sum()) == 0, f"rarefaction flags: {int(mr.flagged.sum())}"))

    # halving on a continuous (pre-shock smooth) solution
    tots = []
    for n in (512, 1024):
        u0s = field_from_function(lambda x: np.exp(-(x**2)), [n], [-3.0], [3.0])
        trs = solve(u0s, flux, 0.4, np.linspace(0, 0.4, 9))
        rng = (min(f.bounds[0] for f in trs.frames), max(f.bounds[1] for f in trs.frames))
        tots.append(entropy_dissipation(trs, flux, default_level_grid(*rng, 64)).total)
    ratio = tots[1] / tots[0]
    checks.append(
        (ratio <= 0.5, f"continuous-solution dissipation halves: ratio {ratio:.4f} <= 0.5")
    )
    elapsed = time.perf_counter() - t0
    checks.append((elapsed < 120.0, f"runtime {elapsed:.1f}s < 120s"))
    return _result(3, "shock dissipation concentration", t0, checks)


def criterion_4() -> AcceptanceResult:
    """Continuity outside the flagged set on a shock+rarefaction composite."""
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    n = 2048
    u0 = field_from_function(
        lambda x: np.where((x >= -1.0) & (x < 0.0), 1.0, 0.0), [n], [-2.0], [1.5]
    )
    traj = solve(u0, flux, 1.0, np.linspace(0, 1, 129))
    mu = entropy_dissipation(traj, flux, default_level_grid(0.0, 1.0, 16))
    dx = traj.grid.spacing[0]
    # sensitive mask: flags must blanket the whole numerically blurred jump
    mask = jump_set(mu, [dx, 2 * dx], auto_threshold(1.0) / 10)
    last = traj.frames[-1]
    floor = grid_floor(last, flux)
    radii = [8 * dx, 4 * dx, 2 * dx, 1.01 * dx]
    k_last = mu.mass.shape[0] - 1
    flagged_row = mask.flagged[k_last]
    xc = last.axis_centers(0)
    probes = list(range(16, n - 16, 64))
    shock_j = int(np.argmin(np.abs(xc - 0.5)))
    probes += list(range(shock_j - 8, shock_j + 9))
    n_bad_unflagged = 0
    n_bad_flagged = 0
    n_flagged = 0
    worst_un = 0.0
    for j in sorted(set(probes)):
        osc, _ = oscillation_modulus(last, [xc[j]], radii)
        if flagged_row[j]:
            n_flagged += 1
            if not (0.9 <= osc.max() <= 1.1):
                n_bad_flagged += 1
        else:
            monotone = bool(np.all(np.diff(osc) <= 1e-12))
            small = osc[-1] <= 3 * floor
            worst_un = max(worst_un, osc[-1])
            if not (monotone and small):
                n_bad_unflagged += 1
    checks = [
        (n_flagged >= 3, f"{n_flagged} flagged probe points near the shock"),
        (
            n_bad_unflagged == 0,
            f"unflagged probes: osc decreasing to <= 3x grid floor "
            f"(worst {worst_un:.4f} vs {3 * floor:.4f})",
        ),
        (n_bad_flagged == 0, "flagged probes: max osc within 10% of the jump height"),
    ]
    return _result(4, "continuity outside the jump set", t0, checks)


def criterion_5() -> AcceptanceResult:
    """Ladder monotonicity, collapse on solver fixtures, empirical
    oscillation fit."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260809)
    checks = []

    bad = 0
    for _ in range(100):
        n = int(rng.integers(48, 128))
        vals = rng.uniform(0, 2, n) * rng.uniform(0, 1)
        f = ScalarField(vals, (-2.5,), (5.0 / n,))
        U = float(rng.uniform(0.2, 3.0))
        ladder = truncation_ladder(f, U, K=12)
        if np.any(np.diff(ladder.A) > 1e-12):
            bad += 1
    checks.append((bad == 0, f"A_k nonincreasing on 100 random fixtures ({bad} violations)"))

    flux = get_flux("burgers")
    u0 = field_from_function(lambda x: exact_decay_solution(1, 0.0, x), [1024], [-3.0], [4.0])
    traj = solve(u0, flux, 2.0, [2.0])
    fr = traj.frames[-1]
    ctr = [0.5 * (a + b) for a, b in fr.domain()]
    U = 2.0 * fr.sup_norm_ball(ctr, 1.0)
    ladder = truncation_ladder(fr, U, K=25)
    floor = grid_floor(fr, flux)
    checks.append(
        (ladder.A[-1] <= floor, f"solver fixture: A_25 = {ladder.A[-1]:.2e} <= grid floor {floor:.2e}")
    )

    library = []
    for shift in np.linspace(-0.5, 0.5, 10):
        sh = field_from_function(
            lambda x: exact_decay_solution(1, 2.0, x - shift), [1024], [-3.0], [4.0]
        )
        library.append(solve(sh, flux, 1.0, [1.0]).frames[-1])
        trunc = np.clip(library[-1].values - 0.1, 0.0, None)
        library.append(library[-1].with_values(trunc))
    fit = oscillation_bound_check(library, np.linspace(0.05, 1.0, 20))
    checks.append(
        (fit.gamma >= 0.2 and np.isfinite(fit.C),
         f"20-field library: gamma = {fit.gamma:.2f} with C = {fit.C:.3g}")
    )
    return _result(5, "De Giorgi ladder and oscillation fit", t0, checks)


def criterion_6() -> AcceptanceResult:
    """Maximum principle, L1 contraction, entropy residuals, max of two
    solutions."""
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    rng = np.random.default_rng(1234)
    n = 256
    checks = []

    def random_field():
        kind = rng.integers(0, 3)
        x = np.linspace(-1, 1, n)
        if kind == 0:
            edges = np.sort(rng.uniform(-1, 1, 6))
            vals = np.zeros(n)
            levels = rng.uniform(-0.9, 0.9, 7)
            vals[:] = levels[0]
            for e, lv in zip(edges, levels[1:]):
                vals[x >= e] = lv
        elif kind == 1:
            vals = rng.uniform(-0.9, 0.9) + 0.5 * np.sin(
                rng.integers(1, 4) * np.pi * x + rng.uniform(0, 2 * np.pi)
            ) * rng.uniform(0, 0.5)
        else:
            vals = rng.uniform(-0.9, 0.9, n)
        return ScalarField(np.clip(vals, -1, 1), (-1.0,), (2.0 / n,))

    max_viol = 0.0
    contr_viol = 0.0
    for _ in range(50):
        u = random_field()
        v = random_field()
        dt = 0.9 * min(cfl_dt(u, flux, 0.45), cfl_dt(v, flux, 0.45))
        d0 = np.abs(u.values - v.values).sum() * u.cell_volume
        for _ in range(5):
            lo, hi = u.bounds
            un = step(u, flux, dt)
            max_viol = max(max_viol, un.values.max() - hi, lo - un.values.min())
            vn = step(v, flux, dt)
            d1 = np.abs(un.values - vn.values).sum() * u.cell_volume
            contr_viol = max(contr_viol, d1 - d0)
            u, v, d0 = un, vn, d1
    checks.append((max_viol <= 1e-12, f"maximum principle: worst excursion {max_viol:.2e}"))
    checks.append((contr_viol <= 1e-12, f"L1 contraction: worst growth {contr_viol:.2e}"))

    u0 = field_from_function(lambda x: np.where(x < 0, 1.0, 0.0), [512], [-0.5], [1.5])
    ts = solve(u0, flux, 0.5, record="steps")
    levels = default_levels(0.0, 1.0, 16)
    rep = entropy_residual_report(ts.frames, flux, levels)
    tol = residual_tolerance(ts.frames, flux)
    checks.append(
        (rep.max_residual <= tol,
         f"Kruzhkov residuals on 16 levels: max {rep.max_residual:.2e} <= tol {tol:.2e}")
    )

    ua = field_from_function(lambda x: np.where(x < -0.2, 0.8, 0.1), [512], [-1.0], [1.0])
    ub = field_from_function(lambda x: 0.45 + 0.35 * np.sin(np.pi * x), [512], [-1.0], [1.0])
    dt = 0.9 * min(cfl_dt(ua, flux, 0.45), cfl_dt(ub, flux, 0.45))
    fa, fb = [ua], [ub]
    for _ in range(200):
        fa.append(step(fa[-1], flux, dt))
        fb.append(step(fb[-1], flux, dt))
    w_frames = [a.with_values(np.maximum(a.values, b.values)) for a, b in zip(fa, fb)]
    repw = entropy_residual_report(w_frames, flux, levels, family="plus")
    tolw = residual_tolerance(w_frames, flux)
    checks.append(
        (repw.positive_mass <= tolw,
         f"max of two solutions: subsolution residual mass {repw.positive_mass:.2e} <= {tolw:.2e}")
    )
    elapsed = time.perf_counter() - t0
    checks.append((elapsed < 120.0, f"runtime {elapsed:.1f}s < 120s"))
    return _result(6, "solver entropy/property suite", t0, checks)


def criterion_7() -> AcceptanceResult:
    """Backward characteristics straight and constant on the rarefaction;
    cone principle everywhere."""
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    k = 64
    u0 = field_from_function(lambda x: np.clip(x, 0.0, 1.0), [1024], [-1.0], [3.0], time=1.0)
    traj = solve(u0, flux, 2.0, 1.0 + np.arange(k + 1) / k)
    dx = traj.grid.spacing[0]
    floor = grid_floor(traj.grid, flux)
    checks = []
    for v0 in (0.25, 0.5, 0.75):
        poly = backward_characteristic(traj, flux, v0 * 2.0, v0, k)
        bound = poly.max_speed / k + 3 * dx
        dev = poly.chord_deviation()
        checks.append((dev <= bound, f"v0={v0}: chord deviation {dev:.4f} <= M/k+3dx = {bound:.4f}"))
        uvals = np.array(
            [float(traj.frame_at(t).interp(np.array([x]))) for t, x in zip(poly.times, poly.points)]
        )
        var = float(np.abs(uvals - v0).max())
        checks.append((var <= 3 * floor, f"v0={v0}: |u - v0| along polygon {var:.4f} <= {3 * floor:.4f}"))

    fixtures = {"rarefaction": traj}
    uc = field_from_function(lambda x: np.full_like(x, 0.4), [256], [-1.0], [1.0])
    fixtures["constant"] = solve(uc, flux, 0.5, [0.0, 0.25, 0.5])
    us = field_from_function(lambda x: np.where(x < 0, 1.0, 0.0), [1024], [-1.0], [2.0])
    fixtures["shock"] = solve(us, flux, 1.0, [0.0, 0.5, 1.0])
    for name, tr in fixtures.items():
        tt = tr.times[-1]
        tau = tt - tr.times[-2]
        xs = np.linspace(*tr.grid.domain()[0], 9)[2:-2]
        worst = -np.inf
        tol = None
        for x in xs:
            try:
                cc = cone_max_principle_check(tr, flux, x, tt, tau)
            except Exception:
                continue
            worst = max(worst, cc.upper_excess, cc.lower_excess)
            tol = cc.tol
        checks.append((worst <= tol, f"{name}: cone excess {worst:.2e} <= tol {tol:.2e}"))
    return _result(7, "characteristics straightness and cones", t0, checks)


def criterion_8() -> AcceptanceResult:
    """Degeneracy exponents, spanning order, nondegeneracy constant."""
    t0 = time.perf_counter()
    checks = []
    for m in (1, 2, 3):
        flux = get_flux(f"power:{m}")
        rep = estimate_alpha(flux, xi_samples=61, v_samples=50_000)
        checks.append(
            (abs(rep.alpha_hat - 1 / m) <= 0.05,
             f"power:{m}: alpha {rep.alpha_hat:.3f} vs 1/m = {1 / m:.3f}")
        )
        got = hormander_order(flux)
        checks.append((got == m, f"power:{m}: spanning order {got} == {m}"))

    # independent brute-force oracle: dense polar grid over (v, xi)
    flux = get_flux("burgers")
    v = np.linspace(-1, 1, 3001)
    th = np.pi * (np.arange(6000) + 0.5) / 6000
    xi = np.stack([np.cos(th), np.sin(th)], axis=-1)
    rows = np.stack([flux.a(v, j) for j in (0, 1)], axis=1)
    oracle = float(np.abs(np.einsum("vjd,xd->vjx", rows, xi)).max(axis=1).min())
    got = nondegeneracy_constant(flux)
    checks.append(
        (abs(got - oracle) <= 0.01,
         f"c0(burgers space-time) {got:.4f} vs brute-force oracle {oracle:.4f}")
    )
    return _result(8, "flux nonlinearity classification", t0, checks)


def criterion_9() -> AcceptanceResult:
    """Rescaled solutions pass the transformed-flux entropy residual test.

    Row spacing must resolve the rescaled time scale (speeds grow like
    1/lambda), hence the dense snapshot grid.
    """
    t0 = time.perf_counter()
    flux = get_flux("burgers")
    u0 = field_from_function(lambda x: 0.5 * (1 + np.tanh(x / 0.1)), [1024], [-1.0], [2.0])
    traj = solve(u0, flux, 1.0, np.linspace(0.0, 1.0, 1025))
    st = traj.spacetime_field()
    checks = []
    for lam in (0.25, 0.5, 1.0):
        smap = build_scaling(flux, lam)
        scaled = apply_scaling(st, 1.0, smap)
        tflux = rescale_flux(flux, smap)
        frames = spacetime_frames(scaled)
        lo = min(f.bounds[0] for f in frames)
        hi = max(f.bounds[1] for f in frames)
        rep = entropy_residual_report(frames, tflux, default_levels(lo, hi, 16))
        tol = residual_tolerance(frames, tflux)
        checks.append(
            (rep.positive_mass <= tol,
             f"lambda={lam}: residual mass {rep.positive_mass:.3e} <= tol {tol:.3e}")
        )
    return _result(9, "scaling invariance of the entropy test", t0, checks)


_CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_acceptance(ids=None) -> list[AcceptanceResult]:
    ids = sorted(ids) if ids else sorted(_CRITERIA)
    return [_CRITERIA[i]() for i in ids]
