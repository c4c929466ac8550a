"""Acceptance gate: one test per criterion, at the stated tolerances.

Each test prints a single `criterion NN <name>: PASS/FAIL` line (visible with
-r A or -s) and enforces its wall-clock budget.  Tolerances and sizes are the
contract values, not tuned numbers; reduced-size variants of the same checks
live in the per-module suites.
"""

import math
import time

import numpy as np
import pytest

from rfmfs.asymptotics import laplace_ratio, predicted_shift, track_maximizer
from rfmfs.fields import (
    DistributionSpec,
    FieldStats,
    StatsSchedule,
    field_stats,
    sample_field,
    schedule_stats,
)
from rfmfs.gibbs import (
    Observable,
    gibbs_expectation,
    log_partition,
    magnetization_batch,
    micro_full_vector,
    weight_plus,
)
from rfmfs.metastate import (
    arcsine_experiment,
    aw_experiment,
    csd_search,
    fingerprint_limit_state,
)
from rfmfs.numerics import DiskPoint, RngStream
from rfmfs.tilting import (
    ModelParams,
    Phase,
    beta_critical,
    classify_phase,
    grad_psi,
    hess_psi,
    maximizers,
    psi,
)

MS = ModelParams(1.0, 2.0)
M_STD = (0.0, 1.0)
PSI_PLUS = 0.40342640972002736
FOUR_PI = 12.566370614359172
GAUSS = DistributionSpec.gaussian(0.0, 1.0)
RAD = DistributionSpec.rademacher()


def _report(num: int, name: str, ok: bool, detail: str, t0: float,
            budget: float):
    elapsed = time.perf_counter() - t0
    in_time = elapsed <= budget
    status = "PASS" if (ok and in_time) else "FAIL"
    print(f"criterion {num:02d} {name}: {status} "
          f"({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")
    assert ok, f"criterion {num:02d} {name}: {detail}"
    assert in_time, f"criterion {num:02d} {name}: {elapsed:.1f}s > {budget}s"


def test_c01_maximizer_closed_forms():
    t0 = time.perf_counter()
    mset = maximizers(MS, M_STD)
    closed = (abs(mset.z_plus.x - 0.5) <= 1e-9
              and abs(mset.z_plus.y - 0.5) <= 1e-9
              and abs(mset.z_minus.x + 0.5) <= 1e-9
              and abs(mset.z_minus.y - 0.5) <= 1e-9)
    # independent 2000 x 2000 grid maximization of the tilt
    step = 2.0 / 2001
    xs = np.linspace(-1.0 + step, 1.0 - step, 2000)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    R2 = X * X + Y * Y
    vals = np.where(R2 < 1.0,
                    X * X + Y + 0.5 * np.log1p(-np.minimum(R2, 1.0 - 1e-15)),
                    -np.inf)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    gx, gy = xs[i], xs[j]
    on_grid = abs(abs(gx) - 0.5) <= step and abs(gy - 0.5) <= step
    _report(1, "maximizer closed forms", closed and on_grid,
            f"z+=({mset.z_plus.x:.12f},{mset.z_plus.y:.12f}), "
            f"grid argmax ({gx:.4f},{gy:.4f})", t0, 5.0)


def test_c02_phase_table():
    t0 = time.perf_counter()
    points = 0
    ok = True
    # row 1: nonzero mean field is ordered ferromagnetic at any temperature
    for beta in np.linspace(0.1, 3.0, 20):
        ok &= classify_phase(ModelParams(beta, 2.0),
                             DistributionSpec.gaussian(0.3, 1.0)) \
            is Phase.ORDERED_FERROMAGNET
        points += 1
    # row 2: field sd at or above the coupling is paramagnetic
    for beta in np.linspace(0.1, 50.0, 20):
        ok &= classify_phase(ModelParams(beta, 2.0),
                             DistributionSpec.gaussian(0.0, 2.5)) \
            is Phase.ORDERED_PARAMAGNET
        points += 1
    # rows 3-4: centered field below the coupling flips at beta_c
    betas = np.linspace(0.1, 2.0, 60)
    kinds = []
    for beta in betas:
        phase = classify_phase(ModelParams(beta, 2.0), RAD)
        two = maximizers(ModelParams(beta, 2.0), (0.0, 1.0)).is_two
        ok &= (phase is Phase.SPIN_GLASS) == two
        kinds.append(two)
        points += 1
    flips = np.nonzero(np.diff(np.asarray(kinds)))[0]
    bc = beta_critical(2.0, 1.0)
    bstep = betas[1] - betas[0]
    ok &= flips.size == 1 and abs(betas[flips[0] + 1] - bc) <= bstep
    # the same flip along the coupling axis at fixed temperature
    js = np.linspace(1.05, 4.0, 40)
    kinds_j = [maximizers(ModelParams(1.0, J), (0.0, 1.0)).is_two for J in js]
    flips_j = np.nonzero(np.diff(np.asarray(kinds_j)))[0]
    golden = (1.0 + math.sqrt(5.0)) / 2.0  # 1 = J/(J^2-1) at J = golden ratio
    jstep = js[1] - js[0]
    ok &= flips_j.size == 1 and abs(js[flips_j[0] + 1] - golden) <= jstep
    points += len(js)
    _report(2, "phase table", ok and points >= 100,
            f"{points} grid points, beta flip at "
            f"{betas[flips[0] + 1] if flips.size else -1:.3f} vs {bc:.4f}",
            t0, 10.0)


def test_c03_free_energy_density():
    t0 = time.perf_counter()
    errs = [abs(log_partition(n, MS, FieldStats(0.0, 1.0, n)) / n - PSI_PLUS)
            for n in (250, 1000, 4000)]
    ok = errs[2] <= 0.01 and errs[0] > errs[1] > errs[2]
    _report(3, "free energy density", ok,
            f"errors {errs[0]:.5f} > {errs[1]:.5f} > {errs[2]:.5f}", t0, 30.0)


def test_c04_free_energy_self_averaging():
    t0 = time.perf_counter()
    rng = RngStream(404)
    dens250 = np.empty(200)
    dens4000 = np.empty(200)
    for r in range(200):
        f = sample_field(GAUSS, 4000, rng.substream(r))
        dens250[r] = log_partition(250, MS, field_stats(f, 250)) / 250
        dens4000[r] = log_partition(4000, MS, field_stats(f, 4000)) / 4000
    sd250 = float(np.std(dens250, ddof=1))
    sd4000 = float(np.std(dens4000, ddof=1))
    _report(4, "self-averaging", sd4000 <= sd250 / 3.0,
            f"sd(250)={sd250:.2e}, sd(4000)={sd4000:.2e}", t0, 300.0)


def test_c05_weight_regimes():
    t0 = time.perf_counter()
    n = 10000
    ws = {}
    for delta in (0.5, 1.0, 2.0):
        stats = schedule_stats(StatsSchedule(M_STD, (1.0, 0.0), delta), n)
        ws[delta] = weight_plus(n, MS, stats).w_plus
    ok = (ws[0.5] >= 0.99
          and abs(ws[1.0] - 0.73106) <= 0.02
          and abs(ws[2.0] - 0.5) <= 0.05)
    _report(5, "weight regimes", ok,
            f"W(0.5)={ws[0.5]:.4f}, W(1)={ws[1.0]:.5f}, W(2)={ws[2.0]:.5f}",
            t0, 60.0)


def test_c06_laplace_ratio():
    t0 = time.perf_counter()
    z = maximizers(MS, M_STD).z_plus
    ratio, limit = laplace_ratio(4000, MS, FieldStats(0.0, 1.0, 4000), z,
                                 "half_plus")
    ok = abs(ratio - FOUR_PI) <= 0.05 * FOUR_PI and \
        abs(limit - FOUR_PI) <= 1e-9
    _report(6, "laplace ratio", ok,
            f"ratio={ratio:.5f} vs 4pi={FOUR_PI:.5f}", t0, 60.0)


def test_c07_shift_law():
    # schedule direction (0, 1) perturbs the field sd only, which keeps both
    # maximizers and the symmetric Hessian; perturbing m_par instead drives
    # the tracked branch toward its fold and the quadratic regime needs far
    # larger n to show the clean first-order rate
    t0 = time.perf_counter()
    z = maximizers(MS, M_STD).z_plus
    sched = StatsSchedule(M_STD, (0.0, 1.0), 0.5)

    def ratio(n):
        stats = schedule_stats(sched, n)
        tr = track_maximizer(n, MS, stats, z)
        px, py = predicted_shift(stats, M_STD, z, MS)
        res = math.hypot(tr.z_n.x - z.x - px, tr.z_n.y - z.y - py)
        dev = math.hypot(stats.m_par - 0.0, stats.m_perp - 1.0)
        return res / dev

    r100, r10000 = ratio(100), ratio(10000)
    _report(7, "shift law", r10000 <= r100 / 10.0,
            f"ratio(1e2)={r100:.2e}, ratio(1e4)={r10000:.2e}", t0, 10.0)


def test_c08_spherical_constraints():
    t0 = time.perf_counter()
    n = 500
    field = sample_field(GAUSS, n, RngStream(88))
    z = DiskPoint(0.3, 0.4)
    worst_r2 = 0.0
    worst_mean = 0.0
    rng = RngStream(888)
    for i in range(1000):
        phi = micro_full_vector(z, field, n, rng.substream(i))
        worst_r2 = max(worst_r2, abs(float((phi * phi).sum()) / n - 1.0))
        worst_mean = max(worst_mean,
                         abs(float(phi.sum()) / (n * z.x) - 1.0))
    ok = worst_r2 <= 1e-9 and worst_mean <= 1e-9
    _report(8, "spherical constraints", ok,
            f"max |sum phi^2/n - 1|={worst_r2:.1e}, "
            f"max |sum phi/(nx) - 1|={worst_mean:.1e}", t0, 10.0)


def test_c09_gibbs_limit_convergence():
    t0 = time.perf_counter()
    ps = ModelParams(0.5, 2.0)
    n = 10000
    field = sample_field(RAD, n, RngStream(909))
    obs = Observable((1,), (1.0,))
    est, se = gibbs_expectation(obs, n, ps, field, 100000, RngStream(910))
    z_star = maximizers(ps, M_STD).z_star
    closed = fingerprint_limit_state(z_star, field, M_STD, (obs,)).values[0]
    ok = abs(est - closed) <= 3.0 * se
    _report(9, "gibbs-to-limit convergence", ok,
            f"est={est:.5f}, closed={closed:.5f}, se={se:.5f}", t0, 120.0)


def test_c10_aw_metastate_split():
    t0 = time.perf_counter()
    fracs = {}
    for label, spec in (("gaussian", GAUSS), ("rademacher", RAD)):
        s = aw_experiment(spec, 5000, 2000, MS, RngStream(606), threads=2)
        fracs[label] = s.fraction_plus
    ok = all(0.466 <= v <= 0.534 for v in fracs.values())
    _report(10, "aw replica split", ok,
            f"gaussian={fracs['gaussian']:.4f}, "
            f"rademacher={fracs['rademacher']:.4f}", t0, 600.0)


def test_c11_arcsine_law():
    t0 = time.perf_counter()
    ks = arcsine_experiment(RAD, 10000, 2000, RngStream(7), threads=2)
    _report(11, "arcsine law", ks <= 0.05, f"ks={ks:.4f}", t0, 120.0)


def test_c12_magnetization_replica_variance():
    t0 = time.perf_counter()
    R, n = 2000, 4000
    gen = RngStream(1212).generator()
    draws = gen.normal(size=(R, n))
    mp = draws.mean(axis=1)
    mq = draws.std(axis=1)
    mags = magnetization_batch(n, MS, mp, mq)
    var = float(np.var(mags, ddof=1))
    ok = abs(var - 0.25) <= 0.05
    _report(12, "magnetization replica variance", ok,
            f"var={var:.4f} vs (x+)^2=0.25", t0, 600.0)


def test_c13_csd_search_reaches_targets():
    # the search parameters are not pinned by the criterion; beta = 0.75
    # spaces the Rademacher weight lattice finely enough that every target
    # band contains walk-reachable values (see the weights ledger note)
    t0 = time.perf_counter()
    params = ModelParams(0.75, 2.0)
    mset = maximizers(params, M_STD)
    n_max = 1000000
    rates = {}
    for lam in (0.2, 0.5, 0.8):
        hits = 0
        for seed in range(20):
            f = sample_field(RAD, n_max, RngStream(1000 + seed))
            if csd_search(f, lam, params, mset, n_max, 0.05) is not None:
                hits += 1
        rates[lam] = hits / 20.0
    ok = all(v >= 0.9 for v in rates.values())
    _report(13, "csd target search", ok,
            f"hit rates {rates[0.2]:.2f}/{rates[0.5]:.2f}/{rates[0.8]:.2f} "
            f"at lambda 0.2/0.5/0.8", t0, 600.0)


def test_c14_gradient_hessian_fd():
    t0 = time.perf_counter()
    gen = RngStream(1414).generator()
    worst_g = 0.0
    worst_h = 0.0
    h = 1e-6
    for _ in range(1000):
        r = 0.9 * math.sqrt(gen.uniform(0.0, 1.0))
        th = gen.uniform(0.0, 2.0 * math.pi)
        x, y = r * math.cos(th), r * math.sin(th)
        m = (gen.uniform(-0.5, 0.5), gen.uniform(0.5, 1.5))
        g = np.asarray(grad_psi((x, y), MS, m))
        fd_g = np.array([
            (psi((x + h, y), MS, m) - psi((x - h, y), MS, m)) / (2 * h),
            (psi((x, y + h), MS, m) - psi((x, y - h), MS, m)) / (2 * h),
        ])
        worst_g = max(worst_g,
                      float(np.max(np.abs(g - fd_g)) / max(1.0, np.max(np.abs(g)))))
        H = hess_psi((x, y), MS, m)
        fd_h = np.empty((2, 2))
        for k, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
            gp = np.asarray(grad_psi((x + dx, y + dy), MS, m))
            gm = np.asarray(grad_psi((x - dx, y - dy), MS, m))
            fd_h[:, k] = (gp - gm) / (2 * h)
        worst_h = max(worst_h,
                      float(np.max(np.abs(H - fd_h)) / max(1.0, np.max(np.abs(H)))))
    ok = worst_g <= 1e-5 and worst_h <= 1e-5
    _report(14, "gradient and hessian", ok,
            f"max rel err grad={worst_g:.1e}, hess={worst_h:.1e}", t0, 1.0)
