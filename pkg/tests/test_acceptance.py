"""End-to-end checks at desk scale: window 12 x 12 km^2, lam_b = 0.5 km^-2,
>= 1e5 counted requests per configuration. Each test prints one line with the
measured quantity next to its tolerance."""

import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from edgecache.analysis import (
    AnalyticModelParams,
    multi_lru_all_hit,
    multi_lru_one_hit,
    single_lru_hit,
    solve_characteristic_time,
    two_cache_all_hit,
    two_cache_one_hit,
)
from edgecache.cache_core import CacheState, PolicyKind, run_single_lru
from edgecache.geometry import estimate_coverage_profile, poisson_coverage_pmf
from edgecache.placement import irm_upper_bound, temporal_pop_bound
from edgecache.sim import (
    Scenario,
    coverage_profile_for,
    realize_field_and_stream,
    run_experiment,
    run_realization,
    run_stream_policies,
)
from edgecache.traffic import (
    DAY_SECONDS,
    SnmLaw,
    make_catalogue,
    sample_irm_stream,
    sample_snm_stream,
)

SINGLE = PolicyKind("single_lru")
ONE = PolicyKind("multi_lru_one")
ALL = PolicyKind("multi_lru_all")

LAM_U = 0.023
VOR_AREA = 2.0  # 1 / lam_b at the desk-scale intensity 0.5


def r_for(nu: float) -> float:
    """Coverage radius with mean coverage number nu under lam_b = 0.5."""
    return math.sqrt(nu / (0.5 * math.pi))


def t_char(f: int, gamma: float, k: int) -> float:
    cat = make_catalogue(f, gamma)
    return solve_characteristic_time(cat.pmf * LAM_U * VOR_AREA, k)


def rows_by_policy(rep):
    return {row.policy: row for row in rep.rows}


def analytic_pair(f: int, gamma: float, k: int, r_b: float):
    """(multi-LRU-One, multi-LRU-All) closed forms at the desk-scale PPP."""
    cat = make_catalogue(f, gamma)
    profile = estimate_coverage_profile("ppp", 0.5, (12.0, 12.0), r_b)
    params = AnalyticModelParams(
        catalogue=cat, lam_u=LAM_U, k=k, vor_area=VOR_AREA,
        cov_area=math.pi * r_b * r_b, profile=profile,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        one = multi_lru_one_hit(params).total_hit
    return one, multi_lru_all_hit(params).total_hit


def verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


# ---------------------------------------------------------------------------
# Shared simulation batches


@pytest.fixture(scope="module")
def two_cache_runs():
    sc = Scenario(
        placement="two_cache", window=(2.0, 2.0), r_b=1.45, lam_u=0.25,
        f=1000, gamma=0.78, alpha=None, k=50, policies=(ONE, ALL),
        duration=37_500.0, warmup=0.3, realizations=4, base_seed=53,
    )
    return sc, rows_by_policy(run_experiment(sc, workers=1))


@pytest.fixture(scope="module")
def grid_f2000():
    """Radius/cache-ratio grid shared by the One and All fit checks."""
    out = {}
    for alpha in (0.05, 0.2):
        k = int(round(alpha * 2000))
        base = Scenario(
            f=2000, gamma=0.78, alpha=None, k=k, policies=(ONE, ALL),
            duration=4.0 * t_char(2000, 0.78, k), warmup=0.3,
            realizations=10, base_seed=17,
        )
        for r_b in (0.6, 1.0, 1.4, 1.8, 2.25):
            sc = replace(base, r_b=r_b)
            out[(alpha, r_b)] = (sc, rows_by_policy(run_experiment(sc, workers=1)))
    return out


@pytest.fixture(scope="module")
def ppp_k100():
    """PPP runs at 1% cache ratio over mean coverage 2..6."""
    base = Scenario(
        f=10_000, gamma=0.78, alpha=None, k=100,
        policies=(SINGLE, ONE, ALL),
        duration=4.0 * t_char(10_000, 0.78, 100), warmup=0.3,
        realizations=14, base_seed=23,
    )
    out = {}
    for nu in (2, 3, 4, 5, 6):
        sc = replace(base, r_b=r_for(nu))
        out[nu] = (sc, rows_by_policy(run_experiment(sc, workers=1)))
    return out


@pytest.fixture(scope="module")
def lattice_k100():
    side = 9.0 / math.sqrt(0.5)  # commensurate with the 1/sqrt(0.5) spacing
    base = Scenario(
        placement="lattice", window=(side, side), f=10_000, gamma=0.78,
        alpha=None, k=100, policies=(SINGLE, ONE),
        duration=4.0 * t_char(10_000, 0.78, 100), warmup=0.3,
        realizations=10, base_seed=23,
    )
    out = {}
    for nu in (2, 3):
        sc = replace(base, r_b=r_for(nu))
        out[nu] = (sc, rows_by_policy(run_experiment(sc, workers=1)))
    return out


@pytest.fixture(scope="module")
def all_policy_runs():
    """Every implemented policy side by side, for the bound checks."""
    base = Scenario(
        f=10_000, gamma=0.78, alpha=None, k=100,
        policies=(SINGLE, ONE, ALL, PolicyKind("lfu"), PolicyKind("mpc"),
                  PolicyKind("gfi"), PolicyKind("pbp")),
        duration=4.0 * t_char(10_000, 0.78, 100), warmup=0.3,
        realizations=6, base_seed=31,
    )
    out = {}
    for nu in (2, 3):
        sc = replace(base, r_b=r_for(nu))
        out[nu] = (sc, rows_by_policy(run_experiment(sc, workers=1)))
    return out


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_01_two_cache_all_exact(two_cache_runs, report):
    sc, rows = two_cache_runs
    ref = two_cache_all_hit(make_catalogue(1000, 0.78).pmf, 0.25, 4.0, 50)
    assert abs(ref.total_hit - 0.2444938162954326) <= 1e-9
    diff = abs(rows["multi_lru_all"].hit - ref.total_hit)
    ok = diff <= 0.01 and rows["multi_lru_all"].requests >= 100_000
    report(f"criterion 01 {verdict(ok)}: two-cache multi-LRU-All vs exact "
           f"closed form |diff| = {diff:.4f} (tol 0.01, "
           f"{rows['multi_lru_all'].requests} counted requests)")
    assert ok


def test_criterion_02_two_cache_one_adequate(two_cache_runs, report):
    sc, rows = two_cache_runs
    ref = two_cache_one_hit(make_catalogue(1000, 0.78).pmf, 0.25, 2.0, 50)
    assert abs(ref.total_hit - 0.3426088425827858) <= 1e-9
    diff = abs(rows["multi_lru_one"].hit - ref.total_hit)
    ok = diff <= 0.05
    report(f"criterion 02 {verdict(ok)}: two-cache multi-LRU-One vs "
           f"independence form |diff| = {diff:.4f} (tol 0.05)")
    assert ok


def test_criterion_03_coverage_law(report):
    nu = 0.5 * math.pi * 1.13**2
    emp = estimate_coverage_profile(
        "ppp", 0.5, (12.0, 12.0), 1.13, n_samples=100_000, rng_seed=101,
        method="monte_carlo",
    )
    tv = 0.5 * float(np.abs(emp.pm - poisson_coverage_pmf(nu)).sum())
    emp16 = estimate_coverage_profile(
        "ppp", 0.5, (12.0, 12.0), 1.60, n_samples=100_000, rng_seed=102,
        method="monte_carlo",
    )
    d1 = abs(emp.n_bs - 2.00)
    d2 = abs(emp16.n_bs - 4.00)
    ok = tv <= 0.01 and d1 <= 0.05 and d2 <= 0.08
    report(f"criterion 03 {verdict(ok)}: coverage-number law TV = {tv:.4f} "
           f"(tol 0.01); mean coverage 1.13 km -> {emp.n_bs:.3f} "
           f"(2.00 +/- 0.05), 1.60 km -> {emp16.n_bs:.3f} (4.00 +/- 0.08)")
    assert ok


def test_criterion_04_single_cache_fit(report):
    worst = 0.0
    duration, warm_t = 150_000.0, 45_000.0
    for gi, gamma in enumerate((0.6, 0.78, 1.0)):
        cat = make_catalogue(1000, gamma)
        for ki, k in enumerate((10, 50, 200)):
            seed = np.random.SeedSequence(29, spawn_key=(gi, ki))
            stream = sample_irm_stream(1.0, (1.0, 1.0), duration, cat, seed)
            n = len(stream.obj)
            hits, counted = run_single_lru(
                [CacheState(k)], stream.obj.tolist(), [0] * n,
                list(range(n + 1)),
                int(np.searchsorted(stream.t, warm_t)),
            )
            ref = single_lru_hit(cat, 1.0, 1.0, k).total_hit
            worst = max(worst, abs(hits / counted - ref))
    ok = worst <= 0.02
    report(f"criterion 04 {verdict(ok)}: single-cache fit over 9 "
           f"(gamma, K) points, max |sim - analytic| = {worst:.4f} (tol 0.02)")
    assert ok


def test_criterion_05_one_fit_full_model(grid_f2000, report):
    worst = 0.0
    for (alpha, r_b), (sc, rows) in grid_f2000.items():
        one, _ = analytic_pair(2000, 0.78, sc.k_effective, r_b)
        worst = max(worst, abs(rows["multi_lru_one"].hit - one))
    ok = worst <= 0.03
    report(f"criterion 05 {verdict(ok)}: multi-LRU-One vs independence "
           f"form over 10 grid points, max |diff| = {worst:.4f} (tol 0.03)")
    assert ok


def test_criterion_06_all_fit_and_divergence(grid_f2000, report):
    worst = 0.0
    signs = {}
    for (alpha, r_b), (sc, rows) in grid_f2000.items():
        _, ref = analytic_pair(2000, 0.78, sc.k_effective, r_b)
        d = rows["multi_lru_all"].hit - ref
        if r_b <= 1.6:
            worst = max(worst, abs(d))
        else:
            signs.setdefault(alpha, []).append(d)
    consistent = all(
        all(x > 0 for x in ds) or all(x < 0 for x in ds)
        for ds in signs.values()
    )
    ok = worst <= 0.05 and consistent
    report(f"criterion 06 {verdict(ok)}: multi-LRU-All vs similarity form, "
           f"max |diff| = {worst:.4f} for R_b <= 1.6 (tol 0.05); divergence "
           f"sign consistent past 1.6 = {consistent}")
    assert ok


def test_criterion_07_policy_ordering(ppp_k100, report):
    ok = True
    min_margin = math.inf
    for nu, (sc, rows) in ppp_k100.items():
        one, al, sg = rows["multi_lru_one"], rows["multi_lru_all"], rows["single_lru"]
        margin = (one.hit - al.hit) - (one.ci95 + al.ci95)
        min_margin = min(min_margin, margin)
        ok &= margin > 0 and one.hit > sg.hit and al.hit > sg.hit
    report(f"criterion 07 {verdict(ok)}: One > All beyond summed CIs at mean "
           f"coverage 2..6 (worst margin {min_margin:+.4f}); both above "
           f"single-LRU")
    assert ok


def test_criterion_08_relative_gains(ppp_k100, lattice_k100, report):
    def gain(rows):
        return (rows["multi_lru_one"].hit - rows["single_lru"].hit) \
            / rows["single_lru"].hit

    g = {
        ("ppp", 2): gain(ppp_k100[2][1]),
        ("ppp", 3): gain(ppp_k100[3][1]),
        ("lattice", 2): gain(lattice_k100[2][1]),
        ("lattice", 3): gain(lattice_k100[3][1]),
    }
    bands = {
        ("ppp", 2): (0.25, 0.45),
        ("ppp", 3): (0.45, 0.75),
        ("lattice", 2): (0.30, 0.55),
        ("lattice", 3): (0.55, 0.85),
    }
    ok = all(bands[key][0] <= g[key] <= bands[key][1] for key in bands)
    pretty = ", ".join(
        f"{name} nu={nu}: {100 * g[(name, nu)]:.1f}%"
        for name, nu in g
    )
    report(f"criterion 08 {verdict(ok)}: One-over-single relative gains "
           f"within bands ({pretty})")
    assert ok


def test_criterion_09_bound_dominance(all_policy_runs, grid_f2000, ppp_k100,
                                      two_cache_runs, report):
    batches = list(all_policy_runs.values()) + list(grid_f2000.values()) \
        + list(ppp_k100.values()) + [two_cache_runs]
    worst_violation = -math.inf
    for sc, rows in batches:
        cat = make_catalogue(sc.f, sc.gamma)
        bound = irm_upper_bound(coverage_profile_for(sc), cat, sc.k_effective)
        for row in rows.values():
            worst_violation = max(worst_violation, row.hit - 3 * row.ci95 - bound)
    gfi_gap = max(
        irm_upper_bound(
            coverage_profile_for(sc), make_catalogue(sc.f, sc.gamma),
            sc.k_effective,
        ) - rows["gfi"].hit
        for sc, rows in all_policy_runs.values()
    )
    ok = worst_violation <= 0 and gfi_gap <= 0.05
    report(f"criterion 09 {verdict(ok)}: placement bound dominates all "
           f"{sum(len(r) for _, r in batches)} policy rows (worst slack "
           f"{worst_violation:+.4f}); greedy placement within {gfi_gap:.4f} "
           f"of the bound (tol 0.05)")
    assert ok


def test_criterion_10_degeneracies(report):
    base = Scenario(
        f=2000, gamma=0.78, alpha=None, k=20, r_b=0.8,
        policies=(SINGLE, ONE, ALL),
        duration=max(4.0 * t_char(2000, 0.78, 20), 4500.0), warmup=0.3,
        realizations=10, base_seed=37,
    )
    rows = rows_by_policy(run_experiment(base, workers=1))
    d_one = abs(rows["multi_lru_one"].hit - rows["single_lru"].hit)
    d_all = abs(rows["multi_lru_all"].hit - rows["single_lru"].hit)

    full = Scenario(
        f=50, gamma=0.78, alpha=None, k=50, r_b=2.0,
        policies=(SINGLE, ONE, ALL, PolicyKind("lfu"), PolicyKind("mpc")),
        duration=40_000.0, warmup=0.3, realizations=4, base_seed=41,
    )
    full_rows = rows_by_policy(run_experiment(full, workers=1))
    min_hit = min(row.hit for row in full_rows.values())
    ok = d_one <= 0.02 and d_all <= 0.02 and min_hit >= 0.99
    report(f"criterion 10 {verdict(ok)}: sparse coverage collapses the "
           f"policies (|One-single| = {d_one:.4f}, |All-single| = {d_all:.4f}, "
           f"tol 0.02); full-catalogue caches reach {min_hit:.4f} (>= 0.99)")
    assert ok


def test_criterion_11_q_monotone(report):
    sc = Scenario(
        f=10_000, gamma=0.78, alpha=None, k=100, r_b=1.13,
        policies=(PolicyKind("q_multi_lru_all", q=0.25),
                  PolicyKind("q_multi_lru_all", q=0.5),
                  PolicyKind("q_multi_lru_all", q=1.0), ALL),
        duration=12.0 * t_char(10_000, 0.78, 100), warmup=0.3,
        realizations=6, base_seed=43,
    )
    per = [run_realization(sc, i) for i in range(sc.realizations)]

    def ratios(p_idx):
        return np.array([h / c for h, c in (per[i][p_idx] for i in range(len(per)))])

    r25, r50, r100 = ratios(0), ratios(1), ratios(2)
    gaps = []
    ok = True
    for lo_label, a, b in (("q=0.25 vs q=0.5", r25, r50),
                           ("q=0.5 vs q=1", r50, r100)):
        d = a - b
        half = 1.96 * d.std(ddof=1) / math.sqrt(len(d))
        gaps.append(f"{lo_label}: {d.mean():+.4f} +/- {half:.4f}")
        ok &= d.mean() - half > 0
    identical = all(per[i][2] == per[i][3] for i in range(len(per)))
    ok &= identical
    report(f"criterion 11 {verdict(ok)}: hit decreases with insertion "
           f"probability beyond paired CIs ({'; '.join(gaps)}); q=1 replays "
           f"bit-identically to multi-LRU-All = {identical}")
    assert ok


def test_criterion_12_gamma_monotone(report):
    hits = {}
    for gamma in (0.4, 0.78, 1.2):
        sc = Scenario(
            f=10_000, gamma=gamma, alpha=None, k=100, r_b=1.13,
            policies=(ONE, ALL),
            duration=4.0 * t_char(10_000, gamma, 100), warmup=0.3,
            realizations=6, base_seed=47,
        )
        rows = rows_by_policy(run_experiment(sc, workers=1))
        hits[gamma] = (rows["multi_lru_one"].hit, rows["multi_lru_all"].hit)
    gammas = sorted(hits)
    ones = [hits[g][0] for g in gammas]
    alls = [hits[g][1] for g in gammas]
    adv = [(o - a) / a for o, a in zip(ones, alls)]
    ok = (
        all(b > a for a, b in zip(ones, ones[1:]))
        and all(b > a for a, b in zip(alls, alls[1:]))
        and all(b < a for a, b in zip(adv, adv[1:]))
    )
    report(f"criterion 12 {verdict(ok)}: hits rise with popularity skew "
           f"(One {ones[0]:.3f}->{ones[2]:.3f}, All {alls[0]:.3f}->"
           f"{alls[2]:.3f}) while the relative One advantage falls "
           f"({adv[0]:.3f}->{adv[2]:.3f})")
    assert ok


def test_criterion_13a_snm_stream_invariants(report):
    law = SnmLaw(volume_shape=3.0, mean_lifespan_sec=0.5 * DAY_SECONDS)
    duration = 40.0 * DAY_SECONDS
    stream, contents = sample_snm_stream(
        200.0, law, (12.0, 12.0), duration, 7, return_contents=True
    )
    births = np.array([c.birth_time for c in contents])
    spans = np.array([c.lifespan for c in contents])
    idx = stream.obj - 1
    in_pulse = (
        (stream.t >= births[idx] - 1e-9)
        & (stream.t <= births[idx] + spans[idx] + 1e-9)
    ).all()
    expected = 200.0 * 40.0 * law.volume_min * law.volume_shape \
        / (law.volume_shape - 1.0)
    rel = abs(len(stream.t) - expected) / expected
    ok = bool(in_pulse) and rel <= 0.10
    report(f"criterion 13a {verdict(ok)}: every request inside its content "
           f"pulse = {bool(in_pulse)}; volume mass within {100 * rel:.1f}% of "
           f"the stationary mean (tol 10%)")
    assert ok


def test_criterion_13b_temporal_bound_dominates(report):
    sc = Scenario(
        traffic="snm", lam_c_per_day=1000.0, r_b=1.13, f=10_000,
        alpha=None, k=100, policies=(PolicyKind("mpc"),),
        duration=10.0 * DAY_SECONDS, warmup=0.2, realizations=3, base_seed=59,
    )
    profile = coverage_profile_for(sc)
    margins = []
    ok = True
    for i in range(sc.realizations):
        field_, stream = realize_field_and_stream(sc, i)
        (hits, counted), = run_stream_policies(sc, field_, stream)
        bound = temporal_pop_bound(
            stream, profile, sc.k_effective,
            dt_up=sc.pop_dt_up_days * DAY_SECONDS,
            dt_es=sc.pop_dt_es_days * DAY_SECONDS,
        )
        margins.append(bound - hits / counted)
        ok &= bound >= hits / counted
    report(f"criterion 13b {verdict(ok)}: popularity bound dominates the "
           f"windowed placement on each stream (margins "
           f"{', '.join(f'{m:+.4f}' for m in margins)})")
    assert ok


def test_criterion_13c_short_lifespans_favor_all(report):
    sc = Scenario(
        traffic="snm", lam_c_per_day=1000.0,
        snm_law=SnmLaw(mean_lifespan_sec=0.5 * DAY_SECONDS),
        r_b=r_for(3), f=10_000, alpha=None, k=400, policies=(ONE, ALL),
        duration=6.0 * DAY_SECONDS, warmup=0.3, realizations=4, base_seed=61,
    )
    rows = rows_by_policy(run_experiment(sc, workers=1))
    one, al = rows["multi_lru_one"], rows["multi_lru_all"]
    ok = al.hit >= one.hit - (al.ci95 + one.ci95)
    report(f"criterion 13c {verdict(ok)}: with short content lifespans "
           f"multi-LRU-All ({al.hit:.4f}) holds up against One "
           f"({one.hit:.4f}) within CIs")
    assert ok


def test_criterion_14_solver(report):
    err = abs(solve_characteristic_time([0.5, 0.5], 1) - 2.0 * math.log(2.0))
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        f = int(rng.integers(5, 400))
        k = int(rng.integers(1, f))
        rates = rng.lognormal(mean=-1.0, sigma=2.0, size=f)
        t = solve_characteristic_time(rates, k)
        worst = max(worst, abs(float(-np.expm1(-rates * t).sum()) - k))
    ok = err <= 1e-12 and worst <= 1e-9
    report(f"criterion 14 {verdict(ok)}: closed-form time off by {err:.2e} "
           f"(tol 1e-12); worst residual over 1000 random instances "
           f"{worst:.2e} (tol 1e-9)")
    assert ok
