"""Monte Carlo engine: seeded realizations of (field, stream, policies).

Each realization draws a fresh station field and request stream from child
seeds of the scenario's base seed, then replays the identical stream through
every configured policy (common random numbers). Realizations are independent
and merge in index order, so reports are bit-identical for a fixed base seed
regardless of worker count.
"""

from __future__ import annotations

import csv
import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import cache_core, placement as placement_mod
from .cache_core import CacheState, LfuState, PolicyKind
from .geometry import (
    CoverageProfile,
    StationField,
    coverage_table,
    estimate_coverage_profile,
    sample_station_field,
)
from .traffic import (
    DAY_SECONDS,
    RequestStream,
    SnmLaw,
    estimate_top_objects,
    make_catalogue,
    sample_irm_stream,
    sample_snm_stream,
)

__all__ = [
    "Scenario",
    "PolicyRow",
    "HitReport",
    "run_realization",
    "run_stream_policies",
    "run_experiment",
    "sweep",
    "write_hit_csv",
    "HIT_CSV_HEADER",
]

HIT_CSV_HEADER = [
    "policy", "r_b", "n_bs", "gamma", "alpha", "q",
    "hit", "ci95", "requests", "realizations",
]

DEFAULT_POLICIES = (
    PolicyKind("single_lru"),
    PolicyKind("multi_lru_one"),
    PolicyKind("multi_lru_all"),
)


@dataclass(frozen=True)
class Scenario:
    """One experiment configuration (a single point of any sweep)."""

    placement: str = "ppp"
    lam_b: float = 0.5
    window: tuple[float, float] = (12.0, 12.0)
    r_b: float = 1.13
    boundary: str = "torus"
    traffic: str = "irm"
    lam_u: float = 0.023
    f: int = 10_000
    gamma: float = 0.78
    alpha: float | None = 0.01
    k: int | None = None
    policies: tuple[PolicyKind, ...] = DEFAULT_POLICIES
    duration: float = 20_000.0
    warmup: float = 0.3
    realizations: int = 20
    base_seed: int = 0
    lam_c_per_day: float = 1_000.0
    snm_law: SnmLaw | None = None
    pop_dt_up_days: float = 1.0
    pop_dt_es_days: float = 2.0
    m_max: int = 32
    surface_mode: str = "formula"
    gfi_points_per_station: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", tuple(float(v) for v in self.window))
        object.__setattr__(self, "policies", tuple(self.policies))
        if self.placement not in ("ppp", "lattice", "two_cache"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.traffic not in ("irm", "snm"):
            raise ValueError(f"unknown traffic kind {self.traffic!r}")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warmup fraction must lie in [0, 1)")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.alpha is None and self.k is None:
            raise ValueError("give alpha or k")
        if self.alpha is not None and self.k is not None \
                and round(self.alpha * self.f) != self.k:
            raise ValueError(
                f"alpha and k disagree: round({self.alpha} * {self.f}) != {self.k}"
            )
        if self.k_effective < 1:
            raise ValueError("cache size resolves below 1")
        for p in self.policies:
            if not isinstance(p, PolicyKind):
                raise ValueError("policies must be PolicyKind instances")

    @property
    def k_effective(self) -> int:
        return self.k if self.k is not None else int(round(self.alpha * self.f))

    @property
    def alpha_effective(self) -> float:
        return self.k_effective / self.f

    @property
    def snm_law_effective(self) -> SnmLaw:
        return self.snm_law if self.snm_law is not None else SnmLaw()


@dataclass(frozen=True)
class PolicyRow:
    policy: str
    q: float | None
    r_b: float
    n_bs: float
    gamma: float
    alpha: float
    hit: float
    ci95: float
    requests: int
    realizations: int


@dataclass(frozen=True)
class HitReport:
    scenario: Scenario
    n_bs: float
    rows: tuple[PolicyRow, ...]


@functools.lru_cache(maxsize=64)
def _profile_cached(
    placement: str, lam_b: float, window: tuple[float, float], r_b: float,
    boundary: str, m_max: int, surface_mode: str,
) -> CoverageProfile:
    method = "analytic" if placement == "ppp" else "monte_carlo"
    return estimate_coverage_profile(
        placement, lam_b, window, r_b,
        n_samples=100_000, rng_seed=12345, boundary_mode=boundary,
        method=method, m_max=m_max, surface_mode=surface_mode,
    )


def coverage_profile_for(scenario: Scenario) -> CoverageProfile:
    """Scenario-level coverage profile (analytic for PPP, Monte Carlo with a
    fixed internal seed otherwise)."""
    return _profile_cached(
        scenario.placement, scenario.lam_b, scenario.window, scenario.r_b,
        scenario.boundary, scenario.m_max, scenario.surface_mode,
    )


def _policy_seed(scenario: Scenario, index: int, p_idx: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(scenario.base_seed, spawn_key=(index, 2 + p_idx))


def _run_static(sets, objs, flat, offsets, count_from: int) -> tuple[int, int]:
    hits = counted = 0
    for i, o in enumerate(objs):
        b = offsets[i]
        e = offsets[i + 1]
        count = i >= count_from
        counted += count
        for k in range(b, e):
            if o in sets[flat[k]]:
                hits += count
                break
    return hits, counted


def _run_windowed_mpc(
    stream: RequestStream, k: int, dt_up: float, dt_es: float,
    objs, tlist, flat, offsets, count_from: int,
) -> tuple[int, int]:
    """MPC refreshed every dt_up from the trailing dt_es window; before the
    first refresh the placement is empty."""
    topset: frozenset[int] | set[int] = frozenset()
    next_refresh = dt_es
    hits = counted = 0
    for i, o in enumerate(objs):
        t = tlist[i]
        if t >= next_refresh:
            steps = int((t - next_refresh) // dt_up) + 1
            epoch = next_refresh + (steps - 1) * dt_up
            topset = set(estimate_top_objects(stream, epoch, dt_es, k))
            next_refresh = epoch + dt_up
        count = i >= count_from
        counted += count
        if offsets[i] != offsets[i + 1] and o in topset:
            hits += count
    return hits, counted


def _pop_plan_sets(
    scenario: Scenario, pol: PolicyKind, field_: StationField,
    seed: np.random.SeedSequence,
) -> list[frozenset[int]]:
    catalogue = make_catalogue(scenario.f, scenario.gamma)
    k = scenario.k_effective
    n = field_.n_stations
    if pol.kind == "mpc":
        plan = placement_mod.mpc_placement(catalogue, k, n)
    elif pol.kind == "gfi":
        rng = np.random.default_rng(seed)
        n_pts = max(1, scenario.gfi_points_per_station * n)
        pts = rng.random((n_pts, 2)) * scenario.window
        plan = placement_mod.greedy_full_info_placement(field_, pts, catalogue, k)
    elif pol.kind == "pbp":
        profile = coverage_profile_for(scenario)
        plan = placement_mod.pbp_placement(profile, catalogue, k, n, seed)
    else:  # pragma: no cover
        raise ValueError(f"{pol.kind!r} is not a placement policy")
    return plan.station_sets(n)


def run_stream_policies(
    scenario: Scenario,
    field_: StationField,
    stream: RequestStream,
    policy_seeds=None,
) -> list[tuple[int, int]]:
    """Replay one (field, stream) pair through every scenario policy.

    Returns (hits, counted) per policy, in scenario order. Warmup is
    time-based: requests before warmup * duration mutate caches but are not
    counted.
    """
    k = scenario.k_effective
    flat, offsets = coverage_table(field_, stream.x, stream.y)
    off = offsets.tolist()
    objs = stream.obj.tolist()
    count_from = int(np.searchsorted(stream.t, scenario.warmup * scenario.duration))
    tlist = stream.t.tolist() if scenario.traffic == "snm" else None
    if policy_seeds is None:
        policy_seeds = [
            np.random.SeedSequence(scenario.base_seed, spawn_key=(0, 2 + p))
            for p in range(len(scenario.policies))
        ]
    out: list[tuple[int, int]] = []
    n_st = field_.n_stations
    for p_idx, pol in enumerate(scenario.policies):
        kind = pol.kind
        if kind == "single_lru":
            caches = [CacheState(k) for _ in range(n_st)]
            out.append(cache_core.run_single_lru(caches, objs, flat, off, count_from))
        elif kind == "lfu":
            states = [LfuState(k) for _ in range(n_st)]
            out.append(cache_core.run_lfu(states, objs, flat, off, count_from))
        elif kind == "multi_lru_one":
            caches = [CacheState(k) for _ in range(n_st)]
            out.append(cache_core.run_multi_lru_one(caches, objs, flat, off, count_from))
        elif kind in ("multi_lru_all", "q_multi_lru_all"):
            caches = [CacheState(k) for _ in range(n_st)]
            rng = np.random.default_rng(policy_seeds[p_idx]) if pol.q < 1.0 else None
            out.append(
                cache_core.run_multi_lru_all(
                    caches, objs, flat, off, count_from, q=pol.q, rng=rng
                )
            )
        elif pol.is_pop:
            if scenario.traffic == "snm":
                if kind != "mpc":
                    raise ValueError(
                        f"{kind!r} has no refresh rule for temporal traffic"
                    )
                out.append(
                    _run_windowed_mpc(
                        stream, k,
                        scenario.pop_dt_up_days * DAY_SECONDS,
                        scenario.pop_dt_es_days * DAY_SECONDS,
                        objs, tlist, flat, off, count_from,
                    )
                )
            else:
                sets = _pop_plan_sets(scenario, pol, field_, policy_seeds[p_idx])
                out.append(_run_static(sets, objs, flat, off, count_from))
        else:  # pragma: no cover
            raise ValueError(f"unhandled policy {kind!r}")
    return out


def realize_field_and_stream(
    scenario: Scenario, index: int
) -> tuple[StationField, RequestStream]:
    """The (field, stream) pair of realization ``index``, from child seeds."""
    geom_seed = np.random.SeedSequence(scenario.base_seed, spawn_key=(index, 0))
    traf_seed = np.random.SeedSequence(scenario.base_seed, spawn_key=(index, 1))
    field_ = sample_station_field(
        scenario.placement, scenario.lam_b, scenario.window, scenario.r_b,
        geom_seed, boundary_mode=scenario.boundary,
    )
    if scenario.traffic == "irm":
        stream = sample_irm_stream(
            scenario.lam_u, scenario.window, scenario.duration,
            make_catalogue(scenario.f, scenario.gamma), traf_seed,
        )
    else:
        stream = sample_snm_stream(
            scenario.lam_c_per_day, scenario.snm_law_effective,
            scenario.window, scenario.duration, traf_seed,
        )
    return field_, stream


def run_realization(scenario: Scenario, index: int) -> list[tuple[int, int]]:
    """Run one seeded realization; returns (hits, counted) per policy."""
    field_, stream = realize_field_and_stream(scenario, index)
    seeds = [_policy_seed(scenario, index, p) for p in range(len(scenario.policies))]
    return run_stream_policies(scenario, field_, stream, policy_seeds=seeds)


def _run_chunk(scenario: Scenario, indices: list[int]):
    return [(i, run_realization(scenario, i)) for i in indices]


def run_experiment(scenario: Scenario, workers: int | None = None) -> HitReport:
    """All realizations, aggregated.

    ``workers`` > 1 fans realizations over a process pool; merge order is
    fixed by realization index, so the report does not depend on the worker
    count.
    """
    n_real = scenario.realizations
    if workers is None:
        workers = min(n_real, os.cpu_count() or 1)
    workers = max(1, int(workers))
    results: list = [None] * n_real
    if workers == 1 or n_real == 1:
        for i in range(n_real):
            results[i] = run_realization(scenario, i)
    else:
        chunks = [list(range(w, n_real, workers)) for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for part in ex.map(_run_chunk, [scenario] * len(chunks), chunks):
                for i, res in part:
                    results[i] = res
    profile = coverage_profile_for(scenario)
    rows = []
    for p_idx, pol in enumerate(scenario.policies):
        hits = np.array([results[i][p_idx][0] for i in range(n_real)], dtype=float)
        reqs = np.array([results[i][p_idx][1] for i in range(n_real)], dtype=float)
        total_req = reqs.sum()
        hit = float(hits.sum() / total_req) if total_req else math.nan
        if n_real >= 2 and (reqs > 0).all():
            ratios = hits / reqs
            ci95 = float(1.96 * ratios.std(ddof=1) / math.sqrt(n_real))
        else:
            ci95 = math.nan
        rows.append(
            PolicyRow(
                policy=pol.label,
                q=pol.q if pol.kind == "q_multi_lru_all" else None,
                r_b=scenario.r_b,
                n_bs=profile.n_bs,
                gamma=scenario.gamma,
                alpha=scenario.alpha_effective,
                hit=hit,
                ci95=ci95,
                requests=int(total_req),
                realizations=n_real,
            )
        )
    return HitReport(scenario=scenario, n_bs=profile.n_bs, rows=tuple(rows))


SWEEP_AXES = ("r_b", "gamma", "alpha", "q")


def sweep(
    scenario: Scenario, axis: str, values, workers: int | None = None
) -> list[HitReport]:
    """One run_experiment per swept value; R_b points get their N_bar
    annotation from the scenario's coverage profile."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    reports = []
    for v in values:
        if axis == "r_b":
            sc = replace(scenario, r_b=float(v))
        elif axis == "gamma":
            sc = replace(scenario, gamma=float(v))
        elif axis == "alpha":
            sc = replace(scenario, alpha=float(v), k=None)
        else:
            if not any(p.kind == "q_multi_lru_all" for p in scenario.policies):
                raise ValueError("q sweep needs a q_multi_lru_all policy")
            pols = tuple(
                replace(p, q=float(v)) if p.kind == "q_multi_lru_all" else p
                for p in scenario.policies
            )
            sc = replace(scenario, policies=pols)
        reports.append(run_experiment(sc, workers=workers))
    return reports


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_hit_csv(reports, path) -> None:
    """Emit hit rows (one per policy per report) in the fixed schema."""
    if isinstance(reports, HitReport):
        reports = [reports]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HIT_CSV_HEADER)
        for rep in reports:
            for r in rep.rows:
                w.writerow(
                    [r.policy, _fmt(r.r_b), _fmt(r.n_bs), _fmt(r.gamma),
                     _fmt(r.alpha), _fmt(r.q), _fmt(r.hit), _fmt(r.ci95),
                     r.requests, r.realizations]
                )
