"""Static placement baselines and upper bounds.

Covers the prefetch-style policies that update inventories out of band: most
popular content (MPC), greedy placement under full network information (GFI),
probabilistic block placement (PBP), the multi-coverage IRM upper bound, and
its windowed variant for temporally local traffic. GFI and PBP follow the
published descriptions rather than any reference code.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass

import numpy as np

from .geometry import CoverageProfile, StationField, coverage_table
from .traffic import RequestStream, ZipfCatalogue, estimate_top_objects

__all__ = [
    "PlacementPlan",
    "mpc_placement",
    "irm_upper_bound",
    "greedy_full_info_placement",
    "pbp_probabilities",
    "pbp_placement",
    "temporal_pop_bound",
]

PLAN_CSV_HEADER = ["station_id", "object_id"]


@dataclass
class PlacementPlan:
    """Station index -> set of cached object ids (each of size <= K)."""

    assignments: dict[int, frozenset[int]]

    def station_sets(self, n_stations: int) -> list[frozenset[int]]:
        empty: frozenset[int] = frozenset()
        return [self.assignments.get(s, empty) for s in range(n_stations)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLAN_CSV_HEADER)
            for s in sorted(self.assignments):
                for o in sorted(self.assignments[s]):
                    w.writerow([s, o])

    @classmethod
    def from_csv(cls, path) -> "PlacementPlan":
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != PLAN_CSV_HEADER:
                raise ValueError(f"unexpected plan header {header!r}")
            acc: dict[int, set[int]] = {}
            for s, o in r:
                acc.setdefault(int(s), set()).add(int(o))
        return cls({s: frozenset(v) for s, v in acc.items()})


def mpc_placement(catalogue: ZipfCatalogue, k: int, n_stations: int) -> PlacementPlan:
    """Every station caches the K most popular objects."""
    if k > catalogue.f:
        raise ValueError("cache size exceeds the catalogue")
    top = frozenset(range(1, k + 1))
    return PlacementPlan({s: top for s in range(n_stations)})


def irm_upper_bound(profile, catalogue: ZipfCatalogue, k: int) -> float:
    """Hit probability ceiling: an m-covered user can at best see the mK most
    popular objects, so the bound is sum_m p_m * sum_{j<=mK} a_j."""
    pm = profile.pm if isinstance(profile, CoverageProfile) else np.asarray(profile, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(catalogue.pmf)))
    total = 0.0
    for m, p in enumerate(pm):
        total += p * cum[min(m * k, catalogue.f)]
    return float(total)


def greedy_full_info_placement(
    field: StationField,
    user_sample_points: np.ndarray,
    catalogue: ZipfCatalogue,
    k: int,
) -> PlacementPlan:
    """Greedy placement maximizing empirical expected hit probability.

    A sampled location hits if any covering station holds its hypothetical
    request (weight a_j). Marginal gains are submodular, so a lazy heap keeps
    the greedy exact without rescanning the whole (station, object) grid per
    step. Stations may end below capacity when no placement has positive gain.
    """
    pts = np.asarray(user_sample_points, dtype=float)
    if len(pts) == 0:
        raise ValueError("need at least one sample point")
    flat, off = coverage_table(field, pts[:, 0], pts[:, 1])
    n_pts = len(pts)
    n_st = field.n_stations
    cover_of_point: list[list[int]] = [
        flat[off[i]: off[i + 1]] for i in range(n_pts)
    ]
    points_of_station: list[list[int]] = [[] for _ in range(n_st)]
    for p, covs in enumerate(cover_of_point):
        for s in covs:
            points_of_station[s].append(p)
    a = catalogue.pmf
    f = catalogue.f
    # u[s, j-1]: sample points covered by s where object j is not yet covered
    u = np.tile(
        np.array([len(points_of_station[s]) for s in range(n_st)],
                 dtype=np.int64)[:, None],
        (1, f),
    )
    heap = [
        (-a[j] * u[s, j], s, j)
        for s in range(n_st)
        for j in range(f)
        if u[s, j] > 0
    ]
    heapq.heapify(heap)
    sets: list[set[int]] = [set() for _ in range(n_st)]
    covered_pts: dict[int, np.ndarray] = {}     # object j -> bool per point
    free = [k] * n_st
    remaining = sum(1 for s in range(n_st) if free[s] > 0 and points_of_station[s])
    while heap and remaining > 0:
        neg_gain, s, j = heapq.heappop(heap)
        if free[s] == 0 or j in sets[s]:
            continue
        cur = u[s, j]
        if -neg_gain > a[j] * cur + 1e-18:       # stale entry, refresh
            if cur > 0:
                heapq.heappush(heap, (-a[j] * cur, s, j))
            continue
        if cur == 0:
            continue            # no positive gain from this pair anymore
        sets[s].add(j)
        free[s] -= 1
        if free[s] == 0:
            remaining -= 1
        mask = covered_pts.get(j)
        if mask is None:
            mask = np.zeros(n_pts, dtype=bool)
            covered_pts[j] = mask
        for p in points_of_station[s]:
            if not mask[p]:
                mask[p] = True
                for s2 in cover_of_point[p]:
                    u[s2, j] -= 1
    return PlacementPlan(
        {s: frozenset(j + 1 for j in sets[s]) for s in range(n_st) if sets[s]}
    )


def _psi(b: np.ndarray, pm: np.ndarray) -> np.ndarray:
    """psi(b) = sum_m p_m * m * (1-b)^(m-1): derivative kernel of the
    multi-coverage hit objective. Decreasing in b."""
    m = np.arange(1, len(pm))
    return ((1.0 - b)[..., None] ** (m - 1) * (pm[1:] * m)).sum(axis=-1)


def pbp_probabilities(profile, catalogue: ZipfCatalogue, k: int) -> np.ndarray:
    """Per-object caching probabilities b_j maximizing
    sum_j a_j (1 - sum_m p_m (1-b_j)^m) subject to sum b_j = K, 0 <= b_j <= 1.

    The objective is concave and separable; the KKT system pins
    a_j * psi(b_j) to a common multiplier, solved by nested bisections.
    """
    pm = profile.pm if isinstance(profile, CoverageProfile) else np.asarray(profile, dtype=float)
    a = catalogue.pmf
    f = catalogue.f
    if k > f:
        raise ValueError("cache size exceeds the catalogue")
    if k == f:
        return np.ones(f)
    psi0 = float(_psi(np.zeros(1), pm)[0])      # = mean coverage number
    psi1 = float(_psi(np.ones(1), pm)[0])       # = p_1
    if psi0 <= 0.0:
        return np.zeros(f)                      # never covered, nothing helps

    def b_of_mu(mu: float) -> np.ndarray:
        b = np.zeros(f)
        full = a * psi1 >= mu
        b[full] = 1.0
        interior = ~full & (a * psi0 > mu)
        if interior.any():
            target = mu / a[interior]
            lo = np.zeros(target.shape)
            hi = np.ones(target.shape)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                above = _psi(mid, pm) > target
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
            b[interior] = 0.5 * (lo + hi)
        return b

    mu_lo, mu_hi = 0.0, float(a[0] * psi0)
    for _ in range(80):
        mu = 0.5 * (mu_lo + mu_hi)
        if b_of_mu(mu).sum() > k:
            mu_lo = mu
        else:
            mu_hi = mu
    b = b_of_mu(0.5 * (mu_lo + mu_hi))
    # polish the budget: uniform shift across interior coordinates
    slack = k - b.sum()
    interior = (b > 1e-12) & (b < 1 - 1e-12)
    if abs(slack) > 1e-9 and interior.any():
        b[interior] += slack / interior.sum()
        np.clip(b, 0.0, 1.0, out=b)
    if abs(k - b.sum()) > 1e-6:
        # degenerate KKT (popularity ties at the threshold): any top-K split
        # of the tied mass is optimal, take the deterministic one
        b = np.zeros(f)
        b[np.argsort(-a, kind="stable")[:k]] = 1.0
    return b


def pbp_placement(
    profile,
    catalogue: ZipfCatalogue,
    k: int,
    n_stations: int,
    rng_seed,
) -> PlacementPlan:
    """Sample one inventory per station with exactly K distinct objects and
    per-object inclusion probability b_j, via the cumulative-interval block
    draw: a single uniform U selects the K objects whose cumulative-b
    intervals contain U, U+1, ..., U+K-1."""
    b = pbp_probabilities(profile, catalogue, k)
    cum = np.cumsum(b)
    cum[-1] = float(k)      # exact by the constraint; clamp roundoff
    rng = np.random.default_rng(rng_seed)
    plans: dict[int, frozenset[int]] = {}
    shifts = np.arange(k)
    for s in range(n_stations):
        u = rng.random()
        idx = np.searchsorted(cum, u + shifts, side="left")
        plans[s] = frozenset(int(j) + 1 for j in idx)
    return PlacementPlan(plans)


def temporal_pop_bound(
    stream: RequestStream,
    profile,
    k: int,
    dt_up: float,
    dt_es: float,
) -> float:
    """Upper bound for prefetch policies under temporally local traffic.

    Time is cut into update intervals of length ``dt_up`` starting at
    ``dt_es``; each interval's best placement is the top-mK objects of the
    preceding estimation window, so a request for an object ranked r in that
    window scores sum_{m >= ceil(r/K)} p_m. Returns the request-weighted
    average over all scored requests.
    """
    if dt_up <= 0 or dt_es <= 0:
        raise ValueError("dt_up and dt_es must be positive")
    if stream.duration <= dt_es:
        raise ValueError("stream shorter than the estimation window")
    pm = profile.pm if isinstance(profile, CoverageProfile) else np.asarray(profile, dtype=float)
    tail = np.concatenate((np.cumsum(pm[::-1])[::-1], [0.0]))  # tail[m] = P(N >= m)
    m_max = len(pm) - 1
    score_sum = 0.0
    n_scored = 0
    t_n = dt_es
    while t_n < stream.duration:
        ranked = estimate_top_objects(stream, t_n, dt_es, m_max * k)
        rank_of = {o: r + 1 for r, o in enumerate(ranked)}
        i0 = int(np.searchsorted(stream.t, t_n, side="left"))
        i1 = int(np.searchsorted(stream.t, min(t_n + dt_up, stream.duration), side="left"))
        for o in stream.obj[i0:i1]:
            r = rank_of.get(int(o))
            if r is not None:
                m_need = -(-r // k)             # ceil(r / k)
                if m_need <= m_max:
                    score_sum += tail[m_need]
        n_scored += i1 - i0
        t_n += dt_up
    if n_scored == 0:
        raise ValueError("no requests fall after the estimation window")
    return score_sum / n_scored
