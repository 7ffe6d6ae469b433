"""Closed-form hit-probability models built on the characteristic-time
fixed point.

The characteristic time T_C turns LRU occupancy into a deterministic window:
an object is resident iff it was requested within the last T_C seconds, with
T_C pinned by the capacity constraint sum_j (1 - exp(-rate_j T_C)) = K. On
top of that sit the single-cache formula, the independence approximation for
multi-LRU-One (each covering cache hits independently), the similarity
approximation for multi-LRU-All (covering caches share content, widened over
the union coverage surface), and the exact/near-exact two-cache forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import CoverageProfile
from .traffic import ZipfCatalogue

__all__ = [
    "CheSolution",
    "AnalyticModelParams",
    "solve_characteristic_time",
    "single_lru_hit",
    "multi_lru_one_hit",
    "multi_lru_all_hit",
    "two_cache_one_hit",
    "two_cache_all_hit",
]

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class CheSolution:
    """Fixed-point output: T_C, the per-cache object hit vector (sums to K),
    the total network hit probability, and the solver residual."""

    t_c: float
    per_object_hit: np.ndarray
    total_hit: float
    solver_residual: float


@dataclass(frozen=True)
class AnalyticModelParams:
    """Inputs shared by the network-level closed forms.

    ``vor_area`` is the mean Voronoi cell area (1/lam_b when derived from the
    station intensity); ``cov_area`` is the coverage cell area pi*R_b^2; the
    profile carries p_m and the union surfaces |A_m|.
    """

    catalogue: ZipfCatalogue
    lam_u: float
    k: int
    vor_area: float
    cov_area: float
    profile: CoverageProfile


def solve_characteristic_time(rates, k: int) -> float:
    """Root of sum_j (1 - exp(-rate_j * T)) = K.

    The left side is strictly increasing in T with supremum F, so for K < F
    the root exists and is unique; bracket by doubling, then bisect to an
    absolute residual below 1e-9.
    """
    rates = np.asarray(rates, dtype=float)
    if len(rates) == 0 or (rates <= 0).any():
        raise ValueError("rates must be positive")
    if k >= len(rates):
        raise ValueError("no finite characteristic time for K >= catalogue size")
    if k <= 0:
        raise ValueError("cache size must be positive")

    def occupancy(t: float) -> float:
        return float(-np.expm1(-rates * t).sum())

    hi = 1.0
    while occupancy(hi) < k:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("characteristic time bracket diverged")
    lo = 0.0
    mid = 0.5 * hi
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        res = occupancy(mid) - k
        # keep halving past the residual target until the root itself is
        # pinned to near machine precision
        if abs(res) <= RESIDUAL_TOL and hi - lo <= 1e-13 * max(1.0, mid):
            return mid
        if res < 0:
            lo = mid
        else:
            hi = mid
    return mid


def _solution(rates: np.ndarray, k: int, pmf: np.ndarray, total_fn) -> CheSolution:
    """Common assembly; ``total_fn(t_c, per_cache_hit)`` computes the network
    total from the per-cache occupancy probabilities."""
    f = len(rates)
    if k >= f:
        per = np.ones(f)
        return CheSolution(
            t_c=math.inf,
            per_object_hit=per,
            total_hit=min(1.0, float(total_fn(math.inf, per))),
            solver_residual=0.0,
        )
    t_c = solve_characteristic_time(rates, k)
    per = -np.expm1(-rates * t_c)
    return CheSolution(
        t_c=t_c,
        per_object_hit=per,
        total_hit=float(total_fn(t_c, per)),
        solver_residual=float(per.sum() - k),
    )


def single_lru_hit(
    catalogue: ZipfCatalogue, lam_u: float, area: float, k: int
) -> CheSolution:
    """Isolated LRU cache fed by Poisson arrivals over ``area``:
    P_hit(j) = 1 - exp(-a_j lam_u |A| T_C)."""
    if area <= 0:
        raise ValueError("cache catchment area must be positive")
    a = catalogue.pmf
    return _solution(
        a * lam_u * area, k, a, lambda t, per: a @ per
    )


def _mixture_total(a: np.ndarray, pm: np.ndarray, rate_area: np.ndarray,
                   t_c: float) -> float:
    """sum_j a_j sum_m p_m (1 - exp(-a_j lam_u area_m T_C)) where
    ``rate_area[m]`` is lam_u * area_m."""
    if math.isinf(t_c):
        covered = pm[1:].sum() if len(pm) > 1 else 0.0
        return float((a * covered).sum())
    expo = np.outer(a, rate_area) * t_c
    return float((a[:, None] * pm[None, :] * -np.expm1(-expo)).sum())


def multi_lru_one_hit(params: AnalyticModelParams) -> CheSolution:
    """Independence approximation for multi-LRU-One.

    Each cache behaves as an isolated LRU fed by its Voronoi cell
    (T_C from the |V| equation); an m-covered user hits if any of the m
    independent caches holds the object, which telescopes to an effective
    area of m|V| per object.
    """
    if params.cov_area <= params.vor_area:
        warnings.warn(
            "coverage cell does not dominate the mean Voronoi cell "
            f"(pi R_b^2 = {params.cov_area:.3f} <= |V| = {params.vor_area:.3f}); "
            "the independence model is outside its stated validity range",
            stacklevel=2,
        )
    a = params.catalogue.pmf
    pm = params.profile.pm
    rate_area = params.lam_u * params.vor_area * np.arange(len(pm))
    return _solution(
        a * params.lam_u * params.vor_area,
        params.k,
        a,
        lambda t, per: _mixture_total(a, pm, rate_area, t),
    )


def multi_lru_all_hit(params: AnalyticModelParams) -> CheSolution:
    """Similarity approximation for multi-LRU-All.

    Covering caches are treated as holding the same content, refreshed by all
    arrivals in the coverage cell (T_C from the |C| = pi R_b^2 equation); an
    m-covered user effectively sees one cache fed over the union surface
    |A_m|.
    """
    a = params.catalogue.pmf
    pm = params.profile.pm
    surf = params.profile.union_surface
    rate_area = params.lam_u * surf
    return _solution(
        a * params.lam_u * params.cov_area,
        params.k,
        a,
        lambda t, per: _mixture_total(a, pm, rate_area, t),
    )


def _two_cache(pmf, lam_u: float, t_area: float, hit_area: float, k: int) -> CheSolution:
    a = np.asarray(pmf, dtype=float)
    if k == 0:
        zero = np.zeros(len(a))
        return CheSolution(t_c=0.0, per_object_hit=zero, total_hit=0.0,
                           solver_residual=0.0)
    def total(t, per):
        if math.isinf(t):
            return 1.0
        return float(a @ -np.expm1(-a * lam_u * hit_area * t))
    return _solution(a * lam_u * t_area, k, a, total)


def two_cache_one_hit(pmf, lam_u: float, vor_area: float, k: int) -> CheSolution:
    """Two caches with equal Voronoi halves under multi-LRU-One: per-cache
    occupancy from the |V| equation, total over both halves (area 2|V|)."""
    return _two_cache(pmf, lam_u, vor_area, 2.0 * vor_area, k)


def two_cache_all_hit(pmf, lam_u: float, area: float, k: int) -> CheSolution:
    """Two fully-overlapping caches under multi-LRU-All: identical inventories
    make the pair equivalent to one LRU cache fed by the whole area, for which
    the characteristic-time model is exact in the two-cache network."""
    return _two_cache(pmf, lam_u, area, area, k)
