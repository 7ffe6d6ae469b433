"""Station placement, coverage queries, and coverage-number statistics.

Stations live in a rectangular window and cover a disc of radius ``r_b``
(Boolean model). Distances are torus-wrapped by default so the process stays
stationary without edge corrections; an ``open`` mode with plain Euclidean
distances is available for sensitivity checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Window",
    "StationField",
    "CoverageProfile",
    "sample_station_field",
    "covering_stations",
    "closest_station",
    "coverage_table",
    "poisson_coverage_pmf",
    "estimate_coverage_profile",
    "estimate_union_surface",
    "union_surface_vector",
]

M_MAX_DEFAULT = 32


@dataclass(frozen=True)
class Window:
    """Rectangular observation window, in km."""

    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError("window sides must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height


def _as_window(window) -> Window:
    if isinstance(window, Window):
        return window
    w, h = window
    return Window(float(w), float(h))


@dataclass
class StationField:
    """A realized set of stations with a fixed coverage radius.

    Immutable after construction; the spatial bucket index is built once in
    ``__post_init__`` and shared read-only.
    """

    positions: np.ndarray          # shape (n, 2)
    coverage_radius: float         # R_b, km
    window: Window
    boundary_mode: str = "torus"   # "torus" | "open"
    intensity: float | None = None
    placement: str = "ppp"         # "ppp" | "lattice" | "two_cache"
    eta: float | None = None       # lattice spacing, when placement == "lattice"

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.window = _as_window(self.window)
        if self.coverage_radius <= 0:
            raise ValueError("coverage radius must be positive")
        if self.boundary_mode not in ("torus", "open"):
            raise ValueError(f"unknown boundary_mode {self.boundary_mode!r}")
        w, h = self.window.width, self.window.height
        if len(self.positions) and (
            self.positions.min() < -1e-9
            or self.positions[:, 0].max() > w + 1e-9
            or self.positions[:, 1].max() > h + 1e-9
        ):
            raise ValueError("station positions fall outside the window")
        self._build_index()

    @property
    def n_stations(self) -> int:
        return len(self.positions)

    # bucket grid with cell size >= R_b, so covering stations of any point sit
    # in the 3x3 cell neighbourhood
    def _build_index(self) -> None:
        w, h = self.window.width, self.window.height
        r = self.coverage_radius
        nx = max(1, int(w / r))
        ny = max(1, int(h / r))
        self._nx, self._ny = nx, ny
        self._gx, self._gy = w / nx, h / ny
        buckets: list[list[int]] = [[] for _ in range(nx * ny)]
        for i, (x, y) in enumerate(self.positions):
            buckets[self._cell(x, y)].append(i)
        torus = self.boundary_mode == "torus"
        cands: list[np.ndarray] = []
        for cx in range(nx):
            for cy in range(ny):
                xs = {(cx + d) % nx for d in (-1, 0, 1)} if torus else \
                    {cx + d for d in (-1, 0, 1) if 0 <= cx + d < nx}
                ys = {(cy + d) % ny for d in (-1, 0, 1)} if torus else \
                    {cy + d for d in (-1, 0, 1) if 0 <= cy + d < ny}
                idx: list[int] = []
                for ix in xs:
                    for iy in ys:
                        idx.extend(buckets[ix * ny + iy])
                idx.sort()
                cands.append(np.asarray(idx, dtype=np.int64))
        self._cell_candidates = cands

    def _cell(self, x: float, y: float) -> int:
        ix = min(int(x / self._gx), self._nx - 1)
        iy = min(int(y / self._gy), self._ny - 1)
        return ix * self._ny + iy


def sample_station_field(
    placement: str,
    lam_b: float,
    window,
    r_b: float,
    rng_seed,
    boundary_mode: str = "torus",
) -> StationField:
    """Draw one station configuration.

    ``ppp``: Poisson(lam_b * |window|) points, i.i.d. uniform.
    ``lattice``: square grid with spacing eta = lam_b**-0.5, translated by a
    uniform vector in [0, eta)^2. Windows whose sides are integer multiples of
    eta tile the torus seamlessly; otherwise a seam strip remains.
    ``two_cache``: two stations on the horizontal midline at W/4 and 3W/4
    (torus Voronoi cells are the left/right halves).

    Deterministic for a fixed seed.
    """
    win = _as_window(window)
    if placement != "two_cache" and not lam_b > 0:
        raise ValueError("station intensity lam_b must be positive")
    rng = np.random.default_rng(rng_seed)
    eta = None
    if placement == "ppp":
        n = rng.poisson(lam_b * win.area)
        pos = rng.random((n, 2)) * (win.width, win.height)
    elif placement == "lattice":
        eta = lam_b ** -0.5
        nx = int(win.width / eta + 1e-9)
        ny = int(win.height / eta + 1e-9)
        if nx < 1 or ny < 1:
            raise ValueError("window too small for the lattice spacing")
        t = rng.random(2) * eta
        gx = t[0] + eta * np.arange(nx)
        gy = t[1] + eta * np.arange(ny)
        pos = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    elif placement == "two_cache":
        pos = np.array(
            [[win.width * 0.25, win.height * 0.5],
             [win.width * 0.75, win.height * 0.5]]
        )
    else:
        raise ValueError(f"unknown placement {placement!r}")
    return StationField(
        positions=pos,
        coverage_radius=r_b,
        window=win,
        boundary_mode=boundary_mode,
        intensity=lam_b,
        placement=placement,
        eta=eta,
    )


def _deltas(field: StationField, pts: np.ndarray, stations: np.ndarray) -> np.ndarray:
    """Squared distances between pts (n,2) and stations (m,2) -> (n, m)."""
    dx = np.abs(pts[:, None, 0] - stations[None, :, 0])
    dy = np.abs(pts[:, None, 1] - stations[None, :, 1])
    if field.boundary_mode == "torus":
        w, h = field.window.width, field.window.height
        dx = np.minimum(dx, w - dx)
        dy = np.minimum(dy, h - dy)
    return dx * dx + dy * dy


def covering_stations(field: StationField, point) -> list[int]:
    """Indices of all stations within R_b of ``point``, closest first.

    Ties in distance break toward the lower index. Empty list means the point
    is uncovered.
    """
    x, y = float(point[0]), float(point[1])
    cand = field._cell_candidates[field._cell(x, y)]
    if len(cand) == 0:
        return []
    d2 = _deltas(field, np.array([[x, y]]), field.positions[cand])[0]
    r2 = field.coverage_radius**2
    keep = d2 <= r2
    if not keep.any():
        return []
    order = np.lexsort((cand[keep], d2[keep]))
    return [int(s) for s in cand[keep][order]]


def closest_station(field: StationField, point) -> int:
    """Index of the nearest station (torus-aware); ties go to the lowest index."""
    if field.n_stations == 0:
        raise ValueError("closest_station on an empty field")
    pt = np.array([[float(point[0]), float(point[1])]])
    d2 = _deltas(field, pt, field.positions)[0]
    return int(np.argmin(d2))


def coverage_table(
    field: StationField, xs: np.ndarray, ys: np.ndarray
) -> tuple[list[int], np.ndarray]:
    """Vectorized covering_stations for a batch of points.

    Returns ``(flat, offsets)``: the covering stations of point i, closest
    first, are ``flat[offsets[i]:offsets[i+1]]``. ``flat`` is a plain Python
    list so per-request consumption stays cheap.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = len(xs)
    offsets = np.zeros(n + 1, dtype=np.int64)
    if n == 0 or field.n_stations == 0:
        return [], offsets
    nx, ny = field._nx, field._ny
    ix = np.minimum((xs / field._gx).astype(np.int64), nx - 1)
    iy = np.minimum((ys / field._gy).astype(np.int64), ny - 1)
    cell = ix * ny + iy
    order = np.argsort(cell, kind="stable")
    cell_sorted = cell[order]
    starts = np.flatnonzero(np.diff(cell_sorted, prepend=-1))
    bounds = np.append(starts, n)
    r2 = field.coverage_radius**2
    pos = field.positions
    g_idx_parts: list[np.ndarray] = []
    st_parts: list[np.ndarray] = []
    d2_parts: list[np.ndarray] = []
    for b, e in zip(bounds[:-1], bounds[1:]):
        cid = int(cell_sorted[b])
        cand = field._cell_candidates[cid]
        if len(cand) == 0:
            continue
        gpts = order[b:e]
        pts = np.column_stack((xs[gpts], ys[gpts]))
        d2 = _deltas(field, pts, pos[cand])
        rows, cols = np.nonzero(d2 <= r2)
        if len(rows) == 0:
            continue
        g_idx_parts.append(gpts[rows])
        st_parts.append(cand[cols])
        d2_parts.append(d2[rows, cols])
    if not g_idx_parts:
        return [], offsets
    g_idx = np.concatenate(g_idx_parts)
    st = np.concatenate(st_parts)
    d2v = np.concatenate(d2_parts)
    perm = np.lexsort((st, d2v, g_idx))
    counts = np.bincount(g_idx, minlength=n)
    offsets[1:] = np.cumsum(counts)
    return st[perm].tolist(), offsets


@dataclass
class CoverageProfile:
    """Distribution of the coverage number plus union coverage surfaces.

    ``pm[m]`` is the probability that a uniform point lies in exactly m
    coverage cells (tail mass folded into the last bin); ``union_surface[m]``
    is the expected area covered jointly by m covering stations.
    """

    pm: np.ndarray
    union_surface: np.ndarray
    n_bs: float = field(init=False)

    def __post_init__(self) -> None:
        self.pm = np.asarray(self.pm, dtype=float)
        self.union_surface = np.asarray(self.union_surface, dtype=float)
        if abs(self.pm.sum() - 1.0) > 1e-9 or (self.pm < -1e-15).any():
            raise ValueError("pm must be a probability vector")
        if len(self.union_surface) != len(self.pm):
            raise ValueError("union_surface must align with pm")
        self.n_bs = float(np.arange(len(self.pm)) @ self.pm)


def poisson_coverage_pmf(nu: float, m_max: int = M_MAX_DEFAULT) -> np.ndarray:
    """Poisson(nu) pmf over 0..m_max with the tail folded into the last bin."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    pm = np.zeros(m_max + 1)
    term = math.exp(-nu)
    for m in range(m_max):
        pm[m] = term
        term *= nu / (m + 1)
    pm[m_max] = max(0.0, 1.0 - pm.sum())
    return pm


def estimate_union_surface(
    m: int,
    r_b: float,
    mode: str = "formula",
    rng_seed=None,
    n_samples: int = 200_000,
) -> float:
    """Expected area covered by the union of m covering discs.

    ``formula`` mode: |A_M| = pi R_b^2 (5/3)^2 and
    |A_m| = |A_M| (1 - exp(-m*delta)) with delta = -ln(1 - |A_1|/|A_M|), i.e.
    delta = ln(25/16). Exact at m = 0 and m = 1, an exponential-saturation fit
    beyond that (known to drift for large m).

    ``monte_carlo`` mode: places m disc centres at distance R_b*sqrt(U) from
    the typical point (the covered-user-to-station distance, mean 2R_b/3) and
    integrates the union by uniform sampling over the enclosing square. Serves
    as the oracle for the formula.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return 0.0
    a1 = math.pi * r_b * r_b
    if mode == "formula":
        a_max = a1 * (5.0 / 3.0) ** 2
        delta = math.log(25.0 / 16.0)
        return a_max * -math.expm1(-m * delta)
    if mode != "monte_carlo":
        raise ValueError(f"unknown union surface mode {mode!r}")
    rng = np.random.default_rng(rng_seed)
    radii = r_b * np.sqrt(rng.random((n_samples, m)))
    ang = rng.random((n_samples, m)) * (2 * math.pi)
    cx = radii * np.cos(ang)
    cy = radii * np.sin(ang)
    px = (rng.random(n_samples) * 4 - 2) * r_b
    py = (rng.random(n_samples) * 4 - 2) * r_b
    d2 = (px[:, None] - cx) ** 2 + (py[:, None] - cy) ** 2
    covered = (d2 <= r_b * r_b).any(axis=1)
    return float(16 * r_b * r_b * covered.mean())


def union_surface_vector(
    m_max: int, r_b: float, mode: str = "formula", rng_seed=None
) -> np.ndarray:
    seeds = np.random.SeedSequence(rng_seed).spawn(m_max) if mode == "monte_carlo" else None
    out = np.zeros(m_max + 1)
    for m in range(1, m_max + 1):
        seed = seeds[m - 1] if seeds is not None else None
        out[m] = estimate_union_surface(m, r_b, mode=mode, rng_seed=seed)
    return out


def _mc_coverage_pmf(
    placement: str,
    lam_b: float,
    window: Window,
    r_b: float,
    boundary_mode: str,
    n_samples: int,
    rng: np.random.Generator,
    m_max: int,
) -> np.ndarray:
    """Coverage-number histogram over fresh field realizations, one uniform
    sample point per field."""
    w, h = window.width, window.height
    torus = boundary_mode == "torus"
    r2 = r_b * r_b
    hist = np.zeros(m_max + 1, dtype=np.int64)
    batch = 20_000
    if placement == "lattice":
        eta = lam_b ** -0.5
        nx, ny = int(w / eta + 1e-9), int(h / eta + 1e-9)
        if nx < 1 or ny < 1:
            raise ValueError("window too small for the lattice spacing")
        grid = np.stack(
            np.meshgrid(eta * np.arange(nx), eta * np.arange(ny), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        pts = rng.random((b, 2)) * (w, h)
        if placement == "ppp":
            k = rng.poisson(lam_b * w * h, size=b)
            fid = np.repeat(np.arange(b), k)
            st = rng.random((int(k.sum()), 2)) * (w, h)
        elif placement == "lattice":
            t = rng.random((b, 2)) * eta
            st = (t[:, None, :] + grid[None, :, :]).reshape(-1, 2)
            fid = np.repeat(np.arange(b), len(grid))
        elif placement == "two_cache":
            st = np.tile(
                np.array([[w * 0.25, h * 0.5], [w * 0.75, h * 0.5]]), (b, 1)
            )
            fid = np.repeat(np.arange(b), 2)
        else:
            raise ValueError(f"unknown placement {placement!r}")
        d = np.abs(pts[fid] - st)
        if torus:
            d[:, 0] = np.minimum(d[:, 0], w - d[:, 0])
            d[:, 1] = np.minimum(d[:, 1], h - d[:, 1])
        covered = (d * d).sum(axis=1) <= r2
        m = np.bincount(fid[covered], minlength=b)
        np.minimum(m, m_max, out=m)
        hist += np.bincount(m, minlength=m_max + 1)
        done += b
    return hist / n_samples


def estimate_coverage_profile(
    placement: str,
    lam_b: float,
    window,
    r_b: float,
    n_samples: int = 100_000,
    rng_seed=None,
    boundary_mode: str = "torus",
    method: str | None = None,
    m_max: int = M_MAX_DEFAULT,
    surface_mode: str = "formula",
) -> CoverageProfile:
    """Coverage-number distribution for the given field parameters.

    ``method="analytic"`` (default for PPP) returns the exact Poisson law with
    nu = lam_b * pi * r_b^2; ``method="monte_carlo"`` (default otherwise)
    tallies the histogram over ``n_samples`` fresh field realizations.
    """
    win = _as_window(window)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if method is None:
        method = "analytic" if placement == "ppp" else "monte_carlo"
    if method == "analytic":
        if placement != "ppp":
            raise ValueError("analytic coverage pmf is only exact for ppp")
        pm = poisson_coverage_pmf(lam_b * math.pi * r_b * r_b, m_max)
    elif method == "monte_carlo":
        rng = np.random.default_rng(rng_seed)
        pm = _mc_coverage_pmf(
            placement, lam_b, win, r_b, boundary_mode, n_samples, rng, m_max
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    surf = union_surface_vector(m_max, r_b, mode=surface_mode, rng_seed=rng_seed)
    return CoverageProfile(pm=pm, union_surface=surf)
