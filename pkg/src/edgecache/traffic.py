"""Request-stream generators: spatial IRM and a shot-noise temporal model.

IRM: a homogeneous space-time Poisson process with i.i.d. Zipf object marks.
SNM: contents are born over time, each emitting an inhomogeneous Poisson
request pulse shaped by its lifespan, volume, and pulse shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Window, _as_window

__all__ = [
    "Request",
    "ZipfCatalogue",
    "SnmContent",
    "SnmLaw",
    "RequestStream",
    "zipf_pmf",
    "make_catalogue",
    "sample_irm_stream",
    "sample_snm_stream",
    "estimate_top_objects",
    "write_stream_csv",
    "read_stream_csv",
]

DAY_SECONDS = 86_400.0

STREAM_CSV_HEADER = ["t_sec", "x_km", "y_km", "object_id"]


@dataclass(frozen=True)
class Request:
    t: float
    position: tuple[float, float]
    object_id: int


@dataclass(frozen=True)
class ZipfCatalogue:
    """Fixed catalogue with popularity a_j proportional to j**-gamma."""

    f: int
    gamma: float
    pmf: np.ndarray
    d_norm: float


def zipf_pmf(f: int, gamma: float) -> np.ndarray:
    """Popularity vector a_j = j**-gamma / D over j = 1..f."""
    if f < 1:
        raise ValueError("catalogue size must be >= 1")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    weights = np.arange(1, f + 1, dtype=float) ** (-gamma)
    return weights / weights.sum()


def make_catalogue(f: int, gamma: float) -> ZipfCatalogue:
    weights = np.arange(1, f + 1, dtype=float) ** (-gamma)
    d = float(weights.sum())
    return ZipfCatalogue(f=f, gamma=gamma, pmf=weights / d, d_norm=d)


@dataclass
class RequestStream:
    """Time-ordered request arrays. ``obj`` ids are 1-based."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    obj: np.ndarray
    duration: float
    window: Window
    traffic_kind: str = "irm"

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Request:
        return Request(
            t=float(self.t[i]),
            position=(float(self.x[i]), float(self.y[i])),
            object_id=int(self.obj[i]),
        )


def sample_irm_stream(
    lam_u: float, window, duration: float, catalogue: ZipfCatalogue, rng_seed
) -> RequestStream:
    """Stationary IRM stream: Poisson(lam_u*|window|*duration) requests,
    uniform positions, i.i.d. Zipf marks."""
    if lam_u <= 0:
        raise ValueError("lam_u must be positive")
    if duration <= 0:
        raise ValueError("duration must be positive")
    win = _as_window(window)
    rng = np.random.default_rng(rng_seed)
    n = rng.poisson(lam_u * win.area * duration)
    t = np.sort(rng.random(n)) * duration
    x = rng.random(n) * win.width
    y = rng.random(n) * win.height
    cum = np.cumsum(catalogue.pmf)
    obj = np.searchsorted(cum, rng.random(n), side="right")
    np.minimum(obj, catalogue.f - 1, out=obj)
    return RequestStream(
        t=t, x=x, y=y, obj=obj + 1, duration=duration, window=win,
        traffic_kind="irm",
    )


@dataclass(frozen=True)
class SnmContent:
    """One content's request pulse: born at ``birth_time``, active for
    ``lifespan`` seconds, expected ``volume`` total requests, with a
    normalized shape g on [0, lifespan]."""

    birth_time: float
    lifespan: float
    volume: float
    shape: str = "rectangular"     # "rectangular" | "triangular"
    shape_peak: float = 0.5        # triangular peak position, fraction of lifespan

    def __post_init__(self) -> None:
        if self.lifespan <= 0 or self.volume <= 0:
            raise ValueError("lifespan and volume must be positive")
        if self.shape not in ("rectangular", "triangular"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not 0.0 <= self.shape_peak <= 1.0:
            raise ValueError("shape_peak must lie in [0, 1]")


@dataclass(frozen=True)
class SnmLaw:
    """Content parameter law: lifespans exponential, volumes Pareto."""

    mean_lifespan_sec: float = 3 * DAY_SECONDS
    volume_shape: float = 2.0
    volume_min: float = 10.0
    shape: str = "rectangular"
    shape_peak: float = 0.5

    def __post_init__(self) -> None:
        if self.mean_lifespan_sec <= 0:
            raise ValueError("mean lifespan must be positive")
        if self.volume_shape <= 1 or self.volume_min <= 0:
            raise ValueError("volume law needs shape > 1 and positive minimum")
        if self.shape not in ("rectangular", "triangular"):
            raise ValueError(f"unknown shape {self.shape!r}")


def _shape_inverse_cdf(u: np.ndarray, shape: str, peak: float) -> np.ndarray:
    """Inverse CDF of the normalized pulse on [0, 1]."""
    if shape == "rectangular":
        return u
    # triangular with peak at ``peak``
    out = np.empty_like(u)
    left = u < peak
    if peak > 0:
        out[left] = np.sqrt(u[left] * peak)
    else:
        out[left] = 0.0
    if peak < 1:
        out[~left] = 1.0 - np.sqrt((1.0 - u[~left]) * (1.0 - peak))
    else:
        out[~left] = 1.0
    return out


def sample_snm_stream(
    lam_c_per_day: float,
    law: SnmLaw,
    window,
    duration: float,
    rng_seed,
    return_contents: bool = False,
):
    """Shot-noise request stream over [0, duration).

    Content births form a Poisson process of rate ``lam_c_per_day``; births are
    also seeded on [-5 E[lifespan], 0) so the superposition is stationary at
    t = 0. Each content draws (lifespan, volume, shape) from ``law`` and emits
    an inhomogeneous Poisson pulse with intensity volume * g(t - birth);
    requests falling outside [0, duration) are dropped. Contents use distinct
    child seeds, so their substreams are mutually independent.
    """
    if lam_c_per_day < 0:
        raise ValueError("lam_c_per_day must be nonnegative")
    if duration <= 0:
        raise ValueError("duration must be positive")
    win = _as_window(window)
    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) \
        else np.random.SeedSequence(rng_seed)
    top = np.random.default_rng(ss.spawn(1)[0])
    warm = 5.0 * law.mean_lifespan_sec
    n_contents = top.poisson(lam_c_per_day / DAY_SECONDS * (duration + warm))
    births = -warm + top.random(n_contents) * (duration + warm)
    child_seeds = ss.spawn(n_contents) if n_contents else []
    t_parts: list[np.ndarray] = []
    id_parts: list[np.ndarray] = []
    contents: list[SnmContent] = []
    for i in range(n_contents):
        rng = np.random.default_rng(child_seeds[i])
        lifespan = rng.exponential(law.mean_lifespan_sec)
        volume = law.volume_min * (1.0 + rng.pareto(law.volume_shape))
        contents.append(
            SnmContent(
                birth_time=float(births[i]),
                lifespan=float(lifespan),
                volume=float(volume),
                shape=law.shape,
                shape_peak=law.shape_peak,
            )
        )
        n_req = rng.poisson(volume)
        if n_req == 0:
            continue
        times = births[i] + lifespan * _shape_inverse_cdf(
            rng.random(n_req), law.shape, law.shape_peak
        )
        times = times[(times >= 0.0) & (times < duration)]
        if len(times) == 0:
            continue
        t_parts.append(times)
        id_parts.append(np.full(len(times), i + 1, dtype=np.int64))
    if t_parts:
        t = np.concatenate(t_parts)
        obj = np.concatenate(id_parts)
        order = np.argsort(t, kind="stable")
        t, obj = t[order], obj[order]
    else:
        t = np.empty(0)
        obj = np.empty(0, dtype=np.int64)
    pos_rng = np.random.default_rng(ss.spawn(1)[0])
    x = pos_rng.random(len(t)) * win.width
    y = pos_rng.random(len(t)) * win.height
    stream = RequestStream(
        t=t, x=x, y=y, obj=obj, duration=duration, window=win,
        traffic_kind="snm",
    )
    if return_contents:
        return stream, contents
    return stream


def estimate_top_objects(
    stream: RequestStream, t_now: float, dt_es: float, count: int
) -> list[int]:
    """The ``count`` most-requested object ids in [t_now - dt_es, t_now).

    Ties break by earlier last-request time, then by lower id. Returns fewer
    than ``count`` ids when the window holds fewer distinct objects.
    """
    if dt_es <= 0:
        raise ValueError("dt_es must be positive")
    i0 = int(np.searchsorted(stream.t, t_now - dt_es, side="left"))
    i1 = int(np.searchsorted(stream.t, t_now, side="left"))
    ids = stream.obj[i0:i1]
    if len(ids) == 0:
        return []
    uniq, counts = np.unique(ids, return_counts=True)
    # last occurrence of each id: first occurrence in the reversed slice
    rev_uniq, rev_first = np.unique(ids[::-1], return_index=True)
    last_pos = (len(ids) - 1) - rev_first       # aligned with rev_uniq == uniq
    order = np.lexsort((uniq, last_pos, -counts))
    return [int(v) for v in uniq[order][:count]]


def write_stream_csv(stream: RequestStream, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STREAM_CSV_HEADER)
        for i in range(len(stream)):
            w.writerow(
                [repr(float(stream.t[i])), repr(float(stream.x[i])),
                 repr(float(stream.y[i])), int(stream.obj[i])]
            )


def read_stream_csv(path, window, duration: float, traffic_kind: str = "irm") -> RequestStream:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != STREAM_CSV_HEADER:
            raise ValueError(f"unexpected stream header {header!r}")
        rows = [(float(a), float(b), float(c), int(d)) for a, b, c, d in r]
    t = np.array([r[0] for r in rows])
    return RequestStream(
        t=t,
        x=np.array([r[1] for r in rows]),
        y=np.array([r[2] for r in rows]),
        obj=np.array([r[3] for r in rows], dtype=np.int64),
        duration=duration,
        window=_as_window(window),
        traffic_kind=traffic_kind,
    )
