"""Per-station caches and the online policy engine.

Policies that act on every request (POQ): single-LRU, multi-LRU-One,
multi-LRU-All, its q-randomized variant, and perfect LFU. ``handle_request``
is the per-request reference implementation; the ``run_*`` loops below apply
the same semantics over a whole stream at a fraction of the interpreter cost
and are what the simulator uses.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CacheState",
    "LfuState",
    "PolicyKind",
    "RequestOutcome",
    "POQ_KINDS",
    "POP_KINDS",
    "POLICY_KINDS",
    "handle_request",
    "run_single_lru",
    "run_lfu",
    "run_multi_lru_one",
    "run_multi_lru_all",
]

POQ_KINDS = ("single_lru", "multi_lru_one", "multi_lru_all", "q_multi_lru_all", "lfu")
POP_KINDS = ("mpc", "gfi", "pbp")
POLICY_KINDS = POQ_KINDS + POP_KINDS


class CacheState:
    """LRU inventory of at most ``capacity`` distinct object ids.

    Backed by an OrderedDict with the MRU element at the end; ``inventory``
    lists most recent first.
    """

    __slots__ = ("capacity", "_od")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = capacity
        self._od: OrderedDict = OrderedDict()

    def __contains__(self, object_id) -> bool:
        return object_id in self._od

    def __len__(self) -> int:
        return len(self._od)

    @property
    def inventory(self) -> list:
        return list(reversed(self._od))

    def touch(self, object_id) -> None:
        """Move a resident object to the MRU position."""
        if object_id not in self._od:
            raise KeyError(f"touch of absent object {object_id!r}")
        self._od.move_to_end(object_id)

    def insert(self, object_id):
        """Insert a new object at MRU; returns the evicted id, if any."""
        if object_id in self._od:
            raise ValueError(f"duplicate insert of object {object_id!r}")
        evicted = None
        if len(self._od) >= self.capacity:
            evicted, _ = self._od.popitem(last=False)
        self._od[object_id] = None
        return evicted


class LfuState:
    """Perfect LFU: unbounded counters, cache = current top-K by
    (count desc, id asc)."""

    __slots__ = ("capacity", "counts", "cached")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = capacity
        self.counts: dict = {}
        self.cached: set = set()

    def request(self, object_id) -> bool:
        """Serve one request: returns hit/miss against the pre-request
        inventory, then updates counters and membership."""
        hit = object_id in self.cached
        c = self.counts.get(object_id, 0) + 1
        self.counts[object_id] = c
        if not hit:
            if len(self.cached) < self.capacity:
                self.cached.add(object_id)
            else:
                counts = self.counts
                weakest = min(self.cached, key=lambda o: (counts[o], -o))
                if (c, -object_id) > (counts[weakest], -weakest):
                    self.cached.discard(weakest)
                    self.cached.add(object_id)
        return hit


@dataclass(frozen=True)
class PolicyKind:
    """A policy selector; ``q`` only matters for q_multi_lru_all."""

    kind: str
    q: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in POQ_KINDS + POP_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not 0.0 < self.q <= 1.0:
            raise ValueError("q must lie in (0, 1]")
        if self.q != 1.0 and self.kind != "q_multi_lru_all":
            raise ValueError("q is only meaningful for q_multi_lru_all")

    @property
    def is_pop(self) -> bool:
        return self.kind in POP_KINDS

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class RequestOutcome:
    hit: bool
    serving_station: int | None
    covered: bool


def handle_request(
    policy: PolicyKind,
    caches,
    covering: list[int],
    object_id,
    rng: np.random.Generator | None = None,
) -> RequestOutcome:
    """Apply one request under a POQ policy and report the outcome.

    ``covering`` lists the stations whose cells contain the user, closest
    first (empty means uncovered, which is always a miss and leaves every
    cache untouched). ``caches`` maps station index to CacheState (LfuState
    for the lfu policy).
    """
    if not covering:
        return RequestOutcome(hit=False, serving_station=None, covered=False)
    kind = policy.kind
    if kind == "single_lru":
        s = covering[0]
        cache = caches[s]
        if object_id in cache:
            cache.touch(object_id)
            return RequestOutcome(hit=True, serving_station=s, covered=True)
        cache.insert(object_id)
        return RequestOutcome(hit=False, serving_station=None, covered=True)
    if kind == "lfu":
        s = covering[0]
        hit = caches[s].request(object_id)
        return RequestOutcome(
            hit=hit, serving_station=s if hit else None, covered=True
        )
    if kind == "multi_lru_one":
        for s in covering:
            if object_id in caches[s]:
                caches[s].touch(object_id)
                return RequestOutcome(hit=True, serving_station=s, covered=True)
        caches[covering[0]].insert(object_id)
        return RequestOutcome(hit=False, serving_station=None, covered=True)
    if kind in ("multi_lru_all", "q_multi_lru_all"):
        holders = [s for s in covering if object_id in caches[s]]
        if holders:
            for s in holders:
                caches[s].touch(object_id)
            return RequestOutcome(hit=True, serving_station=holders[0], covered=True)
        q = policy.q
        for s in covering:
            if q >= 1.0 or rng.random() < q:
                caches[s].insert(object_id)
        return RequestOutcome(hit=False, serving_station=None, covered=True)
    raise ValueError(f"{kind!r} is not an online policy")


# stream loops
#
# All loops take the stream as parallel plain-Python structures: ``objs`` the
# object ids, and (flat, offsets) from geometry.coverage_table. Requests with
# index >= count_from are counted. They mutate ``caches`` in place and return
# (hits, counted).

def run_single_lru(
    caches: list[CacheState], objs, flat, offsets, count_from: int
) -> tuple[int, int]:
    ods = [c._od for c in caches]
    cap = caches[0].capacity if caches else 0
    hits = counted = 0
    for i, o in enumerate(objs):
        b = offsets[i]
        count = i >= count_from
        counted += count
        if b == offsets[i + 1]:
            continue
        od = ods[flat[b]]
        if o in od:
            od.move_to_end(o)
            hits += count
        else:
            od[o] = None
            if len(od) > cap:
                od.popitem(last=False)
    return hits, counted


def run_lfu(
    states: list[LfuState], objs, flat, offsets, count_from: int
) -> tuple[int, int]:
    hits = counted = 0
    for i, o in enumerate(objs):
        b = offsets[i]
        count = i >= count_from
        counted += count
        if b == offsets[i + 1]:
            continue
        if states[flat[b]].request(o):
            hits += count
    return hits, counted


def run_multi_lru_one(
    caches: list[CacheState], objs, flat, offsets, count_from: int
) -> tuple[int, int]:
    ods = [c._od for c in caches]
    cap = caches[0].capacity if caches else 0
    hits = counted = 0
    for i, o in enumerate(objs):
        b = offsets[i]
        e = offsets[i + 1]
        count = i >= count_from
        counted += count
        if b == e:
            continue
        for k in range(b, e):
            od = ods[flat[k]]
            if o in od:
                od.move_to_end(o)
                hits += count
                break
        else:
            od = ods[flat[b]]
            od[o] = None
            if len(od) > cap:
                od.popitem(last=False)
    return hits, counted


def run_multi_lru_all(
    caches: list[CacheState],
    objs,
    flat,
    offsets,
    count_from: int,
    q: float = 1.0,
    rng: np.random.Generator | None = None,
) -> tuple[int, int]:
    if q < 1.0 and rng is None:
        raise ValueError("q < 1 requires an rng")
    ods = [c._od for c in caches]
    cap = caches[0].capacity if caches else 0
    hits = counted = 0
    buf: list[float] = []
    bpos = 0
    for i, o in enumerate(objs):
        b = offsets[i]
        e = offsets[i + 1]
        count = i >= count_from
        counted += count
        if b == e:
            continue
        hit = False
        for k in range(b, e):
            od = ods[flat[k]]
            if o in od:
                od.move_to_end(o)
                hit = True
        if hit:
            hits += count
            continue
        if q >= 1.0:
            for k in range(b, e):
                od = ods[flat[k]]
                od[o] = None
                if len(od) > cap:
                    od.popitem(last=False)
        else:
            for k in range(b, e):
                if bpos == len(buf):
                    buf = rng.random(4096).tolist()
                    bpos = 0
                u = buf[bpos]
                bpos += 1
                if u < q:
                    od = ods[flat[k]]
                    od[o] = None
                    if len(od) > cap:
                        od.popitem(last=False)
    return hits, counted
