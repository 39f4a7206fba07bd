"""Out-degree-1 graph analysis: walk tracing, basins, boundary sets, shielding checks.

A WalkGraph stores one optional successor per node (the combinatorial
descendant) and the landing position of that edge (the geometric
descendant).  Censored nodes carry no successor; walks that reach one are
excluded from stuck-walk statistics and counted separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BoxRegion, MarkedConfiguration, centered_box, translate
from .errors import ValidationError

_UNSET = -2  # memo sentinel distinct from censored (-1)


@dataclass(frozen=True)
class WalkGraph:
    """Functional graph: next[i] = successor id or -1, geo[i] = landing point."""

    next: np.ndarray  # (n,) int64, -1 for censored nodes
    geo: np.ndarray  # (n, d) float64, nan rows for censored nodes
    censored: np.ndarray  # (n,) bool

    def __post_init__(self):
        nxt = np.array(self.next, dtype=np.int64, copy=True)
        geo = np.array(self.geo, dtype=float, copy=True)
        cen = np.array(self.censored, dtype=bool, copy=True)
        if not ((nxt == -1) == cen).all():
            raise ValidationError("exactly the censored nodes must lack a successor")
        if nxt.size and nxt.max() >= nxt.size:
            raise ValidationError("successor id out of range")
        for a in (nxt, geo, cen):
            a.setflags(write=False)
        object.__setattr__(self, "next", nxt)
        object.__setattr__(self, "geo", geo)
        object.__setattr__(self, "censored", cen)

    @property
    def n(self) -> int:
        return self.next.size


@dataclass(frozen=True)
class WalkOutcome:
    """Walk summary: hops before the cycle, cycle length, or censoring."""

    tail_length: int
    cycle_length: int
    censored: bool = False


def trace(graph: WalkGraph, start: int) -> WalkOutcome:
    """Follow successors from one node until a repeat or a censored node."""
    n = graph.n
    if not 0 <= start < n:
        raise ValidationError(f"start node {start} out of range")
    nxt = graph.next
    seen = {}
    node = start
    steps = 0
    while True:
        if nxt[node] == -1:
            return WalkOutcome(tail_length=steps, cycle_length=0, censored=True)
        if node in seen:
            first = seen[node]
            return WalkOutcome(tail_length=first, cycle_length=steps - first)
        seen[node] = steps
        node = int(nxt[node])
        steps += 1


def _analyze(graph: WalkGraph):
    """Tail length, cycle length and cycle id for every node, iteratively.

    tail[i] = hops to enter a cycle (0 on the cycle); cyc_len[i] = its
    cycle's length; censored walks get cyc_len 0 and tail = hops walked
    before hitting the censored node.
    """
    n = graph.n
    nxt = graph.next.tolist()
    tail = np.full(n, _UNSET, dtype=np.int64)
    cyc_len = np.zeros(n, dtype=np.int64)
    cyc_id = np.full(n, -1, dtype=np.int64)
    walk_censored = np.zeros(n, dtype=bool)
    n_cycles = 0
    pos_in_path = {}
    for root in range(n):
        if tail[root] != _UNSET:
            continue
        path = []
        pos_in_path.clear()
        node = root
        while True:
            if node == -1:
                # ran off a censored node: everything on the path is censored
                for k, p in enumerate(path):
                    tail[p] = len(path) - k - 1
                    walk_censored[p] = True
                break
            if tail[node] != _UNSET:
                # reached resolved territory; extend its values backwards
                base_tail = tail[node]
                cen = walk_censored[node]
                cid = cyc_id[node]
                clen = cyc_len[node]
                for k, p in enumerate(path):
                    tail[p] = base_tail + len(path) - k
                    walk_censored[p] = cen
                    cyc_id[p] = cid
                    cyc_len[p] = clen
                break
            if node in pos_in_path:
                # new cycle discovered on this path
                start = pos_in_path[node]
                clen = len(path) - start
                cid = n_cycles
                n_cycles += 1
                for p in path[start:]:
                    tail[p] = 0
                    cyc_id[p] = cid
                    cyc_len[p] = clen
                for k, p in enumerate(path[:start]):
                    tail[p] = start - k
                    cyc_id[p] = cid
                    cyc_len[p] = clen
                break
            pos_in_path[node] = len(path)
            path.append(node)
            node = nxt[node]
    return tail, cyc_len, cyc_id, walk_censored, n_cycles


def basin_stats(graph: WalkGraph) -> dict:
    """Cycle basins, tail-length histogram, and censored fraction."""
    tail, cyc_len, cyc_id, walk_censored, n_cycles = _analyze(graph)
    ok = ~walk_censored
    basin_sizes = (
        np.bincount(cyc_id[ok], minlength=n_cycles) if n_cycles else np.zeros(0, int)
    )
    tails_ok = tail[ok]
    hist = np.bincount(tails_ok) if tails_ok.size else np.zeros(0, int)
    cycle_lengths = np.zeros(n_cycles, dtype=np.int64)
    for i in range(graph.n):
        if ok[i] and tail[i] == 0:
            cycle_lengths[cyc_id[i]] = cyc_len[i]
    return {
        "n": graph.n,
        "n_cycles": int(n_cycles),
        "basin_sizes": basin_sizes.tolist(),
        "cycle_lengths": cycle_lengths.tolist(),
        "tail_histogram": hist.tolist(),
        "tails": tails_ok,
        "censored_count": int(walk_censored.sum()),
        "censored_fraction": float(walk_censored.mean()) if graph.n else 0.0,
    }


def boundary_in(
    config: MarkedConfiguration, graph: WalkGraph, z, s: float
) -> set[int]:
    """Points outside the site box whose landing position falls inside it."""
    box = centered_box(s, config.dim, center=tuple(s * np.asarray(z, dtype=float)))
    inside = box.contains(config.positions)
    has_geo = ~graph.censored
    lands_in = np.zeros(config.n, dtype=bool)
    if config.n:
        lands_in[has_geo] = box.contains(graph.geo[has_geo])
    return set(np.nonzero(~inside & lands_in)[0].tolist())


def _enclosed(B: set, Bp: set) -> bool:
    """No B vertex reaches the far region of Z^d \\ Bp (8-adjacency flood)."""
    if not B:
        return True
    pts = np.array(sorted(B | Bp))
    lo = pts.min(axis=0) - 2
    hi = pts.max(axis=0) + 2
    from collections import deque

    seen = set()
    dq = deque(z for z in B if z not in Bp)
    seen.update(dq)
    d = pts.shape[1]
    offsets = [
        tuple(o)
        for o in np.ndindex(*([3] * d))
        if any(v != 1 for v in o)
    ]
    while dq:
        z = dq.popleft()
        if any(z[a] <= lo[a] or z[a] >= hi[a] for a in range(d)):
            return False  # escaped the hull: z is in the infinite component
        for off in offsets:
            w = tuple(z[a] + off[a] - 1 for a in range(d))
            if w in Bp or w in seen:
                continue
            seen.add(w)
            dq.append(w)
    return True


def check_SH(
    config: MarkedConfiguration,
    graph: WalkGraph,
    s: float,
    good_site_checker,
    B: set,
    Bp: set,
) -> dict:
    """Verify the shielding property on one instance.

    For every x whose landing position lies in B (+) site boxes, both x
    itself and the landing position of its successor must stay inside the
    (B u B') site boxes.  Preconditions: B is enclosed by B' on the lattice,
    and the shifted 3s-box configuration at every B' site passes the
    supplied goodness checker.
    """
    B = {tuple(map(int, z)) for z in B}
    Bp = {tuple(map(int, z)) for z in Bp}
    if not _enclosed(B, Bp):
        raise ValidationError("B is not enclosed by B' on the lattice")
    big = centered_box(3 * s, config.dim)
    for z in sorted(Bp):
        shifted = translate(config, tuple(-s * c for c in z)).restrict(big)
        if not good_site_checker(shifted):
            raise ValidationError(f"site {z} of B' fails the goodness event")
    union_sites = B | Bp
    violations = []
    checked = 0
    for x in range(config.n):
        if graph.censored[x]:
            continue
        z_land = tuple(np.floor(graph.geo[x] / s + 0.5).astype(int))
        if z_land not in B:
            continue
        checked += 1
        z_self = tuple(np.floor(config.positions[x] / s + 0.5).astype(int))
        ok_self = z_self in union_sites
        y = int(graph.next[x])
        if graph.censored[y]:
            violations.append((x, "successor censored"))
            continue
        z_next = tuple(np.floor(graph.geo[y] / s + 0.5).astype(int))
        ok_next = z_next in union_sites
        if not ok_self:
            violations.append((x, f"point site {z_self} outside B u B'"))
        if not ok_next:
            violations.append((x, f"successor landing site {z_next} outside B u B'"))
    return {"ok": not violations, "checked": checked, "violations": violations}


def check_stabilization(nested_configs, x_key, build_next) -> bool:
    """Descendant of a point eventually constant along a nested family.

    nested_configs: increasing list of configurations; x_key: (coords...,
    mark) identity of the tracked point; build_next: callable mapping a
    configuration to a dict key -> successor key (None where undefined).
    """
    values = []
    for cfg in nested_configs:
        mapping = build_next(cfg)
        values.append(mapping.get(x_key))
    if not values:
        raise ValidationError("need at least one configuration")
    final = values[-1]
    if final is None:
        return False
    for i in range(len(values)):
        if all(v == final for v in values[i:]):
            return True
    return False
