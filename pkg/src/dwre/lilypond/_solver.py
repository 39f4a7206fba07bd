"""Segment-growth solver for the one-sided anisotropic lilypond rule.

Every point grows a half-open axis-parallel segment at unit speed and
freezes when its tip hits another segment's current extent; the hit
segment keeps growing.  Under genericity only perpendicular pairs
interact, and each ray crossing yields one candidate: the later arriver is
stopped by the earlier one.  Processing candidates in increasing stopping
time needs no rollback, because any assignment that invalidates a
candidate happens at a strictly earlier time.

solve() runs that sweep with banded candidate generation under an
escalating distance cap; oracle_solve() is an independent O(n^2)
fixed-point iteration used to cross-check it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    DIRECTION,
    MarkedConfiguration,
    require_generic_lily,
)
from ..errors import GenericityError, ValidationError
from ..walks import WalkGraph

DIR_AXIS = (0, 0, 1, 1)  # travel axis per direction code
DIR_SIGN = (1.0, -1.0, 1.0, -1.0)
PERP_CLASSES = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}


@dataclass(frozen=True)
class LilypondSolution:
    """Growth length, stopping neighbor, and tip per point (inf/-1/clipped when unstopped)."""

    f: np.ndarray  # (n,) float, +inf when never stopped in the window
    stopper: np.ndarray  # (n,) int64, -1 when unstopped
    tip: np.ndarray  # (n, 2): exact tip when finite, window-clipped otherwise

    def __post_init__(self):
        for name in ("f", "stopper", "tip"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def censored(self) -> np.ndarray:
        return ~np.isfinite(self.f)

    @property
    def n(self) -> int:
        return self.f.size


def _require_segment_input(config: MarkedConfiguration, eps=None) -> None:
    if config.mark_kind != DIRECTION:
        raise ValidationError("segment model needs direction marks")
    if config.dim != 2:
        raise ValidationError("segment model is planar")
    require_generic_lily(config, eps)


def _clipped_tips(config: MarkedConfiguration, f: np.ndarray, stopper: np.ndarray) -> np.ndarray:
    """Exact tips for stopped points, window-edge tips for unstopped ones.

    A stopped tip shares its travel-axis coordinate with the stopper's base
    and its cross coordinate with its own base, so both components are
    exact copies of input coordinates.
    """
    pos = config.positions
    n = config.n
    tip = pos.copy()
    lo = config.window.lo
    hi = config.window.hi
    marks = config.marks
    for code in range(4):
        axis = DIR_AXIS[code]
        sign = DIR_SIGN[code]
        cls = marks == code
        stopped = cls & (stopper >= 0)
        if stopped.any():
            tip[stopped, axis] = pos[stopper[stopped], axis]
        free = cls & (stopper < 0)
        if free.any():
            tip[free, axis] = hi[axis] if sign > 0 else lo[axis]
    return tip


def _gen_candidates(pos, marks, stoppee_mask, L_prev, L):
    """All candidates with stopping time in (L_prev, L] for masked stoppees.

    Returns (t, stoppee, stopper, t_stopper) arrays.  Candidate of pair
    (x, y): the crossing of x's ray with y's ray, admissible when y reaches
    it strictly first.
    """
    out_t, out_x, out_y, out_ty = [], [], [], []
    for cx in range(4):
        ids_x = np.nonzero(stoppee_mask & (marks == cx))[0]
        if not ids_x.size:
            continue
        va = DIR_AXIS[cx]
        vs = DIR_SIGN[cx]
        ux = vs * pos[ids_x, va]
        for cy in PERP_CLASSES[cx]:
            ids_y = np.nonzero(marks == cy)[0]
            if not ids_y.size:
                continue
            wa = DIR_AXIS[cy]
            ws = DIR_SIGN[cy]
            qx = ws * pos[ids_x, wa]
            uy = vs * pos[ids_y, va]
            qy = ws * pos[ids_y, wa]
            # encode (band of q, u) into one sortable axis; bands have
            # width L so two consecutive bands cover [qx - L, qx)
            uspan = float(uy.max() - uy.min()) + L + 2.0
            ubase = float(uy.min())
            band = np.floor(qy / L)
            enc = band * uspan + (uy - ubase)
            order = np.argsort(enc, kind="stable")
            enc_s = enc[order]
            uy_s = uy[order]
            qy_s = qy[order]
            ids_y_s = ids_y[order]
            k_hi = np.floor(qx / L)
            margin = 1e-9 * uspan
            for off in (0.0, -1.0):
                k = k_hi + off
                lo_enc = k * uspan + (ux + L_prev - ubase) - margin
                hi_enc = k * uspan + (ux + L - ubase) + margin
                lo_i = np.searchsorted(enc_s, lo_enc, side="right")
                hi_i = np.searchsorted(enc_s, hi_enc, side="right")
                counts = hi_i - lo_i
                total = int(counts.sum())
                if not total:
                    continue
                rep = np.repeat(np.arange(ids_x.size), counts)
                cum = np.cumsum(counts)
                flat = np.arange(total) + np.repeat(lo_i - (cum - counts), counts)
                du = uy_s[flat] - ux[rep]
                dq = qx[rep] - qy_s[flat]
                keep = (du > L_prev) & (du <= L) & (dq > 0.0) & (dq < du)
                if not keep.any():
                    continue
                out_t.append(du[keep])
                out_x.append(ids_x[rep[keep]])
                out_y.append(ids_y_s[flat[keep]])
                out_ty.append(dq[keep])
    if not out_t:
        empty = np.zeros(0)
        return empty, empty.astype(np.int64), empty.astype(np.int64), empty
    return (
        np.concatenate(out_t),
        np.concatenate(out_x),
        np.concatenate(out_y),
        np.concatenate(out_ty),
    )


def solve(config: MarkedConfiguration, eps: float = None) -> LilypondSolution:
    """Unique growth lengths and stopping neighbors of the segment system.

    Event sweep: candidates are processed in increasing stopping time; a
    candidate is valid iff the stopper still covers the crossing point,
    i.e. its own length exceeds its arrival offset.  Candidates are
    generated in rounds under a doubling distance cap so that only a
    near-linear number of pairs is ever materialized.
    """
    _require_segment_input(config, eps)
    n = config.n
    pos = config.positions
    marks = config.marks
    inf = float("inf")
    f = [inf] * n
    stop = [-1] * n
    density = max(n / config.window.volume, 1e-12)
    span = float(max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), 1e-9)) if n > 1 else 1.0
    max_du = span * 1.0000001 + 1e-9
    L = min(2.0 / np.sqrt(density), max_du)
    L_prev = 0.0
    unassigned = np.ones(n, dtype=bool)
    while True:
        t, sx, sy, ty = _gen_candidates(pos, marks, unassigned, L_prev, L)
        if t.size:
            order = np.argsort(t, kind="stable")
            t_l = t[order].tolist()
            sx_l = sx[order].tolist()
            sy_l = sy[order].tolist()
            ty_l = ty[order].tolist()
            for i in range(len(t_l)):
                x = sx_l[i]
                if f[x] is not inf and f[x] < inf:
                    continue
                if ty_l[i] < f[sy_l[i]]:
                    f[x] = t_l[i]
                    stop[x] = sy_l[i]
        if L >= max_du:
            break
        f_arr = np.asarray(f)
        unassigned = ~np.isfinite(f_arr)
        if not unassigned.any():
            break
        L_prev = L
        L = min(2.0 * L, max_du)
    f_arr = np.asarray(f, dtype=float)
    stop_arr = np.asarray(stop, dtype=np.int64)
    tip = _clipped_tips(config, f_arr, stop_arr)
    return LilypondSolution(f=f_arr, stopper=stop_arr, tip=tip)


def _pair_candidates(pos, marks):
    """Per-point candidate arrays (stopper id, du, dq) via full pair scans."""
    n = pos.shape[0]
    cands = [([], [], []) for _ in range(n)]
    for cx in range(4):
        ids_x = np.nonzero(marks == cx)[0]
        if not ids_x.size:
            continue
        va, vs = DIR_AXIS[cx], DIR_SIGN[cx]
        for cy in PERP_CLASSES[cx]:
            ids_y = np.nonzero(marks == cy)[0]
            if not ids_y.size:
                continue
            wa, ws = DIR_AXIS[cy], DIR_SIGN[cy]
            du = vs * (pos[ids_y, va][None, :] - pos[ids_x, va][:, None])
            dq = ws * (pos[ids_x, wa][:, None] - pos[ids_y, wa][None, :])
            ok = (du > 0.0) & (dq > 0.0) & (dq < du)
            xi, yi = np.nonzero(ok)
            for a, b in zip(xi, yi):
                lst = cands[ids_x[a]]
                lst[0].append(ids_y[b])
                lst[1].append(du[a, b])
                lst[2].append(dq[a, b])
    return [
        (
            np.asarray(c[0], dtype=np.int64),
            np.asarray(c[1], dtype=float),
            np.asarray(c[2], dtype=float),
        )
        for c in cands
    ]


ORACLE_SIZE_CAP = 1500


def oracle_solve(
    config: MarkedConfiguration, eps: float = None, max_passes: int = None
) -> LilypondSolution:
    """Gauss-Seidel fixed point: independent reference for solve().

    Starts from all-unstopped and repeatedly recomputes every point's
    length as the minimum admissible stopping time given current lengths,
    updating in place, until a full pass changes nothing.  O(n^2) setup,
    so capped to small inputs.
    """
    _require_segment_input(config, eps)
    n = config.n
    if n > ORACLE_SIZE_CAP:
        raise ValidationError(f"oracle is O(n^2); got n = {n} > {ORACLE_SIZE_CAP}")
    pos = config.positions
    cands = _pair_candidates(pos, config.marks)
    inf = float("inf")
    f = np.full(n, inf)
    stop = np.full(n, -1, dtype=np.int64)
    if max_passes is None:
        max_passes = max(64, 2 * n)
    for _ in range(max_passes):
        changed = False
        for x in range(n):
            ids_y, du, dq = cands[x]
            if not ids_y.size:
                continue
            ok = dq < f[ids_y]
            if ok.any():
                j = np.argmin(np.where(ok, du, inf))
                new_f = float(du[j])
                new_stop = int(ids_y[j])
            else:
                new_f = inf
                new_stop = -1
            if new_f != f[x] or new_stop != stop[x]:
                f[x] = new_f
                stop[x] = new_stop
                changed = True
        if not changed:
            break
    else:
        raise GenericityError("fixed-point iteration did not settle within the pass cap")
    tip = _clipped_tips(config, f, stop)
    return LilypondSolution(f=f, stopper=stop, tip=tip)


def _segment_interval(base, tip_eff, axis):
    a = base[axis]
    b = tip_eff[axis]
    return (a, b) if a <= b else (b, a)


def verify_solution(
    config: MarkedConfiguration, sol: LilypondSolution, eps: float = 1e-9
) -> bool:
    """Literal O(n^2) check of the hard-core and stopping-neighbor properties.

    Hard-core: no two half-open segments [base, tip) intersect (touching a
    segment exactly at one's own tip is legal).  Stopping neighbor: every
    finite-length point's tip lies on its stopper's half-open segment,
    strictly closer to the stopper's base than its own length, and on no
    other segment.
    """
    if config.mark_kind != DIRECTION or sol.n != config.n:
        return False
    n = config.n
    pos = config.positions
    marks = config.marks
    f = sol.f
    tip = sol.tip
    lengths = np.where(np.isfinite(f), f, np.abs(tip - pos).max(axis=1))
    span = float(max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), 1.0)) if n > 1 else 1.0
    tol = eps * span

    axes = np.array([DIR_AXIS[m] for m in marks])
    signs = np.array([DIR_SIGN[m] for m in marks])

    for i in range(n):
        if np.isfinite(f[i]) and (f[i] <= 0 or sol.stopper[i] < 0):
            return False
        if not np.isfinite(f[i]) and sol.stopper[i] != -1:
            return False

    # hard-core sweep
    for i in range(n):
        ai, si = axes[i], signs[i]
        ci = 1 - ai
        for j in range(i + 1, n):
            aj, sj = axes[j], signs[j]
            cj = 1 - aj
            if ai == aj:
                # parallel: intersect only if collinear with overlapping spans
                if abs(pos[i, ci] - pos[j, ci]) > tol:
                    continue
                lo_i, hi_i = _segment_interval(pos[i], tip[i], ai)
                lo_j, hi_j = _segment_interval(pos[j], tip[j], aj)
                if min(hi_i, hi_j) - max(lo_i, lo_j) > tol:
                    return False
                continue
            # perpendicular: the crossing fixes coordinate ai from j's base
            # and coordinate aj from i's base
            ti = si * (pos[j, ai] - pos[i, ai])
            tj = sj * (pos[i, aj] - pos[j, aj])
            if 0.0 <= ti < lengths[i] and 0.0 <= tj < lengths[j]:
                return False

    # stopping neighbors
    for i in range(n):
        if not np.isfinite(f[i]):
            continue
        y = int(sol.stopper[i])
        on_count = 0
        for j in range(n):
            if j == i:
                continue
            aj, sj = axes[j], signs[j]
            cj = 1 - aj
            if abs(tip[i, cj] - pos[j, cj]) > tol:
                continue
            proj = sj * (tip[i, aj] - pos[j, aj])
            if 0.0 <= proj < lengths[j]:
                on_count += 1
                if j != y:
                    return False
        if on_count != 1:
            return False
        dist_to_base = float(np.linalg.norm(tip[i] - pos[y]))
        if not dist_to_base < f[i]:
            return False
    return True


def build_lily_graph(config: MarkedConfiguration, sol: LilypondSolution) -> WalkGraph:
    """Walk graph of the segment system: edge to the stopping neighbor.

    Unstopped points are censored: they carry no out-edge and are excluded
    from walk statistics.
    """
    if sol.n != config.n:
        raise ValidationError("solution does not match configuration")
    censored = sol.censored
    nxt = np.where(censored, -1, sol.stopper).astype(np.int64)
    geo = sol.tip.copy()
    geo[censored] = np.nan
    return WalkGraph(next=nxt, geo=geo, censored=censored)
