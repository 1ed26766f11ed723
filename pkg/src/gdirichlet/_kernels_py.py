"""Pure Python/numpy versions of the compiled kernels (same signatures and results)."""

import numpy as np

IMPLEMENTATION = "python"

_CHUNK = 4096
_BATCH = 1 << 16


def enum_upper(B, s, lo, hi, max_nodes, skip_zero, max_points):
    """All integer z with lo <= B z + s <= hi for upper-triangular B.

    Level-by-level expansion over numpy arrays, processed depth first in
    bounded batches so that memory stays flat and early exit (``max_points``)
    stays cheap.
    """
    B = np.asarray(B, dtype=float)
    s = np.asarray(s, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = B.shape[0]
    state = {"nodes": 0, "found": [], "count": 0, "over": False}

    def children(zs, part, level):
        # zs: (K, d) with columns > level assigned; part: (K,) partial sum of row `level`.
        # Yields surviving children in batches of at most _BATCH candidates.
        diag = B[level, level]
        a = (lo[level] - part) / diag
        b = (hi[level] - part) / diag
        lo_z = np.ceil(np.minimum(a, b)).astype(np.int64)
        hi_z = np.floor(np.maximum(a, b)).astype(np.int64)
        counts = np.maximum(hi_z - lo_z + 1, 0)
        total = int(counts.sum())
        ends = np.cumsum(counts)
        starts = ends - counts
        for k0 in range(0, total, _BATCH):
            k = np.arange(k0, min(total, k0 + _BATCH))
            # nodes are charged as they are generated, like the depth-first compiled loop
            state["nodes"] += len(k)
            if state["nodes"] > max_nodes:
                state["over"] = True
                return
            rep = np.searchsorted(ends, k, side="right")
            new = zs[rep].copy()
            new[:, level] = lo_z[rep] + (k - starts[rep])
            x = part[rep] + diag * new[:, level]
            ok = (x >= lo[level]) & (x <= hi[level])
            yield new[ok]

    def descend(zs, level):
        if state["over"] or state["count"] >= max_points:
            return
        if level < 0:
            if skip_zero:
                zs = zs[np.any(zs != 0, axis=1)]
            take = zs[: max_points - state["count"]]
            if len(take):
                state["found"].append(take)
                state["count"] += len(take)
            return
        part = s[level] + zs[:, level + 1:] @ B[level, level + 1:] if level < d - 1 else \
            np.full(len(zs), s[level])
        for kids in children(zs, np.asarray(part, dtype=float), level):
            for start in range(0, len(kids), _CHUNK):
                descend(kids[start:start + _CHUNK], level - 1)
                if state["over"] or state["count"] >= max_points:
                    return

    descend(np.zeros((1, d), dtype=np.int64), d - 1)
    if state["over"]:
        return np.zeros((0, d), dtype=np.int64), state["nodes"], 1
    if state["found"]:
        return np.concatenate(state["found"]), state["nodes"], 0
    return np.zeros((0, d), dtype=np.int64), state["nodes"], 0


def merge_sorted(lefts, rights, rtol):
    """Merge closed intervals sorted by left end; touching within rtol merges."""
    lefts = np.asarray(lefts, dtype=float)
    rights = np.asarray(rights, dtype=float)
    if lefts.size == 0:
        return np.zeros(0), np.zeros(0)
    reach = np.maximum.accumulate(rights)
    prev = reach[:-1]
    new_block = lefts[1:] > prev + rtol * np.abs(prev)
    starts = np.concatenate([[0], np.nonzero(new_block)[0] + 1])
    ends = np.concatenate([starts[1:] - 1, [lefts.size - 1]])
    return lefts[starts].copy(), reach[ends].copy()


def systole_grid(R, Q, sr, sq):
    """out[g] = min_k max(max_i R[k,i] sr[g,i], max_j Q[k,j] sq[g,j])."""
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    sr = np.asarray(sr, dtype=float)
    sq = np.asarray(sq, dtype=float)
    G = sr.shape[0]
    out = np.full(G, 1e308)
    step = max(1, 2_000_000 // max(1, R.shape[0]))
    for g0 in range(0, G, step):
        g1 = min(G, g0 + step)
        vr = np.max(R[None, :, :] * sr[g0:g1, None, :], axis=2)
        vq = np.max(Q[None, :, :] * sq[g0:g1, None, :], axis=2)
        out[g0:g1] = np.minimum(out[g0:g1], np.min(np.maximum(vr, vq), axis=1))
    return out
