"""Brute-force reference computations.

These deliberately avoid the package's code paths: exhaustive recursion
instead of dynamic programming, per-threshold counting instead of sorted
searches, and full enumeration of speaker mappings instead of an
assignment solver.
"""

import itertools
import math

import numpy as np


def edit_distance_exhaustive(ref, hyp):
    """Minimum edit cost over every alignment, enumerated recursively."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    return min(
        edit_distance_exhaustive(ref[1:], hyp[1:]) + (ref[0] != hyp[0]),
        edit_distance_exhaustive(ref[1:], hyp) + 1,
        edit_distance_exhaustive(ref, hyp[1:]) + 1,
    )


def eer_sweep(targets, nontargets):
    """EER by counting FAR/FRR at every candidate threshold.

    Candidates are -inf, +inf and midpoints between neighbouring distinct
    scores; the crossing of FAR and FRR is found on the resulting polyline.
    """
    scores = sorted(set(targets) | set(nontargets))
    cands = [-math.inf] + [(a + b) / 2 for a, b in zip(scores, scores[1:])] + [math.inf]
    # below the smallest score: same point as -inf
    pts = []
    for th in cands:
        fa = sum(1 for s in nontargets if s >= th) / len(nontargets)
        fr = sum(1 for s in targets if s < th) / len(targets)
        pts.append((fa, fr))
    for (fa0, fr0), (fa1, fr1) in zip(pts, pts[1:]):
        d0, d1 = fr0 - fa0, fr1 - fa1
        if d0 == 0:
            return fa0
        if d0 < 0 <= d1:
            t = -d0 / (d1 - d0)
            return fa0 + t * (fa1 - fa0)
    return pts[-1][0]


def mcc_direct(tp, tn, fp, fn):
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(den)


def dft_power(frame, n_fft):
    """|DFT|^2 by the defining sum."""
    x = np.zeros(n_fft)
    x[: len(frame)] = frame
    n = np.arange(n_fft)
    out = []
    for k in range(n_fft // 2 + 1):
        c = np.sum(x * np.exp(-2j * np.pi * k * n / n_fft))
        out.append(abs(c) ** 2)
    return np.array(out)


def _union(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = [out[-1][0], max(out[-1][1], b)]
        else:
            out.append([a, b])
    return [tuple(i) for i in out]


def _intersect(xs, ys):
    out = []
    for a, b in xs:
        for c, d in ys:
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                out.append((lo, hi))
    return out


def _measure(intervals):
    return sum(b - a for a, b in _union(intervals))


def der_bruteforce(ref, hyp, collar, include_overlap=True):
    """DER numerator parts by interval algebra and exhaustive mapping.

    ``ref``/``hyp`` are lists of (speaker, start, end). Returns
    ``(numerator, total)``.
    """
    ref_spk = {}
    for s, a, b in ref:
        ref_spk.setdefault(s, []).append((a, b))
    hyp_spk = {}
    for s, a, b in hyp:
        hyp_spk.setdefault(s, []).append((a, b))
    ref_spk = {s: _union(v) for s, v in ref_spk.items()}
    hyp_spk = {s: _union(v) for s, v in hyp_spk.items()}

    horizon = max([b for _, _, b in ref + hyp] + [0.0]) + collar + 1.0
    excluded = []
    if collar > 0:
        for spans in ref_spk.values():
            for a, b in spans:
                excluded += [(max(0.0, a - collar), a + collar), (max(0.0, b - collar), b + collar)]
    if not include_overlap:
        names = sorted(ref_spk)
        for i, j in itertools.combinations(names, 2):
            excluded += _intersect(ref_spk[i], ref_spk[j])
    excluded = _union(excluded)
    scored, t = [], 0.0
    for a, b in excluded:
        if a > t:
            scored.append((t, a))
        t = max(t, b)
    scored.append((t, horizon))

    ref_in = {s: _intersect(v, scored) for s, v in ref_spk.items()}
    hyp_in = {s: _intersect(v, scored) for s, v in hyp_spk.items()}
    total = sum(_measure(v) for v in ref_in.values())

    # sum over time of max(#ref, #hyp): sweep elementary pieces
    cuts = sorted({p for v in (*ref_in.values(), *hyp_in.values()) for iv in v for p in iv})
    worst = 0.0
    for a, b in zip(cuts, cuts[1:]):
        m = 0.5 * (a + b)
        r = sum(any(x <= m < y for x, y in v) for v in ref_in.values())
        h = sum(any(x <= m < y for x, y in v) for v in hyp_in.values())
        worst += (b - a) * max(r, h)

    hyps = sorted(hyp_in)
    refs = sorted(ref_in)
    best = 0.0
    slots = refs + [None] * len(hyps)
    for perm in itertools.permutations(slots, len(hyps)):
        got = 0.0
        for h, r in zip(hyps, perm):
            if r is not None:
                got += _measure(_intersect(hyp_in[h], ref_in[r]))
        best = max(best, got)
    return worst - best, total
