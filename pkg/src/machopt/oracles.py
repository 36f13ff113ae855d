"""Brute-force reference implementations used by the test suite.

Nothing here imports from the modules it checks; each routine is a slow,
direct restatement of the definition.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_C = dict(
    OS_SN=48, IM_PN=8, OS_ID=161.9, AG_L=0.75, IM_ID=110, ZIM_UV=1,
    IM_V1=0, IM_W2=0.7, OS_WS1=3.34, OS_H1=0.27, ZOS_UV=1,
)  # fmt: skip


def direct_geometry(x, g10_form="edge"):
    """Hand substitution of the IPM geometry; returns (intermediates, g list).

    Raises ValueError on a negative radicand rather than flagging it.
    """
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = [float(v) for v in x]
    c = _C
    v = {}
    v["IM_OD"] = c["OS_ID"] - 2 * c["AG_L"]
    v["ZIM_VE"] = 180 * c["ZIM_UV"] / c["IM_PN"]
    v["ZIM_OR"] = v["IM_OD"] / 2
    v["ZOS_Y3"] = c["OS_WS1"] / 2
    v["ZOS_VE"] = 180 * c["ZOS_UV"] / c["OS_SN"]
    v["ZIM_X2"] = v["ZIM_OR"] - x1
    v["ZOS_V1A"] = x7 - x8 / 2 - x9 - c["OS_H1"]
    v["ZOS_V1B"] = math.sqrt(v["ZOS_V1A"] ** 2 - ((x8 / 2) ** 2 - v["ZOS_Y3"] ** 2))
    a = (x4 / 2) * (math.pi / 180)
    v["ZIM_X1"] = v["ZIM_X2"] - x2 / math.sin(a)
    v["ZIM_Y1"] = 0.0
    v["ZIM_X8"] = ((v["ZIM_OR"] - x5) ** 2 - (x3 + c["IM_W2"]) ** 2 + v["ZIM_X2"] ** 2) / (2 * v["ZIM_X2"])
    v["ZIM_Y8"] = math.sqrt((v["ZIM_OR"] - x5) ** 2 - v["ZIM_X8"] ** 2)
    v["ZIM_X4"] = v["ZIM_X2"] + x3 * math.cos(a)
    v["ZIM_Y4"] = x3 * math.sin(a)
    v["ZIM_X5"] = v["ZIM_X4"] - x2 * math.sin(a)
    v["ZIM_Y5"] = v["ZIM_Y4"] + x2 * math.cos(a)
    ve = v["ZIM_VE"] * (math.pi / 180)
    tv = (x4 / 2 + c["IM_V1"]) * (math.pi / 180)
    v["ZIM_K1"] = v["ZIM_Y5"] + x6 / (2 * math.cos(ve)) - v["ZIM_X5"] * math.tan(tv)
    v["ZIM_K2"] = math.tan(ve) - math.tan(tv)
    v["ZIM_X7"] = v["ZIM_K1"] / v["ZIM_K2"]
    v["ZIM_Y7"] = v["ZIM_X7"] * math.tan(ve) - x6 / (2 * math.cos(ve))
    v["ZOS_V1"] = (2 * math.atan2(v["ZOS_V1A"] - v["ZOS_V1B"], x8 / 2 + v["ZOS_Y3"])) * (180 / math.pi)
    gap = v["ZIM_X7"] - v["ZIM_X5"]
    g10_denominator = math.cos(a) if g10_form == "edge" else a
    g = [
        -(math.hypot(v["ZIM_X1"], v["ZIM_Y1"]) - (c["IM_ID"] / 2 + 2)),
        math.hypot(v["ZIM_X4"], v["ZIM_Y4"]) - (v["IM_OD"] / 2 - 1),
        -gap,
        -(v["ZIM_Y7"] - v["ZIM_Y5"]),
        math.hypot(v["ZIM_X7"], v["ZIM_Y7"]) - (v["IM_OD"] / 2 - x5 - 1),
        v["ZIM_X8"] - v["ZIM_X4"] - 3,
        v["ZIM_Y8"] - v["ZIM_Y4"] - 1,
        -(c["OS_WS1"] - x10),
        abs(v["ZOS_V1"] - v["ZOS_VE"]) - v["ZOS_VE"],
        -(gap / g10_denominator - 0.1),
    ]
    return v, g


def _beats(fa, cva, fb, cvb):
    if cva <= 0 < cvb:
        return True
    if cvb <= 0 < cva:
        return False
    if cva > 0 and cvb > 0:
        return cva < cvb
    no_worse = all(p <= q for p, q in zip(fa, fb))
    better = any(p < q for p, q in zip(fa, fb))
    return no_worse and better


def brute_sort(objectives, cv):
    """Peel fronts by exhaustive pairwise constrained-domination checks."""
    objectives = [list(map(float, row)) for row in objectives]
    cv = [float(c) for c in cv]
    remaining = list(range(len(objectives)))
    fronts = []
    while remaining:
        front = [
            i
            for i in remaining
            if not any(_beats(objectives[j], cv[j], objectives[i], cv[i]) for j in remaining if j != i)
        ]
        fronts.append(sorted(front))
        remaining = [i for i in remaining if i not in front]
    return fronts


def mc_hypervolume(front, samples=1_000_000, seed=0):
    """Fraction of the unit box dominated by a front already scaled to [0, 1]^2.

    Reference point is (1, 1).
    """
    pts = np.asarray(front, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 200_000
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        u = rng.random((m, 2))
        covered = np.zeros(m, dtype=bool)
        for p in pts:
            covered |= (u[:, 0] >= p[0]) & (u[:, 1] >= p[1])
        hits += int(covered.sum())
        done += m
    return hits / samples


def corner_search(x_real, feasible):
    """Return some feasible floor/ceil rounding corner of ``x_real`` or None.

    ``feasible`` is a predicate on a candidate vector.
    """
    x_real = [float(v) for v in x_real]
    if len(x_real) > 16:
        raise ValueError("corner search is limited to 16 variables")
    choices = []
    for v in x_real:
        k = v * 100
        if abs(k - round(k)) <= 1e-7:
            choices.append((round(k) / 100,))
        else:
            choices.append((math.floor(k) / 100, math.ceil(k) / 100))
    for corner in itertools.product(*choices):
        if feasible(np.array(corner)):
            return np.array(corner)
    return None


def hand_tradeoff(front):
    """Trade-off of each point against every other point (minimization)."""
    out = []
    for i, fi in enumerate(front):
        best = None
        for j, fj in enumerate(front):
            if i == j:
                continue
            loss_terms = [b - a for a, b in zip(fi, fj) if b > a]
            gain_terms = [a - b for a, b in zip(fi, fj) if a > b]
            if not gain_terms:
                continue
            loss = sum(loss_terms) / len(loss_terms) if loss_terms else 0.0
            ratio = loss / (sum(gain_terms) / len(gain_terms))
            best = ratio if best is None else max(best, ratio)
        out.append(best)
    return out
