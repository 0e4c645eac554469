"""Independent brute-force oracles for derived test values.

These deliberately share no code with the package: plain loops and direct
formulas, so each oracle stays an independent route to the same quantity.
"""

import math

import numpy as np


def quantile_oracle(values, q):
    """Sorted-order statistic with linear interpolation between closest ranks."""
    s = sorted(float(v) for v in values)
    h = q * (len(s) - 1)
    lo = math.floor(h)
    hi = math.ceil(h)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def compress_oracle(values, q_low, q_high):
    """Per-pixel linear map with explicit clip and round-half-up."""
    lo = quantile_oracle(values, q_low)
    hi = quantile_oracle(values, q_high)
    out = []
    for v in values:
        scaled = (v - lo) / (hi - lo) * 255.0
        scaled = min(max(scaled, 0.0), 255.0)
        out.append(min(math.floor(scaled + 0.5), 255.0))
    return out


def mean_std_oracle(values):
    """Two-pass population mean/stddev."""
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def moments_oracle(values):
    """Population mean/stddev, skewness g1, excess kurtosis g2 (0 when flat)."""
    n = len(values)
    mean = sum(values) / n
    m2 = sum((v - mean) ** 2 for v in values) / n
    m3 = sum((v - mean) ** 3 for v in values) / n
    m4 = sum((v - mean) ** 4 for v in values) / n
    if m2 == 0:
        return mean, 0.0, 0.0, 0.0
    return mean, math.sqrt(m2), m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def auc_oracle(scores, labels):
    """O(n^2) pairwise Mann-Whitney with half credit for ties."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auc_oracle_pairwise(scores, labels):
    """Same O(n^2) all-pairs statistic, broadcast over the full pair matrix."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
    return wins / (pos.size * neg.size)


def hog_oracle(pixels, cell=32, block=64, bins=9, block_stride=32, clip=0.2):
    """Straightforward per-pixel-vote HOG with L2-Hys, all plain loops."""
    pixels = [[float(v) for v in row] for row in np.asarray(pixels)]
    h = len(pixels)
    w = len(pixels[0])
    n_cy = h // cell
    n_cx = w // cell
    hist = [[[0.0] * bins for _ in range(n_cx)] for _ in range(n_cy)]
    width = math.pi / bins
    for y in range(n_cy * cell):
        for x in range(n_cx * cell):
            gx = pixels[y][min(x + 1, w - 1)] - pixels[y][max(x - 1, 0)]
            gy = pixels[min(y + 1, h - 1)][x] - pixels[max(y - 1, 0)][x]
            mag = math.hypot(gx, gy)
            ang = math.atan2(gy, gx) % math.pi
            pos = ang / width
            i0 = math.floor(pos)
            frac = pos - i0
            i0 = int(i0) % bins
            i1 = (i0 + 1) % bins
            cy, cx = y // cell, x // cell
            hist[cy][cx][i0] += (1.0 - frac) * mag
            hist[cy][cx][i1] += frac * mag

    bc = block // cell
    sc = block_stride // cell
    out = []
    for by in range(0, n_cy - bc + 1, sc):
        for bx in range(0, n_cx - bc + 1, sc):
            v = []
            for cy in range(by, by + bc):
                for cx in range(bx, bx + bc):
                    v.extend(hist[cy][cx])
            norm = math.sqrt(sum(x * x for x in v))
            if norm > 0:
                v = [min(x / norm, clip) for x in v]
                norm = math.sqrt(sum(x * x for x in v))
                if norm > 0:
                    v = [x / norm for x in v]
            out.extend(v)
    return np.array(out)


def best_stump_oracle(X, y):
    """Exhaustive (feature, midpoint) Gini search; ties to lowest feature, then threshold.

    Returns (gini_after, feature, threshold) for a single split with no
    minimum-leaf constraint beyond non-empty children.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = len(y)

    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = sum(labels) / len(labels)
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)

    best = None
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for a, b in zip(values, values[1:]):
            threshold = (a + b) / 2.0
            left = y[X[:, f] <= threshold]
            right = y[X[:, f] > threshold]
            weighted = (len(left) * gini(left) + len(right) * gini(right)) / n
            key = (weighted, f, threshold)
            if best is None or key < best:
                best = key
    return best
