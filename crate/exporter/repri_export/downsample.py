from fractions import Fraction

import numpy as np


def downsample_mask(full, height, width):
    """Area-averages a binary mask onto a height x width grid, then keeps
    cells whose foreground share is at least one half."""
    full = np.asarray(full, dtype=bool)
    h0, w0 = full.shape
    if not (0 < height <= h0 and 0 < width <= w0):
        raise ValueError(f"cannot downsample {h0}x{w0} to {height}x{width}")
    rows = [_cover(i, h0, height) for i in range(height)]
    cols = [_cover(j, w0, width) for j in range(width)]
    out = np.zeros((height, width), dtype=np.uint8)
    for i, rw in enumerate(rows):
        for j, cw in enumerate(cols):
            area = sum(a * b for r, a in rw for c, b in cw if full[r, c])
            cell = Fraction(h0, height) * Fraction(w0, width)
            out[i, j] = area >= cell / 2
    return out


def _cover(i, source, target):
    """Source pixels overlapping [i*source/target, (i+1)*source/target)."""
    lo = Fraction(i * source, target)
    hi = Fraction((i + 1) * source, target)
    out = []
    for s in range(int(lo), -(-hi.numerator // hi.denominator)):
        a, b = max(lo, Fraction(s)), min(hi, Fraction(s + 1))
        if b > a:
            out.append((s, b - a))
    return out
