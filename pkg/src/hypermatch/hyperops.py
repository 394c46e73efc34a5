"""Ball operations expressed through autodiff primitives.

Each function here is the graph twin of a kernel in `geometry`, written
so the two run the identical numpy call sequence and agree bit-for-bit
on the forward pass. The distance is deliberately NOT the symmetric
closed form the eager kernel uses: inside the training graph it stays
the composition mobius_add -> norm -> arctanh, so finite differences
validate the whole primitive chain instead of a hand-derived gradient.
"""

from __future__ import annotations

import math

from . import geometry
from .autodiff import (
    Tensor,
    arctanh,
    ball_guard,
    matmul,
    maximum,
    norm_lastdim,
    sqrt,
    tanh,
)

MIN_NORM = geometry.MIN_NORM


def _sumsq(x: Tensor) -> Tensor:
    return (x * x).sum(axis=-1, keepdims=True)


def mobius_add(x: Tensor, y: Tensor, c: float) -> Tensor:
    coef = geometry.xy_coefficient()
    xy = (x * y).sum(axis=-1, keepdims=True)
    x2 = _sumsq(x)
    y2 = _sumsq(y)
    num = (1.0 + coef * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + coef * c * xy + c * c * x2 * y2
    return ball_guard(num / den, c)


def mobius_matvec(m: Tensor, x: Tensor, c: float) -> Tensor:
    mx = matmul(x, m.T)
    if c == 0.0:
        return mx
    sc = math.sqrt(c)
    xn = norm_lastdim(x)
    mxn = norm_lastdim(mx)
    safe_x = maximum(xn, MIN_NORM)
    safe_mx = maximum(mxn, MIN_NORM)
    res = (1.0 / sc) * tanh((mxn / safe_x) * arctanh(sc * xn)) * (mx / safe_mx)
    return ball_guard(res, c)


def expmap0(v: Tensor, c: float) -> Tensor:
    if c == 0.0:
        return v
    sc = math.sqrt(c)
    vn = norm_lastdim(v)
    safe = maximum(vn, MIN_NORM)
    y = tanh(sc * vn) * (v / (sc * safe))
    return ball_guard(y, c)


def logmap0(y: Tensor, c: float) -> Tensor:
    if c == 0.0:
        return y
    sc = math.sqrt(c)
    yn = norm_lastdim(y)
    safe = maximum(yn, MIN_NORM)
    return arctanh(sc * yn) * (y / (sc * safe))


def distance(x: Tensor, y: Tensor, c: float) -> Tensor:
    """Ball distance as the primitive chain, keepdims shape (..., 1).

    At c = 0 this is the flat limit 2||y - x||, matching the eager
    `euclidean_distance_limit`.
    """
    w = mobius_add(-x, y, c)
    wn = norm_lastdim(w)
    if c == 0.0:
        return 2.0 * wn
    sc = math.sqrt(c)
    return (2.0 / sc) * arctanh(sc * wn)


def poincare_to_klein(x: Tensor, c: float) -> Tensor:
    return (2.0 * x) / (1.0 + c * _sumsq(x))


def klein_to_poincare(x: Tensor, c: float) -> Tensor:
    s = maximum(1.0 - c * _sumsq(x), 0.0)
    return ball_guard(x / (1.0 + sqrt(s)), c)


def lorentz_factor(x_klein: Tensor, c: float) -> Tensor:
    s = maximum(1.0 - c * _sumsq(x_klein), MIN_NORM)
    return 1.0 / sqrt(s)


def einstein_midpoint(points: Tensor, c: float) -> Tensor:
    """Lorentz-weighted mean of a (M, d) stack, result shape (d,)."""
    k = poincare_to_klein(points, c)
    g = lorentz_factor(k, c)
    mid = (g * k).sum(axis=0) / g.sum(axis=0)
    return klein_to_poincare(mid, c)
