"""Poincare ball kernels.

Float64 numpy throughout. Points live on the last axis; every op broadcasts
over leading axes, so a single call scores a whole stack of phrases. The ball
of curvature c > 0 is {x : c * ||x||^2 < 1}; c = 0 degenerates to flat space
and each op either handles it in closed form or refuses loudly.
"""

from __future__ import annotations

import math

import numpy as np

# Radius margin used by the eager projection op.
EPS_BALL = 1e-5
# arctanh inputs are clamped into [0, 1 - ATANH_EPS].
ATANH_EPS = 1e-12
# Floor for norm denominators so zero vectors pass through as exact zeros.
MIN_NORM = 1e-15

# Fault-injection switch for the self-test harness: flips the sign of the
# 2c<x,y> coefficient in Mobius addition, silently corrupting the algebra.
_sign_fault = False


def set_sign_fault(enabled: bool) -> None:
    """Enable or disable the deliberate Mobius-addition fault."""
    global _sign_fault
    _sign_fault = bool(enabled)


def xy_coefficient() -> float:
    """Coefficient of c<x,y> in Mobius addition; -2 under the injected fault."""
    return -2.0 if _sign_fault else 2.0


def _check_curvature(c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0.0:
        raise ValueError(f"curvature must be a finite nonnegative float, got {c!r}")
    return c


def _sumsq(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=-1, keepdims=True)


def norm_lastdim(x: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis, keepdims."""
    return np.sqrt(np.sum(x * x, axis=-1, keepdims=True))


def artanh(x: np.ndarray) -> np.ndarray:
    """arctanh on [0, 1), with the argument clamped below 1 - 1e-12.

    Norm arguments are nonnegative by construction, so only the upper end
    needs a guard against rounding onto the pole.
    """
    return np.arctanh(np.clip(x, 0.0, 1.0 - ATANH_EPS))


def ball_guard(x: np.ndarray, c: float) -> np.ndarray:
    """Re-project rows that rounding pushed out of the open ball.

    Interior points pass through bitwise untouched; only rows with
    c * ||x||^2 >= 1 are pulled back to radius (1 - EPS_BALL) / sqrt(c).
    """
    if c == 0.0:
        return x
    sq = _sumsq(x)
    out = c * sq >= 1.0
    if not np.any(out):
        return x
    radius = (1.0 - EPS_BALL) / math.sqrt(c)
    scale = radius / np.sqrt(np.maximum(sq, MIN_NORM))
    return np.where(out, scale * x, x)


def project_to_ball(x: np.ndarray, c: float) -> np.ndarray:
    """Renormalize any point with c * ||x||^2 > (1 - EPS_BALL)^2 onto that radius.

    This is the strict eager projection for untrusted inputs. Internal
    kernels use the looser `ball_guard`, which only repairs genuine
    rounding escapes and so preserves exp/log invertibility near the rim.
    """
    c = _check_curvature(c)
    if c == 0.0:
        return np.asarray(x, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    sq = _sumsq(x)
    limit = (1.0 - EPS_BALL) ** 2
    over = c * sq > limit
    if not np.any(over):
        return x
    scale = (1.0 - EPS_BALL) / (math.sqrt(c) * np.sqrt(np.maximum(sq, MIN_NORM)))
    return np.where(over, scale * x, x)


def conformal_factor(x: np.ndarray, c: float) -> np.ndarray:
    """lambda_x = 2 / (1 - c||x||^2), shape (..., 1). Equals 2 at the origin."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    return 2.0 / (1.0 - c * _sumsq(x))


def mobius_add(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Mobius addition x (+) y on the ball of curvature c.

    Reduces to x + y at c = 0 without a branch. Not commutative for c > 0.
    """
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    coef = xy_coefficient()
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = _sumsq(x)
    y2 = _sumsq(y)
    num = (1.0 + coef * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + coef * c * xy + c * c * x2 * y2
    return ball_guard(num / den, c)


def mobius_matvec(m: np.ndarray, x: np.ndarray, c: float) -> np.ndarray:
    """Mobius matrix-vector product of m (out, in) with ball points x (..., in).

    Zero inputs and zero images map to the origin exactly.
    """
    c = _check_curvature(c)
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != x.shape[-1]:
        raise ValueError(f"matrix {m.shape} does not apply to points of dim {x.shape[-1]}")
    mx = np.matmul(x, m.T)
    if c == 0.0:
        return mx
    sc = math.sqrt(c)
    xn = norm_lastdim(x)
    mxn = norm_lastdim(mx)
    safe_x = np.maximum(xn, MIN_NORM)
    safe_mx = np.maximum(mxn, MIN_NORM)
    res = (1.0 / sc) * np.tanh((mxn / safe_x) * artanh(sc * xn)) * (mx / safe_mx)
    return ball_guard(res, c)


def poincare_distance(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Geodesic distance (2/sqrt(c)) * arctanh(sqrt(c) * ||-x (+) y||).

    Evaluated through the symmetric identity
        ||-x (+) y||^2 = ||x - y||^2 / (1 - 2c<x,y> + c^2 ||x||^2 ||y||^2),
    so d(x, y) and d(y, x) run the same arithmetic and agree bitwise.
    Raises at c = 0, where the formula has no finite limit; use
    `euclidean_distance_limit` for the flat analogue.
    """
    c = _check_curvature(c)
    if c == 0.0:
        raise ValueError(
            "poincare_distance is undefined at curvature 0; "
            "use euclidean_distance_limit"
        )
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    diff = x - y
    d2 = np.sum(diff * diff, axis=-1)
    xy = np.sum(x * y, axis=-1)
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    den = 1.0 - 2.0 * c * xy + c * c * x2 * y2
    arg = np.sqrt(c * d2 / den)
    return (2.0 / math.sqrt(c)) * artanh(arg)


def euclidean_distance_limit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """2 * ||x - y||, the c -> 0 limit of the ball distance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = x - y
    return 2.0 * np.sqrt(np.sum(diff * diff, axis=-1))


def expmap0(v: np.ndarray, c: float) -> np.ndarray:
    """Exponential map at the origin; identity at c = 0, origin for v = 0."""
    c = _check_curvature(c)
    v = np.asarray(v, dtype=np.float64)
    if c == 0.0:
        return v.copy()
    sc = math.sqrt(c)
    vn = norm_lastdim(v)
    safe = np.maximum(vn, MIN_NORM)
    y = np.tanh(sc * vn) * (v / (sc * safe))
    return ball_guard(y, c)


def logmap0(y: np.ndarray, c: float) -> np.ndarray:
    """Logarithm at the origin; inverse of expmap0, identity at c = 0."""
    c = _check_curvature(c)
    y = np.asarray(y, dtype=np.float64)
    if c == 0.0:
        return y.copy()
    sc = math.sqrt(c)
    yn = norm_lastdim(y)
    safe = np.maximum(yn, MIN_NORM)
    return artanh(sc * yn) * (y / (sc * safe))


def expmap(x: np.ndarray, v: np.ndarray, c: float) -> np.ndarray:
    """Exponential map of tangent v at base point x; x + v at c = 0."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if c == 0.0:
        return x + v
    sc = math.sqrt(c)
    lam = 2.0 / (1.0 - c * _sumsq(x))
    vn = norm_lastdim(v)
    safe = np.maximum(vn, MIN_NORM)
    u = np.tanh(sc * lam * vn / 2.0) * (v / (sc * safe))
    return mobius_add(x, u, c)


def logmap(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    """Logarithm of y at base point x; y - x at c = 0, zero tangent at y = x."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if c == 0.0:
        return y - x
    sc = math.sqrt(c)
    w = mobius_add(-x, y, c)
    wn = norm_lastdim(w)
    safe = np.maximum(wn, MIN_NORM)
    lam = 2.0 / (1.0 - c * _sumsq(x))
    return (2.0 / (sc * lam)) * artanh(sc * wn) * (w / safe)


def poincare_to_klein(x: np.ndarray, c: float) -> np.ndarray:
    """Ball to Klein coordinates: x_K = 2x / (1 + c||x||^2)."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    return (2.0 * x) / (1.0 + c * _sumsq(x))


def klein_to_poincare(x: np.ndarray, c: float) -> np.ndarray:
    """Klein to ball coordinates: x_D = x_K / (1 + sqrt(1 - c||x_K||^2))."""
    c = _check_curvature(c)
    x = np.asarray(x, dtype=np.float64)
    s = np.maximum(1.0 - c * _sumsq(x), 0.0)
    return ball_guard(x / (1.0 + np.sqrt(s)), c)


def lorentz_factor(x_klein: np.ndarray, c: float) -> np.ndarray:
    """gamma = 1 / sqrt(1 - c||x_K||^2) for Klein points, shape (..., 1)."""
    c = _check_curvature(c)
    x_klein = np.asarray(x_klein, dtype=np.float64)
    s = np.maximum(1.0 - c * _sumsq(x_klein), MIN_NORM)
    return 1.0 / np.sqrt(s)


def einstein_midpoint(points: np.ndarray, c: float) -> np.ndarray:
    """Lorentz-weighted average of ball points (M, d), returned on the ball.

    Routes through Klein coordinates, where the midpoint is the
    gamma-weighted mean. Works unchanged at c = 0, where every gamma is 1
    and the result is the plain arithmetic mean.
    """
    c = _check_curvature(c)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError(f"expected a nonempty (M, d) stack, got shape {points.shape}")
    k = poincare_to_klein(points, c)
    g = lorentz_factor(k, c)
    mid = np.sum(g * k, axis=0) / np.sum(g, axis=0)
    return klein_to_poincare(mid, c)


class PoincareBall:
    """Validated facade over the kernels for one fixed curvature.

    Hot paths call the module functions directly; this wrapper is for
    interactive use and the self-test harness, where argument checking
    is worth the overhead.
    """

    def __init__(self, c: float = 1.0, dim: int | None = None):
        self.c = _check_curvature(c)
        self.dim = dim

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.dim is not None and x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dim {self.dim}, got {x.shape[-1]}")
        if self.c > 0.0 and np.any(self.c * _sumsq(x) >= 1.0):
            raise ValueError("point lies outside the open ball")
        return x

    def add(self, x, y):
        return mobius_add(self._check_point(x), self._check_point(y), self.c)

    def matvec(self, m, x):
        return mobius_matvec(m, self._check_point(x), self.c)

    def dist(self, x, y):
        if self.c == 0.0:
            return euclidean_distance_limit(x, y)
        return poincare_distance(self._check_point(x), self._check_point(y), self.c)

    def expmap0(self, v):
        return expmap0(v, self.c)

    def logmap0(self, y):
        return logmap0(self._check_point(y), self.c)

    def expmap(self, x, v):
        return expmap(self._check_point(x), v, self.c)

    def logmap(self, x, y):
        return logmap(self._check_point(x), self._check_point(y), self.c)

    def midpoint(self, points):
        return einstein_midpoint(self._check_point(points), self.c)

    def project(self, x):
        return project_to_ball(x, self.c)

    def __repr__(self):
        return f"PoincareBall(c={self.c}, dim={self.dim})"
