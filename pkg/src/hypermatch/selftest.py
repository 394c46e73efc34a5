"""Runtime property suite behind `hypermatch selftest`.

Every property draws fresh random inputs from the seeded generator and
checks an identity the geometry or the engine must satisfy. One line is
printed per property. The suite is the first thing to run on a new
machine or after touching the kernels: it is deliberately sensitive to
algebra faults (see `geometry.set_sign_fault`), not just to crashes.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import geometry, gradcheck, hyperops
from .autodiff import constant

CheckFn = Callable[[np.random.Generator], tuple[bool, str]]


def _ball_points(rng: np.random.Generator, count: int, dim: int,
                 max_norm: float, c: float = 1.0) -> np.ndarray:
    """Points with norms uniform in (0, max_norm / sqrt(c))."""
    raw = rng.normal(size=(count, dim))
    raw /= np.linalg.norm(raw, axis=-1, keepdims=True)
    radii = rng.uniform(0.05, max_norm, size=(count, 1)) / math.sqrt(c)
    return raw * radii


def _check_left_identity(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 64, 16, 0.9)
    err = np.abs(geometry.mobius_add(np.zeros_like(x), x, 1.0) - x).max()
    return err <= 1e-12, f"max |0 (+) x - x| = {err:.3e}"


def _check_inverse_law(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 64, 16, 0.9)
    err = np.abs(geometry.mobius_add(-x, x, 1.0)).max()
    return err <= 1e-10, f"max |(-x) (+) x| = {err:.3e}"


def _check_collinear(rng: np.random.Generator) -> tuple[bool, str]:
    # Aligned points compose like velocities: (a + b) / (1 + c a b).
    fixed = geometry.mobius_add(np.array([0.3, 0.0]), np.array([0.4, 0.0]), 1.0)
    err = max(abs(fixed[0] - 0.625), abs(fixed[1]))
    direction = rng.normal(size=8)
    direction /= np.linalg.norm(direction)
    for _ in range(32):
        a, b = rng.uniform(-0.7, 0.7, size=2)
        got = geometry.mobius_add(a * direction, b * direction, 1.0)
        want = (a + b) / (1.0 + a * b) * direction
        err = max(err, float(np.abs(got - want).max()))
    return err <= 1e-12, f"max deviation = {err:.3e}"


def _check_distance_symmetry(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 128, 8, 0.95)
    y = _ball_points(rng, 128, 8, 0.95)
    dxy = geometry.poincare_distance(x, y, 1.0)
    dyx = geometry.poincare_distance(y, x, 1.0)
    exact = np.array_equal(dxy, dyx)
    err = np.abs(dxy - dyx).max()
    return exact, f"max |d(x,y) - d(y,x)| = {err:.3e} (bitwise {exact})"


def _check_distance_separation(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 64, 8, 0.9)
    y = _ball_points(rng, 64, 8, 0.9)
    self_d = geometry.poincare_distance(x, x, 1.0).max()
    cross = geometry.poincare_distance(x, y, 1.0).min()
    ok = self_d == 0.0 and cross > 0.0
    return ok, f"max d(x,x) = {self_d:.3e}, min d(x,y) = {cross:.3e}"


def _check_triangle(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 200, 8, 0.9)
    y = _ball_points(rng, 200, 8, 0.9)
    z = _ball_points(rng, 200, 8, 0.9)
    slack = (geometry.poincare_distance(x, y, 1.0)
             + geometry.poincare_distance(y, z, 1.0)
             - geometry.poincare_distance(x, z, 1.0))
    worst = slack.min()
    return worst >= -1e-9, f"min (d(x,y) + d(y,z) - d(x,z)) = {worst:.3e}"


def _check_distance_closed_form(rng: np.random.Generator) -> tuple[bool, str]:
    c = 1.0
    err = 0.0
    for _ in range(32):
        r = float(rng.uniform(0.05, 0.95))
        point = np.zeros(4)
        point[0] = r
        got = float(geometry.poincare_distance(np.zeros(4), point, c))
        want = (2.0 / math.sqrt(c)) * math.atanh(math.sqrt(c) * r)
        err = max(err, abs(got - want))
    return err <= 1e-12, f"max |d(0, r e1) - closed form| = {err:.3e}"


def _check_flat_limit_add(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 100, 8, 0.5)
    y = _ball_points(rng, 100, 8, 0.5)
    detail = []
    ok = True
    for c in (1e-6, 1e-8):
        err = np.abs(geometry.mobius_add(x, y, c) - (x + y)).max()
        ok = ok and err <= 10.0 * c
        detail.append(f"c={c:g}: {err:.3e}")
    return ok, "max |x (+) y - (x + y)|  " + ", ".join(detail)


def _check_flat_limit_distance(rng: np.random.Generator) -> tuple[bool, str]:
    c = 1e-10
    x = _ball_points(rng, 200, 8, 0.5)
    y = _ball_points(rng, 200, 8, 0.5)
    err = np.abs(geometry.poincare_distance(x, y, c)
                 - geometry.euclidean_distance_limit(x, y)).max()
    return err <= 1e-4, f"max |d_c - 2||x - y||| = {err:.3e} at c = 1e-10"


def _check_explog_origin(rng: np.random.Generator) -> tuple[bool, str]:
    v = _ball_points(rng, 64, 16, 1.0)
    back = geometry.logmap0(geometry.expmap0(v, 1.0), 1.0)
    err = np.abs(back - v).max()
    return err <= 1e-9, f"max |log0(exp0(v)) - v| = {err:.3e}"


def _check_explog_base(rng: np.random.Generator) -> tuple[bool, str]:
    base = _ball_points(rng, 64, 16, 0.9)
    v = _ball_points(rng, 64, 16, 1.0)
    back = geometry.logmap(base, geometry.expmap(base, v, 1.0), 1.0)
    err = np.abs(back - v).max()
    return err <= 1e-6, f"max |log_x(exp_x(v)) - v| = {err:.3e}"


def _check_klein_roundtrip(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 128, 16, 0.95)
    back = geometry.klein_to_poincare(geometry.poincare_to_klein(x, 1.0), 1.0)
    err = np.abs(back - x).max()
    return err <= 1e-9, f"max roundtrip error = {err:.3e}"


def _check_midpoint(rng: np.random.Generator) -> tuple[bool, str]:
    x = _ball_points(rng, 1, 8, 0.9)[0]
    pair = np.stack([x, -x])
    center = np.abs(geometry.einstein_midpoint(pair, 1.0)).max()
    points = _ball_points(rng, 16, 8, 0.9)
    mid = geometry.einstein_midpoint(points, 1.0)
    perm = geometry.einstein_midpoint(points[rng.permutation(16)], 1.0)
    shuffle_err = np.abs(mid - perm).max()
    ok = center <= 1e-9 and shuffle_err <= 1e-12
    return ok, f"|mid(x, -x)| = {center:.3e}, permutation gap = {shuffle_err:.3e}"


def _check_graph_agreement(rng: np.random.Generator) -> tuple[bool, str]:
    # The differentiable composites must reproduce the direct kernels;
    # distance additionally crosses two independent code paths.
    x = _ball_points(rng, 32, 8, 0.9)
    y = _ball_points(rng, 32, 8, 0.9)
    add_gap = np.abs(hyperops.mobius_add(constant(x), constant(y), 1.0).data
                     - geometry.mobius_add(x, y, 1.0)).max()
    m = rng.normal(size=(8, 8))
    mv_gap = np.abs(hyperops.mobius_matvec(constant(m), constant(x), 1.0).data
                    - geometry.mobius_matvec(m, x, 1.0)).max()
    dist_gap = np.abs(
        hyperops.distance(constant(x), constant(y), 1.0).data[..., 0]
        - geometry.poincare_distance(x, y, 1.0)
    ).max()
    ok = add_gap == 0.0 and mv_gap == 0.0 and dist_gap <= 1e-10
    return ok, (f"add gap = {add_gap:.3e}, matvec gap = {mv_gap:.3e}, "
                f"distance gap = {dist_gap:.3e}")


def _check_gradients(rng: np.random.Generator) -> tuple[bool, str]:
    seed = int(rng.integers(0, 2**31))
    worst = gradcheck.finite_difference_check(seed)
    return worst <= 1e-4, f"max relative error vs finite differences = {worst:.3e}"


PROPERTIES: list[tuple[str, CheckFn]] = [
    ("mobius-left-identity", _check_left_identity),
    ("mobius-inverse-law", _check_inverse_law),
    ("mobius-collinear-composition", _check_collinear),
    ("distance-symmetry", _check_distance_symmetry),
    ("distance-separation", _check_distance_separation),
    ("distance-triangle-inequality", _check_triangle),
    ("distance-closed-form", _check_distance_closed_form),
    ("flat-limit-addition", _check_flat_limit_add),
    ("flat-limit-distance", _check_flat_limit_distance),
    ("exp-log-inversion-origin", _check_explog_origin),
    ("exp-log-inversion-base", _check_explog_base),
    ("klein-roundtrip", _check_klein_roundtrip),
    ("einstein-midpoint", _check_midpoint),
    ("graph-kernel-agreement", _check_graph_agreement),
    ("loss-gradient-check", _check_gradients),
]


def run_selftest(seed: int, write=print) -> bool:
    """Run every property; print one line each; True iff all passed."""
    all_ok = True
    for index, (name, check) in enumerate(PROPERTIES):
        rng = np.random.default_rng([seed, index])
        try:
            ok, detail = check(rng)
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok = all_ok and ok
        write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
