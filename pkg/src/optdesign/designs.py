"""Core data model: approximate designs, regression models, and 2x2 information matrices.

An approximate design is a discrete probability measure on a one-dimensional
design space [lo, hi]: support points x_i with weights w_i >= 0 summing to 1.
Its information matrix is the weighted Gram matrix

    M = sum_i w_i f(x_i) f(x_i)^T,

where f is the model's regressor (for nonlinear models, the gradient of the
mean function at nominal parameters).  All models here have m = 2 parameters,
so M is symmetric 2x2 and everything downstream works in closed form.

All criteria are computed on the normalized matrix (noise variance 1, sample
size 1); efficiencies and correlations are invariant to that common factor.

Every type here is immutable after construction and every operation is a pure
function, so unrestricted concurrent use is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError

# Tolerances (scale-relative where a scale is available).
WEIGHT_SUM_TOL = 1e-12
MERGE_TOL = 1e-9         # times max(1, hi - lo)
SINGULARITY_TOL = 1e-12  # times max(1, m11 * m22)
PSD_TOL = 1e-12          # times max(1, m11 * m22)


@dataclass(frozen=True)
class DesignSpace:
    """Closed interval [lo, hi] of admissible experimental conditions."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValidationError(f"design space endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValidationError(f"design space needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def merge_tol(self) -> float:
        """Distance below which two support points are considered the same."""
        return MERGE_TOL * max(1.0, self.width)

    def contains(self, x: float) -> bool:
        slack = 1e-12 * max(1.0, self.width)
        return self.lo - slack <= x <= self.hi + slack

    def clip(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, n)


@dataclass(frozen=True)
class Design:
    """Discrete probability measure: ((x_1, w_1), ..., (x_k, w_k)), sorted by x.

    Instances are canonical: weights normalized to sum 1, points sorted
    ascending, near-duplicates merged, zero-weight points dropped.  Build them
    through :func:`make_design` so the invariants hold.
    """

    points: tuple[tuple[float, float], ...]

    @property
    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.points], dtype=float)

    @property
    def ws(self) -> np.ndarray:
        return np.array([w for _, w in self.points], dtype=float)

    @property
    def support_size(self) -> int:
        return len(self.points)

    def weight_at(self, x: float, tol: float = 0.0) -> float:
        for px, pw in self.points:
            if abs(px - x) <= tol:
                return pw
        return 0.0

    def mean_x(self) -> float:
        return float(sum(x * w for x, w in self.points))


@dataclass(frozen=True)
class Model:
    """Two-parameter regression model seen through its regressor vector.

    regressor must be vectorized: given an ndarray of shape (n,) it returns
    the regressor values with shape (n, 2).  For nonlinear models this is the
    gradient of the mean function evaluated at ``nominal_params``.
    """

    name: str
    space: DesignSpace
    regressor: Callable[[np.ndarray], np.ndarray]
    nominal_params: tuple[float, ...] | None = None
    param_names: tuple[str, str] = ("theta1", "theta2")

    def regressor_at(self, x: float) -> np.ndarray:
        """Regressor at a single point, shape (2,)."""
        return np.asarray(self.regressor(np.array([x], dtype=float)), dtype=float)[0]


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric positive-semidefinite 2x2 information matrix."""

    m11: float
    m12: float
    m22: float

    def __post_init__(self) -> None:
        vals = (self.m11, self.m12, self.m22)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"information matrix entries must be finite, got {vals}")
        scale = max(1.0, self.m11 * self.m22)
        if self.m11 < -PSD_TOL * scale or self.m22 < -PSD_TOL * scale:
            raise ValidationError(f"diagonal of a Gram matrix cannot be negative: {vals}")
        if self.det < -PSD_TOL * scale:
            raise ValidationError(f"matrix is not positive semidefinite: {vals}, det={self.det}")

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m12

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    @property
    def is_singular(self) -> bool:
        """Scale-relative singularity test; survives badly scaled regressors."""
        return self.det <= SINGULARITY_TOL * max(1.0, self.m11 * self.m22)

    def eigenvalues(self) -> tuple[float, float]:
        """(lambda_min, lambda_max) of the symmetric matrix."""
        half_gap = math.hypot(0.5 * (self.m11 - self.m22), self.m12)
        mid = 0.5 * self.trace
        return mid - half_gap, mid + half_gap

    def inverse_entries(self) -> tuple[float, float, float]:
        """({M^-1}_11, {M^-1}_12, {M^-1}_22); raises ZeroDivisionError-free inf on misuse guarded by callers."""
        d = self.det
        return self.m22 / d, -self.m12 / d, self.m11 / d

    def scaled(self, factor: float) -> "InfoMatrix":
        return InfoMatrix(self.m11 * factor, self.m12 * factor, self.m22 * factor)

    def mixed_with(self, other: "InfoMatrix", alpha: float) -> "InfoMatrix":
        """Convex combination (1 - alpha) * self + alpha * other."""
        return InfoMatrix(
            (1.0 - alpha) * self.m11 + alpha * other.m11,
            (1.0 - alpha) * self.m12 + alpha * other.m12,
            (1.0 - alpha) * self.m22 + alpha * other.m22,
        )

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]], dtype=float)

    @staticmethod
    def from_array(arr: np.ndarray) -> "InfoMatrix":
        a = np.asarray(arr, dtype=float)
        if a.shape != (2, 2):
            raise ValidationError(f"expected a 2x2 matrix, got shape {a.shape}")
        if abs(a[0, 1] - a[1, 0]) > 1e-9 * max(1.0, abs(a[0, 1])):
            raise ValidationError("matrix is not symmetric")
        return InfoMatrix(float(a[0, 0]), 0.5 * float(a[0, 1] + a[1, 0]), float(a[1, 1]))


@dataclass(frozen=True)
class CovQuantities:
    """Covariance-derived scalars of a design: variances, covariance, det(M).

    When M is singular the variances are undefined; ``singular`` is set and the
    other fields are None.  Callers decide how to treat that state.
    """

    v1: float | None
    v2: float | None
    cov12: float | None
    det_m: float
    singular: bool


def make_design(pairs: Sequence[tuple[float, float]], space: DesignSpace) -> Design:
    """Build a canonical Design from (x, weight) pairs.

    Weights are normalized by total mass, points sorted ascending, and points
    closer than the space's merge tolerance are merged (weights added, support
    at the weighted mean).  Zero-weight points are dropped after merging.
    """
    if len(pairs) == 0:
        raise ValidationError("a design needs at least one support point")
    xs = [float(x) for x, _ in pairs]
    ws = [float(w) for _, w in pairs]
    for x, w in zip(xs, ws):
        if not (math.isfinite(x) and math.isfinite(w)):
            raise ValidationError(f"non-finite design point ({x}, {w})")
        if w < 0.0:
            raise ValidationError(f"negative weight {w} at x={x}")
        if not space.contains(x):
            raise ValidationError(f"point x={x} lies outside the design space [{space.lo}, {space.hi}]")
    total = sum(ws)
    if total <= 0.0:
        raise ValidationError("all weights are zero")

    order = sorted(range(len(xs)), key=lambda i: xs[i])
    tol = space.merge_tol()
    merged: list[list[float]] = []
    for i in order:
        if merged and xs[i] - merged[-1][0] <= tol:
            mx, mw = merged[-1]
            w_new = mw + ws[i]
            if w_new > 0.0:
                merged[-1][0] = (mx * mw + xs[i] * ws[i]) / w_new
            merged[-1][1] = w_new
        else:
            merged.append([xs[i], ws[i]])

    points = tuple(
        (space.clip(x), w / total) for x, w in merged if w > 0.0
    )
    if not points:
        raise ValidationError("all weights are zero")
    assert abs(sum(w for _, w in points) - 1.0) <= 1e-9
    return Design(points=points)


def fim(model: Model, design: Design) -> InfoMatrix:
    """Information matrix M = sum_i w_i f(x_i) f(x_i)^T of a design."""
    xs = design.xs
    F = np.asarray(model.regressor(xs), dtype=float)
    if F.shape != (len(xs), 2):
        raise ValidationError(f"regressor returned shape {F.shape}, expected ({len(xs)}, 2)")
    if not np.all(np.isfinite(F)):
        bad = xs[~np.all(np.isfinite(F), axis=1)]
        raise ValidationError(f"regressor is non-finite at support point(s) {bad.tolist()}")
    w = design.ws
    G = (F * w[:, None]).T @ F
    return InfoMatrix(float(G[0, 0]), 0.5 * float(G[0, 1] + G[1, 0]), float(G[1, 1]))


def cov_quantities(m: InfoMatrix) -> CovQuantities:
    """Variances and covariance of the estimators: entries of M^-1 (det also reported)."""
    if m.is_singular:
        return CovQuantities(v1=None, v2=None, cov12=None, det_m=m.det, singular=True)
    v1, cov12, v2 = m.inverse_entries()
    return CovQuantities(v1=v1, v2=v2, cov12=cov12, det_m=m.det, singular=False)


def slr_model(space: DesignSpace) -> Model:
    """Simple linear regression y = theta1 + theta2 x + noise; regressor f(x) = (1, x)."""

    def regressor(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x), x], axis=-1)

    return Model(name="slr", space=space, regressor=regressor,
                 nominal_params=None, param_names=("intercept", "slope"))


# --- JSON serialization (shared by the CLI and golden tests) ----------------

def design_to_json(design: Design, space: DesignSpace) -> dict:
    return {
        "points": [{"x": x, "w": w} for x, w in design.points],
        "space": {"lo": space.lo, "hi": space.hi},
    }


def design_from_json(obj: dict) -> tuple[Design, DesignSpace]:
    try:
        space = DesignSpace(float(obj["space"]["lo"]), float(obj["space"]["hi"]))
        pairs = [(float(p["x"]), float(p["w"])) for p in obj["points"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed design JSON: {exc}") from exc
    return make_design(pairs, space), space
