"""Optimality criteria, efficiencies, correlations, and directional derivatives.

All criteria are functions of the 2x2 information matrix M:

    phi_D  = det(M)^(-1/2)                      volume of the confidence ellipse
    phi_R  = sqrt({M^-1}_11 {M^-1}_22)          product-of-variances criterion
    phi_r2 = {M^-1}_12^2 / ({M^-1}_11{M^-1}_22) squared estimator correlation
    phi_c  = c^T M^- c                          variance of c^T theta-hat
    phi_SA = phi_c1/ref1 + phi_c2/ref2          variance sum, each term scaled
                                                by its own c-optimal value
    phi_EM = lambda_max(M) / lambda_min(M)      condition number of M
    phi_CPB= RMS of off-diagonal correlations   (generic p x p version below)
    phi_lambda = (1-l)/Eff_D + l/Eff_R          compound D/R criterion

The three head criteria are tied together by the exact identity

    phi_R^2 = phi_D^2 / (1 - phi_r2),

which follows from {M^-1}_11 {M^-1}_22 = det(M^-1) + {M^-1}_12^2.  That same
algebraic split is what makes phi_R^2 differentiable:

    phi_R^2(M) = det(M)^-1 + h(M)^2,   h(M) = {M^-1}_12,

so the directional derivative of phi_R toward a one-point design at x is

    d phi_R = [ (2 - f^T M^-1 f)/det(M) + 2 h (h - u_1 u_2) ] / (2 phi_R),

with u = M^-1 f(x).  The formula is validated against the defining
finite-difference quotient in the test suite (the arbitration the published
displays of this derivative do not survive).

Sign convention: a directional derivative >= 0 at x means "no improvement by
moving mass toward x"; a design is optimal for a convex criterion iff its
directional derivative is nonnegative everywhere on the design space.

Singular matrices map to +inf for the inverse-monotone criteria (so optimizers
can reject them uniformly); the correlation-based quantities raise instead,
because a correlation of a rank-deficient system is undefined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .designs import Design, InfoMatrix, Model, fim
from .errors import SingularDesignError, ValidationError

C1 = (1.0, 0.0)
C2 = (0.0, 1.0)

CONVEX_KINDS = frozenset({"D", "R", "C", "SA", "COMPOUND"})
NONCONVEX_KINDS = frozenset({"R2", "EM", "CPB"})
ALL_KINDS = CONVEX_KINDS | NONCONVEX_KINDS

# Equivalence-theorem violation threshold, scaled by max(1, criterion value).
EQUIVALENCE_TOL = 1e-6


@dataclass(frozen=True)
class CriterionSpec:
    """Selects one criterion together with its parameters.

    kind: one of D, R, R2, C, SA, EM, CPB, COMPOUND.
      C        needs ``c`` (nonzero 2-vector).
      SA       needs ``sa_refs`` (the two positive c-optimal reference values).
      COMPOUND needs ``lam`` in [0, 1] plus positive ``phi_d_star``/``phi_r_star``.
    """

    kind: str
    c: tuple[float, float] | None = None
    sa_refs: tuple[float, float] | None = None
    lam: float | None = None
    phi_d_star: float | None = None
    phi_r_star: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ALL_KINDS:
            raise ValidationError(f"unknown criterion kind {self.kind!r}; choose from {sorted(ALL_KINDS)}")
        if self.kind == "C":
            if self.c is None or len(self.c) != 2 or (self.c[0] == 0.0 and self.c[1] == 0.0):
                raise ValidationError("criterion C needs a nonzero 2-vector c")
        if self.kind == "SA":
            if self.sa_refs is None or len(self.sa_refs) != 2:
                raise ValidationError("criterion SA needs sa_refs=(ref1, ref2)")
            if not (self.sa_refs[0] > 0.0 and self.sa_refs[1] > 0.0):
                raise ValidationError(f"SA reference values must be positive, got {self.sa_refs}")
        if self.kind == "COMPOUND":
            if self.lam is None or not 0.0 <= self.lam <= 1.0:
                raise ValidationError(f"compound weight must lie in [0, 1], got {self.lam}")
            if self.phi_d_star is None or self.phi_d_star <= 0.0 \
                    or self.phi_r_star is None or self.phi_r_star <= 0.0:
                raise ValidationError("compound criterion needs positive phi_d_star and phi_r_star")

    @property
    def is_convex(self) -> bool:
        return self.kind in CONVEX_KINDS


# --- scalar criterion functions ---------------------------------------------

def phi_d(m: InfoMatrix) -> float:
    """D-criterion |M^-1|^(1/2); +inf when singular."""
    if m.is_singular:
        return math.inf
    return m.det ** -0.5


def phi_r(m: InfoMatrix) -> float:
    """R-criterion sqrt({M^-1}_11 {M^-1}_22); +inf when singular."""
    if m.is_singular:
        return math.inf
    return math.sqrt(m.m11 * m.m22) / m.det


def phi_r2(m: InfoMatrix) -> float:
    """Squared correlation of the two estimators, in [0, 1]."""
    if m.is_singular:
        raise SingularDesignError("correlation is undefined for a singular information matrix")
    return (m.m12 * m.m12) / (m.m11 * m.m22)


def correlation(m: InfoMatrix) -> float:
    """Signed correlation cov12 / sqrt(v1 v2); equals -m12/sqrt(m11 m22)."""
    if m.is_singular:
        raise SingularDesignError("correlation is undefined for a singular information matrix")
    return -m.m12 / math.sqrt(m.m11 * m.m22)


def phi_c(m: InfoMatrix, c: Sequence[float]) -> float:
    """Generalized variance c^T M^- c.

    Non-singular M: plain inverse.  Singular M: the pseudo-inverse value when
    c^T theta is estimable (c in the column space of M), else +inf.
    """
    c1, c2 = float(c[0]), float(c[1])
    if c1 == 0.0 and c2 == 0.0:
        raise ValidationError("c must be nonzero")
    if not m.is_singular:
        return (c1 * c1 * m.m22 - 2.0 * c1 * c2 * m.m12 + c2 * c2 * m.m11) / m.det
    t = m.trace
    if t <= 0.0:
        return math.inf
    # Rank-1 PSD: M = t * u u^T with |u| = 1; u follows the dominant column.
    if m.m11 >= m.m22:
        u1, u2 = m.m11, m.m12
    else:
        u1, u2 = m.m12, m.m22
    nrm = math.hypot(u1, u2)
    if nrm == 0.0:
        return math.inf
    u1, u2 = u1 / nrm, u2 / nrm
    cross = c1 * u2 - c2 * u1
    if abs(cross) > 1e-9 * math.hypot(c1, c2):
        return math.inf  # c not in the column space: not estimable
    return (c1 * u1 + c2 * u2) ** 2 / t


def phi_sa(m: InfoMatrix, ref1: float, ref2: float) -> float:
    """Standardized variance sum phi_c1/ref1 + phi_c2/ref2; >= 2 at true references."""
    if not (ref1 > 0.0 and ref2 > 0.0):
        raise ValidationError(f"SA reference values must be positive, got ({ref1}, {ref2})")
    return phi_c(m, C1) / ref1 + phi_c(m, C2) / ref2


def phi_em(m: InfoMatrix) -> float:
    """Condition number lambda_max / lambda_min of M; +inf when singular."""
    if m.is_singular:
        return math.inf
    lmin, lmax = m.eigenvalues()
    if lmin <= 0.0:
        return math.inf
    return lmax / lmin


def phi_c_pritchard(corr_matrix: np.ndarray) -> float:
    """Root-mean-square off-diagonal correlation of a p x p correlation matrix.

    For p = 2 this reduces to |r12|.
    """
    r = np.asarray(corr_matrix, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1] or r.shape[0] < 2:
        raise ValidationError(f"need a square correlation matrix with p >= 2, got shape {r.shape}")
    p = r.shape[0]
    if not np.allclose(np.diag(r), 1.0, atol=1e-9):
        raise ValidationError("correlation matrix diagonal must be 1")
    if not np.allclose(r, r.T, atol=1e-9):
        raise ValidationError("correlation matrix must be symmetric")
    if np.any(np.abs(r) > 1.0 + 1e-9):
        raise ValidationError("correlation entries must lie in [-1, 1]")
    off = r - np.diag(np.diag(r))
    return math.sqrt(float(np.sum(off * off)) / (p * (p - 1)))


def phi_compound(m: InfoMatrix, lam: float, phi_d_star: float, phi_r_star: float) -> float:
    """Compound criterion (1-lam)/Eff_D + lam/Eff_R; >= 1 at true references."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"compound weight must lie in [0, 1], got {lam}")
    if phi_d_star <= 0.0 or phi_r_star <= 0.0:
        raise ValidationError("reference criterion values must be positive")
    return (1.0 - lam) * phi_d(m) / phi_d_star + lam * phi_r(m) / phi_r_star


def criterion_value(m: InfoMatrix, spec: CriterionSpec) -> float:
    """Evaluate any CriterionSpec on an information matrix."""
    if spec.kind == "D":
        return phi_d(m)
    if spec.kind == "R":
        return phi_r(m)
    if spec.kind == "R2":
        return math.inf if m.is_singular else phi_r2(m)
    if spec.kind == "C":
        return phi_c(m, spec.c)  # type: ignore[arg-type]
    if spec.kind == "SA":
        return phi_sa(m, *spec.sa_refs)  # type: ignore[misc]
    if spec.kind == "EM":
        return phi_em(m)
    if spec.kind == "CPB":
        return math.inf if m.is_singular else math.sqrt(phi_r2(m))
    if spec.kind == "COMPOUND":
        return phi_compound(m, spec.lam, spec.phi_d_star, spec.phi_r_star)  # type: ignore[arg-type]
    raise ValidationError(f"unknown criterion kind {spec.kind!r}")


def efficiency(kind: str, design: Design, design_star: Design, model: Model) -> float:
    """Eff(design) = phi(M(design_star)) / phi(M(design)) for kind in {D, R}.

    The caller guarantees design_star is optimal for the chosen criterion;
    values then land in (0, 1] up to numerical slack.
    """
    if kind not in ("D", "R"):
        raise ValidationError(f"efficiency is defined for kinds 'D' and 'R', got {kind!r}")
    phi = phi_d if kind == "D" else phi_r
    m = fim(model, design)
    m_star = fim(model, design_star)
    if m.is_singular or m_star.is_singular:
        raise SingularDesignError("efficiency needs non-singular designs")
    return phi(m_star) / phi(m)


# --- directional derivatives -------------------------------------------------

def _dd_arrays(m: InfoMatrix, F: np.ndarray, spec: CriterionSpec) -> np.ndarray:
    """Directional derivative of the criterion toward one-point designs.

    F has shape (n, 2) holding regressor values at the probe points.  Only the
    convex kinds are supported; those are the ones with an equivalence theorem.
    """
    if not spec.is_convex:
        raise ValidationError(f"criterion {spec.kind} is not convex; no directional-derivative certificate exists")
    if m.is_singular:
        raise SingularDesignError("directional derivative needs a non-singular design")
    det = m.det
    i11, i12, i22 = m.inverse_entries()
    u1 = F[:, 0] * i11 + F[:, 1] * i12
    u2 = F[:, 0] * i12 + F[:, 1] * i22
    d = F[:, 0] * u1 + F[:, 1] * u2  # f^T M^-1 f

    if spec.kind == "D":
        return 0.5 * det ** -0.5 * (2.0 - d)
    if spec.kind == "R":
        pr = math.sqrt(m.m11 * m.m22) / det
        h = i12
        return ((2.0 - d) / det + 2.0 * h * (h - u1 * u2)) / (2.0 * pr)
    if spec.kind == "C":
        c1, c2 = spec.c  # type: ignore[misc]
        val = phi_c(m, spec.c)  # type: ignore[arg-type]
        fc = u1 * c1 + u2 * c2  # f^T M^-1 c
        return val - fc * fc
    if spec.kind == "SA":
        ref1, ref2 = spec.sa_refs  # type: ignore[misc]
        v1 = i11
        v2 = i22
        return (v1 - u1 * u1) / ref1 + (v2 - u2 * u2) / ref2
    if spec.kind == "COMPOUND":
        dd_dpart = 0.5 * det ** -0.5 * (2.0 - d)
        pr = math.sqrt(m.m11 * m.m22) / det
        h = i12
        dd_rpart = ((2.0 - d) / det + 2.0 * h * (h - u1 * u2)) / (2.0 * pr)
        lam = spec.lam  # type: ignore[assignment]
        return (1.0 - lam) * dd_dpart / spec.phi_d_star + lam * dd_rpart / spec.phi_r_star
    raise ValidationError(f"unsupported criterion kind {spec.kind!r}")


def directional_derivative(model: Model, design: Design, x: float, spec: CriterionSpec) -> float:
    """d phi[M(design), M(one-point at x)]; >= 0 everywhere iff design is optimal."""
    m = fim(model, design)
    F = np.asarray(model.regressor(np.array([x], dtype=float)), dtype=float)
    return float(_dd_arrays(m, F, spec)[0])


def dd_d(model: Model, design: Design, x: float) -> float:
    """Directional derivative of phi_D toward the one-point design at x."""
    return directional_derivative(model, design, x, CriterionSpec("D"))


def dd_r(model: Model, design: Design, x: float) -> float:
    """Directional derivative of phi_R toward the one-point design at x."""
    return directional_derivative(model, design, x, CriterionSpec("R"))


@dataclass(frozen=True)
class DerivativeReport:
    """Directional derivative sampled on a grid, for equivalence-theorem checks."""

    x_grid: tuple[float, ...]
    dd_values: tuple[float, ...]
    min_dd: float
    argmin_x: float

    def passes(self, criterion_value_at_design: float, tol: float = EQUIVALENCE_TOL) -> bool:
        return self.min_dd >= -tol * max(1.0, abs(criterion_value_at_design))

    def to_csv(self) -> str:
        lines = ["x,dd"]
        lines.extend(f"{x!r},{v!r}" for x, v in zip(self.x_grid, self.dd_values))
        return "\n".join(lines) + "\n"


def derivative_report(model: Model, design: Design, spec: CriterionSpec,
                      grid_points: int = 1000) -> DerivativeReport:
    """Evaluate the directional derivative on an equispaced grid plus the support."""
    grid = np.unique(np.concatenate([model.space.grid(grid_points), design.xs]))
    m = fim(model, design)
    F = np.asarray(model.regressor(grid), dtype=float)
    dd = _dd_arrays(m, F, spec)
    k = int(np.argmin(dd))
    return DerivativeReport(
        x_grid=tuple(float(v) for v in grid),
        dd_values=tuple(float(v) for v in dd),
        min_dd=float(dd[k]),
        argmin_x=float(grid[k]),
    )


# --- vectorized raw-entry evaluation (optimizer hot path) ---------------------

def criterion_values_raw(spec: CriterionSpec, m11: np.ndarray, m12: np.ndarray,
                         m22: np.ndarray) -> np.ndarray:
    """Criterion values for arrays of matrix entries; singular entries map to +inf.

    The R2/CPB kinds also map singular to +inf here: in an optimizer a design
    whose correlation is undefined is simply inadmissible.
    """
    m11 = np.asarray(m11, dtype=float)
    m12 = np.asarray(m12, dtype=float)
    m22 = np.asarray(m22, dtype=float)
    det = m11 * m22 - m12 * m12
    ok = det > 1e-12 * np.maximum(1.0, m11 * m22)
    safe_det = np.where(ok, det, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if spec.kind == "D":
            vals = safe_det ** -0.5
        elif spec.kind == "R":
            vals = np.sqrt(m11 * m22) / safe_det
        elif spec.kind == "R2":
            vals = (m12 * m12) / np.where(m11 * m22 > 0, m11 * m22, 1.0)
        elif spec.kind == "CPB":
            vals = np.abs(m12) / np.sqrt(np.where(m11 * m22 > 0, m11 * m22, 1.0))
        elif spec.kind == "C":
            c1, c2 = spec.c  # type: ignore[misc]
            vals = (c1 * c1 * m22 - 2.0 * c1 * c2 * m12 + c2 * c2 * m11) / safe_det
        elif spec.kind == "SA":
            ref1, ref2 = spec.sa_refs  # type: ignore[misc]
            vals = (m22 / safe_det) / ref1 + (m11 / safe_det) / ref2
        elif spec.kind == "EM":
            tr = m11 + m22
            disc = np.sqrt((m11 - m22) ** 2 + 4.0 * m12 * m12)
            lmin = 0.5 * (tr - disc)
            vals = np.where(lmin > 0, (tr + disc) / np.where(lmin > 0, 2.0 * lmin, 1.0), np.inf)
        elif spec.kind == "COMPOUND":
            lam = spec.lam  # type: ignore[assignment]
            vals = ((1.0 - lam) * safe_det ** -0.5 / spec.phi_d_star
                    + lam * (np.sqrt(m11 * m22) / safe_det) / spec.phi_r_star)
        else:
            raise ValidationError(f"unknown criterion kind {spec.kind!r}")
    vals = np.where(ok, vals, np.inf)
    return np.where(np.isnan(vals), np.inf, vals)
