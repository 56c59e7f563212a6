"""Numeric design optimization and the Michaelis-Menten reference tables.

The search is grid-plus-refinement.  A coarse grid over the design space
supplies candidate supports; every candidate pair gets its weight optimized by
golden section (all pairs at once, vectorized), the best few are polished by
coordinate descent on the support coordinates with step halving, and for the
non-convex criteria (squared correlation and condition number, which carry no
equivalence theorem) a seeded multistart adds random initial supports.  Convex
results come back with a directional-derivative certificate on a fine grid;
non-convex results are labeled best-found.

Weight optimization relies on the criteria being unimodal along the weight
segment of a fixed two-point support: the convex criteria trivially so, and
the two non-convex ones by direct analysis of their one-dimensional slices.

Everything is deterministic given the request (the seed only feeds the
multistart); ties are broken by lexicographic design comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Sequence

import numpy as np

from .criteria import (
    CriterionSpec,
    DerivativeReport,
    EQUIVALENCE_TOL,
    criterion_value,
    criterion_values_raw,
    derivative_report,
    phi_c,
)
from .designs import Design, Model, fim, make_design
from .errors import OptimizationError, ValidationError
from .mm import MMParams, mm_d_optimal, mm_model

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

STAGE1_ITERS = 28          # golden-section iterations for the vectorized pass
REFINE_TOP = 16            # candidates kept for coordinate-descent polish
MULTISTARTS = 16           # random restarts for non-convex criteria
STEP_MIN_REL = 1e-8        # refinement stops at this step, relative to the width


@dataclass(frozen=True)
class OptimizeRequest:
    """One optimization problem: model, criterion, and search controls."""

    model: Model
    criterion: CriterionSpec
    n_support: int = 2
    grid_resolution: int = 201
    weight_tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 2 <= self.n_support <= 4:
            raise ValidationError(f"n_support must lie in [2, 4], got {self.n_support}")
        if self.grid_resolution < 100:
            raise ValidationError(f"grid_resolution must be >= 100, got {self.grid_resolution}")
        if not self.weight_tolerance > 0.0:
            raise ValidationError("weight_tolerance must be positive")


@dataclass(frozen=True)
class OptimizeResult:
    design: Design
    criterion_value: float
    derivative_report: DerivativeReport | None
    converged: bool
    iterations: int
    label: str  # "certified" or "best-found"


# --- scalar criterion evaluation on raw entries ------------------------------

def _scalar_value(spec: CriterionSpec, m11: float, m12: float, m22: float) -> float:
    det = m11 * m22 - m12 * m12
    if det <= 1e-12 * max(1.0, m11 * m22):
        return math.inf
    if spec.kind == "D":
        return det ** -0.5
    if spec.kind == "R":
        return math.sqrt(m11 * m22) / det
    if spec.kind == "R2":
        return (m12 * m12) / (m11 * m22)
    if spec.kind == "CPB":
        return abs(m12) / math.sqrt(m11 * m22)
    if spec.kind == "C":
        c1, c2 = spec.c  # type: ignore[misc]
        return (c1 * c1 * m22 - 2.0 * c1 * c2 * m12 + c2 * c2 * m11) / det
    if spec.kind == "SA":
        ref1, ref2 = spec.sa_refs  # type: ignore[misc]
        return (m22 / det) / ref1 + (m11 / det) / ref2
    if spec.kind == "EM":
        tr = m11 + m22
        disc = math.hypot(m11 - m22, 2.0 * m12)
        lmin = 0.5 * (tr - disc)
        return (tr + disc) / (2.0 * lmin) if lmin > 0.0 else math.inf
    if spec.kind == "COMPOUND":
        lam = spec.lam  # type: ignore[assignment]
        return ((1.0 - lam) * det ** -0.5 / spec.phi_d_star
                + lam * (math.sqrt(m11 * m22) / det) / spec.phi_r_star)
    raise ValidationError(f"unknown criterion kind {spec.kind!r}")


def _outer3(f: np.ndarray) -> np.ndarray:
    """(n, 2) regressor values -> (n, 3) outer-product entries (f1^2, f1 f2, f2^2)."""
    return np.stack([f[..., 0] ** 2, f[..., 0] * f[..., 1], f[..., 1] ** 2], axis=-1)


def _mix_value(spec: CriterionSpec, outers: Sequence[np.ndarray], weights: Sequence[float]) -> float:
    m11 = m12 = m22 = 0.0
    for o, w in zip(outers, weights):
        m11 += w * o[0]
        m12 += w * o[1]
        m22 += w * o[2]
    return _scalar_value(spec, m11, m12, m22)


def _golden_scalar(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal scalar function on [lo, hi]; returns (argmin, min)."""
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    yc, yd = f(c), f(d)
    while b - a > tol:
        if yc < yd:
            b, d, yd = d, c, yc
            c = b - INVPHI * (b - a)
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            d = a + INVPHI * (b - a)
            yd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _best_weight_2pt(spec: CriterionSpec, oa: np.ndarray, ob: np.ndarray,
                     tol: float) -> tuple[float, float]:
    """Optimal mass w at the first point of a fixed two-point support."""
    def val(w: float) -> float:
        return _scalar_value(
            spec,
            w * oa[0] + (1.0 - w) * ob[0],
            w * oa[1] + (1.0 - w) * ob[1],
            w * oa[2] + (1.0 - w) * ob[2],
        )
    return _golden_scalar(val, 0.0, 1.0, tol)


def _best_weights_k(spec: CriterionSpec, outers: np.ndarray, tol: float,
                    max_sweeps: int = 60) -> tuple[np.ndarray, float]:
    """Pairwise mass transfers on the simplex for supports of 3 or 4 points."""
    k = len(outers)
    w = np.full(k, 1.0 / k)
    val = _mix_value(spec, outers, w)
    for _ in range(max_sweeps):
        shift = 0.0
        for i, j in combinations(range(k), 2):
            mass = w[i] + w[j]
            if mass <= 0.0:
                continue
            rest11 = rest12 = rest22 = 0.0
            for q in range(k):
                if q in (i, j):
                    continue
                rest11 += w[q] * outers[q][0]
                rest12 += w[q] * outers[q][1]
                rest22 += w[q] * outers[q][2]

            def val_t(t: float) -> float:
                wi = t * mass
                wj = mass - wi
                return _scalar_value(
                    spec,
                    rest11 + wi * outers[i][0] + wj * outers[j][0],
                    rest12 + wi * outers[i][1] + wj * outers[j][1],
                    rest22 + wi * outers[i][2] + wj * outers[j][2],
                )

            t, v = _golden_scalar(val_t, 0.0, 1.0, tol)
            new_i = t * mass
            shift = max(shift, abs(new_i - w[i]))
            w[i], w[j] = new_i, mass - new_i
            val = v
        if shift < tol:
            break
    return w, val


def optimize_weights(model: Model, support: Sequence[float], criterion: CriterionSpec,
                     tol: float = 1e-8) -> np.ndarray:
    """Optimal simplex weights for a fixed support.

    Two points: golden section on the mass split.  Three or four points:
    cyclic pairwise transfers, each step itself a golden section.
    """
    xs = np.asarray(sorted(float(x) for x in support), dtype=float)
    if len(xs) < 2:
        raise ValidationError("optimize_weights needs at least two support points")
    if np.min(np.diff(xs)) <= model.space.merge_tol():
        raise ValidationError("support points must be distinct")
    for x in xs:
        if not model.space.contains(x):
            raise ValidationError(f"support point {x} outside the design space")
    F = np.asarray(model.regressor(xs), dtype=float)
    O = _outer3(F)
    if len(xs) == 2:
        w, val = _best_weight_2pt(criterion, O[0], O[1], tol)
        weights = np.array([w, 1.0 - w])
    else:
        weights, val = _best_weights_k(criterion, O, tol)
    if not math.isfinite(val):
        raise OptimizationError("criterion is infinite for every weighting of this support")
    return weights


# --- support search -----------------------------------------------------------

def _stage1_pairs(spec: CriterionSpec, O: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized weight optimization over all grid pairs; returns (i, j, w, value)."""
    n = len(O)
    I, J = np.triu_indices(n, k=1)
    Oi, Oj = O[I], O[J]

    def values(w: np.ndarray) -> np.ndarray:
        m11 = w * Oi[:, 0] + (1.0 - w) * Oj[:, 0]
        m12 = w * Oi[:, 1] + (1.0 - w) * Oj[:, 1]
        m22 = w * Oi[:, 2] + (1.0 - w) * Oj[:, 2]
        return criterion_values_raw(spec, m11, m12, m22)

    a = np.zeros(len(I))
    b = np.ones(len(I))
    for _ in range(STAGE1_ITERS):
        c = b - INVPHI * (b - a)
        d = a + INVPHI * (b - a)
        left = values(c) < values(d)
        b = np.where(left, d, b)
        a = np.where(left, c, a)
    w = 0.5 * (a + b)
    return I, J, w, values(w)


def _refine_support(model: Model, spec: CriterionSpec, xs0: Sequence[float],
                    step0: float, wtol: float) -> tuple[list[float], np.ndarray, float, int]:
    """Coordinate descent on support coordinates with step halving."""
    space = model.space
    merge_tol = space.merge_tol()
    step_min = STEP_MIN_REL * space.width

    def evaluate(xs: Sequence[float]) -> tuple[np.ndarray, float]:
        F = np.asarray(model.regressor(np.asarray(xs, dtype=float)), dtype=float)
        if not np.all(np.isfinite(F)):
            return np.full(len(xs), math.nan), math.inf
        O = _outer3(F)
        if len(xs) == 2:
            w, v = _best_weight_2pt(spec, O[0], O[1], wtol)
            return np.array([w, 1.0 - w]), v
        return _best_weights_k(spec, O, wtol)

    xs = sorted(float(x) for x in xs0)
    weights, best = evaluate(xs)
    step = step0
    iterations = 0
    while step > step_min:
        improved = False
        for k in range(len(xs)):
            for delta in (step, -step):
                cand = sorted(xs[:k] + [space.clip(xs[k] + delta)] + xs[k + 1:])
                if min(np.diff(cand)) <= merge_tol:
                    continue
                w2, v2 = evaluate(cand)
                iterations += 1
                if v2 < best:
                    xs, weights, best = cand, w2, v2
                    improved = True
        if not improved:
            step *= 0.5
    return xs, weights, best, iterations


def _design_key(xs: Sequence[float], ws: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for pair in zip(xs, ws) for v in pair)


def _initial_supports(request: OptimizeRequest) -> list[tuple[float, ...]]:
    """Deterministic candidate supports for three- and four-point searches."""
    per_axis = 24 if request.n_support == 3 else 14
    grid = request.model.space.grid(per_axis)
    return [tuple(c) for c in combinations(grid, request.n_support)]


def optimize_design(request: OptimizeRequest) -> OptimizeResult:
    """Best design of the requested support size under the requested criterion.

    Convex criteria return with an equivalence certificate (directional
    derivative >= -1e-6, scaled, on a 1000-point grid); the non-convex ones
    return the best design found by grid search plus seeded multistart.
    """
    model = request.model
    spec = request.criterion
    space = model.space
    grid = space.grid(request.grid_resolution)
    F = np.asarray(model.regressor(grid), dtype=float)
    finite_rows = np.all(np.isfinite(F), axis=1)
    if not np.all(finite_rows):
        grid = grid[finite_rows]
        F = F[finite_rows]
    O = _outer3(F)

    candidates: list[tuple[float, tuple[float, ...]]] = []  # (value, support)
    if request.n_support == 2:
        I, J, _, vals = _stage1_pairs(spec, O)
        order = np.argsort(vals, kind="stable")
        # Coarse-cell dedupe so the refinement fan-out covers distinct basins
        # instead of sixteen neighbors of the same grid optimum.
        cell = max(1, len(grid) // 32)
        seen: set[tuple[int, int]] = set()
        for idx in order:
            if not math.isfinite(vals[idx]):
                break
            key = (int(I[idx]) // cell, int(J[idx]) // cell)
            if key in seen:
                continue
            seen.add(key)
            candidates.append((float(vals[idx]), (float(grid[I[idx]]), float(grid[J[idx]]))))
            if len(candidates) >= REFINE_TOP:
                break
    else:
        loose = max(request.weight_tolerance, 1e-4)
        scored = []
        for supp in _initial_supports(request):
            Fs = np.asarray(model.regressor(np.asarray(supp)), dtype=float)
            if not np.all(np.isfinite(Fs)):
                continue
            _, v = _best_weights_k(spec, _outer3(Fs), loose, max_sweeps=4)
            if math.isfinite(v):
                scored.append((v, supp))
        scored.sort(key=lambda t: (t[0], t[1]))
        candidates = scored[:REFINE_TOP]

    if not candidates:
        raise OptimizationError("no admissible (non-singular) design found on the grid")

    step0 = space.width / max(request.grid_resolution - 1, 1)
    refined: list[tuple[float, tuple[float, ...], np.ndarray, int]] = []
    total_iter = 0
    for _, supp in candidates:
        xs, ws, val, iters = _refine_support(model, spec, supp, step0, request.weight_tolerance)
        total_iter += iters
        refined.append((val, tuple(xs), ws, iters))

    if not spec.is_convex:
        rng = np.random.default_rng(request.seed)
        for _ in range(MULTISTARTS):
            supp = np.sort(rng.uniform(space.lo, space.hi, request.n_support))
            if len(supp) > 1 and np.min(np.diff(supp)) <= space.merge_tol():
                continue
            xs, ws, val, iters = _refine_support(model, spec, supp, space.width / 16.0,
                                                 request.weight_tolerance)
            total_iter += iters
            if math.isfinite(val):
                refined.append((val, tuple(xs), ws, iters))

    finite = [r for r in refined if math.isfinite(r[0])]
    if not finite:
        raise OptimizationError("no admissible (non-singular) design found")
    finite.sort(key=lambda r: (r[0], _design_key(r[1], r[2])))
    best_val, best_xs, best_ws, _ = finite[0]

    # Canonicalize: a support point carrying negligible mass is optimizer dust;
    # drop it and re-optimize the remaining weights when that does not hurt.
    keep = [i for i, w in enumerate(best_ws) if w > 1e-7]
    if 2 <= len(keep) < len(best_xs):
        xs2 = [best_xs[i] for i in keep]
        F2 = np.asarray(model.regressor(np.asarray(xs2)), dtype=float)
        O2 = _outer3(F2)
        if len(xs2) == 2:
            w2, val2 = _best_weight_2pt(spec, O2[0], O2[1], request.weight_tolerance)
            ws2 = np.array([w2, 1.0 - w2])
        else:
            ws2, val2 = _best_weights_k(spec, O2, request.weight_tolerance)
        if val2 <= best_val * (1.0 + 1e-9) + 1e-12:
            best_xs, best_ws, best_val = tuple(xs2), ws2, val2

    design = make_design(list(zip(best_xs, best_ws)), space)
    value = criterion_value(fim(model, design), spec)

    if spec.is_convex and not fim(model, design).is_singular:
        report = derivative_report(model, design, spec, grid_points=1000)
        converged = report.passes(value, EQUIVALENCE_TOL)
        return OptimizeResult(design, value, report, converged, total_iter,
                              "certified" if converged else "best-found")
    return OptimizeResult(design, value, None, False, total_iter, "best-found")


def c_optimal(model: Model, c: Sequence[float], grid_resolution: int = 201,
              weight_tolerance: float = 1e-8, seed: int = 0) -> OptimizeResult:
    """Design minimizing the generalized variance c^T M^- c.

    c-optimal designs may be singular (one-point); those are admissible when
    c is estimable there, found by locating the points where the regressor is
    parallel to c.  Non-singular optima win ties so that they can carry an
    equivalence certificate.
    """
    c1, c2 = float(c[0]), float(c[1])
    if c1 == 0.0 and c2 == 0.0:
        raise ValidationError("c must be nonzero")
    spec = CriterionSpec("C", c=(c1, c2))
    two_point = optimize_design(OptimizeRequest(
        model=model, criterion=spec, n_support=2,
        grid_resolution=grid_resolution, weight_tolerance=weight_tolerance, seed=seed))

    best = two_point
    # Singleton candidates: roots of cross(x) = c1 f2(x) - c2 f1(x).
    grid = model.space.grid(max(grid_resolution, 400))
    F = np.asarray(model.regressor(grid), dtype=float)
    cross = c1 * F[:, 1] - c2 * F[:, 0]
    roots: list[float] = []
    for i in range(len(grid) - 1):
        lo_v, hi_v = cross[i], cross[i + 1]
        if lo_v == 0.0:
            roots.append(float(grid[i]))
        elif lo_v * hi_v < 0.0:
            a, b = float(grid[i]), float(grid[i + 1])
            fa = lo_v
            for _ in range(80):
                mid = 0.5 * (a + b)
                f_mid = model.regressor_at(mid)
                fm = float(c1 * f_mid[1] - c2 * f_mid[0])
                if fa * fm <= 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            roots.append(0.5 * (a + b))
    if cross[-1] == 0.0:
        roots.append(float(grid[-1]))
    for x in roots:
        design = make_design([(x, 1.0)], model.space)
        val = phi_c(fim(model, design), (c1, c2))
        if math.isfinite(val) and val < best.criterion_value * (1.0 - 1e-12):
            best = OptimizeResult(design, val, None, False, best.iterations, "best-found")

    if not math.isfinite(best.criterion_value):
        raise OptimizationError("c is inestimable under every candidate design")
    return best


def sa_references(model: Model, grid_resolution: int = 201,
                  weight_tolerance: float = 1e-8, seed: int = 0) -> tuple[float, float]:
    """Optimal c-criterion values for c = (1,0) and c = (0,1), feeding the SA criterion."""
    r1 = c_optimal(model, (1.0, 0.0), grid_resolution, weight_tolerance, seed)
    r2 = c_optimal(model, (0.0, 1.0), grid_resolution, weight_tolerance, seed)
    return r1.criterion_value, r2.criterion_value


# --- Michaelis-Menten reference tables ---------------------------------------

MM_CRITERIA = ("D", "SA", "R", "EM", "R2")


@dataclass(frozen=True)
class MMDesignRow:
    """One (eps, criterion) cell of the design table: support {a*K, b*K}, mass p at a*K."""

    eps: float
    criterion: str
    a: float
    p: float
    design: Design | None
    collapsed: bool


@dataclass(frozen=True)
class MMEfficiencyRow:
    eps: float
    criterion: str
    eff_d: float | None
    eff_sa: float | None
    eff_r: float | None
    eff_em: float | None
    eff_r2: float | None
    r2: float | None


@dataclass(frozen=True)
class MMTables:
    designs: tuple[MMDesignRow, ...]
    efficiencies: tuple[MMEfficiencyRow, ...]


def _criterion_for(kind: str, refs: tuple[float, float]) -> CriterionSpec:
    if kind == "SA":
        return CriterionSpec("SA", sa_refs=refs)
    return CriterionSpec(kind)


def mm_tables(params: MMParams, eps_list: Sequence[float],
              criteria: Sequence[str] = MM_CRITERIA, compat: bool = True,
              grid_resolution: int = 201, weight_tolerance: float = 1e-8,
              seed: int = 0) -> MMTables:
    """Optimal designs and cross-efficiencies per lower design-space extreme.

    With ``compat=True`` (default) the criteria without an attained optimum on
    a space containing zero (condition number and squared correlation, whose
    infima sit at the singular boundary) are reported as the degenerate limit
    rows a=0, p=1; their reference values are then unavailable and dependent
    efficiency cells are left empty.  With ``compat=False`` the optimizer's
    best-found non-singular design is reported instead.
    """
    for kind in criteria:
        if kind not in MM_CRITERIA:
            raise ValidationError(f"unknown table criterion {kind!r}; choose from {MM_CRITERIA}")

    design_rows: list[MMDesignRow] = []
    eff_rows: list[MMEfficiencyRow] = []

    for eps in eps_list:
        p_eps = replace(params, eps=float(eps))
        model = mm_model(p_eps)
        at_zero_floor = p_eps.space().lo == 0.0
        refs = sa_references(model, grid_resolution, weight_tolerance, seed)

        designs: dict[str, Design | None] = {}
        for kind in criteria:
            if kind == "D":
                designs[kind] = mm_d_optimal(p_eps)
            elif kind in ("EM", "R2") and compat and at_zero_floor:
                designs[kind] = None
            else:
                spec = _criterion_for(kind, refs)
                designs[kind] = optimize_design(OptimizeRequest(
                    model=model, criterion=spec, n_support=2,
                    grid_resolution=grid_resolution,
                    weight_tolerance=weight_tolerance, seed=seed)).design

        evaluators = {
            "D": CriterionSpec("D"),
            "SA": CriterionSpec("SA", sa_refs=refs),
            "R": CriterionSpec("R"),
            "EM": CriterionSpec("EM"),
            "R2": CriterionSpec("R2"),
        }
        stars: dict[str, float | None] = {}
        for kind in criteria:
            d = designs[kind]
            stars[kind] = None if d is None else criterion_value(fim(model, d), evaluators[kind])

        for kind in criteria:
            d = designs[kind]
            if d is None:
                design_rows.append(MMDesignRow(eps=float(eps), criterion=kind,
                                               a=0.0, p=1.0, design=None, collapsed=True))
                cells = {k: (1.0 if k == kind else None) for k in MM_CRITERIA}
                eff_rows.append(MMEfficiencyRow(
                    eps=float(eps), criterion=kind,
                    eff_d=cells["D"], eff_sa=cells["SA"], eff_r=cells["R"],
                    eff_em=cells["EM"], eff_r2=cells["R2"], r2=None))
                continue

            x_lo, w_lo = d.points[0]
            design_rows.append(MMDesignRow(
                eps=float(eps), criterion=kind,
                a=x_lo / p_eps.K, p=w_lo, design=d, collapsed=False))

            m = fim(model, d)
            def eff(col: str) -> float | None:
                star = stars.get(col)
                if star is None or col not in criteria:
                    return None
                val = criterion_value(m, evaluators[col])
                if not math.isfinite(val) or val <= 0.0:
                    return None
                return star / val

            r2_val = criterion_value(m, evaluators["R2"])
            eff_rows.append(MMEfficiencyRow(
                eps=float(eps), criterion=kind,
                eff_d=eff("D"), eff_sa=eff("SA"), eff_r=eff("R"),
                eff_em=eff("EM"), eff_r2=eff("R2"),
                r2=r2_val if math.isfinite(r2_val) else None))

    return MMTables(designs=tuple(design_rows), efficiencies=tuple(eff_rows))


def _fmt2(v: float | None) -> str:
    if v is None:
        return ""
    r = round(v, 2)
    if r == 0.0:
        r = 0.0
    return f"{r:.2f}"


def mm_designs_csv(tables: MMTables) -> str:
    lines = ["eps,criterion,a,p"]
    for row in tables.designs:
        lines.append(f"{row.eps:g},{row.criterion},{_fmt2(row.a)},{_fmt2(row.p)}")
    return "\n".join(lines) + "\n"


def mm_efficiencies_csv(tables: MMTables) -> str:
    lines = ["eps,criterion,Eff_D,Eff_SA,Eff_R,Eff_EM,Eff_r2,r2"]
    for row in tables.efficiencies:
        cells = [_fmt2(row.eff_d), _fmt2(row.eff_sa), _fmt2(row.eff_r),
                 _fmt2(row.eff_em), _fmt2(row.eff_r2), _fmt2(row.r2)]
        lines.append(f"{row.eps:g},{row.criterion}," + ",".join(cells))
    return "\n".join(lines) + "\n"
