"""Best-response optima: closed forms, independent numeric searches, and a
finite-difference stationarity checker.

The numeric searches are deliberately hand-rolled and formula-free so they
can serve as oracles against the closed forms: golden-section for 1-D,
grid-with-refinement for 2-D. Both reject non-finite objective values with
a SearchError carrying the offending point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import DomainError, SearchError, ValidationError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BestResponse:
    """Result of an argmin computation.

    argmin_c is None for 1-D searches. resolution_* is the final bracket or
    grid spacing per axis. plateau_* flags a final grid row/column whose
    values are flat to relative 1e-12, i.e. the optimum is a plateau rather
    than a point at this resolution.
    """

    argmin_m: float
    min_value: float
    method: str
    argmin_c: float | None = None
    resolution_m: float | None = None
    resolution_c: float | None = None
    plateau_m: bool = False
    plateau_c: bool = False


def optimal_local_data(cost: float, noise_scale: float) -> float:
    """Standalone optimum sqrt(noise_scale / (2 cost)): where the marginal
    convergence gain equals the marginal data cost."""
    if not (isinstance(cost, (int, float)) and math.isfinite(cost) and cost > 0):
        raise DomainError(f"cost must be finite and > 0, got {cost!r}")
    if not (isinstance(noise_scale, (int, float)) and math.isfinite(noise_scale)
            and noise_scale > 0):
        raise DomainError(f"noise_scale must be finite and > 0, got {noise_scale!r}")
    return math.sqrt(noise_scale / (2.0 * cost))


def optimal_federated_data(cost: float, noise_scale: float, sum_others: float) -> float:
    """Self-interested contribution inside a federation: the standalone
    optimum minus what others already provide, clamped at zero (free-ride
    rather than contribute negative data)."""
    if not (isinstance(sum_others, (int, float)) and math.isfinite(sum_others)
            and sum_others >= 0):
        raise DomainError(f"sum_others must be finite and >= 0, got {sum_others!r}")
    return max(0.0, optimal_local_data(cost, noise_scale) - sum_others)


def _eval(objective: Callable[..., float], point) -> float:
    value = objective(*point) if isinstance(point, tuple) else objective(point)
    value = float(value)
    if not math.isfinite(value):
        raise SearchError(f"objective returned non-finite value {value!r} at {point!r}",
                          point=point)
    return value


def numeric_argmin_1d(objective: Callable[[float], float], lower: float, upper: float,
                      tol: float = 1e-10, max_iter: int = 200) -> BestResponse:
    """Golden-section search on [lower, upper].

    Assumes a unimodal objective; the iteration count is fixed by the
    tolerance, so the call sequence is deterministic.
    """
    if not (math.isfinite(lower) and math.isfinite(upper) and lower < upper):
        raise ValidationError(f"need finite lower < upper, got [{lower!r}, {upper!r}]")
    if not (tol > 0 and math.isfinite(tol)):
        raise ValidationError(f"tol must be finite and > 0, got {tol!r}")

    a, b = float(lower), float(upper)
    width = b - a
    iterations = min(max_iter,
                     max(1, math.ceil(math.log(tol / width) / math.log(_INVPHI))))
    x1 = b - _INVPHI * width
    x2 = a + _INVPHI * width
    f1 = _eval(objective, x1)
    f2 = _eval(objective, x2)
    for _ in range(iterations):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = _eval(objective, x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = _eval(objective, x2)
    argmin = 0.5 * (a + b)
    return BestResponse(argmin_m=argmin, min_value=_eval(objective, argmin),
                        method="golden-section", resolution_m=b - a)


def _axis_plateau(values: Sequence[float]) -> bool:
    lo, hi = min(values), max(values)
    scale = max(abs(lo), abs(hi), 1e-300)
    return (hi - lo) <= 1e-12 * scale


def numeric_argmin_2d(objective: Callable[[float, float], float],
                      m_range: tuple[float, float], c_range: tuple[float, float],
                      grid: int = 33, refinements: int = 3) -> BestResponse:
    """Dense grid argmin with windowed refinement.

    Each refinement re-grids the +/-1-cell window around the incumbent.
    resolution_* is the spacing of the last grid actually evaluated,
    (range / (grid-1)) / ((grid-1)/2)^refinements per axis for interior
    optima; a unimodal objective's true argmin lies within one such cell.
    Flat rows/columns through the final incumbent set the plateau flags
    instead of pretending to point resolution.
    """
    if grid < 3:
        raise ValidationError(f"grid must be >= 3, got {grid!r}")
    (m_lo, m_hi), (c_lo, c_hi) = m_range, c_range
    if not (math.isfinite(m_lo) and math.isfinite(m_hi) and m_lo < m_hi):
        raise ValidationError(f"bad m_range {m_range!r}")
    if not (math.isfinite(c_lo) and math.isfinite(c_hi) and c_lo < c_hi):
        raise ValidationError(f"bad c_range {c_range!r}")

    orig_m, orig_c = (m_lo, m_hi), (c_lo, c_hi)
    best = None
    for _ in range(refinements + 1):
        res_m = (m_hi - m_lo) / (grid - 1)  # spacing of the grid evaluated now
        res_c = (c_hi - c_lo) / (grid - 1)
        ms = [m_lo + (m_hi - m_lo) * i / (grid - 1) for i in range(grid)]
        cs = [c_lo + (c_hi - c_lo) * j / (grid - 1) for j in range(grid)]
        values = [[_eval(objective, (m, c)) for c in cs] for m in ms]
        bi, bj = 0, 0
        for i in range(grid):
            for j in range(grid):
                if values[i][j] < values[bi][bj]:
                    bi, bj = i, j
        best = (ms[bi], cs[bj], values[bi][bj])
        row = values[bi]                      # vary c at the incumbent m
        col = [values[i][bj] for i in range(grid)]  # vary m at the incumbent c
        # shrink the window to one cell either side of the incumbent
        m_lo = max(orig_m[0], ms[max(bi - 1, 0)])
        m_hi = min(orig_m[1], ms[min(bi + 1, grid - 1)])
        c_lo = max(orig_c[0], cs[max(bj - 1, 0)])
        c_hi = min(orig_c[1], cs[min(bj + 1, grid - 1)])

    return BestResponse(argmin_m=best[0], argmin_c=best[1], min_value=best[2],
                        method="grid", resolution_m=res_m, resolution_c=res_c,
                        plateau_m=_axis_plateau(col), plateau_c=_axis_plateau(row))


@dataclass(frozen=True)
class StationarityReport:
    """Central finite differences of an objective at a candidate optimum."""

    point: tuple[float, ...]
    partials: tuple[float, ...]
    steps: tuple[float, ...]
    loss_scale: float
    threshold: float
    passed: bool


def verify_stationarity(objective: Callable[..., float], point,
                        steps: Sequence[float] | None = None,
                        rtol: float = 1e-5) -> StationarityReport:
    """Check that every central finite-difference partial at `point` is small
    relative to the local loss scale |objective(point)|.

    Default step per coordinate: max(1e-6 |x|, 1e-9).
    """
    coords = tuple(float(x) for x in (point if isinstance(point, (tuple, list)) else (point,)))
    if steps is None:
        steps = tuple(max(1e-6 * abs(x), 1e-9) for x in coords)
    else:
        steps = tuple(float(h) for h in steps)
        if len(steps) != len(coords):
            raise ValidationError("steps must match the dimension of point")

    def call(xs: tuple[float, ...]) -> float:
        return _eval(objective, xs if len(xs) > 1 else xs[0])

    f0 = call(coords)
    loss_scale = abs(f0) if f0 != 0.0 else 1.0
    partials = []
    for idx, h in enumerate(steps):
        up = list(coords)
        dn = list(coords)
        up[idx] += h
        dn[idx] -= h
        partials.append((call(tuple(up)) - call(tuple(dn))) / (2.0 * h))
    threshold = rtol * loss_scale
    passed = all(abs(g) <= threshold for g in partials)
    return StationarityReport(point=coords, partials=tuple(partials), steps=tuple(steps),
                              loss_scale=loss_scale, threshold=threshold, passed=passed)
