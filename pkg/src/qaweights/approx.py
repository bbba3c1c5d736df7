"""Best weighted-sup approximation on a grid, by polynomials or trigonometric spans.

The discretized minimax problem

    minimize E  subject to  |f(t_i) - sum_k c_k phi_k(t_i)| w(t_i) <= E

is a linear program.  The weighted design matrix ``W Phi`` is replaced by
the orthonormal factor of its column-pivoted QR decomposition before the LP
is solved, which keeps the solver well conditioned (trigonometric columns
with nearby frequencies are almost parallel).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.optimize import linprog

from .weights import Profile1D, Radial, WeightExpr

__all__ = [
    "DEGREE_CAP",
    "PLATEAU_RATIO",
    "DENSE_RATIO",
    "FitResult",
    "ApproxReport",
    "bernstein_norm",
    "chebyshev_grid",
    "default_range",
    "best_poly_approx",
    "best_trig_approx",
    "density_experiment",
    "plateau_flag",
]

DEGREE_CAP = 60
PLATEAU_RATIO = 0.5
DENSE_RATIO = 0.05
RANK_TOL = 1e-13


def _line(w):
    if isinstance(w, Profile1D):
        return Radial(w, 1)
    if w.dimension != 1:
        raise ValueError("approximation experiments are one-dimensional")
    return w


def _weight_values(w, t):
    with np.errstate(under="ignore"):
        return np.exp(_line(w).log_eval_line(np.asarray(t, dtype=float)))


def bernstein_norm(f: Callable, w, grid) -> float:
    """``max_i |f(t_i)| w(t_i)``."""
    t = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(np.asarray(f(t), dtype=float)) * _weight_values(w, t)))


def chebyshev_grid(a: float, b: float, count: int) -> np.ndarray:
    """``count`` Chebyshev points of the first kind on ``[a, b]``, increasing."""
    if count < 2 or not b > a:
        raise ValueError("need count >= 2 and a < b")
    k = np.arange(count)
    x = -np.cos(np.pi * (2 * k + 1) / (2 * count))
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def default_range(w, rel: float = 1e-14) -> tuple[float, float]:
    """Symmetric range on which ``w`` exceeds ``rel`` times its sup."""
    w = _line(w)
    probe = np.concatenate([-np.geomspace(1e-3, 1e6, 600)[::-1], [0.0], np.geomspace(1e-3, 1e6, 600)])
    lv = w.log_eval_line(probe)
    top = float(np.max(lv))
    if top == -np.inf:
        raise ValueError("weight vanishes on the probe grid")
    ok = lv >= top + math.log(rel)
    T = float(np.max(np.abs(probe[ok])))
    return -T, T


@dataclass
class FitResult:
    coefficients: np.ndarray
    error: float
    lp_error: float
    duality_gap: float
    rank: int

    def __iter__(self):  # (coefficients, error) unpacking
        yield self.coefficients
        yield self.error


def _minimax(B: np.ndarray, f: np.ndarray, wv: np.ndarray) -> FitResult:
    """Weighted minimax fit of ``f`` by the columns of ``B`` on the rows where ``w > 0``."""
    keep = wv > 0
    A = wv[keep, None] * B[keep]
    y = wv[keep] * f[keep]
    scale = float(np.max(np.abs(y))) if y.size else 0.0
    ncoef = B.shape[1]
    if scale == 0.0:
        return FitResult(np.zeros(ncoef), 0.0, 0.0, 0.0, 0)
    y = y / scale
    Q, R, piv = qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
    Q, R = Q[:, :rank], R[:rank, :rank]
    # variables: z (rank, free) and E >= 0; minimize E
    n = y.size
    c = np.zeros(rank + 1)
    c[-1] = 1.0
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([Q, -ones]), np.hstack([-Q, -ones])])
    b_ub = np.concatenate([y, -y])
    bounds = [(None, None)] * rank + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    z = res.x[:rank]
    dual = float(b_ub @ res.ineqlin.marginals)
    gap = abs(float(res.fun) - dual)
    coef = np.zeros(ncoef)
    if rank:
        coef[piv[:rank]] = solve_triangular(R, z)
    achieved = float(np.max(np.abs(A @ coef - y)) * scale) if rank else scale
    if rank:
        # the least-squares fit is feasible too and wins when the optimum is (near) zero
        zl = Q.T @ y
        ls = float(np.max(np.abs(Q @ zl - y)) * scale)
        if ls < achieved:
            coef = np.zeros(ncoef)
            coef[piv[:rank]] = solve_triangular(R, zl)
            achieved = float(np.max(np.abs(A @ coef - y)) * scale)
    coef *= scale
    return FitResult(coef, achieved, float(res.fun) * scale, gap, rank)


def _cheb_design(t, a, b, degree):
    x = (2.0 * t - (a + b)) / (b - a)
    return np.polynomial.chebyshev.chebvander(x, degree)


def best_poly_approx(target: Callable, w, degree: int, grid) -> FitResult:
    """Best weighted-sup polynomial of degree ``<= degree`` on ``grid``.

    Coefficients are in the Chebyshev basis of ``[min(grid), max(grid)]``.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if degree > DEGREE_CAP:
        raise ValueError(f"degree above the conditioning cap {DEGREE_CAP}")
    t = np.asarray(grid, dtype=float)
    a, b = float(t.min()), float(t.max())
    f = np.asarray(target(t), dtype=float)
    wv = _weight_values(w, t)
    return _minimax(_cheb_design(t, a, b, degree), f, wv)


def _trig_design(t, freqs):
    cols = []
    for lam in freqs:
        cols.append(np.cos(lam * t))
        if lam != 0:
            cols.append(np.sin(lam * t))
    return np.column_stack(cols)


def best_trig_approx(target: Callable, w, spectral_set: Sequence[float], grid) -> FitResult:
    """Best weighted-sup fit from ``span{cos(lam t), sin(lam t) : lam in spectral_set}``.

    Coefficients follow the column order: ``cos`` then ``sin`` for each
    ``lam != 0``, only ``cos`` (the constant) for ``lam = 0``.
    """
    freqs = [float(x) for x in spectral_set]
    if not freqs:
        raise ValueError("spectral set must be nonempty")
    t = np.asarray(grid, dtype=float)
    f = np.asarray(target(t), dtype=float)
    wv = _weight_values(w, t)
    return _minimax(_trig_design(t, freqs), f, wv)


def runge_target(t):
    return 1.0 / (1.0 + np.asarray(t, dtype=float) ** 2)


def adversarial_bump(w, t0: float, width: float = 5.0) -> Callable:
    """Bump ``exp(-((t - t0)/width)^2) / w(t0)``: ``target * w`` peaks near 1 where ``w`` is tiny."""
    lw0 = float(_line(w).log_eval_line(np.array([float(t0)]))[0])
    if not np.isfinite(lw0):
        raise ValueError("the weight vanishes at the bump centre")

    def f(t):
        return np.exp(-((np.asarray(t, dtype=float) - t0) / width) ** 2 - lw0)
    return f


def named_target(spec: str, w, T: float) -> tuple[str, Callable]:
    """``runge``, ``gauss`` or ``bump[:T0[:WIDTH]]`` (``T0`` defaults to ``T/10``)."""
    name, *rest = spec.split(":")
    if name == "runge":
        return "runge", runge_target
    if name == "gauss":
        return "gauss", lambda t: np.exp(-((np.asarray(t, dtype=float) - 1.0) ** 2))
    if name == "bump":
        t0 = float(rest[0]) if rest else T / 10.0
        width = float(rest[1]) if len(rest) > 1 else 5.0
        return f"bump@{t0:g}", adversarial_bump(w, t0, width)
    raise ValueError(f"unknown target {spec!r}")


def plateau_flag(indices, errors, ratio: float = PLATEAU_RATIO) -> bool | None:
    """``error(d_max) > ratio * error(d_max / 4)``; ``None`` if the schedule is too short."""
    idx = np.asarray(indices, dtype=float)
    err = np.asarray(errors, dtype=float)
    if idx.size < 2:
        return None
    quarter = idx[-1] / 4.0
    cand = np.flatnonzero(idx <= quarter)
    if cand.size == 0:
        return None
    e_q = err[cand[-1]]
    return bool(err[-1] > ratio * e_q)


@dataclass
class ApproxReport:
    family: str
    schedule: list
    targets: list
    errors: np.ndarray  # (len(schedule), len(targets))
    duality_gaps: np.ndarray
    grid: dict
    verdict: dict | None = None
    plateau: list = field(default_factory=list)
    dense_trend: list = field(default_factory=list)
    thresholds: dict = field(default_factory=lambda: {"plateau_ratio": PLATEAU_RATIO,
                                                        "dense_ratio": DENSE_RATIO})

    @property
    def max_duality_gap(self) -> float:
        return float(np.max(self.duality_gaps)) if self.duality_gaps.size else 0.0

    def header(self) -> dict:
        return {"family": self.family, "schedule": list(self.schedule), "targets": list(self.targets),
                "grid": self.grid, "verdict": self.verdict, "plateau": self.plateau,
                "dense_trend": self.dense_trend, "thresholds": self.thresholds,
                "max_duality_gap": self.max_duality_gap,
                "errors": {name: self.errors[:, j].tolist() for j, name in enumerate(self.targets)}}

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index"] + [f"error_{n}" for n in self.targets])
        for i, s in enumerate(self.schedule):
            wr.writerow([s] + [repr(float(e)) for e in self.errors[i]])
        return buf.getvalue()

    def to_json(self) -> str:
        from .spec_io import dumps

        return dumps(self.header())

    def to_svg(self, width: int = 640, height: int = 400) -> str:
        """Static line chart of ``log10(error)`` against the schedule index."""
        pad = 50
        x = np.asarray(self.schedule, dtype=float)
        with np.errstate(divide="ignore"):
            ly = np.log10(np.maximum(self.errors, 1e-300))
        x0, x1 = float(x.min()), float(x.max()) if x.max() > x.min() else float(x.min()) + 1.0
        y0, y1 = float(ly.min()), float(ly.max())
        if y1 <= y0:
            y1 = y0 + 1.0

        def px(v):
            return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

        def py(v):
            return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

        colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
                 f'<rect width="{width}" height="{height}" fill="white"/>',
                 f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
                 f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
                 f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{self.family} index</text>',
                 f'<text x="12" y="{pad - 10}">log10 error</text>']
        for j, name in enumerate(self.targets):
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, ly[:, j]))
            col = colors[j % len(colors)]
            parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{pts}"/>')
            parts.append(f'<text x="{width - pad - 150}" y="{pad + 16 * j}" fill="{col}">{name}</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def density_experiment(w, targets, family: str = "poly", schedule: Sequence = (0, 10, 20, 30, 40),
                       *, grid=None, spectral_set=None, classify_weight: bool = True) -> ApproxReport:
    """Sweep ``schedule`` (degrees, or counts of leading spectral points) for each target.

    ``targets`` is a list of callables or ``(name, callable)`` pairs.  Each
    error is clamped to the best value seen so far: the families are nested,
    so the previous optimum stays feasible and the true minimum cannot grow.
    """
    w = _line(w)
    sched = [int(s) for s in schedule]
    if not sched or any(b <= a for a, b in zip(sched[:-1], sched[1:])):
        raise ValueError("schedule must be nonempty and increasing")
    if family not in ("poly", "trig"):
        raise ValueError("family must be 'poly' or 'trig'")
    if grid is None:
        a, b = default_range(w)
        grid = chebyshev_grid(a, b, 2001)
    t = np.asarray(grid, dtype=float)
    named = [(f"target{i}", g) if callable(g) else (str(g[0]), g[1]) for i, g in enumerate(targets)]
    if family == "trig":
        if spectral_set is None:
            raise ValueError("trig experiments need a spectral set")
        spec = [float(x) for x in spectral_set]
        if sched[-1] > len(spec) or sched[0] < 1:
            raise ValueError("trig schedule counts must lie in [1, len(spectral_set)]")
    errors = np.zeros((len(sched), len(named)))
    gaps = np.zeros_like(errors)
    for j, (_, g) in enumerate(named):
        best = math.inf
        for i, s in enumerate(sched):
            if family == "poly":
                r = best_poly_approx(g, w, s, t)
            else:
                r = best_trig_approx(g, w, spec[:s], t)
            best = min(best, r.error)
            errors[i, j] = best
            gaps[i, j] = r.duality_gap
    report = ApproxReport(family, sched, [n for n, _ in named], errors, gaps,
                          {"min": float(t.min()), "max": float(t.max()), "count": int(t.size)})
    report.plateau = [plateau_flag(sched, errors[:, j]) for j in range(len(named))]
    report.dense_trend = [bool(errors[-1, j] < DENSE_RATIO * errors[0, j]) if len(sched) > 1 else None
                          for j in range(len(named))]
    if classify_weight:
        from .classifier import classify

        report.verdict = classify(w).to_dict()
    return report
