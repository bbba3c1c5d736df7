"""Polynomial density and moment determinacy from a quasi-analytic weight.

If ``w`` is quasi-analytic, strictly positive and ``int 1/w dmu < inf``, then
polynomials are dense in ``L_p(mu)`` for ``1 <= p < inf`` and ``mu`` is
determinate.  The criterion is one-sided: an infinite integral says nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .classifier import QA, EvidenceRecord, classify, series_test
from .moments import MomentSequence
from .ostrowski import smooth_majorant_rho, support_radius
from .weights import Profile1D, Radial, WeightExpr

__all__ = [
    "FINITE",
    "INFINITE",
    "MeasureSpec",
    "integral_criterion",
    "moments_of_measure",
    "carleman_test",
    "parse_measure",
]

FINITE = "Finite"
INFINITE = "Infinite"
UNDETERMINED = "Undetermined"

ABS_TOL = 1e-10
REL_TOL = 1e-8
MAX_SHELLS = 200
LOG_OVERFLOW = 700.0


@dataclass
class MeasureSpec:
    """A measure given by a (log-)density, a list of atoms, or per-axis absolute moments."""

    form: str
    dimension: int = 1
    log_density: Callable | None = None
    atoms: np.ndarray | None = None
    masses: np.ndarray | None = None
    axis_moments: list = field(default_factory=list)

    def __post_init__(self):
        if self.form not in ("density", "atoms", "moments"):
            raise ValueError("form must be 'density', 'atoms' or 'moments'")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.form == "atoms":
            pts = np.asarray(self.atoms, dtype=float).reshape(-1, self.dimension)
            ms = np.asarray(self.masses, dtype=float).reshape(-1)
            if pts.shape[0] != ms.size or ms.size == 0:
                raise ValueError("need one positive mass per atom")
            if np.any(ms <= 0) or not np.all(np.isfinite(ms)):
                raise ValueError("atom masses must be positive")
            self.atoms, self.masses = pts, ms
        if self.form == "moments":
            if len(self.axis_moments) != self.dimension:
                raise ValueError("moments form needs one moment list per axis")
            self.axis_moments = [np.asarray(a, dtype=float) for a in self.axis_moments]
            if any(np.any(a < 0) for a in self.axis_moments):
                raise ValueError("absolute moments are nonnegative")

    @classmethod
    def from_density(cls, density, dimension=1, normalization=None):
        """``density(X)`` on points ``X`` of shape ``(N, n)``; optionally divided by ``normalization``."""
        shift = 0.0 if normalization is None else math.log(normalization)

        def logd(X):
            d = np.asarray(density(X), dtype=float)
            if np.any(d < 0):
                raise ValueError("density must be nonnegative")
            with np.errstate(divide="ignore"):
                return np.log(d) - shift

        return cls("density", dimension, log_density=logd)

    @classmethod
    def from_log_density(cls, log_density, dimension=1):
        return cls("density", dimension, log_density=log_density)

    @classmethod
    def from_atoms(cls, points, masses):
        pts = np.asarray(points, dtype=float)
        n = 1 if pts.ndim == 1 else pts.shape[1]
        return cls("atoms", n, atoms=pts, masses=masses)

    @classmethod
    def from_moments(cls, axis_moments):
        return cls("moments", len(axis_moments), axis_moments=list(axis_moments))

    def scaled(self, c: float) -> "MeasureSpec":
        if c <= 0:
            raise ValueError("scale must be positive")
        if self.form == "atoms":
            return MeasureSpec("atoms", self.dimension, atoms=self.atoms, masses=self.masses * c)
        if self.form == "moments":
            return MeasureSpec("moments", self.dimension, axis_moments=[a * c for a in self.axis_moments])
        lc, f = math.log(c), self.log_density
        return MeasureSpec("density", self.dimension, log_density=lambda X: f(X) + lc)


def parse_measure(doc: dict) -> MeasureSpec:
    """``{"form": "density", "density": <weight spec>, "normalization": c | "auto"}``,
    ``{"form": "atoms", "points": [...], "masses": [...]}`` or
    ``{"form": "moments", "moments": [[m0, m1, ...], ...]}`` (absolute moments per axis)."""
    from .spec_io import SpecError, parse_spec

    if not isinstance(doc, dict) or "form" not in doc:
        raise SpecError("measure must be an object with a 'form' field")
    form = doc["form"]
    try:
        if form == "density":
            w = parse_spec(doc["density"])
            norm = doc.get("normalization")
            if norm == "auto":
                log_mass, _, concl = _shell_integral(w.log_eval, w.dimension)
                if concl != FINITE:
                    raise ValueError("density does not have finite total mass")
                shift = log_mass
            else:
                shift = 0.0 if norm is None else math.log(float(norm))
            return MeasureSpec.from_log_density(lambda X: w.log_eval(X) - shift, w.dimension)
        if form == "atoms":
            return MeasureSpec.from_atoms(doc["points"], doc["masses"])
        if form == "moments":
            return MeasureSpec.from_moments(doc["moments"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"invalid {form} measure: {exc}") from exc
    raise SpecError(f"unknown measure form {form!r}")


# ---------------------------------------------------------------------------
# quadrature on dyadic shells
# ---------------------------------------------------------------------------


def _angular_rule(n: int):
    """Unit directions and weights integrating over the sphere ``S^{n-1}``."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(th.size, 2 * np.pi / th.size)
    if n == 3:
        x, wx = np.polynomial.legendre.leggauss(24)
        ph = np.linspace(0.0, 2 * np.pi, 48, endpoint=False)
        ct, P = np.meshgrid(x, ph, indexing="ij")
        st = np.sqrt(1 - ct**2)
        dirs = np.column_stack([(st * np.cos(P)).ravel(), (st * np.sin(P)).ravel(), ct.ravel()])
        wts = (wx[:, None] * np.full(ph.size, 2 * np.pi / ph.size)[None, :]).ravel()
        return dirs, wts
    raise ValueError("density quadrature supports dimensions 1 to 3")


def _radial_log_integrand(log_f, n):
    """``log( r^{n-1} * sum_theta w_theta f(r theta) )`` as a function of scalar ``r``."""
    dirs, wts = _angular_rule(n)
    lw = np.log(wts)

    def g(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        X = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        vals = np.asarray(log_f(X), dtype=float).reshape(r.size, -1) + lw[None, :]
        with np.errstate(divide="ignore"):
            out = logsumexp(vals, axis=1)
            return out + (n - 1) * np.log(r) if n > 1 else out

    return g


def _shell_log_integral(g, a: float, b: float) -> float:
    """``log int_a^b exp(g(r)) dr`` with a sampled max shift and adaptive quadrature."""
    probe = np.linspace(a, b, 33)
    gp = g(probe)
    top = float(np.max(gp))
    if top == -np.inf:
        return -np.inf
    if not math.isfinite(top) or top > LOG_OVERFLOW:
        return math.inf
    val, _ = integrate.quad(lambda r: math.exp(float(g(r)[0]) - top), a, b,
                            epsabs=1e-14,  # integrand is shifted to peak at 1
                            epsrel=REL_TOL, limit=200)
    return top + math.log(val) if val > 0 else -np.inf


def _shell_integral(log_f, n: int):
    """Integral of ``exp(log_f)`` over ``R^n`` by dyadic shells; returns ``(log total, logs, conclusion)``."""
    g = _radial_log_integrand(log_f, n)
    logs = [_shell_log_integral(g, 0.0, 1.0)]
    for k in range(MAX_SHELLS):
        lc = _shell_log_integral(g, 2.0**k, 2.0 ** (k + 1))
        logs.append(lc)
        total = logsumexp(logs)
        if lc == math.inf or total > LOG_OVERFLOW:
            return math.inf, np.array(logs), INFINITE
        if k >= 4:
            last = np.array(logs[-3:])
            # three negligible shells in a row, each no larger than the one before
            small = np.all(np.exp(last) <= ABS_TOL + REL_TOL * math.exp(total)) if total > -745 \
                else np.all(last == -np.inf)
            if small and np.all(np.diff(last) <= 0):
                return float(total), np.array(logs), FINITE
            grow = np.array(logs[-6:])
            if k >= 8 and np.all(np.diff(grow) >= -1e-12) and grow[-1] > logs[0] - 5:
                # shell contributions not decaying: the tail of the integral diverges
                return math.inf, np.array(logs), INFINITE
    return float(logsumexp(logs)), np.array(logs), UNDETERMINED


def _needs_majorant(w: WeightExpr) -> bool:
    if w.dimension != 1:
        return False
    try:
        return math.isfinite(support_radius(w))
    except (TypeError, ValueError):
        return False


def integral_criterion(mu: MeasureSpec, w: WeightExpr, *, classify_weight: bool = True) -> EvidenceRecord:
    """``int 1/w dmu``; ``Finite`` together with a quasi-analytic ``w`` certifies determinacy."""
    if mu.form == "moments":
        raise ValueError("the integral criterion needs a density or atoms (use carleman_test for moments)")
    if isinstance(w, Profile1D):
        w = Radial(w, 1)
    if w.dimension != mu.dimension:
        raise ValueError("weight and measure dimensions differ")
    payload = {}
    if _needs_majorant(w):
        payload["substitution"] = "strictly positive smooth majorant"
        w = Radial(smooth_majorant_rho(w), 1)
    if mu.form == "atoms":
        lw = w.log_eval(mu.atoms)
        if np.any(lw == -np.inf):
            raise ValueError("weight vanishes at an atom of the measure")
        log_total = float(logsumexp(np.log(mu.masses) - lw))
        conclusion = FINITE if log_total < LOG_OVERFLOW else INFINITE
        payload["atoms"] = int(mu.masses.size)
    else:
        def log_f(X):
            ld = mu.log_density(X)
            with np.errstate(invalid="ignore"):
                out = ld - w.log_eval(X)
            # outside the support of mu the integrand is 0 even where w = 0
            return np.where(ld == -np.inf, -np.inf, out)

        log_total, logs, conclusion = _shell_integral(log_f, mu.dimension)
        payload["shell_log_contributions"] = np.where(np.isfinite(logs), logs, -1e308)
    payload["value"] = math.exp(log_total) if log_total < LOG_OVERFLOW else math.inf
    if classify_weight:
        v = classify(w)
        payload["weight_class"] = v.cls
        payload["certifies_determinate"] = bool(conclusion == FINITE and v.cls == QA)
    return EvidenceRecord("MeasureIntegral", conclusion, payload)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

_GLX, _GLW = np.polynomial.legendre.leggauss(32)


def _radial_nodes(max_log2: int = 64, pieces: int = 8):
    """Composite Gauss-Legendre nodes on ``[0, 1]`` and the dyadic shells ``[2^k, 2^{k+1}]``."""
    edges = [0.0] + [2.0**k for k in range(max_log2 + 1)]
    r, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sub = np.linspace(a, b, pieces + 1)
        for c, d in zip(sub[:-1], sub[1:]):
            r.append(0.5 * (c + d) + 0.5 * (d - c) * _GLX)
            wr.append(0.5 * (d - c) * _GLW)
    return np.concatenate(r), np.concatenate(wr)


def moments_of_measure(mu: MeasureSpec, K: int) -> list[MomentSequence]:
    """Absolute moments ``int |x_j|^m dmu`` for ``m = 0..K`` on every axis."""
    if K < 0:
        raise ValueError("order must be nonnegative")
    ms = np.arange(K + 1, dtype=float)
    n = mu.dimension
    out = []
    if mu.form == "moments":
        for a in mu.axis_moments:
            if a.size < K + 1:
                raise ValueError(f"stored moments only reach order {a.size - 1}")
            out.append(MomentSequence.from_values(a[: K + 1], provenance="given"))
        return out
    if mu.form == "atoms":
        lm = np.log(mu.masses)
        for j in range(n):
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(mu.atoms[:, j]))
            terms = lm[None, :] + np.where(ms[:, None] == 0, 0.0, ms[:, None] * la[None, :])
            out.append(MomentSequence.from_log(logsumexp(terms, axis=1), provenance="atom-sum"))
        return out
    r, wr = _radial_nodes()
    dirs, wts = _angular_rule(n)
    X = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    with np.errstate(divide="ignore"):
        base = (np.asarray(mu.log_density(X), dtype=float)
                + np.repeat(np.log(wr) + (n - 1) * np.log(np.where(r > 0, r, 1.0)), dirs.shape[0])
                + np.tile(np.log(wts), r.size))
    shell_of = np.repeat(np.floor(np.log2(np.maximum(r, 1.0))).astype(int), dirs.shape[0])
    last_shell = shell_of.max()
    for j in range(n):
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(X[:, j]))
        lv = np.empty(K + 1)
        for i, m in enumerate(ms):
            terms = base + (0.0 if m == 0 else m * la)
            total = logsumexp(terms)
            tail = logsumexp(terms[shell_of >= last_shell - 1])
            # mass still sitting in the outermost shells means the moment diverges
            lv[i] = np.inf if tail > total - 30.0 and total > -np.inf else total
        out.append(MomentSequence.from_log(lv, provenance="shell-quadrature"))
    return out


def carleman_test(M: MomentSequence) -> EvidenceRecord:
    """Divergence of ``sum_k m_{2k}^{-1/(2k)}`` (a sufficient condition for determinacy)."""
    K = M.m_max // 2
    if K < 20:
        raise ValueError("carleman_test needs even moments up to order at least 40")
    even = M.log_values[0: 2 * K + 1: 2]
    # m_{2k}^{-1/(2k)} = c_k^{-1/k} with c_k = m_{2k}^{1/2}
    c = MomentSequence.from_log(0.5 * even, provenance="even-moment-roots")
    ev = series_test(c)
    ev.payload["rule"] = "carleman"
    return ev
