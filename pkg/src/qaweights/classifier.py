"""Classification of weights: symbolic rules, series and integral criteria.

Numeric divergence cannot be decided from finitely many terms, so every
numeric test returns one of three conclusions.  The tail of a series (or of
an integrand written in ``u = log t``) is fitted on two consecutive dyadic
blocks of ``u`` against two asymptotic models:

* power model: ``y = gamma * u + c``, i.e. terms ``~ x^{-1-gamma}``;
* log-power model: ``y = beta * log(log x) + c``, i.e. terms
  ``~ 1 / (x (log x)^beta)``,

where ``y = -log(x * term)``.  A model is trusted only when it fits both
blocks with ``R^2 >= 0.98`` and its exponent is stable between blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .moments import MomentSequence, has_structural_path, log_moments, moment_sequence
from .ostrowski import (
    PiecewiseWeight1D,
    RegularizedWeight,
    convex_regularization,
    support_radius,
)
from .weights import (
    AffineMap,
    AffinePullback,
    BasisSpec,
    ExpDecay,
    Gaussian,
    Indicator,
    PointwiseMin,
    Profile1D,
    Radial,
    RepLog,
    RhoForm,
    Sampled,
    Scale,
    Sum,
    Table,
    Tensor,
    WeightExpr,
)

__all__ = [
    "QA",
    "NOT_QA",
    "INCONCLUSIVE",
    "DIVERGES",
    "CONVERGES",
    "UNDETERMINED",
    "EvidenceRecord",
    "Verdict",
    "ContradictionError",
    "TailFit",
    "fit_tail",
    "decide_tail",
    "series_test",
    "log_integral_test",
    "symbolic_classify",
    "classify",
    "decay_class",
    "hall_test",
    "line_restriction_test",
    "default_R",
    "candidate_bases",
]

QA = "QuasiAnalytic"
NOT_QA = "NotQuasiAnalytic"
INCONCLUSIVE = "Inconclusive"
DIVERGES = "Diverges"
CONVERGES = "Converges"
UNDETERMINED = "Undetermined"

DELTA = 0.1
R2_MIN = 0.98
INTEGRAL_BLOWUP = 1e3
CAUCHY_TOL = 1e-6


class ContradictionError(RuntimeError):
    """Symbolic and definite numeric verdicts disagree."""


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class EvidenceRecord:
    """One piece of evidence: what was tested, what it showed, and the data."""

    kind: str
    conclusion: str
    payload: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """Small JSON-ready digest of the payload (scalars and short lists)."""
        out = {}
        for k, v in self.payload.items():
            if isinstance(v, np.ndarray):
                if v.size == 0:
                    continue
                out[k + "_last"] = v[-1]
                out[k + "_count"] = int(v.size)
            else:
                out[k] = v
        return _jsonable(out)

    def to_dict(self):
        return {"kind": self.kind, "conclusion": self.conclusion,
                "payload_summary": self.summary()}


@dataclass
class Verdict:
    cls: str
    basis: BasisSpec | None = None
    evidence: list = field(default_factory=list)
    holomorphic: bool | None = None

    def __post_init__(self):
        if self.cls == QA and self.basis is None:
            raise ValueError("a quasi-analytic verdict needs a witnessing basis")
        if self.cls == NOT_QA and not self.evidence:
            raise ValueError("a negative verdict needs evidence")

    @property
    def definite(self) -> bool:
        return self.cls != INCONCLUSIVE

    def to_dict(self):
        d = {"class": self.cls,
             "basis": None if self.basis is None else self.basis.tolist(),
             "evidence": [e.to_dict() for e in self.evidence]}
        if self.holomorphic is not None:
            d["holomorphic"] = self.holomorphic
        return d


# ---------------------------------------------------------------------------
# tail models
# ---------------------------------------------------------------------------


@dataclass
class TailFit:
    gamma: tuple = (math.nan, math.nan)
    beta: tuple = (math.nan, math.nan)
    r2_power: tuple = (math.nan, math.nan)
    r2_log: tuple = (math.nan, math.nan)
    blocks: tuple = ()
    beta_alt: tuple | None = None

    def as_dict(self):
        d = {"gamma": list(self.gamma), "beta": list(self.beta),
             "r2_power": list(self.r2_power), "r2_log": list(self.r2_log),
             "blocks": [list(b) for b in self.blocks]}
        if self.beta_alt is not None:
            d["beta_alt"] = list(self.beta_alt)
        return d


def _linfit(x, y, nuisance=None):
    """Least-squares slope of ``y`` on ``x`` (plus intercept and an optional nuisance column)."""
    if x.size < 4:
        return math.nan, math.nan
    cols = [x, np.ones_like(x)] + ([nuisance] if nuisance is not None else [])
    X = np.column_stack(cols)
    if np.ptp(x) == 0:
        return math.nan, math.nan
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    syy = np.sum((y - y.mean()) ** 2)
    # residuals below 1e-3 in log units count as an exact fit (covers flat tails)
    if math.sqrt(np.mean(resid**2)) <= 1e-3 or syy == 0:
        return float(coef[0]), 1.0
    return float(coef[0]), float(1.0 - np.sum(resid**2) / syy)


def fit_tail(u, y, log_reg, u_lo=None, transient: bool = False, alt_reg=None) -> TailFit:
    """Fit both models on ``u`` in ``[U/4, U/2]`` and ``[U/2, U]`` (``U = max u``).

    ``u`` is the log of the index, ``y`` the normalized tail quantity and
    ``log_reg`` the regressor of the log-power model (``log log x``).
    With ``transient=True`` both models carry an extra ``1/x`` column, which
    absorbs the ``log(C)/m`` drift a constant factor adds to series terms.
    ``alt_reg`` is a second log-scale regressor; its slopes are reported as
    ``beta_alt`` and must agree with ``beta`` on the side of 1.
    """
    u, y, log_reg = (np.asarray(a, dtype=float) for a in (u, y, log_reg))
    alt = None if alt_reg is None else np.asarray(alt_reg, dtype=float)
    ok = np.isfinite(u) & np.isfinite(y)
    u, y, log_reg = u[ok], y[ok], log_reg[ok]
    alt = None if alt is None else alt[ok]
    if u.size == 0:
        return TailFit()
    U = float(u.max())
    lo = U / 4.0 if u_lo is None else max(U / 4.0, u_lo)
    mid = max(U / 2.0, lo + (U - lo) / 3.0) if lo >= U / 2.0 else U / 2.0
    blocks = ((lo, mid), (mid, U))
    gam, bet, r2p, r2l, bal = [], [], [], [], []
    for a, b in blocks:
        sel = (u >= a) & (u <= b)
        g, rp = _linfit(u[sel], y[sel], np.exp(-u[sel]) if transient else None)
        lsel = sel & np.isfinite(log_reg)
        bt, rl = _linfit(log_reg[lsel], y[lsel], np.exp(-u[lsel]) if transient else None)
        gam.append(g)
        r2p.append(rp)
        bet.append(bt)
        r2l.append(rl)
        if alt is not None:
            asel = sel & np.isfinite(alt)
            bal.append(_linfit(alt[asel], y[asel], np.exp(-u[asel]) if transient else None)[0])
    return TailFit(tuple(gam), tuple(bet), tuple(r2p), tuple(r2l), blocks,
                   tuple(bal) if alt is not None else None)


def decide_tail(fit: TailFit, delta: float = DELTA) -> str:
    """Three-valued convergence decision from a :class:`TailFit`."""
    g1, g2 = fit.gamma
    b1, b2 = fit.beta
    p_ok = all(r >= R2_MIN for r in fit.r2_power) and np.isfinite([g1, g2]).all()
    l_ok = all(r >= R2_MIN for r in fit.r2_log) and np.isfinite([b1, b2]).all()
    if p_ok:
        stable = abs(g2 - g1) <= 0.15 * max(abs(g1), abs(g2)) + 0.005
        if g2 < -0.005 and g1 < -0.005:
            return DIVERGES
        if stable and g2 <= 0.005:
            return DIVERGES
        if stable and g2 >= delta:
            return CONVERGES
        if g1 >= delta and g2 >= g1:
            return CONVERGES
    a1, a2 = fit.beta_alt if fit.beta_alt is not None else (b1, b2)
    if l_ok and min(abs(b2 - b1), abs(a2 - a1)) <= delta:
        # both log scales must land on the same side of the critical exponent 1
        if b2 <= 1.0 and a2 <= 1.0:
            return DIVERGES
        if b2 >= 1.0 + delta and a2 >= 1.0 + delta / 2:
            return CONVERGES
    return UNDETERMINED


# ---------------------------------------------------------------------------
# series criterion
# ---------------------------------------------------------------------------


def series_test(M: MomentSequence, m_max: int | None = None) -> EvidenceRecord:
    """Divergence of ``sum_m M(m)^{-1/m}``.

    A zero moment gives an infinite term (divergence); an infinite moment
    makes every later moment infinite, so the series is a finite sum.
    """
    K = M.m_max if m_max is None else min(int(m_max), M.m_max)
    if K < 20:
        raise ValueError("series_test needs moments up to at least m = 20")
    m = np.arange(1, K + 1, dtype=float)
    lv = M.log_values[1: K + 1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_terms = -lv / m
        terms = np.exp(log_terms)
    if np.any(lv == -np.inf):
        first = int(np.flatnonzero(lv == -np.inf)[0]) + 1
        return EvidenceRecord("SeriesPartialSums", DIVERGES,
                              {"rule": "zero-moment", "first_zero_m": first,
                               "partial_sums": np.cumsum(np.nan_to_num(terms[: first - 1]))
                               if first > 1 else np.array([0.0])})
    ps = np.cumsum(terms)
    cert = M.meta.get("divergence_certificate")
    if cert:
        return EvidenceRecord("SeriesPartialSums", DIVERGES,
                              {"rule": "block-certificate", "certificate": cert,
                               "partial_sums": ps})
    if np.any(lv == np.inf):
        first = int(np.flatnonzero(lv == np.inf)[0]) + 1
        return EvidenceRecord("SeriesPartialSums", CONVERGES,
                              {"rule": "infinite-moment", "first_infinite_m": first,
                               "partial_sums": ps})
    logT = lv / m
    y = logT - np.log(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        reg = np.where(1.0 + logT > 0, np.log(1.0 + logT), np.nan)
        alt = np.where(m >= 3, np.log(np.log(m)), np.nan)
    fit = fit_tail(np.log(m), y, reg, transient=True, alt_reg=alt)
    conclusion = decide_tail(fit)
    return EvidenceRecord("SeriesPartialSums", conclusion,
                          {"partial_sums": ps, "terms": int(K), **fit.as_dict()})


# ---------------------------------------------------------------------------
# logarithmic integrals
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def _integral_engine(neg_log, s_lo: float, s_hi: float, R: float, kind: str,
                     cells: int = 4096) -> EvidenceRecord:
    """Decide ``int_R^inf -neg_log(t) / (1 + t^2) dt`` from samples on ``[R, e^s_hi]``.

    ``neg_log(t)`` returns ``-log w(t)`` (``+inf`` where ``w = 0``).  The
    integral is taken in ``s = log t`` by 5-point Gauss-Legendre on each cell.
    """
    sR = math.log(R)
    if sR >= s_hi:
        raise ValueError("R exceeds the sampled range")
    edges = np.linspace(sR, s_hi, cells + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    s = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    t = np.exp(s)
    nl = np.asarray(neg_log(t), dtype=float)
    if np.any(np.isnan(nl)):
        raise ValueError("weight evaluation produced NaN")
    zero = np.isposinf(nl)
    payload = {"R": R, "t_max": math.exp(s_hi)}
    if zero.any():
        payload["zero_from_t"] = float(t[zero][0])
        payload["rule"] = "log-zero"
        return EvidenceRecord(kind, DIVERGES, payload)
    dens = nl * t / (1.0 + t * t)  # integrand of -I in s
    cell_int = (dens.reshape(cells, 5) * _GL_W[None, :]).sum(axis=1) * half
    cum = np.concatenate([[0.0], np.cumsum(cell_int)])
    # doubling checkpoints T = R 2^k
    k_max = int(math.floor((s_hi - sR) / math.log(2.0)))
    T = R * 2.0 ** np.arange(1, k_max + 1)
    pos = np.clip(np.searchsorted(edges, np.log(T)), 0, cells)
    I = -cum[pos]
    payload["I_T"] = I
    payload["T"] = T
    if I.size and np.max(np.abs(I)) > INTEGRAL_BLOWUP:
        payload["rule"] = "blow-up"
        return EvidenceRecord(kind, DIVERGES, payload)
    if I.size >= 4 and np.max(np.abs(I[-4:] - I[-1])) <= CAUCHY_TOL:
        payload["rule"] = "cauchy"
        return EvidenceRecord(kind, CONVERGES, payload)
    # tail fit on the integrand in u = log t, sampled at cell midpoints
    g = (dens.reshape(cells, 5) * _GL_W[None, :]).sum(axis=1) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        y = -np.log(g)
        reg = np.where(mid > 0, np.log(mid), np.nan)
    y = np.where(g > 0, y, np.nan)
    fit = fit_tail(mid, y, reg, u_lo=sR)
    payload.update(fit.as_dict())
    payload["rule"] = "tail-fit"
    return EvidenceRecord(kind, decide_tail(fit), payload)


def log_integral_test(wbar: RegularizedWeight, R: float) -> EvidenceRecord:
    """Divergence of ``int_R^inf log wbar(t) / (1 + t^2) dt`` to ``-inf``."""
    s = wbar.s
    if R <= 0:
        raise ValueError("R must be positive")
    if math.log(R) >= s[-1]:
        raise ValueError("R exceeds the sampled range")
    return _integral_engine(lambda t: -wbar.log_at(t), float(s[0]), float(s[-1]), R,
                            "LogIntegralTail")


def _combine_two_sided(a: EvidenceRecord, b: EvidenceRecord, kind: str) -> EvidenceRecord:
    if DIVERGES in (a.conclusion, b.conclusion):
        c = DIVERGES
    elif a.conclusion == b.conclusion == CONVERGES:
        c = CONVERGES
    else:
        c = UNDETERMINED
    return EvidenceRecord(kind, c, {"positive_side": a.summary(), "negative_side": b.summary()})


def hall_test(w: WeightExpr, T_max: float = 1e6, R: float = 1.0) -> EvidenceRecord:
    """``int log w(t) / (1 + t^2) dt`` over the whole line, on the raw weight.

    Convergence means polynomials are not dense in the weighted space.
    """
    w = _line(w)
    s_hi = math.log(T_max)
    # the bounded middle part contributes a finite amount unless w vanishes there
    mid_t = np.linspace(-R, R, 2001)
    if np.any(np.isneginf(w.log_eval_line(mid_t))):
        return EvidenceRecord("HallIntegral", DIVERGES, {"rule": "log-zero", "R": R})
    pos = _integral_engine(lambda t: -w.log_eval_line(t), 0.0, s_hi, R, "HallIntegral")
    neg = _integral_engine(lambda t: -w.log_eval_line(-t), 0.0, s_hi, R, "HallIntegral")
    return _combine_two_sided(pos, neg, "HallIntegral")


def line_restriction_test(w: WeightExpr, x, y, R: float = 1.0, T_max: float = 1e6) -> EvidenceRecord:
    """One-sided logarithmic integrals of ``t -> w(x + t y)`` on ``[R, inf)`` and ``(-inf, -R]``.

    A convergent side certifies that ``w`` is not quasi-analytic.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.any(y):
        raise ValueError("direction must be nonzero")
    if x.size != w.dimension or y.size != w.dimension:
        raise ValueError("point and direction must match the weight dimension")

    def side(sign):
        return lambda t: -w.log_eval(x[None, :] + sign * np.asarray(t)[:, None] * y[None, :])

    s_hi = math.log(T_max)
    pos = _integral_engine(side(1.0), 0.0, s_hi, R, "LineRestriction")
    neg = _integral_engine(side(-1.0), 0.0, s_hi, R, "LineRestriction")
    if CONVERGES in (pos.conclusion, neg.conclusion):
        c = CONVERGES
    elif pos.conclusion == neg.conclusion == DIVERGES:
        c = DIVERGES
    else:
        c = UNDETERMINED
    return EvidenceRecord("LineRestriction", c,
                          {"x": x.tolist(), "y": y.tolist(),
                           "positive_side": pos.summary(), "negative_side": neg.summary()})


def _line(w):
    if isinstance(w, Profile1D):
        return Radial(w, 1)
    if w.dimension != 1:
        raise ValueError("this test needs a weight on R^1")
    return w


# ---------------------------------------------------------------------------
# symbolic rules
# ---------------------------------------------------------------------------


@dataclass
class _Sym:
    qa: bool
    holomorphic: bool
    rule: str


def _replog_rule(p: RepLog) -> _Sym:
    if p.C == 0:
        return _Sym(True, True, "zero-weight")
    ps = list(p.p)
    # first index whose exponent differs from 1 (exponents vanish past the order)
    j0 = next((j for j, x in enumerate(ps) if x != 1.0), len(ps))
    pj0 = ps[j0] if j0 < len(ps) else 0.0
    lead = [1.0 - ps[0]] + [-x for x in ps[1:]]
    first = next((x for x in lead if x != 0.0), 0.0)
    hol = first >= 0.0
    if pj0 < 1.0:
        return _Sym(True, hol, f"replog-first-exponent-below-one(j0={j0})")
    return _Sym(False, False, f"replog-first-exponent-above-one(j0={j0})")


def _profile_rule(p: Profile1D) -> _Sym | None:
    if isinstance(p, (ExpDecay, Gaussian)):
        return _Sym(True, True, f"{p.family}-holomorphic")
    if isinstance(p, Indicator):
        return _Sym(True, True, "bounded-support")
    if isinstance(p, RepLog):
        return _replog_rule(p)
    if isinstance(p, RhoForm):
        if p.w_R == 0:
            return _Sym(True, True, "zero-weight")
        if p.tail_slope > 0:
            return _Sym(True, True, "rhoform-linear-rho-holomorphic")
        return _Sym(False, False, "rhoform-bounded-rho-polynomial-tail")
    if isinstance(p, Sampled):
        if math.isfinite(p.support_radius()):
            return _Sym(True, True, "bounded-support")
        return _Sym(False, False, "sampled-constant-tail")
    if isinstance(p, PiecewiseWeight1D):
        if math.isfinite(p.support):
            return _Sym(True, True, "bounded-support")
        if p.head_value == 0:
            return _Sym(True, True, "zero-weight")
        return _Sym(False, False, "piecewise-polynomial-tail")
    cert = getattr(p, "qa_certificate", None)
    if cert:
        return _Sym(True, False, cert)
    return None


def _sym_node(w: WeightExpr):
    """``(qa, holomorphic, basis rows or None, rules)`` or ``None``."""
    n = w.dimension
    if isinstance(w, Radial):
        r = _profile_rule(w.profile)
        if r is None:
            return None
        return r.qa, r.holomorphic, np.eye(n), [r.rule]
    if isinstance(w, Table):
        r = _profile_rule(w.profile)
        return r.qa, r.holomorphic, np.eye(1), [r.rule]
    if isinstance(w, Tensor):
        rules = [_profile_rule(p) for p in w.factors]
        if any(p.sup_bound() == 0 for p in w.factors):
            return True, True, np.eye(n), ["zero-weight"]
        if any(r is not None and not r.qa for r in rules):
            bad = next(r for r in rules if r is not None and not r.qa)
            return False, False, None, ["tensor-factor-not-quasi-analytic", bad.rule]
        if any(r is None for r in rules):
            return None
        return True, all(r.holomorphic for r in rules), np.eye(n), \
            ["tensor-of-quasi-analytic-factors"] + [r.rule for r in rules]
    if isinstance(w, Scale):
        if w.c == 0:
            return True, True, np.eye(n), ["zero-weight"]
        return _sym_node(w.inner)
    if isinstance(w, AffinePullback):
        inner = _sym_node(w.inner)
        if inner is None:
            return None
        qa, hol, basis, rules = inner
        if basis is not None:
            basis = w.map.dual_transport(basis)
        return qa, hol, basis, rules + ["affine-transport"]
    if isinstance(w, PointwiseMin):
        for side in (w.lhs, w.rhs):
            r = _sym_node(side)
            if r is not None and r[0]:
                return True, r[1], r[2], r[3] + ["minimum-below-quasi-analytic"]
        return None
    return None


def symbolic_classify(w: WeightExpr) -> Verdict | None:
    """Verdict from the expression structure alone, or ``None`` (e.g. for sums)."""
    r = _sym_node(w)
    if r is None:
        return None
    qa, hol, basis, rules = r
    ev = EvidenceRecord("SymbolicRule", DIVERGES if qa else CONVERGES, {"rules": rules})
    if qa:
        return Verdict(QA, BasisSpec(basis), [ev], holomorphic=hol)
    return Verdict(NOT_QA, None, [ev], holomorphic=False)


# ---------------------------------------------------------------------------
# numeric classification
# ---------------------------------------------------------------------------


def _walk(w):
    yield w
    for attr in ("inner", "lhs", "rhs"):
        sub = getattr(w, attr, None)
        if isinstance(sub, WeightExpr):
            yield from _walk(sub)


def _profiles(w):
    for node in _walk(w):
        if isinstance(node, Radial):
            yield node.profile
        elif isinstance(node, Tensor):
            yield from node.factors


def default_R(w: WeightExpr) -> float:
    """``max(1, 2 * largest repeated-logarithm validity threshold)``."""
    ths = [p.threshold for p in _profiles(w) if isinstance(p, RepLog)]
    return max([1.0] + [2.0 * t for t in ths])


def candidate_bases(w: WeightExpr) -> list[BasisSpec]:
    """Standard basis plus bases exposed by pullbacks of structured weights."""
    out = [BasisSpec.standard(w.dimension)]

    def rec(node, maps):
        if isinstance(node, AffinePullback):
            rec(node.inner, maps + [node.map])
            return
        if maps:
            A = maps[0]
            for B in maps[1:]:
                A = A @ B
            out.append(BasisSpec(A.dual_transport(np.eye(node.dimension))))
        for attr in ("inner", "lhs", "rhs"):
            sub = getattr(node, attr, None)
            if isinstance(sub, WeightExpr):
                rec(sub, [])

    rec(w, [])
    uniq = []
    for b in out:
        if not any(np.allclose(b.vectors, u.vectors) for u in uniq):
            uniq.append(b)
    return uniq


GENERIC_M_MAX = 128


def _default_m_max(w):
    fast = all(isinstance(n, (Radial, Tensor, Table, Scale)) or
               (isinstance(n, AffinePullback) and not np.any(n.map.translation))
               for n in _walk(w))
    return 4096 if (fast or w.dimension == 1) else GENERIC_M_MAX


def _numeric_1d(w, m_max, R):
    evidence = []
    M = moment_sequence(w, [1.0], m_max)
    ser = series_test(M)
    evidence.append(ser)
    wbar = convex_regularization(w)
    ints = [log_integral_test(wbar, R), log_integral_test(wbar, 4.0 * R)]
    evidence.extend(ints)
    ic = {e.conclusion for e in ints}
    integral = ints[0].conclusion if len(ic) == 1 else UNDETERMINED
    concl = {ser.conclusion, integral} - {UNDETERMINED}
    if concl == {DIVERGES}:
        return QA, BasisSpec.standard(1), evidence
    if concl == {CONVERGES}:
        return NOT_QA, None, evidence
    return INCONCLUSIVE, None, evidence


def _numeric_nd(w, candidates, m_max):
    evidence = []
    n = w.dimension
    for basis in candidates:
        results = []
        for v in basis.vectors:
            # grid-search moments are costly; their order is capped like a generic weight's
            M = moment_sequence(w, v, m_max if has_structural_path(w, v) else min(m_max, GENERIC_M_MAX))
            e = series_test(M)
            e.payload["vector"] = v.tolist()
            evidence.append(e)
            results.append(e.conclusion)
            if e.payload.get("rule") == "infinite-moment":
                # not rapidly decreasing, hence not quasi-analytic for any basis
                return NOT_QA, None, evidence
            if e.conclusion != DIVERGES:
                break
        if all(r == DIVERGES for r in results) and len(results) == n:
            return QA, basis, evidence
    # negative criterion: one-sided integrals along the coordinate axes
    for j in range(n):
        y = np.zeros(n)
        y[j] = 1.0
        e = line_restriction_test(w, np.zeros(n), y)
        evidence.append(e)
        if e.conclusion == CONVERGES:
            return NOT_QA, None, evidence
    return INCONCLUSIVE, None, evidence


def classify(w: WeightExpr, candidates: Sequence[BasisSpec] | None = None, *,
             numeric: str = "auto", m_max: int | None = None) -> Verdict:
    """Combine symbolic rules with the numeric criteria.

    ``numeric="auto"`` runs the numeric tests only when no symbolic rule
    applies; ``"always"`` runs them regardless (and cross-checks);
    ``"never"`` returns the symbolic verdict or ``Inconclusive``.
    """
    if numeric not in ("auto", "always", "never"):
        raise ValueError("numeric must be 'auto', 'always' or 'never'")
    sym = symbolic_classify(w)
    evidence = list(sym.evidence) if sym else []
    run = numeric == "always" or (numeric == "auto" and sym is None)
    num_cls, num_basis = INCONCLUSIVE, None
    if run:
        m = m_max or _default_m_max(w)
        if w.dimension == 1:
            num_cls, num_basis, ev = _numeric_1d(w, m, default_R(w))
        else:
            cands = list(candidates) if candidates else candidate_bases(w)
            if sym is not None and sym.basis is not None:
                cands = [sym.basis] + [b for b in cands if not np.allclose(b.vectors, sym.basis.vectors)]
            num_cls, num_basis, ev = _numeric_nd(w, cands, m)
        evidence.extend(ev)
    if sym is not None and num_cls != INCONCLUSIVE and num_cls != sym.cls:
        raise ContradictionError(
            f"symbolic verdict {sym.cls} contradicts numeric verdict {num_cls}")
    if sym is not None:
        return Verdict(sym.cls, sym.basis, evidence, sym.holomorphic)
    if num_cls == QA:
        return Verdict(QA, num_basis, evidence)
    if num_cls == NOT_QA:
        return Verdict(NOT_QA, None, evidence)
    return Verdict(INCONCLUSIVE, None, evidence)


# ---------------------------------------------------------------------------
# decay classes
# ---------------------------------------------------------------------------

WORKING_ORDER = 64


def _directions(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    dirs = [np.eye(n), -np.eye(n)]
    # deterministic quasi-random directions (golden-ratio sequence on the sphere)
    k = np.arange(1, 33)
    pts = np.column_stack([np.cos(2 * np.pi * ((k * 0.6180339887) % 1.0 + j / n)) for j in range(n)])
    pts += 0.1 * np.sin(np.outer(k, np.arange(1, n + 1)))
    dirs.append(pts / np.linalg.norm(pts, axis=1, keepdims=True))
    return np.vstack(dirs)


def decay_class(w: WeightExpr, d: float, shells: int = 200) -> Verdict:
    """Test ``||x||^d w(x) -> 0`` by sampling doubling shells ``||x|| = 2^k``.

    ``d = inf`` tests membership in every class up to the working order.
    """
    order = WORKING_ORDER if math.isinf(d) else float(d)
    label = "RapidlyDecreasing" if math.isinf(d) else f"DecayOrder({d:g})"
    dirs = _directions(w.dimension)
    k = np.arange(shells + 1)
    r = 2.0 ** k
    X = (r[:, None, None] * dirs[None, :, :]).reshape(-1, w.dimension)
    lw = w.log_eval(X).reshape(r.size, -1).max(axis=1)
    f = order * np.log(r) + lw
    half = f[shells // 2:]
    quarter = f[3 * shells // 4:]
    payload = {"order": order, "shell_log_max": f}
    if np.all(np.isneginf(half)):
        ev = EvidenceRecord("ShellSampling", CONVERGES, {**payload, "rule": "vanishing-tail"})
        return Verdict(label, None, [ev])
    start = half[0]
    drop = start - np.max(quarter)
    if np.isneginf(quarter).all() or (drop >= 10.0 and f[-1] <= start - 10.0):
        ev = EvidenceRecord("ShellSampling", CONVERGES, {**payload, "drop": drop})
        return Verdict(label, None, [ev])
    if np.max(quarter) >= start - 1e-6:
        ev = EvidenceRecord("ShellSampling", DIVERGES, {**payload, "drop": drop})
        return Verdict("Not" + label, None, [ev])
    ev = EvidenceRecord("ShellSampling", UNDETERMINED, {**payload, "drop": drop})
    return Verdict(INCONCLUSIVE, None, [ev])
