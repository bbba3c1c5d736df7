"""Weights from log-convex sequences and the regularizations built on them.

``weight_from_sequence`` realizes ``t -> inf_m a(m) / |t|^m`` exactly: in
``s = log |t|`` the function ``-log w(e^s)`` is the upper envelope of the
lines ``m s - log a(m)``, so only lower-hull vertices of ``(m, log a(m))``
matter and the transitions sit at ``exp`` of the hull's edge slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .moments import _GOLDEN, MomentSequence, _lower_hull, log_moments
from .weights import (
    AffinePullback,
    Gaussian,
    Indicator,
    PointwiseMin,
    Profile1D,
    Radial,
    RhoForm,
    Sampled,
    Scale,
    Sum,
    Table,
    Tensor,
    WeightExpr,
    DimensionError,
)

__all__ = [
    "PiecewiseWeight1D",
    "NotRapidlyDecreasingError",
    "weight_from_sequence",
    "even_majorant",
    "support_radius",
    "support_interval",
    "RegularizedWeight",
    "convex_regularization",
    "default_s_grid",
    "smooth_majorant_rho",
]


class NotRapidlyDecreasingError(ValueError):
    """A moment needed by the construction is infinite."""


@dataclass(frozen=True, eq=False)
class PiecewiseWeight1D(Profile1D):
    """Even weight ``a(k_i) / |t|^{k_i}`` on ``[tau_{i-1}, tau_i]``.

    ``exponents`` are the hull vertices ``k_0 = 0 < k_1 < ...`` with
    ``log_coeffs = log a(k_i)``; ``transitions`` are ``tau_i`` (length one
    less).  Beyond the last transition the last segment continues up to the
    support radius; the weight vanishes for ``|t| > support``.
    """

    exponents: tuple
    log_coeffs: tuple
    support: float = math.inf
    family: ClassVar[str] = "piecewise"

    def __post_init__(self):
        k = np.asarray(self.exponents, dtype=float)
        la = np.asarray(self.log_coeffs, dtype=float)
        if k.size == 0 or k.shape != la.shape or k[0] != 0:
            raise ValueError("piecewise weight needs exponents starting at 0")
        if np.any(np.diff(k) <= 0):
            raise ValueError("exponents must increase")
        if la[0] == np.inf:
            raise ValueError("a(0) = inf gives an unbounded weight")
        slopes = np.diff(la) / np.diff(k) if k.size > 1 else np.empty(0)
        if np.any(np.diff(slopes) < -1e-12 * np.maximum(1.0, np.abs(slopes[1:]))):
            raise ValueError("coefficients are not log-convex")
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_la", la)
        object.__setattr__(self, "_log_tau", slopes)
        object.__setattr__(self, "support", float(self.support))

    @property
    def transition_points(self) -> np.ndarray:
        return np.exp(self._log_tau)

    @property
    def segment_exponents(self) -> np.ndarray:
        return self._k.astype(int)

    @property
    def head_value(self) -> float:
        return math.exp(self._la[0])

    def log_value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        i = np.searchsorted(self._log_tau, lt, side="left")
        k, la = self._k[i], self._la[i]
        with np.errstate(invalid="ignore"):
            out = np.where(k == 0, la, la - k * lt)
        out = np.where(t > self.support, -np.inf, out)
        return out

    def sup_bound(self):
        return self.head_value

    def support_radius(self):
        return self.support

    def breakpoints(self):
        bp = self.transition_points
        if math.isfinite(self.support):
            bp = np.append(bp[bp <= self.support], self.support)
        return bp[bp > 0]

    def boundary_value(self) -> float:
        """Value at the support radius (the limit of ``a(m)/Delta^m``)."""
        if not math.isfinite(self.support):
            return 0.0
        return float(np.exp(self.log_value(np.array([self.support]))[0]))

    def to_dict(self):
        return {"family": "piecewise", "exponents": list(map(int, self._k)),
                "logCoeffs": list(self._la), "support": self.support}

    def to_sampled(self, grid) -> Sampled:
        grid = np.asarray(grid, dtype=float)
        return Sampled(tuple(grid), tuple(self(grid)), even=True)


def _piecewise_from_logs(la_all: np.ndarray, tail: str, support: float | None = None):
    """Build the piecewise weight from ``log a(0..K)`` (entries may be +-inf)."""
    la_all = np.asarray(la_all, dtype=float)
    if la_all[0] == -np.inf:
        return PiecewiseWeight1D((0,), (-np.inf,), 0.0)
    if np.any(la_all[1:] == -np.inf):
        return PiecewiseWeight1D((0,), (la_all[0],), 0.0)
    fin = np.flatnonzero(np.isfinite(la_all))
    if fin.size == 0 or fin[0] != 0:
        raise ValueError("a(0) must be finite")
    last = fin[-1]
    if last < la_all.size - 1:
        # infinite moments from here on: the inf over m stops at the last finite one
        tail = "truncate"
    k = fin[fin <= last].astype(float)
    la = la_all[fin[fin <= last]]
    h = _lower_hull(k, la)
    k, la = k[h], la[h]
    if support is None:
        if tail == "truncate" or k.size == 1:
            support = math.inf
        elif tail == "extend":
            support = math.exp((la[-1] - la[-2]) / (k[-1] - k[-2]))
        else:
            raise ValueError(f"unknown tail mode {tail!r}")
    return PiecewiseWeight1D(tuple(k), tuple(la), support)


def weight_from_sequence(a: MomentSequence | np.ndarray, tail: str = "extend") -> PiecewiseWeight1D:
    """``t -> inf_m a(m) / |t|^m`` for a log-convex sequence.

    A finite sequence ``a(0..K)`` is continued past ``K`` according to
    ``tail``: ``"extend"`` continues log-linearly with the last ratio (the
    weight then vanishes beyond that ratio, so ``[1, 1, 1]`` gives the
    indicator of ``[-1, 1]``); ``"truncate"`` takes the infimum over
    ``m <= K`` only, leaving a polynomial tail ``a(K) / |t|^K``.
    """
    seq = a if isinstance(a, MomentSequence) else MomentSequence.from_values(a)
    if not seq.log_convex:
        raise ValueError("sequence is not log-convex; apply log_convex_envelope first")
    return _piecewise_from_logs(seq.log_values, tail)


# ---------------------------------------------------------------------------
# support radius
# ---------------------------------------------------------------------------


def support_interval(w) -> tuple[float, float]:
    """Closed interval containing ``{t : w(t) != 0}`` for a weight on R^1.

    Exact for profiles, tables, scalings and pullbacks; an enclosure for
    minima (intersection) and sums (hull of the union).
    """
    if isinstance(w, Profile1D):
        if isinstance(w, Sampled) and not w.even:
            return _sampled_interval(w)
        r = w.support_radius()
        return (-r, r)
    if getattr(w, "dimension", 1) != 1:
        raise DimensionError("support interval needs a weight on R^1")
    if isinstance(w, Radial):
        return support_interval(w.profile)
    if isinstance(w, Table):
        return _sampled_interval(w.profile)
    if isinstance(w, Scale):
        return (0.0, 0.0) if w.c == 0 else support_interval(w.inner)
    if isinstance(w, AffinePullback):
        lo, hi = support_interval(w.inner)
        a, b = float(w.map.linear[0, 0]), float(w.map.translation[0])
        ends = sorted([a * lo + b, a * hi + b]) if math.isfinite(lo) and math.isfinite(hi) else None
        if ends is None:
            return (-math.inf, math.inf)
        return ends[0], ends[1]
    if isinstance(w, PointwiseMin):
        l1, h1 = support_interval(w.lhs)
        l2, h2 = support_interval(w.rhs)
        return max(l1, l2), min(h1, h2)
    if isinstance(w, Sum):
        l1, h1 = support_interval(w.lhs)
        l2, h2 = support_interval(w.rhs)
        return min(l1, l2), max(h1, h2)
    if isinstance(w, Tensor):
        return support_interval(w.factors[0])
    return (-math.inf, math.inf)


def _sampled_interval(p: Sampled):
    g, v = np.asarray(p.grid), np.asarray(p.values)
    nz = np.flatnonzero(v > 0)
    if nz.size == 0:
        return (0.0, 0.0)
    if p.even:
        r = p.support_radius()
        return (-r, r)
    lo_i, hi_i = nz[0], nz[-1]
    lo = -math.inf if p.extrapolation == "last" and lo_i == 0 else g[max(lo_i - 1, 0)]
    hi = math.inf if p.extrapolation == "last" and hi_i == g.size - 1 else g[min(hi_i + 1, g.size - 1)]
    return float(lo), float(hi)


def support_radius(w) -> float:
    """``Delta_w = sup{|t| : w(t) != 0}`` (``inf`` for strictly positive families)."""
    if isinstance(w, PiecewiseWeight1D):
        return w.support
    lo, hi = support_interval(w)
    if lo > hi:
        return 0.0
    return float(max(abs(lo), abs(hi)))


# ---------------------------------------------------------------------------
# even majorant
# ---------------------------------------------------------------------------


def _as_line_weight(w) -> WeightExpr:
    if isinstance(w, Profile1D):
        return Radial(w, 1)
    if w.dimension != 1:
        raise DimensionError("construction needs a weight on R^1")
    return w


def even_majorant(w, M_max: int = 60) -> PiecewiseWeight1D:
    """``t -> inf_{m <= M_max} M_w(e, m) / |t|^m``, cut at ``Delta_w`` when finite."""
    w = _as_line_weight(w)
    lv, unb, _ = log_moments(w, [1.0], np.arange(M_max + 1))
    if np.any(np.isinf(lv) & (lv > 0)) or np.any(unb):
        bad = int(np.flatnonzero((lv == np.inf) | unb)[0])
        raise NotRapidlyDecreasingError(f"M_w(e, {bad}) is infinite")
    delta = support_radius(w)
    if math.isfinite(delta):
        if delta == 0.0 or lv[0] == -np.inf:
            return _piecewise_from_logs(np.concatenate([[lv[0]], np.full(M_max, -np.inf)]), "truncate")
        pw = _piecewise_from_logs(lv, "truncate", support=delta)
        return pw
    return _piecewise_from_logs(lv, "truncate")


# ---------------------------------------------------------------------------
# convex regularization
# ---------------------------------------------------------------------------


def default_s_grid(n: int = 4096, t_min: float = 1e-3, t_max: float = 1e6) -> np.ndarray:
    return np.linspace(math.log(t_min), math.log(t_max), n)


@dataclass(frozen=True, eq=False)
class RegularizedWeight:
    """The regularization on ``t = exp(s)``; ``h = -log wbar`` is convex.

    ``h`` is the upper envelope of supporting lines, stored by its knots
    ``(ks, kh)``; ``s``/``h`` are its values on the sampling grid.
    """

    s: np.ndarray
    h: np.ndarray
    ks: np.ndarray | None = None
    kh: np.ndarray | None = None

    @property
    def t(self):
        return np.exp(self.s)

    @property
    def values(self):
        with np.errstate(under="ignore"):
            return np.exp(-self.h)

    @property
    def log_values(self):
        return -self.h

    def _last_finite(self):
        fin = np.isfinite(self.h)
        return int(np.flatnonzero(fin)[-1]) if fin.any() else -1

    def _knots(self):
        last = self._last_finite()
        if self.ks is None:
            return self.s[: last + 1], self.h[: last + 1]
        return self.ks, self.kh

    def log_at(self, t):
        """``log wbar(t)``: exact between knots, constant below the grid, ``-inf`` beyond it.

        Works on ``h`` directly so tails far below the float range stay finite.
        """
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            st = np.log(np.maximum(t, self.t[0]))
        last = self._last_finite()
        if last < 0:
            return np.full(st.shape, -np.inf)
        ks, kh = self._knots()
        out = -np.interp(st, ks, kh)
        # past the last finite node the value is held up to the next node, where it drops to zero
        stop = self.s[last + 1] if last + 1 < self.s.size else self.s[-1]
        dead = (st >= stop) if last + 1 < self.s.size else (st > stop)
        return np.where(dead, -np.inf, out)

    def profile(self) -> Sampled:
        ks, _ = self._knots()
        s = np.union1d(self.s, ks)
        lv = self.log_at(np.exp(s))
        with np.errstate(under="ignore"):
            return Sampled(tuple(np.exp(s)), tuple(np.exp(lv)), extrapolation="zero",
                           even=True, interp="loglog")

    def weight(self) -> Radial:
        return Radial(self.profile(), 1)

    def vanishes_beyond(self) -> float:
        """Smallest sampled ``t`` beyond which ``wbar`` is identically zero (``inf`` if none)."""
        inf = np.isinf(self.h)
        if not inf.any() or not inf[-1]:
            return math.inf
        first = int(np.flatnonzero(~inf)[-1]) + 1 if (~inf).any() else 0
        return float(self.t[first])



def _refine_intercepts(phi, lam, lo, hi, samples: int = 33, iters: int = 60):
    """``min over s in [lo, hi] of phi(s) - lam * s``, one bracket per line, vectorized.

    A uniform scan picks the best sample; golden section then shrinks the
    bracket around it.  Every value returned is attained, so it is never
    below the true minimum by more than rounding.
    """
    x = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, samples)[None, :]
    f = phi(x) - lam[:, None] * x
    best = np.min(f, axis=1)
    q = np.argmin(f, axis=1)
    rows = np.arange(lam.size)
    a = x[rows, np.maximum(q - 1, 0)]
    b = x[rows, np.minimum(q + 1, samples - 1)]
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = phi(c) - lam * c
        fd = phi(d) - lam * d
        best = np.fmin(best, np.fmin(fc, fd))
        left = fc <= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
    return best


def _upper_envelope(lam, c):
    """Lines ``c + lam s`` sorted by slope -> indices on the upper envelope and their knots."""
    keep: list[int] = []
    for i in range(lam.size):
        if keep and lam[i] == lam[keep[-1]]:
            if c[i] <= c[keep[-1]]:
                continue
            keep.pop()
        while len(keep) >= 2:
            j, k = keep[-2], keep[-1]
            # k is useless if line i overtakes j no later than k does
            if (c[j] - c[i]) * (lam[k] - lam[j]) <= (c[j] - c[k]) * (lam[i] - lam[j]):
                keep.pop()
            else:
                break
        keep.append(i)
    idx = np.asarray(keep, dtype=int)
    knots = (c[idx[:-1]] - c[idx[1:]]) / (lam[idx[1:]] - lam[idx[:-1]])
    return idx, knots


def convex_regularization(w, grid=None) -> RegularizedWeight:
    """Smallest even majorant of ``w`` that is convex in log-log coordinates.

    ``h(s) = -log max(w(e^s), w(-e^s))`` is replaced by its greatest convex
    nondecreasing minorant (``h`` is continued constantly to the left of the
    grid).  Such a minorant lies below the suffix minimum of ``h``, so the
    lower hull of that suffix minimum gives its supporting lines.  Each line
    is then lowered to touch ``h`` between grid nodes as well, which makes
    the result a majorant off the grid too.  Where ``w`` vanishes on a whole
    right end of the grid the regularization vanishes as well.
    """
    if grid is None:
        s = w.s if isinstance(w, RegularizedWeight) else default_s_grid()
    else:
        s = np.asarray(grid, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("s-grid must be increasing with at least two points")
    t = np.exp(s)
    if isinstance(w, RegularizedWeight):
        src = w

        def phi(x):
            return -src.log_at(np.exp(x))
        # stays in log space, so tails below the float range survive
        h = w.h.copy() if np.array_equal(s, w.s) else phi(s)
        extra = w._knots() if w._last_finite() >= 0 else None
    else:
        line = _as_line_weight(w)

        def phi(x):
            e = np.exp(x)
            return -np.maximum(line.log_eval_line(e.ravel()), line.log_eval_line(-e.ravel())).reshape(e.shape)
        h = phi(s)
        extra = None
    out = np.full(s.shape, np.inf)
    fin = np.flatnonzero(np.isfinite(h))
    if not fin.size:
        return RegularizedWeight(s, out)
    last = fin[-1]
    if last == 0:
        out[0] = h[0]
        return RegularizedWeight(s, out)
    seg = h[: last + 1]
    H = np.minimum.accumulate(seg[::-1])[::-1]
    # where the suffix minimum is attained
    pos = np.empty(last + 1, dtype=int)
    best, arg = np.inf, last
    for i in range(last, -1, -1):
        if seg[i] < best:
            best, arg = seg[i], i
        pos[i] = arg
    sv = s[: last + 1]
    hull = _lower_hull(sv, H)
    if hull.size == 1:
        out[: last + 1] = H[0]
        return RegularizedWeight(s, out)
    a, b = hull[:-1], hull[1:]
    lam = np.maximum((H[b] - H[a]) / (sv[b] - sv[a]), 0.0)
    c = H[a] - lam * sv[a]
    lo_lim, hi_lim = s[0], s[min(last + 1, s.size - 1)]
    for anchor in (pos[a], pos[b]):
        lo = s[np.maximum(anchor - 1, 0)]
        hi = s[np.minimum(anchor + 1, s.size - 1)]
        lo, hi = np.clip(lo, lo_lim, hi_lim), np.clip(hi, lo_lim, hi_lim)
        with np.errstate(invalid="ignore"):
            refined = _refine_intercepts(phi, lam, lo, hi)
        c = np.fmin(c, refined)
    if extra is not None:
        # a piecewise-linear convex input is supported exactly by its own segments
        ks, kh = extra
        for i0 in range(0, lam.size, 256):
            sl = slice(i0, i0 + 256)
            c[sl] = np.minimum(c[sl], np.min(kh[None, :] - lam[sl, None] * ks[None, :], axis=1))
        if ks.size > 1:
            own = np.maximum(np.diff(kh) / np.diff(ks), 0.0)
            lam = np.concatenate([lam, own])
            c = np.concatenate([c, kh[:-1] - own * ks[:-1]])
            order = np.argsort(lam, kind="stable")
            lam, c = lam[order], c[order]
    idx, knots = _upper_envelope(lam, c)
    ks = np.concatenate([[sv[0]], knots[(knots > sv[0]) & (knots < sv[-1])], [sv[-1]]])
    ks = np.unique(ks)
    kh = np.max(c[idx][None, :] + lam[idx][None, :] * ks[:, None], axis=1)
    out[: last + 1] = np.interp(sv, ks, kh)
    return RegularizedWeight(s, out, ks, kh)


# ---------------------------------------------------------------------------
# smooth majorant in rho-form
# ---------------------------------------------------------------------------


def _smoothstep(x):
    return x * x * (3.0 - 2.0 * x)


def smooth_majorant_rho(w, M_max: int = 400, ramp_nodes: int = 9) -> RhoForm:
    """Strictly positive even majorant ``w_R exp(-int_R^|t| rho(s)/s ds)``.

    Starts from ``2 * even_majorant(w)``, whose ``psi(sigma) = -log`` of it at
    ``e^sigma`` is piecewise linear with integer slopes.  Each slope jump is
    replaced by a symmetric monotone cubic ramp of half-width ``h`` with
    ``h * jump <= 2 log 2``; the smoothed ``psi`` then exceeds ``psi`` by at
    most ``log 2`` and never undershoots it, so the result stays above
    ``even_majorant(w) >= w``.  Past the last transition ``rho`` stays flat,
    so only ``M_max`` moments are matched and the tail is polynomial.
    Weights of bounded support ``[-D, D]`` get ``sup w`` on ``[-D, D]``
    followed by an exponential tail instead.
    """
    w = _as_line_weight(w)
    delta = support_radius(w)
    if math.isfinite(delta):
        # B on [-delta, delta], then exponential decay: positive and holomorphic
        B = w.bound() or 1.0
        d = max(delta, 1e-12)
        return RhoForm(B, d, (d, 2.0 * d), (1.0, 2.0))
    base = even_majorant(w, M_max=M_max)
    k = base._k
    log_tau = base._log_tau
    la0 = base._la[0]
    if k.size == 1:
        # constant majorant 2 a(0): rho vanishes identically
        return RhoForm(2.0 * math.exp(la0), 1.0, (1.0, math.e), (0.0, 0.0))
    # merge coincident transitions (collinear hull vertices)
    keep_t = np.concatenate([np.diff(log_tau) > 1e-12 * np.maximum(1.0, np.abs(log_tau[1:])), [True]])
    k = np.concatenate([[k[0]], k[1:][keep_t]])
    log_tau = log_tau[keep_t]
    jumps = np.diff(k)
    gaps = np.diff(log_tau)
    half = np.full(jumps.shape, np.inf)
    half = np.minimum(half, 2.0 * math.log(2.0) / jumps)
    if gaps.size:
        half[:-1] = np.minimum(half[:-1], gaps / 2.0)
        half[1:] = np.minimum(half[1:], gaps / 2.0)
    x = np.linspace(0.0, 1.0, ramp_nodes)
    sig, rho = [], []
    for i in range(jumps.size):
        sig.extend(log_tau[i] - half[i] + 2.0 * half[i] * x)
        rho.extend(k[i] + jumps[i] * _smoothstep(x))
    sig = np.asarray(sig)
    rho = np.asarray(rho)
    keep = np.concatenate([[True], np.diff(sig) > 0])
    sig, rho = sig[keep], rho[keep]
    # flat continuation past the last ramp (polynomial tail of the majorant)
    sig = np.append(sig, sig[-1] + 1.0)
    rho = np.append(rho, rho[-1])
    nodes = np.exp(sig)
    return RhoForm(2.0 * math.exp(la0), float(nodes[0]), tuple(nodes), tuple(rho))
