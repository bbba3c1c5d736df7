"""Moment quantities ``M_w(v, m) = sup_x |(v, x)|^m w(x)`` and sequence tools.

Everything is computed in log space, so sequences such as ``exp(2 m log m)``
stay representable long after their values overflow a double; ``values``
saturate at ``inf`` while ``log_values`` keep full information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .weights import (
    AffinePullback,
    Profile1D,
    Radial,
    Scale,
    Table,
    Tensor,
    WeightExpr,
    DimensionError,
)

__all__ = [
    "MomentSequence",
    "TruncatedError",
    "moment",
    "log_moments",
    "moment_sequence",
    "log_convex_envelope",
    "is_log_convex",
    "mu_sequence",
    "profile_log_moments",
    "sup_log_moments_1d",
]

LOG_CONVEX_SLACK = 1e-9
_GOLDEN = 0.6180339887498949


class TruncatedError(ValueError):
    """A sequence is too short for the requested window."""


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """Nonnegative sequence ``a(0..M)`` with entries in ``[0, inf]``.

    ``values`` are exact when the sequence was built from values; sequences
    built from logarithms expose ``exp(log_values)`` with ``inf`` saturation.
    """

    log_values: np.ndarray
    values: np.ndarray
    provenance: str = "given"
    meta: dict = field(default_factory=dict)
    unbounded: np.ndarray | None = None

    def __post_init__(self):
        lv = np.asarray(self.log_values, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if lv.shape != v.shape or lv.size == 0:
            raise ValueError("sequence must be nonempty")
        if np.isnan(lv).any() or np.isnan(v).any() or (v < 0).any():
            raise ValueError("sequence entries must lie in [0, inf]")
        lv.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "log_values", lv)
        object.__setattr__(self, "values", v)
        if self.unbounded is None:
            object.__setattr__(self, "unbounded", np.zeros(lv.size, bool))

    @classmethod
    def from_values(cls, values, provenance="given", **meta):
        v = np.asarray(values, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):  # negatives are rejected below
            lv = np.log(v)
        return cls(lv, v, provenance, meta)

    @classmethod
    def from_log(cls, log_values, provenance="given", unbounded=None, **meta):
        lv = np.asarray(log_values, dtype=float)
        with np.errstate(over="ignore"):
            v = np.exp(lv)
        return cls(lv, v, provenance, meta, unbounded)

    def __len__(self):
        return self.log_values.size

    @property
    def m_max(self) -> int:
        return self.log_values.size - 1

    @property
    def log_convex(self) -> bool:
        """Certificate ``a(m)^2 <= a(m-1) a(m+1) (1 + 1e-9)`` on finite triples."""
        return is_log_convex(self.log_values)

    def to_rows(self):
        """``(m, value, log value)`` rows for CSV output."""
        return [(m, float(v), float(lv)) for m, (v, lv) in enumerate(zip(self.values, self.log_values))]


def is_log_convex(log_values, slack: float = LOG_CONVEX_SLACK) -> bool:
    lv = np.asarray(log_values, dtype=float)
    if lv.size < 3:
        return True
    a, b, c = lv[:-2], lv[1:-1], lv[2:]
    finite = (a < np.inf) & (b < np.inf) & (c < np.inf)
    with np.errstate(invalid="ignore"):
        # never stricter than the rounding of the stored logs themselves
        tol = np.maximum(math.log1p(slack), 16.0 * np.spacing(np.abs(b)))
        ok = 2.0 * b <= a + c + tol
    ok |= b == -np.inf
    return bool(np.all(ok[finite]))


# ---------------------------------------------------------------------------
# one-dimensional sup
# ---------------------------------------------------------------------------


def _grid_argmax(ms, u, lf):
    """Index maximizing ``m u_i + lf_i`` over the grid, for every ``m``.

    Only vertices of the upper convex hull of ``(u_i, lf_i)`` can win, and the
    winner for slope ``m`` is the vertex where the hull's edge slopes cross
    ``-m``.  Returns ``-1`` where ``lf`` is ``-inf`` everywhere.
    """
    fin = np.flatnonzero(np.isfinite(lf))
    if fin.size == 0:
        return np.full(ms.shape, -1)
    x, y = u[fin], lf[fin]
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            if (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o]) >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    h = np.asarray(hull)
    d = np.diff(y[h]) / np.diff(x[h])
    k = np.searchsorted(-d, ms, side="right") if d.size else np.zeros(ms.shape, int)
    return fin[h[k]]


def sup_log_moments_1d(logf, ms, *, breakpoints=(), rtol=1e-9, t_cap=2.0**60,
                       samples=4096, start=8.0):
    """``log sup_{t > 0} t^m f(t)`` for each ``m`` in ``ms`` (0 allowed).

    ``logf`` maps an array of positive ``t`` to ``log f(t)``.  The domain
    ``(0, L]`` doubles from ``L = start`` until the argmax sits in the inner
    half of the domain and the sup (grid maximum polished by golden-section
    search in ``log t``) has moved by less than ``rtol`` since the previous
    domain.  Orders still moving at ``t_cap`` are reported as ``inf`` and
    flagged unbounded.  Returns ``(log_sup, unbounded, meta)``.
    """
    ms = np.asarray(ms, dtype=float)
    out = np.full(ms.shape, -np.inf)
    unbounded = np.zeros(ms.shape, bool)
    bps = np.asarray(breakpoints, dtype=float)
    bps = bps[np.isfinite(bps) & (bps > 0)]
    active = np.arange(ms.size)
    prev = np.full(ms.shape, np.nan)
    L = float(start)
    doublings = 0
    while active.size:
        lin = np.linspace(0.0, L, samples + 1)[1:]
        geo = np.geomspace(L * 2.0**-50, L, samples)
        t = np.unique(np.concatenate([lin, geo, bps[bps <= L]]))
        u = np.log(t)
        lf = np.asarray(logf(t), dtype=float)
        idx = active
        j = _grid_argmax(ms[idx], u, lf)
        fin = j >= 0
        j = np.where(fin, j, 0)
        val = np.where(fin, ms[idx] * u[j] + lf[j], -np.inf)
        inside = t[j] <= 0.5 * L
        pol = fin & (inside | (L >= t_cap))
        if pol.any():
            val[pol] = np.maximum(val[pol], _golden_polish(logf, ms[idx[pol]], u, j[pol]))
        with np.errstate(invalid="ignore"):
            stable = np.abs(val - prev[idx]) <= rtol * np.maximum(1.0, np.abs(val))
        done = inside & stable & fin
        out[idx] = val
        prev[idx] = val
        if L >= t_cap:
            gone = idx[~done & (val > -np.inf)]
            unbounded[gone] = True
            out[gone] = np.inf
            done[:] = True
        active = idx[~done]
        if active.size:
            L *= 2.0
            doublings += 1
    meta = {"domain": L, "doublings": doublings, "samples": samples, "t_cap": t_cap}
    return out, unbounded, meta


def _golden_polish(logf, ms, u, j, iters=80):
    lo = u[np.maximum(j - 1, 0)]
    hi = u[np.minimum(j + 1, u.size - 1)]

    def f(x):
        with np.errstate(invalid="ignore"):
            return np.where(ms == 0, 0.0, ms * x) + logf(np.exp(x))

    best = np.full(ms.shape, -np.inf)
    for _ in range(iters):
        c1 = hi - _GOLDEN * (hi - lo)
        c2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = f(c1), f(c2)
        best = np.maximum(best, np.maximum(f1, f2))
        left = f1 >= f2
        hi = np.where(left, c2, hi)
        lo = np.where(left, lo, c1)
    return np.maximum(best, f(0.5 * (lo + hi)))


def profile_log_moments(profile: Profile1D, ms, *, two_sided=False, rtol=1e-9, t_cap=2.0**60):
    """``log sup |t|^m p(t)`` over ``t >= 0`` (radial use) or over the whole line."""
    ms = np.asarray(ms, dtype=float)
    even = profile.is_even
    closed = profile.log_moment(ms) if (even or not two_sided) else None
    if closed is not None:
        meta = {"provenance": "closed-form"}
        cert = getattr(profile, "qa_certificate", None)
        if cert:
            # the sequence diverges through blocks beyond any finite window
            meta["divergence_certificate"] = cert
        return np.asarray(closed, dtype=float), np.zeros(ms.shape, bool), meta
    bps = profile.breakpoints()
    val, unb, meta = sup_log_moments_1d(profile.log_value, ms, breakpoints=bps,
                                        rtol=rtol, t_cap=t_cap)
    at0 = profile.log_value(np.array([0.0]))[0]
    val = np.where(ms == 0, np.maximum(val, at0), val)
    if two_sided and not even:
        neg, unb2, _ = sup_log_moments_1d(lambda t: profile.log_value(-t), ms, breakpoints=bps,
                                          rtol=rtol, t_cap=t_cap)
        val = np.maximum(val, neg)
        unb = unb | unb2
    meta["provenance"] = "grid-sup"
    return val, unb, meta


# ---------------------------------------------------------------------------
# n-dimensional dispatch
# ---------------------------------------------------------------------------


def _structural(w: WeightExpr, v: np.ndarray, ms, rtol, t_cap):
    """Log moments from the expression structure, or ``None``."""
    if isinstance(w, Scale):
        inner = _structural(w.inner, v, ms, rtol, t_cap)
        if inner is None:
            return None
        lv, unb, meta = inner
        if w.c == 0:
            # 0 * inf = 0
            return np.full(lv.shape, -np.inf), np.zeros(lv.shape, bool), meta
        return lv + math.log(w.c), unb, meta
    if isinstance(w, Radial):
        norm = float(np.linalg.norm(v))
        lv, unb, meta = profile_log_moments(w.profile, ms, rtol=rtol, t_cap=t_cap)
        return _scale_by_norm(lv, ms, norm), unb, meta
    if isinstance(w, Tensor):
        # components at rounding level (e.g. after transporting a basis) count as zero
        nz = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
        if nz.size != 1:
            return None
        j = int(nz[0])
        lv, unb, meta = profile_log_moments(w.factors[j], ms, two_sided=True, rtol=rtol, t_cap=t_cap)
        rest = 0.0
        for i, p in enumerate(w.factors):
            if i != j:
                s, _, _ = profile_log_moments(p, np.zeros(1), two_sided=True, rtol=rtol, t_cap=t_cap)
                rest += float(s[0])
        return _scale_by_norm(lv, ms, abs(float(v[j]))) + rest, unb, meta
    if isinstance(w, Table):
        lv, unb, meta = profile_log_moments(w.profile, ms, two_sided=True, rtol=rtol, t_cap=t_cap)
        return _scale_by_norm(lv, ms, abs(float(v[0]))), unb, meta
    if isinstance(w, AffinePullback) and not np.any(w.map.translation):
        return _structural(w.inner, w.map.linear.T @ v, ms, rtol, t_cap)
    return None


def _scale_by_norm(lv, ms, norm):
    with np.errstate(invalid="ignore", divide="ignore"):
        ln = math.log(norm) if norm > 0 else -np.inf
        scaled = np.where(ms == 0, 0.0, ms * ln)
    out = lv + scaled
    # 0 * inf = 0 convention for a zero direction with infinite sup
    return np.where(np.isnan(out), 0.0, out)


def _line_weight(w: WeightExpr, v: np.ndarray):
    """``log g(t)`` with ``g(t) = sup_{z orthogonal to v} w(t v/|v| + z)`` (grid + polish)."""
    n = w.dimension
    vhat = v / np.linalg.norm(v)
    if n == 1:
        return lambda t: w.log_eval((np.asarray(t) * vhat[0]).reshape(-1, 1)), None
    # orthonormal complement of v
    q, _ = np.linalg.qr(np.column_stack([vhat, np.eye(n)]))
    perp = q[:, 1:n]
    per_dim = 41 if n == 2 else 13
    base = np.geomspace(1e-3, 1.0, (per_dim - 1) // 2)
    nodes = np.concatenate([[0.0], base, -base])
    mesh = np.meshgrid(*([nodes] * (n - 1)), indexing="ij")
    unit = np.column_stack([g.ravel() for g in mesh]) @ perp.T  # (Z, n)

    def scan(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        scale = np.maximum(64.0, 4.0 * np.abs(t))
        X = t[:, None, None] * vhat + scale[:, None, None] * unit[None, :, :]
        lv = w.log_eval(X.reshape(-1, n)).reshape(t.size, -1)
        k = np.argmax(lv, axis=1)
        return k, scale, lv[np.arange(t.size), k]

    def logg(t):
        return scan(t)[2]

    def polish(t, m):
        """Joint refinement of ``m log|(vhat, x)| + log w(x)`` over ``x``, started at the grid best."""
        k, scale, f0 = scan(t)
        k, f0 = int(k[0]), float(f0[0])
        if not np.isfinite(f0):
            return -np.inf
        x0 = t * vhat + scale[0] * unit[k]

        def obj(x):
            proj = abs(float(vhat @ x))
            lw = float(w.log_eval(x.reshape(1, -1))[0])
            if m and proj == 0.0:
                return np.inf
            val = (m * math.log(proj) if m else 0.0) + lw
            return -val if np.isfinite(val) else np.inf

        start = -obj(x0)
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10 * max(1.0, abs(t)), "fatol": 1e-12,
                                "maxiter": 400 * n})
        return max(start, -float(res.fun))

    return logg, polish


def _generic(w: WeightExpr, v: np.ndarray, ms, rtol, t_cap):
    norm = float(np.linalg.norm(v))
    vhat = v / norm
    logg, polish = _line_weight(w, vhat)
    samples = 4096 if w.dimension == 1 else 512
    pos, unb_p, meta = sup_log_moments_1d(logg, ms, rtol=rtol, t_cap=t_cap, samples=samples)
    neg, unb_n, _ = sup_log_moments_1d(lambda t: logg(-np.asarray(t)), ms, rtol=rtol,
                                       t_cap=t_cap, samples=samples)
    at0 = float(logg(np.array([0.0]))[0])
    lv = np.maximum(pos, neg)
    lv = np.where(ms == 0, np.maximum(lv, at0), lv)
    if polish is not None:
        lv = _polish_nd(logg, polish, ms, lv)
    meta["provenance"] = "grid-sup"
    return _scale_by_norm(lv, ms, norm), unb_p | unb_n, meta


def _polish_nd(logg, polish, ms, lv):
    # re-locate each argmax on a fine line grid and optimise the transverse offset there
    out = lv.copy()
    t = np.concatenate([-np.geomspace(1e-3, 1e6, 400)[::-1], [0.0], np.geomspace(1e-3, 1e6, 400)])
    lg = logg(t)
    at = np.abs(t)
    with np.errstate(divide="ignore"):
        lu = np.log(at)
    for i, m in enumerate(ms):
        if not np.isfinite(lv[i]):
            continue
        with np.errstate(invalid="ignore"):
            obj = np.where(m == 0, 0.0, m * lu) + lg
        k = int(np.nanargmax(obj))
        out[i] = max(out[i], polish(t[k], m))
    return out


def has_structural_path(w: WeightExpr, v) -> bool:
    """Whether ``M_w(v, .)`` comes from closed forms rather than the grid search."""
    return _structural(w, np.asarray(v, dtype=float).reshape(-1), np.zeros(1), 1e-9, 2.0**60) is not None


def log_moments(w: WeightExpr, v, ms, *, rtol=1e-9, t_cap=2.0**60):
    """``log M_w(v, m)`` for every ``m`` in ``ms``; returns ``(logs, unbounded, meta)``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != w.dimension:
        raise DimensionError(f"vector has length {v.size}, weight lives on R^{w.dimension}")
    if not np.any(v):
        raise ValueError("moment direction must be nonzero")
    ms = np.asarray(ms, dtype=float).reshape(-1)
    if np.any(ms < 0):
        raise ValueError("moment order must be nonnegative")
    res = _structural(w, v, ms, rtol, t_cap)
    if res is None:
        res = _generic(w, v, ms, rtol, t_cap)
    return res


def moment(w: WeightExpr, v, m: int, *, rtol=1e-9, t_cap=2.0**60) -> float:
    """``M_w(v, m)`` as a float in ``[0, inf]``."""
    lv, _, _ = log_moments(w, v, [m], rtol=rtol, t_cap=t_cap)
    with np.errstate(over="ignore"):
        return float(np.exp(lv[0]))


def moment_sequence(w: WeightExpr, v, M_max: int, *, rtol=1e-9, t_cap=2.0**60) -> MomentSequence:
    if M_max < 1:
        raise ValueError("M_max must be at least 1")
    lv, unb, meta = log_moments(w, v, np.arange(M_max + 1), rtol=rtol, t_cap=t_cap)
    prov = meta.pop("provenance", "grid-sup")
    return MomentSequence.from_log(lv, provenance=prov, unbounded=unb, **meta)


# ---------------------------------------------------------------------------
# sequence tools
# ---------------------------------------------------------------------------


def _lower_hull(x, y):
    """Vertices of the lower convex hull of points sorted by ``x`` (collinear kept)."""
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross < 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def log_convex_envelope(a: MomentSequence | np.ndarray) -> MomentSequence:
    """Largest log-convex minorant of a sequence in ``[0, inf]``.

    Zeros: ``a(0) = 0`` forces the zero sequence; a zero at any ``m >= 1``
    forces zeros at every ``m >= 1``, since ``a(m)^2 <= a(m-1) a(m+1)``
    propagates a zero backwards down to ``m = 1``.  Infinite entries impose
    no constraint; leading and trailing infinities stay infinite.
    """
    seq = a if isinstance(a, MomentSequence) else MomentSequence.from_values(a)
    lv = seq.log_values
    if lv.size < 2:
        raise ValueError("envelope needs at least two entries")
    out = np.array(lv, copy=True)
    if lv[0] == -np.inf:
        out[:] = -np.inf
    elif np.any(lv[1:] == -np.inf):
        out[1:] = -np.inf
    else:
        fin = np.flatnonzero(np.isfinite(lv))
        if fin.size >= 2:
            x = fin.astype(float)
            h = _lower_hull(x, lv[fin])
            span = np.arange(fin[0], fin[-1] + 1)
            interp = np.interp(span.astype(float), x[h], lv[fin][h])
            out[span] = np.minimum(interp, lv[span])
    with np.errstate(over="ignore"):
        vals = np.where(out == lv, seq.values, np.exp(out))
    return MomentSequence(out, vals, "envelope", {})


def mu_sequence(M: MomentSequence, m_lo: int, m_hi: int, tail_window: int = 0) -> list[float]:
    """``mu(m) = min_{m <= k <= K} M(k)^{1/k}`` for ``m_lo <= m <= m_hi``.

    ``K`` is the last index of ``M``; it has to reach ``m_hi + tail_window``.
    """
    K = M.m_max
    if m_lo < 1 or m_hi < m_lo:
        raise ValueError("need 1 <= m_lo <= m_hi")
    if K < m_hi + tail_window:
        raise TruncatedError(f"sequence ends at {K}, window needs {m_hi + tail_window}")
    vals = M.values
    roots = [float(vals[k]) ** (1.0 / k) for k in range(m_lo, K + 1)]
    suffix = np.minimum.accumulate(np.asarray(roots)[::-1])[::-1]
    return [float(x) for x in suffix[: m_hi - m_lo + 1]]
