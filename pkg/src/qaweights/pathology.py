"""Tangentialized log-convex sequences and the counterexamples built from them.

Start from ``f(x) = 2 x log x`` (so ``exp(-f(m)/m) = m^{-2}``, a convergent
series).  Block ``r`` replaces ``f`` on ``[N_r, R_r]`` by two tangent lines:
the tangent ``T`` at ``N_r`` is followed until the partial sum of
``exp(-T(m)/m)`` exceeds 1 (at ``N'_r``), then the tangent ``T'`` at ``R_r``
that passes through ``(N'_r, T(N'_r))`` takes over.  Sequence ``j`` is
tangentialized on the blocks with ``r = j (mod k)``, so each single sequence
has a divergent series while the pointwise maximum of all of them is ``f``.

Along the tangent at ``N`` the terms are ``e^{-2} N^{-2} e^{2N/m}``, which
integrate in closed form: ``int e^{2N/x} dx = N F(x/N)`` with
``F(y) = y e^{2/y} - 2 Ei(2/y)``.  Blocks whose sums cannot be enumerated are
certified by this integral (a lower bound, since the terms decrease).  The
return tangent touches ``f`` at ``R = rho N`` where ``rho - 1 = (N'/N) log rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.optimize import brentq
from scipy.special import expi

from .classifier import (
    CONVERGES,
    NOT_QA,
    EvidenceRecord,
    Verdict,
    series_test,
)
from .moments import MomentSequence, moment_sequence
from .weights import BasisSpec, Profile1D, Radial, Sum, Tensor, WeightExpr

__all__ = [
    "TruncatedError",
    "Block",
    "TangentializedPair",
    "SequenceProfile",
    "base_f",
    "generate_blocks",
    "tangentialize_sequences",
    "unique_basis_weight",
    "cross_term_lower_bound",
    "sum_counterexample",
]

HARD_CAP = 2**21  # largest materialized index
ENUM_LIMIT = 10**7  # block sums up to this length are summed term by term
LOG_LIMIT = math.log(1e130)  # blocks starting beyond this never affect float evaluation


class TruncatedError(ValueError):
    """The requested window cannot be materialized."""


def base_f(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, 2.0 * x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _F(y: float) -> float:
    """Antiderivative of ``e^{2/y}``."""
    if y > 1e8:
        # asymptotic expansion; the omitted terms are O(1/y^2)
        return y + 2.0 - 2.0 / y - 2.0 * np.euler_gamma - 2.0 * math.log(2.0 / y)
    return y * math.exp(2.0 / y) - 2.0 * float(expi(2.0 / y))


_F1 = _F(1.0)


@dataclass(frozen=True)
class Block:
    """One tangentialized block ``[N, N'] u [N', R]`` owned by sequence ``owner``.

    Positions are kept as logarithms (``log_N`` ...) because they grow doubly
    exponentially; the float fields are ``inf`` once out of range.
    """

    index: int
    owner: int
    log_N: float
    log_Np: float
    log_R: float
    block_sum: float
    certified_by: str

    @property
    def N(self) -> float:
        return _exp_or_inf(self.log_N)

    @property
    def N_prime(self) -> float:
        return _exp_or_inf(self.log_Np)

    @property
    def R(self) -> float:
        return _exp_or_inf(self.log_R)

    @property
    def tangent(self):
        """``(slope, intercept)`` of the tangent at ``N``: ``T(m) = slope m + intercept``."""
        return 2.0 * self.log_N + 2.0, -2.0 * self.N

    @property
    def return_tangent(self):
        return 2.0 * self.log_R + 2.0, -2.0 * self.R

    def to_dict(self):
        return {"index": self.index, "owner": self.owner, "N": self.N, "N_prime": self.N_prime,
                "R": self.R, "log_N": self.log_N, "log_N_prime": self.log_Np, "log_R": self.log_R,
                "tangent": list(self.tangent), "return_tangent": list(self.return_tangent),
                "block_sum": self.block_sum, "certified_by": self.certified_by}


def _exp_or_inf(x):
    return math.exp(x) if x < 709.0 else math.inf


def _enumerate_block(N: int):
    """Smallest ``N'`` with ``sum_{m=N}^{N'} e^{-2} N^{-2} e^{2N/m} > 1`` and that sum."""
    c = -2.0 - 2.0 * math.log(N)
    total = 0.0
    start = N
    chunk = max(1024, 8 * N * N)
    while start - N < ENUM_LIMIT:
        m = np.arange(start, start + chunk, dtype=float)
        ps = total + np.cumsum(np.exp(c + 2.0 * N / m))
        hit = np.flatnonzero(ps > 1.0)
        if hit.size:
            i = int(hit[0])
            return int(m[i]), float(ps[i])
        total = float(ps[-1])
        start += chunk
    return None


def _integral_block(log_N: float):
    """``(log N', certified lower bound)`` from the closed-form integral."""
    N = _exp_or_inf(log_N)
    if math.isfinite(N) and math.e**2 * N < 1e290:
        target = (1.0 + 1e-9) * math.e**2 * N + _F1
        hi = 2.0 * math.e**2 * N + 64.0
        y = brentq(lambda y: _F(y) - target, 1.0, hi, xtol=1e-12, rtol=1e-15)
        # N' + 1 = y N; round N' up to keep the bound
        Np = math.ceil(y * N) if y * N < 2.0**53 else y * N * (1.0 + 1e-15)
        bound = (_F((Np + 1.0) / N) - _F1) / (math.e**2 * N)
        return math.log(Np), bound
    # far beyond double range: y = e^2 N (1 + o(1)) with the integral bound equal to 1 + 1e-9
    return 2.0 * log_N + 2.0, 1.0 + 1e-9


def _return_rho_log(log_r: float) -> float:
    """``x = log rho`` solving ``e^x - 1 = r x`` with ``x > 0`` (``r > 1``)."""
    r = math.exp(log_r) if log_r < 700 else math.inf
    if math.isfinite(r) and r < 1e250:
        lo, hi = math.log(r), 2.0 * math.log(r) + 2.0
        return brentq(lambda x: math.exp(x) - 1.0 - r * x, lo, hi, xtol=1e-14, rtol=1e-15)
    # x = log r + log x + log(1 + 1/(r x)) by fixed-point iteration in log space
    x = log_r
    for _ in range(100):
        x = log_r + math.log(x)
    return x


def generate_blocks(k: int, n_blocks: int | None = None, N1: int = 4,
                    log_limit: float = LOG_LIMIT) -> list[Block]:
    """Blocks ``r = 0, 1, ...`` (owner ``r mod k``); stop after ``n_blocks`` or past ``log_limit``."""
    if k < 1:
        raise ValueError("k must be positive")
    if N1 < 2:
        raise ValueError("N1 must be at least 2")
    blocks = []
    N = N1
    log_N = math.log(N1)
    r = 0
    while (n_blocks is None or r < n_blocks) and (n_blocks is not None or log_N <= log_limit):
        found = _enumerate_block(N) if (N is not None and N < 4000) else None
        if found is not None:
            Np, s = found
            log_Np, how = math.log(Np), "enumeration"
        else:
            log_Np, s = _integral_block(log_N)
            how = "integral-bound"
        log_r = log_Np - log_N
        x = _return_rho_log(log_r)
        log_R = log_N + x
        blocks.append(Block(r, r % k, log_N, log_Np, log_R, float(s), how))
        r += 1
        R = _exp_or_inf(log_R)
        if R < 2.0**53:
            N = int(math.floor(R)) + 1
            log_N = math.log(N)
        else:
            N = None
            log_N = log_R + math.log1p(1.0 / R) if math.isfinite(R) else log_R
    return blocks


def _log_a(blocks, j: int, m) -> np.ndarray:
    """``log a_j(m)`` for real ``m >= 1`` (vectorized)."""
    m = np.asarray(m, dtype=float)
    out = base_f(m)
    for b in blocks:
        if b.owner != j:
            continue
        N, R = b.N, b.R
        if not math.isfinite(N):
            break
        s1, c1 = b.tangent
        s2, c2 = b.return_tangent
        inside = (m >= N) & (m <= R)
        if not inside.any():
            continue
        t1 = s1 * m + c1
        t2 = s2 * m + c2 if math.isfinite(R) else np.full(m.shape, -np.inf)
        out = np.where(inside, np.maximum(t1, t2), out)
    return out


def _log_a_full(blocks, j, m):
    m = np.asarray(m, dtype=float)
    one_two = _log_a(blocks, j, np.array([1.0, 2.0]))
    a0 = 2.0 * one_two[0] - one_two[1]  # smallest a(0) keeping log-convexity at m = 1
    return np.where(m == 0, a0, _log_a(blocks, j, np.maximum(m, 1.0)))


@dataclass
class TangentializedPair:
    k: int
    blocks: list
    m_cap: int
    N1: int = 4
    log_sequences: list = field(default_factory=list)

    @property
    def sequences(self) -> list[MomentSequence]:
        return [MomentSequence.from_log(lv, provenance="tangentialized",
                                        divergence_certificate=SequenceProfile.certificate(self.k, j))
                for j, lv in enumerate(self.log_sequences)]

    def log_a(self, j: int, m):
        return _log_a_full(self.blocks, j, m)

    def off_block_mask(self, m, owner: int | None = None):
        """Indices ``m >= 1`` outside the blocks of ``owner`` (of every sequence if ``None``)."""
        m = np.asarray(m, dtype=float)
        mask = m >= 1
        for b in self.blocks:
            if owner is None or b.owner == owner:
                mask &= ~((m >= b.N) & (m <= b.R))
        return mask

    def max_off_block_mask(self, m):
        """Indices where some sequence is off its own blocks, so the maximum follows the base curve."""
        return np.logical_or.reduce([self.off_block_mask(m, j) for j in range(self.k)])

    def max_log_sequence(self) -> np.ndarray:
        return np.max(np.vstack(self.log_sequences), axis=0)

    def window_sums(self) -> list[float]:
        """``sum_{1 <= m <= m_cap} a_j(m)^(-1/m)`` for each sequence."""
        m = np.arange(1, self.m_cap + 1, dtype=float)
        return [float(np.sum(np.exp(-lv[1:] / m))) for lv in self.log_sequences]

    def to_dict(self):
        return {"k": self.k, "N1": self.N1, "m_cap": self.m_cap,
                "blocks": [b.to_dict() for b in self.blocks]}

    def csv_rows(self):
        m = np.arange(self.m_cap + 1)
        rows = [["m"] + [f"log_a{j}" for j in range(self.k)]]
        for i in m:
            rows.append([int(i)] + [float(lv[i]) for lv in self.log_sequences])
        return rows


def tangentialize_sequences(k: int, num_blocks: int, m_cap: int = 4096, N1: int = 4) -> TangentializedPair:
    """Build ``k`` tangentialized sequences with ``num_blocks`` blocks materialized to ``m_cap``.

    The materialized window grows to cover every block whose end ``N'`` is at
    most ``HARD_CAP`` (so those block sums can be checked term by term).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if num_blocks < k:
        raise ValueError("need at least one block per sequence (num_blocks >= k)")
    if m_cap > HARD_CAP:
        raise TruncatedError(f"m_cap {m_cap} exceeds the hard cap {HARD_CAP}")
    blocks = generate_blocks(k, num_blocks, N1)
    reach = [b.N_prime for b in blocks if b.N_prime <= HARD_CAP]
    cap = int(max([m_cap] + reach))
    m = np.arange(cap + 1, dtype=float)
    seqs = [_log_a_full(blocks, j, m) for j in range(k)]
    return TangentializedPair(k, blocks, cap, N1, seqs)


class SequenceProfile(Profile1D):
    """Even weight ``inf_m a_j(m) / |t|^m`` for the full (unbounded) tangentialized sequence.

    Evaluated lazily: the minimizing ``m`` is found by bisection on the
    increments of ``log a_j``.  Its moments are the sequence itself.
    """

    family: ClassVar[str] = "tangentialized"
    is_even: ClassVar[bool] = True

    def __init__(self, k: int, j: int, N1: int = 4):
        if not 0 <= j < k:
            raise ValueError("sequence index out of range")
        self.k, self.j, self.N1 = int(k), int(j), int(N1)
        self.blocks = generate_blocks(self.k, None, self.N1)
        self.qa_certificate = self.certificate(self.k, self.j)

    @staticmethod
    def certificate(k, j):
        return (f"tangentialized-blocks(k={k},j={j}): every block "
                "owned by the sequence contributes more than 1 to the series")

    def __eq__(self, other):
        return isinstance(other, SequenceProfile) and (self.k, self.j, self.N1) == (other.k, other.j, other.N1)

    def __hash__(self):
        return hash((self.k, self.j, self.N1))

    def __repr__(self):
        return f"SequenceProfile(k={self.k}, j={self.j}, N1={self.N1})"

    def log_a(self, m):
        return _log_a_full(self.blocks, self.j, m)

    TABLE_SIZE: ClassVar[int] = 2**20

    def _table(self):
        """``log a(0..TABLE_SIZE)`` and its increments, built on first use."""
        if getattr(self, "_tab", None) is None:
            la = self.log_a(np.arange(self.TABLE_SIZE + 1, dtype=float))
            self._tab = (la, np.diff(la))
        return self._tab

    def log_value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        shape = t.shape
        t = t.ravel()
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        la_tab, inc_tab = self._table()
        # the minimizing m is the number of increments not exceeding log t (log a is convex)
        m_star = np.searchsorted(inc_tab, lt, side="right")
        inside = m_star < inc_tab.size
        if inside.all():
            with np.errstate(invalid="ignore"):
                out = np.where(m_star == 0, la_tab[0], la_tab[m_star] - m_star * lt)
            return out.reshape(shape)
        out = np.empty(t.shape)
        mi = m_star[inside]
        with np.errstate(invalid="ignore"):
            out[inside] = np.where(mi == 0, la_tab[0], la_tab[mi] - mi * lt[inside])
        out[~inside] = self._log_value_far(lt[~inside])
        return out.reshape(shape)

    def _log_value_far(self, lt):
        """Bisection for ``t`` beyond the tabulated increments."""
        lo = np.full(lt.shape, float(self.TABLE_SIZE))
        hi = 2.0 * lo

        def incr(m):
            return self.log_a(m) - self.log_a(m - 1.0)

        # make sure the increment at hi exceeds log t
        for _ in range(20):
            bad = incr(hi) <= lt
            if not bad.any():
                break
            hi = np.where(bad, hi * 4.0, hi)
        for _ in range(1100):
            mid = np.floor(0.5 * (lo + hi))
            active = (hi - lo > 1.0) & (mid > lo) & (mid < hi)
            if not active.any():
                break
            ok = incr(np.maximum(mid, 1.0)) <= lt
            lo = np.where(active & ok, mid, lo)
            hi = np.where(active & ~ok, mid, hi)
        return self.log_a(lo) - lo * lt

    def sup_bound(self):
        return float(np.exp(self.log_a(np.zeros(1))[0]))

    def support_radius(self):
        return math.inf

    def breakpoints(self):
        return np.array([])

    def log_moment(self, m):
        return self.log_a(np.asarray(m, dtype=float))

    def to_dict(self):
        return {"family": self.family, "k": self.k, "index": self.j, "N1": self.N1}


def unique_basis_weight(pair: TangentializedPair) -> Tensor:
    """Tensor product of the Ostrowski weights of the ``k = n`` sequences."""
    return Tensor(tuple(SequenceProfile(pair.k, j, pair.N1) for j in range(pair.k)))


def cross_term_lower_bound(pair: TangentializedPair, v, m_max: int | None = None) -> MomentSequence:
    """Certified lower bound for ``M_w(v, m)`` of :func:`unique_basis_weight`.

    Restricting the sup to the axes ``j1, j2`` with ``v_j != 0`` gives
    ``max(a_j1, a_j2)(m) * min|v_j|^m * min(a_j1(0), a_j2(0)) * prod_others a_j(0)``.
    """
    v = np.asarray(v, dtype=float)
    if v.size != pair.k:
        raise ValueError("vector dimension must equal k")
    nz = np.flatnonzero(v)
    if nz.size < 2:
        raise ValueError("the cross-term bound needs at least two nonzero coordinates")
    j1, j2 = int(nz[0]), int(nz[1])
    K = pair.m_cap if m_max is None else int(m_max)
    m = np.arange(K + 1, dtype=float)
    a0 = np.array([pair.log_a(j, np.zeros(1))[0] for j in range(pair.k)])
    la = np.maximum(pair.log_a(j1, m), pair.log_a(j2, m))
    lam = math.log(min(abs(v[j1]), abs(v[j2])))
    const = min(a0[j1], a0[j2]) + sum(a0[i] for i in range(pair.k) if i not in (j1, j2))
    lv = la + m * lam + const
    return MomentSequence.from_log(lv, provenance="cross-term-lower-bound", axes=[j1, j2])


def sum_counterexample(pair: TangentializedPair, dimension: int = 1):
    """``(w1, w2, verdict)``: two quasi-analytic radial weights whose sum is not quasi-analytic."""
    if pair.k != 2:
        raise ValueError("the sum counterexample needs k = 2")
    w1 = Radial(SequenceProfile(2, 0, pair.N1), dimension)
    w2 = Radial(SequenceProfile(2, 1, pair.N1), dimension)
    m = np.arange(pair.m_cap + 1, dtype=float)
    lower = MomentSequence.from_log(np.maximum(pair.log_a(0, m), pair.log_a(1, m)),
                                    provenance="max-lower-bound")
    ev = series_test(lower)
    ev.payload["rule"] = "sum-moment-lower-bound"
    if ev.conclusion == CONVERGES:
        verdict = Verdict(NOT_QA, None, [ev])
    else:
        verdict = Verdict("Inconclusive", None, [ev])
    return w1, w2, verdict


def off_block_tail(pair: TangentializedPair, q: float = 2.0, m_fit: int = 16) -> dict:
    """Fit ``c * m^-q`` to the off-block terms of ``max_j a_j(m)^(-1/m)`` and bound the rest.

    ``c`` is the largest ``term * m^q`` over the fitted indices, so the model
    majorizes every fitted term; ``tail`` is ``c * sum_{m > m_cap} m^-q``
    (bounded by the integral ``c * m_cap^(1-q) / (q - 1)``).
    """
    if q <= 1:
        raise ValueError("q must exceed 1 for a summable model")
    m = np.arange(pair.m_cap + 1, dtype=float)
    terms = np.exp(-pair.max_log_sequence()[1:] / m[1:])
    off = pair.max_off_block_mask(m[1:])
    mask = off & (m[1:] >= m_fit)
    if not mask.any():
        raise TruncatedError("no off-block indices inside the window")
    mm, tt = m[1:][mask], terms[mask]
    c = float(np.max(tt * mm ** q))
    slope = float(np.polyfit(np.log(mm), np.log(tt), 1)[0])
    return {"c": c, "q": q, "free_exponent": -slope, "m_fit": m_fit,
            "window_off_block_sum": float(np.sum(terms[off])),
            "tail": c * pair.m_cap ** (1.0 - q) / (q - 1.0)}


def unique_basis_report(pair: TangentializedPair, vector=None) -> dict:
    """Axis series tests and the cross-term test for :func:`unique_basis_weight`."""
    w = unique_basis_weight(pair)
    axes = []
    for j in range(pair.k):
        e = np.zeros(pair.k)
        e[j] = 1.0
        axes.append(series_test(moment_sequence(w, e, min(pair.m_cap, 4096))))
    if vector is None:
        vector = np.zeros(pair.k)
        vector[:2] = 1.0 / math.sqrt(2.0)
    cross = series_test(cross_term_lower_bound(pair, vector))
    return {"weight": w, "axes": axes, "vector": np.asarray(vector, float), "cross": cross}
