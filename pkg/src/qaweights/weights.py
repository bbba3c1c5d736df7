"""Weight expression language.

A weight is a bounded nonnegative function on R^n.  Weights are built from
one-dimensional profiles (wrapped radially or as tensor factors) and combined
with affine pullbacks, scalings, pointwise minima and sums.  Every node works
in log space: ``log_eval`` returns ``log w(x)`` with ``-inf`` for zeros, which
keeps fast-decaying weights representable far out in the tail.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np

__all__ = [
    "Profile1D",
    "ExpDecay",
    "Gaussian",
    "RepLog",
    "RhoForm",
    "Indicator",
    "Sampled",
    "WeightExpr",
    "Radial",
    "Tensor",
    "AffineMap",
    "AffinePullback",
    "Scale",
    "PointwiseMin",
    "Sum",
    "Table",
    "BasisSpec",
    "evaluate",
    "pullback",
    "radial",
    "DimensionError",
]

_DET_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when a point or vector does not match a weight's dimension."""


def _safe_log(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(x)


def _check_nonneg(name, value):
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite nonnegative number, got {value!r}")
    return value


def _check_pos(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# one-dimensional profiles
# ---------------------------------------------------------------------------


class Profile1D(ABC):
    """A bounded nonnegative function of one real variable."""

    family: ClassVar[str] = "abstract"
    is_even: ClassVar[bool] = True

    @abstractmethod
    def log_value(self, t) -> np.ndarray:
        """Vectorized ``log p(t)``; ``-inf`` where ``p(t) = 0``."""

    def __call__(self, t):
        with np.errstate(under="ignore"):
            return np.exp(self.log_value(t))

    @abstractmethod
    def sup_bound(self) -> float:
        """A certified upper bound for ``p`` on the whole line."""

    def support_radius(self) -> float:
        """``sup{|t| : p(t) != 0}``; infinite for strictly positive profiles."""
        return math.inf

    def breakpoints(self) -> np.ndarray:
        """Positive abscissae where the profile has kinks or jumps."""
        return np.empty(0)

    def log_moment(self, m) -> np.ndarray | None:
        """Closed-form ``log sup_t |t|^m p(t)`` if known, else ``None``."""
        return None

    @abstractmethod
    def to_dict(self) -> dict:
        ...


@dataclass(frozen=True, eq=False)
class ExpDecay(Profile1D):
    """``C exp(-eps |t|)``."""

    C: float = 1.0
    eps: float = 1.0
    family: ClassVar[str] = "expdecay"

    def __post_init__(self):
        object.__setattr__(self, "C", _check_nonneg("C", self.C))
        object.__setattr__(self, "eps", _check_pos("eps", self.eps))

    def log_value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return _safe_log(self.C) - self.eps * t

    def sup_bound(self):
        return self.C

    def support_radius(self):
        return math.inf if self.C > 0 else 0.0

    def log_moment(self, m):
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(m > 0, m * (np.log(m / self.eps) - 1.0), 0.0)
        return _safe_log(self.C) + core

    def to_dict(self):
        return {"family": self.family, "C": self.C, "eps": self.eps}


@dataclass(frozen=True, eq=False)
class Gaussian(Profile1D):
    """``C exp(-t^2 / sigma^2)``."""

    C: float = 1.0
    sigma: float = 1.0
    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "C", _check_nonneg("C", self.C))
        object.__setattr__(self, "sigma", _check_pos("sigma", self.sigma))

    def log_value(self, t):
        t = np.asarray(t, dtype=float)
        return _safe_log(self.C) - (t / self.sigma) ** 2

    def sup_bound(self):
        return self.C

    def support_radius(self):
        return math.inf if self.C > 0 else 0.0

    def log_moment(self, m):
        # maximum of m log t - t^2/sigma^2 sits at t^2 = m sigma^2 / 2
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(m > 0, 0.5 * m * (np.log(m * self.sigma**2 / 2.0) - 1.0), 0.0)
        return _safe_log(self.C) + core

    def to_dict(self):
        return {"family": self.family, "C": self.C, "sigma": self.sigma}


def _iterated_exp_one(j: int) -> float:
    x = 1.0
    for _ in range(j):
        x = math.exp(x)
    return x


@dataclass(frozen=True, eq=False)
class RepLog(Profile1D):
    """Repeated-logarithm profile ``C exp(-E(|t|))`` with

    ``E(t) = t^2 / prod_j log_j(a_j t)^{p_j}``, where ``log_0(x) = x`` and
    ``log_{j+1}(x) = log(log_j(x))``.

    Below a validity threshold ``t_th`` the profile is held at its threshold
    value.  ``t_th`` is the smallest point where every iterated logarithm with
    a nonzero exponent is at least 1, moved right to the minimizer of ``E`` so
    the profile is nonincreasing in ``|t|``.
    """

    C: float
    a: tuple
    p: tuple
    family: ClassVar[str] = "replog"
    threshold: float = field(init=False, repr=False)
    _e_threshold: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "C", _check_nonneg("C", self.C))
        a = tuple(float(x) for x in self.a)
        p = tuple(float(x) for x in self.p)
        if len(a) != len(p) or not a:
            raise ValueError("replog needs equally long, nonempty a and p lists")
        if any(not math.isfinite(x) or x <= 0 for x in a):
            raise ValueError("replog a_j must be positive")
        if any(not math.isfinite(x) for x in p):
            raise ValueError("replog p_j must be finite")
        # drop trailing zero exponents; they do not change the profile
        k = len(p)
        while k > 1 and p[k - 1] == 0.0:
            k -= 1
        a, p = a[:k], p[:k]
        if k > 4:
            raise ValueError("replog supports iterated logarithms up to order 3")
        # E must grow without bound for the profile to decay
        lead = [2.0 - p[0]] + [-x for x in p[1:]]
        first = next((x for x in lead if x != 0.0), 0.0)
        if first <= 0:
            raise ValueError("replog exponents give a non-decaying profile")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "p", p)
        t_tower = max(
            _iterated_exp_one(j) / a[j] for j in range(k) if p[j] != 0.0 or j == 0
        )
        t_th = self._locate_threshold(t_tower)
        object.__setattr__(self, "threshold", t_th)
        object.__setattr__(self, "_e_threshold", float(np.exp(self._log_e(np.array([t_th])))[0]))

    @property
    def order(self) -> int:
        return len(self.p) - 1

    def _log_e(self, t):
        """``log E(t)`` for ``t`` at or above the tower threshold."""
        t = np.asarray(t, dtype=float)
        out = 2.0 * np.log(t)
        for j, (aj, pj) in enumerate(zip(self.a, self.p)):
            if pj == 0.0:
                continue
            x = aj * t
            with np.errstate(divide="ignore", invalid="ignore"):
                for _ in range(j):
                    x = np.log(x)
                out = out - pj * np.log(x)
        return out

    def _locate_threshold(self, t_tower):
        u = np.linspace(0.0, 80.0, 8001)
        t = t_tower * np.exp(u)
        le = self._log_e(t)
        i = int(np.argmin(le))
        if i > 0:
            lo, hi = u[max(i - 1, 0)], u[min(i + 1, u.size - 1)]
            for _ in range(100):
                c1 = hi - 0.6180339887498949 * (hi - lo)
                c2 = lo + 0.6180339887498949 * (hi - lo)
                f1, f2 = self._log_e(t_tower * np.exp([c1, c2]))
                if f1 < f2:
                    hi = c2
                else:
                    lo = c1
            u_th = 0.5 * (lo + hi)
        else:
            u_th = 0.0
        # beyond the threshold E has to be nondecreasing
        tail = le[u > u_th]
        if tail.size > 1 and np.any(np.diff(tail) < -1e-9 * np.maximum(1.0, np.abs(tail[1:]))):
            raise ValueError("replog exponent is not monotone beyond its threshold")
        return float(t_tower * math.exp(u_th))

    def exponent(self, t):
        """``E(max(|t|, t_th))``."""
        t = np.maximum(np.abs(np.asarray(t, dtype=float)), self.threshold)
        with np.errstate(over="ignore"):
            return np.exp(self._log_e(t))

    def log_value(self, t):
        return _safe_log(self.C) - self.exponent(t)

    def sup_bound(self):
        return self.C * math.exp(-self._e_threshold)

    def support_radius(self):
        return math.inf if self.C > 0 else 0.0

    def breakpoints(self):
        return np.array([self.threshold])

    def log_moment(self, m):
        if any(x != 0.0 for x in self.p[1:]):
            return None
        # pure power E(t) = t^alpha / a0^p0
        p0, a0 = self.p[0], self.a[0]
        alpha = 2.0 - p0
        scale = a0**p0
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_star = (m * scale / alpha) ** (1.0 / alpha)
            inner = (m / alpha) * (np.log(m * scale / alpha) - 1.0)
            at_th = m * math.log(self.threshold) - self._e_threshold
        core = np.where(t_star >= self.threshold, inner, at_th)
        core = np.where(m > 0, core, -self._e_threshold)
        return _safe_log(self.C) + core

    def to_dict(self):
        return {"family": self.family, "C": self.C, "a": list(self.a), "p": list(self.p)}

    @classmethod
    def nu_family(cls, nu: float, C: float = 1.0) -> "RepLog":
        """``C exp(-t / (log t)^(1+nu))``: quasi-analytic exactly when ``nu <= 0``."""
        return cls(C=C, a=(1.0, 1.0), p=(1.0, 1.0 + nu))


@dataclass(frozen=True, eq=False)
class RhoForm(Profile1D):
    """``w(t) = w_R exp(-int_R^|t| rho(s)/s ds)`` for ``|t| >= R`` and ``w_R`` below.

    ``rho`` is sampled at nodes ``s_0 < ... < s_N`` (``s_0 >= R``), linear in
    ``log s`` between nodes, constant ``rho_0`` on ``[R, s_0]`` and continued
    linearly in ``s`` with the last slope beyond ``s_N``.
    """

    w_R: float
    R: float
    s: tuple
    rho: tuple
    family: ClassVar[str] = "rhoform"

    def __post_init__(self):
        object.__setattr__(self, "w_R", _check_nonneg("w_R", self.w_R))
        object.__setattr__(self, "R", _check_pos("R", self.R))
        s = np.asarray(self.s, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if s.ndim != 1 or s.shape != rho.shape or s.size < 2:
            raise ValueError("rhoform needs at least two (s, rho) samples of equal length")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(rho))):
            raise ValueError("rhoform samples must be finite")
        if np.any(np.diff(s) <= 0) or s[0] < self.R:
            raise ValueError("rhoform grid must be increasing and start at or after R")
        if np.any(rho < 0):
            raise ValueError("rhoform rho must be nonnegative")
        if np.any(np.diff(rho) < -1e-12 * np.maximum(1.0, np.abs(rho[1:]))):
            raise ValueError("rhoform rho must be nondecreasing")
        rho = np.maximum.accumulate(rho)
        object.__setattr__(self, "s", tuple(s.tolist()))
        object.__setattr__(self, "rho", tuple(rho.tolist()))
        sig = np.log(s)
        cum = np.concatenate([[rho[0] * (sig[0] - math.log(self.R))],
                              0.5 * (rho[1:] + rho[:-1]) * np.diff(sig)])
        object.__setattr__(self, "_sig", sig)
        object.__setattr__(self, "_rho", rho)
        object.__setattr__(self, "_cum", np.cumsum(cum))
        object.__setattr__(self, "_kappa", float((rho[-1] - rho[-2]) / (s[-1] - s[-2])))

    @property
    def tail_slope(self) -> float:
        """Slope of the linear continuation of rho beyond the last node."""
        return self._kappa

    def integral(self, t):
        """``Phi(t) = int_R^|t| rho(s)/s ds`` (zero below R)."""
        t = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        sig, rho, cum = self._sig, self._rho, self._cum
        logR = math.log(self.R)
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        head = (t > self.R) & (lt <= sig[0])
        out[head] = rho[0] * (lt[head] - logR)
        mid = (lt > sig[0]) & (lt <= sig[-1])
        if np.any(mid):
            x = lt[mid]
            i = np.clip(np.searchsorted(sig, x) - 1, 0, sig.size - 2)
            d = x - sig[i]
            span = sig[i + 1] - sig[i]
            out[mid] = cum[i] + rho[i] * d + (rho[i + 1] - rho[i]) * d * d / (2.0 * span)
        tail = lt > sig[-1]
        if np.any(tail):
            sN = math.exp(sig[-1])
            k = self._kappa
            out[tail] = cum[-1] + (rho[-1] - k * sN) * (lt[tail] - sig[-1]) + k * (t[tail] - sN)
        return out

    def rho_at(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            ls = np.log(s)
        inside = np.interp(ls, self._sig, self._rho)
        beyond = self._rho[-1] + self._kappa * (s - math.exp(self._sig[-1]))
        return np.where(ls > self._sig[-1], beyond, np.where(s < self.R, 0.0, inside))

    def log_value(self, t):
        return _safe_log(self.w_R) - self.integral(t)

    def sup_bound(self):
        return self.w_R

    def support_radius(self):
        return math.inf if self.w_R > 0 else 0.0

    def breakpoints(self):
        return np.array([self.R, *self.s])

    def to_dict(self):
        return {"family": self.family, "wR": self.w_R, "R": self.R,
                "s": list(self.s), "rho": list(self.rho)}


@dataclass(frozen=True, eq=False)
class Indicator(Profile1D):
    """Characteristic function of ``[-radius, radius]``."""

    radius: float = 1.0
    family: ClassVar[str] = "indicator"

    def __post_init__(self):
        object.__setattr__(self, "radius", _check_nonneg("radius", self.radius))

    def log_value(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return np.where(t <= self.radius, 0.0, -np.inf)

    def sup_bound(self):
        return 1.0

    def support_radius(self):
        return self.radius

    def breakpoints(self):
        return np.array([self.radius]) if self.radius > 0 else np.empty(0)

    def log_moment(self, m):
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m > 0, m * _safe_log(self.radius), 0.0)

    def to_dict(self):
        return {"family": self.family, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Sampled(Profile1D):
    """Tabulated profile.

    ``interp="linear"`` interpolates values linearly in ``t``; ``"loglog"``
    interpolates ``log p`` linearly in ``log |t|`` (positive grids of even
    profiles only) and holds the first value near the origin.  Outside the
    grid the profile is zero (``extrapolation="zero"``) or the nearest end
    value (``"last"``).  ``even=True`` evaluates at ``|t|``.
    """

    grid: tuple
    values: tuple
    extrapolation: str = "zero"
    even: bool = False
    interp: str = "linear"
    family: ClassVar[str] = "sampled"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 1:
            raise ValueError("sampled profile needs equally long grid and values")
        if not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
            raise ValueError("sampled grid must be finite and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite (unbounded construction)")
        if np.any(v < 0):
            raise ValueError("sampled values must be nonnegative")
        if self.extrapolation not in ("zero", "last"):
            raise ValueError("extrapolation must be 'zero' or 'last'")
        if self.interp not in ("linear", "loglog"):
            raise ValueError("interp must be 'linear' or 'loglog'")
        if self.interp == "loglog" and (not self.even or g[0] <= 0):
            raise ValueError("loglog interpolation needs an even profile on a positive grid")
        object.__setattr__(self, "grid", tuple(g.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))
        object.__setattr__(self, "_g", g)
        object.__setattr__(self, "_v", v)

    @property
    def is_even(self):  # type: ignore[override]
        return self.even

    def log_value(self, t):
        t = np.asarray(t, dtype=float)
        if self.even:
            t = np.abs(t)
        g, v = self._g, self._v
        if self.interp == "linear":
            out = _safe_log(np.interp(t, g, v))
            lo, hi = t < g[0], t > g[-1]
        else:
            lv = _safe_log(v)
            finite = np.where(np.isfinite(lv), lv, -1e300)
            with np.errstate(divide="ignore"):
                lt = np.log(np.maximum(t, g[0]))
            out = np.interp(lt, np.log(g), finite)
            out = np.where(out < -1e299, -np.inf, out)
            lo, hi = np.zeros(t.shape, bool), t > g[-1]
        if self.extrapolation == "zero":
            out = np.where(lo | hi, -np.inf, out)
        else:
            out = np.where(lo, _safe_log(v[0]), np.where(hi, _safe_log(v[-1]), out))
        return out

    def sup_bound(self):
        return float(self._v.max())

    def support_radius(self):
        g, v = self._g, self._v
        nz = v > 0
        if not nz.any():
            return 0.0
        if self.extrapolation == "last" and (v[-1] > 0 or (v[0] > 0 and not self.even)):
            return math.inf
        reach = np.abs(g[nz])
        if self.interp == "linear":
            # a nonzero node keeps the interpolant positive up to its neighbours
            idx = np.flatnonzero(nz)
            nb = np.concatenate([idx - 1, idx + 1])
            nb = nb[(nb >= 0) & (nb < g.size)]
            reach = np.concatenate([reach, np.abs(g[nb])])
        return float(reach.max())

    def breakpoints(self):
        return np.unique(np.abs(self._g[self._g != 0]))

    def to_dict(self):
        d = {"family": self.family, "grid": list(self.grid), "values": list(self.values),
             "extrapolation": self.extrapolation}
        if self.even:
            d["even"] = True
        if self.interp != "linear":
            d["interp"] = self.interp
        return d


# ---------------------------------------------------------------------------
# affine maps and bases
# ---------------------------------------------------------------------------


def _check_invertible(L: np.ndarray, what: str):
    n = L.shape[0]
    norm = np.linalg.norm(L, 2)
    det = np.linalg.det(L)
    if norm == 0 or not np.isfinite(det) or abs(det) <= _DET_RTOL * norm**n:
        raise ValueError(f"{what} is singular")


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> L x + b`` with invertible ``L``."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.linear, dtype=float))
        b = np.asarray(self.translation, dtype=float).reshape(-1)
        if L.shape[0] != L.shape[1] or b.shape[0] != L.shape[0]:
            raise DimensionError("affine map needs a square matrix and matching translation")
        _check_invertible(L, "linear part")
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "translation", b)
        object.__setattr__(self, "_inv", np.linalg.inv(L))

    @property
    def dimension(self):
        return self.linear.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def translate(cls, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        return cls(np.eye(y.size), y)

    @classmethod
    def linear_map(cls, L):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        return cls(L, np.zeros(L.shape[0]))

    @classmethod
    def rotation(cls, angle):
        c, s = math.cos(angle), math.sin(angle)
        return cls.linear_map([[c, -s], [s, c]])

    def apply(self, X):
        return np.asarray(X, dtype=float) @ self.linear.T + self.translation

    def inverse_apply(self, X):
        return (np.asarray(X, dtype=float) - self.translation) @ self._inv.T

    def __matmul__(self, other: "AffineMap") -> "AffineMap":
        """Composition ``(self @ other)(x) = self(other(x))``."""
        return AffineMap(self.linear @ other.linear,
                         self.linear @ other.translation + self.translation)

    def dual_transport(self, vectors):
        """Rows ``(L^{-1})^t v`` for each row ``v``."""
        return np.asarray(vectors, dtype=float) @ self._inv


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Rows of ``vectors`` form a basis of R^n."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if V.shape[0] != V.shape[1]:
            raise DimensionError("a basis of R^n needs exactly n vectors of length n")
        _check_invertible(V, "basis")
        object.__setattr__(self, "vectors", V)

    @property
    def dimension(self):
        return self.vectors.shape[0]

    @classmethod
    def standard(cls, n):
        return cls(np.eye(n))

    def transported(self, A: AffineMap) -> "BasisSpec":
        return BasisSpec(A.dual_transport(self.vectors))

    def tolist(self):
        return self.vectors.tolist()


# ---------------------------------------------------------------------------
# weight expressions
# ---------------------------------------------------------------------------


class WeightExpr(ABC):
    """Immutable weight on R^n, evaluated in log space."""

    dimension: int

    @abstractmethod
    def log_eval(self, X) -> np.ndarray:
        """``log w`` at the rows of ``X`` (shape ``(N, n)``)."""

    @abstractmethod
    def bound(self) -> float:
        """Certified global upper bound."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def _points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.dimension == 1 else X.reshape(1, -1)
        if X.shape[-1] != self.dimension:
            raise DimensionError(f"expected points in R^{self.dimension}, got shape {X.shape}")
        return X

    def __call__(self, X):
        with np.errstate(under="ignore"):
            return np.exp(self.log_eval(self._points(X)))

    def log_eval_line(self, t):
        """``log w`` on R^1 at scalar abscissae ``t``."""
        if self.dimension != 1:
            raise DimensionError("log_eval_line needs a weight on R^1")
        return self.log_eval(np.asarray(t, dtype=float).reshape(-1, 1))

    def _certify(self):
        b = self.bound()
        if not (math.isfinite(b) and b >= 0):
            raise ValueError("unbounded weight construction")


@dataclass(frozen=True, eq=False)
class Radial(WeightExpr):
    """``w(x) = p(||x||)``."""

    profile: Profile1D
    dimension: int = 1

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise DimensionError("dimension must be positive")
        object.__setattr__(self, "dimension", int(self.dimension))
        self._certify()

    def log_eval(self, X):
        X = self._points(X)
        r = np.abs(X[:, 0]) if self.dimension == 1 else np.linalg.norm(X, axis=1)
        return self.profile.log_value(r)

    def bound(self):
        return self.profile.sup_bound()

    def to_dict(self):
        return {"kind": "radial", "dimension": self.dimension, "profile": self.profile.to_dict()}


@dataclass(frozen=True, eq=False)
class Tensor(WeightExpr):
    """``w(x) = prod_j p_j(x_j)``."""

    factors: tuple

    def __post_init__(self):
        f = tuple(self.factors)
        if not f:
            raise DimensionError("tensor needs at least one factor")
        object.__setattr__(self, "factors", f)
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return len(self.factors)

    def log_eval(self, X):
        X = self._points(X)
        out = np.zeros(X.shape[0])
        for j, p in enumerate(self.factors):
            out = out + p.log_value(X[:, j])
        return out

    def bound(self):
        return float(np.prod([p.sup_bound() for p in self.factors]))

    def to_dict(self):
        return {"kind": "tensor", "factors": [p.to_dict() for p in self.factors]}


@dataclass(frozen=True, eq=False)
class AffinePullback(WeightExpr):
    """``w(x) = inner(A^{-1} x)``."""

    map: AffineMap
    inner: WeightExpr

    def __post_init__(self):
        if self.map.dimension != self.inner.dimension:
            raise DimensionError("affine map and weight dimensions differ")
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return self.inner.dimension

    def log_eval(self, X):
        return self.inner.log_eval(self.map.inverse_apply(self._points(X)))

    def bound(self):
        return self.inner.bound()

    def to_dict(self):
        return {"kind": "affine", "linear": self.map.linear.tolist(),
                "translation": self.map.translation.tolist(), "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class Scale(WeightExpr):
    c: float
    inner: WeightExpr

    def __post_init__(self):
        object.__setattr__(self, "c", _check_nonneg("c", self.c))
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return self.inner.dimension

    def log_eval(self, X):
        return _safe_log(self.c) + self.inner.log_eval(X)

    def bound(self):
        return self.c * self.inner.bound()

    def to_dict(self):
        return {"kind": "scale", "c": self.c, "inner": self.inner.to_dict()}


def _check_pair(lhs, rhs):
    if lhs.dimension != rhs.dimension:
        raise DimensionError("operands have different dimensions")


@dataclass(frozen=True, eq=False)
class PointwiseMin(WeightExpr):
    lhs: WeightExpr
    rhs: WeightExpr

    def __post_init__(self):
        _check_pair(self.lhs, self.rhs)
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return self.lhs.dimension

    def log_eval(self, X):
        return np.minimum(self.lhs.log_eval(X), self.rhs.log_eval(X))

    def bound(self):
        return min(self.lhs.bound(), self.rhs.bound())

    def to_dict(self):
        return {"kind": "min", "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict()}


@dataclass(frozen=True, eq=False)
class Sum(WeightExpr):
    lhs: WeightExpr
    rhs: WeightExpr

    def __post_init__(self):
        _check_pair(self.lhs, self.rhs)
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return self.lhs.dimension

    def log_eval(self, X):
        return np.logaddexp(self.lhs.log_eval(X), self.rhs.log_eval(X))

    def bound(self):
        return self.lhs.bound() + self.rhs.bound()

    def to_dict(self):
        return {"kind": "sum", "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict()}


@dataclass(frozen=True, eq=False)
class Table(WeightExpr):
    """Tabulated weight on R^1 (not symmetrized)."""

    profile: Sampled

    def __post_init__(self):
        self._certify()

    @property
    def dimension(self):  # type: ignore[override]
        return 1

    @classmethod
    def from_samples(cls, grid, values, extrapolation="zero"):
        return cls(Sampled(tuple(grid), tuple(values), extrapolation=extrapolation))

    def log_eval(self, X):
        return self.profile.log_value(self._points(X)[:, 0])

    def bound(self):
        return self.profile.sup_bound()

    def to_dict(self):
        return {"kind": "table", "grid": list(self.profile.grid),
                "values": list(self.profile.values),
                "extrapolation": self.profile.extrapolation}


def radial(profile: Profile1D, dimension: int = 1) -> Radial:
    return Radial(profile, dimension)


def evaluate(w: WeightExpr, x) -> float:
    """``w(x)`` at a single point ``x`` of length ``w.dimension``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != w.dimension:
        raise DimensionError(f"point has length {x.size}, weight lives on R^{w.dimension}")
    return float(w(x.reshape(1, -1))[0])


def pullback(w: WeightExpr, A: AffineMap) -> WeightExpr:
    """``x -> w(A^{-1} x)``; nested pullbacks collapse into one map."""
    if A.dimension != w.dimension:
        raise DimensionError("affine map and weight dimensions differ")
    if isinstance(w, AffinePullback):
        return AffinePullback(A @ w.map, w.inner)
    return AffinePullback(A, w)


def as_points(x: Sequence[float] | np.ndarray, n: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    return X.reshape(-1, n)


def _profile_power(p: Profile1D, nu: float):
    """``(p^nu, dilation)`` with ``p(t)^nu = p^nu(dilation * t)``."""
    if isinstance(p, ExpDecay):
        return ExpDecay(p.C**nu, nu * p.eps), 1.0
    if isinstance(p, Gaussian):
        return Gaussian(p.C**nu, p.sigma / math.sqrt(nu)), 1.0
    if isinstance(p, RepLog):
        r = math.sqrt(nu)
        return RepLog(p.C**nu, tuple(a / r for a in p.a), p.p), r
    if isinstance(p, RhoForm):
        return RhoForm(p.w_R**nu, p.R, p.s, tuple(nu * x for x in p.rho)), 1.0
    if isinstance(p, Indicator):
        return p, 1.0
    if isinstance(p, Sampled):
        vals = tuple(float(v) ** nu for v in p.values)
        return Sampled(p.grid, vals, p.extrapolation, p.even, p.interp), 1.0
    raise TypeError(f"no closed-form power for {type(p).__name__}")


def power(w: WeightExpr, nu: float) -> WeightExpr:
    """``x -> w(x)^nu`` for ``nu > 0``, kept inside the closed families where possible.

    Repeated-logarithm profiles need a dilation, so their powers come back
    wrapped in an :class:`AffinePullback`.  Sums have no closed form.
    """
    if not nu > 0 or not math.isfinite(nu):
        raise ValueError("power exponent must be positive and finite")
    if isinstance(w, Profile1D):
        w = Radial(w, 1)
    if isinstance(w, Radial):
        q, r = _profile_power(w.profile, nu)
        out = Radial(q, w.dimension)
        n = w.dimension
        return out if r == 1.0 else AffinePullback(AffineMap.linear_map(np.eye(n) / r), out)
    if isinstance(w, Tensor):
        pairs = [_profile_power(p, nu) for p in w.factors]
        out = Tensor(tuple(q for q, _ in pairs))
        r = np.array([s for _, s in pairs])
        return out if np.all(r == 1.0) else AffinePullback(AffineMap.linear_map(np.diag(1.0 / r)), out)
    if isinstance(w, Scale):
        return Scale(w.c**nu, power(w.inner, nu))
    if isinstance(w, AffinePullback):
        return pullback(power(w.inner, nu), w.map)
    if isinstance(w, PointwiseMin):
        return PointwiseMin(power(w.lhs, nu), power(w.rhs, nu))
    if isinstance(w, Table):
        q, _ = _profile_power(w.profile, nu)
        return Table(q)
    raise TypeError(f"no closed-form power for {type(w).__name__}")
