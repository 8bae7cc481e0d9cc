"""Laplace transform of the inter-cell interference, L(s) = E[exp(-s I)].

Normalized forms are used throughout: PPP with lambda_b = 1/pi, MCP with
R = 1 and the composite ``scale = lambda_b * R**2``.  In both cases
``-log L(s)`` is a prefactor times an integral ``J(s)`` that only depends
on ``s`` and ``alpha``, so ``J`` is what gets tabulated.
"""
from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

# Pair-correlation constant of the inter-cell parent process for PPP users.
PPP_PAIR_CORR = 12.0 / 5.0

PPP_QUAD_TOL = 1e-8
MCP_INNER_TOL = 1e-6
MCP_OUTER_TOL = 1e-8
# angular integrand is O(1) where it matters; below this it is round-off
_INNER_ABS = 1e-13

TABLE_LOG10_RANGE = (-8.0, 8.0)
TABLE_POINTS_PER_DECADE = 512


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, what: str, achieved: float, requested: float):
        super().__init__(f"{what}: achieved error {achieved:.3g}, requested {requested:.3g}")
        self.achieved = achieved
        self.requested = requested


class LaplaceKind(str, enum.Enum):
    PPP_NORMALIZED = "PPP_normalized"
    MCP_EXACT = "MCP_exact"
    MCP_APPROX = "MCP_approx"


def _check_alpha(alpha):
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2, got {alpha}")


def _as_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s >= 0)):
        raise ValueError("Laplace argument s must be >= 0")
    return s


def _decade_groups(s):
    """Index groups of positive s spanning at most one decade each."""
    pos = np.flatnonzero(s > 0)
    if pos.size == 0:
        return []
    dec = np.floor(np.log10(s[pos])).astype(int)
    return [pos[dec == d] for d in np.unique(dec)]


def _quad_vec(f, a, b, epsabs, epsrel, what):
    val, err, info = integrate.quad_vec(f, a, b, epsabs=epsabs, epsrel=epsrel,
                                        norm="max", limit=4000, full_output=True)
    if not info.success:
        raise QuadratureError(what, float(np.max(err)), max(epsabs, epsrel))
    return val


# -- PPP ---------------------------------------------------------------------

def _ppp_kernel(x, s, alpha, density_rate):
    # (1 - (1 + s x^-a)^-2) (1 - exp(-k x^2)) x, written without overflow at x -> 0
    xa = x**alpha
    tail = s / (xa + s)
    return tail * (1.0 + xa / (xa + s)) * -np.expm1(-density_rate * x * x) * x


def ppp_exponent_integral(s, alpha, quad_tol=PPP_QUAD_TOL, lambda_b=1.0 / math.pi):
    """J(s) = int_0^inf (1-(1+s x^-a)^-2)(1-exp(-(12/5) lambda_b pi x^2)) x dx.

    Vectorized in s.  The default ``lambda_b = 1/pi`` is the normalized model.
    """
    _check_alpha(alpha)
    if not lambda_b > 0:
        raise ValueError("lambda_b must be > 0")
    s = _as_s(s)
    flat = s.ravel()
    out = np.zeros_like(flat)
    unit = 1.0 / math.sqrt(math.pi * lambda_b)
    k = PPP_PAIR_CORR * lambda_b * math.pi
    for idx in _decade_groups(flat / unit**alpha):
        sv = flat[idx]
        x1 = unit * max(2.0, 2.0 * (sv.max() / unit**alpha) ** (1.0 / alpha))
        f = lambda x: _ppp_kernel(x, sv, alpha, k)
        tot = 0.0
        for a, b in ((0.0, unit), (unit, x1), (x1, np.inf)):
            tot = tot + _quad_vec(f, a, b, 0.0, quad_tol, "PPP interference integral")
        out[idx] = tot
    return out.reshape(s.shape)


def laplace_ppp_normalized(s, alpha=4.0, quad_tol=PPP_QUAD_TOL):
    out = np.exp(-2.0 * ppp_exponent_integral(s, alpha, quad_tol))
    return out[()] if out.ndim == 0 else out


def laplace_ppp_general(s, lambda_b, alpha=4.0, quad_tol=PPP_QUAD_TOL):
    """PPP-user interference transform at BS density ``lambda_b`` (un-normalized units)."""
    j = ppp_exponent_integral(s, alpha, quad_tol, lambda_b)
    out = np.exp(-2.0 * math.pi * lambda_b * j)
    return out[()] if out.ndim == 0 else out


# -- MCP ---------------------------------------------------------------------

def _radial_complement(rho, s, delta):
    """1 - G(rho)/G(inf), G(rho) = int_0^rho s t / (s + t^alpha) dt."""
    ra = rho ** (2.0 / delta)
    return special.betainc(1.0 - delta, delta, s / (s + ra))


def _radial(rho, s, delta):
    ra = rho ** (2.0 / delta)
    return special.betainc(delta, 1.0 - delta, ra / (s + ra))


def _disc_miss_fraction(x, s, alpha, inner_tol):
    """h(x, s) = E[s / (s + |x - y|^alpha)], y uniform in the unit disc.

    The angle about the point x is integrated adaptively; the radial part is
    an incomplete beta function.  1 - h is the squared-bracket term of the
    exact MCP transform.
    """
    delta = 2.0 / alpha
    full = s**delta * math.pi / (alpha * math.sin(math.pi * delta))
    if x < 1.0:
        def f(psi):
            rho = x * math.cos(psi) + math.sqrt(1.0 - (x * math.sin(psi)) ** 2)
            return _radial(rho, s, delta)
        v = _quad_vec(f, 0.0, math.pi, _INNER_ABS, inner_tol, "MCP inner integral")
    else:
        # x sin(psi) = sin(phi) removes the square-root endpoint behaviour
        def f(phi):
            sp, cp = math.sin(phi), math.cos(phi)
            q = math.sqrt(x * x - sp * sp)
            lo, hi = q - cp, q + cp
            # difference of complements where they are small, of the CDFs otherwise
            diff = np.where(
                s < lo ** alpha,
                _radial_complement(lo, s, delta) - _radial_complement(hi, s, delta),
                _radial(hi, s, delta) - _radial(lo, s, delta),
            )
            return diff * cp / q
        v = _quad_vec(f, 0.0, math.pi / 2, _INNER_ABS, inner_tol, "MCP inner integral")
    return (2.0 / math.pi) * full * v


def mcp_exponent_integral(s, alpha, inner_tol=MCP_INNER_TOL, outer_tol=MCP_OUTER_TOL):
    """J(s) = int_0^inf (1 - (1 - h(x, s))^2) x dx for the unit-radius MCP."""
    _check_alpha(alpha)
    s = _as_s(s)
    flat = s.ravel()
    out = np.zeros_like(flat)
    for idx in _decade_groups(flat):
        sv = flat[idx]

        def f(x):
            h = _disc_miss_fraction(x, sv, alpha, inner_tol)
            return h * (2.0 - h) * x

        x1 = 2.0 + 2.0 * sv.max() ** (1.0 / alpha)
        tot = 0.0
        for a, b in ((0.0, 1.0), (1.0, 2.0), (2.0, x1), (x1, np.inf)):
            tot = tot + _quad_vec(f, a, b, 0.0, outer_tol, "MCP outer integral")
        out[idx] = tot
    return out.reshape(s.shape)


def laplace_mcp_exact(s, scale, alpha=4.0, quad_tol=MCP_INNER_TOL):
    """Exact MCP transform in normalized units; ``scale = lambda_b R^2``."""
    if not scale > 0:
        raise ValueError("scale = lambda_b R^2 must be > 0")
    j = mcp_exponent_integral(s, alpha, inner_tol=quad_tol)
    out = np.exp(-2.0 * math.pi * scale * j)
    return out[()] if out.ndim == 0 else out


def sinc(x):
    """Normalized sinc, sin(pi x) / (pi x)."""
    return np.sinc(x)


def mcp_approx_constant(alpha):
    delta = 2.0 / alpha
    return (1.0 + delta) / sinc(delta)


def laplace_mcp_approx(s, scale, alpha=4.0):
    """Cluster-collapsed MCP transform exp(-pi scale (1+d)/sinc(d) s^d), d = 2/alpha."""
    _check_alpha(alpha)
    if not scale > 0:
        raise ValueError("scale = lambda_b R^2 must be > 0")
    s = _as_s(s)
    delta = 2.0 / alpha
    out = np.exp(-math.pi * scale * mcp_approx_constant(alpha) * s**delta)
    return out[()] if out.ndim == 0 else out


# -- tabulated evaluator -----------------------------------------------------

class ExponentTable:
    """Monotone-cubic interpolant of log J over log s on a geometric grid.

    Outside the grid J is continued as a power law with the edge slope.
    """

    def __init__(self, log_s, log_j):
        self.log_s = log_s
        self.log_j = log_j
        self._spline = interpolate.PchipInterpolator(log_s, log_j, extrapolate=False)
        self._lo_slope = (log_j[1] - log_j[0]) / (log_s[1] - log_s[0])
        self._hi_slope = (log_j[-1] - log_j[-2]) / (log_s[-1] - log_s[-2])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        pos = s > 0
        ls = np.log(s[pos])
        lj = np.empty_like(ls)
        lo, hi = self.log_s[0], self.log_s[-1]
        below, above = ls < lo, ls > hi
        mid = ~(below | above)
        lj[mid] = self._spline(ls[mid])
        lj[below] = self.log_j[0] + self._lo_slope * (ls[below] - lo)
        lj[above] = self.log_j[-1] + self._hi_slope * (ls[above] - hi)
        out[pos] = np.exp(lj)
        return out


_tables: dict = {}
_tables_lock = threading.Lock()


def exponent_table(kind: LaplaceKind, alpha: float, quad_tol: float,
                   points_per_decade: int = TABLE_POINTS_PER_DECADE,
                   log10_range=TABLE_LOG10_RANGE, lambda_b: float | None = None) -> ExponentTable:
    """Build (once per process) the J table for ``kind`` and ``alpha``.

    ``lambda_b`` selects the un-normalized PPP integral; the grid is then
    shifted by the model's length unit so it covers the same range of
    normalized arguments.
    """
    key = (kind, float(alpha), float(quad_tol), points_per_decade, tuple(log10_range), lambda_b)
    with _tables_lock:
        table = _tables.get(key)
        if table is None:
            lo, hi = log10_range
            n = int(round((hi - lo) * points_per_decade)) + 1
            s = np.logspace(lo, hi, n)
            if kind is LaplaceKind.PPP_NORMALIZED and lambda_b is not None:
                s = s * (math.pi * lambda_b) ** (-alpha / 2.0)
                j = ppp_exponent_integral(s, alpha, quad_tol, lambda_b)
            elif kind is LaplaceKind.PPP_NORMALIZED:
                j = ppp_exponent_integral(s, alpha, quad_tol)
            elif kind is LaplaceKind.MCP_EXACT:
                j = mcp_exponent_integral(s, alpha, inner_tol=quad_tol)
            else:
                raise ValueError(f"{kind} has a closed form and needs no table")
            table = ExponentTable(np.log(s), np.log(j))
            _tables[key] = table
    return table


@dataclass(frozen=True)
class LaplaceEvaluator:
    """Callable ``s -> L(s)`` for one normalized interference model.

    ``scale`` is lambda_b R^2 for the MCP kinds and unused for PPP.  Calls go
    through a memoized table of the exponent integral (built on first use,
    under a lock); ``direct`` bypasses the table.
    """

    model_kind: LaplaceKind
    alpha: float = 4.0
    scale: float | None = None
    quad_tol: float | None = None
    points_per_decade: int = TABLE_POINTS_PER_DECADE
    _table: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "model_kind", LaplaceKind(self.model_kind))
        _check_alpha(self.alpha)
        if self.model_kind is LaplaceKind.PPP_NORMALIZED:
            if self.scale is not None:
                raise ValueError("normalized PPP evaluator takes no scale")
            default_tol = PPP_QUAD_TOL
        else:
            if self.scale is None or not self.scale > 0:
                raise ValueError("MCP evaluators need scale = lambda_b R^2 > 0")
            default_tol = MCP_INNER_TOL
        if self.quad_tol is None:
            object.__setattr__(self, "quad_tol", default_tol)

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    def _prefactor(self):
        if self.model_kind is LaplaceKind.PPP_NORMALIZED:
            return 2.0
        return 2.0 * math.pi * self.scale

    def table(self) -> ExponentTable:
        if not self._table:
            self._table.append(exponent_table(self.model_kind, self.alpha, self.quad_tol,
                                              self.points_per_decade))
        return self._table[0]

    def prepare(self) -> "LaplaceEvaluator":
        """Populate the table before handing the evaluator to worker threads."""
        if self.model_kind is not LaplaceKind.MCP_APPROX:
            self.table()
        return self

    def __call__(self, s):
        s = _as_s(s)
        if self.model_kind is LaplaceKind.MCP_APPROX:
            return laplace_mcp_approx(s, self.scale, self.alpha)
        out = np.exp(-self._prefactor() * self.table()(s))
        return out[()] if out.ndim == 0 else out

    def direct(self, s):
        if self.model_kind is LaplaceKind.PPP_NORMALIZED:
            return laplace_ppp_normalized(s, self.alpha, self.quad_tol)
        if self.model_kind is LaplaceKind.MCP_EXACT:
            return laplace_mcp_exact(s, self.scale, self.alpha, self.quad_tol)
        return laplace_mcp_approx(s, self.scale, self.alpha)


class RawPppLaplace:
    """Tabulated PPP-user transform in physical units at BS density ``lambda_b``."""

    def __init__(self, lambda_b: float, alpha: float = 4.0, quad_tol: float = PPP_QUAD_TOL):
        self.lambda_b = lambda_b
        self.alpha = alpha
        self._table = exponent_table(LaplaceKind.PPP_NORMALIZED, alpha, quad_tol,
                                     lambda_b=float(lambda_b))

    def __call__(self, s):
        s = _as_s(s)
        out = np.exp(-2.0 * math.pi * self.lambda_b * self._table(s))
        return out[()] if out.ndim == 0 else out


def deterministic_laplace(i_const: float):
    """L(s) = exp(-s I) for a fixed interference level, used with the fading oracle."""
    if not i_const >= 0:
        raise ValueError("interference level must be >= 0")
    return lambda s: np.exp(-np.asarray(s, dtype=float) * i_const)


def no_interference(s):
    return np.ones_like(np.asarray(s, dtype=float))
