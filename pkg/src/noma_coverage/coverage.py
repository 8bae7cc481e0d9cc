"""Analytic SIR coverage of a 2-user uplink NOMA pair.

Conditional coverage given the near/far distances has a closed form for
Rayleigh fading; the unconditional value integrates it against the ordered
joint distance density over ``0 < r1 < r2 < ub``.

Schemes:

* ISP: SIC order follows the instantaneous received powers.
* MSP: the near user is always decoded first.
* MSP_AD: decoding follows ISP, but the first decoded message is always
  attributed to the near user, so success also needs the orderings to agree.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .laplace import (
    LaplaceEvaluator,
    LaplaceKind,
    QuadratureError,
    RawPppLaplace,
)
from .spatial import ConfigError, ModelConfig, ModelKind, OrderedDistancePair, distance_pdf

DEFAULT_TOL = 1e-4

# The cluster-collapse approximation is used up to this lambda_b R^2.
AUTO_APPROX_MAX_SCALE = 0.1


class RankingScheme(str, enum.Enum):
    ISP = "ISP"
    MSP = "MSP"
    MSP_AD = "MSP_AD"


class UserRole(str, enum.Enum):
    NEAR = "near"
    FAR = "far"


class LaplaceVariant(str, enum.Enum):
    AUTO = "auto"
    EXACT = "exact"
    APPROX = "approx"


SCHEMES = tuple(RankingScheme)
ROLES = tuple(UserRole)


@dataclass(frozen=True)
class CoverageEstimate:
    value: float
    method: str
    ci_halfwidth: float = 0.0
    trials: int = 0
    seed: int | None = None
    tol: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"coverage value {self.value} outside [0, 1]")
        if not self.ci_halfwidth >= 0:
            raise ValueError("ci_halfwidth must be >= 0")


# -- conditional coverage ----------------------------------------------------

def conditional_coverages(r1, r2, T, alpha, laplace: Callable):
    """All six conditional coverages, stacked as ``[scheme, role, ...]``.

    ``r1``, ``r2`` and ``T`` broadcast against each other.  ``laplace`` maps
    an array of ``s`` to ``L(s)``.
    """
    r1, r2, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, r2, T)))
    ra1 = r1**alpha
    ra2 = r2**alpha
    beta = (r1 / r2) ** alpha
    c_a = 1.0 / (1.0 + T * beta)  # 1/(1+a), a = T (r1/r2)^alpha
    c_b = beta / (beta + T)  # 1/(1+b), b = T (r2/r1)^alpha
    c_beta = 1.0 / (1.0 + beta)

    l_near1 = laplace(T * ra1)
    l_far1 = laplace(T * ra2)
    l_near2 = laplace(T * (ra2 + ra1) + T * T * ra2)
    l_far2 = laplace(T * (ra1 + ra2) + T * T * ra1)

    below = T < 1.0
    l3 = np.zeros(T.shape)
    if np.any(below):
        tb = T[below]
        l3[below] = laplace(tb / (1.0 - tb) * (ra1[below] + ra2[below]))
    # 1 - 1/(1+a) - 1/(1+b) and 1/(1+beta) - 1/(1+a), both <= 0 for T < 1
    coef_isp = np.where(below, (T * T - 1.0) * c_a * c_b, 0.0)
    coef_ad = np.where(below, (T - 1.0) * beta * c_beta * c_a, 0.0)

    isp_near = c_a * l_near1 + c_b * l_near2 + coef_isp * l3
    isp_far = c_b * l_far1 + c_a * l_far2 + coef_isp * l3
    msp_near = c_a * l_near1
    msp_far = c_a * l_far2
    ad_near = msp_near + coef_ad * l3
    ad_far = msp_far + coef_ad * l3
    return np.stack([
        np.stack([isp_near, isp_far]),
        np.stack([msp_near, msp_far]),
        np.stack([ad_near, ad_far]),
    ])


@dataclass(frozen=True)
class ConditionalCoverageInputs:
    pair: OrderedDistancePair
    T: float
    alpha: float
    laplace: Callable

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be > 0")
        if not self.pair.r2 > 0:
            raise ValueError("r2 must be > 0")

    @property
    def beta(self) -> float:
        return (self.pair.r1 / self.pair.r2) ** self.alpha

    @property
    def a(self) -> float:
        return self.T * self.beta

    @property
    def b(self) -> float:
        return self.T / self.beta if self.beta > 0 else math.inf

    def _all(self):
        return conditional_coverages(self.pair.r1, self.pair.r2, self.T, self.alpha, self.laplace)


def _pick(scheme, role):
    i = SCHEMES.index(RankingScheme(scheme))
    j = ROLES.index(UserRole(role))
    return lambda inp: float(inp._all()[i, j])


cond_cov_isp_near = _pick("ISP", "near")
cond_cov_isp_far = _pick("ISP", "far")
cond_cov_msp_near = _pick("MSP", "near")
cond_cov_msp_far = _pick("MSP", "far")
cond_cov_msp_ad_near = _pick("MSP_AD", "near")
cond_cov_msp_ad_far = _pick("MSP_AD", "far")


def conditional_coverage(scheme, role, inp: ConditionalCoverageInputs) -> float:
    return _pick(scheme, role)(inp)


# -- evaluator selection -----------------------------------------------------

def resolve_variant(model: ModelConfig, variant=LaplaceVariant.AUTO) -> LaplaceVariant:
    variant = LaplaceVariant(variant)
    if model.kind is ModelKind.PPP:
        return LaplaceVariant.EXACT
    if variant is LaplaceVariant.AUTO:
        return LaplaceVariant.APPROX if model.scale <= AUTO_APPROX_MAX_SCALE else LaplaceVariant.EXACT
    return variant


def laplace_for(model: ModelConfig, variant=LaplaceVariant.AUTO) -> LaplaceEvaluator:
    """Normalized interference evaluator matching ``model``."""
    variant = resolve_variant(model, variant)
    if model.kind is ModelKind.PPP:
        return LaplaceEvaluator(LaplaceKind.PPP_NORMALIZED, model.alpha)
    kind = LaplaceKind.MCP_APPROX if variant is LaplaceVariant.APPROX else LaplaceKind.MCP_EXACT
    return LaplaceEvaluator(kind, model.alpha, scale=model.scale)


def _check_evaluator(model: ModelConfig, laplace: LaplaceEvaluator):
    if not isinstance(laplace, LaplaceEvaluator):
        return
    if laplace.alpha != model.alpha:
        raise ConfigError(f"evaluator alpha {laplace.alpha} != model alpha {model.alpha}")
    if model.kind is ModelKind.PPP:
        if laplace.model_kind is not LaplaceKind.PPP_NORMALIZED:
            raise ConfigError(f"{laplace.model_kind.value} evaluator used with a PPP model")
    else:
        if laplace.model_kind is LaplaceKind.PPP_NORMALIZED:
            raise ConfigError("PPP evaluator used with an MCP model")
        if not math.isclose(laplace.scale, model.scale, rel_tol=1e-12):
            raise ConfigError(f"evaluator scale {laplace.scale} != lambda_b R^2 = {model.scale}")


# -- unconditional coverage --------------------------------------------------

def _integrate_wedge(pdf, ub, T, alpha, laplace, tol):
    """2 * int_0^ub int_0^r2 cond(r1, r2) f(r1) f(r2) dr1 dr2 for all schemes/roles.

    Every output shares one adaptive subdivision, so orderings that hold
    pointwise in the integrand survive the quadrature exactly.
    """
    T = np.asarray(T, dtype=float)
    eps = tol / 4.0
    # the pdf is O(1/ub); scale absolute tolerances to the [0, 1] probability scale
    n_eval = [0]

    def inner(r2):
        if r2 <= 0.0:
            return np.zeros((3, 2) + T.shape)
        f2 = pdf(r2)

        def g(r1):
            n_eval[0] += 1
            return conditional_coverages(r1, r2, T, alpha, laplace) * pdf(r1)

        val, err, info = integrate.quad_vec(g, 0.0, r2, epsabs=eps / ub, epsrel=0.0,
                                            norm="max", limit=2000, full_output=True)
        if not info.success:
            raise QuadratureError("coverage inner integral", float(np.max(err)), eps)
        return 2.0 * f2 * val

    val, err, info = integrate.quad_vec(inner, 0.0, ub, epsabs=eps, epsrel=0.0,
                                        norm="max", limit=2000, full_output=True)
    if not info.success:
        raise QuadratureError("coverage outer integral", float(np.max(err)), eps)
    return val, float(np.max(err)), n_eval[0]


def coverage_table(model: ModelConfig, T, laplace=None, tol: float = DEFAULT_TOL,
                   variant=LaplaceVariant.AUTO, normalize: bool = True):
    """Coverage for every scheme/role at thresholds ``T`` (linear).

    Returns ``(values, info)`` with ``values[scheme, role, k]``.  With
    ``normalize=False`` the integral is carried out in physical units
    instead (distances in metres, transform of the raw model); the two
    routes must agree, which is how scale invariance is checked.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~(T > 0)):
        raise ValueError("thresholds must be > 0")
    alpha = model.alpha
    if normalize:
        norm = model.normalized()
        if laplace is None:
            laplace = laplace_for(model, variant)
        _check_evaluator(norm, laplace)
        if isinstance(laplace, LaplaceEvaluator):
            laplace.prepare()
        pdf = lambda r: distance_pdf(norm, r)
        ub = norm.upper_bound()
        L = laplace
    else:
        if laplace is not None:
            raise ValueError("the physical-units route builds its own transform")
        pdf = lambda r: distance_pdf(model, r)
        ub = model.upper_bound()
        if model.kind is ModelKind.PPP:
            L = RawPppLaplace(model.lambda_b, alpha)
        else:
            base = laplace_for(model, variant).prepare()
            r_alpha = model.R**alpha
            L = lambda s: base(np.asarray(s) / r_alpha)
    t0 = time.perf_counter()
    val, err, n_eval = _integrate_wedge(pdf, ub, T, alpha, L, tol)
    info = {
        "error_estimate": err,
        "evaluations": n_eval,
        "wall_ms": 1e3 * (time.perf_counter() - t0),
        "variant": resolve_variant(model, variant).value,
    }
    return np.clip(val, 0.0, 1.0), info


def coverage(model: ModelConfig, scheme, role, T, laplace=None, tol: float = DEFAULT_TOL,
             variant=LaplaceVariant.AUTO) -> CoverageEstimate:
    """Coverage probability P(SIR > T) for one scheme and user role."""
    T = float(getattr(T, "T", T))
    values, info = coverage_table(model, [T], laplace, tol, variant)
    i = SCHEMES.index(RankingScheme(scheme))
    j = ROLES.index(UserRole(role))
    return CoverageEstimate(float(values[i, j, 0]), "Analytic", tol=tol, meta=info)
