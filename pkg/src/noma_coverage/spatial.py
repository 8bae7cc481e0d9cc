"""Spatial models: BS/user geometry and serving-distance laws.

Two user layouts are supported on top of a PPP of base stations:

* ``PPP``: users form an independent PPP, nearest-BS association.  The
  serving distance is approximately Rayleigh with the Voronoi area
  correction ``c = 5/4``.
* ``MCP``: each BS has its users uniform in a disc of radius ``R``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

VORONOI_C = 5.0 / 4.0

# Truncation of the PPP distance law for quadrature: 1 - F(r_max) = 1e-8.
PPP_TAIL_MASS = 1e-8

DEFAULT_LOAD_FACTOR = 100.0
MIN_LOAD_FACTOR = 10.0


class ConfigError(ValueError):
    """Invalid model, simulation or experiment configuration."""


class ModelKind(str, enum.Enum):
    PPP = "PPP"
    MCP = "MCP"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ConfigError(f"unknown model kind {value!r} (expected PPP or MCP)") from None


@dataclass(frozen=True)
class ModelConfig:
    """Spatial model parameters.

    ``lambda_u`` is only meaningful for PPP; it defaults to 100 BS densities.
    ``R`` is only meaningful for MCP.  Transmit power is fixed to 1 and has
    no field since it cancels from every SIR.
    """

    kind: ModelKind
    lambda_b: float = 0.001
    alpha: float = 4.0
    lambda_u: float | None = None
    R: float | None = None
    c: float = field(default=VORONOI_C)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if not (math.isfinite(self.alpha) and self.alpha > 2):
            raise ConfigError(f"alpha must be > 2, got {self.alpha}")
        if not (math.isfinite(self.lambda_b) and self.lambda_b > 0):
            raise ConfigError(f"lambda_b must be > 0, got {self.lambda_b}")
        if self.c != VORONOI_C:
            raise ConfigError(f"c is fixed to 5/4, got {self.c}")
        if self.kind is ModelKind.MCP:
            if self.R is None or not (math.isfinite(self.R) and self.R > 0):
                raise ConfigError(f"MCP model needs a cluster radius R > 0, got {self.R}")
        else:
            if self.lambda_u is None:
                object.__setattr__(self, "lambda_u", DEFAULT_LOAD_FACTOR * self.lambda_b)
            if not self.lambda_u >= MIN_LOAD_FACTOR * self.lambda_b:
                raise ConfigError(
                    f"lambda_u must be >= {MIN_LOAD_FACTOR:g} * lambda_b "
                    f"(heavily loaded network), got {self.lambda_u}"
                )

    @classmethod
    def ppp(cls, lambda_b: float = 0.001, alpha: float = 4.0, lambda_u: float | None = None):
        return cls(ModelKind.PPP, lambda_b=lambda_b, alpha=alpha, lambda_u=lambda_u)

    @classmethod
    def mcp(cls, lambda_b: float = 0.001, R: float = 10.0, alpha: float = 4.0):
        return cls(ModelKind.MCP, lambda_b=lambda_b, alpha=alpha, R=R)

    @property
    def scale(self) -> float:
        """Dimensionless lambda_b * R**2 that MCP coverage depends on."""
        if self.kind is not ModelKind.MCP:
            raise ConfigError("scale = lambda_b * R^2 is defined for the MCP model only")
        return self.lambda_b * self.R**2

    def length_unit(self) -> float:
        """Length that maps this model onto its normalized form.

        PPP is normalized to lambda_b = 1/pi, MCP to R = 1.
        """
        if self.kind is ModelKind.PPP:
            return 1.0 / math.sqrt(math.pi * self.lambda_b)
        return self.R

    def normalized(self) -> "ModelConfig":
        if self.kind is ModelKind.PPP:
            return ModelConfig.ppp(1.0 / math.pi, self.alpha,
                                   self.lambda_u / (math.pi * self.lambda_b))
        return ModelConfig.mcp(self.scale, 1.0, self.alpha)

    def upper_bound(self) -> float:
        """Support bound of the serving distance (PPP: truncated at 1 - 1e-8 mass)."""
        if self.kind is ModelKind.MCP:
            return self.R
        return math.sqrt(-math.log(PPP_TAIL_MASS) / (self.c * math.pi * self.lambda_b))


@dataclass(frozen=True)
class OrderedDistancePair:
    r1: float
    r2: float

    def __post_init__(self):
        if not (self.r1 >= 0 and self.r2 >= self.r1 and math.isfinite(self.r2)):
            raise ValueError(f"need 0 <= r1 <= r2 < inf, got ({self.r1}, {self.r2})")

    def check_model(self, model: ModelConfig) -> None:
        if model.kind is ModelKind.MCP and self.r2 > model.R:
            raise ValueError(f"r2={self.r2} exceeds the cluster radius R={model.R}")


def db_to_linear(t_db):
    return 10.0 ** (np.asarray(t_db, dtype=float) / 10.0)


def linear_to_db(t):
    return 10.0 * np.log10(t)


@dataclass(frozen=True)
class SirThreshold:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"SIR threshold must be > 0, got {self.T}")

    @classmethod
    def from_db(cls, t_db: float) -> "SirThreshold":
        return cls(float(db_to_linear(t_db)))

    @property
    def db(self) -> float:
        return float(linear_to_db(self.T))


def _ppp_rate(model: ModelConfig) -> float:
    return model.c * math.pi * model.lambda_b


def distance_pdf(model: ModelConfig, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be >= 0")
    if model.kind is ModelKind.PPP:
        k = _ppp_rate(model)
        out = 2.0 * k * x * np.exp(-k * x * x)
    else:
        R = model.R
        out = np.where(x <= R, 2.0 * x / R**2, 0.0)
    return out[()] if out.ndim == 0 else out


def distance_cdf(model: ModelConfig, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be >= 0")
    if model.kind is ModelKind.PPP:
        out = -np.expm1(-_ppp_rate(model) * x * x)
    else:
        out = np.minimum(x * x / model.R**2, 1.0)
    return out[()] if out.ndim == 0 else out


def sample_distance(model: ModelConfig, u):
    """Inverse-CDF sample of the serving distance for uniform variates ``u``."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("uniform variates must lie in (0, 1)")
    if model.kind is ModelKind.PPP:
        out = np.sqrt(-np.log1p(-u) / _ppp_rate(model))
    else:
        out = model.R * np.sqrt(u)
    return out[()] if out.ndim == 0 else out


def joint_ordered_pdf(model: ModelConfig, r1, r2):
    """Density of (near, far) distances for two i.i.d. users: 2 f(r1) f(r2) 1(r1 < r2)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    out = np.where(r1 < r2, 2.0 * distance_pdf(model, r1) * distance_pdf(model, r2), 0.0)
    return out[()] if out.ndim == 0 else out


def ordering_probability_conditional(r1, r2, alpha):
    """P(h1 r1^-alpha > h2 r2^-alpha) for unit-mean exponential h1, h2."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if np.any(r2 <= 0):
        raise ValueError("degenerate pair: r2 must be > 0")
    out = 1.0 / (1.0 + (r1 / r2) ** alpha)
    return out[()] if out.ndim == 0 else out


def ordering_probability(model: ModelConfig, tol: float = 1e-10) -> float:
    """Unconditional probability that the near user is also the ISP-stronger one."""
    from scipy import integrate

    # r1 = u r2 separates the integral; only the shape of f matters.
    alpha = model.alpha
    ub = model.upper_bound()

    def inner(r2):
        val, _ = integrate.quad(
            lambda u: ordering_probability_conditional(u, 1.0, alpha)
            * distance_pdf(model, u * r2) * r2,
            0.0, 1.0, epsabs=tol, epsrel=tol,
        )
        return val * distance_pdf(model, r2)

    val, _ = integrate.quad(inner, 0.0, ub, epsabs=tol, epsrel=tol, limit=200)
    return 2.0 * val
