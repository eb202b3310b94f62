"""Fading-channel models, adaptive-quadrature expectations, and the
inverse-gain fractional moments that parameterize every scheduling threshold.

A channel model describes the distribution of the instantaneous gain g > 0
(power units): energy spent to push b bits through a slot with gain g is
(2^b - 1)/g, so the statistics of 1/g drive every scheduling decision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

# Upper-tail probability mass dropped when truncating integration domains.
TAIL_MASS = 1e-12
# Relative tolerance requested from the adaptive quadrature.
QUAD_REL_TOL = 1e-10


class NonIntegrable(ArithmeticError):
    """The requested expectation does not converge (e.g. E[1/g] with too much
    probability mass near g = 0)."""


class ChannelModel:
    """Common interface for gain distributions.

    Subclasses are immutable and safe to share across workers; sampling takes
    an explicit caller-owned RNG.
    """

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def spec(self) -> str:
        """Canonical parse_channel_spec() string for this model."""
        raise NotImplementedError

    def pdf(self, g):
        raise NotImplementedError

    def cdf(self, g):
        raise NotImplementedError

    def ppf(self, u):
        """Inverse CDF (quantile function)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """Draw i.i.d. gains using the caller's RNG state."""
        raise NotImplementedError

    def scaled(self, c: float) -> "ChannelModel":
        """Model of the scaled gain c*g."""
        raise NotImplementedError

    def equiprobable_nodes(self, n: int) -> np.ndarray:
        """n gain values at the midpoints of equal-probability cells.

        Used as fixed quadrature nodes (each with weight 1/n) wherever the
        same expectation structure is evaluated many times.
        """
        u = (np.arange(n) + 0.5) / n
        return np.asarray(self.ppf(u), dtype=float)


@dataclass(frozen=True)
class TruncatedExponential(ChannelModel):
    """Exponential(rate) gain conditioned on g >= floor.

    Density rate*exp(-rate*(g - floor)) for g >= floor, else 0.  The floor
    keeps E[1/g] finite while preserving the exponential tail.
    """

    rate: float
    floor: float

    def __post_init__(self):
        if not (self.rate > 0 and self.floor > 0):
            raise ValueError("TruncatedExponential requires rate > 0 and floor > 0")

    @property
    def support(self):
        return (self.floor, math.inf)

    @property
    def spec(self):
        return f"truncexp:lambda={self.rate:g},gamma0={self.floor:g}"

    def pdf(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= self.floor, self.rate * np.exp(-self.rate * (g - self.floor)), 0.0)

    def cdf(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= self.floor, 1.0 - np.exp(-self.rate * (g - self.floor)), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return self.floor - np.log1p(-u) / self.rate

    def sample(self, rng, size=None):
        # Memorylessness: conditioning an exponential on g >= floor just
        # shifts it by the floor.
        return self.floor + rng.exponential(1.0 / self.rate, size)

    def scaled(self, c):
        return TruncatedExponential(self.rate / c, self.floor * c)


@dataclass(frozen=True)
class GammaDiversity(ChannelModel):
    """Gamma(shape, scale) gain; shape = N models an N-branch diversity
    receiver over Rayleigh fading.

    Any shape > 0 is a valid distribution, but E[1/g] (and hence every
    scheduling threshold) is finite only for shape > 1; expectations that
    diverge raise NonIntegrable.
    """

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("GammaDiversity requires shape > 0 and scale > 0")

    @property
    def support(self):
        return (0.0, math.inf)

    @property
    def spec(self):
        return f"gamma:k={self.shape:g},theta={self.scale:g}"

    def pdf(self, g):
        return stats.gamma.pdf(g, self.shape, scale=self.scale)

    def cdf(self, g):
        return stats.gamma.cdf(g, self.shape, scale=self.scale)

    def ppf(self, u):
        return stats.gamma.ppf(u, self.shape, scale=self.scale)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, self.scale, size)

    def scaled(self, c):
        return GammaDiversity(self.shape, self.scale * c)


@dataclass(frozen=True)
class DegenerateTest(ChannelModel):
    """Point mass at a single gain value; for tests only.

    Strict inequalities among the fractional moments relax to equalities
    because there is no fading at all.
    """

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("DegenerateTest requires value > 0")

    @property
    def support(self):
        return (self.value, self.value)

    @property
    def spec(self):
        return f"degenerate:g0={self.value:g}"

    def pdf(self, g):
        raise NotImplementedError("point mass has no density")

    def cdf(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g >= self.value, 1.0, 0.0)

    def ppf(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value)

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def scaled(self, c):
        return DegenerateTest(self.value * c)


def expect(model: ChannelModel, f, points: tuple = ()) -> float:
    """E[f(g)] by adaptive quadrature at relative tolerance QUAD_REL_TOL.

    The domain is truncated at the 1 - TAIL_MASS quantile; interior
    breakpoints of a piecewise integrand can be passed via ``points``.
    Raises NonIntegrable when the adaptive scheme fails to converge.
    """
    if isinstance(model, DegenerateTest):
        return float(f(model.value))

    lo = model.support[0]
    hi = float(model.ppf(1.0 - TAIL_MASS))
    interior = sorted(p for p in points if lo < p < hi)

    def integrand(g):
        return f(g) * model.pdf(g)

    out = integrate.quad(
        integrand, lo, hi,
        points=interior or None,
        epsabs=1e-12, epsrel=QUAD_REL_TOL, limit=200,
        full_output=1,
    )
    val, abserr = out[0], out[1]
    if len(out) > 3:  # quadpack attached a trouble message
        reason = str(out[3]).splitlines()[0].rstrip(". ")
        raise NonIntegrable(f"expectation did not converge for {model.spec}: {reason}")
    if not np.isfinite(val) or abserr > 1e-6 * max(abs(val), 1e-6):
        raise NonIntegrable(
            f"expectation did not converge for {model.spec} "
            f"(value={val!r}, error estimate={abserr!r})"
        )
    return float(val)


@dataclass(frozen=True)
class MomentTable:
    """Fractional moments of the inverse gain and their running geometric means.

    nu[m-1] holds nu_m = (E[(1/g)^(1/m)])^m for m = 1..M; nu_inf is the common
    limit exp(E[ln(1/g)]); gmean[m-1] = (nu_1 * ... * nu_m)^(1/m).  For any
    nondegenerate gain distribution both sequences are strictly decreasing and
    bounded below by nu_inf.
    """

    nu: np.ndarray
    nu_inf: float
    gmean: np.ndarray

    def __post_init__(self):
        self.nu.setflags(write=False)
        self.gmean.setflags(write=False)

    @property
    def m_max(self) -> int:
        return len(self.nu)

    @property
    def nu1(self) -> float:
        return float(self.nu[0])

    def geo(self, m: int) -> float:
        """Geometric mean of nu_1..nu_m."""
        return float(self.gmean[m - 1])


def moments(model: ChannelModel, M: int) -> MomentTable:
    """Compute nu_1..nu_M, nu_inf, and the running geometric means.

    Raises NonIntegrable when E[1/g] diverges (too much mass near g = 0).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    nu = np.empty(M)
    for m in range(1, M + 1):
        nu[m - 1] = expect(model, lambda g: np.asarray(g, dtype=float) ** (-1.0 / m)) ** m
    nu_inf = math.exp(expect(model, lambda g: -np.log(g)))
    gmean = np.exp(np.cumsum(np.log(nu)) / np.arange(1, M + 1))
    gmean[0] = nu[0]  # the one-term geometric mean, free of exp/log roundoff
    return MomentTable(nu=nu, nu_inf=nu_inf, gmean=gmean)


def parse_channel_spec(text: str) -> ChannelModel:
    """Build a channel model from a spec string.

    Formats: ``truncexp:lambda=<rate>,gamma0=<floor>`` and
    ``gamma:k=<shape>,theta=<scale>`` (``degenerate:g0=<value>`` is accepted
    for test tooling).
    """
    try:
        kind, _, arg_text = text.partition(":")
        kind = kind.strip().lower()
        args = {}
        if arg_text:
            for item in arg_text.split(","):
                key, _, raw = item.partition("=")
                args[key.strip().lower()] = float(raw)
        model = None
        if kind == "truncexp":
            model = TruncatedExponential(rate=args.pop("lambda"), floor=args.pop("gamma0"))
        elif kind == "gamma":
            model = GammaDiversity(shape=args.pop("k"), scale=args.pop("theta", 1.0))
        elif kind == "degenerate":
            model = DegenerateTest(value=args.pop("g0"))
        if model is not None:
            if args:
                raise ValueError(f"unknown parameter(s) {sorted(args)} for {kind!r}")
            return model
    except (KeyError, ValueError) as exc:
        raise ValueError(f"invalid channel spec {text!r}: {exc}") from exc
    raise ValueError(
        f"invalid channel spec {text!r}: expected "
        "'truncexp:lambda=...,gamma0=...' or 'gamma:k=...,theta=...'"
    )
