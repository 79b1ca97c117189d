"""Special functions: modified Bessel I_k, the Marchenko-Pastur law, von Mises sampling.

Self-contained numerics for the statistical machinery in the rest of the
package. ``bessel_i`` switches from the ascending power series to the
large-argument asymptotic expansion at x = 15; both branches are validated
against adaptive quadrature of the integral representation in the test
suite, which is kept independent of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["bessel_i", "MpLaw", "mp_law", "mp_density", "mp_cdf", "von_mises_sample"]

# Above this the ascending series needs enough terms that the asymptotic
# expansion is both cheaper and at least as accurate (truncation error
# ~exp(-2x) at optimal order).
_SERIES_SWITCH = 15.0
# exp(x) overflows double just above 709; stay clear of it.
_MAX_ARGUMENT = 700.0


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function of the first kind, integer order.

    Parameters
    ----------
    order : int
        Nonnegative integer order.
    x : float
        Nonnegative argument, at most 700.

    Returns
    -------
    float
        I_order(x), relative error <= 1e-10 over the supported range.
    """
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise DomainError(f"order must be a nonnegative integer, got {order!r}")
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"argument must be nonnegative, got {x!r}")
    if x > _MAX_ARGUMENT:
        raise OverflowError(f"argument {x} exceeds {_MAX_ARGUMENT}; exp(x) would overflow")
    if x <= _SERIES_SWITCH:
        return _series(order, x)
    if order <= 1:
        return _asymptotic(order, x)
    return _miller(order, x)


def _series(order: int, x: float) -> float:
    # Ascending series: all terms positive, so no cancellation at any x.
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    half = 0.5 * x
    t = math.exp(order * math.log(half) - math.lgamma(order + 1))
    total = t
    j = 0
    while t > total * 1e-18:
        j += 1
        t *= half * half / (j * (j + order))
        total += t
    return total


def _asymptotic(order: int, x: float) -> float:
    # I_k(x) ~ exp(x)/sqrt(2 pi x) * sum_m (-1)^m a_m(k) / x^m, truncated at
    # the smallest term. For x > 15 that truncation error is ~exp(-2x).
    mu = 4.0 * order * order
    term = 1.0
    total = 1.0
    m = 0
    while True:
        m += 1
        factor = -(mu - (2 * m - 1) ** 2) / (8.0 * m * x)
        nxt = term * factor
        if abs(nxt) >= abs(term):  # series started diverging
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return math.exp(x) * total / math.sqrt(2.0 * math.pi * x)


def _miller(order: int, x: float) -> float:
    # Downward (Miller) recurrence normalized against the asymptotic I_0,
    # stable for every order. Start high enough that I_start/I_order is
    # negligible: I_m(x)/I_0(x) ~ exp(-m^2/(2x)) for m << x.
    start = order + int(math.sqrt(82.0 * x)) + 10
    above = 0.0
    here = 1e-30
    at_order = 0.0
    for j in range(start, 0, -1):
        below = above + (2.0 * j / x) * here
        above = here
        here = below
        if j - 1 == order:
            at_order = here
        if abs(here) > 1e250:
            scale = 1e-250
            here *= scale
            above *= scale
            at_order *= scale
    # at_order/here = I_order/I_0 is in [0, 1]; scale by I_0 last so the
    # intermediate never overflows even at x near 700.
    return (at_order / here) * _asymptotic(0, x)


@dataclass(frozen=True)
class MpLaw:
    """Marchenko-Pastur law for dimension ratio ``alpha`` (unit variance).

    Support of the continuous part is [(1-sqrt(alpha))^2, (1+sqrt(alpha))^2];
    for alpha > 1 an atom of mass 1 - 1/alpha sits at zero.
    """

    alpha: float
    lower_edge: float
    upper_edge: float
    zero_atom: float


def mp_law(alpha: float) -> MpLaw:
    """Construct the Marchenko-Pastur law with dimension ratio ``alpha``."""
    alpha = float(alpha)
    if math.isnan(alpha) or alpha <= 0.0 or math.isinf(alpha):
        raise DomainError(f"dimension ratio must be a positive real, got {alpha!r}")
    root = math.sqrt(alpha)
    return MpLaw(
        alpha=alpha,
        lower_edge=(1.0 - root) ** 2,
        upper_edge=(1.0 + root) ** 2,
        zero_atom=max(0.0, 1.0 - 1.0 / alpha),
    )


def mp_density(law: MpLaw, x):
    """Continuous MP density at ``x`` (scalar or array); zero off-support."""
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise DomainError("NaN in density argument")
    inside = (x > law.lower_edge) & (x < law.upper_edge)
    dens = np.zeros_like(x)
    xs = x[inside]
    dens[inside] = np.sqrt((law.upper_edge - xs) * (xs - law.lower_edge)) / (
        2.0 * math.pi * law.alpha * xs
    )
    return dens if dens.ndim else float(dens)


# Fixed Gauss-Legendre rule; the CDF integrand below is smooth after the
# sin^2 substitution, so 128 nodes reach machine accuracy.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)


def mp_cdf(law: MpLaw, x: float) -> float:
    """CDF of the MP law at ``x``, including the zero atom when alpha > 1."""
    x = float(x)
    if math.isnan(x):
        raise DomainError("NaN in cdf argument")
    if x < 0.0:
        return 0.0
    if x >= law.upper_edge:
        return 1.0
    if x <= law.lower_edge:
        return law.zero_atom
    return law.zero_atom + _mp_cdf_continuous(law, x)


def _mp_cdf_continuous(law: MpLaw, x: float) -> float:
    # Substitute t = a + (b-a) sin^2(u); the sqrt edge factors become
    # sin(2u)/2 and the integrand is analytic in u.
    a, b = law.lower_edge, law.upper_edge
    width = b - a
    u_hi = math.asin(math.sqrt(min(1.0, (x - a) / width)))
    u = 0.5 * u_hi * (_GL_NODES + 1.0)
    w = 0.5 * u_hi * _GL_WEIGHTS
    t = a + width * np.sin(u) ** 2
    integrand = width**2 * np.sin(2.0 * u) ** 2 / (4.0 * math.pi * law.alpha * t)
    return float(np.dot(w, integrand))


def von_mises_sample(mu: float, kappa: float, rng: np.random.Generator, size=None):
    """Draw from the von Mises distribution on [-pi, pi).

    Uses the Best-Fisher wrapped-Cauchy rejection sampler; ``kappa = 0``
    degenerates to the uniform distribution on the circle. Draws are taken
    from ``rng`` in a deterministic batched order, so a seeded generator
    reproduces the stream exactly.

    Parameters
    ----------
    mu : float
        Center direction in radians.
    kappa : float
        Concentration, >= 0.
    rng : numpy.random.Generator
        Source of randomness; mutated by sampling.
    size : int or tuple, optional
        Output shape; ``None`` returns a scalar.
    """
    kappa = float(kappa)
    if math.isnan(kappa) or kappa < 0.0:
        raise DomainError(f"concentration must be nonnegative, got {kappa!r}")
    shape = () if size is None else (size if isinstance(size, tuple) else (int(size),))
    n = int(np.prod(shape)) if shape else 1

    if kappa == 0.0:
        theta = rng.uniform(-math.pi, math.pi, n)
    else:
        theta = mu + _best_fisher(kappa, rng, n)
    theta = np.mod(theta + math.pi, 2.0 * math.pi) - math.pi
    if size is None:
        return float(theta[0])
    return theta.reshape(shape)


def _best_fisher(kappa: float, rng: np.random.Generator, n: int) -> np.ndarray:
    tau = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
    rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(n)
    filled = 0
    while filled < n:
        m = int((n - filled) * 1.6) + 8
        u1 = rng.uniform(size=m)
        u2 = rng.uniform(size=m)
        u3 = rng.uniform(size=m)
        z = np.cos(math.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        accept = (c * (2.0 - c) - u2 > 0.0) | (np.log(c / u2) + 1.0 - c >= 0.0)
        got = np.sign(u3[accept] - 0.5) * np.arccos(np.clip(f[accept], -1.0, 1.0))
        take = min(len(got), n - filled)
        out[filled : filled + take] = got[:take]
        filled += take
    return out
