"""Special-function kernel for the spectral-amplitude gain.

Evaluates the Gamma function and Kummer's confluent hypergeometric function
M(a, 1; z) for z <= 0, the two ingredients of the closed-form gain.  Modified
Bessel functions I0/I1 are provided as well; they only serve as the
independent oracle for the Ephraim-Malah special case and are not used by the
gain itself.

M(a, 1; z) strategy: the Kummer transformation M(a,1;z) = e^z M(1-a,1;-z)
turns the alternating series at negative z into an ascending series whose
terms do not change sign once past the first few (and not at all for a <= 1),
so there is no catastrophic cancellation.  e^z is folded into the leading
term, which keeps every partial sum in double range even for large |z|.
Beyond the switch threshold an asymptotic expansion in 1/z is used instead;
its truncation error is estimated from the first neglected term and the
series path is used as a fallback whenever that estimate is not good enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError

# |a| beyond this is outside every reachable gain parameterization.
_A_LIMIT = 50.0
# Largest |z| for which the transformed-series fallback stays in double range.
_SERIES_Z_LIMIT = 600.0
# Asymptotic sums are accepted when the first neglected term is this small.
_ASYM_ACCEPT = 1e-9
_ASYM_MAX_TERMS = 60


@dataclass(frozen=True)
class KummerEvalPolicy:
    """Evaluation budget and switching point for M(a, 1; z)."""

    series_term_cap: int = 400
    series_tolerance: float = 1e-12
    asymptotic_switch_threshold: float = 30.0

    def __post_init__(self):
        if not (0.0 < self.series_tolerance <= 1e-8):
            raise ConfigError("series_tolerance must be in (0, 1e-8]")
        if self.series_term_cap < 200:
            raise ConfigError("series_term_cap must be >= 200")
        if not self.asymptotic_switch_threshold > 0:
            raise ConfigError("asymptotic switch threshold must be positive")


DEFAULT_POLICY = KummerEvalPolicy()


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0."""
    if not x > 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def _gamma_reciprocal_one_minus(a: np.ndarray) -> np.ndarray:
    """1 / Gamma(1 - a) for non-integer or sub-unity a (poles return 0)."""
    out = np.empty(a.shape)
    flat_a = a.ravel()
    flat_o = out.ravel()
    for i, v in enumerate(flat_a):
        w = 1.0 - v
        if w <= 0 and w == int(w):
            flat_o[i] = 0.0  # pole of Gamma -> reciprocal vanishes
        else:
            flat_o[i] = 1.0 / math.gamma(w)
    return out


def _kummer_series(a: np.ndarray, x: np.ndarray, policy: KummerEvalPolicy,
                   term_cap: int) -> np.ndarray:
    """e^{-x} * sum_k (1-a)_k x^k / (k!)^2, i.e. M(a,1,-x) via the Kummer
    transformation with the exponential folded into the leading term."""
    c = 1.0 - a
    t = np.exp(-x)
    s = t.copy()
    consec = np.zeros(a.shape, dtype=np.int64)
    tol = policy.series_tolerance
    for k in range(term_cap):
        t = t * (c + k) * x / ((k + 1.0) ** 2)
        s += t
        small = np.abs(t) <= tol * np.maximum(np.abs(s), 1e-300)
        consec = np.where(small, consec + 1, 0)
        if np.all(consec >= 2):
            return s
    raise NumericsError(
        f"Kummer series did not converge within {term_cap} terms "
        f"(max |z| = {x.max():.3g}, |a| up to {np.abs(a).max():.3g})"
    )


def _kummer_asymptotic(a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Large-|z| expansion M(a,1,-x) ~ x^{-a}/Gamma(1-a) * sum_k [(a)_k]^2/(k! x^k).

    Terms are summed until they stop decreasing (optimal truncation); returns
    (value, relative error estimate from the first neglected term).
    """
    t = np.ones(a.shape)
    s = np.ones(a.shape)
    frozen = np.zeros(a.shape, dtype=bool)
    neglected = np.full(a.shape, np.inf)
    for k in range(_ASYM_MAX_TERMS):
        t_next = t * (a + k) ** 2 / ((k + 1.0) * x)
        growing = (np.abs(t_next) >= np.abs(t)) & ~frozen
        neglected[growing] = np.abs(t_next[growing])
        frozen |= growing
        s = np.where(frozen, s, s + t_next)
        t = t_next
        tiny = (np.abs(t) <= 1e-17 * np.abs(s)) & ~frozen
        neglected[tiny] = np.abs(t[tiny])
        frozen |= tiny
        if np.all(frozen):
            break
    neglected[~frozen] = np.abs(t[~frozen])
    rel_err = neglected / np.maximum(np.abs(s), 1e-300)
    value = np.power(x, -a) * _gamma_reciprocal_one_minus(a) * s
    return value, rel_err


def kummer_m_many(a, z, policy: KummerEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Vectorized M(a, 1; z) for z <= 0; broadcasts a against z."""
    a, z = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                               np.asarray(z, dtype=np.float64))
    if np.any(z > 0):
        raise ValueError("kummer_m is only defined here for z <= 0")
    if np.any(np.abs(a) > _A_LIMIT):
        raise ValueError(f"|a| must not exceed {_A_LIMIT}")
    x = -z
    out = np.empty(a.shape)

    # Positive-integer a terminates the transformed series exactly; it must
    # not go through the asymptotic branch, whose leading coefficient
    # 1/Gamma(1-a) vanishes there.
    poly = (a >= 1) & (a == np.floor(a))
    direct = poly | (x <= policy.asymptotic_switch_threshold)
    if np.any(direct):
        out[direct] = _kummer_series(a[direct], x[direct], policy,
                                     policy.series_term_cap)

    rest = ~direct
    if np.any(rest):
        val, err = _kummer_asymptotic(a[rest], x[rest])
        ok = err <= _ASYM_ACCEPT
        res = np.empty(val.shape)
        res[ok] = val[ok]
        if np.any(~ok):
            xb = x[rest][~ok]
            ab = a[rest][~ok]
            if np.any(xb > _SERIES_Z_LIMIT):
                raise NumericsError(
                    "Kummer evaluation failed: asymptotic expansion too inaccurate "
                    f"and |z| = {xb.max():.3g} too large for the series fallback"
                )
            cap = max(policy.series_term_cap, int(3 * xb.max()) + 200)
            res[~ok] = _kummer_series(ab, xb, policy, cap)
        out[rest] = res
    return out


def kummer_m(a: float, z: float, policy: KummerEvalPolicy = DEFAULT_POLICY) -> float:
    """M(a, 1; z) for a single point, z <= 0."""
    return float(kummer_m_many(np.float64(a), np.float64(z), policy))


def bessel_i0(x: float) -> float:
    """Modified Bessel function I0(x), x >= 0.  Test oracle for the gain."""
    return _bessel_i(0, x)


def bessel_i1(x: float) -> float:
    """Modified Bessel function I1(x), x >= 0.  Test oracle for the gain."""
    return _bessel_i(1, x)


def _bessel_i(order: int, x: float) -> float:
    if x < 0:
        raise ValueError("bessel_i is only defined here for x >= 0")
    if x <= 15.0:
        # ascending series, all terms positive
        q = x * x / 4.0
        if order == 0:
            t = 1.0
        else:
            t = x / 2.0
        s = t
        for k in range(200):
            t *= q / ((k + 1.0) * (k + 1.0 + order))
            s += t
            if t <= 1e-18 * s:
                return s
        raise NumericsError("Bessel series did not converge")
    # asymptotic expansion, optimally truncated
    mu = 4.0 * order * order
    t = 1.0
    s = 1.0
    for k in range(40):
        t_next = -t * (mu - (2 * k + 1) ** 2) / (8.0 * (k + 1.0) * x)
        if abs(t_next) >= abs(t):
            break
        s += t_next
        t = t_next
        if abs(t) <= 1e-17 * abs(s):
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * s
