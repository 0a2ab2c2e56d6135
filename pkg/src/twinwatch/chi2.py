"""Chi-square distribution function and quantile without a stats dependency.

``P(a, x)``, the regularized lower incomplete gamma function, is evaluated
by its power series for ``x < a + 1`` and by a Lentz continued fraction for
the complement otherwise. The quantile inverts ``P`` (or ``Q`` above the
median, to keep far-tail precision) with safeguarded Newton iterations
started from the Wilson-Hilferty approximation.
"""

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction(a: float, x: float) -> float:
    # upper tail Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _series(a, x)
    return 1.0 - _continued_fraction(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``, accurate in the far tail."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _series(a, x)
    return _continued_fraction(a, x)


def chi2_cdf(x: float, dof: int) -> float:
    return gammainc_lower(dof / 2.0, x / 2.0)


def chi2_sf(x: float, dof: int) -> float:
    return gammainc_upper(dof / 2.0, x / 2.0)


def chi2_ppf(prob: float, dof: int) -> float:
    """Value ``x`` with ``chi2_cdf(x, dof) == prob``."""
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie strictly between 0 and 1")
    if dof < 1:
        raise ValueError("dof must be at least 1")
    k = float(dof)
    # Wilson-Hilferty start; the inverse normal comes from bisection on erf.
    z = _norm_ppf(prob)
    c = 2.0 / (9.0 * k)
    x = max(k * (1.0 - c + z * math.sqrt(c)) ** 3, 1e-8)
    lo, hi = 0.0, max(2.0 * x, k + 10.0)
    while chi2_cdf(hi, dof) < prob:
        hi *= 2.0
    log_norm = -(k / 2.0) * math.log(2.0) - math.lgamma(k / 2.0)
    upper = prob > 0.5
    tail = 1.0 - prob
    for _ in range(200):
        # cdf(x) - prob, taken from the survival function above the median
        f = tail - chi2_sf(x, dof) if upper else chi2_cdf(x, dof) - prob
        if f > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        density = math.exp(log_norm + (k / 2.0 - 1.0) * math.log(x) - x / 2.0) if x > 0 else 0.0
        nxt = x - f / density if density > 0 else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= 1e-15 * max(1.0, x):
            return nxt
        x = nxt
    return x


def _norm_ppf(prob: float) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(-mid / math.sqrt(2.0)) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
