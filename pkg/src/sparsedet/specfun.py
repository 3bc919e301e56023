"""Special functions used by the closed-form detection probabilities.

Exact tail probabilities (Gaussian Q, regularized lower gamma, central and
noncentral chi-squared cdfs, Marcum Q) plus the Sankaran cube-root normal
approximations used to make the threshold/Pd design formulas tractable.
"""

import math

import numpy as np
from scipy import special


def _check_finite(name, x):
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")


def gaussian_q(x):
    """Upper tail of the standard normal distribution, Q(x)."""
    _check_finite("x", x)
    return 0.5 * special.erfc(x / math.sqrt(2.0))


def gaussian_q_inv(p):
    """Inverse of ``gaussian_q``; requires 0 < p < 1."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p!r}")
    return math.sqrt(2.0) * special.erfcinv(2.0 * p)


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma function gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError(f"a must be positive, got {a!r}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    return float(special.gammainc(a, x))


def chi2_cdf(df, x):
    """Central chi-squared cdf with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError(f"df must be positive, got {df!r}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    return reg_lower_gamma(df / 2.0, x / 2.0)


# Poisson-mixture truncation: stop once the accumulated Poisson weight
# leaves tail mass below this bound.
_POISSON_TAIL = 1e-14


def ncchi2_cdf(df, noncentrality, x):
    """Noncentral chi-squared cdf via a truncated Poisson mixture.

    The mixture over central cdfs is truncated once the remaining Poisson
    mass is below 1e-14, which bounds the truncation error by the same
    amount (each central cdf term lies in [0, 1]).
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df!r}")
    if noncentrality < 0:
        raise ValueError(f"noncentrality must be nonnegative, got {noncentrality!r}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    if x == 0.0:
        return 0.0
    half = noncentrality / 2.0
    if half == 0.0:
        return chi2_cdf(df, x)
    # log-space Poisson weights keep large noncentralities from underflowing
    total = 0.0
    acc = 0.0
    i = 0
    # loop must pass the Poisson mode (~half) before the tail bound can trigger
    max_terms = int(half + 20.0 * math.sqrt(half) + 200)
    while i <= max_terms:
        logw = -half + i * math.log(half) - special.gammaln(i + 1)
        w = math.exp(logw)
        acc += w
        if w > 0.0:
            total += w * chi2_cdf(df + 2 * i, x)
        if acc >= 1.0 - _POISSON_TAIL and i >= half:
            break
        i += 1
    return min(total, 1.0)


def marcum_q(order, a, b):
    """Marcum Q function Q_order(a, b) for half-integer orders >= 1.

    Computed as the complement of the noncentral chi-squared cdf with
    2*order degrees of freedom, noncentrality a^2, at b^2.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order!r}")
    if a < 0 or b < 0:
        raise ValueError(f"a and b must be nonnegative, got a={a!r}, b={b!r}")
    if b == 0.0:
        return 1.0
    return 1.0 - ncchi2_cdf(2.0 * order, a * a, b * b)


def chi2_cdf_sankaran(df, x):
    """Cube-root normal approximation to the central chi-squared cdf.

    Raw formula output; not clamped to [0, 1] (clamping is caller policy).
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df!r}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    c = 2.0 / (9.0 * df)
    z = ((x / df) ** (1.0 / 3.0) - (1.0 - c)) / math.sqrt(c)
    return 1.0 - gaussian_q(z)


def ncchi2_cdf_sankaran(df, noncentrality, x):
    """Sankaran approximation to the noncentral chi-squared cdf.

    Uses the h, p, m parametrization; reduces to the central cube-root
    formula at zero noncentrality. Output is not clamped to [0, 1].
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df!r}")
    if noncentrality < 0:
        raise ValueError(f"noncentrality must be nonnegative, got {noncentrality!r}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x!r}")
    k = df
    lam = noncentrality
    h = 1.0 - (2.0 / 3.0) * (k + lam) * (k + 3.0 * lam) / (k + 2.0 * lam) ** 2
    p = (k + 2.0 * lam) / (k + lam) ** 2
    m = (h - 1.0) * (1.0 - 3.0 * h)
    num = (x / (k + lam)) ** h - (1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p))
    den = h * math.sqrt(2.0 * p) * (1.0 + 0.5 * m * p)
    return 1.0 - gaussian_q(num / den)
