"""Special functions needed by the scores: log-gamma and the chi-square tail."""

import numpy as np
from scipy import special as _sp

from .errors import DomainError


def log_gamma(x):
    """ln Gamma(x) for x > 0; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma is defined here for x > 0 only, got {x!r}")
    out = _sp.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def chi2_sf(x: float, k: int) -> float:
    """Upper tail P(chi2_k > x) via the regularized upper incomplete gamma Q(k/2, x/2)."""
    if k < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {k}")
    if x < 0:
        raise DomainError(f"chi-square statistic must be >= 0, got {x}")
    if x == 0:
        return 1.0
    return float(_sp.gammaincc(0.5 * k, 0.5 * x))
