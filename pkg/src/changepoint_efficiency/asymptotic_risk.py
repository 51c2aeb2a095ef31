"""Closed-form small-noise risk expansions of the MLE and Bayes functional estimates.

Both quadratic risks share the ``eps^2`` term; they differ at ``eps^4``
through the second moments of the limiting change-point estimates
(``26 / delta^4`` for the MLE, ``16 zeta(3) / delta^4`` for Bayes) and through
the curvature of the functional in ``theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

E_UMLE2_UNIT = 26.0

_ZETA3_TERMS = 10_000


@lru_cache(maxsize=None)
def zeta3() -> float:
    """Apery's constant, from a partial sum and an Euler-Maclaurin tail.

    With ``N = 10^4`` the first omitted tail correction is ``O(N^-8)``.
    """
    n = _ZETA3_TERMS
    head = math.fsum(1.0 / k**3 for k in range(1, n))
    # sum_{k>=N} k^-3 = 1/(2N^2) + 1/(2N^3) + 1/(4N^4) - 1/(12N^6) + ...
    tail = math.fsum(
        [1 / (2 * n**2), 1 / (2 * n**3), 1 / (4 * n**4), -1 / (12 * n**6)]
    )
    return head + tail


def e_ub2_unit() -> float:
    return 16.0 * zeta3()


def kappa0() -> float:
    """Limiting ratio of Bayes to MLE quadratic risk for the change point."""
    return e_ub2_unit() / E_UMLE2_UNIT


@dataclass(frozen=True)
class AsymptoticInputs:
    eps: float
    i1: float
    i2: float
    delta: float
    dL_dtheta1: float = 0.0
    dL_dtheta2: float = 0.0
    dL_dtau: float = 0.0
    d2L_dtheta1: float = 0.0
    d2L_dtheta2: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not (self.i1 > 0 and self.i2 > 0):
            raise ValueError("i1 and i2 must be positive")
        if self.delta == 0 or not math.isfinite(self.delta):
            raise ValueError("the jump delta must be finite and nonzero")


@dataclass(frozen=True)
class RiskExpansion:
    first_order: float
    second_order_mle: float
    second_order_bayes: float
    ratio_limit: float

    def risk_mle(self, eps: float) -> float:
        return self.first_order * eps**2 + self.second_order_mle * eps**4

    def risk_bayes(self, eps: float) -> float:
        return self.first_order * eps**2 + self.second_order_bayes * eps**4


def _first_order(inp: AsymptoticInputs) -> float:
    return (inp.dL_dtheta1 / inp.i1) ** 2 + (inp.dL_dtheta2 / inp.i2) ** 2


def risk_expansion(inp: AsymptoticInputs) -> RiskExpansion:
    """Coefficients of ``eps^2`` and ``eps^4`` in both quadratic risks.

    Raises ``ValueError`` when every derivative is zero, since the risk ratio
    is then undefined.
    """
    derivs = (inp.dL_dtheta1, inp.dL_dtheta2, inp.dL_dtau, inp.d2L_dtheta1, inp.d2L_dtheta2)
    if all(d == 0 for d in derivs):
        raise ValueError("all derivatives are zero; the risk ratio is undefined")
    first = _first_order(inp)
    d4 = inp.delta**4
    tau_mle = E_UMLE2_UNIT / d4 * inp.dL_dtau**2
    tau_b = e_ub2_unit() / d4 * inp.dL_dtau**2
    curv_mle = 0.0
    curv_b = 0.0
    for i, d2 in ((inp.i1, inp.d2L_dtheta1), (inp.i2, inp.d2L_dtheta2)):
        curv_mle += 3.0 / i**4 * d2**2
        curv_b += (i**4 + 2 * i**2 + 3) / i**4 * d2**2
    second_mle = tau_mle + curv_mle
    second_b = tau_b + curv_b
    if first > 0:
        ratio = 1.0
    else:
        ratio = second_b / second_mle
    return RiskExpansion(first, second_mle, second_b, ratio)
