"""Indicial pencil of the Einstein system and a coefficient-growth probe.

At t = k + 9 the pencil is the block matrix

    [[I1, I2,  0,  0],
     [I3, I4,  0,  0],
     [ 0,  0, I5,  0],
     [ 0,  0,  0, I6]]

with I1 = t^2-6t-4, I2 = -4(t-2), I3 = -t+4, I4 = t^2-6t-8, I5 = (t+1)(t-5),
I6 = t(t-4).  Its determinant factors as
(k+1)(k+3)(k+4)(k+5)(k+9)^2(k+10)(k+11), nonzero for every k >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "INDICIAL", "indicial_values", "indicial_matrix", "det4", "product_formula",
    "det_product_check", "GrowthProbe", "growth_probe", "metric_coefficient_norms",
]

INDICIAL = {
    "I1": lambda t: t * t - 6 * t - 4,
    "I2": lambda t: -4 * (t - 2),
    "I3": lambda t: -t + 4,
    "I4": lambda t: t * t - 6 * t - 8,
    "I5": lambda t: (t + 1) * (t - 5),
    "I6": lambda t: t * (t - 4),
}


def _check_k(k):
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 0:
        raise ValueError("k must be a non-negative integer")


def indicial_values(t: int) -> dict[str, int]:
    return {name: f(t) for name, f in INDICIAL.items()}


def indicial_matrix(k: int) -> list[list[int]]:
    """The 4x4 integer pencil at t = k + 9."""
    _check_k(k)
    v = indicial_values(int(k) + 9)
    return [
        [v["I1"], v["I2"], 0, 0],
        [v["I3"], v["I4"], 0, 0],
        [0, 0, v["I5"], 0],
        [0, 0, 0, v["I6"]],
    ]


def det4(m) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    a = [[Fraction(x) for x in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def product_formula(k: int) -> int:
    _check_k(k)
    return (k + 1) * (k + 3) * (k + 4) * (k + 5) * (k + 9) ** 2 * (k + 10) * (k + 11)


def det_product_check(kmax: int) -> dict:
    """Compare det of the pencil with the product formula for 0 <= k <= kmax."""
    _check_k(kmax)
    dets, mismatches = [], []
    for k in range(kmax + 1):
        d = det4(indicial_matrix(k))
        p = product_formula(k)
        dets.append(int(d))
        if d != p:
            mismatches.append(k)
    return {
        "kmax": kmax,
        "dets": dets,
        "matches": kmax + 1 - len(mismatches),
        "mismatches": mismatches,
        "all_nonzero": all(d != 0 for d in dets),
        "ok": not mismatches and all(d != 0 for d in dets),
    }


@dataclass(frozen=True)
class GrowthProbe:
    orders: list
    norms: list
    ratio: float | None
    offset: float | None
    residual: float | None
    terminating: bool


def metric_coefficient_norms(result) -> list[float]:
    """Sup norm over components and grid of each rho^j coefficient of the metric."""
    c = result.coefficients
    out = []
    for j in range(result.order + 1):
        vals = [np.abs(np.asarray(c[name][j], dtype=complex)).max() for name in c]
        if j == 0:
            vals = [np.abs(np.asarray(c[name][0], dtype=complex)
                           - (1 if name in ("g00", "g11bar") else 0)).max() for name in c]
        out.append(float(max(vals)))
    return out


def growth_probe(result, start: int = 6, tol: float = 1e-12) -> GrowthProbe:
    """Least-squares fit of log ||g^(j)|| = offset + j log(ratio) over j >= start.

    Orders with norm at most ``tol`` times the largest norm count as zero.
    """
    if result.order < start + 2:
        raise ValueError(f"need at least order {start + 2} for a growth fit")
    norms = metric_coefficient_norms(result)
    floor = tol * max(norms, default=0.0)
    orders = [j for j in range(start, result.order + 1) if norms[j] > floor]
    # odd orders vanish by evenness, so a tail of four zero orders means the series stops
    if not orders or result.order - orders[-1] >= 4:
        return GrowthProbe(orders, norms, None, None, None, True)
    if len(orders) < 2:
        raise ValueError("too few nonzero orders for a growth fit")
    x = np.asarray(orders, dtype=float)
    y = np.log([norms[j] for j in orders])
    A = np.vstack([np.ones_like(x), x]).T
    (b, a), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([b, a]) - y) ** 2)))
    return GrowthProbe(orders, norms, float(np.exp(a)), float(b), resid, False)
