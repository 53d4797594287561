"""CR GJMS operators from the log term of the eigenvalue problem of the Laplacian.

For u = rho^(-k+2) F with F = sum_j f^(j) rho^j and f^(0) = f, the equation
(Delta + k^2/4 - 1) u = 0 is solved order by order.  The order-j coefficient of
rho^(k-2-j) (Delta + k^2/4 - 1)(rho^(-k+2+j) f^(j)) is -j(j-2k)/4 f^(j), so
f^(j) is fixed for 1 <= j <= 2k-1.  The order-2k remainder R is the obstruction
to continuing; the log coefficient is G|_M = 2R/k and

    P_2k f = (-1)^(k+1) k!(k-1)!/2 * G|_M = (-1)^(k+1) ((k-1)!)^2 * R.

The Laplacian is evaluated directly as -g^{IJ}(e_I e_J u - Gamma_IJ^K e_K u)
in the Theta-frame of the solved metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as F
from math import factorial

import numpy as np

from .series import FieldValue, JetSeries, series_einsum, zeros, qi
from .theta import ThetaGeometry

__all__ = [
    "GjmsError", "GjmsOutput", "log_normalization", "remainder_normalization",
    "shifted_laplacian", "laplacian_shifted_apply", "gjms_apply", "gjms_matrix",
    "hermitian_defect",
]


class GjmsError(ValueError):
    """Insufficient series depth or an invalid request."""


@dataclass(frozen=True, eq=False)
class GjmsOutput:
    value: FieldValue
    recursion: list
    indicial: list
    remainder: np.ndarray


def log_normalization(k: int) -> F:
    """(-1)^(k+1) k!(k-1)!/2, the factor in front of the log coefficient."""
    if k < 1:
        raise GjmsError("k must be positive")
    return F((-1) ** (k + 1) * factorial(k) * factorial(k - 1), 2)


def remainder_normalization(k: int) -> F:
    """Factor turning the order-2k remainder R into P_2k f (uses G|_M = 2R/k)."""
    return log_normalization(k) * F(2, k)


def _const(x, exact):
    return qi(x) if exact else complex(F(x))


def _geometry(source, order):
    bg = getattr(source, "bg", None)
    if bg is None:
        raise GjmsError("solve result carries no background")
    if source.order < order:
        raise GjmsError(f"solve depth {source.order} below the required {order}")
    return ThetaGeometry(bg, source.ansatz, order=order)


def shifted_laplacian(G: ThetaGeometry, s, F_series: np.ndarray, k: int) -> np.ndarray:
    """rho^(-s) (Delta + k^2/4 - 1)(rho^s F) as a series, grid axes last."""
    ex = G.exact
    S = G.S
    Fs = F_series[:S]
    s = _const(s, ex)
    frame = G.frame

    def d(a):
        out = frame.derivatives(a)
        out[0] = out[0] + s * a
        return out

    first = d(Fs)
    second = [d(x) for x in first]
    D1 = np.stack(first, axis=1)  # [S, K, ...]
    # second[J][I] = e_I e_J u, stacked as D2[s, I, J]
    D2 = np.stack([np.stack(row, axis=1) for row in second], axis=2)
    hess = D2 - series_einsum("ijk,k->ij", G.gamma, D1, S)
    lap = -series_einsum("ij,ij->", G.ginv, hess, S)
    return lap + _const(F(k * k, 4) - 1, ex) * Fs


def laplacian_shifted_apply(source, k: int, j: int, field) -> JetSeries:
    """Bracket of (Delta + k^2/4 - 1)(rho^(-k+2+j) field) with the power stripped."""
    if k < 1 or j < 0:
        raise GjmsError("need k >= 1 and j >= 0")
    G = _geometry(source, min(source.order, 2 * k + 2))
    data = field.data if isinstance(field, FieldValue) else np.asarray(field)
    Fs = zeros((G.S,) + G.bg.shape, G.exact)
    Fs[0] = data
    out = shifted_laplacian(G, -k + 2 + j, Fs, k)
    return JetSeries(out, G.bg.tol)


def gjms_apply(source, k: int, f, geometry: ThetaGeometry | None = None) -> GjmsOutput:
    """P_2k f on the background of ``source`` (a solve result)."""
    if k < 1:
        raise GjmsError("k must be positive")
    if source.order < 2 * k + 2:
        raise GjmsError(f"solve depth {source.order} below 2k + 2 = {2 * k + 2}")
    G = geometry if geometry is not None else _geometry(source, 2 * k)
    ex = G.exact
    data = f.data if isinstance(f, FieldValue) else np.asarray(f)
    if not ex:
        data = np.asarray(data, dtype=complex)
    Fs = zeros((2 * k + 1,) + G.bg.shape, ex)
    Fs[0] = data
    s = -k + 2
    recursion = [FieldValue(Fs[0], G.bg.tol)]
    factors = []
    for j in range(1, 2 * k):
        L = shifted_laplacian(G, s, Fs, k)
        denom = j * (j - 2 * k)
        factors.append(denom)
        Fs[j] = L[j] * _const(F(4, denom), ex)
        recursion.append(FieldValue(Fs[j], G.bg.tol))
    R = shifted_laplacian(G, s, Fs, k)[2 * k]
    P = R * _const(remainder_normalization(k), ex)
    return GjmsOutput(FieldValue(P, G.bg.tol), recursion, factors, R)


def gjms_matrix(source, k: int, basis) -> np.ndarray:
    """M[i, j] = sum over the grid of conj(b_i) P_2k(b_j) |theta ^ dtheta|."""
    bg = getattr(source, "bg", None)
    if bg is None or bg.kind != "grid":
        raise GjmsError("gjms_matrix needs a grid background")
    G = _geometry(source, 2 * k)
    w = bg.volume_density * bg.grid.cell_volume
    cols = []
    for b in basis:
        data = b.data if isinstance(b, FieldValue) else np.asarray(b)
        cols.append(gjms_apply(source, k, data, geometry=G).value.data)
    B = np.stack([np.asarray(b.data if isinstance(b, FieldValue) else b, dtype=complex) for b in basis])
    P = np.stack(cols)
    n = len(basis)
    return (B.conj().reshape(n, -1) * w.reshape(1, -1)) @ P.reshape(n, -1).T


def hermitian_defect(M: np.ndarray) -> float:
    """||M - M^*|| / ||M|| in the Frobenius norm."""
    n = np.linalg.norm(M)
    return 0.0 if n == 0 else float(np.linalg.norm(M - M.conj().T) / n)
