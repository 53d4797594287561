"""Truncated power series in rho with field-valued coefficients.

Two coefficient modes share one interface:

* exact: numpy object arrays of :class:`QI` (Gaussian rationals backed by
  ``gmpy2.mpq``), so that vanishing statements are equalities;
* float: ``complex128`` arrays, optionally sampled on a periodic grid.

A series is stored as an array whose leading axis is the rho power, so a
series with truncation order ``N`` has ``N + 1`` slices.  The low-level
helpers in this module act on such raw arrays; :class:`FieldValue` and
:class:`JetSeries` are thin immutable wrappers used at the public API.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
import math

import gmpy2
import numpy as np
from gmpy2 import mpq

__all__ = [
    "QI", "qi", "exact_array", "zeros", "ones_like_series", "is_exact",
    "to_complex", "real_part", "imag_part", "max_abs", "is_zero",
    "nonzero_orders", "series_mul", "series_einsum", "series_inverse",
    "series_sqrt", "series_rho_d", "series_shift", "series_scale",
    "FieldValue", "JetSeries", "jet_mul", "jet_inverse", "jet_sqrt",
    "radial_derivative", "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-12

_MPQ_ZERO = mpq(0)


def _to_mpq(x):
    if isinstance(x, type(_MPQ_ZERO)):
        return x
    if isinstance(x, (int, Fraction, Rational)):
        return mpq(x)
    if isinstance(x, str):
        return mpq(x.strip())
    if isinstance(x, float):
        if not x.is_integer():
            raise TypeError(f"refusing to convert inexact float {x!r} to a rational")
        return mpq(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


class QI:
    """Exact complex rational ``re + i*im``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _to_mpq(re)
        self.im = _to_mpq(im)

    @staticmethod
    def _make(re, im):
        z = object.__new__(QI)
        z.re = re
        z.im = im
        return z

    @staticmethod
    def _coerce(o):
        if isinstance(o, QI):
            return o
        if isinstance(o, complex):
            return QI(o.real, o.imag)
        try:
            return QI._make(_to_mpq(o), _MPQ_ZERO)
        except TypeError:
            return None

    def __add__(self, o):
        if type(o) is not QI:
            o = QI._coerce(o)
            if o is None:
                return NotImplemented
        return QI._make(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        if type(o) is not QI:
            o = QI._coerce(o)
            if o is None:
                return NotImplemented
        return QI._make(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        o = QI._coerce(o)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, o):
        if type(o) is not QI:
            o = QI._coerce(o)
            if o is None:
                return NotImplemented
        a, b, c, d = self.re, self.im, o.re, o.im
        if not b and not d:
            return QI._make(a * c, _MPQ_ZERO)
        return QI._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if type(o) is not QI:
            o = QI._coerce(o)
            if o is None:
                return NotImplemented
        c, d = o.re, o.im
        den = c * c + d * d
        if not den:
            raise ZeroDivisionError("division by exact zero")
        a, b = self.re, self.im
        return QI._make((a * c + b * d) / den, (b * c - a * d) / den)

    def __rtruediv__(self, o):
        o = QI._coerce(o)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return QI._make(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return QI(1) / (self ** (-n))
        out = QI(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self):
        return QI._make(self.re, -self.im)

    @property
    def real(self):
        return QI._make(self.re, _MPQ_ZERO)

    @property
    def imag(self):
        return QI._make(self.im, _MPQ_ZERO)

    def abs2(self):
        return self.re * self.re + self.im * self.im

    def __abs__(self):
        return math.sqrt(float(self.abs2()))

    def __eq__(self, o):
        if type(o) is not QI:
            o = QI._coerce(o)
            if o is None:
                return NotImplemented
        return self.re == o.re and self.im == o.im

    def __ne__(self, o):
        r = self.__eq__(o)
        return r if r is NotImplemented else not r

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __float__(self):
        if self.im:
            raise TypeError("non-real Gaussian rational")
        return float(self.re)

    def __repr__(self):
        if not self.im:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"

    def to_pair(self):
        """Serialize as ``["p/q", "p/q"]`` strings."""
        return [_mpq_str(self.re), _mpq_str(self.im)]

    @staticmethod
    def from_pair(pair):
        return QI(pair[0], pair[1])


def _mpq_str(q):
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


QI_ZERO = QI(0)
QI_ONE = QI(1)
QI_I = QI(0, 1)


def qi(x) -> QI:
    """Convert ints, fractions, ``"p/q"`` strings, pairs or QI to :class:`QI`."""
    if isinstance(x, QI):
        return x
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return QI(x[0], x[1])
    z = QI._coerce(x)
    if z is None:
        raise TypeError(f"cannot convert {x!r} to an exact complex rational")
    return z


_vec_qi = np.frompyfunc(qi, 1, 1)


def exact_array(values) -> np.ndarray:
    """Object array of :class:`QI` from nested sequences of exact numbers."""
    arr = np.asarray(values, dtype=object)
    if arr.shape == ():
        out = np.empty((), dtype=object)
        out[()] = qi(arr[()])
        return out
    return _vec_qi(arr).astype(object)


def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        return np.full(shape, QI_ZERO, dtype=object)
    return np.zeros(shape, dtype=complex)


def ones_like_series(S, shape, exact):
    out = zeros((S,) + tuple(shape), exact)
    out[0] = QI_ONE if exact else 1.0
    return out


_vec_complex = np.frompyfunc(complex, 1, 1)
_vec_re = np.frompyfunc(lambda z: QI._make(z.re, _MPQ_ZERO), 1, 1)
_vec_im = np.frompyfunc(lambda z: QI._make(z.im, _MPQ_ZERO), 1, 1)
_vec_abs = np.frompyfunc(lambda z: abs(z), 1, 1)


def to_complex(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == object:
        return _vec_complex(a).astype(complex)
    return a.astype(complex)


def real_part(a):
    if is_exact(a):
        return _vec_re(a).astype(object) if a.shape else np.array(a[()].real, dtype=object)
    return np.real(a).astype(complex)


def imag_part(a):
    if is_exact(a):
        return _vec_im(a).astype(object) if a.shape else np.array(a[()].imag, dtype=object)
    return np.imag(a).astype(complex)


def max_abs(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if a.dtype == object:
        return float(max(abs(z) for z in a.ravel()))
    return float(np.max(np.abs(a)))


def is_zero(a, tol: float = 0.0) -> bool:
    """Exact arrays: every entry is exactly zero.  Float arrays: max-norm <= tol."""
    a = np.asarray(a)
    if a.dtype == object:
        return not any(bool(z) for z in a.ravel())
    return a.size == 0 or float(np.max(np.abs(a))) <= tol


# --------------------------------------------------------------------------
# raw series kernels (series axis first)
# --------------------------------------------------------------------------

def nonzero_orders(a: np.ndarray, upto: int | None = None) -> list[int]:
    n = len(a) if upto is None else min(upto, len(a))
    out = []
    for i in range(n):
        s = np.asarray(a[i])
        if s.dtype == object:
            if any(bool(z) for z in s.ravel()):
                out.append(i)
        elif np.any(s != 0):
            out.append(i)
    return out


def series_mul(a: np.ndarray, b: np.ndarray, S: int | None = None) -> np.ndarray:
    """Cauchy product with pointwise (broadcast) multiplication of slices."""
    if S is None:
        S = min(len(a), len(b))
    exact = is_exact(a) or is_exact(b)
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = zeros((S,) + shape, exact)
    na = nonzero_orders(a, S)
    nb = nonzero_orders(b, S)
    for i in na:
        ai = a[i]
        for j in nb:
            if i + j >= S:
                break
            out[i + j] = out[i + j] + ai * b[j]
    return out


def series_einsum(subs: str, a: np.ndarray, b: np.ndarray, S: int | None = None) -> np.ndarray:
    """Series product contracted over frame indices.

    ``subs`` names only the frame axes (e.g. ``"ij,jk->ik"``); trailing grid
    axes are carried by an implicit ellipsis.
    """
    if S is None:
        S = min(len(a), len(b))
    lhs, rhs = subs.split("->")
    sa, sb = lhs.split(",")
    full = f"{sa}...,{sb}...->{rhs}..."
    na = nonzero_orders(a, S)
    nb = nonzero_orders(b, S)
    exact = is_exact(a) or is_exact(b)
    out = None
    for i in na:
        for j in nb:
            if i + j >= S:
                break
            term = np.asarray(np.einsum(full, a[i], b[j]))
            if out is None:
                out = zeros((S,) + term.shape, exact)
            out[i + j] = out[i + j] + term
    if out is None:
        probe = np.asarray(np.einsum(full, a[0], b[0])) if len(a) and len(b) else None
        shape = probe.shape if probe is not None else ()
        out = zeros((S,) + shape, exact)
    return out


def series_scale(a: np.ndarray, c) -> np.ndarray:
    """Multiply every coefficient by the constant ``c``."""
    if is_exact(a):
        c = qi(c)
    return a * c


def series_rho_d(a: np.ndarray) -> np.ndarray:
    """Apply rho d/drho: multiply the order-k slice by k."""
    k = np.arange(len(a)).reshape((-1,) + (1,) * (a.ndim - 1))
    if is_exact(a):
        return a * k.astype(object)
    return a * k


def series_shift(a: np.ndarray, k: int) -> np.ndarray:
    """Multiply by rho^k keeping the truncation order."""
    out = zeros(a.shape, is_exact(a))
    if k < len(a):
        out[k:] = a[: len(a) - k]
    return out


def _leading_inverse(a0, exact, tol):
    a0 = np.asarray(a0)
    if exact:
        if a0.shape == ():
            z = a0[()]
            if not z:
                raise ZeroDivisionError("leading coefficient is exactly zero")
            out = np.empty((), dtype=object)
            out[()] = QI_ONE / z
            return out
        if any(not z for z in a0.ravel()):
            raise ZeroDivisionError("leading coefficient vanishes at some node")
        return np.frompyfunc(lambda z: QI_ONE / z, 1, 1)(a0).astype(object)
    if np.min(np.abs(a0)) <= tol:
        raise ZeroDivisionError("leading coefficient below tolerance")
    return 1.0 / a0


def series_inverse(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Multiplicative inverse of a scalar-valued series (pointwise on grids)."""
    exact = is_exact(a)
    S = len(a)
    b = zeros(a.shape, exact)
    b0 = _leading_inverse(a[0], exact, tol)
    if b0.shape == ():
        b0 = b0[()]
    b[0] = b0
    na = [i for i in nonzero_orders(a) if i > 0]
    for k in range(1, S):
        acc = None
        for j in na:
            if j > k:
                break
            t = a[j] * b[k - j]
            acc = t if acc is None else acc + t
        if acc is not None:
            b[k] = -(b0 * acc)
    return b


def _exact_sqrt(z: QI) -> QI:
    if z.im or z.re <= 0:
        raise ValueError("square root needs a real positive leading coefficient")
    p, q = z.re.numerator, z.re.denominator
    if not (gmpy2.is_square(p) and gmpy2.is_square(q)):
        raise ValueError(f"leading coefficient {z.re} is not a rational square")
    return QI(mpq(gmpy2.isqrt(p), gmpy2.isqrt(q)))


def series_sqrt(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Square root by Newton iteration x <- x + (a - x^2)/(2x) on series.

    Each sweep doubles the number of correct orders, so ceil(log2(N+1)) + 1
    sweeps reach the truncation order.
    """
    exact = is_exact(a)
    S = len(a)
    x = zeros(a.shape, exact)
    if exact:
        a0 = np.asarray(a[0])
        x[0] = np.frompyfunc(_exact_sqrt, 1, 1)(a0) if a0.shape else _exact_sqrt(a0[()])
    else:
        a0 = np.asarray(a[0])
        if np.any(np.abs(a0.imag) > tol * np.maximum(1.0, np.abs(a0))) or np.any(a0.real <= tol):
            raise ValueError("square root needs a real positive leading coefficient")
        x[0] = np.sqrt(a0.real)
    correct = 1
    while correct < S:
        defect = a - series_mul(x, x)
        x = x + series_mul(defect, series_inverse(series_scale(x, 2), tol))
        correct *= 2
    return x


# --------------------------------------------------------------------------
# public wrappers
# --------------------------------------------------------------------------

def _as_data(v, exact_hint=None):
    if isinstance(v, FieldValue):
        return v.data
    if isinstance(v, np.ndarray):
        return v
    if isinstance(v, QI):
        out = np.empty((), dtype=object)
        out[()] = v
        return out
    if exact_hint:
        return exact_array(v)
    return np.asarray(v, dtype=complex)


@dataclass(frozen=True, eq=False)
class FieldValue:
    """A complex scalar field on M: a constant (shape ``()``) or grid samples."""

    data: np.ndarray
    tol: float = DEFAULT_TOL
    chart: object = field(default=None, compare=False)

    @staticmethod
    def constant(value, exact: bool = True) -> "FieldValue":
        return FieldValue(_as_data(value, exact_hint=exact) if exact else np.asarray(complex(value)))

    @property
    def exact(self) -> bool:
        return is_exact(self.data)

    @property
    def shape(self):
        return self.data.shape

    def _check(self, other):
        if isinstance(other, FieldValue) and other.shape != self.shape:
            raise ValueError(f"field shape mismatch {self.shape} vs {other.shape}")
        return _as_data(other, self.exact)

    def __add__(self, o):
        return FieldValue(self.data + self._check(o), self.tol, self.chart)

    __radd__ = __add__

    def __sub__(self, o):
        return FieldValue(self.data - self._check(o), self.tol, self.chart)

    def __rsub__(self, o):
        return FieldValue(self._check(o) - self.data, self.tol, self.chart)

    def __mul__(self, o):
        return FieldValue(self.data * self._check(o), self.tol, self.chart)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return FieldValue(self.data / self._check(o), self.tol, self.chart)

    def __neg__(self):
        return FieldValue(-self.data, self.tol, self.chart)

    def conj(self) -> "FieldValue":
        return FieldValue(np.conjugate(self.data), self.tol, self.chart)

    def real(self) -> "FieldValue":
        return FieldValue(real_part(self.data), self.tol, self.chart)

    def imag(self) -> "FieldValue":
        return FieldValue(imag_part(self.data), self.tol, self.chart)

    def max_abs(self) -> float:
        return max_abs(self.data)

    def is_zero(self, tol: float | None = None) -> bool:
        return is_zero(self.data, self.tol if tol is None else tol)

    def equals(self, other, tol: float | None = None) -> bool:
        return (self - other).is_zero(tol)

    def to_complex(self) -> np.ndarray:
        return to_complex(self.data)


@dataclass(frozen=True, eq=False)
class JetSeries:
    """Truncated series sum_k c_k rho^k, k = 0..N, with field coefficients."""

    coeffs: np.ndarray
    tol: float = DEFAULT_TOL

    @staticmethod
    def from_list(values, exact: bool = True) -> "JetSeries":
        if exact:
            return JetSeries(exact_array(list(values)))
        return JetSeries(np.asarray(values, dtype=complex))

    @staticmethod
    def zero(N: int, shape=(), exact: bool = True) -> "JetSeries":
        return JetSeries(zeros((N + 1,) + tuple(shape), exact))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def exact(self) -> bool:
        return is_exact(self.coeffs)

    @property
    def field_shape(self):
        return self.coeffs.shape[1:]

    def coeff(self, k: int) -> FieldValue:
        return FieldValue(self.coeffs[k], self.tol)

    def truncate(self, N: int) -> "JetSeries":
        return JetSeries(self.coeffs[: N + 1], self.tol)

    def _pair(self, o):
        if isinstance(o, JetSeries):
            if o.field_shape != self.field_shape:
                raise ValueError("field shape mismatch")
            S = min(len(self.coeffs), len(o.coeffs))
            return self.coeffs[:S], o.coeffs[:S]
        c = zeros(self.coeffs.shape, self.exact)
        c[0] = _as_data(o, self.exact)
        return self.coeffs, c

    def __add__(self, o):
        a, b = self._pair(o)
        return JetSeries(a + b, self.tol)

    __radd__ = __add__

    def __sub__(self, o):
        a, b = self._pair(o)
        return JetSeries(a - b, self.tol)

    def __neg__(self):
        return JetSeries(-self.coeffs, self.tol)

    def __mul__(self, o):
        return jet_mul(self, o)

    __rmul__ = __mul__

    def conj(self) -> "JetSeries":
        return JetSeries(np.conjugate(self.coeffs), self.tol)

    def is_zero(self, tol: float | None = None) -> bool:
        return is_zero(self.coeffs, self.tol if tol is None else tol)

    def equals(self, other, tol: float | None = None) -> bool:
        return (self - other).is_zero(tol)


def jet_mul(a: JetSeries, b) -> JetSeries:
    if not isinstance(b, JetSeries):
        return JetSeries(a.coeffs * _as_data(b, a.exact), a.tol)
    if a.field_shape != b.field_shape:
        raise ValueError(f"field shape mismatch {a.field_shape} vs {b.field_shape}")
    return JetSeries(series_mul(a.coeffs, b.coeffs), a.tol)


def jet_inverse(a: JetSeries) -> JetSeries:
    return JetSeries(series_inverse(a.coeffs, a.tol), a.tol)


def jet_sqrt(a: JetSeries) -> JetSeries:
    return JetSeries(series_sqrt(a.coeffs, a.tol), a.tol)


def radial_derivative(a: JetSeries) -> JetSeries:
    return JetSeries(series_rho_d(a.coeffs), a.tol)
