"""Tensor calculus in the rescaled frame {e_inf, e_0, e_1, e_1bar} = {rho d_rho, rho^2 T, rho Z_1, rho Z_1bar}.

Frame indices are numbered inf -> 0, 0 -> 1, 1 -> 2, 1bar -> 3.  A tensor is
an array of shape ``(S, 4, ..., 4, *grid)``: the rho-power axis first, then
one axis per frame slot, then the grid axes of the background (none for
constant backgrounds).  Connection coefficients follow the convention
``nabla_{e_I} e_J = Gamma[I, J, K] e_K`` and curvature
``R(e_K, e_L) e_I = R[I, J, K, L] e_J``.

The Riemann, Weyl and Hodge-star computations work on antisymmetric index
pairs (six pairs for four frame indices) to avoid redundant work.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations

import numpy as np

from .background import Background
from .series import (
    QI, JetSeries, exact_array, is_exact, is_zero, max_abs, qi, series_einsum,
    series_mul, series_rho_d, series_scale, series_shift,
    series_sqrt, zeros, imag_part,
)

__all__ = [
    "INF", "E0", "E1", "E1B", "CONJ", "WEIGHT", "PAIRS", "parse_word", "word_str",
    "ThetaTensor", "MetricAnsatz", "ThetaFrame", "ThetaGeometry",
    "extended_cov_derivative", "extended_torsion", "extended_curvature",
    "difference_tensor", "riemann", "ricci", "einstein", "volume_epsilon",
    "schouten", "weyl", "weyl_asd", "cotton_asd", "levi_civita_symbol",
]

INF, E0, E1, E1B = 0, 1, 2, 3
CONJ = np.array([0, 1, 3, 2])
WEIGHT = (0, 2, 1, 1)
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PI = np.array([p[0] for p in PAIRS])
PJ = np.array([p[1] for p in PAIRS])
_CHAR = {"i": 0, "0": 1, "1": 2, "b": 3}
_LABEL = {"inf": 0, "∞": 0, "0": 1, "1": 2, "1b": 3, "1bar": 3, "b": 3}
_NAMES = "i01b"


def parse_word(word) -> tuple[int, ...]:
    """Frame-index word from ``"i0i0"`` style strings or label sequences."""
    if isinstance(word, str):
        if not all(c in _CHAR for c in word):
            raise ValueError(f"bad index word {word!r}; use characters i, 0, 1, b")
        return tuple(_CHAR[c] for c in word)
    out = []
    for w in word:
        if isinstance(w, (int, np.integer)):
            out.append(int(w))
        else:
            out.append(_LABEL[str(w)])
    return tuple(out)


def word_str(idx) -> str:
    return "".join(_NAMES[i] for i in idx)


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


_REFERENCE = (E0, E1, E1B, INF)


def levi_civita_symbol() -> np.ndarray:
    """Integer symbol with value +1 on the word (0, 1, 1bar, inf)."""
    eps = np.zeros((4, 4, 4, 4), dtype=int)
    for p in permutations(range(4)):
        eps[p] = _perm_sign([_REFERENCE.index(x) for x in p])
    return eps


def _pair_index():
    """P[K, L, p] = +1 if (K, L) is pair p, -1 if (L, K) is pair p."""
    P = np.zeros((4, 4, 6), dtype=int)
    for n, (a, b) in enumerate(PAIRS):
        P[a, b, n] = 1
        P[b, a, n] = -1
    return P


PAIR_SIGN = _pair_index()


def _pair_star_signs():
    eps = levi_civita_symbol()
    return np.array([[eps[a[0], a[1], c[0], c[1]] for c in PAIRS] for a in PAIRS], dtype=int)


STAR_SIGN = _pair_star_signs()


def _const(x, exact):
    return qi(x) if exact else complex(x)


# --------------------------------------------------------------------------
# containers
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ThetaTensor:
    """Series-valued tensor on the frame {inf, 0, 1, 1bar}.

    ``variance`` has one character per slot: ``'d'`` (lower) or ``'u'`` (upper).
    Components are stored densely; conjugation symmetry is checked by
    :meth:`conjugation_defect` rather than imposed.
    """

    data: np.ndarray
    variance: str
    tol: float = 1e-12

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def order(self) -> int:
        return self.data.shape[0] - 1

    @property
    def exact(self) -> bool:
        return is_exact(self.data)

    def component(self, word) -> JetSeries:
        idx = parse_word(word)
        if len(idx) != self.rank:
            raise ValueError(f"word {word!r} has wrong length for rank {self.rank}")
        return JetSeries(self.data[(slice(None),) + idx], self.tol)

    def conj(self) -> "ThetaTensor":
        """Complex conjugate with every index conjugated (1 <-> 1bar)."""
        d = np.conjugate(self.data)
        for ax in range(1, self.rank + 1):
            d = np.take(d, CONJ, axis=ax)
        return ThetaTensor(d, self.variance, self.tol)

    def conjugation_defect(self) -> float:
        """Max-norm of T - conj(T); zero for real tensors such as the metric or Ricci."""
        return max_abs(self.data - self.conj().data)

    def is_zero(self, tol: float | None = None) -> bool:
        return is_zero(self.data, self.tol if tol is None else tol)

    def residual_orders(self, tol: float = 0.0) -> list[float]:
        """Max-norm of each rho-power coefficient."""
        return [max_abs(self.data[k]) for k in range(self.data.shape[0])]

    def to_json(self) -> dict:
        from .io import dump_array
        comps = {}
        for idx in np.ndindex(*([4] * self.rank)):
            series = self.data[(slice(None),) + idx]
            if is_zero(series):
                continue
            comps[word_str(idx)] = [dump_array(series[k]) for k in range(series.shape[0])]
        return {"indices": self.variance, "truncation": self.order, "components": comps}


@dataclass(frozen=True, eq=False)
class MetricAnsatz:
    """Normal-form metric data: g_inf inf = 4, g_00 = 1 + phi00, g_01 = phi01,
    g_11 = phi11, g_11bar = 1 + phi11b; the rest follows by symmetry and reality."""

    phi00: np.ndarray
    phi11b: np.ndarray
    phi01: np.ndarray
    phi11: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        for name in ("phi00", "phi11b", "phi01", "phi11"):
            a = getattr(self, name)
            if not is_zero(a[0], self.tol):
                raise ValueError(f"{name} must vanish at order 0")
        for name in ("phi00", "phi11b"):
            if not is_zero(imag_part(getattr(self, name)), self.tol):
                raise ValueError(f"{name} must be real")

    @staticmethod
    def zero(N: int, shape=(), exact: bool = True) -> "MetricAnsatz":
        z = zeros((N + 1,) + tuple(shape), exact)
        return MetricAnsatz(z, z.copy(), z.copy(), z.copy())

    @staticmethod
    def from_series(phi00, phi11b, phi01, phi11) -> "MetricAnsatz":
        get = lambda s: s.coeffs if isinstance(s, JetSeries) else np.asarray(s)
        return MetricAnsatz(get(phi00), get(phi11b), get(phi01), get(phi11))

    @property
    def order(self) -> int:
        return self.phi00.shape[0] - 1

    @property
    def exact(self) -> bool:
        return is_exact(self.phi00)

    @property
    def shape(self):
        return self.phi00.shape[1:]

    def components(self) -> dict:
        return {"phi00": self.phi00, "phi11b": self.phi11b, "phi01": self.phi01, "phi11": self.phi11}

    def truncated(self, N: int) -> "MetricAnsatz":
        return MetricAnsatz(self.phi00[: N + 1], self.phi11b[: N + 1],
                            self.phi01[: N + 1], self.phi11[: N + 1], self.tol)

    def extended(self, N: int) -> "MetricAnsatz":
        """Pad with zero coefficients up to order N."""
        if N <= self.order:
            return self.truncated(N)
        def pad(a):
            out = zeros((N + 1,) + a.shape[1:], self.exact)
            out[: a.shape[0]] = a
            return out
        return MetricAnsatz(pad(self.phi00), pad(self.phi11b), pad(self.phi01), pad(self.phi11), self.tol)

    def add_order(self, m: int, psi: dict) -> "MetricAnsatz":
        """Return a copy with psi[name] added to the order-m coefficient."""
        comps = {k: v.copy() for k, v in self.components().items()}
        for name, val in psi.items():
            comps[name][m] = comps[name][m] + val
        return MetricAnsatz(**comps, tol=self.tol)

    def metric(self, S: int | None = None) -> np.ndarray:
        S = self.order + 1 if S is None else S
        ex = self.exact
        g = zeros((S, 4, 4) + self.shape, ex)
        one = _const(1, ex)
        g[0, INF, INF] = _const(4, ex)
        p00 = self.phi00[:S]
        p11b = self.phi11b[:S]
        p01 = self.phi01[:S]
        p11 = self.phi11[:S]
        n = p00.shape[0]
        g[:n, E0, E0] = p00
        g[0, E0, E0] = g[0, E0, E0] + one
        g[:n, E1, E1B] = p11b
        g[0, E1, E1B] = g[0, E1, E1B] + one
        g[:, E1B, E1] = g[:, E1, E1B]
        g[:n, E0, E1] = p01
        g[:n, E0, E1B] = np.conjugate(p01)
        g[:n, E1, E1] = p11
        g[:n, E1B, E1B] = np.conjugate(p11)
        g[:, E1, E0] = g[:, E0, E1]
        g[:, E1B, E0] = g[:, E0, E1B]
        return g


# --------------------------------------------------------------------------
# frame calculus on a background
# --------------------------------------------------------------------------

def _letters(n, skip=""):
    pool = [c for c in "abcdefgh" if c not in skip]
    return "".join(pool[:n])


class ThetaFrame:
    """Frame derivatives and the extended Tanaka-Webster connection on ``bg``,
    truncated at rho-order ``S - 1``."""

    def __init__(self, bg: Background, S: int):
        self.bg = bg
        self.S = S
        self.exact = bg.exact
        self.shape = bg.shape

    def zeros(self, frame_shape=()):
        return zeros((self.S,) + tuple(frame_shape) + self.shape, self.exact)

    def c(self, x):
        return _const(x, self.exact)

    def derivatives(self, a: np.ndarray) -> list[np.ndarray]:
        """[e_inf a, e_0 a, e_1 a, e_1bar a] for a series array (grid axes last)."""
        out = [series_rho_d(a)]
        if self.bg.kind == "constant":
            z = zeros(a.shape, self.exact)
            return out + [z, z, z]
        X = self.bg.vec_all(a)
        out.append(series_shift(X[0], 2))
        out.append(series_shift(X[1], 1))
        out.append(series_shift(X[2], 1))
        return out

    def _field(self, order, value):
        """Series with a single coefficient at ``order``."""
        out = zeros((self.S,) + self.shape, self.exact)
        if order < self.S:
            out[order] = value
        return out

    @cached_property
    def gamma_bar(self) -> np.ndarray:
        """Gamma_bar[I, J, K] with nabla_bar_{e_I} e_J = Gamma_bar[I, J, K] e_K."""
        G = self.zeros((4, 4, 4))
        one = self.c(1)
        G[0, INF, INF, INF] = one
        G[0, INF, E0, E0] = self.c(2)
        G[0, INF, E1, E1] = one
        G[0, INF, E1B, E1B] = one
        w = self.bg.omega
        for I, b in ((E0, 0), (E1, 1), (E1B, 2)):
            s = self._field(WEIGHT[I], w[b])
            G[:, I, E1, E1] = s
            G[:, I, E1B, E1B] = -s
        return G

    @cached_property
    def structure(self) -> np.ndarray:
        """c[I, J, K]: [e_I, e_J] = c[I, J, K] e_K."""
        C = self.zeros((4, 4, 4))
        for J in (E0, E1, E1B):
            C[0, INF, J, J] = self.c(WEIGHT[J])
            C[0, J, INF, J] = -self.c(WEIGHT[J])
        comm = self.bg.comm
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    I, J, K = i + 1, j + 1, k + 1
                    p = WEIGHT[I] + WEIGHT[J] - WEIGHT[K]
                    if p < self.S:
                        C[p, I, J, K] = comm[i, j, k]
        return C

    @cached_property
    def torsion(self) -> np.ndarray:
        """T_bar[I, J, K] = Gamma_bar[I, J, K] - Gamma_bar[J, I, K] - c[I, J, K]."""
        G = self.gamma_bar
        return G - np.swapaxes(G, 1, 2) - self.structure

    def curvature_of(self, G: np.ndarray) -> np.ndarray:
        """R[I, J, K, L] of a frame connection with coefficients G."""
        dG = self.derivatives(G)
        R = self.zeros((4, 4, 4, 4))
        # e_K Gamma_{L I}^J - e_L Gamma_{K I}^J
        for K in range(4):
            for L in range(4):
                R[:, :, :, K, L] = dG[K][:, L] - dG[L][:, K]
        quad = series_einsum("lim,kmj->ijkl", G, G, self.S)
        R = R + quad - _swap_kl(quad)
        R = R - series_einsum("klm,mij->ijkl", self.structure, G, self.S)
        return R

    @cached_property
    def curvature(self) -> np.ndarray:
        return self.curvature_of(self.gamma_bar)

    def nabla(self, a: np.ndarray, variance: str, conn: np.ndarray | None = None) -> np.ndarray:
        """Covariant derivative; the new (derivative) index is the first frame slot."""
        G = self.gamma_bar if conn is None else conn
        r = len(variance)
        D = self.derivatives(a)
        out = np.stack(D, axis=1)
        idx = _letters(r, skip="kmz")
        for slot, v in enumerate(variance):
            if v == "d":
                src = idx[:slot] + "m" + idx[slot + 1:]
                subs = f"k{idx[slot]}m,{src}->k{idx}"
                out = out - series_einsum(subs, G, a, self.S)
            else:
                src = idx[:slot] + "m" + idx[slot + 1:]
                subs = f"km{idx[slot]},{src}->k{idx}"
                out = out + series_einsum(subs, G, a, self.S)
        return out


def _swap_kl(a):
    return np.swapaxes(a, 3, 4)


def _inverse_leading(g0, exact):
    """Inverse of a 4x4 leading block (pointwise on grids)."""
    if not exact:
        m = np.moveaxis(np.asarray(g0), (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(m), (-2, -1), (0, 1))
    if g0.ndim != 2:
        raise ValueError("exact mode supports constant backgrounds only")
    n = g0.shape[0]
    A = [[qi(g0[i, j]) for j in range(n)] + [QI(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col])
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [x / p for x in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return exact_array([row[n:] for row in A])


def matrix_series_inverse(g: np.ndarray) -> np.ndarray:
    """Inverse of a matrix-valued series with invertible leading block."""
    exact = is_exact(g)
    S = g.shape[0]
    h0 = _inverse_leading(g[0], exact)
    h = zeros(g.shape, exact)
    h[0] = h0
    nz = [j for j in range(1, S) if not is_zero(g[j])]
    for k in range(1, S):
        acc = None
        for j in nz:
            if j > k:
                break
            t = np.einsum("ij...,jk...->ik...", g[j], h[k - j])
            acc = t if acc is None else acc + t
        if acc is not None:
            h[k] = -np.einsum("ij...,jk...->ik...", h0, acc)
    return h


def _det3_series(m):
    """Determinant of a 3x3 matrix of series given as m[i][j] arrays."""
    def mul(a, b):
        return series_mul(a, b)
    t1 = mul(m[0][0], mul(m[1][1], m[2][2]) - mul(m[1][2], m[2][1]))
    t2 = mul(m[0][1], mul(m[1][0], m[2][2]) - mul(m[1][2], m[2][0]))
    t3 = mul(m[0][2], mul(m[1][0], m[2][1]) - mul(m[1][1], m[2][0]))
    return t1 - t2 + t3


class ThetaGeometry:
    """Levi-Civita geometry of a normal-form metric, evaluated in series arithmetic.

    All quantities are truncated at order ``S - 1`` where ``S = order + 1``.
    """

    def __init__(self, bg: Background, ansatz: MetricAnsatz, order: int | None = None):
        order = ansatz.order if order is None else order
        if ansatz.order < order:
            ansatz = ansatz.extended(order)
        if ansatz.exact != bg.exact:
            raise ValueError("metric ansatz and background use different coefficient modes")
        if tuple(ansatz.shape) != tuple(bg.shape):
            raise ValueError("metric ansatz is not sampled on the background grid")
        self.bg = bg
        self.ansatz = ansatz
        self.S = order + 1
        self.frame = ThetaFrame(bg, self.S)
        self.exact = bg.exact

    def c(self, x):
        return _const(x, self.exact)

    @cached_property
    def g(self) -> np.ndarray:
        return self.ansatz.metric(self.S)

    @cached_property
    def ginv(self) -> np.ndarray:
        return matrix_series_inverse(self.g)

    @cached_property
    def nabla_g(self) -> np.ndarray:
        return self.frame.nabla(self.g, "dd")

    @cached_property
    def D_low(self) -> np.ndarray:
        """D_{IJK} from the Koszul-type formula with torsion corrections."""
        ng = self.nabla_g
        Tl = series_einsum("ijl,lk->ijk", self.frame.torsion, self.g, self.S)
        # X[I,J,K] = Y[J,K,I] is einsum 'sjki->sijk'
        jki = lambda a: np.einsum("sjki...->sijk...", a)
        kij = lambda a: np.einsum("skij...->sijk...", a)
        two_d = ng + jki(ng) - kij(ng) - Tl + jki(Tl) - kij(Tl)
        return series_scale(two_d, QI(1, 0) / 2 if self.exact else 0.5)

    @cached_property
    def D(self) -> np.ndarray:
        """D[I, J, K] = D_{IJ}^K."""
        return series_einsum("ijl,lk->ijk", self.D_low, self.ginv, self.S)

    @cached_property
    def gamma(self) -> np.ndarray:
        """Levi-Civita coefficients Gamma_bar + D."""
        return self.frame.gamma_bar + self.D

    @cached_property
    def riemann_pairs(self) -> np.ndarray:
        """Rp[p, I, J] = R_I^J_{K L} for the pair p = (K, L), K < L."""
        S = self.S
        D = self.D
        nD = self.frame.nabla(D, "ddu")
        term = nD[:, PI, PJ] - nD[:, PJ, PI]
        DK = D[:, PI]
        DL = D[:, PJ]
        term = term + series_einsum("pmj,pim->pij", DK, DL, S)
        term = term - series_einsum("pmj,pim->pij", DL, DK, S)
        Tp = self.frame.torsion[:, PI, PJ]
        term = term + series_einsum("pm,mij->pij", Tp, D, S)
        Rb = np.moveaxis(self.frame.curvature[:, :, :, PI, PJ], 3, 1)
        return Rb + term

    @cached_property
    def riemann_up(self) -> np.ndarray:
        """Full R[I, J, K, L] = R_I^J_{KL}."""
        return np.einsum("klp,spij...->sijkl...", PAIR_SIGN, self.riemann_pairs)

    @cached_property
    def riemann_low_pairs(self) -> np.ndarray:
        """Rpp[a, b] = R_{I J K L} with (I, J) pair a, (K, L) pair b; R_IJKL = g_JM R_I^M_KL."""
        Rl = series_einsum("jm,pim->pij", self.g, self.riemann_pairs, self.S)
        return np.swapaxes(Rl[:, :, PI, PJ], 1, 2)

    @cached_property
    def riemann_low(self) -> np.ndarray:
        return np.einsum("ija,klb,sab...->sijkl...", PAIR_SIGN, PAIR_SIGN, self.riemann_low_pairs)

    @cached_property
    def ricci(self) -> np.ndarray:
        """Ric_IJ = R_J^K_{K I}."""
        return np.einsum("kip,spjk...->sij...", PAIR_SIGN, self.riemann_pairs)

    @cached_property
    def einstein(self) -> np.ndarray:
        return self.ricci + series_scale(self.g, QI(3, 0) / 2 if self.exact else 1.5)

    @cached_property
    def scal(self) -> np.ndarray:
        return series_einsum("ij,ij->", self.ginv, self.ricci, self.S)

    @cached_property
    def schouten(self) -> np.ndarray:
        half = QI(1) / 2 if self.exact else 0.5
        twelfth = QI(1) / 12 if self.exact else 1 / 12
        sg = series_mul(self.scal[:, None, None], self.g, self.S)
        return series_scale(self.ricci, half) - series_scale(sg, twelfth)

    @cached_property
    def weyl_pairs(self) -> np.ndarray:
        g = self.g
        P = self.schouten
        gi = lambda A, B: g[:, A[:, None], B[None, :]]
        pi = lambda A, B: P[:, A[:, None], B[None, :]]
        I, J, K, L = PI, PJ, PI, PJ
        S = self.S
        W = self.riemann_low_pairs
        W = W + series_mul(gi(I, K), pi(J, L), S) - series_mul(gi(J, K), pi(I, L), S)
        W = W + series_mul(gi(J, L), pi(I, K), S) - series_mul(gi(I, L), pi(J, K), S)
        return W

    @cached_property
    def det(self) -> np.ndarray:
        g = self.g
        m = [[g[:, i, j] for j in (1, 2, 3)] for i in (1, 2, 3)]
        return series_scale(_det3_series(m), 4)

    @cached_property
    def volume(self) -> np.ndarray:
        """|det g|^{1/2} as a series (det g has negative leading term in this frame)."""
        return series_sqrt(-self.det)

    @cached_property
    def epsilon_unit(self) -> np.ndarray:
        """The series e with eps_{0 1 1bar inf} = e = i |det g|^{1/2}."""
        return series_scale(self.volume, self.c(1j) if not self.exact else QI(0, 1))

    @cached_property
    def epsilon(self) -> np.ndarray:
        sym = levi_civita_symbol()
        e = self.epsilon_unit
        return np.einsum("ijkl,s...->sijkl...", sym, e)

    @cached_property
    def hodge_pairs(self) -> np.ndarray:
        """H[a, b] = eps_{K L}^{P Q} with (K, L) pair a and (P, Q) pair b."""
        gi = self.ginv
        S = self.S
        A, B = PI, PJ
        lam = series_mul(gi[:, A[:, None], PI[None, :]], gi[:, B[:, None], PJ[None, :]], S)
        lam = lam - series_mul(gi[:, B[:, None], PI[None, :]], gi[:, A[:, None], PJ[None, :]], S)
        signed = np.einsum("ac,scb...->sab...", STAR_SIGN, lam)
        e = self.epsilon_unit
        return series_mul(e[:, None, None], signed, S)

    def star_pairs(self, X: np.ndarray) -> np.ndarray:
        """(1/2) eps_{KL}^{PQ} X_{..PQ} for X stored with a trailing pair axis."""
        return series_einsum("xb,ab->xa", X, self.hodge_pairs, self.S)

    def asd(self, X: np.ndarray) -> np.ndarray:
        half = QI(1) / 2 if self.exact else 0.5
        return series_scale(X - self.star_pairs(X), half)

    @cached_property
    def weyl_asd_pairs(self) -> np.ndarray:
        return self.asd(self.weyl_pairs)

    @cached_property
    def weyl_asd(self) -> np.ndarray:
        return np.einsum("ija,klb,sab...->sijkl...", PAIR_SIGN, PAIR_SIGN, self.weyl_asd_pairs)

    @cached_property
    def nabla_schouten(self) -> np.ndarray:
        """nabla_K P_IJ (Levi-Civita), indexed [K, I, J]."""
        return self.frame.nabla(self.schouten, "dd", conn=self.gamma)

    @cached_property
    def cotton(self) -> np.ndarray:
        """C_IJK = nabla_K P_IJ - nabla_J P_IK."""
        NP = self.nabla_schouten
        return np.einsum("skij...->sijk...", NP) - np.einsum("sjik...->sijk...", NP)

    @cached_property
    def cotton_asd(self) -> np.ndarray:
        C2 = self.cotton[:, :, PI, PJ]
        Cm = self.asd(C2)
        return np.einsum("jka,sia...->sijk...", PAIR_SIGN, Cm)

    @cached_property
    def weyl_asd_divergence(self) -> np.ndarray:
        """nabla^I W^-_{IJKL} (Levi-Civita), indexed [J, K, L]."""
        NW = self.frame.nabla(self.weyl_asd, "dddd", conn=self.gamma)
        return series_einsum("ai,aijkl->jkl", self.ginv, NW, self.S)


# --------------------------------------------------------------------------
# functional API
# --------------------------------------------------------------------------

DEFAULT_ORDER = 8


def _tensor(data, variance):
    return ThetaTensor(data, variance)


def extended_cov_derivative(bg: Background, t: ThetaTensor) -> ThetaTensor:
    """nabla_bar t with the derivative index first."""
    fr = ThetaFrame(bg, t.data.shape[0])
    return _tensor(fr.nabla(t.data, t.variance), "d" + t.variance)


def extended_torsion(bg: Background, order: int = DEFAULT_ORDER) -> ThetaTensor:
    return _tensor(ThetaFrame(bg, order + 1).torsion, "ddu")


def extended_curvature(bg: Background, order: int = DEFAULT_ORDER) -> ThetaTensor:
    return _tensor(ThetaFrame(bg, order + 1).curvature, "dudd")


def _geom(bg, m, order=None):
    return m if isinstance(m, ThetaGeometry) else ThetaGeometry(bg, m, order)


def difference_tensor(bg: Background, m: MetricAnsatz, order: int | None = None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).D, "ddu")


def riemann(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).riemann_up, "dudd")


def ricci(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).ricci, "dd")


def einstein(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).einstein, "dd")


def volume_epsilon(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).epsilon, "dddd")


def schouten(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).schouten, "dd")


def weyl(bg, m, order=None) -> ThetaTensor:
    G = _geom(bg, m, order)
    return _tensor(np.einsum("ija,klb,sab...->sijkl...", PAIR_SIGN, PAIR_SIGN, G.weyl_pairs), "dddd")


def weyl_asd(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).weyl_asd, "dddd")


def cotton_asd(bg, m, order=None) -> ThetaTensor:
    return _tensor(_geom(bg, m, order).cotton_asd, "ddd")
