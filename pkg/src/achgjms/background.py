"""Pseudo-hermitian backgrounds in a unitary frame.

A :class:`Background` carries the frame {T, Z_1, Z_1bar} of a three-dimensional
strictly pseudoconvex CR manifold together with its Tanaka-Webster data:
the connection form values omega(T), omega(Z_1), omega(Z_1bar), the torsion
A_11 and the scalar curvature Scal.  Frame commutators are stored as
coefficients ``comm[i, j, k] = theta^k([X_i, X_j])`` in the order
(T, Z_1, Z_1bar).

Two kinds exist:

* ``constant``: a left-invariant homogeneous model with
  [T, Z_1] = -i s Z_1 - a Z_1bar and [Z_1, Z_1bar] = -i T.  Its connection
  has omega(T) = -i s, omega(Z_1) = omega(Z_1bar) = 0, so Scal = s and
  A_11 = a, and every Tanaka-Webster derivative of a constant field is again
  constant.  Exact arithmetic is used throughout.
* ``grid``: a contact form and T^{1,0} generator on a periodic chart,
  processed through the structure equations with spectral derivatives.

Index words over {0, 1, 1bar} are written with the characters ``'0'``,
``'1'`` and ``'b'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import sympy as sp

from .series import (
    QI, FieldValue, exact_array, is_exact, max_abs, qi, zeros,
)
from .spectral import GridSpec, spectral_gradient

__all__ = [
    "ChartSpec", "Background", "JetTable", "BuildError", "constant_background",
    "heisenberg", "build_background_from_chart", "heisenberg_chart",
    "torus_chart", "tw_derivative", "cartan_tensor", "obstruction_density",
    "structure_residuals", "sublaplacian", "jet_table",
]

DIRECTIONS = {"0": 0, "1": 1, "b": 2}
COORDS = sp.symbols("x y t", real=True)


class BuildError(ValueError):
    """Raised when chart data violate the contact or pseudoconvexity conditions."""


@dataclass(frozen=True, eq=False)
class ChartSpec:
    """Contact form and T^{1,0} generator on a periodic chart (x, y, t).

    Components are sympy-parsable strings in x, y, t, sympy expressions, or
    arrays already sampled on the grid.
    """

    periods: tuple[float, float, float]
    theta: tuple
    z: tuple
    name: str = "chart"

    def sympy_components(self):
        def conv(c):
            if isinstance(c, np.ndarray):
                raise TypeError("sampled components have no symbolic form")
            if isinstance(c, str):
                return sp.sympify(c, locals=dict(zip(("x", "y", "t"), COORDS)))
            return sp.sympify(c)
        return [conv(c) for c in self.theta], [conv(c) for c in self.z]

    def sample(self, grid: GridSpec, shift=(0.0, 0.0, 0.0)):
        """Sample theta and Z components on ``grid`` (optionally shifted)."""
        X = [c + s for c, s in zip(grid.coords, shift)]

        def samp(c):
            if isinstance(c, np.ndarray):
                return np.broadcast_to(c.astype(complex), grid.shape).copy()
            expr = c if isinstance(c, sp.Basic) else sp.sympify(
                c, locals=dict(zip(("x", "y", "t"), COORDS)))
            f = sp.lambdify(COORDS, expr, "numpy")
            return np.broadcast_to(np.asarray(f(*X), dtype=complex), grid.shape).copy()
        return [samp(c) for c in self.theta], [samp(c) for c in self.z]


@dataclass(frozen=True, eq=False)
class JetTable:
    """Covariant-derivative jets of Scal, A_11 and A_1bar1bar on a constant background.

    Keys look like ``"Scal,11"`` or ``"A11,b1"``: base symbol, comma, then the
    derivative word (first derivative first).
    """

    entries: Mapping[str, QI]
    depth: int

    def __getitem__(self, key):
        base, _, word = key.partition(",")
        if len(word) > self.depth:
            raise KeyError(f"jet {key!r} exceeds stored depth {self.depth}")
        return self.entries.get(key, QI(0))

    def conjugation_defect(self) -> bool:
        """True when some entry differs from the conjugate of its conjugate key."""
        for key, val in self.entries.items():
            if self.entries.get(_conj_key(key), None) is None:
                continue
            if self.entries[_conj_key(key)] != val.conjugate():
                return True
        return False


def _conj_word(word):
    return word.translate(str.maketrans("1b", "b1"))


def _conj_key(key):
    base, _, word = key.partition(",")
    base = {"A11": "Abb", "Abb": "A11"}.get(base, base)
    return f"{base},{_conj_word(word)}" if word else base


@dataclass(frozen=True, eq=False)
class Background:
    kind: str
    scal: np.ndarray
    a11: np.ndarray
    omega: np.ndarray
    comm: np.ndarray
    grid: GridSpec | None = None
    frame: np.ndarray | None = None
    coframe: np.ndarray | None = None
    name: str = "background"
    build_residuals: dict | None = None
    periodic: bool = True
    tol: float = 1e-10
    info: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return is_exact(self.scal)

    @property
    def shape(self):
        return self.scal.shape

    def vec(self, i: int, f: np.ndarray) -> np.ndarray:
        """Apply frame vector i (0 = T, 1 = Z_1, 2 = Z_1bar) to f (grid axes last)."""
        if self.kind == "constant":
            return zeros(np.shape(f), self.exact)
        g = spectral_gradient(f, self.grid)
        X = self.frame[i]
        return X[0] * g[0] + X[1] * g[1] + X[2] * g[2]

    def vec_all(self, f: np.ndarray) -> list[np.ndarray]:
        """All three frame derivatives of f, sharing one transform."""
        if self.kind == "constant":
            z = zeros(np.shape(f), self.exact)
            return [z, z, z]
        g = spectral_gradient(f, self.grid)
        return [X[0] * g[0] + X[1] * g[1] + X[2] * g[2] for X in self.frame]

    def field(self, data) -> FieldValue:
        return FieldValue(data, self.tol)

    @property
    def volume_density(self) -> np.ndarray:
        """|theta ^ dtheta| / |dx dy dt| on the grid."""
        if self.kind != "grid":
            raise ValueError("volume density needs a grid background")
        # theta ^ dtheta = i theta ^ theta^1 ^ theta^1bar = i det(coframe) dx dy dt
        return np.abs(np.real(1j * _det3(self.coframe)))


# --------------------------------------------------------------------------
# constant backgrounds
# --------------------------------------------------------------------------

def _constant_structure(s: QI, a: QI):
    """Commutators and connection of the homogeneous model with Scal = s, A_11 = a."""
    wT = QI(0, -1) * s
    comm = zeros((3, 3, 3), True)

    def put(i, j, vec):
        for k, v in enumerate(vec):
            comm[i, j, k] = qi(v)
            comm[j, i, k] = -qi(v)
    put(0, 1, (0, wT, -a))
    put(0, 2, (0, -a.conjugate(), -wT))
    put(1, 2, (QI(0, -1), 0, 0))
    omega = exact_array([wT, 0, 0])
    return comm, omega


def constant_background(scal, a11=0, jets: Mapping[str, object] | None = None,
                        name: str | None = None) -> Background:
    """Homogeneous model with constant Scal = ``scal`` and A_11 = ``a11`` (exact).

    ``jets`` may supply expected covariant-derivative values; they are checked
    against the model rather than trusted.
    """
    s = qi(scal)
    a = qi(a11)
    if s.im:
        raise BuildError("Scal must be real")
    comm, omega = _constant_structure(s, a)
    scal_arr = exact_array(s)
    a_arr = exact_array(a)
    bg = Background("constant", scal_arr, a_arr, omega, comm,
                    name=name or f"constant(scal={s.to_pair()[0]},a11={a.to_pair()})")
    if jets:
        table = jet_table(bg, max(len(k.partition(",")[2]) for k in jets))
        bad = {k: (qi(v), table[k]) for k, v in jets.items() if qi(v) != table[k]}
        if bad:
            raise BuildError(f"jets inconsistent with the structure equations: {bad}")
    return bg


def heisenberg() -> Background:
    return constant_background(0, 0, name="heisenberg")


def jet_table(bg: Background, depth: int) -> JetTable:
    """Tabulate all covariant derivatives of Scal, A_11, A_1bar1bar up to ``depth``."""
    if bg.kind != "constant":
        raise ValueError("jet tables describe constant backgrounds")
    entries = {}
    bases = {"Scal": (bg.scal, ""), "A11": (bg.a11, "11"), "Abb": (np.conjugate(bg.a11), "bb")}
    for name, (val, word) in bases.items():
        layer = {"": val}
        entries[name] = np.asarray(val)[()]
        for d in range(depth):
            nxt = {}
            for w, v in layer.items():
                for c in "01b":
                    nv = tw_derivative(bg, FieldValue(v), word + w, c).data
                    nxt[w + c] = nv
                    entries[f"{name},{w + c}"] = np.asarray(nv)[()]
            layer = nxt
    return JetTable(entries, depth)


# --------------------------------------------------------------------------
# chart backgrounds
# --------------------------------------------------------------------------

class _GridOps:
    def __init__(self, grid):
        self.grid = grid

    def d(self, f, a):
        f = np.asarray(f, dtype=complex)
        if f.shape != self.grid.shape:
            f = np.broadcast_to(f, self.grid.shape)
        return spectral_gradient(f, self.grid)[a]

    conj = staticmethod(np.conjugate)
    sqrt = staticmethod(np.sqrt)


class _SymOps:
    def d(self, f, a):
        return sp.diff(f, COORDS[a])

    conj = staticmethod(sp.conjugate)
    sqrt = staticmethod(sp.sqrt)


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _inv_transpose3(m):
    """Rows of the result pair with rows of m to the identity: sum_a r[k][a] m[j][a] = delta."""
    det = _det3(m)
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [x for x in range(3) if x != i]
            c = [x for x in range(3) if x != j]
            minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
            cof[i][j] = minor if (i + j) % 2 == 0 else -minor
    return [[cof[k][a] / det for a in range(3)] for k in range(3)]


def _structure_pipeline(ops, th, Z, Zb):
    """Structure equations from coordinate components; returns a dict of quantities."""
    dth = [[ops.d(th[b], a) - ops.d(th[a], b) for b in range(3)] for a in range(3)]
    h = 0
    for a in range(3):
        for b in range(3):
            h = h + dth[a][b] * Z[a] * Zb[b]
    h = -1j * h if not isinstance(h, sp.Basic) else -sp.I * h
    h_re = (h + ops.conj(h)) / 2
    sq = ops.sqrt(h_re)
    Z1 = [c / sq for c in Z]
    Z1b = [c / sq for c in Zb]
    v = [dth[1][2], dth[2][0], dth[0][1]]
    contact = th[0] * v[0] + th[1] * v[1] + th[2] * v[2]
    T = [c / contact for c in v]
    frame = [T, Z1, Z1b]
    cof = _inv_transpose3(frame)

    def apply(X, f):
        return X[0] * ops.d(f, 0) + X[1] * ops.d(f, 1) + X[2] * ops.d(f, 2)

    comm = {}
    for i, j in ((0, 1), (0, 2), (1, 2)):
        br = [apply(frame[i], frame[j][a]) - apply(frame[j], frame[i][a]) for a in range(3)]
        comm[i, j] = [sum(cof[k][a] * br[a] for a in range(3)) for k in range(3)]
    wT = comm[0, 1][1]
    a11 = -comm[0, 1][2]
    wZb = -comm[1, 2][1]
    wZ = -comm[1, 2][2]
    omega = [wT, wZ, wZb]
    scal = apply(Z1, wZb) - apply(Z1b, wZ) - sum(comm[1, 2][k] * omega[k] for k in range(3))
    theta_Z = sum(th[a] * Z[a] for a in range(3))
    return dict(h=h, h_re=h_re, contact=contact, frame=frame, coframe=cof, comm=comm,
                omega=omega, a11=a11, scal=scal, theta_Z=theta_Z)


def _I(ops):
    return sp.I if isinstance(ops, _SymOps) else 1j


def _coordinate_residuals(ops, coframe, omega, a11, sample=lambda f: f):
    """Max-norm residuals of the structure equations in coordinate form."""
    th, t1, tb = coframe
    # the structure equation carries A^1_1bar = A_1bar1bar = conj(A_11)
    a11b = ops.conj(a11)
    w = [omega[0] * th[a] + omega[1] * t1[a] + omega[2] * tb[a] for a in range(3)]
    r1 = []
    r2 = []
    for a in range(3):
        for b in range(a + 1, 3):
            dth = ops.d(th[b], a) - ops.d(th[a], b)
            dt1 = ops.d(t1[b], a) - ops.d(t1[a], b)
            r1.append(sample(dth - _I(ops) * (t1[a] * tb[b] - t1[b] * tb[a])))
            rhs = (t1[a] * w[b] - t1[b] * w[a]) + a11b * (th[a] * tb[b] - th[b] * tb[a])
            r2.append(sample(dt1 - rhs))
    return max(max_abs(np.asarray(r)) for r in r1), max(max_abs(np.asarray(r)) for r in r2)


def build_background_from_chart(spec: ChartSpec, resolution, derivatives: str = "spectral",
                                residual_tol: float = 1e-8) -> Background:
    """Tanaka-Webster data of ``spec`` sampled on a periodic grid.

    ``derivatives="spectral"`` differentiates sampled data (the chart must be
    periodic); ``"symbolic"`` differentiates the component expressions exactly
    and samples the results, which also admits non-periodic coefficients that
    only multiply derivatives along collapsed (single-node) axes.
    """
    grid = GridSpec(tuple(float(p) for p in spec.periods), tuple(int(n) for n in resolution))
    if derivatives == "spectral":
        th, Z = spec.sample(grid)
        th_s, Z_s = spec.sample(grid, shift=spec.periods)
        if max(max_abs(a - b) for a, b in zip(th + Z, th_s + Z_s)) > 1e-9:
            raise BuildError("chart data are not periodic; use derivatives='symbolic'")
        ops = _GridOps(grid)
        Zb = [np.conjugate(c) for c in Z]
        # degenerate nodes divide by zero here; they are rejected just below
        with np.errstate(divide="ignore", invalid="ignore"):
            q = _structure_pipeline(ops, th, Z, Zb)
        sample = lambda f: np.broadcast_to(np.asarray(f, dtype=complex), grid.shape)
        periodic = True
    elif derivatives == "symbolic":
        ths, Zs = spec.sympy_components()
        ops = _SymOps()
        Zbs = [sp.conjugate(c) for c in Zs]
        qs = _structure_pipeline(ops, ths, Zs, Zbs)
        fns = {}

        def sample(expr):
            if isinstance(expr, np.ndarray):
                return expr
            key = id(expr)
            if key not in fns:
                fns[key] = sp.lambdify(COORDS, expr, "numpy")
            val = np.asarray(fns[key](*grid.coords), dtype=complex)
            return np.broadcast_to(val, grid.shape).copy()
        q = _sample_tree(qs, sample)
        periodic = False
    else:
        raise ValueError(f"unknown derivative route {derivatives!r}")

    h = sample(q["h"])
    contact = sample(q["contact"])
    if np.min(np.abs(contact)) <= 1e-12:
        raise BuildError("contact condition fails: theta ^ dtheta vanishes at a node")
    if np.min(h.real) <= 1e-12:
        raise BuildError("Levi form is not positive at some node")
    if max_abs(sample(q["theta_Z"])) > 1e-9:
        raise BuildError("Z is not tangent to ker theta")

    frame = np.array([[sample(c) for c in X] for X in q["frame"]])
    coframe = np.array([[sample(c) for c in row] for row in q["coframe"]])
    comm = zeros((3, 3, 3) + grid.shape, False)
    for (i, j), vec in q["comm"].items():
        for k in range(3):
            comm[i, j, k] = sample(vec[k])
            comm[j, i, k] = -comm[i, j, k]
    omega = np.array([sample(w) for w in q["omega"]])
    a11 = sample(q["a11"])
    scal = sample(q["scal"])

    if derivatives == "symbolic":
        r1, r2 = _coordinate_residuals(ops, qs["coframe"], qs["omega"], qs["a11"], sample)
        build_res = {"dtheta": r1, "dtheta1": r2}
    else:
        build_res = None
    bg = Background("grid", scal, a11, omega, comm, grid=grid, frame=frame, coframe=coframe,
                    name=spec.name, build_residuals=build_res, periodic=periodic,
                    info={"imag_scal": max_abs(scal.imag), "derivatives": derivatives})
    rep = structure_residuals(bg)
    worst = max(rep.values())
    if worst > residual_tol:
        raise BuildError(f"structure-equation residual {worst:.3e} above {residual_tol:.1e}: {rep}")
    return bg


def _sample_tree(obj, sample):
    if isinstance(obj, dict):
        return {k: _sample_tree(v, sample) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sample_tree(v, sample) for v in obj]
    return sample(obj)


def heisenberg_chart() -> ChartSpec:
    """theta = dt + 2x dy - 2y dx with Z = d/dz + i zbar d/dt, z = x + i y."""
    return ChartSpec((2 * np.pi, 2 * np.pi, 2 * np.pi),
                     ("-2*y", "2*x", "1"),
                     ("1/2", "-I/2", "y + I*x"), name="heisenberg-chart")


def torus_chart(upsilon: str = "0", mu: str = "0") -> ChartSpec:
    """Periodic chart on the 3-torus built from the unit-circle contact form.

    theta = exp(upsilon) (cos t dx + sin t dy) and Z = Z0 + mu conj(Z0) with
    Z0 = (d/dt - i(-sin t d/dx + cos t d/dy)) / sqrt(2).  For upsilon = mu = 0
    the structure is homogeneous with Scal = 1/2 and A_11 = -i/2.
    """
    r = "sqrt(2)"
    z0 = (f"I*sin(t)/{r}", f"-I*cos(t)/{r}", f"1/{r}")
    z0b = (f"-I*sin(t)/{r}", f"I*cos(t)/{r}", f"1/{r}")
    z = tuple(f"({a}) + ({mu})*({b})" for a, b in zip(z0, z0b))
    th = (f"exp({upsilon})*cos(t)", f"exp({upsilon})*sin(t)", "0")
    return ChartSpec((2 * np.pi, 2 * np.pi, 2 * np.pi), th, z,
                     name=f"torus(upsilon={upsilon},mu={mu})")


# --------------------------------------------------------------------------
# Tanaka-Webster calculus on a background
# --------------------------------------------------------------------------

def _data(f):
    return f.data if isinstance(f, FieldValue) else np.asarray(f)


def tw_derivative(bg: Background, field, word: str, direction: str) -> FieldValue:
    """Component ``f_{word, direction}`` of the covariant derivative.

    ``word`` lists the lower indices of ``field`` (characters 0, 1, b).  Each
    index 1 contributes -omega(X) f and each index 1bar contributes +omega(X) f.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of 0, 1, b; got {direction!r}")
    if any(c not in DIRECTIONS for c in word):
        raise ValueError(f"bad index word {word!r}")
    d = DIRECTIONS[direction]
    f = _data(field)
    out = bg.vec(d, f)
    n = word.count("1") - word.count("b")
    if n:
        out = out - bg.omega[d] * f * n
    return FieldValue(out, bg.tol)


def cartan_tensor(bg: Background) -> FieldValue:
    """Q_11 = Scal_{,11}/6 + (i/2) Scal A_11 - A_{11,0} - (2i/3) A_{11,1bar 1}."""
    ex = bg.exact
    s1 = tw_derivative(bg, bg.scal, "", "1")
    s11 = tw_derivative(bg, s1, "1", "1").data
    a0 = tw_derivative(bg, bg.a11, "11", "0").data
    ab = tw_derivative(bg, bg.a11, "11", "b")
    ab1 = tw_derivative(bg, ab, "11b", "1").data
    from fractions import Fraction as F
    if ex:
        q = s11 * QI(F(1, 6)) + bg.scal * bg.a11 * QI(0, F(1, 2)) - a0 - ab1 * QI(0, F(2, 3))
    else:
        q = s11 / 6 + 0.5j * bg.scal * bg.a11 - a0 - (2j / 3) * ab1
    return FieldValue(q, bg.tol)


def obstruction_density(bg: Background, report: dict | None = None) -> FieldValue:
    """O = Q_{11,1bar 1bar} - i A_1bar1bar Q_11 (indices moved with h = 1).

    In float mode the imaginary part is returned in ``report['imag_defect']``
    and the real part is returned.
    """
    q = cartan_tensor(bg)
    qb = tw_derivative(bg, q, "11", "b")
    qbb = tw_derivative(bg, qb, "11b", "b").data
    abar = np.conjugate(bg.a11)
    if bg.exact:
        o = qbb - QI(0, 1) * abar * q.data
        return FieldValue(o, bg.tol)
    o = qbb - 1j * abar * q.data
    if report is not None:
        report["imag_defect"] = max_abs(o.imag)
    return FieldValue(o.real.astype(complex), bg.tol)


def sublaplacian(bg: Background, f) -> FieldValue:
    """Delta_b f = -(f_{,1 1bar} + f_{,1bar 1}) computed from frame derivatives."""
    f = _data(f)
    f1 = tw_derivative(bg, f, "", "1")
    fb = tw_derivative(bg, f, "", "b")
    f1b = tw_derivative(bg, f1, "1", "b").data
    fb1 = tw_derivative(bg, fb, "b", "1").data
    return FieldValue(-(f1b + fb1), bg.tol)


def _frame_residuals(bg: Background):
    """Structure equations evaluated on frame pairs for homogeneous models.

    For left-invariant forms d alpha(X, Y) = -alpha([X, Y]).
    """
    c = bg.comm
    w = bg.omega
    a = bg.a11[()]
    # coframe values on frame vectors: theta^k(X_i) = delta
    def wedge(k, l, i, j):
        return (1 if (k, l) == (i, j) else 0) - (1 if (k, l) == (j, i) else 0)
    r1 = []
    r2 = []
    for i in range(3):
        for j in range(i + 1, 3):
            d0 = -c[i, j, 0]
            d1 = -c[i, j, 1]
            r1.append(d0 - QI(0, 1) * wedge(1, 2, i, j))
            # theta^1 ^ omega (X_i, X_j) = theta^1(X_i) omega(X_j) - theta^1(X_j) omega(X_i)
            t1w = (w[j] if i == 1 else 0) - (w[i] if j == 1 else 0)
            r2.append(d1 - t1w - a.conjugate() * wedge(0, 2, i, j))
    r3 = [w[0] + np.conjugate(w[0]), w[1] + np.conjugate(w[2])]
    f = lambda xs: max(abs(qi(x)) for x in xs)
    return {"dtheta": f(r1), "dtheta1": f(r2), "compatibility": f(r3)}


def structure_residuals(bg: Background) -> dict:
    """Max-norm residuals of dtheta - i theta^1^theta^1bar, of the dtheta^1 equation
    and of omega + conj(omega) = 0."""
    if bg.kind == "constant":
        return _frame_residuals(bg)
    compat = max(max_abs(bg.omega[0] + np.conjugate(bg.omega[0])),
                 max_abs(bg.omega[1] + np.conjugate(bg.omega[2])))
    if not bg.periodic:
        out = dict(bg.build_residuals or {})
        out["compatibility"] = compat
        return out
    ops = _GridOps(bg.grid)
    r1, r2 = _coordinate_residuals(ops, [list(r) for r in bg.coframe], list(bg.omega), bg.a11)
    return {"dtheta": r1, "dtheta1": r2, "compatibility": compat}
