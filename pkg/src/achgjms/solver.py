"""Order-by-order construction of the normal-form Einstein metric with prescribed eta.

Starting from the zero ansatz, the rho^m coefficients of phi are fixed for
m = 1, ..., N.  At each step the full Einstein tensor and anti-self-dual
Weyl tensor of the current ansatz are recomputed to order m, and the order-m
update psi solves a small linear system read from the variation table:

* generic m: (E_00, E_11bar) -> (psi00, psi11b), E_inf1 -> psi01, E_11 -> psi11;
* m = 4: psi11 from W^-_{inf1inf1} instead of E_11;
* m = 6: (psi00, psi11b) from {E_infinf, W^-_{inf0inf0} = lambda * O};
* m = 8: (psi00, psi11b) from {E_infinf, E_00}.

Equations not used at a step are checked to vanish once the next order is
computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as F
import hashlib
import json

import numpy as np

from .background import Background, obstruction_density
from .series import (
    QI, FieldValue, is_zero, max_abs, real_part, imag_part, zeros, qi,
)
from .theta import MetricAnsatz, ThetaGeometry, parse_word, PAIRS

__all__ = [
    "ROWS", "COLS", "variation_matrix", "block_determinant", "SolveConfig",
    "SolveState", "SolveResult", "SolveError", "solve_step", "solve",
    "eta_extract", "verify", "lambda_batch_report", "probe_variation",
    "E_WORDS", "imposed_and_verified",
]

ROWS = ("E_ii", "E_i0", "E_i1", "E_00", "E_01", "E_11b", "E_11", "W_i1i1", "W_i0i0")
COLS = ("phi00", "phi11b", "phi01", "phi11")
E_WORDS = {"E_ii": "ii", "E_i0": "i0", "E_i1": "i1", "E_00": "00", "E_01": "01",
           "E_11b": "1b", "E_11": "11"}
_W_PAIR = {"W_i1i1": 1, "W_i0i0": 0}  # pair index of (inf, 1) and (inf, 0)
assert PAIRS[1] == (0, 2) and PAIRS[0] == (0, 1)


class SolveError(RuntimeError):
    """A singular system or a verification failure during the construction."""


def variation_matrix(m: int) -> dict[str, tuple[QI, QI, QI, QI]]:
    """Order-m change of each row per unit (psi00, psi11b, psi01, psi11) at order m."""
    if m < 1:
        raise ValueError("m must be at least 1")
    z = QI(0)
    q = lambda x: QI(F(x))
    return {
        "E_ii": (q(-F(m * (m - 4), 2)), q(-m * (m - 2)), z, z),
        "E_i0": (z, z, z, z),
        "E_i1": (z, z, QI(0, -F(m + 1, 2)), z),
        "E_00": (q(-F(m * m - 6 * m - 4, 8)), q(F(m - 2, 2)), z, z),
        "E_01": (z, z, q(-F((m + 1) * (m - 5), 8)), z),
        "E_11b": (q(F(m - 4, 8)), q(-F(m * m - 6 * m - 8, 8)), z, z),
        "E_11": (z, z, z, q(-F(m * (m - 4), 8))),
        "W_i1i1": (z, z, z, q(F(m * m - 2 * m, 8))),
        "W_i0i0": (q(F(m * m + 3 * m + 2, 12)), q(-F(m * m + 4 * m + 4, 12)), z, z),
    }


def block_determinant(m: int) -> QI:
    """Determinant of the (E_00, E_11bar) block in (psi00, psi11b)."""
    v = variation_matrix(m)
    return v["E_00"][0] * v["E_11b"][1] - v["E_00"][1] * v["E_11b"][0]


def imposed_and_verified(m: int) -> tuple[list[str], list[str]]:
    """Rows imposed at step m and rows that must vanish without being imposed."""
    if m == 4:
        return ["E_00", "E_11b", "E_i1", "W_i1i1"], ["E_ii", "E_i0", "E_01", "E_11"]
    if m == 6:
        return ["E_ii", "W_i0i0", "E_i1", "E_11"], ["E_00", "E_11b", "E_i0", "E_01"]
    if m == 8:
        return ["E_ii", "E_00", "E_i1", "E_11"], ["E_11b", "E_i0", "E_01"]
    return ["E_00", "E_11b", "E_i1", "E_11"], ["E_ii", "E_i0", "E_01"]


@dataclass(frozen=True)
class SolveConfig:
    order: int = 10
    lam: object = 0
    tol: float = 1e-8
    check_variation: bool = True
    check_cotton: bool = True
    strict: bool = True

    def __post_init__(self):
        if self.order < 9:
            raise ValueError("truncation order must be at least 9 to reach the special steps")


@dataclass
class SolveState:
    ansatz: MetricAnsatz
    m: int
    records: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SolveResult:
    ansatz: MetricAnsatz
    lam: object
    order: int
    background: str
    exact: bool
    records: list
    eta: FieldValue
    obstruction: FieldValue
    einstein_orders: list
    weyl_orders: list
    weyl_i0i0: np.ndarray
    config_hash: str = ""
    bg: Background | None = None
    residuals: list = field(default_factory=list)

    @property
    def coefficients(self) -> dict:
        """Series of the metric components g_00, g_01, g_11, g_11bar (order-0 included)."""
        g = self.ansatz.metric()
        return {"g00": g[:, 1, 1], "g01": g[:, 1, 2], "g11": g[:, 2, 2], "g11bar": g[:, 2, 3]}


def _solve2(a, b, rhs1, rhs2, exact, scale):
    """Solve [[a0, a1], [b0, b1]] (x, y) = (rhs1, rhs2) pointwise."""
    det = a[0] * b[1] - a[1] * b[0]
    if exact:
        if not det:
            raise SolveError("singular 2x2 system")
        x = (rhs1 * b[1] - rhs2 * a[1]) / det
        y = (a[0] * rhs2 - b[0] * rhs1) / det
        return x, y
    det = complex(det)
    norm = max(abs(complex(c)) for c in (*a[:2], *b[:2]))
    if abs(det) <= 1e-12 * norm * norm:
        raise SolveError("singular 2x2 system")
    x = (rhs1 * complex(b[1]) - rhs2 * complex(a[1])) / det
    y = (complex(a[0]) * rhs2 - complex(b[0]) * rhs1) / det
    return x, y


def _row_values(G: ThetaGeometry, k: int) -> dict:
    E = G.einstein
    out = {name: E[(k,) + parse_word(w)] for name, w in E_WORDS.items()}
    W = G.weyl_asd_pairs
    for name, p in _W_PAIR.items():
        out[name] = W[k, p, p]
    return out


def _bianchi(G: ThetaGeometry, m: int, cotton: bool) -> dict:
    """Residuals of the Bianchi-type relations at order m (valid when E = O(rho^m))."""
    ex = G.exact
    c = (lambda x: QI(F(x))) if ex else (lambda x: float(F(x)))
    ci = QI(0, 4) if ex else 4j
    E = G.einstein[m]
    e = lambda w: E[parse_word(w)]
    out = {
        "B1": c(m - 8) * e("ii") - c(4 * (m - 4)) * e("00") - c(8 * (m - 2)) * e("1b"),
        "B2": c(m - 6) * e("i0"),
        "B3": c(m - 5) * e("i1") - ci * e("01"),
    }
    if cotton:
        C = G.cotton_asd[m]
        cm = lambda w: C[parse_word(w)]
        out["C1"] = cm("1i1") + c(F(m - 2, 4)) * e("11")
        out["C2"] = cm("0i0") - (c(F(-5 * m, 24)) * e("00") + c(F(m - 12, 96)) * e("ii")
                                 + c(F(m + 6, 12)) * e("1b"))
        out["C3"] = cm("ii0") + c(F(m - 2, 4)) * e("i0")
    return out


def _norm(v) -> float:
    return max_abs(np.asarray(v))


def solve_step(state: SolveState, lam, bg: Background, target=None,
               config: SolveConfig | None = None) -> SolveState:
    """Fix the order-m coefficients of the ansatz; returns the state at m + 1.

    ``target`` is the order-6 value prescribed for W^-_{inf0inf0} (lambda * O);
    it is computed from the background when omitted.
    """
    cfg = config or SolveConfig(order=max(9, state.m))
    m = state.m
    ex = bg.exact
    if target is None:
        target = _eta_target(bg, lam)
    G = ThetaGeometry(bg, state.ansatz, order=m)
    _check_invariant(G, m, state, cfg)
    rows = _row_values(G, m)
    scale = max(1.0, max(_norm(v) for v in rows.values()))
    rec = {"m": m, "pre": {k: _norm(v) for k, v in rows.items()}, "scale": scale}
    bres = _bianchi(G, m, cfg.check_cotton)
    rec["bianchi"] = {k: _norm(v) / scale for k, v in bres.items()}
    V = variation_matrix(m)
    neg = lambda v: -v

    # psi01 and psi11 rows are diagonal
    psi01 = neg(rows["E_i1"]) / (V["E_i1"][2] if ex else complex(V["E_i1"][2]))
    if m == 4:
        psi11 = neg(rows["W_i1i1"]) / (V["W_i1i1"][3] if ex else complex(V["W_i1i1"][3]))
    else:
        psi11 = neg(rows["E_11"]) / (V["E_11"][3] if ex else complex(V["E_11"][3]))

    if m == 6:
        if cfg.check_variation:
            rec["variation_check"] = probe_variation(bg, state.ansatz, m, ("E_ii", "W_i0i0"))
        a, b = V["E_ii"], V["W_i0i0"]
        r1, r2 = neg(rows["E_ii"]), target - rows["W_i0i0"]
    elif m == 8:
        a, b = V["E_ii"], V["E_00"]
        r1, r2 = neg(rows["E_ii"]), neg(rows["E_00"])
    else:
        a, b = V["E_00"], V["E_11b"]
        r1, r2 = neg(rows["E_00"]), neg(rows["E_11b"])
    psi00, psi11b = _solve2(a, b, r1, r2, ex, scale)

    imag = max(_norm(imag_part(np.asarray(psi00))), _norm(imag_part(np.asarray(psi11b))))
    rec["imag_defect"] = imag / scale
    if ex and imag:
        raise SolveError(f"non-real diagonal update at order {m}")
    psi = {"phi00": real_part(np.asarray(psi00)), "phi11b": real_part(np.asarray(psi11b)),
           "phi01": np.asarray(psi01), "phi11": np.asarray(psi11)}
    rec["psi"] = {k: _norm(v) for k, v in psi.items()}
    new = state.ansatz.add_order(m, psi)
    return SolveState(new, m + 1, state.records + [rec])


def _check_invariant(G, m, state, cfg):
    """Fill in the post-update residuals of the previous step and enforce E = O(rho^m)."""
    if m <= 1 or not state.records:
        return
    prev = state.records[-1]
    post = _row_values(G, m - 1)
    scale = prev["scale"]
    prev["post"] = {k: _norm(v) / scale for k, v in post.items()}
    lower = max((_norm(G.einstein[k]) for k in range(m)), default=0.0)
    prev["einstein_lower"] = lower / scale
    imposed, verified = imposed_and_verified(m - 1)
    check = [r for r in imposed + verified if not r.startswith("W")]
    worst = max(prev["post"][r] for r in check)
    prev["ok"] = worst <= (0 if G.exact else cfg.tol)
    if cfg.strict and not prev["ok"]:
        raise SolveError(f"order {m - 1} residual {worst:.3e} exceeds tolerance: {prev['post']}")


def _eta_target(bg: Background, lam):
    O = obstruction_density(bg).data
    if bg.exact:
        return qi(lam) * O
    return complex(lam) * O


def probe_variation(bg: Background, ansatz: MetricAnsatz, m: int, rows=ROWS) -> dict:
    """Measure the order-m variation table with unit perturbations; returns the
    max deviation from :func:`variation_matrix` per row."""
    base = _row_values(ThetaGeometry(bg, ansatz, order=m), m)
    V = variation_matrix(m)
    ex = bg.exact
    one = QI(1) if ex else 1.0
    dev = {r: 0.0 for r in rows}
    for j, col in enumerate(COLS):
        unit = zeros(bg.shape, ex) + one
        pert = _row_values(ThetaGeometry(bg, ansatz.add_order(m, {col: unit}), order=m), m)
        for r in rows:
            want = V[r][j] if ex else complex(V[r][j])
            dev[r] = max(dev[r], _norm((pert[r] - base[r]) - want))
    return dev


def solve(bg: Background, config: SolveConfig) -> SolveResult:
    """Run solve_step for m = 1..N and evaluate the final residuals."""
    N = config.order
    state = SolveState(MetricAnsatz.zero(N, bg.shape, bg.exact), 1)
    target = _eta_target(bg, config.lam)
    for _ in range(N):
        state = solve_step(state, config.lam, bg, target, config)
    G = ThetaGeometry(bg, state.ansatz, order=N)
    _check_invariant(G, N + 1, state, config)
    E = G.einstein
    W = G.weyl_asd_pairs
    e_orders = [_norm(E[k]) for k in range(N + 1)]
    w_orders = [_norm(W[k]) for k in range(N + 1)]
    w00 = W[:, 0, 0]
    eta = FieldValue(w00[6] if N >= 6 else zeros(bg.shape, bg.exact), bg.tol)
    O = obstruction_density(bg)
    table = [(k, name, _norm(v)) for k in range(N + 1) for name, v in _row_values(G, k).items()]
    return SolveResult(state.ansatz, config.lam, N, bg.name, bg.exact, state.records, eta, O,
                       e_orders, w_orders, w00, config_hash=_config_hash(bg, config), bg=bg,
                       residuals=table)


def _config_hash(bg, cfg) -> str:
    lam = cfg.lam.to_pair() if isinstance(cfg.lam, QI) else str(cfg.lam)
    blob = json.dumps({"bg": bg.name, "N": cfg.order, "lam": lam, "tol": cfg.tol,
                       "exact": bg.exact}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def eta_extract(result: SolveResult, tol: float = 1e-8) -> FieldValue:
    """Order-6 coefficient of W^-_{inf0inf0}; requires W^- = O(rho^6)."""
    scale = max(1.0, max(result.einstein_orders[:1] + [0.0]))
    lower = max(result.weyl_orders[:6])
    if (result.exact and lower) or (not result.exact and lower > tol * scale):
        raise SolveError(f"W^- is not O(rho^6): lower-order norm {lower:.3e}")
    return result.eta


def _first_nonzero(orders, tol):
    for k, v in enumerate(orders):
        if v > tol:
            return k
    return len(orders)


def verify(result: SolveResult, tol: float = 1e-8) -> dict:
    """Residual orders, evenness and normal-form checks of one solve."""
    t = 0.0 if result.exact else tol
    c = result.coefficients
    N = result.order
    odd = [k for k in range(1, N + 1, 2)]
    even = [k for k in range(2, N + 1, 2)]
    parity = {
        "g00": max((_norm(c["g00"][k]) for k in odd), default=0.0),
        "g11": max((_norm(c["g11"][k]) for k in odd), default=0.0),
        "g11bar": max((_norm(c["g11bar"][k]) for k in odd), default=0.0),
        "g01": max((_norm(c["g01"][k]) for k in even), default=0.0),
    }
    rep = {
        "einstein_vanishing_order": _first_nonzero(result.einstein_orders, t),
        "weyl_asd_vanishing_order": _first_nonzero(result.weyl_orders, t),
        "evenness_defect": parity,
        "evenness_ok": all(v <= t for v in parity.values()),
        "steps_ok": all(r.get("ok", True) for r in result.records),
        "bianchi_max": max((max(r["bianchi"].values()) for r in result.records), default=0.0),
        "eta_minus_lambda_O": _norm(result.eta.data - _eta_target_from(result)),
    }
    rep["einstein_ok"] = rep["einstein_vanishing_order"] == N + 1
    lam0 = (not qi(result.lam)) if result.exact else (complex(result.lam) == 0)
    rep["weyl_ok"] = (rep["weyl_asd_vanishing_order"] == N + 1) if lam0 else (
        rep["weyl_asd_vanishing_order"] >= 6)
    return rep


def _eta_target_from(result):
    if result.exact:
        return qi(result.lam) * result.obstruction.data
    return complex(result.lam) * result.obstruction.data


def _poly_degree(lams, values, exact, tol):
    """Smallest degree of a polynomial in lambda through (lams, values)."""
    n = len(lams)
    if exact:
        # Newton divided differences; degree = last nonzero order
        table = [np.asarray(v) for v in values]
        xs = [qi(l) for l in lams]
        deg = -1
        if not is_zero(table[0]):
            deg = 0
        for order in range(1, n):
            table = [(table[i + 1] - table[i]) / (xs[i + order] - xs[i]) for i in range(len(table) - 1)]
            if not is_zero(table[0]) or any(not is_zero(t) for t in table):
                deg = order
        return deg
    V = np.asarray([complex(l) for l in lams])
    Y = np.stack([np.asarray(v, dtype=complex).ravel() for v in values])
    scale = max(1.0, float(np.max(np.abs(Y))))
    for d in range(0, n):
        A = np.vander(V, d + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        if float(np.max(np.abs(A @ coef - Y))) <= tol * scale:
            return d if float(np.max(np.abs(Y))) > tol * scale else -1
    return n - 1


def lambda_batch_report(results: list[SolveResult], tol: float = 1e-8) -> dict:
    """Degree in lambda of every rho^k coefficient across a lambda sweep."""
    if len(results) < 2:
        raise ValueError("need at least two solves")
    N = min(r.order for r in results)
    exact = results[0].exact
    lams = [r.lam for r in results]
    degrees = {}
    for name in ("g00", "g01", "g11", "g11bar"):
        degrees[name] = [
            _poly_degree(lams, [r.coefficients[name][k] for r in results], exact, tol)
            for k in range(N + 1)
        ]
    bound_ok = all(d <= k // 6 for name in degrees for k, d in enumerate(degrees[name]))
    lam_free = all(d <= 0 for name in ("g01", "g11") for d in degrees[name])
    return {"degrees": degrees, "degree_bound_ok": bound_ok, "g01_g11_lambda_free": lam_free}
