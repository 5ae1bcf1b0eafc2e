"""Transport recursion for the modifier symbols d_k^{+-} and the coefficient operators A_k.

Every coefficient function is a node of a hash-consed expression DAG over

* leaves ``d^alpha V_j`` (exact homogeneous terms, no core cutoff),
* half-line integrals ``cum(+, e)(x) = int_0^inf e(x + t w) dt`` and
  ``cum(-, e)(x) = int_{-inf}^0 e(x + t w) dt``,
* complex linear combinations and products.

Cartesian derivatives commute with ``cum`` (it integrates translates), so any
derivative of any symbol is again a DAG node.  Nodes are evaluated line by
line: every point of a line ``y + t w`` is reached with ``t = |y| tan(theta)``
and all nested half-line integrals become spectral cumulative integrals in
``theta`` on one Chebyshev grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from numpy.polynomial import chebyshev as C

from .harmonics import PolyRadial, binom_multi
from .lattice import TOL, ExponentLattice
from .potential import PotentialExpansion

ZERO, ONE = 0, 1
E = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _add_idx(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _sub_idx(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


class Algebra:
    """Node store for coefficient functions of one potential."""

    def __init__(self, p: PotentialExpansion):
        self.p = p
        self.nodes: list[tuple] = [("zero",), ("one",)]
        self._index = {("zero",): ZERO, ("one",): ONE}
        self._diff: dict = {}
        self._conj: dict = {}
        self._polys: dict = {}
        self._signs: dict = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _make(self, key: tuple) -> int:
        i = self._index.get(key)
        if i is None:
            i = len(self.nodes)
            self.nodes.append(key)
            self._index[key] = i
        return i

    def kind(self, a: int) -> str:
        return self.nodes[a][0]

    # --- constructors -----------------------------------------------------
    def leaf_poly(self, j: int, alpha) -> PolyRadial:
        key = (j, tuple(alpha))
        poly = self._polys.get(key)
        if poly is None:
            t = self.p.terms[j]
            poly = self.p._polys[j].shift(t.rho).diff_multi(alpha)
            self._polys[key] = poly
        return poly

    def leaf(self, j: int, alpha=(0, 0, 0)) -> int:
        if self.leaf_poly(j, alpha).is_zero():
            return ZERO
        return self._make(("leaf", j, tuple(alpha)))

    def cum(self, sign: int, a: int) -> int:
        if a == ZERO:
            return ZERO
        if self.kind(a) == "sum":
            return self.lin([(self.cum(sign, b), c) for b, c in self.nodes[a][1]])
        return self._make(("cum", sign, a))

    def lin(self, pairs) -> int:
        acc: dict = {}
        for a, c in pairs:
            if a == ZERO or c == 0:
                continue
            if self.kind(a) == "sum":
                for b, cb in self.nodes[a][1]:
                    acc[b] = acc.get(b, 0) + c * cb
            else:
                acc[a] = acc.get(a, 0) + c
        items = tuple(sorted((a, complex(c)) for a, c in acc.items() if c != 0))
        if not items:
            return ZERO
        if len(items) == 1 and items[0][1] == 1:
            return items[0][0]
        return self._make(("sum", items))

    def add(self, a: int, b: int) -> int:
        return self.lin([(a, 1), (b, 1)])

    def scale(self, c, a: int) -> int:
        return self.lin([(a, c)])

    def mul(self, a: int, b: int) -> int:
        if a == ZERO or b == ZERO:
            return ZERO
        if a == ONE:
            return b
        if b == ONE:
            return a
        for x, y in ((a, b), (b, a)):
            nx = self.nodes[x]
            if nx[0] == "sum" and len(nx[1]) == 1:
                inner, c = nx[1][0]
                return self.scale(c, self.mul(inner, y))
        fa = self.nodes[a][1] if self.kind(a) == "prod" else (a,)
        fb = self.nodes[b][1] if self.kind(b) == "prod" else (b,)
        return self._make(("prod", tuple(sorted(fa + fb))))

    # --- calculus -----------------------------------------------------------
    def diff(self, a: int, i: int) -> int:
        key = (a, i)
        out = self._diff.get(key)
        if out is not None:
            return out
        node = self.nodes[a]
        kind = node[0]
        if kind in ("zero", "one"):
            out = ZERO
        elif kind == "leaf":
            out = self.leaf(node[1], _add_idx(node[2], E[i]))
        elif kind == "cum":
            out = self.cum(node[1], self.diff(node[2], i))
        elif kind == "sum":
            out = self.lin([(self.diff(b, i), c) for b, c in node[1]])
        else:
            fs = node[1]
            terms = []
            for n, f in enumerate(fs):
                df = self.diff(f, i)
                if df == ZERO:
                    continue
                rest = ONE
                for m, g in enumerate(fs):
                    if m != n:
                        rest = self.mul(rest, g)
                terms.append((self.mul(rest, df), 1))
            out = self.lin(terms)
        self._diff[key] = out
        return out

    def diff_multi(self, a: int, alpha) -> int:
        for i, n in enumerate(alpha):
            for _ in range(n):
                a = self.diff(a, i)
        return a

    def laplacian(self, a: int) -> int:
        return self.lin([(self.diff(self.diff(a, i), i), 1) for i in range(3)])

    def conj(self, a: int) -> int:
        out = self._conj.get(a)
        if out is not None:
            return out
        node = self.nodes[a]
        kind = node[0]
        if kind in ("zero", "one", "leaf"):
            out = a
        elif kind == "cum":
            out = self.cum(node[1], self.conj(node[2]))
        elif kind == "sum":
            out = self.lin([(self.conj(b), np.conj(c)) for b, c in node[1]])
        else:
            out = ONE
            for f in node[1]:
                out = self.mul(out, self.conj(f))
        self._conj[a] = out
        return out

    def leaves(self, a: int) -> set:
        """Layer indices j of every leaf reachable from ``a``."""
        seen, stack, out = set(), [a], set()
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            node = self.nodes[n]
            if node[0] == "leaf":
                out.add(node[1])
            stack.extend(self.children(n))
        return out

    def signs(self, a: int) -> frozenset:
        """Directions of the half-line integrals reachable from ``a``."""
        out = self._signs.get(a)
        if out is None:
            node = self.nodes[a]
            out = frozenset()
            if node[0] == "cum":
                out = frozenset((node[1],))
            for c in self.children(a):
                out = out | self.signs(c)
            self._signs[a] = out
        return out

    def children(self, a: int) -> tuple:
        node = self.nodes[a]
        kind = node[0]
        if kind == "cum":
            return (node[2],)
        if kind == "sum":
            return tuple(b for b, _ in node[1])
        if kind == "prod":
            return node[1]
        return ()

    def topo(self, targets) -> list[int]:
        order, state = [], {}
        for t in targets:
            stack = [(t, False)]
            while stack:
                n, done = stack.pop()
                if done:
                    if state.get(n) != 2:
                        state[n] = 2
                        order.append(n)
                    continue
                if state.get(n):
                    continue
                state[n] = 1
                stack.append((n, True))
                stack.extend((c, False) for c in self.children(n) if not state.get(c))
        return order


# --- line evaluation ---------------------------------------------------------


class ChebLine:
    """Chebyshev calculus in v = 2 theta / pi on first-kind nodes."""

    def __init__(self, n: int):
        self.n = n
        self.v = -np.cos(np.pi * (np.arange(n) + 0.5) / n)
        self.V = C.chebvander(self.v, n - 1)
        self.Vinv = np.linalg.inv(self.V)
        icoef = np.stack([C.chebint(np.eye(n)[k], lbnd=-1.0) for k in range(n)], axis=1)
        self.Q = C.chebvander(self.v, n) @ icoef @ self.Vinv
        self.total = (C.chebvander(np.array([1.0]), n) @ icoef @ self.Vinv)[0]

    def interp(self, v_targets) -> np.ndarray:
        """(..., m, n) matrices mapping nodal values to values at ``v_targets``."""
        return C.chebvander(v_targets, self.n - 1) @ self.Vinv


_CHEB: dict = {}


def cheb_line(n: int) -> ChebLine:
    if n not in _CHEB:
        _CHEB[n] = ChebLine(n)
    return _CHEB[n]


def evaluate_on_lines(alg: Algebra, targets, y, omega, t, n_cheb: int = 48, chunk: int = 64) -> dict:
    """Values of DAG nodes at points ``y + t w``.

    ``y`` (L, 3) line offsets orthogonal to ``omega`` (L, 3) or (3,); ``t`` (L, m).
    Returns {node: complex array (L, m)}.

    Nodes built from ``cum(+, .)`` live on a Chebyshev grid in theta covering
    [min target, pi/2], nodes built from ``cum(-, .)`` on [-pi/2, max target];
    their derivatives need not decay towards the other end of the line.
    Products mixing both kinds are formed at the targets only.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    t = np.asarray(t, dtype=float).reshape(len(y), -1)
    omega = np.broadcast_to(np.asarray(omega, dtype=float), y.shape)
    b = np.linalg.norm(y, axis=-1)
    if np.any(b < alg.p.core_radius):
        raise ValueError("line passes within core_radius of the origin")
    targets = list(dict.fromkeys(targets))
    out = {a: np.empty(t.shape, dtype=complex) for a in targets}
    cl = cheb_line(n_cheb)
    th_t = np.arctan(t / b[:, None])
    pad = 1e-3
    for lo in range(0, len(y), chunk):
        sl = slice(lo, lo + chunk)
        yb, wb, bb, tt = y[sl], omega[sl], b[sl], th_t[sl]
        grids = {}
        for s in (1, -1):
            if s > 0:
                a0, a1 = np.maximum(tt.min(axis=1) - pad, -0.5 * np.pi), np.full(len(bb), 0.5 * np.pi)
            else:
                a0, a1 = np.full(len(bb), -0.5 * np.pi), np.minimum(tt.max(axis=1) + pad, 0.5 * np.pi)
            half = 0.5 * (a1 - a0)
            theta = a0[:, None] + half[:, None] * (cl.v + 1.0)
            pts = yb[:, None, :] + (bb[:, None] * np.tan(theta))[..., None] * wb[:, None, :]
            jac = half[:, None] * bb[:, None] / np.cos(theta) ** 2
            M = cl.interp((tt - a0[:, None]) / half[:, None] - 1.0)
            grids[s] = (pts, jac, M)
        tpts = yb[:, None, :] + t[sl][..., None] * wb[:, None, :]
        ev = _LineEval(alg, cl, grids, tpts)
        for a in targets:
            out[a][sl] = ev.target(a)
    return out


class _LineEval:
    def __init__(self, alg: Algebra, cl: ChebLine, grids: dict, tpts):
        self.alg, self.cl, self.grids, self.tpts = alg, cl, grids, tpts
        self.gv: dict = {}
        self.tv: dict = {}

    def _combine(self, node, get):
        kind = node[0]
        if kind == "sum":
            v = 0
            for c, coef in node[1]:
                v = v + (coef.real if coef.imag == 0 else coef) * get(c)
            return v
        v = get(node[1][0])
        for f in node[1][1:]:
            v = v * get(f)
        return v

    def grid(self, a: int, s: int):
        key = (a, s)
        v = self.gv.get(key)
        if v is not None:
            return v
        node = self.alg.nodes[a]
        kind = node[0]
        pts, jac, _ = self.grids[s]
        if kind == "zero":
            v = np.zeros(pts.shape[:2])
        elif kind == "one":
            v = np.ones(pts.shape[:2])
        elif kind == "leaf":
            v = self.alg.leaf_poly(node[1], node[2])(pts)
        elif kind == "cum":
            if node[1] != s:
                raise ValueError("half-line integrals of opposite direction cannot be nested")
            g = self.grid(node[2], s) * jac
            lower = g @ self.cl.Q.T
            v = lower if s < 0 else (g @ self.cl.total)[:, None] - lower
        else:
            v = self._combine(node, lambda c: self.grid(c, s))
        self.gv[key] = v
        return v

    def target(self, a: int):
        v = self.tv.get(a)
        if v is not None:
            return v
        signs = self.alg.signs(a)
        node = self.alg.nodes[a]
        kind = node[0]
        if len(signs) == 1:
            s = next(iter(signs))
            v = np.einsum("lmn,ln->lm", self.grids[s][2], self.grid(a, s))
        elif kind == "zero":
            v = np.zeros(self.tpts.shape[:2])
        elif kind == "one":
            v = np.ones(self.tpts.shape[:2])
        elif kind == "leaf":
            v = self.alg.leaf_poly(node[1], node[2])(self.tpts)
        elif kind == "cum":
            raise ValueError("half-line integrals of opposite direction cannot be nested")
        else:
            v = self._combine(node, self.target)
        self.tv[a] = v
        return v


def lines_through(x, omega):
    """Decompose points into line offsets y (orthogonal to omega) and positions t."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    omega = np.asarray(omega, dtype=float)
    t = x @ omega
    return x - t[:, None] * omega, t[:, None]


# --- symbols -------------------------------------------------------------------


def xi_monomials(beta, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return xi[..., 0] ** beta[0] * xi[..., 1] ** beta[1] * xi[..., 2] ** beta[2]


@dataclass
class SymbolNode:
    """d_k^{sign}(x, xi, w) = sum_beta coeffs[beta](x) * xi**beta."""

    k: int
    sign: int
    nu: float
    coeffs: dict
    algebra: Algebra = field(repr=False)
    sources: list = field(default_factory=list)

    @property
    def xi_degree(self) -> int:
        live = [sum(b) for b, a in self.coeffs.items() if a != ZERO]
        return max(live) if live else 0

    def is_zero(self) -> bool:
        return all(a == ZERO for a in self.coeffs.values())

    def evaluate(self, x, xi, omega, n_cheb: int = 48) -> np.ndarray:
        """Complex values at points ``x`` (N, 3) with frequencies ``xi`` (N, 3) or (3,)."""
        y, t = lines_through(x, omega)
        vals = evaluate_on_lines(self.algebra, list(self.coeffs.values()), y, omega, t, n_cheb)
        xi = np.broadcast_to(np.asarray(xi, dtype=float), y.shape)
        out = np.zeros(len(y), dtype=complex)
        for beta, a in self.coeffs.items():
            out += vals[a][:, 0] * xi_monomials(beta, xi)
        return out


def _source(alg: Algebra, lattice: ExponentLattice, k: int, solved: dict, sign: int, labels: list) -> dict:
    """Coefficients (by xi power) of the source landing at nu_k."""
    nu = lattice.nu(k)
    mus, shift = lattice.mus, lattice.shift
    acc: dict = {}

    def put(beta, a, c=1.0):
        if a != ZERO:
            acc.setdefault(beta, []).append((a, c))

    for j, mu in enumerate(mus):
        if j >= len(alg.p.terms):
            continue
        if abs(mu - nu) <= TOL:
            put((0, 0, 0), alg.leaf(j))
            labels.append(f"V{j + 1}")
        for m in range(1, k):
            if abs(mu + lattice.nu(m) - nu) <= TOL:
                vj = alg.leaf(j)
                for beta, a in solved[(m, sign)].coeffs.items():
                    put(beta, alg.mul(vj, a))
                labels.append(f"V{j + 1}*d{m}")
    for m in range(1, k):
        if abs(lattice.nu(m) + shift - nu) <= TOL:
            for beta, a in solved[(m, sign)].coeffs.items():
                put(beta, alg.laplacian(a), -1.0)
                for i in range(3):
                    put(_add_idx(beta, E[i]), alg.diff(a, i), -2j)
            labels.append(f"(2i xi.grad + Lap) d{m}")
    return {beta: alg.lin(terms) for beta, terms in acc.items()}


def solve_transport(
    lattice: ExponentLattice,
    k: int,
    direction: int,
    p: PotentialExpansion,
    lam: float,
    solved: dict | None = None,
    algebra: Algebra | None = None,
) -> SymbolNode:
    """Solve w . grad d_k = S_k / (2 i sqrt(lam)) with d_k^+ -> 0 at +inf (d_k^- at -inf).

    ``solved`` maps (m, direction) to the SymbolNodes of every m < k.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if not 1 <= k <= len(lattice):
        raise ValueError(f"k must lie in [1, {len(lattice)}]")
    solved = {} if solved is None else solved
    for m in range(1, k):
        if (m, direction) not in solved:
            raise ValueError(f"symbol d_{m} ({'+' if direction > 0 else '-'}) must be solved before d_{k}")
    alg = algebra or (next(iter(solved.values())).algebra if solved else Algebra(p))
    labels: list = []
    src = _source(alg, lattice, k, solved, direction, labels)
    # d^+ = (i / 2 sqrt(lam)) int_0^inf S,  d^- = -(i / 2 sqrt(lam)) int_{-inf}^0 S
    c = direction * 1j / (2.0 * sqrt(lam))
    coeffs = {beta: alg.scale(c, alg.cum(direction, a)) for beta, a in src.items()}
    coeffs = {beta: a for beta, a in coeffs.items() if a != ZERO} or {(0, 0, 0): ZERO}
    return SymbolNode(k, direction, lattice.nu(k), coeffs, alg, labels)


def identity_symbol(alg: Algebra, sign: int) -> SymbolNode:
    return SymbolNode(0, sign, 0.0, {(0, 0, 0): ONE}, alg, ["1"])


@dataclass
class CoefficientOperator:
    """A_k = sum_alpha terms[alpha](x) d^alpha in normal form."""

    k: int
    nu: float
    terms: dict
    algebra: Algebra = field(repr=False)
    leading_layer: int | None = None  # 1-based j with mu_j = nu_k
    leading: int = ZERO  # multiplication part (i / 2 sqrt(lam)) X[V_j]
    lower: dict = field(default_factory=dict)  # B part in normal form

    def is_zero(self) -> bool:
        return all(a == ZERO for a in self.terms.values())

    @property
    def is_multiplication(self) -> bool:
        return all(a == ZERO for al, a in self.terms.items() if al != (0, 0, 0))

    def lower_is_zero(self) -> bool:
        return all(a == ZERO for a in self.lower.values())

    def lower_layers(self) -> set:
        """1-based layer indices the lower-order part B depends on."""
        out = set()
        for a in self.lower.values():
            out |= {j + 1 for j in self.algebra.leaves(a)}
        return out

    def apply(self, derivs, x, omega, n_cheb: int = 48) -> np.ndarray:
        """(A_k f)(x); ``derivs(alpha, x)`` returns d^alpha f at points x."""
        y, t = lines_through(x, omega)
        vals = evaluate_on_lines(self.algebra, list(self.terms.values()), y, omega, t, n_cheb)
        out = np.zeros(len(y), dtype=complex)
        for alpha, a in self.terms.items():
            out += vals[a][:, 0] * derivs(alpha, np.atleast_2d(x))
        return out


class SymbolExpansion:
    """All d_k^{+-} for k <= K and the operators A_k built from them."""

    def __init__(self, p: PotentialExpansion, lattice: ExponentLattice, lam: float, K: int | None = None):
        self.p = p
        self.lattice = lattice
        self.lam = float(lam)
        self.K = lattice.default_order() if K is None else int(K)
        if not 1 <= self.K <= len(lattice):
            raise ValueError(f"order K = {self.K} exceeds the lattice ({len(lattice)} entries)")
        if len(p.terms) > len(lattice.rhos) or any(
            abs(a - b) > 1e-12 for a, b in zip(p.rhos, lattice.rhos)
        ):
            raise ValueError("potential degrees do not match the lattice degrees")
        self.algebra = Algebra(p)
        self.symbols: dict = {}
        for k in range(1, self.K + 1):
            for s in (1, -1):
                self.symbols[(k, s)] = solve_transport(lattice, k, s, p, lam, self.symbols, self.algebra)
        self._ops: dict = {}

    def d(self, k: int, sign: int) -> SymbolNode:
        if k == 0:
            return identity_symbol(self.algebra, sign)
        if k > self.K:
            raise ValueError(f"order {k} exceeds solved order K = {self.K}")
        return self.symbols[(k, sign)]

    def pair_terms(self, k: int):
        """[(d_a^-, d_b^+)] with nu_a + nu_b = nu_k."""
        if k > self.K:
            raise ValueError(f"order K = {k} exceeds solved symbols ({self.K})")
        return [(self.d(a, -1), self.d(b, 1)) for a, b in self.lattice.pairs(k)]

    def operator(self, k: int) -> CoefficientOperator:
        if k not in self._ops:
            self._ops[k] = self._assemble(k)
        return self._ops[k]

    def operators(self, K: int | None = None) -> list[CoefficientOperator]:
        K = self.K if K is None else K
        if K > self.K:
            raise ValueError(f"order K = {K} exceeds solved symbols ({self.K})")
        return [self.operator(k) for k in range(1, K + 1)]

    def _assemble(self, k: int) -> CoefficientOperator:
        alg = self.algebra
        acc: dict = {}
        # op(d^-)^* op(d^+) with op(d) = sum_beta d_beta (-i)^|beta| d^beta
        for dm, dp in self.pair_terms(k):
            for beta, am in dm.coeffs.items():
                cam = alg.conj(am)
                for gamma, ap in dp.coeffs.items():
                    f = alg.mul(cam, ap)
                    if f == ZERO:
                        continue
                    phase = (-1j) ** (sum(beta) + sum(gamma))
                    for kappa in _sub_indices(beta):
                        coef = phase * binom_multi(beta, kappa)
                        alpha = _add_idx(kappa, gamma)
                        acc.setdefault(alpha, []).append((alg.diff_multi(f, _sub_idx(beta, kappa)), coef))
        terms = {alpha: alg.lin(t) for alpha, t in acc.items()}
        nu = self.lattice.nu(k)
        op = CoefficientOperator(k, nu, terms, alg, lower=dict(terms))
        for j, mu in enumerate(self.lattice.mus[: len(self.p.terms)]):
            if abs(mu - nu) <= TOL:
                v = alg.leaf(j)
                lead = alg.scale(1j / (2.0 * sqrt(self.lam)), alg.add(alg.cum(1, v), alg.cum(-1, v)))
                op.leading_layer, op.leading = j + 1, lead
                op.lower[(0, 0, 0)] = alg.lin([(terms.get((0, 0, 0), ZERO), 1), (lead, -1)])
        return op


def _sub_indices(beta):
    return [(a, b, c) for a in range(beta[0] + 1) for b in range(beta[1] + 1) for c in range(beta[2] + 1)]


def assemble_Ak(expansion: SymbolExpansion, K: int | None = None) -> list[CoefficientOperator]:
    return expansion.operators(K)

