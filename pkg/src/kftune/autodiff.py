"""Reverse-mode differentiation over small dense matrix operations.

A Tape records every primitive in execution order together with a backward
rule; `backward` replays the nodes in reverse and accumulates exact adjoints.
Everything is a 2-D float64 array: vectors are (n, 1) columns and scalars are
(1, 1). Matrices here never exceed a few dozen entries, so nodes store dense
forward values, and the SPD operations (solve / logdet / quadform) share one
Cholesky factorization per matrix node.

Accumulation order is fixed by recording order, so replaying an identical
tape yields bitwise-identical gradients.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ContractError, DefinitenessError, ShapeError

__all__ = [
    "Tape",
    "Var",
    "constant",
    "add",
    "add_n",
    "sub",
    "matmul",
    "transpose",
    "scale",
    "symmetrize",
    "sandwich",
    "solve",
    "logdet",
    "quadform",
    "exp_elem",
    "sum_squares",
    "gather",
    "scatter",
    "backward",
]


class Var:
    """Handle to one node on a Tape."""

    __slots__ = ("tape", "index", "shape")

    def __init__(self, tape: "Tape", index: int, shape: tuple[int, int]):
        self.tape = tape
        self.index = index
        self.shape = shape

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.index]

    def __repr__(self):
        return f"Var(#{self.index}, {self.shape[0]}x{self.shape[1]})"


class Tape:
    """Ordered record of primitive operations and their backward rules."""

    def __init__(self):
        self.values: list[np.ndarray] = []
        # parallel lists: per node, the parent indices and the matching vjp
        # callables mapping the output adjoint to each parent's contribution
        self._parents: list[tuple[int, ...]] = []
        self._vjps: list[tuple] = []
        self._chol: dict[int, tuple] = {}

    def _rec(self, value: np.ndarray, parents: tuple[int, ...], vjps: tuple) -> Var:
        # internal fast path: `value` must already be a 2-D float64 array
        values = self.values
        values.append(value)
        self._parents.append(parents)
        self._vjps.append(vjps)
        return Var(self, len(values) - 1, value.shape)

    def record(self, value, parents=(), vjps=()) -> Var:
        """Append a node. `vjps[k](g)` must return the adjoint contribution
        of the output adjoint `g` to parent k. Extension point for custom
        primitives (see filters' observation-matrix node)."""
        value = np.asarray(value, dtype=float)
        if value.ndim != 2:
            raise ShapeError(f"tape values must be 2-D, got shape {value.shape}")
        return self._rec(value, tuple(p.index for p in parents), tuple(vjps))

    def variable(self, value) -> Var:
        """A differentiable leaf (gradients are reported for these)."""
        return self._rec(_as_col(value), (), ())

    def constant(self, value) -> Var:
        """A leaf that never receives gradient."""
        return self._rec(_as_col(value), (), ())

    def cholesky_of(self, var: Var):
        """Factor (S + Sᵀ)/2 once per node and cache it."""
        cached = self._chol.get(var.index)
        if cached is not None:
            return cached
        S = var.value
        if S.shape[0] != S.shape[1]:
            raise ShapeError(f"expected square matrix, got {S.shape}")
        S_sym = 0.5 * (S + S.T)
        try:
            factor = cho_factor(S_sym, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise DefinitenessError(f"matrix node #{var.index} is not SPD: {exc}") from exc
        self._chol[var.index] = factor
        return factor


def _as_col(value) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return value.reshape(1, 1)
    if value.ndim == 1:
        return value.reshape(-1, 1)
    return value


def _same_tape(a: Var, b: Var) -> Tape:
    if a.tape is not b.tape:
        raise ContractError("operands live on different tapes")
    return a.tape


def constant(tape: Tape, value) -> Var:
    return tape.constant(value)


def add(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"add shapes {a.shape} vs {b.shape}")
    return tape._rec(a.value + b.value, (a.index, b.index), (None, None))


def add_n(terms: list[Var]) -> Var:
    """Sum of equally-shaped variables as a single node."""
    if not terms:
        raise ContractError("add_n needs at least one term")
    tape = terms[0].tape
    shape = terms[0].shape
    for t in terms[1:]:
        if t.tape is not tape:
            raise ContractError("operands live on different tapes")
        if t.shape != shape:
            raise ShapeError(f"add_n shapes {shape} vs {t.shape}")
    total = terms[0].value.copy()
    for t in terms[1:]:
        total += t.value
    return tape._rec(total, tuple(t.index for t in terms), (None,) * len(terms))


def sub(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"sub shapes {a.shape} vs {b.shape}")
    return tape._rec(a.value - b.value, (a.index, b.index), (None, _NEG))


_NEG = lambda g: -g  # noqa: E731


def matmul(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return tape._rec(
        av @ bv, (a.index, b.index), (lambda g: g @ bv.T, lambda g: av.T @ g)
    )


def transpose(a: Var) -> Var:
    return a.tape._rec(a.value.T.copy(), (a.index,), (lambda g: g.T,))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape._rec(c * a.value, (a.index,), (lambda g: c * g,))


def symmetrize(a: Var) -> Var:
    """(A + Aᵀ)/2 as one node."""
    if a.shape[0] != a.shape[1]:
        raise ShapeError("symmetrize needs a square matrix")
    av = a.value
    return a.tape._rec(0.5 * (av + av.T), (a.index,), (lambda g: 0.5 * (g + g.T),))


def sandwich(C: np.ndarray, x: Var) -> Var:
    """C X Cᵀ for a constant matrix C (one node)."""
    C = np.asarray(C, dtype=float)
    if C.shape[1] != x.shape[0] or x.shape[0] != x.shape[1]:
        raise ShapeError(f"sandwich shapes {C.shape} vs {x.shape}")
    return x.tape._rec(C @ x.value @ C.T, (x.index,), (lambda g: C.T @ g @ C,))


def solve(S: Var, B: Var) -> Var:
    """X = S⁻¹ B for SPD S (factor-and-solve, factor shared per node)."""
    tape = _same_tape(S, B)
    if S.shape[0] != S.shape[1] or S.shape[1] != B.shape[0]:
        raise ShapeError(f"solve shapes {S.shape} vs {B.shape}")
    factor = tape.cholesky_of(S)
    X = cho_solve(factor, B.value, check_finite=False)

    def d_S(g):
        W = cho_solve(factor, g, check_finite=False)
        M = W @ X.T
        return -0.5 * (M + M.T)

    def d_B(g):
        return cho_solve(factor, g, check_finite=False)

    return tape._rec(X, (S.index, B.index), (d_S, d_B))


def logdet(S: Var) -> Var:
    """log|S| for SPD S, via the shared Cholesky factor."""
    factor = S.tape.cholesky_of(S)
    val = 2.0 * np.sum(np.log(np.diag(factor[0])))

    def d_S(g):
        Sinv = cho_solve(factor, np.eye(S.shape[0]), check_finite=False)
        return g[0, 0] * 0.5 * (Sinv + Sinv.T)

    return S.tape._rec(np.array([[val]]), (S.index,), (d_S,))


def quadform(y: Var, S: Var) -> Var:
    """yᵀ S⁻¹ y (scalar) for SPD S and column y."""
    tape = _same_tape(y, S)
    if y.shape[1] != 1 or S.shape[0] != S.shape[1] or S.shape[0] != y.shape[0]:
        raise ShapeError(f"quadform shapes {y.shape} vs {S.shape}")
    factor = tape.cholesky_of(S)
    w = cho_solve(factor, y.value, check_finite=False)
    val = float(np.vdot(y.value, w))

    def d_y(g):
        return g[0, 0] * 2.0 * w

    def d_S(g):
        return g[0, 0] * (-(w @ w.T))

    return tape._rec(np.array([[val]]), (y.index, S.index), (d_y, d_S))


def exp_elem(a: Var) -> Var:
    out = np.exp(a.value)
    return a.tape._rec(out, (a.index,), (lambda g: g * out,))


def sum_squares(a: Var) -> Var:
    av = a.value
    return a.tape._rec(
        np.array([[float(np.sum(av * av))]]),
        (a.index,),
        (lambda g: g[0, 0] * 2.0 * av,),
    )


def gather(a: Var, indices) -> Var:
    """Rows of a column vector, as a new column vector."""
    indices = np.asarray(indices, dtype=int)
    if a.shape[1] != 1:
        raise ShapeError("gather expects a column vector")
    out = a.value[indices, :]

    def d_a(g):
        grad = np.zeros(a.shape)
        np.add.at(grad, (indices, np.zeros_like(indices)), g[:, 0])
        return grad

    return a.tape._rec(out, (a.index,), (d_a,))


def scatter(v: Var, rows, cols, shape: tuple[int, int]) -> Var:
    """Place entries of a column vector at (rows[k], cols[k]) of a zero matrix."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    if v.shape != (len(rows), 1):
        raise ShapeError(f"scatter vector shape {v.shape} vs {len(rows)} positions")
    out = np.zeros(shape)
    out[rows, cols] = v.value[:, 0]
    return v.tape._rec(out, (v.index,), (lambda g: g[rows, cols].reshape(-1, 1),))


def backward(loss: Var) -> dict[int, np.ndarray]:
    """Adjoints of a scalar loss w.r.t. every node, keyed by node index.

    Look gradients up via `grads[var.index]`; leaves that the loss does not
    depend on are absent. A `None` vjp denotes the identity rule (used by
    add/add_n and the minuend of sub).
    """
    if loss.shape != (1, 1):
        raise ContractError(f"loss must be scalar-shaped (1x1), got {loss.shape}")
    tape = loss.tape
    n = loss.index + 1
    grads: list[np.ndarray | None] = [None] * n
    owned = bytearray(n)  # 1 when grads[i] is a private accumulator
    grads[loss.index] = np.ones((1, 1))
    all_parents = tape._parents
    all_vjps = tape._vjps
    for idx in range(loss.index, -1, -1):
        g = grads[idx]
        if g is None:
            continue
        for parent, vjp in zip(all_parents[idx], all_vjps[idx]):
            contribution = g if vjp is None else vjp(g)
            current = grads[parent]
            if current is None:
                grads[parent] = contribution
            elif owned[parent]:
                current += contribution
            else:
                grads[parent] = current + contribution
                owned[parent] = 1
    return {i: g for i, g in enumerate(grads) if g is not None}
