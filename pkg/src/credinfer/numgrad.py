"""Dense float64 arrays with a reverse-mode gradient tape.

Every model equation in the package is composed from the operations in
this module. A :class:`Tensor` optionally belongs to a :class:`Tape`;
operations on tape-tracked inputs append a node holding the backward
closure, and :meth:`Tape.backward` walks the nodes in reverse creation
order (which is a topological order) accumulating gradients additively.

Batched inputs are supported throughout: a 2-D ``x`` is treated as one
vector per row.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from credinfer import kernels

LOG_EPS = 1e-12
# saturated sigmoid/tanh/softmax values are kept strictly inside their open ranges
_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class UsageError(ValueError):
    """An operation was called outside its contract."""


class GradientCheckError(RuntimeError):
    """A finite-difference evaluation produced a non-finite value."""


class Tensor:
    """Immutable float64 array, optionally recorded on a tape."""

    __slots__ = ("data", "tape", "name")

    def __init__(self, data, tape: "Tape | None" = None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, tracked={self.tracked})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return hadamard(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Ordered record of operations over tracked tensors."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.leaves: list[Tensor] = []

    def watch(self, value, name: str | None = None) -> Tensor:
        """Register ``value`` as a parameter leaf and return its tensor."""
        data = value.data if isinstance(value, Tensor) else value
        leaf = Tensor(np.array(data, dtype=np.float64), self, name)
        self.leaves.append(leaf)
        return leaf

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward: Callable) -> None:
        self.nodes.append((out, parents, backward))

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of scalar ``loss`` for every watched leaf.

        Leaves the loss does not depend on get an all-zero gradient.
        """
        if loss.data.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, parents, fn in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, fn(g)):
                if pg is None or parent.tape is not self:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return {
            leaf: grads.get(id(leaf), np.zeros_like(leaf.data)).reshape(leaf.shape)
            for leaf in self.leaves
        }


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents: tuple[Tensor, ...], backward: Callable) -> Tensor:
    tape = None
    for p in parents:
        if p.tape is not None:
            tape = p.tape
            break
    out = Tensor(data, tape)
    if tape is not None:
        tape.record(out, parents, backward)
    return out


def _same_shape(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    A, B = a.data, b.data
    if A.shape[-1] != B.shape[0]:
        raise DimensionError(f"matmul: shapes {A.shape} and {B.shape} do not conform")

    def backward(g):
        A2 = A if A.ndim == 2 else A[None, :]
        B2 = B if B.ndim == 2 else B[:, None]
        g2 = g.reshape(A2.shape[0], B2.shape[1])
        return (g2 @ B2.T).reshape(A.shape), (A2.T @ g2).reshape(B.shape)

    return _result(A @ B, (a, b), backward)


def affine(W, x, b=None) -> Tensor:
    """``W @ x + b`` for a vector ``x``; row-wise ``x @ W.T + b`` for a matrix."""
    W, x = as_tensor(W), as_tensor(x)
    Wd, xd = W.data, x.data
    if Wd.ndim != 2 or xd.ndim not in (1, 2) or xd.shape[-1] != Wd.shape[1]:
        raise DimensionError(f"affine: weight {Wd.shape} does not conform to input {xd.shape}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (Wd.shape[0],):
            raise DimensionError(f"affine: bias {b.shape} does not match weight {Wd.shape}")
    batched = xd.ndim == 2
    out = xd @ Wd.T if batched else Wd @ xd
    if b is not None:
        out = out + b.data

    def backward(g):
        if batched:
            gW, gx, gb = g.T @ xd, g @ Wd, g.sum(axis=0)
        else:
            gW, gx, gb = np.outer(g, xd), Wd.T @ g, g
        return (gW, gx) if b is None else (gW, gx, gb)

    parents = (W, x) if b is None else (W, x, b)
    return _result(out, parents, backward)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument never overflows
    e = np.exp(-np.abs(x))
    inv = 1.0 / (1.0 + e)
    return np.clip(np.where(x >= 0, inv, e * inv), _TINY, _BELOW_ONE)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.clip(np.tanh(x.data), -_BELOW_ONE, _BELOW_ONE)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),))


def hadamard(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("hadamard", a, b)
    A, B = a.data, b.data
    return _result(A * B, (a, b), lambda g: (g * B, g * A))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def one_minus(a) -> Tensor:
    a = as_tensor(a)
    return _result(1.0 - a.data, (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _result(a.data * c, (a,), lambda g: (g * c,))


_ELEMENTWISE = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "hadamard": hadamard,
    "add": add,
    "sub": sub,
    "one_minus": one_minus,
}


def elementwise(kind: str, *args) -> Tensor:
    """Dispatch one of sigmoid, tanh, hadamard, add, sub, one_minus."""
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise UsageError(f"unknown elementwise kind {kind!r}") from None
    return fn(*args)


def interpolate(z, a, b) -> Tensor:
    """``z*a + (1-z)*b`` entrywise; ``z`` may be a constant mask."""
    z, a, b = as_tensor(z), as_tensor(a), as_tensor(b)
    _same_shape("interpolate", a, b)
    _same_shape("interpolate", z, a)
    Z, A, B = z.data, a.data, b.data
    out = Z * A + (1.0 - Z) * B
    return _result(out, (z, a, b), lambda g: (g * (A - B), g * Z, g * (1.0 - Z)))


def gdu_mix(g, r, a, b, c, d) -> Tensor:
    """Four-way selection: g⊙r⊙a + (1-g)⊙r⊙b + g⊙(1-r)⊙c + (1-g)⊙(1-r)⊙d."""
    ts = [as_tensor(t) for t in (g, r, a, b, c, d)]
    for t in ts[1:]:
        _same_shape("gdu_mix", ts[0], t)
    arrays = [t.data for t in ts]
    out = kernels.gdu_mix(*arrays)
    return _result(out, tuple(ts), lambda gh: kernels.gdu_mix_grad(*arrays, gh))


def inside_unit(x) -> Tensor:
    """Move values that rounded onto +-1 one ulp inside; gradient passes through.

    Convex combinations of saturated tanh values are strictly inside
    (-1, 1) in exact arithmetic but can round onto the bound.
    """
    x = as_tensor(x)
    return _result(np.clip(x.data, -_BELOW_ONE, _BELOW_ONE), (x,), lambda g: (g,))


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------


def concat(parts: Sequence) -> Tensor:
    """Concatenate along the last axis (vectors, or matrices row-aligned)."""
    if len(parts) == 0:
        raise UsageError("concat needs at least one part")
    ts = [as_tensor(p) for p in parts]
    lead = ts[0].shape[:-1]
    for t in ts:
        if t.data.ndim == 0 or t.shape[:-1] != lead:
            raise DimensionError(f"concat: incompatible part shapes {[t.shape for t in ts]}")
    if len(ts) == 1:
        return ts[0]
    sizes = [t.shape[-1] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=-1))

    return _result(np.concatenate([t.data for t in ts], axis=-1), tuple(ts), backward)


def columns(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    X = x.data

    def backward(g):
        full = np.zeros_like(X)
        full[..., start:stop] = g
        return (full,)

    return _result(X[..., start:stop], (x,), backward)


def row(x, i: int) -> Tensor:
    """Row ``i`` of a matrix as a vector."""
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        full[i] = g
        return (full,)

    return _result(x.data[i], (x,), backward)


def take_rows(table, idx) -> Tensor:
    """Gather rows ``table[idx]``; the gradient scatters back additively."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.int64)
    n_rows = table.shape[0]
    return _result(
        table.data[idx],
        (table,),
        lambda g: (kernels.scatter_add_rows(n_rows, idx, g.reshape(len(idx), -1)).reshape(table.shape),),
    )


def segment_mean(values, indptr, indices) -> Tensor:
    """Mean of ``values`` rows per CSR segment; empty segments give a zero row."""
    values = as_tensor(values)
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    n = values.shape[0]
    out = kernels.segment_mean(values.data, indptr, indices)
    return _result(out, (values,), lambda g: (kernels.segment_mean_grad(g, indptr, indices, n),))


# ---------------------------------------------------------------------------
# reductions and losses
# ---------------------------------------------------------------------------


def total(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def sum_squares(x) -> Tensor:
    x = as_tensor(x)
    X = x.data
    return _result(np.asarray(np.sum(X * X)), (x,), lambda g: (2.0 * g * X,))


def softmax(x) -> Tensor:
    """Softmax over the last axis, with max-subtraction."""
    x = as_tensor(x)
    if x.data.size == 0:
        raise UsageError("softmax of an empty vector")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = np.maximum(e / e.sum(axis=-1, keepdims=True), _TINY)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=-1, keepdims=True)),)

    return _result(y, (x,), backward)


def _check_one_hot(truth: np.ndarray) -> None:
    ok = np.all((truth == 0.0) | (truth == 1.0)) and np.all(truth.sum(axis=-1) == 1.0)
    if not ok:
        raise UsageError("cross_entropy truth must be one-hot")


def cross_entropy(pred, truth) -> Tensor:
    """``-sum truth * log(pred + eps)``, summed over rows for batched input."""
    pred = as_tensor(pred)
    T = truth.data if isinstance(truth, Tensor) else np.asarray(truth, dtype=np.float64)
    if T.shape != pred.shape:
        raise DimensionError(f"cross_entropy: prediction {pred.shape} vs truth {T.shape}")
    _check_one_hot(T)
    P = pred.data + LOG_EPS
    val = -np.sum(T * np.log(P))
    return _result(np.asarray(val), (pred,), lambda g: (-g * T / P,))


# ---------------------------------------------------------------------------
# initialisation and verification
# ---------------------------------------------------------------------------


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """Uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out))."""
    fan_out, fan_in = shape
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def finite_diff_check(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    step: float = 1e-5,
    report: dict | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` maps a dict of named tensors to a scalar tensor. Relative error
    per entry is ``|a - n| / max(1e-8, |a| + |n|)``. When ``report`` is a
    dict it receives the worst parameter name and entry index.
    """
    if step <= 0:
        raise UsageError("step must be positive")
    tape = Tape()
    tracked = {name: tape.watch(value, name) for name, value in params.items()}
    grads = tape.backward(fn(tracked))

    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}

    def evaluate(name: str) -> float:
        val = float(fn({k: Tensor(v) for k, v in base.items()}).data)
        if not math.isfinite(val):
            raise GradientCheckError(f"non-finite loss while perturbing parameter {name!r}")
        return val

    worst, worst_at = 0.0, None
    for name, arr in base.items():
        analytic = grads[tracked[name]]
        flat = arr.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = evaluate(name)
            flat[k] = orig - step
            down = evaluate(name)
            flat[k] = orig
            numeric = (up - down) / (2.0 * step)
            a = float(analytic.reshape(-1)[k])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            if err > worst:
                worst, worst_at = err, (name, k, a, numeric)
    if report is not None:
        report["worst"] = worst_at
        report["n_entries"] = sum(v.size for v in base.values())
    return worst
