"""Dense float64 tensors recorded on an explicit tape for reverse-mode AD."""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ContractError

_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def active_tape() -> "Tape | None":
    stack = _stack()
    return stack[-1] if stack else None


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.is_leaf = True

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; the primitives live in functional
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __neg__(self):
        from . import functional as F
        return F.scale(self, -1.0)


class Parameter(Tensor):
    """A trainable leaf tensor with a stable checkpoint name."""

    def __init__(self, data, name: str = "", init: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.init = init

    def __repr__(self):
        return f"Parameter({self.name or '?'}, shape={self.shape})"


class Tape:
    """Records primitive applications in execution order.

    Use as a context manager around a forward pass, then call
    :meth:`backward` once on a scalar result. Outside any tape, primitives
    run without recording anything.
    """

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        _stack().remove(self)
        return False

    def record(self, out: Tensor, inputs, backward_fn):
        self.nodes.append((out, tuple(inputs), backward_fn))

    def backward(self, loss: Tensor):
        if self.consumed:
            raise ContractError("tape already consumed by a previous backward pass")
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        self.consumed = True
        seed = np.ones_like(loss.data)
        if loss.is_leaf:
            if loss.requires_grad:
                _accumulate(loss, seed)
            self.nodes = []
            return
        grads = {id(loss): seed}
        for out, inputs, fn in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gi in zip(inputs, fn(g)):
                if gi is None or not t.requires_grad:
                    continue
                if t.is_leaf:
                    _accumulate(t, gi)
                else:
                    key = id(t)
                    grads[key] = gi if key not in grads else grads[key] + gi
        self.nodes = []


def _accumulate(t: Tensor, g: np.ndarray):
    g = np.broadcast_to(g, t.shape)
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def backward(tape: Tape, loss: Tensor):
    tape.backward(loss)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(data, inputs, backward_fn) -> Tensor:
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        tape.record(out, inputs, backward_fn)
    return out
