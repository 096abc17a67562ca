"""Reverse-mode autodiff core.

A Tensor wraps a numpy array plus an optional gradient and, when it was
produced by an op from pointerseg.ops, a closure that pushes its
gradient to its parents.  backward() walks that graph once, in reverse
topological order.  Only what the model needs lives here: no
broadcasting rules, no in-place ops, no graphs with repeated backward
passes.

Tensors are float32 by default; float64 arrays pass through untouched
so finite-difference checks can run the whole stack in 64-bit.
"""

import numpy as np


class Tensor:
    """N-d value node. data is row-major; grad is None until backward."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        # only explicit float64 numpy values keep their precision; Python
        # lists and floats land on float64 incidentally and must not
        # widen the net
        keep64 = getattr(data, "dtype", None) == np.float64
        arr = np.asarray(data)
        if not keep64 and arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def _accumulate(self, g) -> None:
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype}{flag})"


def from_op(data, parents, backward_fn) -> Tensor:
    """Build a graph node: records parents and the gradient closure."""
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={tuple(self.shape)})"


class ParameterCollection:
    """Ordered set of uniquely named Parameters."""

    def __init__(self, params=()):
        self._params: dict[str, Parameter] = {}
        for p in params:
            self.add(p)

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise ValueError(f"duplicate parameter name: {param.name!r}")
        self._params[param.name] = param
        return param

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name: str):
        return name in self._params

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def names(self):
        return list(self._params.keys())


def backward(loss: Tensor, params: ParameterCollection | None = None) -> None:
    """Populate .grad with d(loss)/d(tensor) for every reachable tensor
    that requires grad.

    loss must be a scalar produced by tracked ops.  When params is
    given, members not on any path to loss get an explicit all-zeros
    grad instead of None.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._backward_fn is None:
        raise ValueError("backward target was not produced by a tracked op")

    # Iterative topological order; recursion would overflow on deep nets.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)

    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
