"""Tensors and the computation tape.

Operations executed while a ``Tape`` is active record one ``Node`` each,
holding references to their inputs, their output and a closure that maps the
output gradient to input gradients. Nodes are appended in execution order, so
the tape is topologically sorted by construction and backward is a single
reverse sweep.

    with Tape() as tape:
        loss = some_op(params...)
    tape.backward(loss)
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..errors import DimensionError, ParameterError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "deepadapt_active_tape", default=None
)


class Tensor:
    """N-dimensional array with an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(
        self,
        data: np.ndarray | float | Sequence,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ) -> None:
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the data."""
        return self.data.reshape(-1)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def is_finite(self) -> bool:
        ok = bool(np.all(np.isfinite(self.data)))
        if self.grad is not None:
            ok = ok and bool(np.all(np.isfinite(self.grad)))
        return ok

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


@dataclass(eq=False)
class Node:
    """One recorded operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn
    visits: int = 0


@dataclass(eq=False)
class Tape:
    """Ordered record of operations for reverse-mode differentiation."""

    nodes: list[Node] = field(default_factory=list)
    _token: Optional[contextvars.Token] = field(default=None, repr=False)

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor, traversal: str = "recorded") -> None:
        """Propagate d(loss)/d(x) into ``x.grad`` for every tensor on the tape.

        Args:
            loss: Scalar tensor produced on this tape.
            traversal: ``"recorded"`` walks the tape in reverse recording order;
                ``"dfs"`` walks a reverse post-order found by depth-first search
                from the loss. Both are valid reverse topological orders.
        """
        if loss.size != 1:
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
        if traversal == "recorded":
            order = list(reversed(self.nodes))
        elif traversal == "dfs":
            order = self._dfs_order(loss)
        else:
            raise ParameterError(f"unknown traversal {traversal!r}")

        loss.accumulate(np.ones_like(loss.data))
        for node in order:
            node.visits += 1
            grad_out = node.output.grad
            if grad_out is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(grad_out)):
                if grad is not None and tensor.requires_grad:
                    tensor.accumulate(grad)

    def _dfs_order(self, loss: Tensor) -> list[Node]:
        producer = {id(node.output): node for node in self.nodes}
        root = producer.get(id(loss))
        if root is None:
            return []
        postorder: list[Node] = []
        seen: set[int] = set()
        stack: list[tuple[Node, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                postorder.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for tensor in node.inputs:
                parent = producer.get(id(tensor))
                if parent is not None and id(parent) not in seen:
                    stack.append((parent, False))
        return list(reversed(postorder))


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def record(op: str, inputs: Iterable[Tensor], output: Tensor, backward: BackwardFn) -> Tensor:
    """Attach *output* to the active tape if any input needs a gradient."""
    inputs = tuple(inputs)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        tape.nodes.append(Node(op=op, inputs=inputs, output=output, backward=backward))
    return output
