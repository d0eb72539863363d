"""Decoder-side computations ``g`` with first partial derivatives.

Points are passed as arrays of shape ``(count, N)``; for univariate
computations a 1-D array of scalars is also accepted.  Scalar-valued
computations return shape ``(count,)``, vector-valued ones ``(count, M)``.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

BUILTINS = (
    "identity",
    "square",
    "exp_neg_abs",
    "one_minus_exp_neg",
    "separable_sum_of_squares",
    "min_of_N",
)


class Computation:
    """A function ``g: R^N -> R^M`` together with its first partials.

    ``partials(n, x)`` returns ``dg/dx_n`` at every row of ``x``.
    ``nonsmooth(x)`` flags rows lying on the declared non-smooth set, where
    the partial is only a deterministic convention.
    """

    def __init__(self, arity: int, func: Callable, partials: Callable, *, output_dim: int = 1,
                 nonsmooth: Callable | None = None, second_partial_bound: float | None = None,
                 name: str = "custom", kinks: Sequence[float] = ()):
        if arity < 1 or output_dim < 1:
            raise InvalidParameterError("arity and output_dim must be >= 1")
        self.arity = int(arity)
        self.output_dim = int(output_dim)
        self._func = func
        self._partials = partials
        self._nonsmooth = nonsmooth
        self.second_partial_bound = second_partial_bound
        self.name = name
        # abscissae where a univariate g' (hence its sensitivity) is not smooth
        self.kinks = tuple(float(k) for k in kinks)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1) if self.arity == 1 else x.reshape(1, -1)
        elif x.ndim == 1:
            x = x[:, None] if self.arity == 1 else x[None, :]
        if x.shape[-1] != self.arity:
            raise InvalidInputError(
                f"{self.name}: expected points with {self.arity} coordinates, got {x.shape[-1]}"
            )
        return x

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        return self._func(self._points(x))

    def partial(self, n: int, x):
        if not 0 <= n < self.arity:
            raise InvalidInputError(f"{self.name}: partial index {n} out of range")
        return self._partials(n, self._points(x))

    def nonsmooth(self, x):
        pts = self._points(x)
        if self._nonsmooth is None:
            return np.zeros(pts.shape[0], dtype=bool)
        return np.asarray(self._nonsmooth(pts), dtype=bool)

    def component(self, m: int) -> Computation:
        """The scalar computation ``g^(m)``."""
        if self.output_dim == 1:
            if m != 0:
                raise InvalidInputError("scalar computation has a single component")
            return self
        return Computation(
            self.arity,
            lambda x: self._func(x)[:, m],
            lambda n, x: self._partials(n, x)[:, m],
            nonsmooth=self._nonsmooth,
            second_partial_bound=self.second_partial_bound,
            name=f"{self.name}[{m}]",
        )

    def __repr__(self):
        return f"Computation({self.name}, arity={self.arity}, output_dim={self.output_dim})"


def stack(*parts: Computation, name: str | None = None) -> Computation:
    """Vector-valued computation whose components are the given scalar ones."""
    if not parts:
        raise InvalidParameterError("stack needs at least one computation")
    arity = parts[0].arity
    if any(p.arity != arity or p.output_dim != 1 for p in parts):
        raise InvalidParameterError("stacked computations must be scalar with equal arity")

    def func(x):
        return np.column_stack([p._func(x) for p in parts])

    def partials(n, x):
        return np.column_stack([p._partials(n, x) for p in parts])

    def nonsmooth(x):
        mask = np.zeros(x.shape[0], dtype=bool)
        for p in parts:
            if p._nonsmooth is not None:
                mask |= p._nonsmooth(x)
        return mask

    bounds = [p.second_partial_bound for p in parts]
    bound = None if any(b is None for b in bounds) else max(bounds)
    return Computation(arity, func, partials, output_dim=len(parts), nonsmooth=nonsmooth,
                       second_partial_bound=bound,
                       name=name or "(" + ", ".join(p.name for p in parts) + ")")


def _identity():
    return Computation(1, lambda x: x[:, 0].copy(), lambda n, x: np.ones(x.shape[0]),
                       second_partial_bound=0.0, name="identity")


def _square():
    return Computation(1, lambda x: x[:, 0] ** 2, lambda n, x: 2.0 * x[:, 0],
                       second_partial_bound=2.0, name="square", kinks=(0.0,))


def _exp_neg_abs():
    def partial(n, x):
        v = x[:, 0]
        return -np.sign(v) * np.exp(-np.abs(v))

    return Computation(1, lambda x: np.exp(-np.abs(x[:, 0])), partial,
                       nonsmooth=lambda x: x[:, 0] == 0.0, second_partial_bound=1.0,
                       name="exp_neg_abs", kinks=(0.0,))


def _one_minus_exp_neg():
    return Computation(1, lambda x: -np.expm1(-x[:, 0]), lambda n, x: np.exp(-x[:, 0]),
                       second_partial_bound=1.0, name="one_minus_exp_neg")


def _sum_of_squares(arity):
    return Computation(arity, lambda x: np.sum(x * x, axis=1), lambda n, x: 2.0 * x[:, n],
                       second_partial_bound=2.0, name=f"sum_of_squares[{arity}]")


def _min_of_n(arity):
    def partial(n, x):
        # ties go to the smallest index among the minimizers
        return (np.argmin(x, axis=1) == n).astype(float)

    def nonsmooth(x):
        if x.shape[1] < 2:
            return np.zeros(x.shape[0], dtype=bool)
        part = np.partition(x, 1, axis=1)
        return part[:, 0] == part[:, 1]

    return Computation(arity, lambda x: np.min(x, axis=1), partial, nonsmooth=nonsmooth,
                       second_partial_bound=0.0, name=f"min[{arity}]")


def make_computation(kind: str, arity: int = 1) -> Computation:
    """One of :data:`BUILTINS`.  Univariate kinds require ``arity == 1``."""
    if kind in ("identity", "square", "exp_neg_abs", "one_minus_exp_neg"):
        if arity != 1:
            raise InvalidParameterError(f"{kind} is univariate")
        return {"identity": _identity, "square": _square, "exp_neg_abs": _exp_neg_abs,
                "one_minus_exp_neg": _one_minus_exp_neg}[kind]()
    if kind == "separable_sum_of_squares":
        return _sum_of_squares(int(arity))
    if kind == "min_of_N":
        if arity < 1:
            raise InvalidParameterError("min_of_N needs arity >= 1")
        return _min_of_n(int(arity))
    raise InvalidParameterError(f"unknown computation {kind!r}; expected one of {BUILTINS}")


def computation_from_config(record: dict) -> Computation:
    """``{"kind": ..., "arity": N}`` -> Computation."""
    return make_computation(record["kind"], int(record.get("arity", 1)))


def finite_difference(g: Computation, n: int, x, h: float = 1e-6):
    """Central difference of ``g`` along coordinate ``n``; used as a test oracle."""
    pts = g._points(x)
    step = h * np.maximum(1.0, np.abs(pts[:, n]))
    up = pts.copy()
    dn = pts.copy()
    up[:, n] += step
    dn[:, n] -= step
    fu, fd = g._func(up), g._func(dn)
    if fu.ndim == 2:
        step = step[:, None]
    return (fu - fd) / (2.0 * step)


__all__ = [
    "BUILTINS",
    "Computation",
    "computation_from_config",
    "finite_difference",
    "make_computation",
    "stack",
]
