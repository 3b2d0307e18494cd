"""Discrete gradient/divergence pair and the split TV constraint operator.

The gradient uses forward differences with Neumann boundaries (the last
difference along each axis is zero); the divergence is its exact negative
adjoint, so <grad u, g> = -<u, div g> holds to rounding error for any pair
of fields. Gradient fields are stored as (2, h, w): component 0 is d/dx
(columns), component 1 is d/dy (rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def gradient_op(field: np.ndarray) -> np.ndarray:
    u = np.asarray(field, dtype=float)
    if u.ndim != 2:
        raise ValueError("gradient expects a 2-D scalar field")
    g = np.zeros((2,) + u.shape)
    g[0, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :-1, :] = u[1:, :] - u[:-1, :]
    return g


def divergence_op(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 3 or g.shape[0] != 2:
        raise ValueError("divergence expects a (2, h, w) gradient field")
    gx, gy = g[0], g[1]
    div = np.zeros(gx.shape)
    # The last slot along each axis never enters the forward map, so the
    # adjoint reads only gx[:, :w-1] and gy[:h-1, :]; a single-row or
    # single-column field has no contribution from that axis at all.
    if gx.shape[1] > 1:
        div[:, 0] += gx[:, 0]
        div[:, 1:-1] += gx[:, 1:-1] - gx[:, :-2]
        div[:, -1] += -gx[:, -2]
    if gy.shape[0] > 1:
        div[0, :] += gy[0, :]
        div[1:-1, :] += gy[1:-1, :] - gy[:-2, :]
        div[-1, :] += -gy[-2, :]
    return div


@dataclass(frozen=True)
class LinearOperatorHandle:
    """A linear map with its adjoint, as plain callables."""

    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.forward(v)


class TVSplitConstraint:
    """The split constraint T(p, q) = grad(p) - q (right-hand side 0).

    T is linear, so its partial Jacobians are the constant operators
    grad and -Id; the generic linearization interface still exposes them
    per-iterate so nonlinear constraints can plug into the same solver.
    """

    def apply(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return gradient_op(p) - q

    def d_p(self, p: np.ndarray, q: np.ndarray) -> LinearOperatorHandle:
        return LinearOperatorHandle(
            forward=gradient_op, adjoint=lambda rho: -divergence_op(rho)
        )

    def d_q(self, p: np.ndarray, q: np.ndarray) -> LinearOperatorHandle:
        neg = lambda v: -np.asarray(v, dtype=float)
        return LinearOperatorHandle(forward=neg, adjoint=neg)

    def rhs(self, shape: tuple[int, int]) -> np.ndarray:
        return np.zeros((2,) + shape)


def linearize(
    constraint, p_k: np.ndarray, q_k: np.ndarray
) -> tuple[LinearOperatorHandle, LinearOperatorHandle]:
    """Partial Jacobians of the constraint at the current iterate."""
    return constraint.d_p(p_k, q_k), constraint.d_q(p_k, q_k)


def operator_norm(
    op: LinearOperatorHandle, shape: tuple, iters: int = 50, seed: int = 0
) -> float:
    """Largest singular value by power iteration on op* op."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    norm = np.sqrt((v**2).sum())
    if norm == 0:
        return 0.0
    v /= norm
    est = 0.0
    for _ in range(iters):
        w = op.adjoint(op(v))
        n = np.sqrt((w**2).sum())
        if n < 1e-300:
            return 0.0
        est = np.sqrt(n)
        v = w / n
    return float(est)


def split_constraint_norm(
    constraint: TVSplitConstraint, shape: tuple[int, int], iters: int = 50
) -> float:
    """Norm of (p, q) -> T(p, q) for the split constraint, by power iteration."""
    rng = np.random.default_rng(0)
    p = rng.standard_normal(shape)
    q = rng.standard_normal((2,) + shape)
    scale = np.sqrt((p**2).sum() + (q**2).sum())
    p /= scale
    q /= scale
    est = 0.0
    for _ in range(iters):
        r = gradient_op(p) - q
        tp = -divergence_op(r)
        tq = -r
        n = np.sqrt((tp**2).sum() + (tq**2).sum())
        if n < 1e-300:
            return 0.0
        est = np.sqrt(n)
        p = tp / n
        q = tq / n
    return float(est)
