"""Desk-scale differentiable objectives with analytic gradients.

Each factory returns an immutable :class:`Problem` whose data, initial
parameters, and therefore whole trajectory are determined by a 64-bit seed.
Analytic gradients are hand-derived and cross-checked against the central
finite-difference oracle in the test suite.

Initial weights are built as Q diag(sigma) P^T with explicit, distinct,
nonzero singular values and random orthogonal factors, so the isospectral
manifold through the starting point is well defined and the spectral norm
of the initial weight does not grow with the layer width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ShapeError
from .linalg import Matrix, exp_cayley
from .rng import Rng


@dataclass(frozen=True)
class Problem:
    """A differentiable objective over a list of matrix parameters."""

    name: str
    shapes: list[tuple[int, int]]
    loss: Callable[[list[Matrix]], float]
    gradients: Callable[[list[Matrix]], list[Matrix]]
    initial_params: list[Matrix]
    width: int
    optimum_hint: float | None = None
    metadata: dict = field(default_factory=dict)

    def check_params(self, params: list[Matrix]) -> None:
        if len(params) != len(self.shapes):
            raise ShapeError(
                f"expected {len(self.shapes)} parameters, got {len(params)}"
            )
        for p, shape in zip(params, self.shapes):
            if p.shape != shape:
                raise ShapeError(f"parameter shape {p.shape}, expected {shape}")


def _random_orthogonal(dim: int, rng: Rng) -> Matrix:
    """Orthogonal matrix from the Cayley transform of a random skew matrix."""
    a = rng.normal_matrix(dim, dim)
    return exp_cayley(0.5 * (a - a.T))


def _structured_init(d_out: int, d_in: int, rng: Rng, sigma: np.ndarray) -> Matrix:
    """Q diag(sigma) P^T with random orthogonal Q (d_out) and P (d_in)."""
    q = _random_orthogonal(d_out, rng)
    p = _random_orthogonal(d_in, rng)
    d = np.zeros((d_out, d_in))
    m = min(d_out, d_in)
    d[np.arange(m), np.arange(m)] = sigma
    return q @ d @ p.T


def least_squares(d_out: int, d_in: int, n_samples: int, seed: int) -> Problem:
    """f(W) = 0.5 |W X - Y|_F^2 with fixed standard-normal X and Y.

    The gradient is (W X - Y) X^T.  The initial weight has singular values
    evenly placed in (0.5, 1.5], so its spectral norm is width-free.
    """
    if d_out < 1 or d_in < 1 or n_samples < 1:
        raise DomainError("dimensions and n_samples must be positive")
    rng = Rng(seed)
    x = rng.normal_matrix(d_in, n_samples)
    y = rng.normal_matrix(d_out, n_samples)
    m = min(d_out, d_in)
    sigma = 0.5 + np.arange(1, m + 1) / m
    w0 = _structured_init(d_out, d_in, rng, sigma)

    def loss(params):
        (w,) = params
        r = w @ x - y
        return 0.5 * float(np.sum(r * r))

    def gradients(params):
        (w,) = params
        return [(w @ x - y) @ x.T]

    return Problem(
        name="least_squares",
        shapes=[(d_out, d_in)],
        loss=loss,
        gradients=gradients,
        initial_params=[w0],
        width=max(d_out, d_in),
        metadata={"n_samples": n_samples, "seed": seed},
    )


def procrustes(d: int, seed: int) -> Problem:
    """f(W) = 0.5 |W - Q W0 P^T|_F^2 with the target on W0's manifold.

    W0 has singular values 1..d, so the global optimum is reachable from W0
    by two-sided rotations alone and has zero loss and zero stationarity.
    """
    if d < 2:
        raise DomainError(f"d must be >= 2, got {d}")
    rng = Rng(seed)
    w0 = _structured_init(d, d, rng, np.arange(1, d + 1, dtype=np.float64))
    q = _random_orthogonal(d, rng)
    p = _random_orthogonal(d, rng)
    target = q @ w0 @ p.T

    def loss(params):
        (w,) = params
        r = w - target
        return 0.5 * float(np.sum(r * r))

    def gradients(params):
        (w,) = params
        return [w - target]

    return Problem(
        name="procrustes",
        shapes=[(d, d)],
        loss=loss,
        gradients=gradients,
        initial_params=[w0],
        width=d,
        optimum_hint=0.0,
        metadata={"seed": seed, "target": target},
    )


def mlp(widths: list[int], depth: int, n_samples: int, seed: int) -> Problem:
    """Deep tanh regression network with matrix parameters only.

    ``widths`` lists the layer sizes, so it must hold depth + 1 entries;
    layer l maps widths[l] to widths[l+1] and every layer except the last
    applies tanh.  There are no biases and no normalization layers.  The
    targets come from a frozen two-layer tanh teacher of matching
    dimensions, so the regression is learnable but not linear.  The loss is
    averaged over samples: f = |f(X) - Y|_F^2 / (2 n).
    """
    if depth < 1:
        raise DomainError(f"depth must be >= 1, got {depth}")
    if len(widths) != depth + 1:
        raise DomainError(
            f"widths must list {depth + 1} layer sizes, got {len(widths)}"
        )
    if any(w < 1 for w in widths) or n_samples < 1:
        raise DomainError("layer sizes and n_samples must be positive")
    rng = Rng(seed)
    x = rng.normal_matrix(widths[0], n_samples)
    hidden = max(widths)
    t1 = rng.normal_matrix(hidden, widths[0], scale=1.0 / np.sqrt(widths[0]))
    t2 = rng.normal_matrix(widths[-1], hidden, scale=1.0 / np.sqrt(hidden))
    y = t2 @ np.tanh(t1 @ x)
    init = []
    for l in range(depth):
        m = min(widths[l + 1], widths[l])
        sigma = 0.5 + np.arange(1, m + 1) / m
        init.append(_structured_init(widths[l + 1], widths[l], rng, sigma))
    return _mlp_core(widths, depth, x, y, init, {"n_samples": n_samples, "seed": seed})


def _mlp_core(
    widths: list[int],
    depth: int,
    x: Matrix,
    y: Matrix,
    init: list[Matrix],
    metadata: dict,
) -> Problem:
    n_samples = x.shape[1]

    def forward(params):
        h = x
        acts = [h]
        for l, w in enumerate(params):
            z = w @ h
            h = np.tanh(z) if l < depth - 1 else z
            acts.append(h)
        return acts

    def loss(params):
        out = forward(params)[-1]
        return float(np.sum((out - y) ** 2)) / (2.0 * n_samples)

    def gradients(params):
        acts = forward(params)
        delta = (acts[-1] - y) / n_samples
        grads: list[Matrix] = [None] * depth
        for l in range(depth - 1, -1, -1):
            grads[l] = delta @ acts[l].T
            if l > 0:
                delta = (params[l].T @ delta) * (1.0 - acts[l] ** 2)
        return grads

    return Problem(
        name="mlp",
        shapes=[(widths[l + 1], widths[l]) for l in range(depth)],
        loss=loss,
        gradients=gradients,
        initial_params=init,
        width=max(widths),
        metadata={"widths": list(widths), **metadata},
    )


def finite_difference_grads(
    problem: Problem, params: list[Matrix], h: float
) -> list[Matrix]:
    """Central-difference gradient oracle, one entry at a time."""
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    problem.check_params(params)
    work = [p.copy() for p in params]
    grads = []
    for k, p in enumerate(work):
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            f_plus = problem.loss(work)
            p[idx] = orig - h
            f_minus = problem.loss(work)
            p[idx] = orig
            g[idx] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads
