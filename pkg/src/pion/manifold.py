"""Geometry of the isospectral manifold.

A weight matrix updated by two-sided orthogonal factors stays on the set of
matrices sharing its initial singular values.  This module builds the
skew-symmetric generators of those factors from a Euclidean gradient,
normalizes and scales them, and measures how close an iterate is to a
first-order critical point of the restricted problem and how far its
spectrum has drifted from a reference.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, ShapeError
from .linalg import Matrix, _check_2d, frobenius_norm, singular_values, skew_error

# Default stability constant wherever a formula adds an epsilon to a norm.
DEFAULT_EPS = 1e-8

# Paired singular values of a skew matrix must agree to this relative
# tolerance before they are collapsed into one rotation angle.
_PAIRING_RTOL = 1e-8


@dataclass(frozen=True)
class LiePair:
    """Input-side and output-side skew-symmetric gradients of one weight.

    ``g_in`` is d_in x d_in, ``g_out`` is d_out x d_out.  The pass-through
    flags record that a side was left untouched by a normalization step
    because it was identically zero.
    """

    g_in: Matrix
    g_out: Matrix
    in_passthrough: bool = False
    out_passthrough: bool = False


@dataclass(frozen=True)
class SpectrumRef:
    """Reference singular values captured at some step, descending."""

    values: np.ndarray
    captured_at_step: int = 0


def lie_gradients(w: Matrix, g: Matrix) -> LiePair:
    """Project the Euclidean gradient onto both rotation generators.

    g_in  = W^T G - G^T W   (d_in x d_in)
    g_out = G W^T - W G^T   (d_out x d_out)

    Both outputs are skew-symmetric by construction.
    """
    w, g = _check_2d(w, "weight"), _check_2d(g, "gradient")
    if w.shape != g.shape:
        raise ShapeError(f"weight {w.shape} vs gradient {g.shape}")
    wg = w.T @ g
    gw = g @ w.T
    return LiePair(g_in=wg - wg.T, g_out=gw - gw.T)


def descent_pairing(w: Matrix, g: Matrix) -> tuple[float, float]:
    """Frobenius pairings (<G, W g_in>, <G, g_out W>).

    Each pairing equals half the squared norm of the corresponding
    generator, which is what makes the rotation update a descent direction.
    """
    pair = lie_gradients(w, g)
    first = float(np.sum(g * (w @ pair.g_in)))
    second = float(np.sum(g * (pair.g_out @ w)))
    return first, second


def stationarity_measure(w: Matrix, g: Matrix) -> float:
    """||g_in||_F^2 + ||g_out||_F^2; zero exactly at manifold-critical points."""
    pair = lie_gradients(w, g)
    return float(np.sum(pair.g_in**2) + np.sum(pair.g_out**2))


def is_first_order_stationary(w: Matrix, g: Matrix, tol: float) -> bool:
    """Scale-aware stationarity test with threshold tol^2 (1 + |W|^2 |G|^2)."""
    if tol <= 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    bound = tol * tol * (1.0 + float(np.sum(w**2)) * float(np.sum(g**2)))
    return stationarity_measure(w, g) <= bound


def rotation_angles(s: Matrix) -> np.ndarray:
    """Planar rotation angles |theta_j| of a skew generator, descending.

    The singular values of a real skew matrix occur in equal pairs (with an
    extra zero in odd dimension); each pair is one planar rotation.  Returns
    one angle per pair and drops the unpaired zero.
    """
    s = _check_2d(s, "generator")
    if s.shape[0] != s.shape[1]:
        raise ShapeError(f"generator must be square, got {s.shape}")
    err = skew_error(s)
    if err > 1e-10 * (1.0 + frobenius_norm(s)):
        raise DomainError(f"input is not skew-symmetric (|S + S^T|_F = {err:.3e})")
    sv = singular_values(s)
    n_pairs = s.shape[0] // 2
    angles = np.empty(n_pairs)
    scale = sv[0] if sv[0] > 0.0 else 1.0
    for j in range(n_pairs):
        a, b = sv[2 * j], sv[2 * j + 1]
        if abs(a - b) > _PAIRING_RTOL * scale:
            raise DomainError(
                f"singular values {a!r} and {b!r} do not pair up; "
                "input is too far from skew-symmetric"
            )
        angles[j] = 0.5 * (a + b)
    return angles


def bilateral_normalize(lp: LiePair) -> LiePair:
    """Rescale each side to norm sqrt(dim); zero sides pass through flagged.

    g_out <- sqrt(d_out) g_out / |g_out|_F and likewise for the in side,
    so the average per-plane rotation magnitude is one on both sides.
    """
    n_in = frobenius_norm(lp.g_in)
    n_out = frobenius_norm(lp.g_out)
    g_in, in_flag = lp.g_in, n_in == 0.0
    g_out, out_flag = lp.g_out, n_out == 0.0
    if not in_flag:
        g_in = np.sqrt(lp.g_in.shape[0]) / n_in * lp.g_in
    if not out_flag:
        g_out = np.sqrt(lp.g_out.shape[0]) / n_out * lp.g_out
    return replace(
        lp, g_in=g_in, g_out=g_out, in_passthrough=in_flag, out_passthrough=out_flag
    )


def rms_alpha(
    w: Matrix,
    a_in: Matrix | None,
    a_out: Matrix | None,
    c: float,
    eps: float = DEFAULT_EPS,
) -> float:
    """Per-weight scaling making the first-order update norm c sqrt(d_out d_in).

    The first-order update is A_out W + W A_in (or the single present term),
    so alpha = c sqrt(d_out d_in) / (|A_out W + W A_in|_F + eps).
    """
    if c <= 0.0:
        raise DomainError(f"c must be positive, got {c}")
    if eps <= 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    if a_in is None and a_out is None:
        raise DomainError("at least one of a_in, a_out must be present")
    w = _check_2d(w, "weight")
    d_out, d_in = w.shape
    if a_out is not None and a_in is not None:
        first_order = a_out @ w + w @ a_in
    elif a_out is not None:
        first_order = a_out @ w
    else:
        first_order = w @ a_in
    return c * np.sqrt(d_out * d_in) / (frobenius_norm(first_order) + eps)


def capture_spectrum(w: Matrix, step: int = 0) -> SpectrumRef:
    """Record the current singular values as a drift reference."""
    return SpectrumRef(values=singular_values(w), captured_at_step=step)


def spectrum_drift(w: Matrix, ref: SpectrumRef) -> float:
    """Worst-case relative drift of the singular values from the reference.

    max_i |sigma_i(W) - ref_i| / (ref_0 + 1e-300), with sigma computed by
    the Jacobi SVD.
    """
    w = _check_2d(w, "weight")
    if min(w.shape) != len(ref.values):
        raise ShapeError(
            f"reference holds {len(ref.values)} values, weight has {min(w.shape)}"
        )
    sv = singular_values(w)
    return float(np.max(np.abs(sv - ref.values)) / (ref.values[0] + 1e-300))
