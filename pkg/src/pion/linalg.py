"""Dense real matrix kernel.

Matrices are two-dimensional float64 numpy arrays throughout the package.
Every public operation validates operand shapes, returns a fresh array, and
guarantees finite entries in its result (raising
:class:`~pion.errors.NonFiniteError` otherwise), which lets callers treat
any overflow as a divergence signal rather than silently propagating NaNs.

Beyond elementwise plumbing this module provides the pieces the optimizers
are built from: three approximations to the matrix exponential (truncated
power series, the second-order expansion used in the update rule, and the
Cayley transform), an LU solver with partial pivoting, a one-sided Jacobi
SVD, power iteration for the spectral norm, and Newton-Schulz polar
orthogonalization.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    NonFiniteError,
    ShapeError,
    SingularMatrixError,
)

Matrix = np.ndarray

# Pivot magnitudes below this abort the LU factorization.
_PIVOT_FLOOR = 1e-300

# Quintic Newton-Schulz coefficients; cubic convergence of the polar factor
# for inputs with spectral norm at most 1.
_NS_COEFFS = (3.4445, -4.7750, 2.0315)

# One-sided Jacobi: per-pair relative off-diagonal threshold and sweep cap.
_JACOBI_TOL = 1e-13
_JACOBI_MAX_SWEEPS = 100


def as_matrix(values) -> Matrix:
    """Coerce ``values`` to a validated 2-D float64 array."""
    a = np.array(values, dtype=np.float64, order="C")
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"matrix dimensions must be >= 1, got {a.shape}")
    return _finite(a)


def _finite(a: Matrix) -> Matrix:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or infinite entries")
    return a


def _check_2d(a: Matrix, name: str = "operand") -> Matrix:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    return a


def _check_square(a: Matrix, name: str = "operand") -> Matrix:
    a = _check_2d(a, name)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got {a.shape}")
    return a


def _check_same_shape(a: Matrix, b: Matrix) -> tuple[Matrix, Matrix]:
    a, b = _check_2d(a, "left operand"), _check_2d(b, "right operand")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def identity(n: int) -> Matrix:
    return np.eye(n)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a, b = _check_2d(a, "left operand"), _check_2d(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return _finite(a @ b)


def transpose(a: Matrix) -> Matrix:
    return _check_2d(a).T.copy()


def add(a: Matrix, b: Matrix) -> Matrix:
    a, b = _check_same_shape(a, b)
    return _finite(a + b)


def sub(a: Matrix, b: Matrix) -> Matrix:
    a, b = _check_same_shape(a, b)
    return _finite(a - b)


def scale(a: Matrix, c: float) -> Matrix:
    return _finite(_check_2d(a) * float(c))


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    a, b = _check_same_shape(a, b)
    return _finite(a * b)


def elem_div_sqrt_eps(m: Matrix, v: Matrix, eps: float) -> Matrix:
    """Elementwise m / (sqrt(v) + eps); v must be entrywise non-negative."""
    m, v = _check_same_shape(m, v)
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps}")
    if np.any(v < 0.0):
        raise DomainError("second-moment matrix has negative entries")
    return _finite(m / (np.sqrt(v) + eps))


def frobenius_norm(a: Matrix) -> float:
    return float(np.sqrt(np.sum(_check_2d(a) ** 2)))


def skew_error(a: Matrix) -> float:
    """Frobenius norm of A + A^T; zero exactly when A is skew-symmetric."""
    a = _check_square(a)
    return float(np.sqrt(np.sum((a + a.T) ** 2)))


def exp_taylor(a: Matrix, order: int) -> Matrix:
    """Truncated power series sum_{k<=order} A^k / k!."""
    a = _check_square(a)
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    result = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, order + 1):
        term = term @ a / k
        result = result + term
    return _finite(result)


def exp_e2(a: Matrix, eta_alpha: float) -> Matrix:
    """Second-order expansion I + sA + (sA)^2/2 with s = eta_alpha."""
    a = _check_square(a)
    sa = float(eta_alpha) * a
    return _finite(np.eye(a.shape[0]) + sa + 0.5 * (sa @ sa))


def exp_cayley(a: Matrix) -> Matrix:
    """Cayley transform (I - A/2)^-1 (I + A/2).

    Agrees with exp(A) to second order and is exactly orthogonal (to solver
    precision) whenever A is skew-symmetric.
    """
    a = _check_square(a)
    eye = np.eye(a.shape[0])
    return _finite(solve(eye - 0.5 * a, eye + 0.5 * a))


def solve(a: Matrix, b: Matrix) -> Matrix:
    """Solve A X = B by LU factorization with partial pivoting."""
    a = _check_square(a, "coefficient matrix")
    b = _check_2d(b, "right-hand side")
    if b.shape[0] != a.shape[0]:
        raise ShapeError(f"rhs rows {b.shape[0]} != matrix rows {a.shape[0]}")
    n = a.shape[0]
    lu = a.copy()
    x = b.astype(np.float64).copy()
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < _PIVOT_FLOOR:
            raise SingularMatrixError(f"pivot {lu[p, k]!r} at column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            x[[k, p]] = x[[p, k]]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    # Forward substitution with unit lower factor, already permuted.
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    # Back substitution with the upper factor.
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            x[k] -= lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= lu[k, k]
    return _finite(x)


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament pairings covering all column pairs in n-1 (or n) rounds."""
    players = list(range(n))
    if n % 2 == 1:
        players.append(-1)
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        left = np.array(players[: m // 2])
        right = np.array(players[m - 1 : m // 2 - 1 : -1])
        keep = (left >= 0) & (right >= 0)
        p = np.minimum(left[keep], right[keep])
        q = np.maximum(left[keep], right[keep])
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def singular_values(a: Matrix) -> np.ndarray:
    """All singular values of A in descending order.

    Uses cyclic one-sided Jacobi on the columns of the tall orientation.
    Each round rotates a set of disjoint column pairs simultaneously; a
    sweep covers every pair once.  Convergence is declared when a full
    sweep performs no rotation, i.e. every pair satisfies
    |<b_p, b_q>| <= 1e-13 * ||b_p|| ||b_q||.
    """
    a = _check_2d(a)
    # Work on the tall orientation in column-major layout; the sweeps below
    # gather and scatter full columns, which dominates the runtime.
    b = np.asfortranarray(a if a.shape[0] >= a.shape[1] else a.T, dtype=np.float64)
    n = b.shape[1]
    if n == 1:
        return np.array([float(np.linalg.norm(b))])
    rounds = _round_robin_rounds(n)
    gather = [np.concatenate([p, q]) for p, q in rounds]
    tol_sq = _JACOBI_TOL * _JACOBI_TOL
    for _ in range(_JACOBI_MAX_SWEEPS):
        rotated = False
        for (p, q), idx in zip(rounds, gather):
            k = p.shape[0]
            blk = b[:, idx]
            bp, bq = blk[:, :k], blk[:, k:]
            app = np.einsum("ij,ij->j", bp, bp)
            aqq = np.einsum("ij,ij->j", bq, bq)
            apq = np.einsum("ij,ij->j", bp, bq)
            live = apq * apq > tol_sq * app * aqq
            if not np.any(live):
                continue
            rotated = True
            zeta = (aqq[live] - app[live]) / (2.0 * apq[live])
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0.0] = 1.0
            cs = 1.0 / np.sqrt(1.0 + t * t)
            sn = cs * t
            bpl, bql = bp[:, live], bq[:, live]
            b[:, p[live]] = cs * bpl - sn * bql
            b[:, q[live]] = sn * bpl + cs * bql
        if not rotated:
            sv = np.sort(np.sqrt(np.sum(b * b, axis=0)))[::-1].copy()
            if not np.all(np.isfinite(sv)):
                raise NonFiniteError("singular values are not finite")
            return sv
    raise ConvergenceError(
        f"Jacobi SVD did not converge within {_JACOBI_MAX_SWEEPS} sweeps"
    )


def spectral_norm(a: Matrix, iters: int = 50, tol: float = 1e-8) -> float:
    """Largest singular value estimated by power iteration on A^T A.

    Starts from the normalized all-ones vector so repeated calls are
    bit-reproducible.  Stops early once the estimate is stable to ``tol``
    relative change.
    """
    a = _check_2d(a)
    if iters < 1:
        raise DomainError(f"iters must be >= 1, got {iters}")
    amax = float(np.max(np.abs(a)))
    if amax == 0.0:
        return 0.0
    a = a / amax  # keep the unnormalized block iterates far from overflow
    n = a.shape[1]
    v = np.full(n, 1.0 / np.sqrt(n))
    sigma = 0.0
    done = 0
    # Renormalize in blocks; the direction is unaffected and the estimate
    # sqrt(|A^T A v| / |v|) is checked once per block.
    block = 8
    while done < iters:
        steps = min(block, iters - done)
        for _ in range(steps):
            v = a.T @ (a @ v)
        done += steps
        nv = float(np.sqrt(v @ v))
        if nv == 0.0:
            return 0.0
        v /= nv
        w = a @ v
        prev, sigma = sigma, float(np.sqrt(w @ w))
        if prev > 0.0 and abs(sigma - prev) <= tol * sigma:
            break
    return amax * sigma


def newton_schulz_orthogonalize(a: Matrix, iters: int = 5) -> Matrix:
    """Approximate polar factor of A via the quintic Newton-Schulz iteration.

    The input is normalized by its Frobenius norm so every singular value
    starts in (0, 1]; five iterations then push the nonzero singular values
    close to 1.  The iterate is an odd polynomial in the input, so skew
    symmetry (like transpose symmetry) is preserved.
    """
    a = _check_2d(a)
    if iters < 1:
        raise DomainError(f"iters must be >= 1, got {iters}")
    norm = frobenius_norm(a)
    if norm == 0.0:
        raise DegenerateInputError("cannot orthogonalize the zero matrix")
    ca, cb, cc = _NS_COEFFS
    flip = a.shape[0] > a.shape[1]
    x = (a.T if flip else a) / norm
    for _ in range(iters):
        g = x @ x.T
        x = ca * x + (cb * g + cc * (g @ g)) @ x
    return _finite((x.T if flip else x).copy())
