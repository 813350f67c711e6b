"""Dense least-squares kernels used by every solver in the package.

All matrices are row-major float64 numpy arrays.  The central routine is
``min_norm_lstsq``, which returns the minimum-norm solution of an arbitrary
(possibly rank-deficient, possibly under- or over-determined) linear
least-squares problem via the SVD, with singular values below
``rcond * s_max`` treated as zero.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, NumericFailureError

#: Default relative cutoff for small singular values.
DEFAULT_RCOND = 1e-12


@dataclass(frozen=True)
class LstsqSolution:
    """Result of a minimum-norm least-squares solve.

    x               solution array (same trailing shape as the rhs)
    rank            numerical rank at the given rcond
    residual_norm   Frobenius norm of A @ x - b
    singular_values singular values of A, descending (None for the qr driver)
    """

    x: np.ndarray
    rank: int
    residual_norm: float
    singular_values: np.ndarray


def _check_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.size and not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(a)


def matmul(a, b):
    """Matrix product with explicit conformance checking."""
    a = _check_matrix(a, "a")
    b = _check_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise InvalidInputError(
            f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def min_norm_lstsq(a, b, rcond=DEFAULT_RCOND, driver="svd"):
    """Minimum-norm least-squares solution of ``a @ x = b``.

    ``b`` may be a vector or a matrix of stacked right-hand sides; the
    solution has matching shape.  Singular values s_i <= rcond * s_0 are
    discarded, which both regularizes rank-deficient systems and selects the
    minimum-norm representative among the minimizers.

    ``driver="svd"`` (the default) computes the full SVD and reports the
    singular values.  ``driver="qr"`` uses a complete orthogonal
    factorization (LAPACK gelsy), which returns the same minimum-norm
    solution for systems whose rank is unambiguous at the given ``rcond``
    but runs several times faster on tall dense matrices; it does not
    expose singular values (``singular_values`` is None).  The iterative
    solvers use the qr driver in their inner loops.
    """
    a = _check_matrix(a, "a")
    b_in = np.asarray(b, dtype=np.float64)
    if b_in.ndim not in (1, 2):
        raise InvalidInputError(f"b must be 1-D or 2-D, got ndim={b_in.ndim}")
    if b_in.size and not np.all(np.isfinite(b_in)):
        raise InvalidInputError("b contains non-finite entries")
    if b_in.shape[0] != a.shape[0]:
        raise InvalidInputError(
            f"shape mismatch: a is {a.shape}, b has leading dim {b_in.shape[0]}")
    if rcond < 0:
        raise InvalidInputError("rcond must be non-negative")

    if driver not in ("svd", "qr"):
        raise InvalidInputError(f"unknown driver {driver!r}; use 'svd' or 'qr'")

    bmat = b_in if b_in.ndim == 2 else b_in[:, None]
    if driver == "qr" and min(a.shape) > 0:
        from scipy.linalg import lstsq as _scipy_lstsq
        x, _, rank, _ = _scipy_lstsq(a, bmat, cond=rcond,
                                     lapack_driver="gelsy",
                                     check_finite=False)
        residual_norm = float(np.linalg.norm(a @ x - bmat))
        if b_in.ndim == 1:
            x = x[:, 0]
        return LstsqSolution(x=x, rank=int(rank),
                             residual_norm=residual_norm,
                             singular_values=None)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numerical edge
        raise NumericFailureError(f"SVD failed: {exc}") from exc

    if s.size == 0 or s[0] == 0.0:
        rank = 0
        x = np.zeros((a.shape[1], bmat.shape[1]))
    else:
        keep = s > rcond * s[0]
        rank = int(np.count_nonzero(keep))
        ut_b = u[:, keep].T @ bmat
        x = vt[keep].T @ (ut_b / s[keep, None])

    residual_norm = float(np.linalg.norm(a @ x - bmat))
    if b_in.ndim == 1:
        x = x[:, 0]
    return LstsqSolution(x=x, rank=rank, residual_norm=residual_norm,
                         singular_values=s)
