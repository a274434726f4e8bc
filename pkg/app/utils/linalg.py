"""
Small dense Hermitian linear algebra shared by the metric, optimizer and
detector services.

Resolvents (I + x xᴴ)⁻¹ are always obtained from a Cholesky factorization;
matrix square roots come from a Hermitian eigendecomposition.
"""
import numpy as np
from scipy import linalg

from app.utils.exceptions import LinearAlgebraException, DimensionException


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def gram(x: np.ndarray) -> np.ndarray:
    """x xᴴ, batched over leading axes."""
    return x @ np.conj(np.swapaxes(x, -1, -2))


def identity_plus_gram(x: np.ndarray) -> np.ndarray:
    T = x.shape[-2]
    return np.eye(T, dtype=complex) + gram(x)


def hermitian_factor(A: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cholesky factor of a Hermitian positive-definite matrix."""
    try:
        return linalg.cho_factor(A, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise LinearAlgebraException(f"Cholesky factorization failed: {e}")


def logdet_from_factor(factor: tuple[np.ndarray, bool]) -> float:
    L, _ = factor
    return float(2.0 * np.sum(np.log(np.real(np.diag(L)))))


def resolvent(x: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Returns ((I + x xᴴ)⁻¹, log det(I + x xᴴ)) for a single T×M matrix x.
    """
    if x.ndim != 2:
        raise DimensionException(f"Expected a 2-D symbol, got shape {x.shape}")
    S = identity_plus_gram(x)
    factor = hermitian_factor(S)
    R = linalg.cho_solve(factor, np.eye(S.shape[0], dtype=complex))
    return hermitian_part(R), logdet_from_factor(factor)


def resolvents(symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Batched `resolvent` over a stack of symbols with shape (K, T, M).
    Returns R with shape (K, T, T) and log-determinants with shape (K,).
    """
    if symbols.ndim != 3:
        raise DimensionException(f"Expected a (K, T, M) stack, got shape {symbols.shape}")
    return hermitian_inverse_batch(identity_plus_gram(symbols))


def hermitian_inverse_batch(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    S⁻¹ and log det S for a stack of Hermitian positive-definite matrices,
    through batched Cholesky factors S = L Lᴴ (S⁻¹ = L⁻ᴴ L⁻¹).
    """
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as e:
        raise LinearAlgebraException(f"Cholesky factorization failed: {e}")
    T = S.shape[-1]
    eye = np.broadcast_to(np.eye(T, dtype=complex), S.shape)
    L_inv = np.linalg.solve(L, eye)
    R = np.conj(np.swapaxes(L_inv, -1, -2)) @ L_inv
    logdets = 2.0 * np.sum(np.log(np.real(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)
    return hermitian_part(R), logdets


def hermitian_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian positive semi-definite matrix."""
    w, V = linalg.eigh(A)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ np.conj(V.T)


def hermitian_inv_sqrt(A: np.ndarray) -> np.ndarray:
    """A^{-1/2} for Hermitian positive-definite A."""
    if not np.allclose(A, np.conj(A.T), rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(A).max()))):
        raise LinearAlgebraException("Matrix is not Hermitian")
    w, V = linalg.eigh(A)
    if w.min() <= 0:
        raise LinearAlgebraException(f"Matrix is not positive definite (min eigenvalue {w.min():.3e})")
    return (V / np.sqrt(w)) @ np.conj(V.T)


def frobenius_sq(A: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm over the last two axes."""
    return np.sum(np.abs(A) ** 2, axis=(-2, -1))


def trace_products(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Re tr(A_a B_b) for every pair of stacks A (m, T, T) and B (n, T, T) of
    Hermitian matrices, as an (m, n) real matrix.
    """
    m, T, _ = A.shape
    n = B.shape[0]
    # tr(A B) = Σ A[t,u] B[u,t] = Σ A[t,u] conj(B[t,u]) for Hermitian B
    return np.real(A.reshape(m, T * T) @ np.conj(B.reshape(n, T * T)).T)
