import logging

import numpy as np

from proxframework.model import BlockMatrix, InvalidParameterException, PositiveDefiniteException

logger = logging.getLogger(__name__)

POWER_ITERATION_CAP = 200
POWER_ITERATION_TOL = 1e-10


def _as_jacobian(J: np.ndarray) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2:
        raise InvalidParameterException(name='J', value=J.shape, requirement='two dimensional m x n matrix')
    return J


def build_sigma(r: float, s: float, J: np.ndarray) -> BlockMatrix:
    """[[r I, -J^T], [-J, s I]]"""
    if not r > 0:
        raise InvalidParameterException(name='r', value=r, requirement='r > 0')
    if not s > 0:
        raise InvalidParameterException(name='s', value=s, requirement='s > 0')

    J = _as_jacobian(J)
    m, n = J.shape
    return BlockMatrix(r * np.eye(n), -J.T, -J, s * np.eye(m), symmetric=True)


def spectral_norm(J: np.ndarray,
                  max_iters: int = POWER_ITERATION_CAP,
                  tol: float = POWER_ITERATION_TOL) -> float:
    """Largest singular value of J.

    Power iteration on the smaller Gram matrix from a fixed-seed start vector; small
    matrices and non-converged iterations use the exact 2-norm.
    """
    J = _as_jacobian(J)
    if J.size == 0 or not np.any(J):
        return 0.0

    if min(J.shape) <= 3:
        return float(np.linalg.norm(J, 2))

    gram = J @ J.T if J.shape[0] <= J.shape[1] else J.T @ J

    v = np.random.default_rng(0).random(gram.shape[0]) + 0.5
    v /= np.linalg.norm(v)

    rayleigh = 0.0
    for _ in range(max_iters):
        u = gram @ v
        updated = float(v @ u)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return 0.0
        v = u / norm

        if abs(updated - rayleigh) <= tol * abs(updated):
            return float(np.sqrt(updated))
        rayleigh = updated

    logger.warning(f'power iteration did not settle in {max_iters} iterations for {J.shape} matrix, using svd')
    return float(np.linalg.norm(J, 2))


def sigma_is_pd(r: float, s: float, J: np.ndarray) -> bool:
    """Sigma is positive definite iff r s exceeds the largest eigenvalue of J J^T."""
    if not r > 0 or not s > 0:
        raise InvalidParameterException(name='r, s', value=(r, s), requirement='r > 0 and s > 0')
    return r * s > spectral_norm(J) ** 2


def sigma_norm(sigma: BlockMatrix, v: np.ndarray, tol: float = 1e-12) -> float:
    """sqrt(v^T Sigma v) without forming the dense matrix."""
    v = np.asarray(v, dtype=float)
    value = sigma.quadratic(v)

    scale = 1.0 + float(v @ v) * max(1.0, float(np.max(np.abs(np.diag(sigma.top_left)), initial=0.0)),
                                      float(np.max(np.abs(np.diag(sigma.bottom_right)), initial=0.0)))
    if value < -tol * scale:
        raise PositiveDefiniteException(quantity='v^T Sigma v', value=value)

    return float(np.sqrt(max(value, 0.0)))
