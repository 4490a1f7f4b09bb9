from dataclasses import dataclass
from functools import cached_property
import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from proxframework.model import InvalidInputException, InvalidParameterException

logger = logging.getLogger(__name__)


def _generator(seed: int) -> np.random.Generator:
    # PCG64 stream, filled in the order A, a, (B_i, b_i) for each i, then c
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class QcqpInstance:
    """min |A x - a|^2 s.t. |B_i x - b_i|^2 <= c_i."""
    A: np.ndarray
    a: np.ndarray
    B_list: np.ndarray
    b_list: np.ndarray
    c: np.ndarray
    seed: int = None

    kind = 'qcqp'

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputException(f'A must be square, got shape {A.shape}')
        n = A.shape[0]

        c = np.asarray(self.c, dtype=float).reshape(-1)
        m = c.shape[0]
        B = np.asarray(self.B_list, dtype=float).reshape(m, n, n) if m else np.zeros((0, n, n))
        b = np.asarray(self.b_list, dtype=float).reshape(m, n) if m else np.zeros((0, n))
        a = np.asarray(self.a, dtype=float).reshape(-1)

        if a.shape != (n,):
            raise InvalidInputException(f'a has shape {a.shape}, expected ({n},)')
        if np.any(c <= 0):
            raise InvalidInputException('constraint levels c must be positive')

        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'B_list', B)
        object.__setattr__(self, 'b_list', b)
        object.__setattr__(self, 'c', c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @cached_property
    def ata(self) -> np.ndarray:
        return self.A.T @ self.A

    @cached_property
    def atb(self) -> np.ndarray:
        return self.A.T @ self.a

    @cached_property
    def btb(self) -> np.ndarray:
        return np.einsum('ikj,ikl->ijl', self.B_list, self.B_list)

    @cached_property
    def btb_vec(self) -> np.ndarray:
        return np.einsum('ikj,ik->ij', self.B_list, self.b_list)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Rows B_i x - b_i."""
        return self.B_list @ x - self.b_list

    def objective(self, x: np.ndarray) -> float:
        residual = self.A @ x - self.a
        return float(residual @ residual)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2 * self.A.T @ (self.A @ x - self.a)

    def constraints(self, x: np.ndarray) -> np.ndarray:
        residuals = self.residuals(x)
        return np.sum(residuals ** 2, axis=1) - self.c

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return 2 * np.einsum('ik,ikj->ij', self.residuals(x), self.B_list)

    def lagrangian_hessian(self, lam: np.ndarray) -> np.ndarray:
        return 2 * self.ata + 2 * np.tensordot(lam, self.btb, axes=1)

    def stationary_point(self, lam: np.ndarray) -> np.ndarray:
        """Minimiser of the Lagrangian in x for fixed lambda >= 0."""
        rhs = 2 * self.atb + 2 * lam @ self.btb_vec
        return cho_solve(cho_factor(self.lagrangian_hessian(lam)), rhs)

    def least_squares(self) -> np.ndarray:
        return np.linalg.lstsq(self.A, self.a, rcond=None)[0]

    def __str__(self):
        return f'qcqp m={self.m} n={self.n} seed={self.seed}'


@dataclass(frozen=True, eq=False)
class LinearInstance:
    """min |A x - a|^2 s.t. C x <= d."""
    A: np.ndarray
    a: np.ndarray
    C: np.ndarray
    d: np.ndarray
    seed: int = None

    kind = 'linear'

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputException(f'A must be square, got shape {A.shape}')
        n = A.shape[0]
        d = np.asarray(self.d, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(d.shape[0], n)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        if a.shape != (n,):
            raise InvalidInputException(f'a has shape {a.shape}, expected ({n},)')

        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'C', C)
        object.__setattr__(self, 'd', d)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.d.shape[0]

    @cached_property
    def ata(self) -> np.ndarray:
        return self.A.T @ self.A

    @cached_property
    def atb(self) -> np.ndarray:
        return self.A.T @ self.a

    def objective(self, x: np.ndarray) -> float:
        residual = self.A @ x - self.a
        return float(residual @ residual)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2 * self.A.T @ (self.A @ x - self.a)

    def constraints(self, x: np.ndarray) -> np.ndarray:
        return self.C @ x - self.d

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.C.copy()

    def lagrangian_hessian(self, lam: np.ndarray) -> np.ndarray:
        return 2 * self.ata

    def stationary_point(self, lam: np.ndarray) -> np.ndarray:
        return cho_solve(cho_factor(2 * self.ata), 2 * self.atb - self.C.T @ lam)

    def least_squares(self) -> np.ndarray:
        return np.linalg.lstsq(self.A, self.a, rcond=None)[0]

    def __str__(self):
        return f'linear m={self.m} n={self.n} seed={self.seed}'


def _check_dims(m: int, n: int):
    if m < 0:
        raise InvalidParameterException(name='m', value=m, requirement='m >= 0')
    if n < 1:
        raise InvalidParameterException(name='n', value=n, requirement='n >= 1')


def generate_instance(m: int, n: int, seed: int) -> QcqpInstance:
    _check_dims(m, n)
    rng = _generator(seed)

    A = rng.random((n, n))
    a = rng.random(n)
    B = np.empty((m, n, n))
    b = np.empty((m, n))
    for i in range(m):
        B[i] = rng.random((n, n))
        b[i] = rng.random(n)
    c = 10 * (1 + rng.random(m))

    logger.debug(f'generated qcqp m={m} n={n} seed={seed}')
    return QcqpInstance(A=A, a=a, B_list=B, b_list=b, c=c, seed=seed)


def generate_linear_instance(m: int, n: int, seed: int) -> LinearInstance:
    """Uniform A, a, C with d in [10, 20), so x = 0 is strictly feasible."""
    _check_dims(m, n)
    rng = _generator(seed)

    A = rng.random((n, n))
    a = rng.random(n)
    C = rng.random((m, n))
    d = 10 * (1 + rng.random(m))

    logger.debug(f'generated linear instance m={m} n={n} seed={seed}')
    return LinearInstance(A=A, a=a, C=C, d=d, seed=seed)
