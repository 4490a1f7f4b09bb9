from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np


@dataclass
class InvalidInputException(Exception):
    message: str

    def __str__(self):
        return f'Invalid Input: {self.message}'


@dataclass
class InvalidParameterException(Exception):
    name: str
    value: float
    requirement: str = None

    def __str__(self):
        return f'Invalid Parameter: {self.name} = {self.value} ({self.requirement})'


@dataclass
class PositiveDefiniteException(Exception):
    quantity: str
    value: float

    def __str__(self):
        return f'Positive Definite Violation: {self.quantity} = {self.value:.3e}'


@dataclass
class SubproblemException(Exception):
    message: str
    multipliers: List[int] = None

    def __str__(self):
        if self.multipliers:
            return f'Subproblem Exception: {self.message} (multipliers {self.multipliers})'
        return f'Subproblem Exception: {self.message}'


@dataclass
class SolverException(Exception):
    method: str
    iteration: int
    message: str = None

    def __str__(self):
        return f'Solver Exception: ({self.method} @ {self.iteration}) {self.message}'


class DualCone(Enum):
    NONNEGATIVE = 'nonnegative'
    # sign convention of the literal experiment formulas, lambda <= 0
    NONPOSITIVE = 'nonpositive'

    def project(self, lam: np.ndarray) -> np.ndarray:
        if self is DualCone.NONNEGATIVE:
            return np.maximum(lam, 0.0)
        return np.minimum(lam, 0.0)

    def contains(self, lam: np.ndarray, tol: float = 0.0) -> bool:
        if self is DualCone.NONNEGATIVE:
            return bool(np.all(lam >= -tol))
        return bool(np.all(lam <= tol))

    def initial_multiplier(self, m: int) -> np.ndarray:
        if self is DualCone.NONNEGATIVE:
            return np.zeros(m)
        return -np.ones(m)


class ParamMode(Enum):
    ADAPTIVE = 'adaptive'
    CONSTANT = 'constant'
    SCHEDULE = 'schedule'


class Corrector(Enum):
    UPPER = 'upper'
    LOWER = 'lower'


@dataclass(frozen=True, eq=False)
class PrimalDualPoint:
    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x', np.asarray(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, 'lam', np.asarray(self.lam, dtype=float).reshape(-1))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.lam.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.lam])

    @classmethod
    def from_stacked(cls, v: np.ndarray, n: int):
        v = np.asarray(v, dtype=float)
        return cls(x=v[:n].copy(), lam=v[n:].copy())

    def __str__(self):
        return f'x: {np.array2string(self.x, precision=4)} lambda: {np.array2string(self.lam, precision=4)}'


def _identity(x: np.ndarray) -> np.ndarray:
    return x


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Convex program min f(x) s.t. phi(x) <= 0, x in X.

    jacobian returns the m x n matrix with rows grad phi_i(x)^T. prox_solver maps
    (lambda, x_anchor, r) to argmin over X of f(x) + lambda^T phi(x) + r/2 |x - x_anchor|^2.
    """
    n: int
    m: int
    objective: Callable[[np.ndarray], float]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    prox_solver: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    project_x: Callable[[np.ndarray], np.ndarray] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    unconstrained_minimizer: Optional[Callable[[], np.ndarray]] = None
    linear: bool = False
    name: str = 'problem'

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterException(name='n', value=self.n, requirement='n >= 1')
        if self.m < 0:
            raise InvalidParameterException(name='m', value=self.m, requirement='m >= 0')
        if self.project_x is None:
            object.__setattr__(self, 'project_x', _identity)

    def check_point(self, w: PrimalDualPoint):
        if w.n != self.n or w.m != self.m:
            raise InvalidInputException(f'point has dimensions ({w.n}, {w.m}), {self.name} expects ({self.n}, {self.m})')

    def __str__(self):
        return f'{self.name} (n={self.n}, m={self.m})'


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """2 x 2 block operator over the (n, m) split of w = (x, lambda)."""
    top_left: np.ndarray
    top_right: np.ndarray
    bottom_left: np.ndarray
    bottom_right: np.ndarray
    symmetric: bool = False

    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        for name in ('top_left', 'top_right', 'bottom_left', 'bottom_right'):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.ndim != 2:
                raise InvalidInputException(f'{name} block must be two dimensional, got shape {value.shape}')
            object.__setattr__(self, name, value)

        n, m = self.top_left.shape[0], self.bottom_right.shape[0]
        expected = {
            'top_left': (n, n),
            'top_right': (n, m),
            'bottom_left': (m, n),
            'bottom_right': (m, m),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise InvalidInputException(f'{name} block has shape {getattr(self, name).shape}, expected {shape}')

        if self.symmetric and not np.array_equal(self.top_right, self.bottom_left.T):
            raise InvalidInputException('symmetric block matrix requires top_right == bottom_left^T')

    @property
    def n(self) -> int:
        return self.top_left.shape[0]

    @property
    def m(self) -> int:
        return self.bottom_right.shape[0]

    @classmethod
    def identity(cls, n: int, m: int):
        return cls(np.eye(n), np.zeros((n, m)), np.zeros((m, n)), np.eye(m), symmetric=True)

    @classmethod
    def from_dense(cls, dense: np.ndarray, n: int, symmetric: bool = False):
        dense = np.asarray(dense, dtype=float)
        return cls(dense[:n, :n], dense[:n, n:], dense[n:, :n], dense[n:, n:], symmetric=symmetric)

    def dense(self) -> np.ndarray:
        return np.block([[self.top_left, self.top_right],
                         [self.bottom_left, self.bottom_right]])

    def transpose(self):
        return BlockMatrix(self.top_left.T, self.bottom_left.T, self.top_right.T, self.bottom_right.T,
                           symmetric=self.symmetric)

    @property
    def T(self):
        return self.transpose()

    def apply(self, x: np.ndarray, lam: np.ndarray):
        return (self.top_left @ x + self.top_right @ lam,
                self.bottom_left @ x + self.bottom_right @ lam)

    def quadratic(self, v: np.ndarray) -> float:
        """v^T B v evaluated blockwise."""
        v = np.asarray(v, dtype=float)
        x, lam = v[:self.n], v[self.n:]
        top, bottom = self.apply(x, lam)
        return float(x @ top + lam @ bottom)

    def _check_compatible(self, other):
        if (self.n, self.m) != (other.n, other.m):
            raise InvalidInputException(f'block split ({self.n}, {self.m}) does not match ({other.n}, {other.m})')

    def __add__(self, other):
        self._check_compatible(other)
        return BlockMatrix(self.top_left + other.top_left,
                           self.top_right + other.top_right,
                           self.bottom_left + other.bottom_left,
                           self.bottom_right + other.bottom_right,
                           symmetric=self.symmetric and other.symmetric)

    def __sub__(self, other):
        self._check_compatible(other)
        return BlockMatrix(self.top_left - other.top_left,
                           self.top_right - other.top_right,
                           self.bottom_left - other.bottom_left,
                           self.bottom_right - other.bottom_right,
                           symmetric=self.symmetric and other.symmetric)

    def __mul__(self, scalar: float):
        return BlockMatrix(scalar * self.top_left,
                           scalar * self.top_right,
                           scalar * self.bottom_left,
                           scalar * self.bottom_right,
                           symmetric=self.symmetric)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, BlockMatrix):
            self._check_compatible(other)
            return BlockMatrix(self.top_left @ other.top_left + self.top_right @ other.bottom_left,
                               self.top_left @ other.top_right + self.top_right @ other.bottom_right,
                               self.bottom_left @ other.top_left + self.bottom_right @ other.bottom_left,
                               self.bottom_left @ other.top_right + self.bottom_right @ other.bottom_right)

        v = np.asarray(other, dtype=float)
        if v.shape != (self.n + self.m,):
            raise InvalidInputException(f'vector of shape {v.shape} cannot multiply ({self.n}, {self.m}) block matrix')
        top, bottom = self.apply(v[:self.n], v[self.n:])
        return np.concatenate([top, bottom])


@dataclass(frozen=True)
class ProxParams:
    r: float
    s: float
    mu1: float = 9.0
    mu2: float = 1.2
    gamma: float = 1.0
    beta: Optional[float] = None

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidParameterException(name='r', value=self.r, requirement='r > 0')
        if not self.s > 0:
            raise InvalidParameterException(name='s', value=self.s, requirement='s > 0')
        if not self.mu1 > 1:
            raise InvalidParameterException(name='mu1', value=self.mu1, requirement='mu1 > 1')
        if not self.mu2 > 1:
            raise InvalidParameterException(name='mu2', value=self.mu2, requirement='mu2 > 1')
        # beta = 0 is the degenerate no-progress step
        if self.beta is not None and self.beta < 0:
            raise InvalidParameterException(name='beta', value=self.beta, requirement='beta >= 0')

    def check_relaxation(self):
        if not 0 < self.gamma < 2:
            raise InvalidParameterException(name='gamma', value=self.gamma, requirement='0 < gamma < 2')

    @property
    def beta_or_gamma(self) -> float:
        return self.beta if self.beta is not None else self.gamma


@dataclass(frozen=True)
class ScheduleParams:
    """Decreasing regularisation r_k = s_k = (horizon - k) sqrt(L C2 + sigma) + L C1 + sigma."""
    L: float
    C1: float
    C2: float
    sigma: float
    horizon: int

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidParameterException(name='L', value=self.L, requirement='L > 0')
        if not self.C1 > 0:
            raise InvalidParameterException(name='C1', value=self.C1, requirement='C1 > 0')
        if self.C2 < 0:
            raise InvalidParameterException(name='C2', value=self.C2, requirement='C2 >= 0')
        if self.sigma < 0:
            raise InvalidParameterException(name='sigma', value=self.sigma, requirement='sigma >= 0')
        if self.horizon < 0:
            raise InvalidParameterException(name='horizon', value=self.horizon, requirement='horizon >= 0')


@dataclass
class IterationRecord:
    k: int
    f_value: float
    error: float
    kkt_residual: float
    params: ProxParams
    sigma_norm_of_step: float
    beta_star: Optional[float] = None
    g_pd: Optional[bool] = None
    clipped: bool = False
    subproblem_time: float = 0.0

    # diagnostics retention
    w: Optional[PrimalDualPoint] = None
    w_tilde: Optional[PrimalDualPoint] = None
    w_unprojected: Optional[PrimalDualPoint] = None
    jacobian: Optional[np.ndarray] = None

    # iterate retention
    x_next: Optional[np.ndarray] = None

    @property
    def r(self) -> float:
        return self.params.r

    @property
    def s(self) -> float:
        return self.params.s

    @property
    def beta_or_gamma(self) -> float:
        return self.params.beta_or_gamma

    @property
    def has_diagnostics(self) -> bool:
        return all(i is not None for i in (self.w, self.w_tilde, self.w_unprojected, self.jacobian))


@dataclass
class IterationTrace:
    method: str
    n: int
    m: int
    records: List[IterationRecord] = field(default_factory=list)
    w_tilde_sum: np.ndarray = None
    predictor_count: int = 0
    converged: bool = False
    elapsed: float = 0.0
    w0: PrimalDualPoint = None
    param_mode: ParamMode = ParamMode.ADAPTIVE
    gamma: float = 1.0
    corrector: Optional[Corrector] = None
    linear: bool = False
    dual_cone: DualCone = DualCone.NONNEGATIVE

    def __post_init__(self):
        if self.w_tilde_sum is None:
            self.w_tilde_sum = np.zeros(self.n + self.m)

    @property
    def x_tilde_sum(self) -> np.ndarray:
        return self.w_tilde_sum[:self.n]

    def add_predictor(self, w_tilde: PrimalDualPoint):
        self.w_tilde_sum = self.w_tilde_sum + w_tilde.stacked()
        self.predictor_count += 1

    def append(self, record: IterationRecord):
        self.records.append(record)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_error(self) -> float:
        return self.records[-1].error if self.records else float('nan')

    @property
    def final_f(self) -> float:
        return self.records[-1].f_value if self.records else float('nan')

    @property
    def max_subproblem_time(self) -> float:
        return max((i.subproblem_time for i in self.records), default=0.0)

    @property
    def clipped(self) -> bool:
        return any(i.clipped for i in self.records)

    def __str__(self):
        state = 'converged' if self.converged else 'not converged'
        return f'{self.method} {self.iterations} iterations, {state}, error {self.final_error:.3e}'
