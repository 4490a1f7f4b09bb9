import numpy as np
import pytest

from proxframework.qcqp.instance import QcqpInstance, LinearInstance, generate_instance, generate_linear_instance
from proxframework.qcqp.oracle import oracle_solve


def circle_instance(a=(3.0, 1.0), c=1.0) -> QcqpInstance:
    """min |x - a|^2 s.t. |x|^2 <= c"""
    return QcqpInstance(A=np.eye(2), a=np.array(a), B_list=np.eye(2)[None], b_list=np.zeros((1, 2)),
                        c=np.array([c]), seed=None)


@pytest.fixture
def circle():
    return circle_instance()


@pytest.fixture
def interior_circle():
    return circle_instance(a=(0.1, 0.1))


@pytest.fixture
def tiny_instances():
    return [generate_instance(m=1 + seed % 2, n=3, seed=seed) for seed in range(10)]


@pytest.fixture
def tiny_solved(tiny_instances):
    return [(inst, oracle_solve(inst)) for inst in tiny_instances[:4]]


@pytest.fixture
def linear_instances():
    return [generate_linear_instance(m=3, n=5, seed=seed) for seed in range(5)]


@pytest.fixture
def small_linear():
    return LinearInstance(A=np.eye(2), a=np.array([3.0, 1.0]), C=np.array([[1.0, 1.0]]), d=np.array([1.0]))
