from dataclasses import asdict, dataclass, is_dataclass
from enum import Enum
import hashlib
import json
import logging
import os
from typing import Union

import numpy as np

from proxframework.model import InvalidInputException
from proxframework.qcqp.instance import LinearInstance, QcqpInstance

logger = logging.getLogger(__name__)

qcqp_fields = ['n', 'm', 'seed', 'A', 'a', 'B', 'b', 'c']
linear_fields = ['n', 'm', 'seed', 'A', 'a', 'C', 'd']


@dataclass
class InstanceParseException(Exception):
    path: str
    location: str
    message: str = None

    def __str__(self):
        return f'Instance Parse Exception: {self.path} ({self.location}) {self.message}'


def instance_to_dict(inst: Union[QcqpInstance, LinearInstance]) -> dict:
    if isinstance(inst, LinearInstance):
        return {
            'kind': inst.kind,
            'n': inst.n,
            'm': inst.m,
            'seed': inst.seed,
            'A': inst.A.tolist(),
            'a': inst.a.tolist(),
            'C': inst.C.tolist(),
            'd': inst.d.tolist()
        }
    return {
        'kind': inst.kind,
        'n': inst.n,
        'm': inst.m,
        'seed': inst.seed,
        'A': inst.A.tolist(),
        'a': inst.a.tolist(),
        'B': inst.B_list.tolist(),
        'b': inst.b_list.tolist(),
        'c': inst.c.tolist()
    }


def instance_from_dict(data: dict, path: str = '<memory>') -> Union[QcqpInstance, LinearInstance]:
    if not isinstance(data, dict):
        raise InstanceParseException(path=path, location='document', message='expected a JSON object')

    kind = data.get('kind', 'qcqp')
    if kind not in ('qcqp', 'linear'):
        raise InstanceParseException(path=path, location='field "kind"', message=f'unknown instance kind {kind}')

    for name in (linear_fields if kind == 'linear' else qcqp_fields):
        if name not in data:
            raise InstanceParseException(path=path, location=f'field "{name}"', message='missing field')

    n, m = data['n'], data['m']
    try:
        if kind == 'linear':
            inst = LinearInstance(A=np.array(data['A'], dtype=float).reshape(n, n),
                                  a=np.array(data['a'], dtype=float).reshape(n),
                                  C=np.array(data['C'], dtype=float).reshape(m, n),
                                  d=np.array(data['d'], dtype=float).reshape(m),
                                  seed=data['seed'])
        else:
            inst = QcqpInstance(A=np.array(data['A'], dtype=float).reshape(n, n),
                                a=np.array(data['a'], dtype=float).reshape(n),
                                B_list=np.array(data['B'], dtype=float).reshape(m, n, n),
                                b_list=np.array(data['b'], dtype=float).reshape(m, n),
                                c=np.array(data['c'], dtype=float).reshape(m),
                                seed=data['seed'])
    except (ValueError, TypeError, InvalidInputException) as e:
        raise InstanceParseException(path=path, location='arrays', message=f'inconsistent with n={n}, m={m}: {e}')

    return inst


def save_instance(inst: Union[QcqpInstance, LinearInstance], path: str) -> str:
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)

    with open(path, 'w') as fileobj:
        json.dump(instance_to_dict(inst), fileobj)
    logger.debug(f'saved {inst} to {path}')
    return path


def load_instance(path: str) -> Union[QcqpInstance, LinearInstance]:
    with open(path) as fileobj:
        text = fileobj.read()

    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceParseException(path=path, location=f'line {e.lineno} column {e.colno}', message=e.msg)

    return instance_from_dict(data, path=path)


def _encode(value):
    if is_dataclass(value) and not isinstance(value, type):
        return _encode(asdict(value))
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(i) for i in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def export_report(report, path: str) -> str:
    """Dataclass report (contraction, monotone, gap series) as JSON."""
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)

    payload = _encode(report)
    if hasattr(report, 'passed'):
        payload = {'passed': report.passed, **payload}

    with open(path, 'w') as fileobj:
        json.dump(payload, fileobj, indent=2)
    logger.info(f'wrote report to {path}')
    return path


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(_encode(config), sort_keys=True).encode('utf-8')).hexdigest()


def write_manifest(config: dict, artifacts: list, path: str) -> str:
    manifest = {
        'config': _encode(config),
        'config_sha256': config_hash(config),
        'artifacts': sorted(artifacts)
    }
    with open(path, 'w') as fileobj:
        json.dump(manifest, fileobj, indent=2, sort_keys=True)
    logger.info(f'wrote manifest for {len(artifacts)} artifacts to {path}')
    return path
