"""Decorators shared by the solvers and the experiment harness.

>>> @returns('Q', 'R')
... def split(x):
...     return x, -x
>>> split(2)
split_output(Q=2, R=-2)

>>> @returns_time(milis=True)
... def idle():
...     return 'done'
>>> idle().output
'done'

>>> summarize(np.zeros((3, 2)))
'ndarray(3x2)'
"""

import logging
import functools
import dataclasses
from typing import Mapping
from collections import namedtuple
from datetime import datetime

import numpy as np


__all__ = ['returns', 'returns_time', 'logs', 'summarize']


def returns(*field_names, type_name=None, **name2description):
    """Wraps the function output in a namedtuple and documents its fields."""
    def decorator(f):
        output_type_name = type_name or f.__name__ + '_output'
        output_field_names = field_names + tuple(name2description.keys())
        FuncOutput = namedtuple(output_type_name, output_field_names)

        doc = f.__doc__ + '\n' if f.__doc__ else ''
        doc += 'Returns:\n'
        for name in field_names:
            doc += f'\t{name}\n'
        for name in name2description:
            doc += f'\t{name}: {name2description[name]}\n'
        f.__doc__ = doc

        @functools.wraps(f)
        def wrapper(*args, **kw):
            output = f(*args, **kw)
            if isinstance(output, Mapping) and set(output.keys()) == set(output_field_names):
                return FuncOutput(**output)
            elif isinstance(output, tuple):
                return FuncOutput(*output)
            else:
                return FuncOutput(output)

        wrapper.output_type = FuncOutput
        return wrapper
    return decorator


def summarize(value):
    """Short description of an argument or result, safe for large matrices."""
    if isinstance(value, np.ndarray):
        return f'ndarray({"x".join(map(str, value.shape))})'
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return type(value).__name__
    if isinstance(value, tuple) and hasattr(value, '_fields'):
        inner = ', '.join(f'{k}={summarize(v)}' for k, v in zip(value._fields, value))
        return f'{type(value).__name__}({inner})'
    if isinstance(value, (list, tuple)) and len(value) > 8:
        return f'{type(value).__name__}[{len(value)}]'
    return repr(value)


def repr_signature(*args, **kwargs):
    args_repr = [summarize(a) for a in args]
    kwargs_repr = [f'{k}={summarize(v)}' for k, v in kwargs.items()]
    return ', '.join(args_repr + kwargs_repr)


def logs(logger=None, before=logging.DEBUG, after=logging.DEBUG, exception=logging.ERROR):
    """Logs calls, results (summarized) and exceptions of the decorated function.

    Args:
        logger (str or logging.Logger, optional): Target logger. Defaults to the
            logger named after the function's module.
    """
    def decorator(f):
        if isinstance(logger, logging.Logger):
            mylogger = logger
        else:
            mylogger = logging.getLogger(logger or f.__module__)

        @functools.wraps(f)
        def wrapper(*args, **kw):
            t_before = datetime.now()
            if before:
                mylogger.log(
                    before, f'`{f.__name__}` called with args: ({repr_signature(*args, **kw)})')
            try:
                result = f(*args, **kw)
            except Exception as e:
                if exception:
                    t_exception = datetime.now()
                    mylogger.log(
                        exception, f'{e!r} raised in `{f.__name__}` after {t_exception - t_before}')
                raise
            if after:
                t_after = datetime.now()
                mylogger.log(
                    after, f'`{f.__name__}` returned after {t_after - t_before}: {summarize(result)}')
            return result
        return wrapper
    return decorator


def returns_time(milis=False, seconds=False):    # defaults to timedelta format
    """Returns `(output, time)` where time is the wall time of the call."""

    def decorator(f):
        FuncOutput = namedtuple(f.__name__ + '_output', ('output', 'time'))

        @functools.wraps(f)
        def wrapper(*args, **kw):
            t_before = datetime.now()
            result = f(*args, **kw)
            t_delta = datetime.now() - t_before
            if seconds:
                t_delta = t_delta.total_seconds()
            elif milis:
                t_delta = t_delta.total_seconds() * 1000.0

            return FuncOutput(result, t_delta)

        return wrapper
    return decorator


if __name__ == '__main__':

    import doctest
    doctest.testmod()
