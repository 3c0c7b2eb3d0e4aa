"""Miscellaneous helpers: logging setup, seeded generators and timing.

>>> rng = make_rng(7)
>>> float(rng.standard_normal()) == float(make_rng(7).standard_normal())
True

>>> make_rng(7, name='mt19937')
Traceback (most recent call last):
...
lowrank.errors.ConfigInvalid: invalid configuration
  rng: unknown generator 'mt19937', expected one of ['philox-v1']
"""

import os
import sys
import time
import logging

import numpy as np

from .errors import ConfigInvalid

__all__ = ['setup_logger', 'make_rng', 'default_seed', 'Stopwatch',
           'RNG_NAME', 'SEED_ENV_VAR']


RNG_NAME = 'philox-v1'
SEED_ENV_VAR = 'LOWRANK_SEED'

# versioned name -> bit generator; a new version gets a new name
_BIT_GENERATORS = {
    'philox-v1': np.random.Philox,
}

_HANDLER_TAG = '_lowrank_handler'


def setup_logger(name='lowrank', level=logging.INFO, log_file=None, mode='a'):
    """Initiates the package logger with a general log format and an optional file handler.

    Calling it again only updates the level; handlers are attached once.

    Args:
        name (str, optional): Name of the logger. Defaults to 'lowrank'.
        level (int or str, optional): Logging level. Defaults to INFO.
        log_file (str, optional): Path to the log file. Defaults to None.
        mode (str, optional): Log file mode. Defaults to 'a'.

    Returns:
        logging.Logger: The logger object
    """
    formatter = logging.Formatter(fmt='[{asctime}][{name}][{levelname}] - {message}',
                                  datefmt='%Y-%m-%d %H:%M:%S', style='{')
    logger = logging.getLogger(name)
    logger.setLevel(level)
    tagged = [h for h in logger.handlers if getattr(h, _HANDLER_TAG, False)]
    if tagged:
        return logger

    screen_handler = logging.StreamHandler(stream=sys.stderr)
    handlers = [screen_handler]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode=mode))
    for handler in handlers:
        handler.setFormatter(formatter)
        setattr(handler, _HANDLER_TAG, True)
        logger.addHandler(handler)
    return logger


def make_rng(seed, name=RNG_NAME):
    """Returns a `numpy.random.Generator` over the named counter-based bit generator.

    All stochastic code takes an explicit seed and goes through here.
    """
    if name not in _BIT_GENERATORS:
        raise ConfigInvalid(
            {'rng': f'unknown generator {name!r}, expected one of {sorted(_BIT_GENERATORS)}'})
    return np.random.Generator(_BIT_GENERATORS[name](int(seed)))


def default_seed(fallback=0):
    """Seed from the `LOWRANK_SEED` environment variable, or `fallback`."""
    value = os.environ.get(SEED_ENV_VAR)
    if value is None or not value.strip():
        return fallback
    try:
        return int(value)
    except ValueError:
        raise ConfigInvalid({'seed': f'{SEED_ENV_VAR}={value!r} is not an integer'})


class Stopwatch:
    """Milliseconds elapsed since construction (monotonic clock)."""

    def __init__(self):
        self.start = time.perf_counter()

    @property
    def elapsed_ms(self):
        return (time.perf_counter() - self.start) * 1000.0


if __name__ == '__main__':

    import doctest
    doctest.testmod()
