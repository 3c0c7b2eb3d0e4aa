"""Path helpers for experiment artifacts, focused on method-chaining.

Writes go to a temporary sibling first and are renamed into place, so a
reader never sees a half-written report.

>>> import tempfile
>>> root = Path(tempfile.mkdtemp())
>>> f = FilePath(root / 'runs' / 'report.json').mkdir()
>>> f.dump_json({'pass': True}).load_json()
{'pass': True}
>>> f.name
'report.json'
>>> sorted(p.name for p in (root / 'runs').glob('*'))
['report.json']
"""

import os
import json
import pathlib
import tempfile
from typing import Dict, List, Union

from .table import Table


__all__ = ['Path', 'FilePath']


class Path(str):
    """String-like path with path-related methods, focused on method-chaining.
    Methods return the path-itself when there is no other explicit return value.
    Internally, a `pathlib.Path` is used to invoke most of the operations.
    """

    def __new__(cls, *args, **kwargs):
        # explicitly only pass value to the str constructor
        path = pathlib.Path(*args)
        return super(Path, cls).__new__(cls, path)

    def __init__(self, *args, **kwargs):
        # ... and don't even call the str initializer
        self._path = pathlib.Path(*args)

    @property
    def name(self):
        """The final path component"""
        return self.__class__(self._path.name)

    @property
    def parent(self):
        """The logical parent of the path"""
        return Path(self._path.parent)

    def __truediv__(self, other):
        return Path(self._path / other)

    def is_file(self):
        return self._path.is_file()

    def mkdir(self, mode=0o777, parents=True, exist_ok=True):
        """
        Create a new directory at this given path.
        """
        self._path.mkdir(mode, parents, exist_ok)
        return self

    def glob(self, pattern):
        return [Path(p) for p in sorted(self._path.glob(pattern))]


class FilePath(Path):
    """Handles atomic file read/write operations for run artifacts."""

    def mkdir(self, mode=0o777, parents=True, exist_ok=True):
        """Make parent directory for the file path.
        """
        Path(self.parent).mkdir(mode=mode, parents=parents, exist_ok=exist_ok)
        return self

    def read_text(self, encoding='utf-8'):
        return self._path.read_text(encoding)

    def _atomic_write(self, write):
        """Calls `write(file)` on a temp file in the same dir, then renames it over self."""
        fd, tmp = tempfile.mkstemp(dir=str(self.parent), prefix=f'.{self._path.name}.', suffix='.tmp')
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
                write(f)
            os.replace(tmp, self)
        except BaseException:
            if Path(tmp).is_file():
                os.unlink(tmp)
            raise
        return self

    def write_text(self, data):
        """Atomically replace the file content with `data`."""
        return self._atomic_write(lambda f: f.write(data))

    def dump_json(self, obj, **kwargs):
        kwargs.setdefault('indent', 2)
        kwargs.setdefault('sort_keys', False)
        return self._atomic_write(lambda f: (json.dump(obj, f, **kwargs), f.write('\n')))

    def load_json(self, **kwargs):
        with open(self, 'r', encoding='utf-8') as f:
            return json.load(f, **kwargs)

    def read_csv(self, sep=',', missing_value=None, transform=None) -> Table:
        """Read path as csv file (header row first) into a `lowrank.table.Table`."""
        return Table.from_csv(self, sep=sep, missing_value=missing_value, transform=transform)

    def write_csv(self, table: Union[Table, Dict[str, List]], sep=','):
        """Atomically write a table (or a dict of columns) as csv and return the path."""
        if not isinstance(table, Table):
            table = Table(table)
        return self._atomic_write(lambda f: table.write(f, sep=sep))


if __name__ == '__main__':

    import doctest
    doctest.testmod()
