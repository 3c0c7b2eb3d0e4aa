import io
import csv
from typing import Any, Dict, List


def format_cell(value):
    """CSV text of a cell: floats at 17 significant digits, `None` as empty."""
    if value is None:
        return ''
    if isinstance(value, float):
        return f'{value:.17g}'
    return str(value)


class Table:
    """Column container for convergence traces.

    >>> table = Table({'iter': [0, 1], 'residual': [1.5, 0.25], 'dist_u': [None, 0.5]})
    >>> table['residual']
    [1.5, 0.25]
    >>> table[1]
    {'iter': 1, 'residual': 0.25, 'dist_u': 0.5}
    >>> print(table.to_text(), end='')
    iter,residual,dist_u
    0,1.5,
    1,0.25,0.5

    >>> table.draw().splitlines()[0].split()
    ['iter', 'residual', 'dist_u']
    """

    MAX_COL_WIDTH = 24

    def __init__(self, data: Dict[str, List[Any]]) -> None:
        if not isinstance(data, dict):
            raise ValueError('the `data` must be a dict of columns.')
        lengths = [len(col) for col in data.values()]
        if len(set(lengths)) > 1:
            raise ValueError(
                f'All table columns must have the same lengths. Column lengths: {lengths}')
        self.cols = {c: list(col) for c, col in data.items()}

    @property
    def columns(self):
        return list(self.cols)

    def row_at(self, index):
        return {name: col[index] for name, col in self.cols.items()}

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.cols[key]
        if isinstance(key, int):
            return self.row_at(key)
        raise ValueError('Invalid key. It should be `str` for a column or `int` for a row.')

    def __len__(self):
        if not self.cols:
            return 0
        return len(next(iter(self.cols.values())))

    def __iter__(self):
        for idx in range(len(self)):
            yield self.row_at(idx)

    def draw(self, n_rows=5):
        """Fixed-width text preview of the first `n_rows` rows, floats in %.4g."""
        def cell(value):
            return f'{value:.4g}' if isinstance(value, float) else str(value)

        widths = {c: min(max([len(c), *(len(cell(v)) for v in col[:n_rows])]) + 3,
                         self.MAX_COL_WIDTH)
                  for c, col in self.cols.items()}
        lines = [''.join(c.ljust(widths[c]) for c in self.cols), '=' * sum(widths.values())]
        for i, row in enumerate(self):
            if i >= n_rows:
                break
            lines.append(''.join(cell(row[c])[:widths[c] - 1].ljust(widths[c]) for c in self.cols))
        return '\n'.join(line.rstrip() for line in lines)

    def __repr__(self) -> str:
        return self.draw()

    def write(self, stream, sep=',', header=True):
        writer = csv.writer(stream, delimiter=sep, lineterminator='\n')
        if header:
            writer.writerow(self.cols.keys())
        for row in self:
            writer.writerow([format_cell(v) for v in row.values()])

    def to_text(self, sep=',', header=True):
        buffer = io.StringIO()
        self.write(buffer, sep=sep, header=header)
        return buffer.getvalue()

    @staticmethod
    def from_csv(path, sep=',', missing_value=None, transform=None):
        """Reads a csv file with a header row; empty cells become `missing_value`,
        others go through `transform` (a callable applied to every cell)."""
        transform = transform or str
        with open(path, mode='r', newline='') as csv_file:
            rows = list(csv.reader(csv_file, delimiter=sep))
        if not rows:
            raise ValueError(f'{path} is empty')
        header, body = rows[0], rows[1:]
        cols = {c: [] for c in header}
        for number, row in enumerate(body, start=2):
            if len(row) != len(header):
                raise ValueError(f'line {number}: expected {len(header)} cells, got {len(row)}')
            for c, v in zip(header, row):
                cols[c].append(transform(v) if v != '' else missing_value)
        return Table(cols)


if __name__ == '__main__':

    import doctest
    doctest.testmod()
