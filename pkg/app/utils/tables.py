import csv
from pathlib import Path
from typing import Iterable, Sequence


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """Writes dict rows under a fixed header; floats use repr for exact round-trips."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as f:
        return list(csv.DictReader(f))


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)
