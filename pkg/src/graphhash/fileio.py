"""Atomic file writing, delimited output, and run manifests.

Every artifact is written to a temporary file in the destination directory
and renamed into place, so outputs are either fully written or absent.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError


@contextmanager
def atomic_open(path: str | Path, mode: str = "w"):
    """Open a temporary file that is renamed to ``path`` on clean exit."""
    path = Path(path)
    if "r" in mode or "a" in mode:
        raise ValueError("atomic_open only supports write modes")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def fmt(value) -> str:
    """Render a cell for delimited output; floats use shortest 10-digit form."""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def write_tsv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with atomic_open(path, "w") as out:
        out.write("\t".join(header) + "\n")
        for row in rows:
            out.write("\t".join(fmt(v) for v in row) + "\n")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with atomic_open(path, "w") as out:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(fmt(v) for v in row) + "\n")


def write_manifest(path: str | Path, payload: dict) -> None:
    """Persist the resolved run configuration as deterministic JSON."""
    with atomic_open(path, "w") as out:
        out.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blanks are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values
