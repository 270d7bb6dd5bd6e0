"""Small shared helpers: exact retention arithmetic and atomic file output."""

from __future__ import annotations

import hashlib
import os
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path


def exact_ceil_mul(x: float | int | str, n: int) -> int:
    """ceil(x * n) computed exactly.

    Floats go through their shortest decimal repr so that e.g.
    exact_ceil_mul(0.95, 100) == 95 and never 96 from binary rounding.
    """
    frac = Fraction(str(x)) * n
    return -((-frac.numerator) // frac.denominator)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@contextmanager
def atomic_output(path: str | Path, encoding: str = "utf-8"):
    """Write to a sibling temp file, rename into place on success.

    On any error the partial temp file is removed and nothing is left at
    the target path.
    """
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    fh = open(tmp, "w", encoding=encoding, newline="\n")
    try:
        yield fh
    except BaseException:
        fh.close()
        tmp.unlink(missing_ok=True)
        raise
    else:
        fh.close()
        os.replace(tmp, path)
