"""Strict UTF-8 CSV reading and byte-deterministic writing."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EncodingError, UnreadableFile

csv.field_size_limit(2**31 - 1)


def read_rows(path: Path) -> list[list[str]]:
    """All non-blank records of a CSV file, header included."""
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise UnreadableFile(str(exc), path=path) from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"not valid UTF-8 ({exc.reason} at byte {exc.start})", path=path) from exc
    if text.startswith("﻿"):
        text = text[1:]
    try:
        return [r for r in csv.reader(io.StringIO(text, newline=""), strict=True) if r]
    except csv.Error as exc:
        raise UnreadableFile(f"malformed CSV: {exc}", path=path) from exc


def dump_rows(header: Sequence[str], rows: Iterable[Sequence[str]]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    write_bytes_atomic(path, dump_rows(header, rows))


def write_bytes_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
