"""File IO helpers shared by the pipeline commands: JSON/JSONL with stable
formatting, content digests, CSV writing, and run manifests.

All writers produce byte-identical output for identical inputs: keys are
sorted, floats use repr precision, and manifests carry no timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import __version__
from .errors import DataError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def digest_of(obj) -> str:
    """Digest of an object's canonical JSON form."""
    return sha256_bytes(canonical_json(obj).encode("utf-8"))


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read JSON file {path}: {exc}") from exc


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(canonical_json(record))
            handle.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[dict]:
    try:
        handle = Path(path).open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON line: {exc}") from exc


def write_csv(path: str | Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})


def write_csv_raw(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence]
) -> None:
    """CSV writer for headers that may repeat column names (token headers)."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def read_csv(path: str | Path) -> list[dict]:
    try:
        with Path(path).open("r", encoding="utf-8", newline="") as handle:
            return list(csv.DictReader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


class Manifest:
    """Provenance record for one command run: config snapshot, input file
    digests, seeds, and every produced artifact with its content digest."""

    def __init__(self, command: str, config: dict, seeds: Sequence[int] = ()):
        self.doc = {
            "tool": "svagree",
            "version": __version__,
            "command": command,
            "config": config,
            "seeds": list(seeds),
            "inputs": {},
            "outputs": {},
        }

    def add_input(self, path: str | Path) -> None:
        path = Path(path)
        self.doc["inputs"][str(path)] = sha256_file(path)

    def add_output(self, path: str | Path) -> None:
        path = Path(path)
        self.doc["outputs"][str(path)] = sha256_file(path)

    def write(self, path: str | Path) -> None:
        write_json(path, self.doc)
