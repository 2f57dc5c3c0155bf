"""CSV / JSON writers with a reproducible header.

Every artifact carries the config hash and seed.  The generation timestamp
sits alone on the first line of the file, so two runs of the same manifest
differ only in that line.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from pathlib import Path


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def csv_text(header, rows, config_hash: str, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# generated_at={_timestamp()}\n")
    buf.write(f"# config_sha256={config_hash} seed={seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def json_text(payload, config_hash: str, seed) -> str:
    body = json.dumps({"config_sha256": config_hash, "seed": seed, "data": payload},
                      indent=2, sort_keys=True, default=str)
    # timestamp isolated on the first line inside the object
    return "{\n  " + json.dumps("generated_at") + ": " + json.dumps(_timestamp()) + ",\n" + body[2:] + "\n"


def jsonl_text(lines: str, config_hash: str, seed) -> str:
    head = json.dumps({"generated_at": _timestamp()}) + "\n"
    meta = json.dumps({"config_sha256": config_hash, "seed": seed}, sort_keys=True) + "\n"
    return head + meta + lines


def write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def strip_timestamp(text: str) -> str:
    """Drop the single line carrying the timestamp (for reproducibility checks)."""
    return "".join(line for line in text.splitlines(keepends=True) if "generated_at" not in line)
