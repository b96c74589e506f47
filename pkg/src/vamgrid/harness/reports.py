"""JSON and flattened-CSV writers for reports and loss curves."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def flatten(doc, prefix: str = "") -> dict[str, object]:
    """Nested dicts/lists -> {dotted.key: scalar}."""
    out: dict[str, object] = {}
    if isinstance(doc, dict):
        for k in sorted(doc):
            out.update(flatten(doc[k], f"{prefix}{k}."))
    elif isinstance(doc, list) and doc and all(isinstance(x, (dict, list)) for x in doc):
        for i, x in enumerate(doc):
            out.update(flatten(x, f"{prefix}{i}."))
    else:
        out[prefix[:-1]] = json.dumps(doc) if isinstance(doc, list) else doc
    return out


def write_flat_csv(path: Path, doc: dict):
    flat = flatten(doc)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["key", "value"])
        for k, v in flat.items():
            w.writerow([k, v])


def write_table_csv(path: Path, rows: list[dict], columns: list[str]):
    with path.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_report(out_dir: Path, name: str, doc: dict):
    write_json(out_dir / f"{name}.json", doc)
    write_flat_csv(out_dir / f"{name}.csv", doc)


def write_loss_curve(path: Path, curve: list[tuple[int, float]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "loss"])
        for s, v in curve:
            w.writerow([s, repr(v)])
