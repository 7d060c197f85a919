"""CSV manifests with the binary rating rule (mean rating <= 5 is low quality)."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from alamp.errors import MissingLabelInfo, NotFound, ParseError

LOW, HIGH = "low", "high"
RATING_THRESHOLD = 5.0
_LABEL_ALIASES = {"low": LOW, "0": LOW, "high": HIGH, "1": HIGH}


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    mean_rating: float | None
    label: str

    @property
    def positive(self) -> bool:
        return self.label == HIGH


def label_from_rating(rating: float) -> str:
    return LOW if rating <= RATING_THRESHOLD else HIGH


def load_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    """Read ``path,mean_rating[,label]`` rows; relative image paths resolve
    against the manifest's directory. An explicit label wins over the rating."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise NotFound(f"no such manifest: {path}")
    root = os.path.dirname(os.path.abspath(path))
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty manifest")
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["path", "mean_rating"] or header[2:] not in ([], ["label"]):
        raise ParseError(f"{path}: header must be path,mean_rating[,label], got {rows[0]}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) > len(header):
            raise ParseError(f"{path}:{lineno}: too many fields (paths with commas are not allowed)")
        row = row + [""] * (len(header) - len(row))
        img = row[0].strip()
        if not img:
            raise ParseError(f"{path}:{lineno}: empty image path")
        if "," in img:
            raise ParseError(f"{path}:{lineno}: paths with commas are not allowed")
        rating_s = row[1].strip()
        label_s = row[2].strip().lower() if len(row) > 2 else ""
        rating = None
        if rating_s:
            try:
                rating = float(rating_s)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad mean_rating {rating_s!r}") from exc
        if label_s:
            if label_s not in _LABEL_ALIASES:
                raise ParseError(f"{path}:{lineno}: bad label {row[2]!r}")
            label = _LABEL_ALIASES[label_s]
        elif rating is not None:
            label = label_from_rating(rating)
        else:
            raise MissingLabelInfo(f"{path}:{lineno}: row has neither mean_rating nor label")
        full = img if os.path.isabs(img) else os.path.join(root, img)
        entries.append(ManifestEntry(full, rating, label))
    return entries


def write_manifest(path: str | os.PathLike, rows) -> None:
    """Write ``(path, mean_rating, label)`` tuples; ``None`` leaves a cell empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "mean_rating", "label"])
        for p, rating, label in rows:
            w.writerow([p, "" if rating is None else rating, label or ""])
