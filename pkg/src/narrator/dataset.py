"""Corpus ingest and access.

A corpus is described by a JSON manifest (pairs of image paths plus their
reference captions) and imported into an on-disk store laid out as
``store/<pair_id>/{before.png, after.png, meta.json}``. After import the
store is read-only; sampling and loading are deterministic.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path

from .imaging import DecodeError, Raster, decode_file, encode_png

SPLITS = ("train", "val", "test")


class ManifestParseError(Exception):
    """The manifest is malformed or violates its invariants."""


class MissingImage(Exception):
    """A manifest entry references an image file that does not exist."""


class DimensionMismatch(Exception):
    """Before/after images of one pair differ in size."""


class InsufficientPairs(Exception):
    """A sample was requested that exceeds the split population."""


class UnknownPairId(Exception):
    """The requested pair id is not in the store."""


@dataclass(frozen=True)
class ManifestEntry:
    pair_id: str
    path_before: str
    path_after: str
    captions: tuple[str, ...]
    split: str


@dataclass(frozen=True)
class BiTemporalPair:
    """One before/after image pair plus its reference captions."""

    pair_id: str
    image_before: Raster
    image_after: Raster
    references: tuple[str, ...]
    split: str


@dataclass(frozen=True)
class StoreEntry:
    pair_id: str
    split: str
    captions: tuple[str, ...]


@dataclass
class DatasetStore:
    """Read-only view over an imported corpus."""

    root: Path | None
    entries: dict[str, StoreEntry]

    @classmethod
    def open(cls, root: str | Path) -> "DatasetStore":
        root = Path(root)
        entries: dict[str, StoreEntry] = {}
        for meta_path in sorted(root.glob("*/meta.json")):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            entry = StoreEntry(meta["pair_id"], meta["split"], tuple(meta["captions"]))
            entries[entry.pair_id] = entry
        return cls(root=root, entries=entries)

    @classmethod
    def from_index(cls, entries: list[StoreEntry]) -> "DatasetStore":
        """Index-only store (no image payloads); supports sampling only."""
        return cls(root=None, entries={e.pair_id: e for e in entries})

    def pair_ids(self, split: str | None = None) -> list[str]:
        ids = [
            pid
            for pid, entry in self.entries.items()
            if split is None or entry.split == split
        ]
        return sorted(ids)

    def __len__(self) -> int:
        return len(self.entries)


def parse_manifest(manifest_path: str | Path) -> list[ManifestEntry]:
    path = Path(manifest_path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("entries"), list):
        raise ManifestParseError(f"{path}: expected an object with an 'entries' list")

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for i, raw in enumerate(document["entries"]):
        where = f"{path}: entries[{i}]"
        try:
            entry = ManifestEntry(
                pair_id=str(raw["pair_id"]),
                path_before=str(raw["path_before"]),
                path_after=str(raw["path_after"]),
                captions=tuple(str(c) for c in raw["captions"]),
                split=str(raw["split"]),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestParseError(f"{where}: missing or malformed field ({exc})") from exc
        if entry.split not in SPLITS:
            raise ManifestParseError(f"{where}: split {entry.split!r} not one of {SPLITS}")
        if entry.pair_id in seen:
            raise ManifestParseError(f"{where}: duplicate pair_id {entry.pair_id!r}")
        if not entry.captions or any(not c.strip() for c in entry.captions):
            raise ManifestParseError(f"{where}: captions must be non-empty after trimming")
        seen.add(entry.pair_id)
        entries.append(entry)
    return entries


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def import_corpus(
    manifest_path: str | Path, images_root: str | Path, store_root: str | Path
) -> DatasetStore:
    """Validate the manifest, decode every image pair, and write the store.

    Every stored pair satisfies the pair invariants (equal sizes, non-empty
    captions, unique ids); the store pair count equals the manifest count.
    """
    entries = parse_manifest(manifest_path)
    images_root = Path(images_root)
    store_root = Path(store_root)
    store_root.mkdir(parents=True, exist_ok=True)

    for entry in entries:
        source_before = images_root / entry.path_before
        source_after = images_root / entry.path_after
        for source in (source_before, source_after):
            if not source.is_file():
                raise MissingImage(f"{entry.pair_id}: {source} does not exist")
        before = decode_file(source_before)
        after = decode_file(source_after)
        if (before.width, before.height) != (after.width, after.height):
            raise DimensionMismatch(
                f"{entry.pair_id}: before is {before.width}x{before.height}, "
                f"after is {after.width}x{after.height}"
            )
        pair_dir = store_root / entry.pair_id
        pair_dir.mkdir(parents=True, exist_ok=True)
        (pair_dir / "before.png").write_bytes(encode_png(before))
        (pair_dir / "after.png").write_bytes(encode_png(after))
        _write_json(
            pair_dir / "meta.json",
            {"pair_id": entry.pair_id, "split": entry.split, "captions": list(entry.captions)},
        )
    return DatasetStore.open(store_root)


def load_pair(store: DatasetStore, pair_id: str) -> BiTemporalPair:
    entry = store.entries.get(pair_id)
    if entry is None:
        raise UnknownPairId(pair_id)
    if store.root is None:
        raise UnknownPairId(f"{pair_id}: index-only store has no image payloads")
    pair_dir = store.root / pair_id
    before = decode_file(pair_dir / "before.png")
    after = decode_file(pair_dir / "after.png")
    if (before.width, before.height) != (after.width, after.height):
        raise DimensionMismatch(pair_id)
    return BiTemporalPair(
        pair_id=pair_id,
        image_before=before,
        image_after=after,
        references=entry.captions,
        split=entry.split,
    )


def sample_pairs(store: DatasetStore, n: int, seed: int, split: str | None = None) -> list[str]:
    """Draw n distinct pair ids uniformly without replacement.

    Ids are sorted lexicographically before the seeded draw, so the result
    depends only on store content, n, seed, and split.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    pool = store.pair_ids(split)
    if n > len(pool):
        raise InsufficientPairs(f"requested {n} pairs from a population of {len(pool)}")
    rng = random.Random(seed)
    for i in range(n):
        j = rng.randrange(i, len(pool))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:n]


def store_digest(store: DatasetStore) -> str:
    """Digest over the full store file tree, for idempotence checks."""
    if store.root is None:
        raise ValueError("index-only store has no files to digest")
    digest = hashlib.sha256()
    for path in sorted(store.root.rglob("*")):
        if path.is_file():
            digest.update(path.relative_to(store.root).as_posix().encode("utf-8"))
            digest.update(path.read_bytes())
    return digest.hexdigest()


def levircc_to_manifest(captions_json_path: str | Path, out_manifest_path: str | Path) -> int:
    """Convert an upstream caption file into this tool's manifest schema.

    Expects the common captioning layout: a top-level ``images`` list whose
    items carry ``filename``, ``split``, and ``sentences`` (each with a
    ``raw`` string); before/after images live under ``<split>/A/<filename>``
    and ``<split>/B/<filename>`` relative to the images root. Returns the
    number of entries written.
    """
    document = json.loads(Path(captions_json_path).read_text(encoding="utf-8"))
    images = document.get("images")
    if not isinstance(images, list):
        raise ManifestParseError(f"{captions_json_path}: expected a top-level 'images' list")
    entries = []
    for item in images:
        filename = item["filename"]
        split = item["split"]
        if split not in SPLITS:
            raise ManifestParseError(f"{captions_json_path}: unknown split {split!r}")
        captions = [s["raw"].strip() for s in item["sentences"]]
        entries.append(
            {
                "pair_id": Path(filename).stem,
                "path_before": f"{split}/A/{filename}",
                "path_after": f"{split}/B/{filename}",
                "captions": captions,
                "split": split,
            }
        )
    Path(out_manifest_path).write_text(
        json.dumps({"entries": entries}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return len(entries)
