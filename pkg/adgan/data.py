#!/usr/bin/env python3

"""
adgan.data
----------
Datasets and batches.

* :func:`load_manifest` reads ``path,age,gender,race`` CSV files (MORPH / UTK
  style, or an exported synthetic set), bins ages and checks every row.
* :class:`SyntheticDataset` renders faces lazily; image ``i`` is a pure
  function of ``(seed, i)``.
* :func:`sample_batch` draws content and style samples independently and
  decodes them on a thread pool, keeping results in draw order.
* :func:`export_synthetic` materializes a synthetic set as PNG files plus a
  manifest, to any fsspec URI.

Usage
-----
>>> from adgan.attributes import AttributeSpace
>>> ds = load_manifest("data/morph.csv", AttributeSpace(4, 2, 5), "morph",
...                    resolution=128, require_all_classes=True)
>>> batch = sample_batch(ds, 10, np.random.default_rng(0))
"""
from __future__ import annotations

import csv
import functools
import io
import logging
import posixpath
from collections import Counter
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Set, Tuple

import fsspec
import numpy as np
from tqdm import tqdm

from adgan.attributes import (
    AGE_BINNERS,
    AttributeLabel,
    AttributeSpace,
    flat_index,
    label_from_index,
)
from adgan.errors import DataError, LabelError, ManifestError, MissingClassesError
from adgan.utils.preprocessing import encode_png, load_image
from adgan.utils.synthetic_faces import SyntheticSpec, synth_generate

if TYPE_CHECKING:
    from adgan.config import TrainConfig

LOGGER = logging.getLogger(__name__)

MANIFEST_HEADER = ("path", "age", "gender", "race")


# ───────────────────────────────────────────────────────────────────────────
#  Records and batches
# ───────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ManifestRecord:
    path: str
    age: float
    gender: int
    race: int
    label: AttributeLabel


@dataclass
class Batch:
    """``(X_i, S_i, X_t, S_t)`` for one training step; images ``(N, 3, R, R)``."""

    x_i: np.ndarray
    s_i: List[AttributeLabel]
    x_t: np.ndarray
    s_t: List[AttributeLabel]
    idx_i: List[int] = field(default_factory=list)
    idx_t: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.s_i)

    def t_i(self, space: AttributeSpace) -> np.ndarray:
        return np.array([flat_index(s, space) for s in self.s_i], dtype=np.int64)

    def t_t(self, space: AttributeSpace) -> np.ndarray:
        return np.array([flat_index(s, space) for s in self.s_t], dtype=np.int64)

    def astype(self, dtype) -> "Batch":
        return Batch(self.x_i.astype(dtype), self.s_i, self.x_t.astype(dtype), self.s_t,
                     self.idx_i, self.idx_t)


# ───────────────────────────────────────────────────────────────────────────
#  Datasets
# ───────────────────────────────────────────────────────────────────────────
class Dataset:
    """Indexable collection of labelled images at one resolution."""

    space: AttributeSpace
    resolution: int

    def __len__(self) -> int:
        raise NotImplementedError

    def label(self, i: int) -> AttributeLabel:
        raise NotImplementedError

    def image(self, i: int) -> np.ndarray:
        """``(3, R, R)`` float64 in ``[−1, 1]``; may raise on undecodable data."""
        raise NotImplementedError

    def histogram(self) -> Dict[int, int]:
        """Record count per flat label index (every index present, zeros included)."""
        counts = Counter(flat_index(self.label(i), self.space) for i in range(len(self)))
        return {t: counts.get(t, 0) for t in range(self.space.n)}

    def missing_classes(self) -> List[str]:
        return [str(label_from_index(t, self.space).as_tuple())
                for t, c in self.histogram().items() if c == 0]

    def indices_for(self, label: AttributeLabel) -> List[int]:
        return [i for i in range(len(self)) if self.label(i) == label]


class ManifestDataset(Dataset):
    def __init__(self, records: Sequence[ManifestRecord], space: AttributeSpace, resolution: int):
        self.records = list(records)
        self.space = space.with_resolution(resolution)
        self.resolution = resolution

    def __len__(self) -> int:
        return len(self.records)

    def label(self, i: int) -> AttributeLabel:
        return self.records[i].label

    def image(self, i: int) -> np.ndarray:
        with fsspec.open(self.records[i].path, "rb") as fh:
            return load_image(fh.read(), self.resolution)


class SyntheticDataset(Dataset):
    """
    ``samples_per_label`` faces per label, label-major; face ``i`` is drawn
    with its own generator seeded from ``(seed, i)``.

    Rendered faces are kept in an LRU cache of at most *cache_size* images
    (``None`` keeps every face); an evicted face is re-rendered identically.
    """

    def __init__(self, spec: SyntheticSpec, cache_size: Optional[int] = 2048):
        self.spec = spec
        self.space = spec.space
        self.resolution = spec.resolution
        self._render = functools.lru_cache(maxsize=cache_size)(self._draw)

    def __len__(self) -> int:
        return self.space.n * self.spec.samples_per_label

    def label(self, i: int) -> AttributeLabel:
        if not 0 <= i < len(self):
            raise IndexError(i)
        return label_from_index(i // self.spec.samples_per_label, self.space)

    def _draw(self, i: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.spec.seed, i]))
        return synth_generate(self.label(i), self.spec, rng)

    def image(self, i: int) -> np.ndarray:
        return self._render(i)

    def cache_info(self):
        return self._render.cache_info()


class DatasetView(Dataset):
    """A subset of another dataset, by index."""

    def __init__(self, base: Dataset, indices: Sequence[int]):
        self.base = base
        self.indices = list(indices)
        self.space = base.space
        self.resolution = base.resolution

    def __len__(self) -> int:
        return len(self.indices)

    def label(self, i: int) -> AttributeLabel:
        return self.base.label(self.indices[i])

    def image(self, i: int) -> np.ndarray:
        return self.base.image(self.indices[i])


def split_dataset(dataset: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Seeded split into ``(train, held_out)``.  The split is stratified per label
    so both halves keep every class whenever the class has ≥ 2 records.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    by_label: Dict[int, List[int]] = {}
    for i in range(len(dataset)):
        by_label.setdefault(flat_index(dataset.label(i), dataset.space), []).append(i)
    train: List[int] = []
    held: List[int] = []
    for t in sorted(by_label):
        idx = rng.permutation(by_label[t]).tolist()
        k = len(idx)
        if train_fraction < 1.0 and k >= 2:
            k = min(k - 1, max(1, int(round(train_fraction * k))))
        train.extend(idx[:k])
        held.extend(idx[k:])
    return DatasetView(dataset, sorted(train)), DatasetView(dataset, sorted(held))


# ───────────────────────────────────────────────────────────────────────────
#  Manifest loading
# ───────────────────────────────────────────────────────────────────────────
def _parse_int(value: str, column: str, path: str, line: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ManifestError(path, f"column '{column}' must be an integer, got {value!r}", line) from None


def load_manifest(
    csv_path: str,
    space: AttributeSpace,
    selector: str,
    root: Optional[str] = None,
    resolution: Optional[int] = None,
    require_all_classes: bool = False,
    check_paths: bool = True,
) -> ManifestDataset:
    """
    Parse and validate a manifest.

    Image paths are taken relative to *root* (default: the manifest's own
    directory) unless absolute or URI-qualified.  Ages are binned with the
    *selector*'s binner (``morph``, ``utk``; ``synthetic`` stores the group
    index).  Errors name the file and the offending line.
    """
    if selector not in AGE_BINNERS:
        raise ManifestError(csv_path, f"unknown dataset selector {selector!r}")
    binner = AGE_BINNERS[selector]
    resolution = resolution or space.w

    fs, fs_path = fsspec.core.url_to_fs(str(csv_path))
    if not fs.exists(fs_path):
        raise ManifestError(csv_path, "manifest file not found")
    base = root if root is not None else posixpath.dirname(str(csv_path))

    with fs.open(fs_path, "r", newline="") as fh:
        text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise ManifestError(csv_path, "empty manifest: 0 records")
    if tuple(h.strip().lower() for h in header) != MANIFEST_HEADER:
        raise ManifestError(csv_path, f"header must be {','.join(MANIFEST_HEADER)}, got {','.join(header)}", 1)

    records: List[ManifestRecord] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise ManifestError(csv_path, f"expected {len(MANIFEST_HEADER)} columns, got {len(row)}", line)
        rel, age_s, gender_s, race_s = (c.strip() for c in row)
        try:
            age = float(age_s)
        except ValueError:
            raise ManifestError(csv_path, f"column 'age' must be a number, got {age_s!r}", line) from None
        gender = _parse_int(gender_s, "gender", csv_path, line)
        race = _parse_int(race_s, "race", csv_path, line)
        try:
            label = AttributeLabel(binner(age), gender, race).validate(space)
        except LabelError as exc:
            raise ManifestError(csv_path, str(exc), line) from None

        path = rel if ("://" in rel or posixpath.isabs(rel) or not base) else posixpath.join(base, rel)
        if check_paths:
            img_fs, img_path = fsspec.core.url_to_fs(path)
            if not img_fs.exists(img_path):
                raise ManifestError(csv_path, f"image not found: {path}", line)
        records.append(ManifestRecord(path, age, gender, race, label))

    if not records:
        raise ManifestError(csv_path, "empty manifest: 0 records")

    ds = ManifestDataset(records, space, resolution)
    hist = ds.histogram()
    LOGGER.info("📄  %s: %d records in %d/%d classes", csv_path, len(records),
                sum(1 for c in hist.values() if c), space.n)
    for t, count in hist.items():
        LOGGER.debug("    class %s → %d", label_from_index(t, space).as_tuple(), count)
    if require_all_classes:
        check_all_classes(ds)
    return ds


def check_all_classes(dataset: Dataset) -> None:
    missing = dataset.missing_classes()
    if missing:
        raise MissingClassesError(missing)


# ───────────────────────────────────────────────────────────────────────────
#  Batching
# ───────────────────────────────────────────────────────────────────────────
class BatchSampler:
    """
    Draws batches from one dataset.  Decoding runs on a thread pool; the rng is
    only touched on the calling thread, in slot order.
    """

    def __init__(self, dataset: Dataset, workers: int = 4, max_redraws: int = 100):
        if len(dataset) == 0:
            raise DataError("cannot sample from an empty dataset")
        self.dataset = dataset
        self.workers = max(1, workers)
        self.max_redraws = max_redraws
        self.bad: Set[int] = set()
        self._pool: Optional[Executor] = None

    def __enter__(self) -> "BatchSampler":
        self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="decode")
        return self

    def __exit__(self, *exc) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _decode(self, i: int) -> Optional[np.ndarray]:
        try:
            return self.dataset.image(i)
        except Exception as exc:  # undecodable data must not stop a run
            if i not in self.bad:
                LOGGER.warning("⚠️  skipping undecodable image #%d: %s", i, exc)
            self.bad.add(i)
            return None

    def _decode_many(self, indices: Sequence[int]) -> List[Optional[np.ndarray]]:
        if self._pool is None or len(indices) == 1:
            return [self._decode(i) for i in indices]
        return list(self._pool.map(self._decode, indices))

    def draw(self, n: int, rng: np.random.Generator) -> Tuple[List[int], np.ndarray]:
        idx = [int(i) for i in rng.integers(0, len(self.dataset), size=n)]
        images = self._decode_many(idx)
        redraws = 0
        for slot in range(n):
            while images[slot] is None:
                redraws += 1
                if redraws > self.max_redraws:
                    raise DataError(f"gave up after {self.max_redraws} undecodable images")
                idx[slot] = int(rng.integers(0, len(self.dataset)))
                images[slot] = self._decode(idx[slot])
        return idx, np.stack(images)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if batch_size < 1:
            raise ValueError(f"batch_size must be ≥ 1, got {batch_size}")
        idx_i, x_i = self.draw(batch_size, rng)
        idx_t, x_t = self.draw(batch_size, rng)
        ds = self.dataset
        return Batch(x_i, [ds.label(i) for i in idx_i], x_t, [ds.label(i) for i in idx_t], idx_i, idx_t)


def sample_batch(dataset: Dataset, batch_size: int, rng: np.random.Generator, workers: int = 4) -> Batch:
    """One-off batch; long loops should hold a :class:`BatchSampler` open."""
    with BatchSampler(dataset, workers=workers) as sampler:
        return sampler.sample(batch_size, rng)


# ───────────────────────────────────────────────────────────────────────────
#  Export
# ───────────────────────────────────────────────────────────────────────────
def export_synthetic(dataset: SyntheticDataset, out_uri: str, show_progress: bool = True) -> str:
    """
    Write every face as ``images/<index>.png`` plus ``manifest.csv`` under
    *out_uri* (local path or any fsspec URI).  Returns the manifest URI.
    """
    fs, root = fsspec.core.url_to_fs(out_uri)
    fs.makedirs(posixpath.join(root, "images"), exist_ok=True)
    rows = []
    for i in tqdm(range(len(dataset)), desc="Export", unit="img", disable=not show_progress):
        label = dataset.label(i)
        rel = f"images/{i:06d}.png"
        with fs.open(posixpath.join(root, rel), "wb") as fh:
            fh.write(encode_png(dataset.image(i)))
        rows.append((rel, label.age_group, label.gender, label.race))

    manifest = posixpath.join(root, "manifest.csv")
    with fs.open(manifest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_HEADER)
        w.writerows(rows)
    LOGGER.info("💾  exported %d synthetic faces to %s", len(rows), out_uri)
    return manifest if "://" not in out_uri else f"{out_uri.rstrip('/')}/manifest.csv"


# ───────────────────────────────────────────────────────────────────────────
#  From configuration
# ───────────────────────────────────────────────────────────────────────────
def dataset_from_config(cfg: "TrainConfig") -> Tuple[Dataset, Dataset]:
    """``(train, held_out)`` for a run, split with the run's seed."""
    ds_cfg = cfg.dataset
    space = cfg.attribute_space
    if ds_cfg.selector == "synthetic" and not ds_cfg.manifest:
        spec = SyntheticSpec(cfg.resolution, space.n_a, space.n_g, space.n_c,
                             samples_per_label=ds_cfg.samples_per_label, seed=cfg.seed)
        full: Dataset = SyntheticDataset(spec)
        LOGGER.info("🧪  synthetic dataset: %d faces, %d per label", len(full), ds_cfg.samples_per_label)
    else:
        full = load_manifest(ds_cfg.manifest, space, ds_cfg.selector, root=ds_cfg.root,
                             resolution=cfg.resolution)
    return split_dataset(full, ds_cfg.train_fraction, cfg.seed)
