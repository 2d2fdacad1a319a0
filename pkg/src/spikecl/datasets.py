"""Dataset loading and the domain-incremental task stream.

Images live in the IDX format (the MNIST container: big-endian magic,
dimension sizes, then raw bytes), optionally gzip-compressed. A task splits
the class set into pairs presented sequentially; every task maps its two
classes onto the same two output heads, so later tasks overwrite earlier
ones unless the learning rule protects old knowledge.

When no real dataset is available, `make_synthetic_digits` builds a
deterministic 10-class surrogate with MNIST-like shape and statistics; see
`resolve_dataset` in the experiment module for the selection logic.
"""

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .errors import ConfigError, DataError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049

# Class-pair orderings for the five-task split benchmark.
ORDERINGS = {
    "order1": ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9)),
    "order2": ((0, 1), (3, 2), (5, 4), (6, 7), (9, 8)),
    "order3": ((4, 0), (6, 8), (7, 3), (9, 2), (1, 5)),
    "order4": ((0, 5), (1, 7), (4, 6), (8, 9), (3, 2)),
    "order5": ((0, 5), (1, 8), (3, 2), (6, 4), (9, 7)),
}


@dataclass
class Dataset:
    """Images with labels. Intensities are float32 in [0, 1]."""

    images: np.ndarray  # (N, H, W)
    labels: np.ndarray  # (N,)

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DataError(f"images must be (N, H, W), got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise DataError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        lo, hi = float(self.images.min(initial=0.0)), float(self.images.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise DataError(f"intensities outside [0, 1]: range [{lo}, {hi}]")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.images.shape[1] * self.images.shape[2]


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, n: int, path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DataError(f"{path}: truncated file while reading {what} ({len(data)} of {n} bytes)")
    return data


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label file pair (plain or gzipped).

    Raises DataError on a bad magic number, truncation, or an image/label
    count mismatch. Pixel bytes are scaled by 1/255 into [0, 1].
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    for p in (images_path, labels_path):
        if not p.exists():
            raise DataError(f"dataset file not found: {p}")

    with _open_maybe_gzip(images_path) as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path, "header"))
        if magic != IDX_IMAGES_MAGIC:
            raise DataError(f"{images_path}: bad magic {magic}, expected {IDX_IMAGES_MAGIC} (IDX images)")
        raw = _read_exact(fh, n * rows * cols, images_path, f"{n} images")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)

    with _open_maybe_gzip(labels_path) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, labels_path, "header"))
        if magic != IDX_LABELS_MAGIC:
            raise DataError(f"{labels_path}: bad magic {magic}, expected {IDX_LABELS_MAGIC} (IDX labels)")
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path, f"{n_labels} labels"), dtype=np.uint8)

    if n != n_labels:
        raise DataError(f"{images_path}: {n} images but {labels_path}: {n_labels} labels")
    return Dataset(images=(images.astype(np.float32) / 255.0), labels=labels.astype(np.int64))


def write_idx(images_path, labels_path, images_u8: np.ndarray, labels: np.ndarray):
    """Write an IDX image/label pair; gzip when the filename ends in .gz."""
    images_u8 = np.ascontiguousarray(images_u8, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if images_u8.ndim != 3 or labels.shape != (images_u8.shape[0],):
        raise ValueError("need (N, H, W) uint8 images and matching (N,) labels")
    n, rows, cols = images_u8.shape

    def _opener(path):
        return gzip.open(path, "wb") if str(path).endswith(".gz") else open(path, "wb")

    with _opener(images_path) as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images_u8.tobytes())
    with _opener(labels_path) as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(labels.tobytes())


@dataclass
class Task:
    """One stage of the task stream.

    The head mapping sends original class labels to output channels 0..k-1;
    all tasks share the same output head, which is what makes the benchmark
    domain-incremental.
    """

    index: int
    classes: tuple
    head_map: dict
    train_indices: np.ndarray
    test_indices: np.ndarray
    full_train_count: int  # before any subsetting; drives reduced-data scaling


@dataclass
class TaskSequence:
    """A sequence of tasks over a train/test dataset pair."""

    tasks: list
    train: Dataset
    test: Dataset
    ordering: tuple

    def __len__(self) -> int:
        return len(self.tasks)

    @property
    def n_outputs(self) -> int:
        return len(self.tasks[0].classes)


def resolve_ordering(ordering) -> tuple:
    """Normalize an ordering: a preset name or explicit class pairs."""
    if isinstance(ordering, str):
        if ordering not in ORDERINGS:
            raise ConfigError(f"unknown ordering {ordering!r}; presets: {sorted(ORDERINGS)}")
        return ORDERINGS[ordering]
    pairs = tuple(tuple(int(c) for c in pair) for pair in ordering)
    sizes = {len(p) for p in pairs}
    if len(sizes) != 1:
        raise ConfigError(f"all tasks must have the same class count, got sizes {sorted(sizes)}")
    flat = [c for pair in pairs for c in pair]
    if len(set(flat)) != len(flat):
        raise ConfigError(f"a class appears in more than one task: {pairs}")
    return pairs


def build_split_tasks(train: Dataset, test: Dataset, ordering="order1", seed: int = 0) -> TaskSequence:
    """Build the task stream: per task, the indices of its classes.

    Train indices are shuffled per task under the seed's shuffle stream;
    test indices stay in dataset order. Every requested class must exist in
    both splits.
    """
    pairs = resolve_ordering(ordering)
    tasks = []
    for k, classes in enumerate(pairs):
        train_idx = np.flatnonzero(np.isin(train.labels, classes))
        test_idx = np.flatnonzero(np.isin(test.labels, classes))
        for c in classes:
            if not (train.labels == c).any():
                raise DataError(f"class {c} missing from the training split")
            if not (test.labels == c).any():
                raise DataError(f"class {c} missing from the test split")
        rng = seeding.stream_rng(seed, seeding.SHUFFLE, k, 0)
        train_idx = train_idx[rng.permutation(train_idx.size)]
        head_map = {c: i for i, c in enumerate(classes)}
        tasks.append(Task(index=k, classes=classes, head_map=head_map,
                          train_indices=train_idx, test_indices=test_idx,
                          full_train_count=int(train_idx.size)))
    return TaskSequence(tasks=tasks, train=train, test=test, ordering=pairs)


def reduced_subset(seq: TaskSequence, samples_per_task: int, seed: int = 0) -> TaskSequence:
    """Restrict each task's training set to a class-balanced subsample.

    Splits the budget across the task's classes proportionally to their
    availability (largest remainder), samples without replacement, and
    reshuffles. `full_train_count` keeps the original size so the slow
    learning dynamics can be rescaled to the reduced data volume. Test
    indices are untouched.
    """
    if samples_per_task <= 0:
        raise ConfigError("samples_per_task must be positive")
    new_tasks = []
    for task in seq.tasks:
        if samples_per_task > task.train_indices.size:
            raise ConfigError(
                f"task {task.index}: requested {samples_per_task} samples, have {task.train_indices.size}"
            )
        labels = seq.train.labels[task.train_indices]
        counts = np.array([(labels == c).sum() for c in task.classes], dtype=np.int64)
        quota = samples_per_task * counts / counts.sum()
        take = np.floor(quota).astype(np.int64)
        remainder = quota - take
        short = samples_per_task - int(take.sum())
        for i in np.argsort(-remainder)[:short]:
            take[i] += 1
        rng = seeding.stream_rng(seed, seeding.SUBSET, task.index)
        chosen = []
        for c, n_take in zip(task.classes, take):
            pool = task.train_indices[labels == c]
            chosen.append(rng.choice(pool, size=int(n_take), replace=False))
        merged = np.concatenate(chosen)
        merged = merged[rng.permutation(merged.size)]
        new_tasks.append(Task(index=task.index, classes=task.classes, head_map=task.head_map,
                              train_indices=merged, test_indices=task.test_indices,
                              full_train_count=task.full_train_count))
    return TaskSequence(tasks=new_tasks, train=seq.train, test=seq.test, ordering=seq.ordering)


def make_synthetic_digits(train_per_class: int, test_per_class: int, seed: int = 7,
                          size: int = 28, n_classes: int = 10):
    """Deterministic 10-class image surrogate with MNIST-like format.

    Each class is a fixed constellation of Gaussian blobs: two blobs at
    class-private positions plus one at a stroke position its class family
    shares, the way handwritten digits mix distinctive and common strokes.
    Private positions sit on a seeded grid so no two classes' private blobs
    overlap; they make classes separable and let different tasks recruit
    different hidden units. The family positions are reused by classes that
    land in different tasks of the standard orderings and on alternating
    sides of their task's pair, so a stroke that discriminates within one
    task is re-driven by a later task that needs the opposite answer from
    it, which is the interference regime the task stream probes. Samples
    jitter the constellation's position, brightness, and blob placement,
    and add pixel noise.

    Returns:
        (train, test) Dataset pair.
    """
    pool = seeding.stream_rng(seed, seeding.SYNTH_DATA, n_classes + 1, 0)
    grid = np.linspace(4.0, size - 4.0, 5)
    cells = np.array([(y, x) for y in grid for x in grid])
    if 2 * n_classes + 5 > len(cells):
        raise ValueError(f"grid supports at most {(len(cells) - 5) // 2} classes")
    cells += pool.uniform(-0.5, 0.5, cells.shape)
    # family strokes sit on the four corner cells and the center cell, the
    # most spread-out placement the grid offers; private blobs draw from
    # the remaining cells, keeping at least one grid pitch of separation
    # between any two blobs
    fam_idx = np.array([0, 4, 20, 24, 12])
    shared = cells[fam_idx]
    priv_pool = np.delete(cells, fam_idx, axis=0)
    cell_order = pool.permutation(len(priv_pool))
    # Family position per class. Under the pair orderings each reused
    # position hosts classes from different tasks, a position's second
    # claimant needs the opposite answer from the first (and no task has
    # two such contested claims), and a position already contested twice
    # is only revisited by a class whose answer matches its current state.
    family = (0, 1, 2, 0, 1, 3, 1, 0, 4, 2)
    proto = []
    for c in range(n_classes):
        rng = seeding.stream_rng(seed, seeding.SYNTH_DATA, c, 0)
        centers = np.vstack([
            shared[family[c % len(family)]],
            priv_pool[cell_order[2 * c:2 * c + 2]],
        ])
        # The family stroke is the brightest and widest blob, so training
        # latches onto it first and the readout depends on it; the private
        # blobs are dim but sufficient to carry a class when its family
        # stroke is already spoken for. The family stroke is drawn from a
        # tight band so every class loads its shared position with nearly
        # the same drive.
        sigmas = np.concatenate([rng.uniform(2.05, 2.15, 1), rng.uniform(1.2, 1.7, 2)])
        amps = np.concatenate([rng.uniform(0.93, 0.97, 1), rng.uniform(0.55, 0.8, 2)])
        proto.append((centers, sigmas, amps))

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    def _render(c: int, n: int, stream: int) -> np.ndarray:
        centers, sigmas, amps = proto[c]
        rng = seeding.stream_rng(seed, seeding.SYNTH_DATA, c, stream)
        shift = rng.uniform(-2.0, 2.0, (n, 2))
        jitter = rng.uniform(-0.8, 0.8, (n, len(sigmas), 2))
        bright = rng.uniform(0.75, 1.05, n)
        img = np.zeros((n, size, size))
        for b in range(len(sigmas)):
            cy = centers[b, 0] + shift[:, 0] + jitter[:, b, 0]
            cx = centers[b, 1] + shift[:, 1] + jitter[:, b, 1]
            d2 = (yy[None] - cy[:, None, None]) ** 2 + (xx[None] - cx[:, None, None]) ** 2
            img += amps[b] * np.exp(-d2 / (2.0 * sigmas[b] ** 2))
        img *= bright[:, None, None]
        img += rng.uniform(0.0, 0.08, (n, size, size))
        np.clip(img, 0.0, 1.0, out=img)
        return np.round(img * 255.0).astype(np.uint8)

    def _build(per_class: int, stream: int) -> Dataset:
        images = np.concatenate([_render(c, per_class, stream) for c in range(n_classes)])
        labels = np.repeat(np.arange(n_classes, dtype=np.int64), per_class)
        rng = seeding.stream_rng(seed, seeding.SYNTH_DATA, n_classes, stream)
        order = rng.permutation(images.shape[0])
        return Dataset(images=images[order].astype(np.float32) / 255.0, labels=labels[order])

    return _build(train_per_class, 1), _build(test_per_class, 2)


def ensure_synthetic_idx(root, train_per_class: int, test_per_class: int, seed: int = 7) -> dict:
    """Materialize the synthetic surrogate as gzipped IDX files under `root`.

    Idempotent: existing files are kept. Returns the four file paths keyed
    like the conventional MNIST names.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "train_images": root / "train-images-idx3-ubyte.gz",
        "train_labels": root / "train-labels-idx1-ubyte.gz",
        "test_images": root / "t10k-images-idx3-ubyte.gz",
        "test_labels": root / "t10k-labels-idx1-ubyte.gz",
    }
    if not all(p.exists() for p in paths.values()):
        train, test = make_synthetic_digits(train_per_class, test_per_class, seed)
        write_idx(paths["train_images"], paths["train_labels"],
                  np.round(train.images * 255.0).astype(np.uint8), train.labels)
        write_idx(paths["test_images"], paths["test_labels"],
                  np.round(test.images * 255.0).astype(np.uint8), test.labels)
    return paths
