"""IDX container, task-stream construction, subsetting, and the surrogate data."""

import gzip
import struct

import numpy as np
import pytest

from spikecl import datasets
from spikecl.errors import ConfigError, DataError


def _tiny_dataset(n_per_class=8, n_classes=10, size=6, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.random((n_per_class * n_classes, size, size)).astype(np.float32)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    order = rng.permutation(labels.size)
    return datasets.Dataset(images=images[order], labels=labels[order])


class TestDataset:
    def test_rejects_wrong_rank(self):
        with pytest.raises(DataError, match="N, H, W"):
            datasets.Dataset(images=np.zeros((4, 9)), labels=np.zeros(4, dtype=np.int64))

    def test_rejects_count_mismatch(self):
        with pytest.raises(DataError, match="labels"):
            datasets.Dataset(images=np.zeros((4, 3, 3)), labels=np.zeros(5, dtype=np.int64))

    def test_rejects_out_of_range_intensity(self):
        bad = np.full((2, 3, 3), 1.5, dtype=np.float32)
        with pytest.raises(DataError, match="outside"):
            datasets.Dataset(images=bad, labels=np.zeros(2, dtype=np.int64))

    def test_len_and_n_pixels(self):
        ds = _tiny_dataset(size=7)
        assert len(ds) == 80
        assert ds.n_pixels == 49


class TestIdxRoundTrip:
    @pytest.mark.parametrize("suffix", ["", ".gz"])
    def test_round_trip(self, tmp_path, suffix):
        rng = np.random.default_rng(3)
        images = rng.integers(0, 256, (17, 5, 4), dtype=np.uint8)
        labels = rng.integers(0, 10, 17, dtype=np.uint8)
        ip = tmp_path / f"imgs{suffix}"
        lp = tmp_path / f"labs{suffix}"
        datasets.write_idx(ip, lp, images, labels)
        ds = datasets.load_idx(ip, lp)
        assert ds.images.shape == (17, 5, 4)
        assert np.array_equal(np.round(ds.images * 255.0).astype(np.uint8), images)
        assert np.array_equal(ds.labels, labels.astype(np.int64))

    def test_gzip_detected_by_content_not_name(self, tmp_path):
        # A gzipped file without the .gz suffix still loads.
        images = np.zeros((2, 3, 3), dtype=np.uint8)
        labels = np.zeros(2, dtype=np.uint8)
        datasets.write_idx(tmp_path / "i.gz", tmp_path / "l.gz", images, labels)
        (tmp_path / "i.gz").rename(tmp_path / "i")
        (tmp_path / "l.gz").rename(tmp_path / "l")
        ds = datasets.load_idx(tmp_path / "i", tmp_path / "l")
        assert len(ds) == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            datasets.load_idx(tmp_path / "nope", tmp_path / "nope2")

    def test_bad_images_magic(self, tmp_path):
        ip, lp = tmp_path / "i", tmp_path / "l"
        ip.write_bytes(struct.pack(">IIII", 1234, 1, 2, 2) + bytes(4))
        lp.write_bytes(struct.pack(">II", datasets.IDX_LABELS_MAGIC, 1) + bytes(1))
        with pytest.raises(DataError, match="bad magic"):
            datasets.load_idx(ip, lp)

    def test_bad_labels_magic(self, tmp_path):
        ip, lp = tmp_path / "i", tmp_path / "l"
        ip.write_bytes(struct.pack(">IIII", datasets.IDX_IMAGES_MAGIC, 1, 2, 2) + bytes(4))
        lp.write_bytes(struct.pack(">II", 9999, 1) + bytes(1))
        with pytest.raises(DataError, match="bad magic"):
            datasets.load_idx(ip, lp)

    def test_truncated_images(self, tmp_path):
        ip, lp = tmp_path / "i", tmp_path / "l"
        ip.write_bytes(struct.pack(">IIII", datasets.IDX_IMAGES_MAGIC, 3, 2, 2) + bytes(5))
        lp.write_bytes(struct.pack(">II", datasets.IDX_LABELS_MAGIC, 3) + bytes(3))
        with pytest.raises(DataError, match="truncated"):
            datasets.load_idx(ip, lp)

    def test_truncated_header(self, tmp_path):
        ip, lp = tmp_path / "i", tmp_path / "l"
        ip.write_bytes(b"\x00\x00")
        lp.write_bytes(bytes(9))
        with pytest.raises(DataError, match="truncated"):
            datasets.load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, lp = tmp_path / "i", tmp_path / "l"
        ip.write_bytes(struct.pack(">IIII", datasets.IDX_IMAGES_MAGIC, 2, 2, 2) + bytes(8))
        lp.write_bytes(struct.pack(">II", datasets.IDX_LABELS_MAGIC, 3) + bytes(3))
        with pytest.raises(DataError, match="images but"):
            datasets.load_idx(ip, lp)

    def test_write_idx_validates_shapes(self, tmp_path):
        with pytest.raises(ValueError):
            datasets.write_idx(tmp_path / "i", tmp_path / "l",
                               np.zeros((2, 3, 3), dtype=np.uint8),
                               np.zeros(3, dtype=np.uint8))


class TestOrderings:
    def test_preset_order1(self):
        assert datasets.resolve_ordering("order1") == ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9))

    def test_all_presets_partition_ten_classes(self):
        for name, pairs in datasets.ORDERINGS.items():
            flat = sorted(c for p in pairs for c in p)
            assert flat == list(range(10)), name

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown ordering"):
            datasets.resolve_ordering("order9")

    def test_explicit_pairs_pass_through(self):
        assert datasets.resolve_ordering([(3, 1), (0, 2)]) == ((3, 1), (0, 2))

    def test_duplicate_class_rejected(self):
        with pytest.raises(ConfigError, match="more than one task"):
            datasets.resolve_ordering([(0, 1), (1, 2)])

    def test_uneven_task_sizes_rejected(self):
        with pytest.raises(ConfigError, match="same class count"):
            datasets.resolve_ordering([(0, 1), (2, 3, 4)])


class TestBuildSplitTasks:
    def test_basic_structure(self):
        train, test = _tiny_dataset(seed=1), _tiny_dataset(seed=2)
        seq = datasets.build_split_tasks(train, test, "order1", seed=5)
        assert len(seq) == 5
        assert seq.n_outputs == 2
        for k, task in enumerate(seq.tasks):
            assert task.index == k
            assert task.classes == datasets.ORDERINGS["order1"][k]
            assert task.head_map == {task.classes[0]: 0, task.classes[1]: 1}
            assert task.full_train_count == task.train_indices.size == 16
            assert set(train.labels[task.train_indices]) == set(task.classes)
            assert set(test.labels[task.test_indices]) == set(task.classes)

    def test_train_indices_shuffled_deterministically(self):
        train, test = _tiny_dataset(seed=1), _tiny_dataset(seed=2)
        a = datasets.build_split_tasks(train, test, "order1", seed=5)
        b = datasets.build_split_tasks(train, test, "order1", seed=5)
        c = datasets.build_split_tasks(train, test, "order1", seed=6)
        assert all(np.array_equal(x.train_indices, y.train_indices)
                   for x, y in zip(a.tasks, b.tasks))
        assert any(not np.array_equal(x.train_indices, y.train_indices)
                   for x, y in zip(a.tasks, c.tasks))

    def test_test_indices_in_dataset_order(self):
        train, test = _tiny_dataset(seed=1), _tiny_dataset(seed=2)
        seq = datasets.build_split_tasks(train, test, "order1", seed=5)
        for task in seq.tasks:
            assert np.all(np.diff(task.test_indices) > 0)

    def test_missing_class_raises(self):
        train = _tiny_dataset(n_classes=8, seed=1)  # classes 0..7 only
        test = _tiny_dataset(n_classes=10, seed=2)
        with pytest.raises(DataError, match="class 8 missing"):
            datasets.build_split_tasks(train, test, "order1")


class TestReducedSubset:
    def _seq(self):
        return datasets.build_split_tasks(_tiny_dataset(n_per_class=30, seed=1),
                                          _tiny_dataset(seed=2), "order1", seed=5)

    def test_balanced_counts(self):
        seq = datasets.reduced_subset(self._seq(), 20, seed=5)
        for task in seq.tasks:
            labels = seq.train.labels[task.train_indices]
            assert task.train_indices.size == 20
            assert [(labels == c).sum() for c in task.classes] == [10, 10]
            assert task.full_train_count == 60  # original size survives

    def test_odd_budget_split_by_largest_remainder(self):
        seq = datasets.reduced_subset(self._seq(), 19, seed=5)
        labels = seq.train.labels[seq.tasks[0].train_indices]
        counts = sorted((labels == c).sum() for c in seq.tasks[0].classes)
        assert counts == [9, 10]

    def test_no_replacement(self):
        seq = datasets.reduced_subset(self._seq(), 45, seed=5)
        for task in seq.tasks:
            assert np.unique(task.train_indices).size == task.train_indices.size

    def test_deterministic(self):
        a = datasets.reduced_subset(self._seq(), 20, seed=5)
        b = datasets.reduced_subset(self._seq(), 20, seed=5)
        assert all(np.array_equal(x.train_indices, y.train_indices)
                   for x, y in zip(a.tasks, b.tasks))

    def test_over_budget_rejected(self):
        with pytest.raises(ConfigError, match="requested"):
            datasets.reduced_subset(self._seq(), 61, seed=5)

    def test_non_positive_budget_rejected(self):
        with pytest.raises(ConfigError, match="positive"):
            datasets.reduced_subset(self._seq(), 0)


class TestSyntheticDigits:
    def test_shapes_and_determinism(self):
        a_train, a_test = datasets.make_synthetic_digits(12, 5, seed=7)
        b_train, _ = datasets.make_synthetic_digits(12, 5, seed=7)
        assert a_train.images.shape == (120, 28, 28)
        assert a_test.images.shape == (50, 28, 28)
        assert np.array_equal(a_train.images, b_train.images)
        assert np.array_equal(a_train.labels, b_train.labels)

    def test_seed_changes_content(self):
        a, _ = datasets.make_synthetic_digits(6, 2, seed=7)
        b, _ = datasets.make_synthetic_digits(6, 2, seed=8)
        assert not np.array_equal(a.images, b.images)

    def test_all_classes_present_in_both_splits(self):
        train, test = datasets.make_synthetic_digits(6, 3, seed=7)
        assert set(train.labels) == set(range(10))
        assert set(test.labels) == set(range(10))

    def test_train_and_test_differ(self):
        train, test = datasets.make_synthetic_digits(5, 5, seed=7)
        assert not np.array_equal(train.images[:50], test.images)

    def test_task_pairs_are_separable_by_template(self):
        # Nearest class-mean classification restricted to each task's pair
        # should be nearly perfect; tasks are easy in isolation, and the
        # difficulty of the stream comes from interference between them.
        train, test = datasets.make_synthetic_digits(40, 15, seed=7)
        means = np.stack([train.images[train.labels == c].mean(axis=0).ravel()
                          for c in range(10)])
        x = test.images.reshape(len(test), -1)
        d = ((x[:, None, :] - means[None]) ** 2).sum(axis=2)
        for pair in datasets.ORDERINGS["order1"]:
            mask = np.isin(test.labels, pair)
            sub = d[mask][:, list(pair)]
            pred = np.array(pair)[sub.argmin(axis=1)]
            assert (pred == test.labels[mask]).mean() > 0.9, pair

    def test_ensure_synthetic_idx_round_trip(self, tmp_path):
        paths = datasets.ensure_synthetic_idx(tmp_path, 4, 2, seed=7)
        assert all(p.exists() for p in paths.values())
        ds = datasets.load_idx(paths["train_images"], paths["train_labels"])
        direct, _ = datasets.make_synthetic_digits(4, 2, seed=7)
        assert np.allclose(ds.images, direct.images, atol=1e-6)
        assert np.array_equal(ds.labels, direct.labels)

    def test_ensure_synthetic_idx_idempotent(self, tmp_path):
        paths = datasets.ensure_synthetic_idx(tmp_path, 4, 2, seed=7)
        stamp = paths["train_images"].stat().st_mtime_ns
        datasets.ensure_synthetic_idx(tmp_path, 4, 2, seed=7)
        assert paths["train_images"].stat().st_mtime_ns == stamp
