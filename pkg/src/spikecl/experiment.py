"""Experiment driver: sequential task training, evaluation, and reporting.

A run presents the task stream in order, trains single-epoch (by default)
on each task, and after every task evaluates the model on every task's test
split, filling one column of the accuracy matrix. Results, checkpoints, and
probes are persisted incrementally, so an interrupted run resumes at the
last completed task and reproduces the uninterrupted run exactly (all
randomness is drawn from streams keyed by task/epoch/position, never from
a shared sequential generator).

Directory layout of a run:

    <output_dir>/<run_name>/
        config.yaml             resolved configuration
        record.json             status, log, timings
        progress.npz            accuracy matrix, baseline, activity probes
        checkpoints/task_K.npz  full model after task K
        accuracy_matrix.csv     R with the untrained baseline column
        metrics.json            derived metrics (complete runs)
        curves.csv              long-form accuracy trajectories
        weight_change.csv       mean |dW| per block and task
        similarity.csv          representation cosine similarities
"""

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import backend, seeding
from .config import (ExperimentConfig, block_plasticity, config_hash, dump_yaml,
                     network_config, resolve_mode)
from .datasets import (Dataset, TaskSequence, build_split_tasks, ensure_synthetic_idx,
                       load_idx, reduced_subset)
from .encoding import encode_label_sample, encode_sample
from .errors import ConfigError, DataError
from .metrics import (AccuracyMatrix, backward_transfer, forward_transfer, ledger_for,
                      mean_accuracy, mean_weight_change, memory_overhead,
                      representation_similarity)
from .network import (build_network, end_of_sample, load_checkpoint, reset_transients,
                      run_sample, save_checkpoint)
from .plasticity import scale_for_reduced_data

logger = logging.getLogger("spikecl")

IDX_NAMES = {
    "train_images": ("train-images-idx3-ubyte.gz", "train-images-idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte.gz", "train-labels-idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte.gz", "t10k-images-idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte.gz", "t10k-labels-idx1-ubyte"),
}


@dataclass
class RunRecord:
    """Everything a finished (or partial) run produced."""

    run_dir: Path
    config: ExperimentConfig
    config_hash: str
    status: str  # running | partial | complete | failed
    matrix: AccuracyMatrix
    activities: dict  # tag -> {class -> mean hidden spike-count vector}
    task_log: list
    weight_rows: list
    backend_used: str
    data_note: str

    @property
    def n_tasks(self) -> int:
        return self.matrix.n_tasks


def resolve_dataset(cfg: ExperimentConfig):
    """Locate the IDX dataset or fall back to the synthetic surrogate.

    Returns (train, test, note). The note records what was actually loaded;
    it is persisted with the run so reports state their data provenance.
    """
    import os

    ds = cfg.dataset
    root = Path(ds.root) if ds.root else Path(os.environ.get("SPIKECL_DATA_ROOT", "data"))

    def _find(key):
        for name in IDX_NAMES[key]:
            p = root / name
            if p.exists():
                return p
        return None

    paths = {k: _find(k) for k in IDX_NAMES}
    have_all = all(p is not None for p in paths.values())

    if ds.name == "idx" and not have_all:
        missing = [k for k, p in paths.items() if p is None]
        raise DataError(f"dataset.name=idx but files missing under {root}: {missing}")

    if ds.name in ("idx", "auto") and have_all:
        train = load_idx(paths["train_images"], paths["train_labels"])
        test = load_idx(paths["test_images"], paths["test_labels"])
        return train, test, f"idx files under {root}"

    synth_root = root / "synthetic"
    sp = ensure_synthetic_idx(synth_root, ds.synthetic_train_per_class,
                              ds.synthetic_test_per_class, ds.synthetic_seed)
    train = load_idx(sp["train_images"], sp["train_labels"])
    test = load_idx(sp["test_images"], sp["test_labels"])
    note = (f"synthetic surrogate under {synth_root} "
            f"({ds.synthetic_train_per_class}/{ds.synthetic_test_per_class} per class, seed {ds.synthetic_seed})")
    if ds.name == "auto":
        logger.warning("no IDX dataset under %s; using the %s", root, note)
    return train, test, note


def build_tasks(cfg: ExperimentConfig, train: Dataset, test: Dataset) -> TaskSequence:
    ordering = cfg.tasks.pairs if cfg.tasks.pairs is not None else cfg.tasks.ordering
    seq = build_split_tasks(train, test, ordering, cfg.seed)
    if cfg.tasks.samples_per_task is not None:
        seq = reduced_subset(seq, cfg.tasks.samples_per_task, cfg.seed)
    return seq


def effective_plasticity(cfg: ExperimentConfig, seq: TaskSequence):
    """Per-block plasticity, rescaled when training on reduced data.

    The scale is the ratio of total available to total presented training
    samples (class counts differ slightly per task, so the global ratio is
    used for all of them).
    """
    n_blocks = len(cfg.model.hidden) + 1
    params = [block_plasticity(cfg, l, n_blocks) for l in range(n_blocks)]
    if cfg.tasks.samples_per_task is None:
        return params
    full = sum(t.full_train_count for t in seq.tasks)
    actual = sum(t.train_indices.size for t in seq.tasks)
    return [scale_for_reduced_data(p, full, actual) for p in params]


def evaluate_model(model, seq: TaskSequence, cfg: ExperimentConfig):
    """Accuracy per task plus per-class mean hidden activity.

    Evaluation is frozen and repeatable: no learning, transients reset per
    sample, and encoding noise drawn from eval streams keyed only by
    (task, position) under `eval_seed`, so every checkpoint of every run
    sees identical evaluation spike trains.
    """
    enc = cfg.encoder
    n_steps = enc.steps_per_sample
    limit = cfg.tasks.test_samples_per_task
    n_hidden = model.layer_sizes[1]
    act_sum: dict = {}
    act_n: dict = {}
    accs = np.zeros(len(seq))
    out_counts = np.zeros(model.n_outputs, dtype=np.int64)
    hidden_counts = np.zeros(n_hidden, dtype=np.int64)

    for task in seq.tasks:
        indices = task.test_indices if limit is None else task.test_indices[:limit]
        correct = 0
        for pos, ds_idx in enumerate(indices):
            rng = seeding.stream_rng(cfg.eval_seed, seeding.EVAL_ENCODING, task.index, pos)
            raster = encode_sample(seq.test.images[ds_idx], enc, n_steps, rng)
            reset_transients(model)
            out_counts[:] = 0
            hidden_counts[:] = 0
            run_sample(model, raster, None, learning=False,
                       out_counts=out_counts, hidden_counts=hidden_counts)
            label = int(seq.test.labels[ds_idx])
            if int(np.argmax(out_counts)) == task.head_map[label]:
                correct += 1
            if label not in act_sum:
                act_sum[label] = np.zeros(n_hidden)
                act_n[label] = 0
            act_sum[label] += hidden_counts
            act_n[label] += 1
        accs[task.index] = correct / len(indices)
    reset_transients(model)
    activity = {c: act_sum[c] / act_n[c] for c in act_sum}
    return accs, activity


def run_experiment(cfg: ExperimentConfig, resume: bool = False,
                   stop_after_task: int | None = None) -> RunRecord:
    """Execute one run of the task stream; see the module docstring.

    Args:
        cfg: Experiment configuration (mode not yet resolved is fine).
        resume: Continue from the run directory's last checkpoint. The stored
            config hash must match; a completed run is returned as-is.
        stop_after_task: Stop after this many tasks (1-based) and mark the
            run "partial"; used to exercise resume behavior.

    Returns:
        The RunRecord, persisted under its run directory.
    """
    cfg = resolve_mode(cfg)
    backend.set_backend(cfg.backend)
    used_backend = backend.active_backend()
    chash = config_hash(cfg)

    train, test, data_note = resolve_dataset(cfg)
    seq = build_tasks(cfg, train, test)
    n_tasks = len(seq)
    ncfg = network_config(cfg, train.n_pixels, seq.n_outputs,
                          plasticity_override=effective_plasticity(cfg, seq))

    run_dir = Path(cfg.output_dir) / (cfg.run_name or default_run_name(cfg))
    ckpt_dir = run_dir / "checkpoints"

    start_task = 0
    matrix = AccuracyMatrix(n_tasks)
    activities: dict = {}
    task_log: list = []
    weight_rows: list = []

    if resume and (run_dir / "progress.npz").exists():
        prior = load_run_record(run_dir)
        if prior.config_hash != chash:
            raise ConfigError(
                f"cannot resume: stored config hash {prior.config_hash} != current {chash}"
            )
        if prior.status == "complete":
            logger.info("run %s already complete", run_dir)
            return prior
        matrix, activities = prior.matrix, prior.activities
        task_log, weight_rows = prior.task_log, prior.weight_rows
        start_task = matrix.filled_through()
        model = load_checkpoint(ckpt_dir / f"task_{start_task}.npz") if start_task else None
        logger.info("resuming %s at task %d", run_dir, start_task + 1)
    elif (run_dir / "progress.npz").exists():
        raise ConfigError(f"{run_dir} already holds a run; pass resume or choose another name")
    else:
        model = None

    run_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir.mkdir(exist_ok=True)
    (run_dir / "config.yaml").write_text(dump_yaml(cfg))

    if model is None:
        model = build_network(ncfg)
        t0 = time.perf_counter()
        base_accs, base_act = evaluate_model(model, seq, cfg)
        matrix.set_baseline(base_accs)
        activities["baseline"] = base_act
        logger.info("untrained baseline: %s (%.1fs)",
                    np.array2string(base_accs, precision=3), time.perf_counter() - t0)

    record = RunRecord(run_dir=run_dir, config=cfg, config_hash=chash, status="running",
                       matrix=matrix, activities=activities, task_log=task_log,
                       weight_rows=weight_rows, backend_used=used_backend, data_note=data_note)
    _persist(record)

    enc = cfg.encoder
    n_steps = enc.steps_per_sample
    n_out = seq.n_outputs
    try:
        for k in range(start_task, n_tasks):
            if stop_after_task is not None and k >= stop_after_task:
                break
            task = seq.tasks[k]
            w_before = [blk.w.copy() for blk in model.blocks]
            t0 = time.perf_counter()
            presented = 0
            for epoch in range(cfg.tasks.epochs):
                if epoch == 0:
                    order = task.train_indices
                else:
                    rng = seeding.stream_rng(cfg.seed, seeding.SHUFFLE, k, epoch)
                    order = task.train_indices[rng.permutation(task.train_indices.size)]
                for pos, ds_idx in enumerate(order):
                    target = task.head_map[int(seq.train.labels[ds_idx])]
                    raster = encode_sample(
                        seq.train.images[ds_idx], enc, n_steps,
                        seeding.stream_rng(cfg.seed, seeding.INPUT_ENCODING, k, epoch, pos))
                    label_raster = encode_label_sample(
                        target, n_out, enc, n_steps,
                        seeding.stream_rng(cfg.seed, seeding.LABEL_ENCODING, k, epoch, pos))
                    run_sample(model, raster, label_raster, learning=True)
                    end_of_sample(model, enc.sample_duration)
                    presented += 1
            train_s = time.perf_counter() - t0

            t0 = time.perf_counter()
            accs, act = evaluate_model(model, seq, cfg)
            matrix.set_column(k + 1, accs)
            activities[f"after_{k + 1}"] = act
            for l, blk in enumerate(model.blocks):
                weight_rows.append({
                    "after_task": k + 1,
                    "block": l,
                    "mean_abs_change": mean_weight_change(w_before[l], blk.w),
                    "mean_abs_weight": float(np.mean(np.abs(blk.w))),
                })
            task_log.append({
                "task": k + 1,
                "classes": list(task.classes),
                "samples": presented,
                "steps": presented * n_steps,
                "train_seconds": round(train_s, 3),
                "eval_seconds": round(time.perf_counter() - t0, 3),
                "accuracies": [float(a) for a in accs],
            })
            save_checkpoint(model, ckpt_dir / f"task_{k + 1}.npz")
            _persist(record)
            logger.info("task %d/%d %s: acc=%s MA=%.4f (train %.1fs)",
                        k + 1, n_tasks, task.classes,
                        np.array2string(accs, precision=3), mean_accuracy(matrix, k + 1), train_s)
    except Exception:
        record.status = "failed"
        _persist(record)
        raise

    record.status = "complete" if matrix.filled_through() == n_tasks else "partial"
    _persist(record)
    _write_outputs(record)
    return record


def default_run_name(cfg: ExperimentConfig) -> str:
    if cfg.mode == "fixed_m":
        tag = f"fixed{cfg.learning.fixed_m:g}"
    else:
        tag = f"mmax{cfg.learning.m_max:g}"
    return f"{cfg.mode}-{tag}-seed{cfg.seed}"


def _persist(record: RunRecord):
    """Write the incremental state: record.json, progress.npz, accuracy CSV."""
    rd = record.run_dir
    rd.mkdir(parents=True, exist_ok=True)
    payload = {
        "config_hash": record.config_hash,
        "status": record.status,
        "mode": record.config.mode,
        "seed": record.config.seed,
        "backend": record.backend_used,
        "data": record.data_note,
        "task_log": record.task_log,
        "weight_rows": record.weight_rows,
    }
    (rd / "record.json").write_text(json.dumps(payload, indent=2))
    arrays = {"r": record.matrix.r, "baseline": record.matrix.baseline}
    for tag, per_class in record.activities.items():
        for c, vec in per_class.items():
            arrays[f"act::{tag}::{c}"] = vec
    np.savez_compressed(rd / "progress.npz", **arrays)
    (rd / "accuracy_matrix.csv").write_text(record.matrix.to_csv())


def load_run_record(run_dir) -> RunRecord:
    """Reload a persisted run (no model weights; those live in checkpoints/)."""
    rd = Path(run_dir)
    try:
        payload = json.loads((rd / "record.json").read_text())
        from .config import load_config
        cfg = load_config(rd / "config.yaml")
    except OSError as exc:
        raise DataError(f"not a run directory: {rd} ({exc})") from exc
    with np.load(rd / "progress.npz", allow_pickle=False) as data:
        r = data["r"]
        baseline = data["baseline"]
        activities: dict = {}
        for key in data.files:
            if key.startswith("act::"):
                _, tag, c = key.split("::")
                activities.setdefault(tag, {})[int(c)] = data[key]
    matrix = AccuracyMatrix(r.shape[0])
    matrix.r[:] = r
    matrix.baseline[:] = baseline
    return RunRecord(run_dir=rd, config=cfg, config_hash=payload["config_hash"],
                     status=payload["status"], matrix=matrix, activities=activities,
                     task_log=payload["task_log"], weight_rows=payload["weight_rows"],
                     backend_used=payload["backend"], data_note=payload["data"])


def run_metrics(record: RunRecord) -> dict:
    """Derived metrics of a run; requires a fully measured matrix."""
    cfg = record.config
    mat = record.matrix
    n = mat.n_tasks
    if mat.filled_through() != n:
        raise ValueError(f"run {record.run_dir} is incomplete ({mat.filled_through()}/{n} columns)")

    per_checkpoint = []
    for k in range(1, n + 1):
        entry = {"after_task": k, "mean_accuracy": mean_accuracy(mat, k)}
        if k >= 2:
            entry["backward_transfer"] = backward_transfer(mat, k)
            entry["backward_transfer_retention"] = backward_transfer(mat, k, form="retention")
        if k < n:
            entry["forward_transfer"] = forward_transfer(mat, k)
        per_checkpoint.append(entry)

    sizes = None
    n_synapses = n_neurons = 0
    ckpt = record.run_dir / "checkpoints" / f"task_{n}.npz"
    if ckpt.exists():
        model = load_checkpoint(ckpt)
        sizes = list(model.layer_sizes)
        n_synapses, n_neurons = model.n_synapses, model.n_neurons
    ledger = ledger_for(cfg.mode, n, n_synapses, n_neurons)

    final_col = mat.column(n)
    similarity = _similarity_table(record)
    return {
        "config_hash": record.config_hash,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "m_max": cfg.learning.fixed_m if cfg.mode == "fixed_m" else cfg.learning.m_max,
        "n_tasks": n,
        "layer_sizes": sizes,
        "baseline_accuracy": [float(b) for b in mat.baseline],
        "final": {
            "mean_accuracy": mean_accuracy(mat, n),
            "backward_transfer": backward_transfer(mat, n) if n > 1 else None,
            "backward_transfer_retention":
                backward_transfer(mat, n, form="retention") if n > 1 else None,
            "task_accuracies": [float(a) for a in final_col],
            "final_task_accuracy": float(final_col[n - 1]),
            "memory_overhead": memory_overhead(ledger),
        },
        "per_checkpoint": per_checkpoint,
        "similarity": similarity,
        "backend": record.backend_used,
        "data": record.data_note,
    }


def _similarity_table(record: RunRecord) -> list:
    """Cosine of each class's mean hidden activity: right after its task vs later."""
    rows = []
    n = record.matrix.n_tasks
    seq_classes = {}
    for entry in record.task_log:
        for c in entry["classes"]:
            seq_classes[c] = entry["task"]
    for c, learned_at in sorted(seq_classes.items()):
        ref_tag = f"after_{learned_at}"
        if ref_tag not in record.activities or c not in record.activities[ref_tag]:
            continue
        ref = record.activities[ref_tag][c]
        if not np.any(ref):
            continue  # silent hidden layer; similarity is undefined
        for k in range(learned_at, n + 1):
            tag = f"after_{k}"
            if tag in record.activities and c in record.activities[tag]:
                other = record.activities[tag][c]
                if not np.any(other):
                    continue
                rows.append({
                    "class": c,
                    "learned_after_task": learned_at,
                    "compare_after_task": k,
                    "cosine": representation_similarity(ref, other),
                })
    return rows


def _write_outputs(record: RunRecord):
    """Write the human-facing result files for a complete run."""
    rd = record.run_dir
    if record.status == "complete":
        (rd / "metrics.json").write_text(json.dumps(run_metrics(record), indent=2))

    mat = record.matrix
    lines = ["after_task,task,accuracy"]
    for t in range(mat.n_tasks):
        if not np.isnan(mat.baseline[t]):
            lines.append(f"0,{t},{mat.baseline[t]!r}")
    for k in range(1, mat.filled_through() + 1):
        for t in range(mat.n_tasks):
            lines.append(f"{k},{t},{mat.r[t, k - 1]!r}")
    (rd / "curves.csv").write_text("\n".join(lines) + "\n")

    lines = ["after_task,block,mean_abs_change,mean_abs_weight"]
    for row in record.weight_rows:
        lines.append(f"{row['after_task']},{row['block']},{row['mean_abs_change']!r},{row['mean_abs_weight']!r}")
    (rd / "weight_change.csv").write_text("\n".join(lines) + "\n")

    lines = ["class,learned_after_task,compare_after_task,cosine"]
    for row in _similarity_table(record):
        lines.append(f"{row['class']},{row['learned_after_task']},{row['compare_after_task']},{row['cosine']!r}")
    (rd / "similarity.csv").write_text("\n".join(lines) + "\n")


def sweep(cfg: ExperimentConfig, seeds=None, m_max_values=None, resume: bool = True):
    """Run the seed x m_max grid and aggregate.

    Fills `<output_dir>/sweep_summary.csv` (one row per run) and
    `<output_dir>/sweep_aggregate.csv` (mean and std of the headline metrics
    per grid point). Returns the list of RunRecords.
    """
    seeds = list(seeds if seeds is not None else cfg.sweep.seeds)
    m_values = list(m_max_values if m_max_values is not None else cfg.sweep.m_max)
    if not seeds or not m_values:
        raise ConfigError("sweep needs at least one seed and one m_max value")
    records = []
    for m in m_values:
        for s in seeds:
            sub = replace(cfg, seed=int(s), run_name=None,
                          learning=replace(cfg.learning, m_max=float(m)))
            records.append(run_experiment(sub, resume=resume))
    write_summary(records, Path(cfg.output_dir))
    return records


def write_summary(records, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in records:
        met = run_metrics(rec)
        rows.append({
            "run": rec.run_dir.name,
            "mode": met["mode"],
            "m_max": met["m_max"],
            "seed": met["seed"],
            "mean_accuracy": met["final"]["mean_accuracy"],
            "backward_transfer": met["final"]["backward_transfer"],
            "final_task_accuracy": met["final"]["final_task_accuracy"],
            "memory_overhead": met["final"]["memory_overhead"],
        })
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) for h in header))
    (out_dir / "sweep_summary.csv").write_text("\n".join(lines) + "\n")

    groups: dict = {}
    for row in rows:
        groups.setdefault((row["mode"], row["m_max"]), []).append(row)
    lines = ["mode,m_max,n_runs,mean_accuracy_mean,mean_accuracy_std,backward_transfer_mean,backward_transfer_std"]
    for (mode, m), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        ma = np.array([g["mean_accuracy"] for g in grp])
        bwt = np.array([g["backward_transfer"] for g in grp])
        lines.append(f"{mode},{m},{len(grp)},{ma.mean()!r},{ma.std()!r},{bwt.mean()!r},{bwt.std()!r}")
    (out_dir / "sweep_aggregate.csv").write_text("\n".join(lines) + "\n")


def emit_report(records, output_dir):
    """Collect finished runs into one report directory.

    Accepts RunRecords or run-directory paths. Writes per-run metrics files
    plus the summary tables. Refuses an unwritable destination before
    touching anything, and an empty record list is an error.
    """
    if not records:
        raise ValueError("no runs to report")
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"report directory {out} is not writable: {exc}") from exc

    loaded = [rec if isinstance(rec, RunRecord) else load_run_record(rec) for rec in records]
    for rec in loaded:
        (out / f"{rec.run_dir.name}.metrics.json").write_text(json.dumps(run_metrics(rec), indent=2))
    write_summary(loaded, out)
    return out
