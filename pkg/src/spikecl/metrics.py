"""Continual-learning metrics.

The central object is the accuracy matrix R: entry R[t, k] is the accuracy
on task t (0-based) measured after training task k+1, together with the
untrained-network baseline b[t]. All derived metrics (average accuracy,
backward/forward transfer, the memory ledger, and the representation and
weight-change probes) read from it or from per-run probes.

`after_task` arguments are 1-based counts of trained tasks, matching how
results are usually tabulated ("after task 3").
"""

import io
from dataclasses import dataclass

import numpy as np


class AccuracyMatrix:
    """Accuracy matrix with an untrained baseline row.

    `r[t, k]` holds accuracy on task t after k+1 trained tasks; unmeasured
    entries are NaN. `baseline[t]` is task t's accuracy before any training.
    """

    def __init__(self, n_tasks: int):
        if n_tasks < 1:
            raise ValueError("need at least one task")
        self.n_tasks = n_tasks
        self.r = np.full((n_tasks, n_tasks), np.nan)
        self.baseline = np.full(n_tasks, np.nan)

    def set_baseline(self, accuracies):
        accuracies = np.asarray(accuracies, dtype=np.float64)
        if accuracies.shape != (self.n_tasks,):
            raise ValueError(f"expected {self.n_tasks} accuracies, got shape {accuracies.shape}")
        self.baseline[:] = accuracies

    def set_column(self, after_task: int, accuracies):
        """Record accuracies on all tasks after `after_task` trained tasks (1-based)."""
        self._check_after(after_task)
        accuracies = np.asarray(accuracies, dtype=np.float64)
        if accuracies.shape != (self.n_tasks,):
            raise ValueError(f"expected {self.n_tasks} accuracies, got shape {accuracies.shape}")
        self.r[:, after_task - 1] = accuracies

    def column(self, after_task: int):
        self._check_after(after_task)
        col = self.r[:, after_task - 1]
        if np.isnan(col).any():
            raise ValueError(f"column after_task={after_task} is not fully measured")
        return col

    def filled_through(self) -> int:
        """Number of leading complete columns."""
        complete = ~np.isnan(self.r).any(axis=0)
        k = 0
        while k < self.n_tasks and complete[k]:
            k += 1
        return k

    def _check_after(self, after_task: int):
        if not 1 <= after_task <= self.n_tasks:
            raise ValueError(f"after_task must be in [1, {self.n_tasks}], got {after_task}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ",".join(f"after_{k + 1}" for k in range(self.n_tasks))
        buf.write(f"task,baseline,{cols}\n")
        for t in range(self.n_tasks):
            row = ",".join(_fmt(x) for x in self.r[t])
            buf.write(f"{t},{_fmt(self.baseline[t])},{row}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AccuracyMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln]
        n_tasks = len(lines) - 1
        mat = cls(n_tasks)
        for ln in lines[1:]:
            parts = ln.split(",")
            t = int(parts[0])
            mat.baseline[t] = float(parts[1])
            mat.r[t, :] = [float(x) for x in parts[2:]]
        return mat


def _fmt(x: float) -> str:
    return "nan" if np.isnan(x) else repr(float(x))


def mean_accuracy(mat: AccuracyMatrix, after_task: int) -> float:
    """Average accuracy over the tasks seen so far: mean of R[0:k, k-1]."""
    col = mat.column(after_task)
    return float(np.mean(col[:after_task]))


def backward_transfer(mat: AccuracyMatrix, after_task: int, form: str = "change") -> float:
    """Backward transfer after `after_task` trained tasks (needs >= 2).

    The default "change" form averages how much each earlier task moved
    relative to its accuracy right after it was learned:
    mean over t < k of R[t, k] - R[t, t]; negative values are forgetting.
    The "retention" form averages the raw earlier-task accuracies instead
    (no subtraction), which some result tables report under the same name.
    """
    if after_task < 2:
        raise ValueError("backward transfer needs at least two trained tasks")
    col = mat.column(after_task)
    prior = np.arange(after_task - 1)
    if form == "change":
        diag = mat.r[prior, prior]
        if np.isnan(diag).any():
            raise ValueError("diagonal entries missing for backward transfer")
        return float(np.mean(col[prior] - diag))
    if form == "retention":
        return float(np.mean(col[prior]))
    raise ValueError(f"unknown form {form!r}; expected 'change' or 'retention'")


def forward_transfer(mat: AccuracyMatrix, after_task: int) -> float:
    """Mean advantage on unseen tasks over the untrained baseline.

    mean over t > k of R[t, k] - b[t]; requires at least one unseen task.
    """
    if after_task >= mat.n_tasks:
        raise ValueError("forward transfer needs at least one unseen task")
    col = mat.column(after_task)
    future = np.arange(after_task, mat.n_tasks)
    b = mat.baseline[future]
    if np.isnan(b).any():
        raise ValueError("baseline accuracies missing for forward transfer")
    return float(np.mean(col[future] - b))


# Storage units charged per synapse for each persistent field. The
# metaplastic state is bounded and moves in coarse fixed increments, so half
# a weight's width suffices for it.
M_STATE_UNITS = 0.5

_MODE_SYNAPSE_UNITS = {
    "baseline": 1.0,                      # w
    "metaplasticity_only": 1.0 + M_STATE_UNITS,
    "consolidation_only": 2.0,            # w + w_ref
    "tacos": 2.0 + M_STATE_UNITS,         # w + w_ref + m
    "fixed_m": 2.0,                       # w + w_ref; constant m needs one shared scalar
}

# Modes whose metaplastic update consumes the per-neuron activity traces as
# persistent state. Traces are O(neurons), not O(synapses); they are reported
# in the ledger but excluded from the per-synapse overhead ratio.
_MODE_NEURON_UNITS = {
    "baseline": 0.0,
    "metaplasticity_only": 1.0,
    "consolidation_only": 0.0,
    "tacos": 1.0,
    "fixed_m": 0.0,
}


@dataclass(frozen=True)
class MemoryLedger:
    """Persistent-state accounting for the memory-overhead metric.

    `synapse_units_per_task` counts weight-width-equivalent scalars stored
    per synapse; `neuron_units_per_task` counts per-neuron scalars (activity
    traces). Methods that replay or grow storage per task would vary these by
    task; the mechanisms here keep them constant.
    """

    mode: str
    n_tasks: int
    n_synapses: int
    n_neurons: int
    synapse_units_per_task: float
    neuron_units_per_task: float
    baseline_synapse_units: float = 1.0


def ledger_for(mode: str, n_tasks: int, n_synapses: int, n_neurons: int) -> MemoryLedger:
    if mode not in _MODE_SYNAPSE_UNITS:
        raise ValueError(f"unknown mode {mode!r}")
    return MemoryLedger(
        mode=mode,
        n_tasks=n_tasks,
        n_synapses=n_synapses,
        n_neurons=n_neurons,
        synapse_units_per_task=_MODE_SYNAPSE_UNITS[mode],
        neuron_units_per_task=_MODE_NEURON_UNITS[mode],
    )


def memory_overhead(ledger: MemoryLedger) -> float:
    """Mean per-task persistent synapse storage relative to the plain network.

    Averages the per-task ratio (constant for these mechanisms, so the mean
    is the ratio itself). Deliberately unclamped: a method below baseline
    would score below 1.
    """
    per_task = np.full(ledger.n_tasks, ledger.synapse_units_per_task, dtype=np.float64)
    return float(np.mean(per_task / ledger.baseline_synapse_units))


def representation_similarity(a, b) -> float:
    """Cosine similarity between two activity vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def mean_weight_change(before, after) -> float:
    """Mean absolute elementwise weight change between two snapshots."""
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.shape != after.shape:
        raise ValueError(f"shape mismatch: {before.shape} vs {after.shape}")
    return float(np.mean(np.abs(after - before)))
