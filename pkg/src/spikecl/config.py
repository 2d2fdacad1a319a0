"""Experiment configuration: defaults, YAML loading, and mode resolution.

Defaults reproduce the reference parameterization of the split benchmark:
a 784-200-2 network, 1 ms steps, 100 ms presentations, and the learning
constants listed below. A config file only needs to state deviations, and
`--set section.key=value` overrides win over the file.

Ablation modes force parameter subsets off:

==================== ===== ======= =============== ====================
mode                 decay m grows initial m       reference weights
==================== ===== ======= =============== ====================
tacos                yes   yes     0               consolidating
baseline             no    no      0               frozen
metaplasticity_only  no    yes     0               frozen
consolidation_only   yes   no      0               consolidating
fixed_m              yes   no      learning.fixed_m consolidating
==================== ===== ======= =============== ====================
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import yaml

from .encoding import SpikeEncoderConfig
from .errors import ConfigError
from .network import NetworkConfig
from .neurons import ErrorNeuronParams, NeuronParams
from .plasticity import PlasticityParams

MODES = ("tacos", "baseline", "metaplasticity_only", "consolidation_only", "fixed_m")


@dataclass(frozen=True)
class DatasetConfig:
    """Where images come from.

    name "auto" uses IDX files under `root` when all four exist and falls
    back to the deterministic synthetic surrogate otherwise; "idx" requires
    the files; "synthetic" always generates.
    """

    name: str = "auto"
    root: str | None = None  # default: $SPIKECL_DATA_ROOT or ./data
    synthetic_train_per_class: int = 6000
    synthetic_test_per_class: int = 1000
    synthetic_seed: int = 7

    def __post_init__(self):
        if self.name not in ("auto", "idx", "synthetic"):
            raise ConfigError(f"dataset.name must be auto|idx|synthetic, got {self.name!r}")
        if self.synthetic_train_per_class <= 0 or self.synthetic_test_per_class <= 0:
            raise ConfigError("synthetic per-class counts must be positive")


@dataclass(frozen=True)
class TaskStreamConfig:
    ordering: str = "order1"
    pairs: tuple | None = None  # explicit class pairs; overrides `ordering`
    samples_per_task: int | None = None
    test_samples_per_task: int | None = None
    epochs: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.samples_per_task is not None and self.samples_per_task <= 0:
            raise ConfigError("samples_per_task must be positive when set")
        if self.test_samples_per_task is not None and self.test_samples_per_task <= 0:
            raise ConfigError("test_samples_per_task must be positive when set")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and neuron constants."""

    hidden: tuple = (200,)
    dt: float = 1.0
    v_rest: float = 0.0
    v_th_hidden: float = 1.0
    v_th_output: float = 2.0
    tau_mem_hidden: float = 15.0
    tau_mem_output: float = 25.0
    tau_syn_input_driven: float = 10.0  # layers fed by the input layer
    tau_syn: float = 25.0
    t_refrac: float = 4.0
    tau_u: float = 15.0
    tau_trace: float = 50.0
    r_mem_hidden: float = 1.0
    r_mem_output: float = 5.0
    r_u: float = 5.0
    tau_me: float = 10.0
    r_me: float = 25.0
    v_th_error: float = 2.5
    feedback_scale: float = 1.0
    weight_init_scale: float | None = None

    def __post_init__(self):
        if len(self.hidden) < 1:
            raise ConfigError("need at least one hidden layer")
        if any(int(h) <= 0 for h in self.hidden):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class LearningConfig:
    """Learning-rule constants (before mode resolution)."""

    eta: float = 1e-2
    alpha: float = 5e-4
    i_min: float = -11.0
    i_max: float = 13.0
    t_cons: float = 25.0
    delta_m: float = 0.04
    delta_m_output: float = 0.004
    m_max: float = 25.0
    trace_th_input: float = 6.0
    trace_th_hidden: float = 5.0
    trace_th_output: float = 2.0
    fixed_m: float | None = None
    u_leaky: bool = True
    consolidate_every_step: bool = False


@dataclass(frozen=True)
class SweepConfig:
    seeds: tuple = (42, 43, 44)
    m_max: tuple = (25.0,)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "tacos"
    seed: int = 42
    eval_seed: int = 9001
    output_dir: str = "runs"
    run_name: str | None = None
    backend: str = "auto"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    tasks: TaskStreamConfig = field(default_factory=TaskStreamConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)
    encoder: SpikeEncoderConfig = field(default_factory=SpikeEncoderConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed_m" and self.learning.fixed_m is None:
            raise ConfigError("mode fixed_m requires learning.fixed_m")
        if self.model.dt != self.encoder.dt:
            raise ConfigError(f"model.dt={self.model.dt} differs from encoder.dt={self.encoder.dt}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"]["hidden"] = list(self.model.hidden)
        d["sweep"]["seeds"] = list(self.sweep.seeds)
        d["sweep"]["m_max"] = list(self.sweep.m_max)
        if self.tasks.pairs is not None:
            d["tasks"]["pairs"] = [list(p) for p in self.tasks.pairs]
        return d


def _from_dict(d: dict) -> ExperimentConfig:
    def sub(cls, key, **extra):
        raw = dict(d.get(key) or {})
        raw.update(extra)
        known = {f.name for f in cls.__dataclass_fields__.values()} if hasattr(cls, "__dataclass_fields__") else set()
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown {key} keys: {sorted(unknown)}")
        return cls(**raw)

    top_known = {"mode", "seed", "eval_seed", "output_dir", "run_name", "backend",
                 "dataset", "tasks", "model", "learning", "encoder", "sweep"}
    unknown = set(d) - top_known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    tasks_raw = dict(d.get("tasks") or {})
    if tasks_raw.get("pairs") is not None:
        tasks_raw["pairs"] = tuple(tuple(p) for p in tasks_raw["pairs"])
    model_raw = dict(d.get("model") or {})
    if "hidden" in model_raw:
        model_raw["hidden"] = tuple(model_raw["hidden"])
    sweep_raw = dict(d.get("sweep") or {})
    for key in ("seeds", "m_max"):
        if key in sweep_raw:
            sweep_raw[key] = tuple(sweep_raw[key])

    try:
        return ExperimentConfig(
            mode=d.get("mode", "tacos"),
            seed=int(d.get("seed", 42)),
            eval_seed=int(d.get("eval_seed", 9001)),
            output_dir=str(d.get("output_dir", "runs")),
            run_name=d.get("run_name"),
            backend=str(d.get("backend", "auto")),
            dataset=sub(DatasetConfig, "dataset"),
            tasks=TaskStreamConfig(**tasks_raw),
            model=ModelConfig(**model_raw),
            learning=sub(LearningConfig, "learning"),
            encoder=sub(SpikeEncoderConfig, "encoder"),
            sweep=SweepConfig(**sweep_raw),
        )
    except TypeError as exc:
        raise ConfigError(f"bad config structure: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Load a config: defaults, then a YAML file, then `--set` overrides.

    Overrides use dotted keys with YAML-parsed values, e.g.
    ``learning.m_max=5`` or ``tasks.samples_per_task=1000``.
    """
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping, got {type(loaded).__name__}")
        data = loaded
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw_value = item.split("=", 1)
        value = yaml.safe_load(raw_value)
        node = data
        keys = dotted.strip().split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into non-mapping {key!r}")
        node[keys[-1]] = value
    return _from_dict(data)


def resolve_mode(cfg: ExperimentConfig) -> ExperimentConfig:
    """Force the learning parameters implied by the ablation mode.

    Returns a config whose learning section reflects what actually runs;
    see the module docstring table.
    """
    lc = cfg.learning
    if cfg.mode == "baseline":
        lc = replace(lc, alpha=0.0, delta_m=0.0, delta_m_output=0.0, fixed_m=None)
    elif cfg.mode == "metaplasticity_only":
        lc = replace(lc, alpha=0.0, fixed_m=None)
    elif cfg.mode == "consolidation_only":
        lc = replace(lc, delta_m=0.0, delta_m_output=0.0, fixed_m=None)
    elif cfg.mode == "tacos":
        lc = replace(lc, fixed_m=None)
    return replace(cfg, learning=lc)


def metaplasticity_frozen(mode: str) -> bool:
    """Whether the metaplastic state must never change during a run."""
    return mode in ("baseline", "consolidation_only", "fixed_m")


def network_config(cfg: ExperimentConfig, n_inputs: int, n_outputs: int,
                   plasticity_override=None) -> NetworkConfig:
    """Expand an (already mode-resolved) experiment config into a NetworkConfig.

    `plasticity_override` substitutes per-block PlasticityParams (used for
    reduced-data rescaling, which depends on the task stream).
    """
    mc, lc = cfg.model, cfg.learning
    sizes = (int(n_inputs), *mc.hidden, int(n_outputs))
    n_blocks = len(sizes) - 1

    neuron_params = []
    for l in range(n_blocks):
        is_output = l == n_blocks - 1
        neuron_params.append(NeuronParams(
            tau_mem=mc.tau_mem_output if is_output else mc.tau_mem_hidden,
            tau_syn=mc.tau_syn_input_driven if l == 0 else mc.tau_syn,
            tau_u=mc.tau_u,
            tau_tr=mc.tau_trace,
            r_mem=mc.r_mem_output if is_output else mc.r_mem_hidden,
            r_u=mc.r_u,
            v_rest=mc.v_rest,
            v_th=mc.v_th_output if is_output else mc.v_th_hidden,
            t_refrac=mc.t_refrac,
            dt=mc.dt,
        ))

    if plasticity_override is not None:
        plast = tuple(plasticity_override)
        if len(plast) != n_blocks:
            raise ConfigError(f"expected {n_blocks} plasticity overrides, got {len(plast)}")
    else:
        plast = tuple(block_plasticity(cfg, l, n_blocks) for l in range(n_blocks))

    return NetworkConfig(
        layer_sizes=sizes,
        neuron_params=tuple(neuron_params),
        plasticity=plast,
        error_params=ErrorNeuronParams(tau_me=mc.tau_me, r_me=mc.r_me, v_th=mc.v_th_error, dt=mc.dt),
        input_tau_tr=mc.tau_trace,
        feedback_scale=mc.feedback_scale,
        weight_init_scale=mc.weight_init_scale,
        init_m=float(lc.fixed_m) if cfg.mode == "fixed_m" else 0.0,
        u_leaky=lc.u_leaky,
        consolidate_every_step=lc.consolidate_every_step,
        metaplasticity_frozen=metaplasticity_frozen(cfg.mode),
        seed=cfg.seed,
    )


def block_plasticity(cfg: ExperimentConfig, block: int, n_blocks: int) -> PlasticityParams:
    """Plasticity parameters of one weight block.

    The metaplastic increment and the trace thresholds depend on where the
    block sits: updates into the output layer use the smaller increment, and
    the pre/post trace thresholds follow the source/destination layer kind.
    """
    lc = cfg.learning
    into_output = block == n_blocks - 1
    from_input = block == 0
    try:
        return PlasticityParams(
            eta=lc.eta,
            alpha=lc.alpha,
            i_min=lc.i_min,
            i_max=lc.i_max,
            t_cons=lc.t_cons,
            delta_m=lc.delta_m_output if into_output else lc.delta_m,
            m_max=lc.m_max,
            m_th_pre=lc.trace_th_input if from_input else lc.trace_th_hidden,
            m_th_post=lc.trace_th_output if into_output else lc.trace_th_hidden,
            dt=cfg.model.dt,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of everything that affects a run's numbers.

    Presentation-only fields (output paths, run name, backend, sweep grid)
    are excluded: two runs with equal hashes produce identical results.
    """
    d = cfg.to_dict()
    for key in ("output_dir", "run_name", "backend", "sweep"):
        d.pop(key, None)
    blob = json.dumps(d, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dump_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
