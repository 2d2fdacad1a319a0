"""Network assembly, simulation entry points, and checkpoint IO.

A network is a feedforward stack of LIF layers with one weight block per
adjacent layer pair, plus the machinery for error-driven learning: a pair of
error neurons per output, fixed random feedback matrices that project error
spikes back to each hidden layer, and per-neuron error compartments.

`run_sample` is the performance path: it simulates one sample's full spike
raster through whichever backend is active (compiled or NumPy). `step` always
uses the NumPy reference backend and exists for inspection and testing.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import _kernel_py, backend, seeding
from .errors import ConfigError, DataError
from .neurons import NeuronParams, ErrorNeuronParams
from .plasticity import PlasticityParams, SynapseState, consolidate_reference, update_metaplastic_state

MAX_LAYERS = 8  # weight blocks; bound shared with the compiled kernel


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of a network.

    Attributes:
        layer_sizes: Neuron counts from input to output, length >= 3 (at
            least one hidden layer).
        neuron_params: One NeuronParams per non-input layer.
        plasticity: One PlasticityParams per weight block.
        error_params: Parameters of the output error-neuron pairs.
        input_tau_tr: Trace time constant of the input layer (ms).
        feedback_scale: Half-width of the uniform init of the fixed random
            feedback matrices.
        weight_init_scale: Half-width of the uniform weight init; None means
            1/sqrt(fan_in) per block.
        init_m: Initial metaplastic state, uniform across synapses.
        u_leaky: Whether the error compartment leaks (True) or purely
            accumulates (False).
        consolidate_every_step: Apply reference-weight consolidation at every
            simulation step (scaled by dt) instead of once per sample.
        metaplasticity_frozen: Disable all updates of m (m keeps its initial
            value for the whole run).
        seed: Master seed for weight and feedback initialization.
    """

    layer_sizes: tuple
    neuron_params: tuple
    plasticity: tuple
    error_params: ErrorNeuronParams = ErrorNeuronParams()
    input_tau_tr: float = 50.0
    feedback_scale: float = 1.0
    weight_init_scale: float | None = None
    init_m: float = 0.0
    u_leaky: bool = True
    consolidate_every_step: bool = False
    metaplasticity_frozen: bool = False
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ConfigError("need at least input, one hidden, and output layer")
        if len(sizes) - 1 > MAX_LAYERS:
            raise ConfigError(f"at most {MAX_LAYERS} weight blocks supported")
        if any(n <= 0 for n in sizes):
            raise ConfigError(f"layer sizes must be positive, got {sizes}")
        n_blocks = len(sizes) - 1
        if len(self.neuron_params) != n_blocks:
            raise ConfigError(f"expected {n_blocks} NeuronParams, got {len(self.neuron_params)}")
        if len(self.plasticity) != n_blocks:
            raise ConfigError(f"expected {n_blocks} PlasticityParams, got {len(self.plasticity)}")
        dts = {p.dt for p in self.neuron_params} | {self.error_params.dt}
        if len(dts) != 1:
            raise ConfigError(f"all layers must share one dt, got {sorted(dts)}")
        if self.feedback_scale <= 0:
            raise ConfigError("feedback_scale must be positive")
        if self.weight_init_scale is not None and self.weight_init_scale <= 0:
            raise ConfigError("weight_init_scale must be positive when set")
        if self.init_m < 0:
            raise ConfigError("init_m must be non-negative")
        if self.input_tau_tr <= 0:
            raise ConfigError("input_tau_tr must be positive")

    @property
    def dt(self) -> float:
        return self.neuron_params[0].dt

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "neuron_params": [asdict(p) for p in self.neuron_params],
            "plasticity": [asdict(p) for p in self.plasticity],
            "error_params": asdict(self.error_params),
            "input_tau_tr": self.input_tau_tr,
            "feedback_scale": self.feedback_scale,
            "weight_init_scale": self.weight_init_scale,
            "init_m": self.init_m,
            "u_leaky": self.u_leaky,
            "consolidate_every_step": self.consolidate_every_step,
            "metaplasticity_frozen": self.metaplasticity_frozen,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            layer_sizes=tuple(d["layer_sizes"]),
            neuron_params=tuple(NeuronParams(**p) for p in d["neuron_params"]),
            plasticity=tuple(PlasticityParams(**p) for p in d["plasticity"]),
            error_params=ErrorNeuronParams(**d["error_params"]),
            input_tau_tr=d["input_tau_tr"],
            feedback_scale=d["feedback_scale"],
            weight_init_scale=d["weight_init_scale"],
            init_m=d["init_m"],
            u_leaky=d["u_leaky"],
            consolidate_every_step=d["consolidate_every_step"],
            metaplasticity_frozen=d["metaplasticity_frozen"],
            seed=d["seed"],
        )


class NetworkModel:
    """Mutable simulation state built from a NetworkConfig.

    Holds the weight blocks (SynapseState with (n_pre, n_post) arrays), the
    fixed feedback matrices, and per-layer transient state. All arrays are
    float64 and C-contiguous; backends mutate them in place.
    """

    def __init__(self, config: NetworkConfig, blocks, feedback_fp, feedback_fn):
        self.config = config
        self.blocks = list(blocks)
        self.feedback_fp = list(feedback_fp)
        self.feedback_fn = list(feedback_fn)
        sizes = config.layer_sizes
        n_blocks = len(sizes) - 1
        self.v = [np.zeros(sizes[l + 1]) for l in range(n_blocks)]
        self.isyn = [np.zeros(sizes[l + 1]) for l in range(n_blocks)]
        self.u = [np.zeros(sizes[l + 1]) for l in range(n_blocks)]
        self.refrac = [np.zeros(sizes[l + 1]) for l in range(n_blocks)]
        self.traces = [np.zeros(sizes[k]) for k in range(n_blocks + 1)]
        self.verr_fp = np.zeros(sizes[-1])
        self.verr_fn = np.zeros(sizes[-1])
        self._packed = None

    @property
    def layer_sizes(self):
        return self.config.layer_sizes

    @property
    def n_blocks(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_synapses(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[l] * sizes[l + 1] for l in range(self.n_blocks))

    @property
    def n_neurons(self) -> int:
        return sum(self.layer_sizes)


def build_network(config: NetworkConfig) -> NetworkModel:
    """Initialize a model from seeded streams.

    Forward weights are uniform in +-weight_init_scale (default 1/sqrt(fan_in)
    per block); reference weights start equal to the weights; m starts at
    config.init_m everywhere. Feedback matrices are uniform in
    +-feedback_scale, drawn independently for the false-positive and
    false-negative populations of each hidden layer.
    """
    sizes = config.layer_sizes
    n_blocks = len(sizes) - 1
    n_out = sizes[-1]
    blocks = []
    for l in range(n_blocks):
        n_pre, n_post = sizes[l], sizes[l + 1]
        bound = config.weight_init_scale if config.weight_init_scale is not None else 1.0 / np.sqrt(n_pre)
        rng = seeding.stream_rng(config.seed, seeding.WEIGHTS, l)
        w = rng.uniform(-bound, bound, (n_pre, n_post))
        blocks.append(SynapseState(w=w, w_ref=w.copy(), m=np.full((n_pre, n_post), float(config.init_m))))
    feedback_fp, feedback_fn = [], []
    for h in range(n_blocks - 1):
        n_hidden = sizes[h + 1]
        fs = config.feedback_scale
        feedback_fp.append(seeding.stream_rng(config.seed, seeding.FEEDBACK, h, 0).uniform(-fs, fs, (n_out, n_hidden)))
        feedback_fn.append(seeding.stream_rng(config.seed, seeding.FEEDBACK, h, 1).uniform(-fs, fs, (n_out, n_hidden)))
    return NetworkModel(config, blocks, feedback_fp, feedback_fn)


# Functional views of the error pathway, delegating to the reference backend.
output_error_current = _kernel_py.output_error_current
error_signals = _kernel_py.error_signals


def step(model: NetworkModel, input_spikes, label_spikes=None, learning: bool = True):
    """Advance the network one time step (reference backend).

    Returns the output layer's spike vector. See `_kernel_py.step` for the
    exact update order.
    """
    return _kernel_py.step(model, input_spikes, label_spikes, learning)


def run_sample(model: NetworkModel, input_raster, label_raster=None,
               learning: bool = True, out_counts=None, hidden_counts=None):
    """Simulate one sample's spike raster through the active backend.

    Args:
        model: Network state; mutated in place.
        input_raster: (T, n_inputs) 0/1 array of input spikes.
        label_raster: Optional (T, n_outputs) 0/1 array of label spikes;
            treated as silent when omitted.
        learning: Apply the error pathway, plasticity, and trace updates.
            With False the sample leaves weights, traces, and metaplastic
            state untouched.
        out_counts: Optional int64 (n_outputs,) buffer accumulating output
            spike counts.
        hidden_counts: Optional int64 buffer accumulating first-hidden-layer
            spike counts (used by the representation probe).

    Returns:
        The output spike-count array (`out_counts` if it was provided).
    """
    input_raster = np.ascontiguousarray(input_raster, dtype=np.uint8)
    if input_raster.ndim != 2 or input_raster.shape[1] != model.n_inputs:
        raise ValueError(f"input raster must be (T, {model.n_inputs}), got {input_raster.shape}")
    n_steps = input_raster.shape[0]
    if label_raster is not None:
        label_raster = np.ascontiguousarray(label_raster, dtype=np.uint8)
        if label_raster.shape != (n_steps, model.n_outputs):
            raise ValueError(f"label raster must be ({n_steps}, {model.n_outputs}), got {label_raster.shape}")
    if out_counts is None:
        out_counts = np.zeros(model.n_outputs, dtype=np.int64)
    if hidden_counts is None:
        hidden_counts = np.zeros(model.layer_sizes[1], dtype=np.int64)

    if backend.active_backend() == "compiled":
        from . import _kernel
        packed = _packed_args(model)
        if label_raster is None:
            label_raster = np.zeros((n_steps, model.n_outputs), dtype=np.uint8)
        _kernel.run_sample(
            [blk.w for blk in model.blocks],
            [blk.w_ref for blk in model.blocks],
            [blk.m for blk in model.blocks],
            model.feedback_fp, model.feedback_fn,
            model.v, model.isyn, model.u, model.refrac, model.traces,
            model.verr_fp, model.verr_fn,
            packed["a_syn"], packed["a_mem"], packed["r_mem"],
            packed["v_th"], packed["v_rest"], packed["t_refrac"],
            packed["a_u"], packed["r_u"], packed["tr_decay"],
            packed["eta"], packed["alpha"], packed["i_min"], packed["i_max"],
            packed["consol_coeff"],
            packed["a_me"], packed["r_me"], packed["v_th_err"],
            input_raster, label_raster,
            model.config.dt, bool(learning), model.config.u_leaky,
            out_counts, hidden_counts,
            packed["scratch"],
        )
    else:
        _kernel_py.run_sample(model, input_raster, label_raster, learning, out_counts, hidden_counts)
    return out_counts


def _packed_args(model: NetworkModel) -> dict:
    """Flatten per-layer parameters into arrays for the compiled kernel.

    Cached on the model; valid because state arrays are only ever mutated in
    place and parameters are frozen.
    """
    if model._packed is not None:
        return model._packed
    cfg = model.config
    nps = cfg.neuron_params
    pps = cfg.plasticity
    n_blocks = model.n_blocks
    dt = cfg.dt
    packed = {
        "a_syn": np.array([dt / p.tau_syn for p in nps]),
        "a_mem": np.array([dt / p.tau_mem for p in nps]),
        "r_mem": np.array([p.r_mem for p in nps]),
        "v_th": np.array([p.v_th for p in nps]),
        "v_rest": np.array([p.v_rest for p in nps]),
        "t_refrac": np.array([p.t_refrac for p in nps]),
        "a_u": np.array([dt / p.tau_u for p in nps]),
        "r_u": np.array([p.r_u for p in nps]),
        "tr_decay": np.array([1.0 - dt / cfg.input_tau_tr] + [1.0 - dt / p.tau_tr for p in nps]),
        "eta": np.array([p.eta for p in pps]),
        "alpha": np.array([p.alpha for p in pps]),
        "i_min": np.array([p.i_min for p in pps]),
        "i_max": np.array([p.i_max for p in pps]),
        "consol_coeff": np.array(
            [(dt / 1000.0) / p.t_cons if cfg.consolidate_every_step else 0.0 for p in pps]
        ),
        "a_me": cfg.error_params.dt / cfg.error_params.tau_me,
        "r_me": cfg.error_params.r_me,
        "v_th_err": cfg.error_params.v_th,
    }
    sizes = model.layer_sizes
    max_post = max(sizes[1:])
    max_hidden = max(sizes[1:-1]) if n_blocks > 1 else 1
    packed["scratch"] = {
        "wsum": np.zeros(max_post),
        "gate": np.zeros(max_post),
        "err_a": np.zeros(max_hidden),
        "err_b": np.zeros(max_hidden),
        "sfp": np.zeros(sizes[-1], dtype=np.uint8),
        "sfn": np.zeros(sizes[-1], dtype=np.uint8),
        "cols": np.zeros(max_post, dtype=np.int32),
        "spikes": [np.zeros(sizes[l + 1], dtype=np.uint8) for l in range(n_blocks)],
    }
    model._packed = packed
    return packed


def end_of_sample(model: NetworkModel, sample_duration_ms: float):
    """Close out one sample presentation.

    Applies the slow per-sample dynamics, in order: consolidation of each
    block's reference weights over the sample's simulated duration (skipped
    when consolidation runs per step), then the trace-gated metaplastic
    update. Finally resets the transient state (membranes, currents, error
    compartments, refractory clocks, error neurons). Traces persist across
    samples; they carry the recent-activity signal the metaplastic update
    needs.
    """
    if sample_duration_ms <= 0:
        raise ValueError(f"sample duration must be positive, got {sample_duration_ms}")
    cfg = model.config
    dt_s = sample_duration_ms / 1000.0
    for l, blk in enumerate(model.blocks):
        pp = cfg.plasticity[l]
        if not cfg.consolidate_every_step:
            if dt_s > pp.t_cons:
                raise ConfigError(
                    f"sample duration {dt_s}s exceeds t_cons {pp.t_cons}s; the reference weight would overshoot"
                )
            blk.w_ref[:] = consolidate_reference(blk, dt_s, pp).w_ref
        if not cfg.metaplasticity_frozen and pp.delta_m != 0.0:
            blk.m[:] = update_metaplastic_state(
                blk, model.traces[l][:, None], model.traces[l + 1][None, :], pp
            ).m
    reset_transients(model)


def reset_transients(model: NetworkModel):
    """Zero all fast state: membranes, currents, error compartments, refractory clocks."""
    for arr in (*model.v, *model.isyn, *model.u, *model.refrac):
        arr[:] = 0.0
    model.verr_fp[:] = 0.0
    model.verr_fn[:] = 0.0


def predict(model: NetworkModel, input_raster) -> int:
    """Classify one sample: most active output wins (lowest index on ties).

    Runs without learning from a clean transient state and leaves the model's
    transients reset, so prediction never perturbs training state.
    """
    reset_transients(model)
    counts = run_sample(model, input_raster, None, learning=False)
    reset_transients(model)
    return int(np.argmax(counts))


def save_checkpoint(model: NetworkModel, path):
    """Serialize the full model (config and all state) to an npz file.

    Round-trips bit-exactly: every float64 array is stored losslessly.
    """
    arrays = {"config_json": np.array(json.dumps(model.config.to_dict()))}
    for l, blk in enumerate(model.blocks):
        arrays[f"w_{l}"] = blk.w
        arrays[f"w_ref_{l}"] = blk.w_ref
        arrays[f"m_{l}"] = blk.m
        arrays[f"v_{l}"] = model.v[l]
        arrays[f"isyn_{l}"] = model.isyn[l]
        arrays[f"u_{l}"] = model.u[l]
        arrays[f"refrac_{l}"] = model.refrac[l]
    for h in range(model.n_blocks - 1):
        arrays[f"feedback_fp_{h}"] = model.feedback_fp[h]
        arrays[f"feedback_fn_{h}"] = model.feedback_fn[h]
    for k, tr in enumerate(model.traces):
        arrays[f"trace_{k}"] = tr
    arrays["verr_fp"] = model.verr_fp
    arrays["verr_fn"] = model.verr_fn
    np.savez_compressed(path, **arrays)


def load_checkpoint(path) -> NetworkModel:
    """Rebuild a model from `save_checkpoint` output."""
    import zipfile
    try:
        with np.load(path, allow_pickle=False) as data:
            stored = {k: data[k] for k in data.files}
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        config = NetworkConfig.from_dict(json.loads(str(stored["config_json"][()])))
        n_blocks = len(config.layer_sizes) - 1
        blocks = [
            SynapseState(w=stored[f"w_{l}"], w_ref=stored[f"w_ref_{l}"], m=stored[f"m_{l}"])
            for l in range(n_blocks)
        ]
        feedback_fp = [stored[f"feedback_fp_{h}"] for h in range(n_blocks - 1)]
        feedback_fn = [stored[f"feedback_fn_{h}"] for h in range(n_blocks - 1)]
        model = NetworkModel(config, blocks, feedback_fp, feedback_fn)
        for l in range(n_blocks):
            model.v[l][:] = stored[f"v_{l}"]
            model.isyn[l][:] = stored[f"isyn_{l}"]
            model.u[l][:] = stored[f"u_{l}"]
            model.refrac[l][:] = stored[f"refrac_{l}"]
        for k in range(n_blocks + 1):
            model.traces[k][:] = stored[f"trace_{k}"]
        model.verr_fp[:] = stored["verr_fp"]
        model.verr_fn[:] = stored["verr_fn"]
    except KeyError as exc:
        raise DataError(f"checkpoint {path} is missing array {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise DataError(f"checkpoint {path} is malformed: {exc}") from exc
    return model
