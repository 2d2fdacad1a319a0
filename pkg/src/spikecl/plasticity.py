"""Synapse-local learning rules.

A synapse carries three persistent scalars: the weight ``w``, a slowly
tracking reference weight ``w_ref``, and a metaplastic state ``m`` that only
grows. Four mechanisms act on them:

* an error-gated weight update driven by the postsynaptic error compartment
  (random feedback carries output errors to hidden layers),
* heterosynaptic decay pulling active synapses' weights toward ``w_ref``,
* a multiplicative plasticity factor ``exp(-|m * w|)`` that attenuates both
  of the above as ``m`` grows,
* slow consolidation of ``w`` into ``w_ref`` and trace-gated growth of ``m``,
  both applied once per sample presentation.

Functions accept scalars or NumPy arrays; array arguments must be
broadcast-compatible.
"""

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class PlasticityParams:
    """Learning-rule parameters for one weight block.

    Attributes:
        eta: Learning rate of the error-gated update.
        alpha: Heterosynaptic decay rate.
        i_min: Lower edge of the postsynaptic-current gate (inclusive).
        i_max: Upper edge of the postsynaptic-current gate (inclusive).
        t_cons: Consolidation time constant (seconds).
        delta_m: Metaplastic increment applied when both trace gates pass.
        m_max: Upper bound on the metaplastic state.
        m_th_pre: Presynaptic trace threshold for the metaplastic update.
        m_th_post: Postsynaptic trace threshold for the metaplastic update.
        dt: Simulation step (ms), kept for completeness.
    """

    eta: float = 1e-2
    alpha: float = 5e-4
    i_min: float = -11.0
    i_max: float = 13.0
    t_cons: float = 25.0
    delta_m: float = 0.04
    m_max: float = 25.0
    m_th_pre: float = 6.0
    m_th_post: float = 5.0
    dt: float = 1.0

    def __post_init__(self):
        if self.i_min > self.i_max:
            raise ValueError(f"i_min={self.i_min} exceeds i_max={self.i_max}")
        if self.t_cons <= 0:
            raise ValueError(f"t_cons must be positive, got {self.t_cons}")
        if self.delta_m < 0 or self.m_max < 0:
            raise ValueError("delta_m and m_max must be non-negative")
        if self.eta < 0 or self.alpha < 0:
            raise ValueError("eta and alpha must be non-negative")


@dataclass
class SynapseState:
    """Persistent state of a synapse or of a whole weight block.

    Fields may be scalars or arrays of identical shape. For a block
    connecting ``n_pre`` to ``n_post`` neurons the arrays are
    ``(n_pre, n_post)`` with entry ``[j, i]`` the synapse from presynaptic
    neuron j to postsynaptic neuron i.
    """

    w: np.ndarray
    w_ref: np.ndarray
    m: np.ndarray


def plasticity_factor(m, w):
    """Multiplicative attenuation exp(-|m * w|) in (0, 1]."""
    return np.exp(-np.abs(m * w))


def boxcar(i_post, params: PlasticityParams):
    """Postsynaptic-current gate: 1.0 when i_min <= i_post <= i_max, else 0.0.

    Both edges are inclusive.
    """
    i_post = np.asarray(i_post)
    gate = (i_post >= params.i_min) & (i_post <= params.i_max)
    if gate.ndim == 0:
        return float(gate)
    return gate.astype(np.float64)


def erbp_delta(pre_spike, u_post, i_post, params: PlasticityParams):
    """Error-gated weight change before metaplastic attenuation.

    delta = -eta * pre_spike * u_post * boxcar(i_post); nonzero only on steps
    where the presynaptic neuron spikes and the postsynaptic current lies in
    the gate.
    """
    return -params.eta * pre_spike * u_post * boxcar(i_post, params)


def heterosynaptic_delta(syn: SynapseState, post_spike, params: PlasticityParams):
    """Decay of an active synapse's weight toward its reference.

    delta = -alpha * (w - w_ref) * post_spike; pulls toward w_ref only on
    postsynaptic spikes.
    """
    return -params.alpha * (syn.w - syn.w_ref) * post_spike


def combined_update(syn: SynapseState, pre_spike, post_spike, u_post, i_post,
                    params: PlasticityParams) -> SynapseState:
    """Per-step weight update combining both rules under the plasticity factor.

    w' = w - exp(-|m w|) * (eta * pre * u_post * boxcar(i_post)
                            + alpha * (w - w_ref) * post)

    Only ``w`` changes; ``w_ref`` and ``m`` evolve on the slower per-sample
    schedule (`consolidate_reference`, `update_metaplastic_state`).
    """
    inner = (params.eta * pre_spike * u_post * boxcar(i_post, params)
             + params.alpha * (syn.w - syn.w_ref) * post_spike)
    w_new = syn.w - plasticity_factor(syn.m, syn.w) * inner
    return replace(syn, w=w_new)


def consolidate_reference(syn: SynapseState, sample_duration_s: float,
                          params: PlasticityParams) -> SynapseState:
    """Move the reference weight toward the current weight.

    w_ref' = w_ref + (sample_duration / t_cons) * (w - w_ref), applied once
    per sample with the sample's simulated duration in seconds. t_cons is the
    consolidation time constant in seconds.
    """
    step = sample_duration_s / params.t_cons
    return replace(syn, w_ref=syn.w_ref + step * (syn.w - syn.w_ref))


def update_metaplastic_state(syn: SynapseState, trace_pre, trace_post,
                             params: PlasticityParams) -> SynapseState:
    """Grow the metaplastic state where pre and post traces are both high.

    m' = min(m + delta_m, m_max) where trace_pre >= m_th_pre and
    trace_post >= m_th_post (both conditions required); m is unchanged
    elsewhere. For block-shaped state pass the traces pre-broadcast, e.g.
    ``trace_pre[:, None]`` and ``trace_post[None, :]``.
    """
    gate = (np.asarray(trace_pre) >= params.m_th_pre) & (np.asarray(trace_post) >= params.m_th_post)
    m_new = np.where(gate, np.minimum(syn.m + params.delta_m, params.m_max), syn.m)
    if np.ndim(syn.m) == 0:
        m_new = float(m_new)
    return replace(syn, m=m_new)


def scale_for_reduced_data(params: PlasticityParams, full_count: int,
                           actual_count: int) -> PlasticityParams:
    """Rescale the slow dynamics when training on a subset of a task.

    With ``scale = full_count / actual_count``, the metaplastic increment is
    multiplied by ``scale`` and the consolidation time constant divided by
    it, so that m growth and w_ref tracking per task match what the full
    data volume would produce.
    """
    if actual_count <= 0 or full_count <= 0:
        raise ValueError("sample counts must be positive")
    scale = full_count / actual_count
    return replace(params, delta_m=params.delta_m * scale, t_cons=params.t_cons / scale)
