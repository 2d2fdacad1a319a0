"""Discrete-time leaky integrate-and-fire neuron dynamics.

All state updates are forward-Euler with step ``dt`` (milliseconds). The
functions here are pure: they take state arrays (or scalars) and return new
values, and they define the reference semantics that both simulation backends
must reproduce. Within one time step a layer is updated in a fixed order:

1. synaptic current integration (uses this step's presynaptic spikes),
2. membrane integration (uses the current from step 1, skipped while
   refractory),
3. threshold crossing, reset, refractory bookkeeping, and trace decay.

Membrane potentials are in millivolts, currents in dimensionless units
(weights times spikes), times in milliseconds.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NeuronParams:
    """Parameters of one layer of LIF neurons.

    Attributes:
        tau_mem: Membrane time constant (ms).
        tau_syn: Synaptic current time constant (ms).
        tau_u: Time constant of the error-integrating compartment (ms).
        tau_tr: Decay time constant of the activity trace (ms).
        r_mem: Membrane resistance applied to the synaptic current.
        r_u: Resistance applied to the error signal in the second compartment.
        v_rest: Resting potential (mV).
        v_th: Firing threshold (mV).
        t_refrac: Absolute refractory period (ms).
        dt: Simulation step (ms).
    """

    tau_mem: float
    tau_syn: float
    tau_u: float
    tau_tr: float
    r_mem: float
    r_u: float
    v_rest: float
    v_th: float
    t_refrac: float
    dt: float = 1.0

    def __post_init__(self):
        for name in ("tau_mem", "tau_syn", "tau_u", "tau_tr", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("tau_mem", "tau_syn", "tau_u", "tau_tr"):
            if self.dt > getattr(self, name):
                raise ValueError(f"dt={self.dt} exceeds {name}={getattr(self, name)}; the Euler update would be unstable")
        if self.t_refrac < 0:
            raise ValueError(f"t_refrac must be non-negative, got {self.t_refrac}")


@dataclass(frozen=True)
class ErrorNeuronParams:
    """Parameters of the false-positive / false-negative error neurons.

    Error neurons are leaky integrators with a rectified membrane (clamped at
    zero from below) and no refractory period.
    """

    tau_me: float = 10.0
    r_me: float = 25.0
    v_th: float = 2.5
    dt: float = 1.0

    def __post_init__(self):
        if self.tau_me <= 0 or self.dt <= 0:
            raise ValueError("tau_me and dt must be positive")
        if self.dt > self.tau_me:
            raise ValueError(f"dt={self.dt} exceeds tau_me={self.tau_me}")


def integrate_current(i_syn, weighted_spikes, params: NeuronParams):
    """One Euler step of the synaptic current.

    i' = i + (dt/tau_syn) * (sum_j w_j s_j - i)

    Args:
        i_syn: Current value(s).
        weighted_spikes: Presynaptic drive, sum over arriving spikes weighted
            by the synaptic weights.
        params: Layer parameters.

    Returns:
        Updated current, same shape as `i_syn`.
    """
    return i_syn + (params.dt / params.tau_syn) * (weighted_spikes - i_syn)


def integrate_membrane(v, i_syn, params: NeuronParams):
    """One Euler step of the membrane potential of a non-refractory neuron.

    v' = v + (dt/tau_mem) * ((v_rest - v) + i_syn * r_mem)

    Callers gate this update on the refractory state; a refractory neuron's
    membrane stays frozen at reset.
    """
    return v + (params.dt / params.tau_mem) * ((params.v_rest - v) + i_syn * params.r_mem)


def fire_and_reset(v, refrac, trace, params: NeuronParams):
    """Threshold crossing, reset, refractory countdown, and trace update.

    A non-refractory neuron fires when v >= v_th (inclusive); its membrane
    resets to 0 and its refractory clock is armed to t_refrac. A refractory
    neuron's clock counts down by dt (never below 0) and its membrane is held
    at 0. Traces of all neurons are then updated as
    ``trace' = (trace + spike) * (1 - dt/tau_tr)``: the increment lands before
    the decay is applied.

    Args:
        v: Membrane potentials after integration.
        refrac: Remaining refractory time per neuron (ms).
        trace: Activity traces.
        params: Layer parameters.

    Returns:
        Tuple ``(v, refrac, trace, spikes)`` with spikes as a uint8 0/1 array.
    """
    v = np.asarray(v, dtype=np.float64)
    refrac = np.asarray(refrac, dtype=np.float64)
    trace = np.asarray(trace, dtype=np.float64)

    refractory = refrac > 0
    spikes = (~refractory) & (v >= params.v_th)
    v_out = np.where(refractory | spikes, 0.0, v)
    refrac_out = np.where(
        refractory,
        np.maximum(refrac - params.dt, 0.0),
        np.where(spikes, params.t_refrac, refrac),
    )
    trace_out = decay_trace(trace, spikes, params.tau_tr, params.dt)
    return v_out, refrac_out, trace_out, spikes.astype(np.uint8)


def decay_trace(trace, spikes, tau_tr: float, dt: float):
    """Activity trace update: add this step's spikes, then decay."""
    return (trace + spikes) * (1.0 - dt / tau_tr)


def integrate_error_compartment(u, error_signal, params: NeuronParams, leaky: bool = True):
    """One Euler step of the error-integrating second compartment.

    The leaky form (default) is
        u' = u + (dt/tau_u) * (error_signal * r_u - u)
    and the leak-free variant drops the -u term, turning the compartment into
    a pure accumulator of the error signal.
    """
    a = params.dt / params.tau_u
    if leaky:
        return u + a * (error_signal * params.r_u - u)
    return u + a * (error_signal * params.r_u)


def error_neuron_step(v, i_err, params: ErrorNeuronParams):
    """One step of a rectified leaky error neuron.

    v' = max(0, v + (dt/tau_me) * (i_err * r_me - v)); a neuron with
    v' >= v_th emits a spike and resets to 0.

    Args:
        v: Error-neuron membrane(s).
        i_err: Input error current(s); the false-positive population receives
            the raw error current and the false-negative population its
            negation.
        params: Error neuron parameters.

    Returns:
        Tuple ``(v, spikes)`` with spikes as a uint8 0/1 array.
    """
    v = np.asarray(v, dtype=np.float64)
    v_new = v + (params.dt / params.tau_me) * (i_err * params.r_me - v)
    v_new = np.maximum(v_new, 0.0)
    spikes = v_new >= params.v_th
    v_out = np.where(spikes, 0.0, v_new)
    return v_out, spikes.astype(np.uint8)
