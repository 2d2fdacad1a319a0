"""NumPy simulation backend: the reference semantics for one time step.

The compiled kernel (`_kernel.pyx`) mirrors this module loop-for-loop; any
change here must be replicated there. Update order within a step:

1. forward cascade, layer by layer: synaptic current <- this step's
   presynaptic spikes, then membrane integration (refractory neurons frozen),
   then threshold/reset and trace decay;
2. input-layer trace decay;
3. error pathway (training only): error currents from output vs label
   spikes, error-neuron pair dynamics, error signals (direct at the output,
   through fixed random feedback for hidden layers), error-compartment
   integration;
4. plasticity (training only): the combined weight update on every synapse
   with a presynaptic spike (full rule) or a postsynaptic spike alone
   (heterosynaptic decay only), attenuated by the metaplastic factor.

The two plasticity passes touch disjoint synapse sets: rows with a
presynaptic spike get the full rule (which already includes the decay term
when the postsynaptic neuron also fired), and only rows *without* a
presynaptic spike take the decay-only column pass.
"""

import numpy as np

from . import neurons, plasticity
from .plasticity import SynapseState


def output_error_current(output_spikes, label_spikes):
    """Error current per output neuron: output spike minus label spike.

    +1 on a false positive (spiked, label silent), -1 on a false negative,
    0 when output and label agree this step.
    """
    output_spikes = np.asarray(output_spikes)
    label_spikes = np.asarray(label_spikes)
    if output_spikes.shape != label_spikes.shape:
        raise ValueError(f"shape mismatch: output {output_spikes.shape} vs label {label_spikes.shape}")
    return output_spikes.astype(np.float64) - label_spikes.astype(np.float64)


def error_signals(fp_spikes, fn_spikes, model):
    """Per-layer error signals from this step's error-neuron spikes.

    The output layer receives fp - fn directly (its own error pair). Each
    hidden layer receives the error spikes projected through its fixed random
    feedback matrices: E_j = sum_i fp_i * B_fp[i, j] - sum_i fn_i * B_fn[i, j].

    Returns:
        List of float64 arrays, one per non-input layer, ordered from the
        first hidden layer to the output layer.
    """
    fp = np.asarray(fp_spikes)
    fn = np.asarray(fn_spikes)
    signals = []
    for h in range(model.n_blocks - 1):
        n_hidden = model.layer_sizes[h + 1]
        idx_fp = np.flatnonzero(fp)
        idx_fn = np.flatnonzero(fn)
        acc_fp = model.feedback_fp[h][idx_fp].sum(axis=0) if idx_fp.size else np.zeros(n_hidden)
        acc_fn = model.feedback_fn[h][idx_fn].sum(axis=0) if idx_fn.size else np.zeros(n_hidden)
        signals.append(acc_fp - acc_fn)
    signals.append(fp.astype(np.float64) - fn.astype(np.float64))
    return signals


def step(model, input_spikes, label_spikes=None, learning=True):
    """Advance the network one time step; returns the output spike vector."""
    out, _ = _step_full(model, input_spikes, label_spikes, learning)
    return out


def _step_full(model, input_spikes, label_spikes, learning):
    cfg = model.config
    s_in = np.ascontiguousarray(input_spikes, dtype=np.uint8)
    if s_in.shape != (model.n_inputs,):
        raise ValueError(f"input spikes must be ({model.n_inputs},), got {s_in.shape}")

    spikes = []
    s_pre = s_in
    for l in range(model.n_blocks):
        p = cfg.neuron_params[l]
        blk = model.blocks[l]
        active = np.flatnonzero(s_pre)
        wsum = blk.w[active].sum(axis=0) if active.size else np.zeros(model.layer_sizes[l + 1])
        model.isyn[l][:] = neurons.integrate_current(model.isyn[l], wsum, p)
        refractory = model.refrac[l] > 0
        v_int = neurons.integrate_membrane(model.v[l], model.isyn[l], p)
        v_gated = np.where(refractory, model.v[l], v_int)
        v_new, refrac_new, trace_new, spk = neurons.fire_and_reset(v_gated, model.refrac[l], model.traces[l + 1], p)
        model.v[l][:] = v_new
        model.refrac[l][:] = refrac_new
        if learning:
            model.traces[l + 1][:] = trace_new
        spikes.append(spk)
        s_pre = spk

    if learning:
        model.traces[0][:] = neurons.decay_trace(model.traces[0], s_in, cfg.input_tau_tr, cfg.dt)
        if label_spikes is None:
            label_spikes = np.zeros(model.n_outputs, dtype=np.uint8)
        _apply_error_and_plasticity(model, s_in, spikes, np.asarray(label_spikes, dtype=np.uint8))
    return spikes[-1], spikes


def _apply_error_and_plasticity(model, s_in, spikes, label_spikes):
    cfg = model.config
    ep = cfg.error_params

    i_err = output_error_current(spikes[-1], label_spikes)
    v_fp, s_fp = neurons.error_neuron_step(model.verr_fp, i_err, ep)
    v_fn, s_fn = neurons.error_neuron_step(model.verr_fn, -i_err, ep)
    model.verr_fp[:] = v_fp
    model.verr_fn[:] = v_fn

    errs = error_signals(s_fp, s_fn, model)
    for l in range(model.n_blocks):
        model.u[l][:] = neurons.integrate_error_compartment(model.u[l], errs[l], cfg.neuron_params[l], cfg.u_leaky)

    for l in range(model.n_blocks):
        pp = cfg.plasticity[l]
        blk = model.blocks[l]
        pre = s_in if l == 0 else spikes[l - 1]
        post_f = spikes[l].astype(np.float64)
        u_row = model.u[l][None, :]
        i_row = model.isyn[l][None, :]

        rows = np.flatnonzero(pre)
        if rows.size:
            sub = SynapseState(blk.w[rows], blk.w_ref[rows], blk.m[rows])
            blk.w[rows] = plasticity.combined_update(sub, 1.0, post_f[None, :], u_row, i_row, pp).w
        # With alpha == 0 the decay-only pass subtracts an exact zero; skip it.
        cols = np.flatnonzero(spikes[l]) if pp.alpha != 0.0 else np.empty(0, dtype=np.intp)
        if cols.size:
            cold = np.flatnonzero(pre == 0)
            if cold.size:
                ix = np.ix_(cold, cols)
                sub = SynapseState(blk.w[ix], blk.w_ref[ix], blk.m[ix])
                blk.w[ix] = plasticity.combined_update(
                    sub, 0.0, 1.0, model.u[l][cols][None, :], model.isyn[l][cols][None, :], pp
                ).w
        if cfg.consolidate_every_step:
            coeff = (cfg.dt / 1000.0) / pp.t_cons
            blk.w_ref += coeff * (blk.w - blk.w_ref)


def run_sample(model, input_raster, label_raster, learning, out_counts, hidden_counts):
    """Simulate one sample's raster step by step, accumulating spike counts."""
    for t in range(input_raster.shape[0]):
        label_t = label_raster[t] if label_raster is not None else None
        _, spikes = _step_full(model, input_raster[t], label_t, learning)
        out_counts += spikes[-1]
        hidden_counts += spikes[0]
    return out_counts
