"""Poisson spike encoding of images and labels.

Pixels are encoded as independent Bernoulli spike trains: a pixel with
intensity x in [0, 1] spikes at each step with probability x * f_input * dt
/ 1000. Labels do the same with a fixed rate f_label on the target output
channel only. Rates are in Hz, dt in ms.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SpikeEncoderConfig:
    """Encoding rates and timing.

    Attributes:
        f_input: Peak input rate (Hz) for a pixel of intensity 1.
        f_label: Label channel rate (Hz); 0 silences the label (evaluation).
        dt: Step size (ms).
        sample_duration: Presentation time per sample (ms).
    """

    f_input: float = 250.0
    f_label: float = 200.0
    dt: float = 1.0
    sample_duration: float = 100.0

    def __post_init__(self):
        if self.dt <= 0 or self.sample_duration <= 0:
            raise ConfigError("dt and sample_duration must be positive")
        if self.f_input < 0 or self.f_label < 0:
            raise ConfigError("rates must be non-negative")
        if self.f_input * self.dt > 1000.0 or self.f_label * self.dt > 1000.0:
            raise ConfigError("rate * dt must not exceed 1000 Hz*ms (spike probability would exceed 1)")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_duration / self.dt))


def encode_sample(image, config: SpikeEncoderConfig, n_steps: int, rng: np.random.Generator):
    """Encode one image into a (n_steps, n_pixels) 0/1 raster.

    The image is flattened; intensities must lie in [0, 1]. Spikes are drawn
    independently per pixel and step, so the raster is fully determined by
    the generator's state.
    """
    p = np.asarray(image, dtype=np.float64).reshape(-1) * (config.f_input * config.dt / 1000.0)
    return (rng.random((n_steps, p.size)) < p).astype(np.uint8)


def encode_label_sample(target: int, n_outputs: int, config: SpikeEncoderConfig,
                        n_steps: int, rng: np.random.Generator):
    """Encode a class index into a (n_steps, n_outputs) label raster.

    Only the target channel carries spikes, at rate f_label. With f_label=0
    the raster is all zeros (the generator is still advanced identically).
    """
    if not 0 <= target < n_outputs:
        raise ValueError(f"target {target} outside [0, {n_outputs})")
    raster = np.zeros((n_steps, n_outputs), dtype=np.uint8)
    p = config.f_label * config.dt / 1000.0
    raster[:, target] = rng.random(n_steps) < p
    return raster


def poisson_encode(image, config: SpikeEncoderConfig, t: int, seed: int):
    """Input spike vector at step `t` for a given encoding seed.

    Random access into the same stream `encode_sample` draws from: the raster
    row at index t is recomputed by replaying the stream. Convenient for
    inspecting single steps; use `encode_sample` for whole rasters.
    """
    if t < 0:
        raise ValueError("step index must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return encode_sample(image, config, t + 1, rng)[t]


def label_encode(target: int, n_outputs: int, config: SpikeEncoderConfig, t: int, seed: int):
    """Label spike vector at step `t` for a given encoding seed."""
    if t < 0:
        raise ValueError("step index must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return encode_label_sample(target, n_outputs, config, t + 1, rng)[t]
