"""Coaxial transient Mueller rendering and ellipsometric capture simulation.

`render_transient` produces the per-pixel, per-delay-bin transport Mueller
cube H(tau) in *delay* coordinates (no time-of-flight shift).
`simulate_capture` projects the cube through a rotating-optics schedule,
applies the 2d/c shift with two-tap linear interpolation (differentiable in
depth), convolves with a Gaussian instrument response, and adds seeded
Gaussian noise with a per-pixel counter-based RNG.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np

from . import brdf as _brdf
from . import mueller as _mueller
from .scene import Scene, SensorConfig

log = logging.getLogger("polartof")

# laser illumination: horizontal linear polarization; the schedule's HWP
# supplies all needed rotation
S_ILLUM = np.array([1.0, 1.0, 0.0, 0.0])


@dataclass(frozen=True)
class TransientMuellerCube:
    """[H, W, T, 4, 4] Mueller entries per pixel per time bin."""

    data: np.ndarray
    bin_width: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 5 or data.shape[-2:] != (4, 4):
            raise ValueError("cube data must be [H, W, T, 4, 4]")

    @property
    def num_bins(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CaptureStack:
    """[N, H, W, T] intensities for N schedule entries."""

    data: np.ndarray
    schedule_ref: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 4:
            raise ValueError("capture data must be [N, H, W, T]")

    @property
    def n(self) -> int:
        return self.data.shape[0]


@partial(jax.jit, static_argnames=())
def _render_core(taus, view_dirs, normals, eta, m,
                 a_s, mu_s, sg_s, a_ss, mu_ss, sg_ss):
    omega = -view_dirs  # not used; kept for clarity of the coaxial setup
    del omega
    return _brdf.brdf_cube(taus, view_dirs, view_dirs, normals, eta, m,
                           a_s, mu_s, sg_s, a_ss, mu_ss, sg_ss, cosine=True)


def render_transient(scene: Scene, sensor: SensorConfig) -> TransientMuellerCube:
    """Render the coaxial transport cube at bin-center delays.

    Grazing pixels (cos_i * cos_o < 1e-6) render as zero; their count is
    logged as a warning.
    """
    taus = sensor.bin_centers()
    px = scene.pixel_material_arrays()
    cos2 = np.sum(scene.normals * scene.view_dirs, axis=-1) ** 2
    n_grazing = int(np.sum(cos2 < _brdf.GRAZING_EPS))
    if n_grazing:
        log.warning("render_transient: %d grazing pixels rendered as zero",
                    n_grazing)
    data = _render_core(taus, scene.view_dirs, scene.normals,
                        px["eta"], px["m"],
                        px["a_s"], px["mu_s"], px["sigma_s"],
                        px["a_ss"], px["mu_ss"], px["sigma_ss"])
    return TransientMuellerCube(np.asarray(data), sensor.bin_width)


def shift_profiles(profiles, shift_bins):
    """Resample time profiles by a fractional bin shift (two-tap linear).

    profiles: [..., T]; shift_bins broadcastable to profiles.shape[:-1].
    out[t] = (1-f) * v[t - i0] + f * v[t - i0 - 1] where shift = i0 + f.
    Differentiable in shift_bins; samples outside the window read as zero.
    """
    profiles = jnp.asarray(profiles, dtype=jnp.float64)
    t = profiles.shape[-1]
    shift = jnp.broadcast_to(jnp.asarray(shift_bins, dtype=jnp.float64),
                             profiles.shape[:-1])[..., None]
    x = jnp.arange(t, dtype=jnp.float64) - shift  # source (fractional) index
    i0 = jnp.floor(x)
    f = x - i0
    i0 = i0.astype(jnp.int64)

    def gather(idx):
        valid = (idx >= 0) & (idx < t)
        safe = jnp.clip(idx, 0, t - 1)
        return jnp.where(valid,
                         jnp.take_along_axis(profiles, safe, axis=-1), 0.0)

    return (1.0 - f) * gather(i0) + f * gather(i0 + 1)


def analyzer_rows(schedule_angles) -> np.ndarray:
    """[N, 4] first rows of A_i = L(theta4) @ Q(theta3)."""
    ang = jnp.asarray(schedule_angles, dtype=jnp.float64)
    a = (_mueller.element_mueller("lp", ang[..., 3])
         @ _mueller.element_mueller("qwp", ang[..., 2]))
    return a[..., 0, :]


def polarizer_states(schedule_angles, s_illum=S_ILLUM) -> np.ndarray:
    """[N, 4] illumination Stokes states P_i @ s_illum with
    P_i = Q(theta2) @ W(theta1)."""
    ang = jnp.asarray(schedule_angles, dtype=jnp.float64)
    p = (_mueller.element_mueller("qwp", ang[..., 1])
         @ _mueller.element_mueller("hwp", ang[..., 0]))
    return jnp.einsum("...jk,k->...j", p, jnp.asarray(s_illum,
                                                      dtype=jnp.float64))


def gaussian_irf_kernel(irf_sigma: float, bin_width: float) -> np.ndarray:
    """Normalized discrete Gaussian kernel sampled at bin offsets."""
    radius = int(np.ceil(4.0 * irf_sigma / bin_width))
    k = np.arange(-radius, radius + 1) * bin_width
    w = np.exp(-0.5 * (k / irf_sigma) ** 2)
    return w / w.sum()


def convolve_time(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """'Same'-size convolution along the last axis with zero padding."""
    t = data.shape[-1]
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0)] * (data.ndim - 1) + [(radius, radius)]
    padded = np.pad(data, pad)
    out = np.zeros_like(data)
    for j, w in enumerate(kernel):
        out += w * padded[..., j:j + t]
    return out


def capture_noise(shape, noise_sigma: float, seed: int) -> np.ndarray:
    """Additive Gaussian noise [N, H, W, T], per-pixel Philox streams.

    Each pixel draws from a counter-based generator keyed by (seed, pixel
    index), so results are independent of any worker partitioning.
    """
    n, h, w, t = shape
    out = np.empty(shape, dtype=np.float64)
    for pix in range(h * w):
        gen = np.random.Generator(
            np.random.Philox(key=(np.uint64(seed) << np.uint64(20))
                             + np.uint64(pix)))
        out[:, pix // w, pix % w, :] = gen.normal(0.0, 1.0, size=(n, t))
    return noise_sigma * out


def simulate_capture(cube: TransientMuellerCube, scene: Scene,
                     schedule, sensor: SensorConfig,
                     seed: int = 0) -> CaptureStack:
    """Simulate the rotating-ellipsometry capture stack.

    For schedule entry i: I_i(t) = [A_i H(t - 2d/c) P_i s_illum]_0, with the
    sub-bin shift handled by two-tap interpolation, then IRF convolution and
    additive Gaussian noise (noise_sigma, per-pixel seeded).
    """
    angles = np.asarray(schedule.angles, dtype=np.float64)
    a_rows = np.asarray(analyzer_rows(angles))
    p_vecs = np.asarray(polarizer_states(angles))

    profiles = np.einsum("nj,hwtjk,nk->nhwt", a_rows, cube.data, p_vecs,
                         optimize=True)
    shift_bins = 2.0 * scene.depth / (sensor.c * sensor.bin_width)
    if np.any(shift_bins >= sensor.num_bins):
        log.warning("simulate_capture: some pixels shift beyond the time "
                    "window and are truncated")
    shifted = np.asarray(shift_profiles(profiles, shift_bins[None]))

    if sensor.irf_sigma > 0:
        kernel = gaussian_irf_kernel(sensor.irf_sigma, sensor.bin_width)
        shifted = convolve_time(shifted, kernel)

    if sensor.noise_sigma > 0:
        shifted = shifted + capture_noise(shifted.shape, sensor.noise_sigma,
                                          seed)
    return CaptureStack(shifted, schedule_ref=schedule.ref)
