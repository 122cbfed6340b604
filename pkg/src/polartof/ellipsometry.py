"""Rotating-ellipsometry measurement model, inversion, and learned schedules.

A schedule entry is four rotation angles (HWP and QWP on the illumination
side, QWP and LP on the analyzer side).  Each entry linearizes the capture
I = [A H P s_illum]_0 into a 16-vector row over the Mueller entries of H
(row-major vec), so per-voxel Mueller recovery is a single shared
pseudo-inverse applied to every spatio-temporal pixel.

Schedules are learned by gradient descent on the noisy reconstruction error
of a fixed training set of random physical Mueller matrices, starting from
angles whose illumination/analyzer states tile the Poincare sphere.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from . import numerics
from .mueller import (element_mueller, poincare_uniform_states,
                      rotation_mueller)
from .render import (CaptureStack, S_ILLUM, TransientMuellerCube,
                     analyzer_rows, polarizer_states)


class RankDeficient(Exception):
    """Measurement matrix is numerically rank deficient."""


class RankDeficientWarning(RuntimeWarning):
    """Reconstruction proceeded with a rank-deficient measurement matrix."""


class ShapeMismatch(ValueError):
    """Capture count does not match the schedule length."""


@dataclass(frozen=True)
class PolarimetricSchedule:
    """N quadruples of rotation angles (radians): HWP, QWP | QWP, LP."""

    angles: np.ndarray
    name: str = ""

    def __post_init__(self):
        ang = np.atleast_2d(np.asarray(self.angles, dtype=np.float64))
        if ang.ndim != 2 or ang.shape[1] != 4 or ang.shape[0] < 1:
            raise ValueError("angles must be [N, 4]")
        if not np.all(np.isfinite(ang)):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "angles", ang)

    @property
    def n(self) -> int:
        return self.angles.shape[0]

    @property
    def ref(self) -> str:
        if self.name:
            return self.name
        digest = hashlib.sha256(self.angles.tobytes()).hexdigest()[:12]
        return f"schedule-{digest}"

    def to_text(self) -> str:
        """Serialize as a structured-text block (angles in degrees)."""
        lines = ["[schedule]", "units: deg"]
        if self.name:
            lines.append(f"name: {self.name}")
        for row in np.degrees(self.angles):
            lines.append("entry: " + " ".join(f"{v:.12g}" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolarimetricSchedule":
        units = None
        name = ""
        entries = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line or line == "[schedule]":
                continue
            key, _, value = line.partition(":")
            key = key.strip()
            value = value.strip()
            if key == "units":
                units = value
            elif key == "name":
                name = value
            elif key == "entry":
                entries.append([float(v) for v in value.split()])
            else:
                raise ValueError(f"unknown schedule key: {key!r}")
        if units not in ("deg", "rad"):
            raise ValueError("schedule must declare units: deg or rad")
        ang = np.asarray(entries, dtype=np.float64)
        if units == "deg":
            ang = np.radians(ang)
        return cls(ang, name=name)


# ---------------------------------------------------------------------------
# Measurement matrix
# ---------------------------------------------------------------------------

def measurement_row(entry, s_illum=S_ILLUM):
    """16-vector r with r . vec(H) = [A H P s_illum]_0 (row-major vec)."""
    entry = jnp.asarray(entry, dtype=jnp.float64)
    a = analyzer_rows(entry)
    p = polarizer_states(entry, s_illum)
    return jnp.reshape(a[..., :, None] * p[..., None, :],
                       entry.shape[:-1] + (16,))


def measurement_matrix(schedule, s_illum=S_ILLUM):
    """[N, 16] stacked measurement rows for a schedule (or angle array)."""
    ang = schedule.angles if isinstance(schedule, PolarimetricSchedule) \
        else schedule
    return measurement_row(jnp.asarray(ang, dtype=jnp.float64), s_illum)


def condition_number(schedule, s_illum=S_ILLUM) -> float:
    """Ratio of largest to smallest singular value of the measurement matrix.

    Raises RankDeficient when the smallest singular value is below
    1e-12 x the largest.  Requires N >= 16.
    """
    m = np.asarray(measurement_matrix(schedule, s_illum))
    if m.shape[0] < 16:
        raise ValueError("condition_number requires N >= 16")
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] < 1e-12 * s[0]:
        raise RankDeficient(
            f"singular values span {s[0]:.3e} .. {s[-1]:.3e}")
    return float(s[0] / s[-1])


def reconstruct_mueller(captures: CaptureStack, schedule: PolarimetricSchedule,
                        bin_width: float = 25e-12, s_illum=S_ILLUM,
                        cutoff: float = 1e-12) -> TransientMuellerCube:
    """Per-voxel minimum-norm least-squares Mueller recovery.

    One pseudo-inverse of the [N, 16] measurement matrix is computed and
    applied to every spatio-temporal voxel.  Rank deficiency produces a
    RankDeficientWarning (minimum-norm solution), not an error.
    """
    if captures.n != schedule.n:
        raise ShapeMismatch(
            f"captures N={captures.n} vs schedule N={schedule.n}")
    m = np.asarray(measurement_matrix(schedule, s_illum))
    s = np.linalg.svd(m, compute_uv=False)
    if min(m.shape) > 0 and (s[-1] < cutoff * s[0] or m.shape[0] < 16):
        warnings.warn("measurement matrix is rank deficient; returning the "
                      "minimum-norm solution", RankDeficientWarning)
    p = numerics.pinv(m, cutoff)  # [16, N]
    vec = np.einsum("mn,nhwt->hwtm", p, captures.data, optimize=True)
    data = vec.reshape(vec.shape[:3] + (4, 4))
    return TransientMuellerCube(data, bin_width)


# ---------------------------------------------------------------------------
# Schedule construction
# ---------------------------------------------------------------------------

def _angles_for_polarizer_state(target) -> tuple[float, float]:
    """HWP/QWP angles steering horizontal laser light to a unit-DOP state.

    The HWP sets the linear orientation, the QWP the ellipticity:
    psi = atan2(s2, s1)/2, chi = asin(s3)/2, theta_qwp = psi,
    theta_hwp = (psi + chi)/2.
    """
    s1, s2, s3 = float(target[1]), float(target[2]), float(target[3])
    psi = 0.5 * np.arctan2(s2, s1)
    chi = 0.5 * np.arcsin(np.clip(s3, -1.0, 1.0))
    return (psi + chi) / 2.0, psi


def _angles_for_analyzer_state(target) -> tuple[float, float]:
    """QWP/LP angles making the analyzer row 0.5 * [1, s1, s2, s3]."""
    s1, s2, s3 = float(target[1]), float(target[2]), float(target[3])
    psi = 0.5 * np.arctan2(s2, s1)
    chi = 0.5 * np.arcsin(np.clip(s3, -1.0, 1.0))
    return psi, psi - chi


def uniform_schedule(n: int) -> PolarimetricSchedule:
    """Closed-form schedule whose illumination and analyzer states tile the
    Poincare sphere (Fibonacci lattice); deterministic.

    The analyzer states reuse the same lattice under a fixed scrambled
    pairing: pairings that are a smooth function of the illumination state
    (identity, reversal, any global rotation) cap the measurement matrix at
    rank <= 10, while a scrambled pairing reaches the full rank 16.
    """
    targets_p = poincare_uniform_states(n)
    perm = np.random.default_rng(0x5EED).permutation(n)
    targets_a = targets_p[perm]
    angles = np.empty((n, 4), dtype=np.float64)
    for i in range(n):
        angles[i, 0], angles[i, 1] = _angles_for_polarizer_state(targets_p[i])
        angles[i, 2], angles[i, 3] = _angles_for_analyzer_state(targets_a[i])
    return PolarimetricSchedule(angles, name=f"uniform-n{n}")


def random_schedule(n: int, seed: int) -> PolarimetricSchedule:
    rng = np.random.default_rng(seed)
    return PolarimetricSchedule(rng.uniform(0.0, np.pi, size=(n, 4)),
                                name=f"random-n{n}-seed{seed}")


def _linear_retarder(delta, theta):
    c, s = np.cos(delta), np.sin(delta)
    e0 = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0],
                   [0, 0, c, -s], [0, 0, s, c]])
    return np.asarray(rotation_mueller(-theta)) @ e0 \
        @ np.asarray(rotation_mueller(theta))


def _diattenuator(px, py, theta):
    a = 0.5 * (px * px + py * py)
    b = 0.5 * (px * px - py * py)
    c = px * py
    e0 = np.array([[a, b, 0, 0], [b, a, 0, 0], [0, 0, c, 0], [0, 0, 0, c]])
    return np.asarray(rotation_mueller(-theta)) @ e0 \
        @ np.asarray(rotation_mueller(theta))


def random_physical_mueller(rng: np.random.Generator) -> np.ndarray:
    """Random physical Mueller matrix: amplitude x retarder x diattenuator x
    depolarizer x retarder, each factor physical by construction."""
    amp = rng.uniform(0.2, 1.0)
    ret1 = _linear_retarder(rng.uniform(0, 2 * np.pi), rng.uniform(0, np.pi))
    ret2 = _linear_retarder(rng.uniform(0, 2 * np.pi), rng.uniform(0, np.pi))
    dia = _diattenuator(rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0),
                        rng.uniform(0, np.pi))
    dep = np.diag(np.concatenate([[1.0], rng.uniform(0.1, 1.0, size=3)]))
    return amp * ret1 @ dia @ dep @ ret2


def learn_schedule(n: int, iters: int, seed: int, *, lr: float = 0.02,
                   train_size: int = 256, noise_sigma: float = 1e-4,
                   init: str = "uniform", return_history: bool = False,
                   s_illum=S_ILLUM):
    """Gradient-learned acquisition schedule, uniform Poincare initialization.

    Minimizes E || pinv(M) (M vec(H) + eps) - vec(H) ||^2 over a fixed
    training set of random physical Mueller matrices with additive noise of
    std noise_sigma; keeps the best iterate.  Deterministic given seed.

    With return_history, also returns an [iters, 2] array of
    (loss, best_so_far) per iteration.
    """
    if n < 16:
        raise ValueError("learn_schedule requires N >= 16")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if init == "uniform":
        angles0 = uniform_schedule(n).angles
    elif init == "zeros":
        angles0 = np.zeros((n, 4))
    else:
        raise ValueError(f"unknown init: {init!r}")

    rng = np.random.default_rng(seed)
    train = np.stack([random_physical_mueller(rng).reshape(16)
                      for _ in range(train_size)])
    noise = noise_sigma * rng.standard_normal((train_size, n))
    train_j = jnp.asarray(train)
    noise_j = jnp.asarray(noise)
    s_illum_j = jnp.asarray(s_illum, dtype=jnp.float64)

    def loss_fn(angles):
        m = measurement_row(angles, s_illum_j)          # [n, 16]
        meas = train_j @ m.T + noise_j                  # [B, n]
        p = jnp.linalg.pinv(m, rtol=1e-12)              # [16, n]
        rec = meas @ p.T
        return jnp.mean(jnp.sum((rec - train_j) ** 2, axis=1))

    value_and_grad = jax.jit(jax.value_and_grad(loss_fn))

    params = angles0.reshape(-1).copy()
    state = numerics.AdamState.init(params.size, lr=lr)
    best_loss = float(loss_fn(jnp.asarray(angles0)))
    best = params.copy()
    history = []
    for _ in range(iters):
        val, grad = value_and_grad(jnp.asarray(params.reshape(n, 4)))
        state, params = numerics.adam_step(state, params,
                                           np.asarray(grad).reshape(-1))
        val = float(val)
        if val < best_loss:
            best_loss = val
            best = params.copy()
        history.append((val, best_loss))
    # keep whichever of the final/best iterates evaluates lower
    final_loss = float(loss_fn(jnp.asarray(params.reshape(n, 4))))
    if final_loss < best_loss:
        best = params.copy()
    schedule = PolarimetricSchedule(best.reshape(n, 4),
                                    name=f"learned-n{n}-seed{seed}")
    if return_history:
        return schedule, np.asarray(history)
    return schedule
