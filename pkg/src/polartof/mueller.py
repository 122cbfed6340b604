"""Stokes-Mueller algebra, optical elements, Fresnel matrices, frame conversions.

Conventions (fixed here, used everywhere in the package):

* Stokes components: s0 = intensity, s1 = horizontal minus vertical linear,
  s2 = +45deg minus -45deg linear, s3 = right minus left circular.
* The frame rotation R(phi) rotates the reference frame by phi about the
  propagation direction (decreasing-phase convention for retarders).
* Axis-aligned elements:
    LP0  = 0.5 * [[1,1,0,0],[1,1,0,0],[0,0,0,0],[0,0,0,0]]
    HWP0 = diag(1, 1, -1, -1)
    QWP0 = [[1,0,0,0],[0,1,0,0],[0,0,0,-1],[0,0,1,0]]
  A rotated element is R(-theta) @ E0 @ R(theta).
* Fresnel matrices are built from the s/p amplitude coefficients of an
  interface with relative refractive index eta (into-medium ratio).  The
  transmission matrix includes the (eta * cos_t / cos_i) radiance factor so
  that [F_R]_00 + [F_T]_00 = 1 at every angle below TIR.

Stokes vectors are length-4 arrays; Mueller matrices are [..., 4, 4] arrays.
Functions accept numpy or jax inputs and broadcast over leading dimensions,
so they can be traced/jitted inside the renderer.  Input validation only
happens for concrete (non-traced) values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

_EPS_DEGENERATE = 1e-9
# lab-frame reference axes used when a polarization frame is otherwise
# undefined (reference vector parallel to the propagation direction)
_LAB_UP = np.array([0.0, 1.0, 0.0])
_LAB_RIGHT = np.array([1.0, 0.0, 0.0])


class PolarizationError(Exception):
    """Base class for polarization-optics errors."""


class ZeroIntensity(PolarizationError):
    """Stokes vector has non-positive intensity where positive is required."""


class InvalidAngle(PolarizationError):
    """Angle outside the valid domain (e.g. incidence >= 90 degrees)."""


class TotalInternalReflection(PolarizationError):
    """Transmission requested beyond the critical angle."""


class DegenerateFrame(PolarizationError):
    """Polarization reference frame is undefined for this geometry."""


def _concrete(*values) -> bool:
    """True when none of the values is a jax tracer (safe to validate)."""
    return not any(isinstance(v, jax.core.Tracer) for v in values)


# ---------------------------------------------------------------------------
# Stokes helpers
# ---------------------------------------------------------------------------

def stokes(s0, s1, s2, s3):
    """Assemble a Stokes vector (stacks along the last axis)."""
    return jnp.stack(jnp.broadcast_arrays(
        jnp.asarray(s0, dtype=jnp.float64),
        jnp.asarray(s1, dtype=jnp.float64),
        jnp.asarray(s2, dtype=jnp.float64),
        jnp.asarray(s3, dtype=jnp.float64)), axis=-1)


def degree_of_polarization(s):
    """DOP = sqrt(s1^2 + s2^2 + s3^2) / s0.  Raises ZeroIntensity for s0 <= 0."""
    s = jnp.asarray(s)
    s0 = s[..., 0]
    if _concrete(s) and bool(jnp.any(s0 <= 0.0)):
        raise ZeroIntensity("degree_of_polarization requires s0 > 0")
    return jnp.linalg.norm(s[..., 1:], axis=-1) / s0


def stokes_is_physical(s, tol: float = 1e-9) -> bool:
    """s0 >= 0 and polarized magnitude within s0 (up to tol)."""
    s = np.asarray(s, dtype=np.float64)
    s0 = s[..., 0]
    pol = np.linalg.norm(s[..., 1:], axis=-1)
    return bool(np.all(s0 >= -tol) and np.all(pol <= s0 * (1.0 + 1e-9) + tol))


def poincare_uniform_states(n: int) -> np.ndarray:
    """n unit-intensity, unit-DOP Stokes states on a Fibonacci sphere lattice.

    Deterministic for fixed n; returns an [n, 4] array.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    phi = golden * k
    out = np.empty((n, 4), dtype=np.float64)
    out[:, 0] = 1.0
    out[:, 1] = r * np.cos(phi)
    out[:, 2] = r * np.sin(phi)
    out[:, 3] = z
    return out


# ---------------------------------------------------------------------------
# Element matrices
# ---------------------------------------------------------------------------

def rotation_mueller(phi):
    """Frame-rotation Mueller matrix R(phi); period pi in Stokes space."""
    phi = jnp.asarray(phi, dtype=jnp.float64)
    c = jnp.cos(2.0 * phi)
    s = jnp.sin(2.0 * phi)
    z = jnp.zeros_like(c)
    o = jnp.ones_like(c)
    rows = [
        jnp.stack([o, z, z, z], axis=-1),
        jnp.stack([z, c, s, z], axis=-1),
        jnp.stack([z, -s, c, z], axis=-1),
        jnp.stack([z, z, z, o], axis=-1),
    ]
    return jnp.stack(rows, axis=-2)


_LP0 = 0.5 * np.array([
    [1.0, 1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
])
_HWP0 = np.diag([1.0, 1.0, -1.0, -1.0])
_QWP0 = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])

_ELEMENTS = {
    "linear_polarizer": _LP0,
    "lp": _LP0,
    "half_wave_plate": _HWP0,
    "hwp": _HWP0,
    "quarter_wave_plate": _QWP0,
    "qwp": _QWP0,
}


def element_mueller(kind: str, theta):
    """Rotated optical element: R(-theta) @ E0 @ R(theta).

    kind is one of "linear_polarizer"/"lp", "half_wave_plate"/"hwp",
    "quarter_wave_plate"/"qwp".
    """
    try:
        e0 = _ELEMENTS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown element kind: {kind!r}") from None
    return rotation_mueller(-jnp.asarray(theta)) @ e0 @ rotation_mueller(theta)


# ---------------------------------------------------------------------------
# Fresnel
# ---------------------------------------------------------------------------

def _fresnel_amplitudes(eta, cos_i):
    """(r_s, r_p, t_s, t_p, cos_t, transmit_valid) from the incidence cosine.

    eta is the relative refractive index of the far medium.  Beyond the
    critical angle cos_t is clamped to 0 and transmit_valid is False there.
    """
    eta = jnp.asarray(eta, dtype=jnp.float64)
    cos_i = jnp.asarray(cos_i, dtype=jnp.float64)
    sin_i2 = jnp.maximum(0.0, 1.0 - cos_i * cos_i)
    sin_t2 = sin_i2 / (eta * eta)
    valid = sin_t2 <= 1.0
    cos_t = jnp.sqrt(jnp.maximum(0.0, 1.0 - sin_t2))
    r_s = (cos_i - eta * cos_t) / (cos_i + eta * cos_t)
    r_p = (eta * cos_i - cos_t) / (eta * cos_i + cos_t)
    t_s = 2.0 * cos_i / (cos_i + eta * cos_t)
    t_p = 2.0 * cos_i / (eta * cos_i + cos_t)
    return r_s, r_p, t_s, t_p, cos_t, valid


def _fresnel_block(a, b, c):
    """[[a,b,0,0],[b,a,0,0],[0,0,c,0],[0,0,0,c]] with broadcasting."""
    z = jnp.zeros_like(a)
    rows = [
        jnp.stack([a, b, z, z], axis=-1),
        jnp.stack([b, a, z, z], axis=-1),
        jnp.stack([z, z, c, z], axis=-1),
        jnp.stack([z, z, z, c], axis=-1),
    ]
    return jnp.stack(rows, axis=-2)


def fresnel_reflect_cos(eta, cos_i):
    """Fresnel reflection Mueller matrix from the incidence cosine."""
    r_s, r_p, _, _, _, _ = _fresnel_amplitudes(eta, cos_i)
    a = 0.5 * (r_s * r_s + r_p * r_p)
    b = 0.5 * (r_s * r_s - r_p * r_p)
    c = r_s * r_p
    return _fresnel_block(a, b, c)


def fresnel_transmit_cos(eta, cos_i):
    """Fresnel transmission Mueller matrix from the incidence cosine.

    Includes the (eta * cos_t / cos_i) radiance factor, so the 00 entry is
    the energy transmittance.  Beyond the critical angle the matrix is zero
    (validated callers raise TotalInternalReflection instead).
    """
    _, _, t_s, t_p, cos_t, valid = _fresnel_amplitudes(eta, cos_i)
    f = jnp.asarray(eta) * cos_t / cos_i
    tau_s = jnp.where(valid, f * t_s * t_s, 0.0)
    tau_p = jnp.where(valid, f * t_p * t_p, 0.0)
    c = jnp.where(valid, f * t_s * t_p, 0.0)
    a = 0.5 * (tau_s + tau_p)
    b = 0.5 * (tau_s - tau_p)
    return _fresnel_block(a, b, c)


def fresnel_mueller(mode: str, eta, theta):
    """Fresnel Mueller matrix; mode is "reflect" or "transmit".

    eta > 0 is the relative refractive index, theta the incidence angle in
    [0, pi/2).  Raises InvalidAngle / TotalInternalReflection on concrete
    out-of-domain inputs.
    """
    if _concrete(eta, theta):
        th = np.asarray(theta, dtype=np.float64)
        if np.any(th < 0.0) or np.any(th >= math.pi / 2):
            raise InvalidAngle("incidence angle must lie in [0, pi/2)")
        if np.any(np.asarray(eta, dtype=np.float64) <= 0.0):
            raise ValueError("eta must be > 0")
    cos_i = jnp.cos(jnp.asarray(theta, dtype=jnp.float64))
    mode = mode.lower()
    if mode == "reflect":
        return fresnel_reflect_cos(eta, cos_i)
    if mode == "transmit":
        if _concrete(eta, theta):
            sin_t2 = np.sin(np.asarray(theta)) ** 2 / np.asarray(eta) ** 2
            if np.any(sin_t2 > 1.0):
                raise TotalInternalReflection(
                    "transmission requested beyond the critical angle")
        return fresnel_transmit_cos(eta, cos_i)
    raise ValueError(f"unknown fresnel mode: {mode!r}")


# ---------------------------------------------------------------------------
# Local geometry and frame conversions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalGeometry:
    """Incident/outgoing directions and surface normal, all unit, away-facing."""

    omega_i: np.ndarray
    omega_o: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        for name in ("omega_i", "omega_o", "n"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, v)
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")

    @classmethod
    def coaxial(cls, omega, n) -> "LocalGeometry":
        omega = np.asarray(omega, dtype=np.float64)
        return cls(omega, omega, np.asarray(n, dtype=np.float64))

    @property
    def h(self) -> np.ndarray:
        s = self.omega_i + self.omega_o
        norm = np.linalg.norm(s)
        if norm < _EPS_DEGENERATE:
            raise DegenerateFrame("halfway vector undefined: omega_i == -omega_o")
        return s / norm

    @property
    def theta_h(self) -> float:
        return float(np.arccos(np.clip(np.dot(self.h, self.n), -1.0, 1.0)))

    @property
    def theta_i(self) -> float:
        return float(np.arccos(np.clip(np.dot(self.n, self.omega_i), -1.0, 1.0)))

    @property
    def theta_o(self) -> float:
        return float(np.arccos(np.clip(np.dot(self.n, self.omega_o), -1.0, 1.0)))

    @property
    def theta_d(self) -> float:
        """Microfacet incidence angle: between omega_i and the halfway vector."""
        return float(np.arccos(np.clip(np.dot(self.h, self.omega_i), -1.0, 1.0)))


def _safe_frame_y(z, ref):
    """Unit y-axis perpendicular to z, in the plane of (ref, z).

    Falls back to the lab up (then right) axis when ref is parallel to z.
    Written with double-where guards so gradients stay finite.
    """
    def perp(v):
        v = jnp.broadcast_to(jnp.asarray(v, dtype=jnp.float64), z.shape)
        p = v - jnp.sum(v * z, axis=-1, keepdims=True) * z
        n2 = jnp.sum(p * p, axis=-1, keepdims=True)
        return p, n2

    p_ref, n2_ref = perp(ref)
    p_up, n2_up = perp(_LAB_UP)
    p_right, n2_right = perp(_LAB_RIGHT)

    eps2 = _EPS_DEGENERATE * _EPS_DEGENERATE
    use_ref = n2_ref > eps2
    use_up = n2_up > eps2

    p_fb = jnp.where(use_up, p_up, p_right)
    n2_fb = jnp.where(use_up, n2_up, n2_right)
    p = jnp.where(use_ref, p_ref, p_fb)
    n2 = jnp.where(use_ref, n2_ref, n2_fb)
    return p / jnp.sqrt(jnp.where(n2 > 0, n2, 1.0))


def frame_rotation_angle(z, ref_from, ref_to):
    """Signed angle about z from the (ref_from, z)-frame y-axis to the
    (ref_to, z)-frame y-axis."""
    z = jnp.asarray(z, dtype=jnp.float64)
    y_from = _safe_frame_y(z, ref_from)
    y_to = _safe_frame_y(z, ref_to)
    cross = jnp.cross(y_from, y_to)
    sin_phi = jnp.sum(cross * z, axis=-1)
    cos_phi = jnp.sum(y_from * y_to, axis=-1)
    return jnp.arctan2(sin_phi, cos_phi)


def coordinate_conversion(geom: LocalGeometry, which: str):
    """Halfway-frame <-> normal-frame Stokes rotation for one leg of transport.

    which = "incident_to_normal" converts the incident beam's halfway-frame
    Stokes vector to the surface-normal frame; "normal_to_outgoing" converts
    the normal frame to the outgoing beam's halfway frame.  When a reference
    vector is parallel to the propagation direction the frame falls back to
    the lab axes (the frame the illumination/analyzer optics live in).
    """
    h = geom.h  # raises DegenerateFrame if omega_i == -omega_o
    which = which.lower()
    if which in ("incident_to_normal", "incident_halfway_to_normal"):
        z = -geom.omega_i
        phi = frame_rotation_angle(z, h, geom.n)
    elif which in ("normal_to_outgoing", "normal_to_outgoing_halfway"):
        z = geom.omega_o
        phi = frame_rotation_angle(z, geom.n, h)
    else:
        raise ValueError(f"unknown conversion: {which!r}")
    return rotation_mueller(phi)


# ---------------------------------------------------------------------------
# Physicality oracle
# ---------------------------------------------------------------------------

def _physicality_probe_states() -> np.ndarray:
    """Fixed 26-state probe set: the 3x3x3 cube directions, normalized; the
    8 corner directions are scaled to DOP 0.5 so partially polarized inputs
    are covered."""
    dirs = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if dx == dy == dz == 0:
                    continue
                dirs.append((dx, dy, dz))
    dirs = np.asarray(dirs, dtype=np.float64)
    unit = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    corner = np.all(dirs != 0, axis=1)
    unit[corner] *= 0.5
    states = np.concatenate([np.ones((26, 1)), unit], axis=1)
    return states


_PROBE_STATES = _physicality_probe_states()


def is_physical(m, tol: float = 1e-9) -> bool:
    """Sampled-cone physicality test for a Mueller matrix.

    Checks that every probe state maps to non-negative intensity with
    DOP <= 1 + tol, and that the 00 entry dominates all entries.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        return False
    if m[0, 0] < np.max(np.abs(m)) - tol:
        return False
    out = _PROBE_STATES @ m.T
    s0 = out[:, 0]
    pol = np.linalg.norm(out[:, 1:], axis=1)
    if np.any(s0 < -tol):
        return False
    return bool(np.all(pol <= (1.0 + tol) * np.maximum(s0, 0.0) + tol))
