"""Temporal-polarimetric BRDF: surface + sub-surface Mueller reflectance.

The reflectance at delay tau is the sum of

* a microfacet surface term: GGX distribution x Smith masking, a bank of
  per-Stokes-channel time Gaussians, and the Fresnel reflection matrix
  evaluated at the microfacet incidence angle (angle between omega_i and
  the halfway vector), and
* a sub-surface term: coordinate conversion into the surface-normal frame,
  Fresnel transmission into the medium, a time-Gaussian depolarization bank
  standing in for all internal transport, Fresnel transmission back out at
  the Snell-refracted exit angle, and conversion back out.

One roughness parameter drives both the GGX distribution and the Smith
masking term.  Time-Gaussian exponents are negative (decaying).  All core
math is expressed in cosines so gradients stay finite at normal incidence;
everything broadcasts over leading (e.g. pixel) dimensions and is jit-safe.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .mueller import (
    PolarizationError,
    _concrete,
    frame_rotation_angle,
    fresnel_reflect_cos,
    fresnel_transmit_cos,
    rotation_mueller,
    LocalGeometry,
)

GRAZING_EPS = 1e-6


class GrazingAngle(PolarizationError):
    """Geometry too close to grazing: cos(theta_i) * cos(theta_o) < 1e-6."""


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGaussBank:
    """Four time-varying Gaussian channels (one per Stokes diagonal).

    a: amplitudes (a[0] >= a[1..3] >= 0), mu: means [s], sigma: stds [s].
    """

    a: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        for name in ("a", "mu", "sigma"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (4,):
                raise ValueError(f"{name} must have shape (4,)")
            object.__setattr__(self, name, v)
        if np.any(self.a < 0.0):
            raise ValueError("amplitudes must be non-negative")
        if np.any(self.sigma <= 0.0):
            raise ValueError("sigmas must be positive")
        if np.any(self.a[1:] > self.a[0] * (1.0 + 1e-12)):
            raise ValueError("a[0] must dominate a[1..3] (non-amplifying "
                             "depolarization)")

    @classmethod
    def zero(cls, sigma: float = 1e-11) -> "TimeGaussBank":
        return cls(np.zeros(4), np.zeros(4), np.full(4, sigma))

    def zero_like(self) -> "TimeGaussBank":
        """Same timing, zero amplitudes."""
        return TimeGaussBank(np.zeros(4), self.mu, self.sigma)


@dataclass(frozen=True)
class Material:
    """Refractive index, roughness, and surface/sub-surface time banks."""

    eta: float
    roughness: float
    surface: TimeGaussBank
    subsurface: TimeGaussBank

    def __post_init__(self):
        if not (1.0 <= self.eta <= 3.0):
            raise ValueError("eta must lie in [1.0, 3.0]")
        if not (0.0 < self.roughness <= 1.0):
            raise ValueError("roughness must lie in (0, 1]")

    def with_bank(self, which: str, bank: TimeGaussBank) -> "Material":
        if which not in ("surface", "subsurface"):
            raise ValueError("which must be 'surface' or 'subsurface'")
        return dataclasses.replace(self, **{which: bank})


# ---------------------------------------------------------------------------
# Microfacet factors
# ---------------------------------------------------------------------------

def ggx_ndf_cos(cos_h, m):
    """GGX normal distribution from cos(theta_h)."""
    cos2 = jnp.square(jnp.asarray(cos_h, dtype=jnp.float64))
    m2 = jnp.square(jnp.asarray(m, dtype=jnp.float64))
    denom = (m2 - 1.0) * cos2 + 1.0
    return m2 / (math.pi * denom * denom)


def ggx_ndf(theta_h, m):
    """GGX normal distribution D(theta_h; m) = m^2 / (pi ((m^2-1) cos^2 + 1)^2)."""
    return ggx_ndf_cos(jnp.cos(jnp.asarray(theta_h, dtype=jnp.float64)), m)


def smith_g1_cos(cos_t, m):
    cos2 = jnp.square(jnp.asarray(cos_t, dtype=jnp.float64))
    tan2 = (1.0 - cos2) / jnp.maximum(cos2, 1e-300)
    m2 = jnp.square(jnp.asarray(m, dtype=jnp.float64))
    return 2.0 / (1.0 + jnp.sqrt(1.0 + m2 * tan2))


def smith_g(theta_i, theta_o, m):
    """Smith masking-shadowing G = G1(theta_i) * G1(theta_o), GGX-matched."""
    ci = jnp.cos(jnp.asarray(theta_i, dtype=jnp.float64))
    co = jnp.cos(jnp.asarray(theta_o, dtype=jnp.float64))
    return smith_g1_cos(ci, m) * smith_g1_cos(co, m)


def time_gauss_profile(a, mu, sigma, tau):
    """Per-channel Gaussian profile a * exp(-(tau-mu)^2 / (2 sigma^2)).

    a, mu, sigma: [..., 4]; tau: scalar or [T].  Returns [..., T, 4].
    """
    tau = jnp.atleast_1d(jnp.asarray(tau, dtype=jnp.float64))
    a = jnp.asarray(a, dtype=jnp.float64)[..., None, :]
    mu = jnp.asarray(mu, dtype=jnp.float64)[..., None, :]
    sigma = jnp.asarray(sigma, dtype=jnp.float64)[..., None, :]
    x = tau[..., :, None] - mu
    return a * jnp.exp(-0.5 * jnp.square(x / sigma))


def time_gauss_diag(bank: TimeGaussBank, tau):
    """Diagonal depolarization Mueller matrix D(tau); [T, 4, 4] or [4, 4]."""
    g = time_gauss_profile(bank.a, bank.mu, bank.sigma, tau)
    out = g[..., :, None] * jnp.eye(4)
    if jnp.ndim(jnp.asarray(tau)) == 0:
        out = out[..., 0, :, :]
    return out


# ---------------------------------------------------------------------------
# Geometry-dependent factors (time-independent parts)
# ---------------------------------------------------------------------------

def geometry_terms(omega_i, omega_o, n):
    """Cosines and frame angles used by the BRDF; broadcasts over pixels.

    Returns a dict with cos_i, cos_o, cos_hn (halfway . normal), cos_d
    (halfway . omega_i, the microfacet incidence cosine), and the two
    halfway<->normal frame rotation angles phi_in / phi_no.  The halfway
    direction falls back to the normal when omega_i == -omega_o so the
    function stays traceable; validated entry points reject that case.
    """
    wi = jnp.asarray(omega_i, dtype=jnp.float64)
    wo = jnp.asarray(omega_o, dtype=jnp.float64)
    nn = jnp.asarray(n, dtype=jnp.float64)
    wi, wo, nn = jnp.broadcast_arrays(wi, wo, nn)

    hsum = wi + wo
    h2 = jnp.sum(hsum * hsum, axis=-1, keepdims=True)
    ok = h2 > 1e-18
    h = jnp.where(ok, hsum, nn) / jnp.sqrt(jnp.where(ok, h2, 1.0))

    cos_i = jnp.sum(nn * wi, axis=-1)
    cos_o = jnp.sum(nn * wo, axis=-1)
    cos_hn = jnp.clip(jnp.sum(h * nn, axis=-1), -1.0, 1.0)
    cos_d = jnp.clip(jnp.sum(h * wi, axis=-1), 0.0, 1.0)
    phi_in = frame_rotation_angle(-wi, h, nn)
    phi_no = frame_rotation_angle(wo, nn, h)
    return {
        "cos_i": cos_i, "cos_o": cos_o, "cos_hn": cos_hn, "cos_d": cos_d,
        "phi_in": phi_in, "phi_no": phi_no,
    }


def surface_factors(geom_terms, eta, m):
    """(prefactor, F_R) of the surface term; grazing pixels get prefactor 0."""
    cos_i = geom_terms["cos_i"]
    cos_o = geom_terms["cos_o"]
    denom = cos_i * cos_o
    safe = denom >= GRAZING_EPS
    d = ggx_ndf_cos(geom_terms["cos_hn"], m)
    g = smith_g1_cos(cos_i, m) * smith_g1_cos(cos_o, m)
    pref = jnp.where(safe, d * g / (4.0 * jnp.where(safe, denom, 1.0)), 0.0)
    f_r = fresnel_reflect_cos(eta, jnp.maximum(geom_terms["cos_d"], 1e-12))
    return pref, f_r


def subsurface_factors(geom_terms, eta):
    """(outer, inner) 4x4 chains around the sub-surface time bank.

    outer = C_{n->o} @ F_T^out, inner = F_T^in @ C_{i->n}; the outgoing
    transmission is evaluated at the Snell-refracted internal angle.
    """
    eta = jnp.asarray(eta, dtype=jnp.float64)
    cos_i = jnp.maximum(geom_terms["cos_i"], 1e-12)
    cos_o = jnp.maximum(geom_terms["cos_o"], 1e-12)
    f_t_in = fresnel_transmit_cos(eta, cos_i)
    sin_t2 = (1.0 - cos_o * cos_o) / (eta * eta)
    cos_t = jnp.sqrt(jnp.maximum(0.0, 1.0 - sin_t2))
    f_t_out = fresnel_transmit_cos(1.0 / eta, cos_t)
    outer = rotation_mueller(geom_terms["phi_no"]) @ f_t_out
    inner = f_t_in @ rotation_mueller(geom_terms["phi_in"])
    return outer, inner


# ---------------------------------------------------------------------------
# Full reflectance
# ---------------------------------------------------------------------------

def brdf_cube(tau, omega_i, omega_o, n, eta, m,
              a_s, mu_s, sigma_s, a_ss, mu_ss, sigma_ss,
              cosine: bool = False):
    """Temporal-polarimetric reflectance over a delay grid, fully batched.

    tau: [T] delays; direction/normal arrays [..., 3]; eta, m [...] scalars;
    bank parameter arrays [..., 4].  Returns [..., T, 4, 4].  Grazing pixels
    (cos_i * cos_o < 1e-6) render as zero.  With cosine=True the result is
    scaled by cos(theta_i) (the transport matrix of the rendering equation).
    """
    gt = geometry_terms(omega_i, omega_o, n)
    pref, f_r = surface_factors(gt, eta, m)
    outer, inner = subsurface_factors(gt, eta)

    g_s = time_gauss_profile(a_s, mu_s, sigma_s, tau)      # [..., T, 4]
    g_ss = time_gauss_profile(a_ss, mu_ss, sigma_ss, tau)

    m_surf = (pref[..., None, None, None]
              * g_s[..., :, None] * f_r[..., None, :, :])
    m_sub = jnp.einsum("...ik,...tk,...kj->...tij", outer, g_ss, inner)

    safe = (gt["cos_i"] * gt["cos_o"] >= GRAZING_EPS)
    out = jnp.where(safe[..., None, None, None], m_surf + m_sub, 0.0)
    if cosine:
        out = out * gt["cos_i"][..., None, None, None]
    return out


def _check_geom(geom: LocalGeometry):
    cos_i = float(np.dot(geom.n, geom.omega_i))
    cos_o = float(np.dot(geom.n, geom.omega_o))
    if cos_i * cos_o < GRAZING_EPS:
        raise GrazingAngle(
            f"cos_i*cos_o = {cos_i * cos_o:.3e} below {GRAZING_EPS}")


def _material_arrays(mat: Material):
    return (mat.eta, mat.roughness,
            mat.surface.a, mat.surface.mu, mat.surface.sigma,
            mat.subsurface.a, mat.subsurface.mu, mat.subsurface.sigma)


def _squeeze_time(out, tau):
    if jnp.ndim(jnp.asarray(tau)) == 0:
        return out[..., 0, :, :]
    return out


def surface_term(tau, geom: LocalGeometry, mat: Material):
    """Microfacet surface reflectance at delay tau; [T, 4, 4] or [4, 4]."""
    _check_geom(geom)
    gt = geometry_terms(geom.omega_i, geom.omega_o, geom.n)
    pref, f_r = surface_factors(gt, mat.eta, mat.roughness)
    g = time_gauss_profile(mat.surface.a, mat.surface.mu, mat.surface.sigma,
                           tau)
    out = pref * g[..., :, None] * f_r[..., None, :, :]
    return _squeeze_time(out, tau)


def subsurface_term(tau, geom: LocalGeometry, mat: Material):
    """Sub-surface reflectance at delay tau; [T, 4, 4] or [4, 4]."""
    _check_geom(geom)
    gt = geometry_terms(geom.omega_i, geom.omega_o, geom.n)
    outer, inner = subsurface_factors(gt, mat.eta)
    g = time_gauss_profile(mat.subsurface.a, mat.subsurface.mu,
                           mat.subsurface.sigma, tau)
    out = jnp.einsum("ik,...tk,kj->...tij", outer, g, inner)
    return _squeeze_time(out, tau)


def brdf(tau, geom: LocalGeometry, mat: Material):
    """Full reflectance: surface_term + subsurface_term."""
    return surface_term(tau, geom, mat) + subsurface_term(tau, geom, mat)


def cosine_scaled(tau, geom: LocalGeometry, mat: Material):
    """cos(theta_i) * brdf: the transport matrix of the rendering equation."""
    cos_i = float(np.dot(geom.n, geom.omega_i))
    return cos_i * brdf(tau, geom, mat)
