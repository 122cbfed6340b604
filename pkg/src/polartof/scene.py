"""Scenes, sensor configuration, and synthetic scene presets.

Camera model: a pinhole at the origin looking along +z.  Per-pixel rays are
computed from a configurable field of view, so the coaxial direction varies
slightly per pixel.  `Scene.view_dirs` stores the unit direction from the
surface point back to the camera, so front-facing means n . view_dir > 0 and
the surface point sits at -depth * view_dir.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .brdf import Material, TimeGaussBank

SPEED_OF_LIGHT = 299792458.0


class InvalidParam(ValueError):
    """Synthetic-scene parameter outside its documented range."""


@dataclass(frozen=True)
class SensorConfig:
    """Time-binning sensor model: bin width, window length, noise, IRF."""

    bin_width: float = 25e-12
    num_bins: int = 512
    noise_sigma: float = 1e-4
    irf_sigma: float = 0.0
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.bin_width <= 0 or self.num_bins < 1:
            raise InvalidParam("bin_width must be > 0 and num_bins >= 1")
        if self.noise_sigma < 0 or self.irf_sigma < 0:
            raise InvalidParam("noise_sigma and irf_sigma must be >= 0")

    @property
    def window(self) -> float:
        """Total time window in seconds."""
        return self.bin_width * self.num_bins

    def bin_centers(self) -> np.ndarray:
        return (np.arange(self.num_bins) + 0.5) * self.bin_width


@dataclass(frozen=True)
class Scene:
    """Per-pixel geometry plus per-cluster materials.

    depth: [H, W] travel distance in meters; normals: [H, W, 3] unit;
    cluster_id: [H, W] int indices into materials; view_dirs: [H, W, 3]
    unit directions from the surface toward the camera.
    """

    depth: np.ndarray
    normals: np.ndarray
    cluster_id: np.ndarray
    materials: tuple
    view_dirs: np.ndarray

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        normals = np.asarray(self.normals, dtype=np.float64)
        cluster = np.asarray(self.cluster_id, dtype=np.int64)
        dirs = np.asarray(self.view_dirs, dtype=np.float64)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "cluster_id", cluster)
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "view_dirs", dirs)
        h, w = depth.shape
        if normals.shape != (h, w, 3) or dirs.shape != (h, w, 3):
            raise InvalidParam("normals/view_dirs must be [H, W, 3]")
        if cluster.shape != (h, w):
            raise InvalidParam("cluster_id must be [H, W]")
        if np.any(depth <= 0):
            raise InvalidParam("depth must be positive everywhere")
        if np.any(cluster < 0) or np.any(cluster >= len(self.materials)):
            raise InvalidParam("cluster_id out of range")
        if np.max(np.abs(np.linalg.norm(normals, axis=-1) - 1.0)) > 1e-6:
            raise InvalidParam("normals must be unit length")
        if np.any(np.sum(normals * dirs, axis=-1) <= 0):
            raise InvalidParam("scene must be front-facing (n . view_dir > 0)")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def material_arrays(self) -> dict:
        """Per-cluster material parameters stacked into arrays (index k)."""
        mats = self.materials
        return {
            "eta": np.array([m.eta for m in mats]),
            "m": np.array([m.roughness for m in mats]),
            "a_s": np.stack([m.surface.a for m in mats]),
            "mu_s": np.stack([m.surface.mu for m in mats]),
            "sigma_s": np.stack([m.surface.sigma for m in mats]),
            "a_ss": np.stack([m.subsurface.a for m in mats]),
            "mu_ss": np.stack([m.subsurface.mu for m in mats]),
            "sigma_ss": np.stack([m.subsurface.sigma for m in mats]),
        }

    def pixel_material_arrays(self) -> dict:
        """Material parameters gathered per pixel via the cluster map."""
        arrs = self.material_arrays()
        return {k: v[self.cluster_id] for k, v in arrs.items()}

    def with_materials(self, materials) -> "Scene":
        return replace(self, materials=tuple(materials))


def camera_rays(width: int, height: int, fov_deg: float = 30.0) -> np.ndarray:
    """[H, W, 3] unit ray directions from the pinhole into the scene (+z)."""
    if width < 1 or height < 1 or not (0.0 < fov_deg < 180.0):
        raise InvalidParam("bad camera parameters")
    half = math.tan(math.radians(fov_deg) / 2.0)
    xs = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    ys = (np.arange(height) + 0.5) / height * 2.0 - 1.0
    x, y = np.meshgrid(xs * half, ys * half)
    rays = np.stack([x, y, np.ones_like(x)], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def default_materials() -> list[Material]:
    """Two glossy, mildly translucent materials used by the scene presets.

    Surface banks peak ~2 time bins after arrival; sub-surface banks are
    slower, weaker per bin, and progressively depolarizing.
    """
    ps = 1e-12
    mat_a = Material(
        eta=1.45, roughness=0.3,
        surface=TimeGaussBank(
            a=np.array([4.0, 3.4, 3.2, 2.6]),
            mu=np.array([50.0, 55.0, 55.0, 60.0]) * ps,
            sigma=np.array([20.0, 22.0, 22.0, 26.0]) * ps),
        subsurface=TimeGaussBank(
            a=np.array([3.0e-3, 1.2e-3, 1.0e-3, 4.0e-4]),
            mu=np.array([500.0, 540.0, 560.0, 610.0]) * ps,
            sigma=np.array([150.0, 160.0, 160.0, 180.0]) * ps),
    )
    mat_b = Material(
        eta=1.7, roughness=0.45,
        surface=TimeGaussBank(
            a=np.array([3.0, 2.4, 2.3, 1.7]),
            mu=np.array([50.0, 52.0, 52.0, 58.0]) * ps,
            sigma=np.array([18.0, 20.0, 20.0, 24.0]) * ps),
        subsurface=TimeGaussBank(
            a=np.array([2.0e-3, 7.0e-4, 6.0e-4, 2.5e-4]),
            mu=np.array([700.0, 730.0, 750.0, 800.0]) * ps,
            sigma=np.array([200.0, 210.0, 210.0, 230.0]) * ps),
    )
    return [mat_a, mat_b]


def make_synthetic_scene(kind: str, *, width: int = 32, height: int = 32,
                         fov_deg: float = 30.0, distance: float = 0.35,
                         tilt_deg: float = 30.0, radius: float = 0.15,
                         blob_radius_frac: float = 0.3,
                         materials=None) -> Scene:
    """Analytic scene presets: "plane", "sphere", or "two_material_blobs".

    Depth and normals come from the analytic surface; the cluster map comes
    from the construction (not from clustering).
    """
    kind = kind.lower()
    rays = camera_rays(width, height, fov_deg)
    if materials is None:
        materials = default_materials()

    if kind == "plane":
        mats = materials[:1]
        depth, normals = _plane_geometry(rays, distance, tilt_deg)
        cluster = np.zeros((height, width), dtype=np.int64)
    elif kind == "sphere":
        mats = materials[:1]
        depth, normals = _sphere_geometry(rays, distance, radius)
        cluster = np.zeros((height, width), dtype=np.int64)
    elif kind == "two_material_blobs":
        if len(materials) < 2:
            raise InvalidParam("two_material_blobs needs two materials")
        mats = materials[:2]
        depth, normals = _plane_geometry(rays, distance, tilt_deg)
        yy, xx = np.mgrid[0:height, 0:width]
        r = np.hypot((xx - (width - 1) / 2.0) / width,
                     (yy - (height - 1) / 2.0) / height)
        cluster = (r <= blob_radius_frac).astype(np.int64)
        if cluster.min() == cluster.max():
            raise InvalidParam("blob_radius_frac leaves a cluster empty")
    else:
        raise InvalidParam(f"unknown scene kind: {kind!r}")

    return Scene(depth=depth, normals=normals, cluster_id=cluster,
                 materials=mats, view_dirs=-rays)


def _plane_geometry(rays, distance, tilt_deg):
    if distance <= 0:
        raise InvalidParam("distance must be positive")
    alpha = math.radians(tilt_deg)
    # plane normal tilted about the x axis, facing the camera (n_z < 0)
    n_plane = np.array([0.0, math.sin(alpha), -math.cos(alpha)])
    p0 = np.array([0.0, 0.0, distance])
    denom = rays @ n_plane
    if np.any(denom >= -1e-9):
        raise InvalidParam("tilt too steep: plane not front-facing everywhere")
    depth = (p0 @ n_plane) / denom
    if np.any(depth <= 0):
        raise InvalidParam("plane behind the camera for some pixels")
    normals = np.broadcast_to(n_plane, rays.shape).copy()
    return depth, normals


def _sphere_geometry(rays, center_z, radius):
    if radius <= 0 or center_z <= radius:
        raise InvalidParam("need 0 < radius < center_z")
    center = np.array([0.0, 0.0, center_z])
    b = rays @ center
    disc = b * b - (center_z * center_z - radius * radius)
    if np.any(disc <= 0):
        raise InvalidParam("sphere does not cover the field of view")
    depth = b - np.sqrt(disc)
    points = depth[..., None] * rays
    normals = points - center
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return depth, normals
