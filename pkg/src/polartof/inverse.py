"""All-photon scene reconstruction from measured Mueller cubes.

Pipeline: per-pixel depth from peak finding on the intensity channel,
normals from the unprojected depth map, a k-means material cluster map from
time-averaged intensity, then joint first-order refinement (Adam) of depth,
normals, and per-cluster material parameters against the measured cube.
The optimizer runs in unconstrained coordinates; `constrain` maps them to
physical ranges with vector normalization and scaled sigmoids.

The measured cube lives in capture-time coordinates; the forward model
renders in delay coordinates and applies the differentiable 2d/c shift, so
depth receives gradients through the data term.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree

from . import numerics
from .brdf import Material, TimeGaussBank, brdf_cube
from .render import TransientMuellerCube, shift_profiles
from .scene import Scene, SensorConfig

log = logging.getLogger("polartof")

# the initializer anchors the surface-response delay at this many bins;
# peak-found arrival times are corrected by the same amount so depth and
# surface-bank means start mutually consistent
SURFACE_DELAY_ANCHOR_BINS = 2.0

_L1_EPS = 1e-8


class NoPeak(Exception):
    """No histogram bin exceeds the noise floor."""


class EmptyCluster(Exception):
    """k-means produced an empty cluster that could not be reseeded."""


# ---------------------------------------------------------------------------
# Initialization: peak finding, normals, clustering
# ---------------------------------------------------------------------------

def _noise_floor(hist: np.ndarray) -> float:
    """3x the robust (MAD-based) std of the last quarter of the histogram."""
    tail = hist[..., -max(1, hist.shape[-1] // 4):]
    mad = np.median(np.abs(tail - np.median(tail)))
    return 3.0 * 1.4826 * float(mad)


def _parabolic_peak(hist: np.ndarray) -> float:
    """Fractional argmax bin index via parabolic refinement (ties: earliest)."""
    k = int(np.argmax(hist))
    if 0 < k < len(hist) - 1:
        y0, y1, y2 = hist[k - 1], hist[k], hist[k + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0:
            delta = 0.5 * (y0 - y2) / denom
            return k + float(np.clip(delta, -0.5, 0.5))
    return float(k)


def peak_find(histogram: np.ndarray, sensor: SensorConfig) -> float:
    """Depth from the temporal intensity histogram: d = c * t_peak / 2.

    t_peak is the parabolic sub-bin refinement of the argmax bin center.
    Raises NoPeak when no bin exceeds the noise floor.
    """
    hist = np.asarray(histogram, dtype=np.float64)
    if hist.ndim != 1:
        raise ValueError("peak_find expects a single [T] histogram")
    peak = float(np.max(hist))
    if peak <= 0.0 or peak <= _noise_floor(hist):
        raise NoPeak("no bin exceeds the noise floor")
    t_peak = (_parabolic_peak(hist) + 0.5) * sensor.bin_width
    return sensor.c * t_peak / 2.0


def peak_find_map(histograms: np.ndarray,
                  sensor: SensorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel peak_find over an [H, W, T] stack.

    Returns (depth, valid); pixels without a peak get depth NaN and
    valid False.
    """
    hists = np.asarray(histograms, dtype=np.float64)
    h, w, _ = hists.shape
    depth = np.full((h, w), np.nan)
    valid = np.zeros((h, w), dtype=bool)
    for i in range(h):
        for j in range(w):
            try:
                depth[i, j] = peak_find(hists[i, j], sensor)
                valid[i, j] = True
            except NoPeak:
                pass
    return depth, valid


def normals_from_depth(depth: np.ndarray, view_dirs: np.ndarray,
                       valid: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel normals from central differences of the unprojected points.

    view_dirs point from the surface to the camera, so the 3D point is
    -depth * view_dir.  Border pixels use one-sided differences; normals are
    oriented toward the camera.  Invalid pixels get a copy of the nearest
    valid estimate's orientation fallback (-view_dir).
    """
    depth = np.asarray(depth, dtype=np.float64)
    points = -depth[..., None] * np.asarray(view_dirs, dtype=np.float64)

    def diff(arr, axis):
        out = np.empty_like(arr)
        sl = [slice(None)] * arr.ndim
        lo, hi, mid_lo, mid_hi = (list(sl) for _ in range(4))
        mid = list(sl)
        mid[axis] = slice(1, -1)
        mid_lo[axis] = slice(0, -2)
        mid_hi[axis] = slice(2, None)
        out[tuple(mid)] = (arr[tuple(mid_hi)] - arr[tuple(mid_lo)]) * 0.5
        lo[axis] = 0
        mid_lo[axis] = 1
        out[tuple(lo)] = arr[tuple(mid_lo)] - arr[tuple(lo)]
        hi[axis] = -1
        mid_hi[axis] = -2
        out[tuple(hi)] = arr[tuple(hi)] - arr[tuple(mid_hi)]
        return out

    tx = diff(points, 1)
    ty = diff(points, 0)
    n = np.cross(tx, ty)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    bad = (norm[..., 0] < 1e-12) | ~np.all(np.isfinite(n), axis=-1)
    n = np.where(bad[..., None], view_dirs, n / np.where(norm > 0, norm, 1.0))
    # orient toward the camera
    flip = np.sum(n * view_dirs, axis=-1) < 0
    n = np.where(flip[..., None], -n, n)
    if valid is not None:
        n = np.where(valid[..., None], n, view_dirs)
    return n


def kmeans_cluster(values: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Scalar k-means (k-means++ seeding, Lloyd) over a per-pixel map.

    Returns integer labels ordered by ascending centroid value, so the
    labeling is a function of the values alone.  Empty clusters are reseeded
    to the farthest point.
    """
    vals = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite")
    if k < 1:
        raise ValueError("k must be >= 1")
    flat = vals.reshape(-1)
    rng = np.random.default_rng(seed)

    # k-means++ seeding on the scalar values
    centers = [flat[rng.integers(len(flat))]]
    while len(centers) < k:
        d2 = np.min((flat[:, None] - np.asarray(centers)) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(flat[rng.integers(len(flat))])
            continue
        centers.append(flat[rng.choice(len(flat), p=d2 / total)])
    centers = np.asarray(centers, dtype=np.float64)

    labels = np.zeros(len(flat), dtype=np.int64)
    for _ in range(100):
        dist = np.abs(flat[:, None] - centers[None, :])
        new_labels = np.argmin(dist, axis=1)
        for c in range(k):
            sel = new_labels == c
            if np.any(sel):
                centers[c] = flat[sel].mean()
            else:
                far = np.argmax(np.min(dist, axis=1))
                centers[c] = flat[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    order = np.argsort(centers)
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return remap[labels].reshape(vals.shape)


# ---------------------------------------------------------------------------
# Constrained parameterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneParams:
    """Constrained (physical) scene parameters.

    depth/normals are per pixel; the remaining fields are per material
    cluster (leading axis K).
    """

    depth: np.ndarray
    normals: np.ndarray
    eta: np.ndarray
    m: np.ndarray
    a_s: np.ndarray
    mu_s: np.ndarray
    sigma_s: np.ndarray
    a_ss: np.ndarray
    mu_ss: np.ndarray
    sigma_ss: np.ndarray

    def asdict(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in self.__dataclass_fields__}

    @classmethod
    def fromdict(cls, d: dict) -> "SceneParams":
        return cls(**{k: np.asarray(d[k]) for k in cls.__dataclass_fields__})

    def materials(self) -> list[Material]:
        out = []
        for c in range(len(self.eta)):
            out.append(Material(
                eta=float(self.eta[c]), roughness=float(self.m[c]),
                surface=TimeGaussBank(self.a_s[c], self.mu_s[c],
                                      self.sigma_s[c]),
                subsurface=TimeGaussBank(self.a_ss[c], self.mu_ss[c],
                                         self.sigma_ss[c])))
        return out

    def to_scene(self, cluster_id: np.ndarray,
                 view_dirs: np.ndarray) -> Scene:
        return Scene(depth=self.depth, normals=self.normals,
                     cluster_id=cluster_id, materials=self.materials(),
                     view_dirs=view_dirs)


def _sigma_bounds(sensor: SensorConfig) -> tuple[float, float]:
    return sensor.bin_width / 2.0, sensor.window / 4.0


def _softplus(x):
    return jnp.logaddexp(x, 0.0)


def _inv_softplus(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def _logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def constrain(raw: dict, sensor: SensorConfig) -> dict:
    """Map unconstrained optimizer coordinates to physical values.

    normals: vector normalization; eta = 1 + 2 sigmoid; m = sigmoid clamped
    to [1e-3, 1]; a0 = softplus with a_i = a0 * sigmoid (i >= 1); mu in
    [0, T_max] and sigma in [bin_width/2, T_max/4] via scaled sigmoids;
    depth = softplus.
    """
    t_max = sensor.window
    s_min, s_max = _sigma_bounds(sensor)

    def bank_a(x):
        a0 = _softplus(x[..., :1])
        rest = a0 * jax.nn.sigmoid(x[..., 1:])
        return jnp.concatenate([a0, rest], axis=-1)

    nraw = jnp.asarray(raw["normals"], dtype=jnp.float64)
    nn = nraw / jnp.linalg.norm(nraw, axis=-1, keepdims=True)
    out = {
        "depth": _softplus(jnp.asarray(raw["depth"], dtype=jnp.float64)),
        "normals": nn,
        "eta": 1.0 + 2.0 * jax.nn.sigmoid(jnp.asarray(raw["eta"])),
        "m": jnp.clip(jax.nn.sigmoid(jnp.asarray(raw["m"])), 1e-3, 1.0),
        "a_s": bank_a(jnp.asarray(raw["a_s"])),
        "a_ss": bank_a(jnp.asarray(raw["a_ss"])),
        "mu_s": t_max * jax.nn.sigmoid(jnp.asarray(raw["mu_s"])),
        "mu_ss": t_max * jax.nn.sigmoid(jnp.asarray(raw["mu_ss"])),
        "sigma_s": s_min + (s_max - s_min)
        * jax.nn.sigmoid(jnp.asarray(raw["sigma_s"])),
        "sigma_ss": s_min + (s_max - s_min)
        * jax.nn.sigmoid(jnp.asarray(raw["sigma_ss"])),
    }
    return out


def unconstrain(params: SceneParams | dict, sensor: SensorConfig) -> dict:
    """Inverse of `constrain` (bijective on the open parameter ranges)."""
    if isinstance(params, SceneParams):
        params = params.asdict()
    t_max = sensor.window
    s_min, s_max = _sigma_bounds(sensor)

    def bank_a_inv(a):
        a = np.asarray(a, dtype=np.float64)
        a0 = a[..., :1]
        return np.concatenate([_inv_softplus(a0), _logit(a[..., 1:] / a0)],
                              axis=-1)

    return {
        "depth": _inv_softplus(params["depth"]),
        "normals": np.asarray(params["normals"], dtype=np.float64).copy(),
        "eta": _logit((np.asarray(params["eta"]) - 1.0) / 2.0),
        "m": _logit(np.asarray(params["m"])),
        "a_s": bank_a_inv(params["a_s"]),
        "a_ss": bank_a_inv(params["a_ss"]),
        "mu_s": _logit(np.asarray(params["mu_s"]) / t_max),
        "mu_ss": _logit(np.asarray(params["mu_ss"]) / t_max),
        "sigma_s": _logit((np.asarray(params["sigma_s"]) - s_min)
                          / (s_max - s_min)),
        "sigma_ss": _logit((np.asarray(params["sigma_ss"]) - s_min)
                           / (s_max - s_min)),
    }


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightConfig:
    """Eq.-style weighting: per-entry Mueller weights, edge gating, reg weight."""

    w_diag: float = 1.0
    w_offdiag: float = 10.0
    edge_threshold: float = 0.02
    lambda_reg: float = 1e-3
    gauge_weight: float = 100.0

    def __post_init__(self):
        if min(self.w_diag, self.w_offdiag, self.edge_threshold,
               self.lambda_reg, self.gauge_weight) < 0:
            raise ValueError("weights must be non-negative")

    def entry_weights(self) -> np.ndarray:
        w = np.full((4, 4), self.w_offdiag)
        np.fill_diagonal(w, self.w_diag)
        return w


def _smooth_abs(x):
    return jnp.sqrt(x * x + _L1_EPS * _L1_EPS)


def forward_cube(constrained: dict, cluster_id, view_dirs,
                 sensor: SensorConfig):
    """Differentiable forward model f(theta): rendered cube shifted into
    capture-time coordinates; [H, W, T, 4, 4]."""
    cid = jnp.asarray(cluster_id)
    taus = jnp.asarray(sensor.bin_centers())
    vd = jnp.asarray(view_dirs, dtype=jnp.float64)
    px = {k: jnp.asarray(constrained[k])[cid]
          for k in ("eta", "m", "a_s", "mu_s", "sigma_s",
                    "a_ss", "mu_ss", "sigma_ss")}
    cube = brdf_cube(taus, vd, vd, jnp.asarray(constrained["normals"]),
                     px["eta"], px["m"],
                     px["a_s"], px["mu_s"], px["sigma_s"],
                     px["a_ss"], px["mu_ss"], px["sigma_ss"], cosine=True)
    shift = 2.0 * jnp.asarray(constrained["depth"]) \
        / (sensor.c * sensor.bin_width)
    prof = jnp.moveaxis(cube.reshape(cube.shape[:3] + (16,)), 2, 3)
    shifted = shift_profiles(prof, shift[..., None])
    return jnp.moveaxis(shifted, 3, 2).reshape(cube.shape)


def _objective_terms(constrained: dict, h_meas, w_entry, w_cfg: WeightConfig,
                     cluster_id, view_dirs, sensor, mask):
    model = forward_cube(constrained, cluster_id, view_dirs, sensor)
    resid = _smooth_abs(model - jnp.asarray(h_meas))
    resid = resid * jnp.asarray(w_entry)
    data = jnp.sum(resid * jnp.asarray(mask)[..., None, None, None])

    n = constrained["normals"]
    d = constrained["depth"]
    m = jnp.asarray(mask, dtype=jnp.float64)

    def pair_terms(axis):
        sl_a = (slice(None), slice(0, -1)) if axis == 1 else (slice(0, -1),)
        sl_b = (slice(None), slice(1, None)) if axis == 1 else (slice(1, None),)
        dn = n[sl_b] - n[sl_a]
        dd = jax.lax.stop_gradient(jnp.abs(d[sl_b] - d[sl_a]))
        w_d = (dd <= w_cfg.edge_threshold).astype(jnp.float64)
        both = m[sl_a] * m[sl_b]
        return jnp.sum(_smooth_abs(dn) * (w_d * both)[..., None])

    reg = pair_terms(0) + pair_terms(1)

    # gauge fix: a joint shift of depth and all bank means leaves the
    # capture-domain profiles unchanged, so pin the surface bank's
    # intensity-channel mean to the anchor delay
    anchor = SURFACE_DELAY_ANCHOR_BINS * sensor.bin_width
    gauge = jnp.sum(((constrained["mu_s"][..., 0] - anchor)
                     / sensor.bin_width) ** 2)
    return data, reg, gauge


def objective(theta: SceneParams | dict, h_meas: TransientMuellerCube,
              weights: WeightConfig, cluster_id, view_dirs,
              sensor: SensorConfig, mask=None) -> float:
    """Weighted-L1 data term plus edge-gated normal-smoothness regularizer."""
    if isinstance(theta, SceneParams):
        theta = theta.asdict()
    if mask is None:
        mask = np.ones(np.asarray(theta["depth"]).shape, dtype=np.float64)
    data, reg, gauge = _objective_terms(theta, h_meas.data,
                                        weights.entry_weights(), weights,
                                        cluster_id, view_dirs, sensor, mask)
    return float(data + weights.lambda_reg * reg
                 + weights.gauge_weight * gauge)


# ---------------------------------------------------------------------------
# Full reconstruction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionResult:
    params: SceneParams
    cluster_id: np.ndarray
    valid: np.ndarray
    loss_history: np.ndarray
    best_loss: float
    init_params: SceneParams


def _init_materials(h_meas: TransientMuellerCube, cluster_id, valid,
                    depth_init, normals_init, view_dirs,
                    sensor: SensorConfig, k: int) -> dict:
    """Per-cluster material initialization from the intensity channel.

    eta/m start at documented defaults.  Amplitudes are calibrated against
    unit-amplitude probe renders of the actual forward model, so the scaling
    accounts for the incidence geometry.  Sub-surface means and widths come
    from the delay-domain moments of the residual left after subtracting the
    calibrated surface probe.
    """
    hist = h_meas.data[..., 0, 0]
    eta0, m0 = 1.5, 0.3
    anchor = SURFACE_DELAY_ANCHOR_BINS * sensor.bin_width
    s_min, s_max = _sigma_bounds(sensor)
    taus = sensor.bin_centers()

    mats = {
        "eta": np.full(k, eta0), "m": np.full(k, m0),
        "a_s": np.tile([1.0, 0.6, 0.6, 0.6], (k, 1)),
        "mu_s": np.full((k, 4), anchor),
        "sigma_s": np.full((k, 4), max(sensor.bin_width, s_min * 1.5)),
        "a_ss": np.zeros((k, 4)),
        "mu_ss": np.full((k, 4), sensor.window / 4.0),
        "sigma_ss": np.full((k, 4), np.clip(sensor.window / 16.0,
                                            s_min * 1.01, s_max * 0.99)),
    }
    base = dict(depth=depth_init, normals=normals_init)
    sels = []
    for c in range(k):
        sel = (cluster_id == c) & valid
        sels.append(sel if np.any(sel) else (cluster_id == c))

    # surface amplitude: peak-height ratio against the unit probe
    probe_s = np.asarray(forward_cube({**base, **mats}, cluster_id,
                                      view_dirs, sensor))[..., 0, 0]
    for c, sel in enumerate(sels):
        num = hist[sel].max(axis=-1)
        den = np.maximum(probe_s[sel].max(axis=-1), 1e-12)
        scale = float(np.median(num / den))
        mats["a_s"][c] *= max(scale, 1e-6)

    # sub-surface delay statistics from the surface-subtracted residual
    surf = np.asarray(forward_cube({**base, **mats}, cluster_id, view_dirs,
                                   sensor))[..., 0, 0]
    resid = np.maximum(hist - surf, 0.0)
    delay = taus[None, None, :] - (2.0 * depth_init
                                   / sensor.c)[..., None]
    for c, sel in enumerate(sels):
        r = resid[sel]
        t = delay[sel]
        mass = r.sum()
        if mass > 0:
            centroid = float((t * r).sum() / mass)
            spread = float(np.sqrt(max(
                ((t - centroid) ** 2 * r).sum() / mass, 0.0)))
            mats["mu_ss"][c] = np.clip(centroid, sensor.bin_width,
                                       sensor.window * 0.98)
            mats["sigma_ss"][c] = np.clip(spread, s_min * 1.01, s_max * 0.99)
    mats["a_ss"] = np.tile([1.0, 0.4, 0.4, 0.4], (k, 1))
    probe_ss = np.asarray(forward_cube(
        {**base, **mats, "a_s": np.zeros((k, 4))}, cluster_id, view_dirs,
        sensor))[..., 0, 0]
    for c, sel in enumerate(sels):
        num = resid[sel].sum()
        den = max(probe_ss[sel].sum(), 1e-12)
        mats["a_ss"][c] *= max(num / den, 1e-8)
    return mats


def reconstruct_scene(h_meas: TransientMuellerCube, view_dirs,
                      sensor: SensorConfig, *, k: int = 3, iters: int = 2000,
                      lr: float = 5e-3, weights: WeightConfig | None = None,
                      seed: int = 0, freeze_depth: bool = False,
                      progress_every: int = 0) -> ReconstructionResult:
    """Estimate scene parameters best explaining a measured Mueller cube.

    Initializes depth by peak finding (corrected by the surface-delay
    anchor), normals from depth, and the cluster map by k-means on the
    time-averaged intensity; then runs Adam in unconstrained coordinates and
    returns the best-loss iterate.  Deterministic given seed.
    """
    if weights is None:
        weights = WeightConfig()
    hist = h_meas.data[..., 0, 0]
    t_arrival, valid = peak_find_map(hist, sensor)
    if not np.any(valid):
        raise NoPeak("no pixel has a detectable peak")
    anchor = SURFACE_DELAY_ANCHOR_BINS * sensor.bin_width
    depth_init = t_arrival - sensor.c * anchor / 2.0
    median_d = float(np.nanmedian(depth_init))
    depth_init = np.where(valid & (depth_init > 0), depth_init,
                          max(median_d, sensor.c * sensor.bin_width))
    normals_init = normals_from_depth(depth_init, view_dirs, valid)

    mean_intensity = np.where(valid, hist.mean(axis=-1), 0.0)
    cluster_id = kmeans_cluster(mean_intensity, k, seed)

    mats = _init_materials(h_meas, cluster_id, valid, depth_init,
                           normals_init, view_dirs, sensor, k)
    init = dict(depth=depth_init, normals=normals_init, **mats)
    init_params = SceneParams.fromdict(init)
    raw0 = unconstrain(init, sensor)

    mask = valid.astype(np.float64)
    w_entry = weights.entry_weights()
    h_data = jnp.asarray(h_meas.data)
    cid = np.asarray(cluster_id)
    vd = np.asarray(view_dirs, dtype=np.float64)

    flat0, unravel = ravel_pytree(raw0)
    flat0 = np.asarray(flat0, dtype=np.float64)
    depth_slot = np.zeros_like(flat0, dtype=bool)
    if freeze_depth:
        probe = {key: np.zeros_like(np.asarray(v))
                 for key, v in raw0.items()}
        probe["depth"] = np.ones_like(np.asarray(raw0["depth"]))
        depth_slot = np.asarray(ravel_pytree(probe)[0]) > 0.5

    def loss_fn(flat):
        raw = unravel(flat)
        constrained = constrain(raw, sensor)
        data, reg, gauge = _objective_terms(constrained, h_data, w_entry,
                                            weights, cid, vd, sensor, mask)
        return data + weights.lambda_reg * reg + weights.gauge_weight * gauge

    value_and_grad = jax.jit(jax.value_and_grad(loss_fn))

    params = flat0.copy()
    state = numerics.AdamState.init(params.size, lr=lr)
    best = params.copy()
    best_loss = float(loss_fn(jnp.asarray(params)))
    history = [best_loss]
    for it in range(iters):
        val, grad = value_and_grad(jnp.asarray(params))
        grad = np.array(grad)
        if freeze_depth:
            grad[depth_slot] = 0.0
        state, params = numerics.adam_step(state, params, grad)
        val = float(val)
        history.append(val)
        if val < best_loss:
            best_loss = val
            best = params.copy()
        if progress_every and (it + 1) % progress_every == 0:
            log.info("reconstruct_scene iter %d: loss %.6e (best %.6e)",
                     it + 1, val, best_loss)
    final_loss = float(loss_fn(jnp.asarray(params)))
    if final_loss < best_loss:
        best_loss = final_loss
        best = params.copy()

    constrained = constrain(unravel(jnp.asarray(best)), sensor)
    result = SceneParams.fromdict({key: np.asarray(v)
                                   for key, v in constrained.items()})
    return ReconstructionResult(params=result, cluster_id=cid, valid=valid,
                                loss_history=np.asarray(history),
                                best_loss=best_loss,
                                init_params=init_params)


# ---------------------------------------------------------------------------
# Material editing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialEdit:
    """Edit of one time bank: amplitude scale, per-channel mean multipliers,
    optional roughness override."""

    bank: str = "subsurface"
    scale_a: float = 1.0
    shift_mu: tuple = (1.0, 1.0, 1.0, 1.0)
    set_m: float | None = None
    clusters: tuple | None = None


def edit_material(params: SceneParams, edit: MaterialEdit,
                  sensor: SensorConfig | None = None) -> SceneParams:
    """Apply a material edit; out-of-range values are clamped with a warning."""
    if edit.bank not in ("surface", "subsurface"):
        raise ValueError("bank must be 'surface' or 'subsurface'")
    d = params.asdict()
    suffix = "_s" if edit.bank == "surface" else "_ss"
    sel = np.arange(len(d["eta"])) if edit.clusters is None \
        else np.asarray(edit.clusters)

    a = d["a" + suffix].copy()
    mu = d["mu" + suffix].copy()
    a[sel] = a[sel] * edit.scale_a
    mu[sel] = mu[sel] * np.asarray(edit.shift_mu, dtype=np.float64)
    if np.any(a < 0):
        warnings.warn("negative amplitudes clamped to 0")
        a = np.maximum(a, 0.0)
    if sensor is not None and np.any(mu > sensor.window):
        warnings.warn("bank means clamped to the sensor time window")
        mu = np.minimum(mu, sensor.window)
    d["a" + suffix] = a
    d["mu" + suffix] = mu
    if edit.set_m is not None:
        m = d["m"].copy()
        m_val = edit.set_m
        if not (0.0 < m_val <= 1.0):
            warnings.warn("roughness clamped to (0, 1]")
            m_val = float(np.clip(m_val, 1e-3, 1.0))
        m[sel] = m_val
        d["m"] = m
    return SceneParams.fromdict(d)
