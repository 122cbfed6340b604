"""File formats: POLARTOF1 tensors, run configs, scene parameter bundles.

Tensor files carry a self-describing UTF-8 header (key: value lines,
terminated by a blank line) followed by raw little-endian float32 payload in
row-major order.  Computation stays float64; only disk storage narrows.

Run configs are strict sectioned key/value text: unknown sections or keys
are errors, angles must carry a deg/rad suffix, times a ps/ns/s suffix.
"""

from __future__ import annotations

import io
import math
import os

import numpy as np

MAGIC = "POLARTOF1"

_PS = 1e-12
_NS = 1e-9
_TIME_UNITS = {"ps": _PS, "ns": _NS, "s": 1.0}
_ANGLE_UNITS = {"deg": math.pi / 180.0, "rad": 1.0}


class FormatError(ValueError):
    """Malformed tensor file or header."""


class ConfigError(ValueError):
    """Malformed or unknown-key run configuration."""


# ---------------------------------------------------------------------------
# POLARTOF1 tensor files
# ---------------------------------------------------------------------------

def write_tensor(path, array, units: str = "",
                 bin_width: float | None = None) -> None:
    """Write an array as a POLARTOF1 file (float32 payload)."""
    arr = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    lines = [f"magic: {MAGIC}",
             "dtype: f32",
             "shape: " + " ".join(str(s) for s in arr.shape),
             "endianness: LE"]
    if units:
        lines.append(f"units: {units}")
    if bin_width is not None:
        lines.append(f"bin_width: {bin_width!r}")
    header = "\n".join(lines) + "\n\n"
    with open(path, "wb") as f:
        f.write(header.encode("utf-8"))
        f.write(arr.astype("<f4").tobytes())


def read_tensor(path) -> tuple[np.ndarray, dict]:
    """Read a POLARTOF1 file; returns (float64 array, header dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise FormatError("missing blank line after header")
    header: dict = {}
    for line in blob[:sep].decode("utf-8").splitlines():
        if ":" not in line:
            raise FormatError(f"bad header line: {line!r}")
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    if header.get("magic") != MAGIC:
        raise FormatError("bad or missing magic")
    if header.get("dtype") != "f32":
        raise FormatError(f"unsupported dtype {header.get('dtype')!r}")
    if header.get("endianness", "LE") != "LE":
        raise FormatError("only little-endian payloads are supported")
    try:
        shape = tuple(int(s) for s in header["shape"].split())
    except (KeyError, ValueError) as exc:
        raise FormatError("bad shape header") from exc
    payload = blob[sep + 2:]
    expect = int(np.prod(shape)) * 4
    if len(payload) != expect:
        raise FormatError(
            f"payload length {len(payload)} != {expect} for shape {shape}")
    data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    if "bin_width" in header:
        header["bin_width"] = float(header["bin_width"])
    return data.astype(np.float64), header


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def _parse_time(text: str, where: str) -> float:
    parts = text.split()
    if len(parts) != 2 or parts[1] not in _TIME_UNITS:
        raise ConfigError(f"{where}: time needs a ps/ns/s suffix, got {text!r}")
    try:
        return float(parts[0]) * _TIME_UNITS[parts[1]]
    except ValueError as exc:
        raise ConfigError(f"{where}: bad number {parts[0]!r}") from exc


def _parse_angle(text: str, where: str) -> float:
    parts = text.split()
    if len(parts) != 2 or parts[1] not in _ANGLE_UNITS:
        raise ConfigError(
            f"{where}: angle needs a deg/rad suffix, got {text!r}")
    try:
        return float(parts[0]) * _ANGLE_UNITS[parts[1]]
    except ValueError as exc:
        raise ConfigError(f"{where}: bad number {parts[0]!r}") from exc


def _parse_list(text: str, where: str, unit: str | None) -> np.ndarray:
    parts = text.split()
    if unit == "time":
        if len(parts) < 2 or parts[-1] not in _TIME_UNITS:
            raise ConfigError(f"{where}: list needs a trailing ps/ns/s unit")
        scale, parts = _TIME_UNITS[parts[-1]], parts[:-1]
    elif unit == "angle":
        if len(parts) < 2 or parts[-1] not in _ANGLE_UNITS:
            raise ConfigError(f"{where}: list needs a trailing deg/rad unit")
        scale, parts = _ANGLE_UNITS[parts[-1]], parts[:-1]
    else:
        scale = 1.0
    try:
        return np.array([float(p) for p in parts]) * scale
    except ValueError as exc:
        raise ConfigError(f"{where}: bad list {text!r}") from exc


def _parse_value(kind: str, text: str, where: str):
    if kind == "str":
        return text
    if kind == "int":
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected integer, got {text!r}") \
                from exc
    if kind == "float":
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected number, got {text!r}") \
                from exc
    if kind == "bool":
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"{where}: expected boolean, got {text!r}")
    if kind == "time":
        return _parse_time(text, where)
    if kind == "angle":
        return _parse_angle(text, where)
    if kind == "float_list":
        return _parse_list(text, where, None)
    if kind == "int_list":
        return _parse_list(text, where, None).astype(np.int64)
    if kind == "time_list":
        return _parse_list(text, where, "time")
    raise AssertionError(f"unknown schema kind {kind}")


# every recognized section/key and its value kind; strict parsing means
# anything outside this table is an error
CONFIG_SCHEMA = {
    "scene": {
        "kind": "str", "width": "int", "height": "int", "fov": "angle",
        "distance": "float", "tilt": "angle", "radius": "float",
        "blob_radius_frac": "float",
    },
    "sensor": {
        "bin_width": "time", "num_bins": "int", "noise_sigma": "float",
        "irf_sigma": "time",
    },
    "schedule": {
        "kind": "str", "n": "int", "iters": "int", "seed": "int",
        "lr": "float", "file": "str",
    },
    "weights": {
        "w_diag": "float", "w_offdiag": "float", "edge_threshold": "float",
        "lambda_reg": "float", "gauge_weight": "float",
    },
    "optimizer": {
        "iters": "int", "lr": "float", "seed": "int", "k": "int",
        "freeze_depth": "bool",
    },
    "edit": {
        "bank": "str", "scale_a": "float", "shift_mu": "float_list",
        "set_m": "float", "clusters": "int_list",
    },
    "io": {
        "cube_file": "str", "capture_file": "str", "schedule_file": "str",
        "params_dir": "str", "out": "str",
    },
    "export": {
        "kind": "str", "input": "str", "time_bin": "int", "entry": "int",
        "pixel": "int_list",
    },
}


class RunConfig:
    """Parsed, schema-validated run configuration."""

    def __init__(self, sections: dict):
        self.sections = sections

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        sections: dict = {}
        current = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip()
                if name not in CONFIG_SCHEMA:
                    raise ConfigError(f"line {lineno}: unknown section "
                                      f"[{name}]")
                current = sections.setdefault(name, {})
                current_name = name
                continue
            if current is None:
                raise ConfigError(f"line {lineno}: key outside any section")
            if ":" not in line:
                raise ConfigError(f"line {lineno}: expected 'key: value'")
            key, _, value = line.partition(":")
            key = key.strip()
            schema = CONFIG_SCHEMA[current_name]
            if key not in schema:
                raise ConfigError(f"line {lineno}: unknown key "
                                  f"'{key}' in [{current_name}]")
            if key in current:
                raise ConfigError(f"line {lineno}: duplicate key '{key}'")
            where = f"[{current_name}] {key}"
            current[key] = _parse_value(schema[key], value.strip(), where)
        return cls(sections)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read())

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing required key '{key}' in "
                              f"[{section}]") from None


# ---------------------------------------------------------------------------
# Scene parameter bundles
# ---------------------------------------------------------------------------

_BANK_KEYS = ("a_s", "mu_s", "sigma_s", "a_ss", "mu_ss", "sigma_ss")


def write_scene_params(out_dir, params, cluster_id=None,
                       valid=None) -> None:
    """Write a SceneParams bundle: materials text + map tensors."""
    os.makedirs(out_dir, exist_ok=True)
    buf = io.StringIO()
    k = len(np.asarray(params.eta))
    buf.write(f"clusters: {k}\n")
    for c in range(k):
        buf.write(f"\n[cluster {c}]\n")
        buf.write(f"eta: {float(params.eta[c])!r}\n")
        buf.write(f"m: {float(params.m[c])!r}\n")
        for key in _BANK_KEYS:
            vals = np.asarray(getattr(params, key))[c]
            if key.startswith("a"):
                buf.write(key + ": "
                          + " ".join(repr(float(v)) for v in vals) + "\n")
            else:
                buf.write(key + ": " + " ".join(repr(float(v / _PS))
                                                for v in vals) + " ps\n")
    with open(os.path.join(out_dir, "materials.txt"), "w",
              encoding="utf-8") as f:
        f.write(buf.getvalue())
    write_tensor(os.path.join(out_dir, "depth.ptf"), params.depth,
                 units="m")
    write_tensor(os.path.join(out_dir, "normals.ptf"), params.normals)
    if cluster_id is not None:
        write_tensor(os.path.join(out_dir, "cluster_id.ptf"),
                     np.asarray(cluster_id, dtype=np.float64))
    if valid is not None:
        write_tensor(os.path.join(out_dir, "valid.ptf"),
                     np.asarray(valid, dtype=np.float64))


def read_scene_params(in_dir):
    """Read a bundle written by write_scene_params.

    Returns (SceneParams, cluster_id or None, valid or None).  Maps are
    float32 on disk, so round-tripped values are float32-accurate.
    """
    from .inverse import SceneParams

    path = os.path.join(in_dir, "materials.txt")
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.split("#", 1)[0].strip() for ln in f]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("clusters:"):
        raise FormatError("materials.txt must start with 'clusters: K'")
    k = int(lines[0].partition(":")[2])
    per = {key: np.zeros((k, 4)) for key in _BANK_KEYS}
    eta = np.zeros(k)
    m = np.zeros(k)
    current = None
    for line in lines[1:]:
        if line.startswith("[cluster ") and line.endswith("]"):
            current = int(line[len("[cluster "):-1])
            if not 0 <= current < k:
                raise FormatError(f"cluster index {current} out of range")
            continue
        if current is None or ":" not in line:
            raise FormatError(f"bad materials line: {line!r}")
        key, _, value = line.partition(":")
        key = key.strip()
        if key == "eta":
            eta[current] = float(value)
        elif key == "m":
            m[current] = float(value)
        elif key in _BANK_KEYS:
            unit = "time" if not key.startswith("a") else None
            per[key][current] = _parse_list(value.strip(),
                                            f"materials {key}", unit)
        else:
            raise FormatError(f"unknown materials key {key!r}")
    depth, _ = read_tensor(os.path.join(in_dir, "depth.ptf"))
    normals, _ = read_tensor(os.path.join(in_dir, "normals.ptf"))
    # renormalize after the float32 round trip
    normals = normals / np.linalg.norm(normals, axis=-1, keepdims=True)
    cluster_id = None
    valid = None
    cpath = os.path.join(in_dir, "cluster_id.ptf")
    if os.path.exists(cpath):
        cluster_id = np.rint(read_tensor(cpath)[0]).astype(np.int64)
    vpath = os.path.join(in_dir, "valid.ptf")
    if os.path.exists(vpath):
        valid = read_tensor(vpath)[0] > 0.5
    params = SceneParams(depth=depth, normals=normals, eta=eta, m=m,
                         **per)
    return params, cluster_id, valid
