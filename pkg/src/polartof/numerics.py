"""Shared numerical machinery: Adam, SVD least squares, gradient checking.

Gradients elsewhere in the package come from jax; a GradProvider here is
simply a callable mapping a parameter vector to (value, gradient vector).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class ShapeMismatch(ValueError):
    """Vector shapes disagree."""


@dataclass(frozen=True)
class AdamState:
    """Bias-corrected Adam optimizer state over a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, size: int, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray,
              grad: np.ndarray) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns (new_state, new_params)."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ShapeMismatch(
            f"params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=t), new_params


def least_squares(a: np.ndarray, b: np.ndarray,
                  cutoff: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares solution of a @ x = b via SVD.

    Singular values below cutoff * s_max are treated as zero.  b may carry
    trailing dimensions ([N] or [N, K]).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > cutoff * (s[0] if s.size else 0.0)
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return vt.T @ (s_inv[:, None] * (u.T @ b) if b.ndim > 1
                   else s_inv * (u.T @ b))


def pinv(a: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with a relative singular-value cutoff."""
    a = np.asarray(a, dtype=np.float64)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > cutoff * (s[0] if s.size else 0.0)
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vt.T * s_inv) @ u.T


def grad_check(f, x: np.ndarray, rel_step: float = 1e-5) -> float:
    """Max relative error between f's gradient and central finite differences.

    f(x) must return (value, gradient).  Error per coordinate is
    |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-12).
    """
    x = np.asarray(x, dtype=np.float64)
    _, g_ad = f(x)
    g_ad = np.asarray(g_ad, dtype=np.float64)
    g_fd = np.empty_like(x)
    for i in range(x.size):
        # truly relative step; fall back to rel_step only at exact zero
        h = rel_step * (abs(x.flat[i]) or 1.0)
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        fp, _ = f(xp)
        fm, _ = f(xm)
        g_fd.flat[i] = (float(fp) - float(fm)) / (2.0 * h)
    err = np.abs(g_ad - g_fd) / (np.abs(g_ad) + np.abs(g_fd) + 1e-12)
    return float(np.max(err)) if err.size else 0.0
