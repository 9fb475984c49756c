"""Manufactured smooth solutions on the unit square."""
from __future__ import annotations

import numpy as np

from .forms import ExactSolution


def _bubble_value(x, y):
    return x * (1 - x) * y * (1 - y)


def _bubble_grad(x, y):
    return np.stack(np.broadcast_arrays((1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)), axis=-1)


def _bubble_hess(x, y):
    hxx = -2 * y * (1 - y)
    hyy = -2 * x * (1 - x)
    hxy = (1 - 2 * x) * (1 - 2 * y)
    hxx, hxy, hyy = np.broadcast_arrays(hxx, hxy, hyy)
    return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


def polynomial_bubble() -> ExactSolution:
    """``u = x(1-x) y(1-y)``: vanishes on the boundary, total degree 4."""
    return ExactSolution(_bubble_value, _bubble_grad, _bubble_hess)


def _exp_sin_parts(x, y):
    pi = np.pi
    E = np.exp(x * y)
    S, T = np.sin(pi * x), np.sin(pi * y)
    dS, dT = pi * np.cos(pi * x), pi * np.cos(pi * y)
    return E, S, T, dS, dT


def _exp_sin_value(x, y):
    E, S, T, _, _ = _exp_sin_parts(x, y)
    return E * S * T


def _exp_sin_grad(x, y):
    E, S, T, dS, dT = _exp_sin_parts(x, y)
    ux = E * (y * S * T + dS * T)
    uy = E * (x * S * T + S * dT)
    return np.stack(np.broadcast_arrays(ux, uy), axis=-1)


def _exp_sin_hess(x, y):
    E, S, T, dS, dT = _exp_sin_parts(x, y)
    pi2 = np.pi ** 2
    uxx = E * (y * y * S * T + 2 * y * dS * T - pi2 * S * T)
    uyy = E * (x * x * S * T + 2 * x * S * dT - pi2 * S * T)
    uxy = E * (x * (y * S * T + dS * T) + S * T + y * S * dT + dS * dT)
    uxx, uxy, uyy = np.broadcast_arrays(uxx, uxy, uyy)
    return np.stack([np.stack([uxx, uxy], -1), np.stack([uxy, uyy], -1)], -2)


def exp_sine() -> ExactSolution:
    """``u = exp(xy) sin(pi x) sin(pi y)``."""
    return ExactSolution(_exp_sin_value, _exp_sin_grad, _exp_sin_hess)
