"""Shared test utilities: ambient test fields and convergence-order fits."""

from __future__ import annotations

import math

import numpy as np

from periflow import AmbientField


def ambient_x1() -> AmbientField:
    return AmbientField(
        fn=lambda p: p[..., 0],
        grad=lambda p: np.broadcast_to(np.array([1.0, 0.0]), p.shape).copy(),
        hess=lambda p: np.zeros(p.shape + (2,)),
    )


def ambient_x1x2() -> AmbientField:
    def hess(p):
        out = np.zeros(p.shape + (2,))
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = 1.0
        return out

    return AmbientField(
        fn=lambda p: p[..., 0] * p[..., 1],
        grad=lambda p: np.stack([p[..., 1], p[..., 0]], axis=-1),
        hess=hess,
    )


def ambient_radius_sq() -> AmbientField:
    """|x|^2: constant on the unit circle, so both operator routes vanish."""
    return AmbientField(
        fn=lambda p: np.einsum("...a,...a->...", p, p),
        grad=lambda p: 2.0 * p,
        hess=lambda p: np.broadcast_to(2.0 * np.eye(2), p.shape + (2,)).copy(),
    )


def observed_orders(errors) -> list[float]:
    return [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]


def mean_order(errors) -> float:
    orders = observed_orders(errors)
    return sum(orders) / len(orders)
