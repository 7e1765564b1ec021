from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from .errors import QuadratureNotConverged

LOGGER = logging.getLogger(__name__)

# integrand(x, y, dx, dy) -> values of a one-form on the direction (dx, dy) at (x, y)
OneForm = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    nodes, weights = leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _segment_integral(
    form: OneForm,
    start: Tuple[np.ndarray, np.ndarray],
    end: Tuple[np.ndarray, np.ndarray],
    order: int,
    panels: int,
) -> np.ndarray:
    nodes, weights = gauss_legendre(order)
    ts = (np.arange(panels)[:, None] + nodes[None, :]).ravel() / panels
    ws = np.tile(weights, panels) / panels
    x0, y0 = start
    dx = end[0] - x0
    dy = end[1] - y0
    xs = x0[:, None] + ts[None, :] * dx[:, None]
    ys = y0[:, None] + ts[None, :] * dy[:, None]
    values = form(xs, ys, np.broadcast_to(dx[:, None], xs.shape), np.broadcast_to(dy[:, None], xs.shape))
    return values @ ws


def line_integral(
    form: OneForm,
    start: Tuple[np.ndarray, np.ndarray],
    end: Tuple[np.ndarray, np.ndarray],
    order: int = 32,
    tol: float = 1e-9,
    max_refinements: int = 12,
) -> np.ndarray:
    """Integrate a one-form along straight segments, doubling panels until successive sums agree.

    ``start`` and ``end`` are (x, y) arrays of equal shape; one value is returned per segment.
    """
    start = (np.atleast_1d(np.asarray(start[0], dtype=float)), np.atleast_1d(np.asarray(start[1], dtype=float)))
    end = (np.atleast_1d(np.asarray(end[0], dtype=float)), np.atleast_1d(np.asarray(end[1], dtype=float)))
    panels = 1
    previous = _segment_integral(form, start, end, order, panels)
    for _ in range(max_refinements):
        panels *= 2
        current = _segment_integral(form, start, end, order, panels)
        error = np.max(np.abs(current - previous) / np.maximum(1.0, np.abs(current)), initial=0.0)
        if error <= tol:
            return current
        LOGGER.debug("Refining line integral to %d panels (error %.3e)", panels, error)
        previous = current
    raise QuadratureNotConverged(
        f"line integral did not reach tol {tol:g} with {panels} panels of order {order}"
    )


@dataclass(frozen=True)
class AreaRule:
    """One-dimensional rule in x over [-1, 1]; the y direction always uses the periodic mean."""

    rule: str
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        if self.rule == "simpson":
            return float(simpson(values, x=self.nodes))
        return float(values @ self.weights)


def area_rule(rule: str, nx: int) -> AreaRule:
    if rule == "simpson":
        # Simpson wants an odd node count
        count = nx + 1 if nx % 2 == 0 else nx
        nodes = np.linspace(-1.0, 1.0, count)
        return AreaRule(rule, nodes, np.empty(0))
    nodes, weights = gauss_legendre(nx)
    return AreaRule(rule, 2.0 * nodes - 1.0, 2.0 * weights)


def periodic_nodes(ny: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(ny) / ny


def cumulative_from_right(
    form_x: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_nodes: np.ndarray,
    y_values: np.ndarray,
    order: int,
) -> np.ndarray:
    """For each y, the integrals of ``form_x`` dx from every x node up to x = 1.

    ``x_nodes`` must be increasing; the node list is extended with 1.0 when it does not end there.
    Returns an array of shape (len(y_values), len(x_nodes)).
    """
    nodes, weights = gauss_legendre(order)
    edges = x_nodes if x_nodes[-1] == 1.0 else np.append(x_nodes, 1.0)
    widths = np.diff(edges)
    points = edges[:-1, None] + widths[:, None] * nodes[None, :]
    xs = np.broadcast_to(points.ravel()[None, :], (y_values.size, points.size))
    ys = np.broadcast_to(y_values[:, None], xs.shape)
    values = form_x(np.ascontiguousarray(xs), np.ascontiguousarray(ys)).reshape(y_values.size, widths.size, order)
    panel_sums = (values @ weights) * widths[None, :]
    tails = np.cumsum(panel_sums[:, ::-1], axis=1)[:, ::-1]
    if x_nodes[-1] == 1.0:
        tails = np.concatenate([tails, np.zeros((y_values.size, 1))], axis=1)
    return tails[:, : x_nodes.size]
