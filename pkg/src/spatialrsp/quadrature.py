"""Composite Gauss-Legendre quadrature with panel doubling.

Everything here is vectorised over a batch of intervals so that a whole
detector plane can be integrated in one call.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureError

ORDER = 8
MAX_PANELS = 1 << 16
# Upper bound on nodes materialised at once.
_CHUNK_NODES = 1 << 20

Integrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(lo, hi, panels: int, order: int = ORDER):
    """Nodes and weights of a composite rule on each ``[lo[m], hi[m]]``.

    Returns two ``(M, panels * order)`` arrays.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    t, w = _leggauss(order)
    half = 0.5 / panels
    mids = (np.arange(panels) + 0.5) / panels
    unit = (mids[:, None] + half * t[None, :]).ravel()
    unit_w = np.tile(half * w, panels)
    span = hi - lo
    nodes = lo[:, None] + span[:, None] * unit[None, :]
    weights = span[:, None] * unit_w[None, :]
    return nodes, weights


def composite(func: Integrand, lo, hi, panels: int, order: int = ORDER) -> np.ndarray:
    """One fixed composite rule; ``func(nodes, rows)`` sees interval indices ``rows``."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    step = max(1, _CHUNK_NODES // (panels * order))
    parts = []
    for start in range(0, lo.size, step):
        rows = np.arange(start, min(start + step, lo.size))
        nodes, weights = panel_nodes(lo[rows], hi[rows], panels, order)
        vals = func(nodes, rows)
        parts.append(np.einsum("...mn,mn->...m", vals, weights))
    return np.concatenate(parts, axis=-1)


def integrate(
    func: Integrand,
    lo,
    hi,
    *,
    panels: int = 2,
    tol: float = 1e-9,
    floor=0.0,
    order: int = ORDER,
    max_panels: int = MAX_PANELS,
) -> np.ndarray:
    """Integrate ``func`` over a batch of intervals to relative tolerance ``tol``.

    ``func(nodes, rows)`` maps a ``(m, n)`` node array for the intervals
    ``rows`` to values of shape ``(..., m, n)``. The panel count starts at
    ``panels`` and doubles until two successive estimates agree to ``tol``
    relative to ``max(|I|, floor)``, the max running over the leading
    components of each interval.

    Intervals are refined independently, so each result does not depend on
    the rest of the batch. Returns the ``(..., M)`` integrals from the
    finer rule.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    floor = np.broadcast_to(np.asarray(floor, dtype=float), lo.shape)
    panels = max(1, int(panels))
    active = np.arange(lo.size)

    def sub(rows):
        return lambda nodes, r: func(nodes, rows[r])

    coarse = composite(sub(active), lo, hi, panels, order)
    out = np.empty_like(coarse)
    while True:
        fine = composite(sub(active), lo[active], hi[active], 2 * panels, order)
        lead = tuple(range(fine.ndim - 1))
        diff = np.abs(fine - coarse)
        err = diff.max(axis=lead) if lead else diff
        size = np.abs(fine).max(axis=lead) if lead else np.abs(fine)
        scale = np.maximum(size, floor[active])
        rel = np.divide(err, scale, out=np.zeros_like(err), where=scale > 0)
        done = rel <= tol
        out[..., active[done]] = fine[..., done]
        if done.all():
            return out
        panels *= 2
        if 2 * panels > max_panels:
            raise QuadratureError(
                f"panel cap {max_panels} reached before tolerance {tol:g}",
                float(rel.max()),
            )
        active = active[~done]
        coarse = fine[..., ~done]
