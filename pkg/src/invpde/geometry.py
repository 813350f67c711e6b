"""Rectangular domain decomposition, collocation grids, and point bookkeeping.

The domain [a1,b1] x [a2,b2] is split into N1 x N2 uniform rectangular
subdomains.  Subdomain (i, j) (0-based) has flat index e = i * N2 + j; a
uniform Q1 x Q2 grid fills each subdomain with endpoints on its edges, a
point (k, l) having flat index p = k * Q2 + l.  Adjacent subdomains share
bit-identical coordinates along their common edge, which is what lets the
continuity rows subtract traces exactly.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .exceptions import InvalidInputError


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle bounds, subdomain counts, and continuity orders.

    cont_order[d] is the interface continuity in direction d: 0 for C^0
    (value match only) or 1 for C^1 (value and normal derivative).
    """

    bounds: Tuple[Tuple[float, float], Tuple[float, float]]
    n_sub: Tuple[int, int] = (1, 1)
    cont_order: Tuple[int, int] = (1, 1)

    def __post_init__(self):
        (a1, b1), (a2, b2) = self.bounds
        if not (b1 > a1 and b2 > a2):
            raise InvalidInputError("domain bounds must be increasing")
        if min(self.n_sub) < 1:
            raise InvalidInputError("subdomain counts must be >= 1")
        if any(k not in (0, 1) for k in self.cont_order):
            raise InvalidInputError("continuity order must be 0 or 1")

    @property
    def n_subdomains(self):
        return self.n_sub[0] * self.n_sub[1]

    def subdomain_index(self, i, j):
        return i * self.n_sub[1] + j

    def subdomain_bounds(self, e):
        """Rectangle ((x0, x1), (y0, y1)) of subdomain ``e``."""
        n1, n2 = self.n_sub
        i, j = divmod(int(e), n2)
        if not (0 <= i < n1):
            raise InvalidInputError("subdomain index out of range")
        (a1, b1), (a2, b2) = self.bounds
        h1, h2 = (b1 - a1) / n1, (b2 - a2) / n2
        return ((a1 + i * h1, a1 + (i + 1) * h1),
                (a2 + j * h2, a2 + (j + 1) * h2))


@dataclass
class Discretization:
    """Collocation and measurement points plus boundary/interface indexing.

    colloc        (N, Q, 2) collocation coordinates, Q = Q1*Q2
    measurement   (N, Q_s, 2) random measurement coordinates
    bc            four lists (left, right, bottom, top) of (e, p) pairs
                  enumerating outer-boundary collocation points
    interfaces_x  list of (e_left, p_left, e_right, p_right) across vertical
                  interfaces; interfaces_y likewise across horizontal ones
    """

    spec: DomainSpec
    q1: int
    q2: int
    q_s: int
    colloc: np.ndarray
    measurement: np.ndarray
    bc: List[List[Tuple[int, int]]]
    interfaces_x: List[Tuple[int, int, int, int]] = field(default_factory=list)
    interfaces_y: List[Tuple[int, int, int, int]] = field(default_factory=list)

    @property
    def q(self):
        return self.q1 * self.q2

    @property
    def n_subdomains(self):
        return self.spec.n_subdomains

    def point_index(self, k, l):
        return k * self.q2 + l

    def n_continuity_rows(self):
        kx, ky = self.spec.cont_order
        return (kx + 1) * len(self.interfaces_x) + (ky + 1) * len(self.interfaces_y)


def build_discretization(spec, q, q_s, rng):
    """Build grids and index tables for a DomainSpec.

    q may be an int (Q1 = Q2 = q) or a pair (Q1, Q2).  Measurement points are
    drawn uniformly inside each subdomain from ``rng``; pass the same
    generator state to reproduce a layout.
    """
    if isinstance(q, int):
        q1 = q2 = q
    else:
        q1, q2 = q
    if q1 < 2 or q2 < 2:
        raise InvalidInputError("need at least 2 collocation points per direction")
    if q_s < 0:
        raise InvalidInputError("q_s must be non-negative")

    (a1, b1), (a2, b2) = spec.bounds
    n1, n2 = spec.n_sub
    x_edges = np.linspace(a1, b1, n1 + 1)
    y_edges = np.linspace(a2, b2, n2 + 1)

    n = spec.n_subdomains
    colloc = np.empty((n, q1 * q2, 2))
    measurement = np.empty((n, q_s, 2))
    for i in range(n1):
        for j in range(n2):
            e = spec.subdomain_index(i, j)
            # linspace pins both endpoints, so shared edges coincide exactly
            xs = np.linspace(x_edges[i], x_edges[i + 1], q1)
            ys = np.linspace(y_edges[j], y_edges[j + 1], q2)
            xv, yv = np.meshgrid(xs, ys, indexing="ij")
            colloc[e, :, 0] = xv.ravel()
            colloc[e, :, 1] = yv.ravel()
            measurement[e, :, 0] = rng.uniform(x_edges[i], x_edges[i + 1], q_s)
            measurement[e, :, 1] = rng.uniform(y_edges[j], y_edges[j + 1], q_s)

    def p(k, l):
        return k * q2 + l

    bc_left = [(spec.subdomain_index(0, j), p(0, l))
               for j in range(n2) for l in range(q2)]
    bc_right = [(spec.subdomain_index(n1 - 1, j), p(q1 - 1, l))
                for j in range(n2) for l in range(q2)]
    bc_bottom = [(spec.subdomain_index(i, 0), p(k, 0))
                 for i in range(n1) for k in range(q1)]
    bc_top = [(spec.subdomain_index(i, n2 - 1), p(k, q2 - 1))
              for i in range(n1) for k in range(q1)]

    interfaces_x = [
        (spec.subdomain_index(i, j), p(q1 - 1, l),
         spec.subdomain_index(i + 1, j), p(0, l))
        for i in range(n1 - 1) for j in range(n2) for l in range(q2)]
    interfaces_y = [
        (spec.subdomain_index(i, j), p(k, q2 - 1),
         spec.subdomain_index(i, j + 1), p(k, 0))
        for j in range(n2 - 1) for i in range(n1) for k in range(q1)]

    return Discretization(spec=spec, q1=q1, q2=q2, q_s=q_s, colloc=colloc,
                          measurement=measurement,
                          bc=[bc_left, bc_right, bc_bottom, bc_top],
                          interfaces_x=interfaces_x, interfaces_y=interfaces_y)


def locate_outer_boundary(disc):
    """Flattened outer-boundary enumeration: (edge_id, e, p) tuples in
    left/right/bottom/top block order, matching the residual layout."""
    out = []
    for edge_id, block in enumerate(disc.bc):
        out.extend((edge_id, e, p) for (e, p) in block)
    return out
