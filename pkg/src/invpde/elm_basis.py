"""Randomized feed-forward bases and their derivative jets.

Each subdomain carries a small feed-forward network whose hidden weights and
biases are drawn once, uniformly on [-r_m, r_m], and then frozen.  The M
outputs of the last hidden layer are the basis functions; only the linear
output coefficients are ever trained.  ``eval_basis_jets`` returns, for a
batch of 2-D points, the basis values together with first and pure second
partial derivatives (no mixed derivatives), obtained by propagating
second-order one-directional Taylor jets through the layers.  For a single
hidden layer this reduces to the closed-form chain rule.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import InvalidInputError

#: activation name -> (value, first derivative, second derivative)
ACTIVATIONS = {
    "gaussian": (
        lambda z: np.exp(-z * z),
        lambda z: -2.0 * z * np.exp(-z * z),
        lambda z: (4.0 * z * z - 2.0) * np.exp(-z * z),
    ),
    "tanh": (
        np.tanh,
        lambda z: 1.0 / np.cosh(z) ** 2,
        lambda z: -2.0 * np.tanh(z) / np.cosh(z) ** 2,
    ),
    # exact under a second-order jet; handy for unit tests
    "square": (
        lambda z: z * z,
        lambda z: 2.0 * z,
        lambda z: 2.0 * np.ones_like(z),
    ),
}


@dataclass(frozen=True)
class Architecture:
    """Layer widths [n_in, hidden..., n_out]; n_in must be 2."""

    layers: Tuple[int, ...]

    def __post_init__(self):
        if len(self.layers) < 3:
            raise InvalidInputError("architecture needs at least one hidden layer")
        if self.layers[0] != 2:
            raise InvalidInputError("input dimension must be 2")
        if any(n < 1 for n in self.layers):
            raise InvalidInputError("layer widths must be positive")

    @property
    def n_basis(self):
        """Number of basis functions M = width of the last hidden layer."""
        return self.layers[-2]


@dataclass
class HiddenParams:
    """Frozen hidden-layer parameters of one subdomain network."""

    arch: Architecture
    weights: List[np.ndarray]   # weights[k]: (n_{k}, n_{k+1})
    biases: List[np.ndarray]    # biases[k]: (n_{k+1},)
    r_m: float
    activation: str = "gaussian"


@dataclass
class Jets:
    """Value and partials of a batch of scalar fields on a batch of points.

    Arrays share a common shape, typically (points, M) for a basis table or
    (points,) for a single field.
    """

    val: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dyy: np.ndarray

    def component(self, name):
        return getattr(self, name)


JET_COMPONENTS = ("val", "dx", "dy", "dxx", "dyy")


def init_hidden(arch, r_m, seed, subdomain=0, identical=False,
                activation="gaussian", bounds=None):
    """Draw hidden parameters uniformly on [-r_m, r_m].

    ``subdomain`` selects an independent substream of the given seed so each
    subdomain gets its own draw; ``identical=True`` ignores the subdomain
    index so that every subdomain receives a bit-identical copy.

    ``bounds`` is the subdomain rectangle ((x0, x1), (y0, y1)) hosting this
    network.  When given, the input is normalised to [-1, 1]^2 before the
    first layer; the affine map is absorbed into the first-layer weights and
    biases, so evaluation code is unchanged and r_m keeps a geometry-free
    meaning.
    """
    if r_m <= 0:
        raise InvalidInputError("r_m must be positive")
    if activation not in ACTIVATIONS:
        raise InvalidInputError(f"unknown activation {activation!r}")
    key = [int(seed)] if identical else [int(seed), int(subdomain)]
    rng = np.random.default_rng(key)
    weights, biases = [], []
    for n_in, n_out in zip(arch.layers[:-2], arch.layers[1:-1]):
        weights.append(rng.uniform(-r_m, r_m, size=(n_in, n_out)))
        biases.append(rng.uniform(-r_m, r_m, size=n_out))
    if bounds is not None:
        (x0, x1), (y0, y1) = bounds
        if not (x1 > x0 and y1 > y0):
            raise InvalidInputError("bounds must be increasing")
        # sigma(w . (s x + c) + b) = sigma((s w) . x + (b + w . c))
        scale = np.array([2.0 / (x1 - x0), 2.0 / (y1 - y0)])
        shift = np.array([-(x0 + x1) / (x1 - x0), -(y0 + y1) / (y1 - y0)])
        w0 = weights[0]
        biases[0] = biases[0] + shift @ w0
        weights[0] = scale[:, None] * w0
    return HiddenParams(arch=arch, weights=weights, biases=biases,
                        r_m=float(r_m), activation=activation)


def eval_basis_jets(params, points):
    """Basis values and derivatives at ``points`` (P, 2) -> Jets of (P, M).

    Second derivatives are propagated per coordinate direction: with
    z = a W + b,  z' = a' W,  z'' = a'' W, the activation jet is
    sigma(z), sigma'(z) z', sigma''(z) z'^2 + sigma'(z) z''.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError("points must have shape (P, 2)")
    sig, dsig, ddsig = ACTIVATIONS[params.activation]

    a = pts
    # jets per direction: (first derivative, second derivative)
    ax = np.tile([1.0, 0.0], (pts.shape[0], 1))
    ay = np.tile([0.0, 1.0], (pts.shape[0], 1))
    axx = np.zeros_like(a)
    ayy = np.zeros_like(a)
    for w, b in zip(params.weights, params.biases):
        z = a @ w + b
        zx, zy = ax @ w, ay @ w
        zxx, zyy = axx @ w, ayy @ w
        s, ds, dds = sig(z), dsig(z), ddsig(z)
        a = s
        axx = dds * zx * zx + ds * zxx
        ayy = dds * zy * zy + ds * zyy
        ax = ds * zx
        ay = ds * zy
    return Jets(val=a, dx=ax, dy=ay, dxx=axx, dyy=ayy)


def eval_basis_values(params, points):
    """Basis values only; cheaper than the full jet when derivatives are
    not needed (error evaluation on fine grids, measurement rows)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError("points must have shape (P, 2)")
    sig = ACTIVATIONS[params.activation][0]
    a = pts
    for w, b in zip(params.weights, params.biases):
        a = sig(a @ w + b)
    return a
