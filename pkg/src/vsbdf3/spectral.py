"""Tensor-product spectral collocation on the square, plus discrete norms.

Two operator families:

* Chebyshev collocation on [-1, 1]^2 with homogeneous Dirichlet boundary,
  realized by restricting the differentiation matrices to interior nodes.
  Quadrature uses the open (interior-node) Chebyshev weights, which are
  exact for the constant and integrate smooth functions at spectral rate;
  closed-rule weights restricted to the interior fail both.
* Fourier collocation on (0, 2*pi)^2 for periodic problems, with the
  standard trigonometric differentiation matrices (even M) and uniform
  quadrature weights h^2.

Unknowns are ordered row-major with y slow and x fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SpectralOperator",
    "FieldState",
    "chebyshev_nodes",
    "chebyshev_diff_matrix",
    "open_chebyshev_weights",
    "chebyshev_operator",
    "fourier_operator",
    "l2_norm",
    "energy",
]


@dataclass(frozen=True)
class SpectralOperator:
    """Discrete Laplacian, gradient components and quadrature on the unknowns.

    nodes_x/nodes_y are the 1-D unknown coordinates; L, Gx, Gy act on
    row-major flattened fields; w holds the area quadrature weight of each
    unknown.  Arrays are read-only.
    """

    kind: str
    nodes_x: np.ndarray
    nodes_y: np.ndarray
    L: np.ndarray
    Gx: np.ndarray
    Gy: np.ndarray
    w: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.w.size

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (X, Y) coordinates of the unknowns, y slow, x fast."""
        X = np.tile(self.nodes_x, self.nodes_y.size)
        Y = np.repeat(self.nodes_y, self.nodes_x.size)
        X.flags.writeable = False
        Y.flags.writeable = False
        return X, Y

    @property
    def domain_area(self) -> float:
        return float(self.w.sum())


@dataclass(frozen=True)
class FieldState:
    """Field values on the operator unknowns at one time level."""

    values: np.ndarray
    time: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def chebyshev_nodes(m: int) -> np.ndarray:
    """Gauss-Lobatto points cos(j*pi/m), j = 0..m (descending from 1 to -1)."""
    return np.cos(np.pi * np.arange(m + 1) / m)


def chebyshev_diff_matrix(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and the (m+1)x(m+1) first-derivative collocation matrix.

    Off-diagonal entries follow the (c_i/c_j)(-1)^{i+j}/(x_i-x_j) formula;
    diagonals come from the negative-sum trick, reproducing the
    +-(2m^2+1)/6 corners to rounding.
    """
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    x = chebyshev_nodes(m)
    c = np.ones(m + 1)
    c[0] = c[m] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def open_chebyshev_weights(m: int) -> np.ndarray:
    """Quadrature weights on the m-1 interior Gauss-Lobatto points of [-1, 1].

    w_j = (4/m) sin(theta_j) * sum_{odd k <= m} sin(k*theta_j)/k with
    theta_j = j*pi/m; the rule is interpolatory on the interior points and
    its weights sum to exactly 2.
    """
    if m < 2:
        raise ValueError(f"need m >= 2, got {m}")
    theta = np.pi * np.arange(1, m) / m
    k = 2.0 * np.arange(1, m // 2 + 1) - 1.0
    series = np.sin(np.outer(theta, k)) @ (1.0 / k)
    return (4.0 / m) * np.sin(theta) * series


def chebyshev_operator(m: int) -> SpectralOperator:
    """Dirichlet Laplacian/gradient on the (m-1)^2 interior nodes of [-1, 1]^2."""
    if m < 2:
        raise ValueError(f"need m >= 2 for interior unknowns, got {m}")
    x, D = chebyshev_diff_matrix(m)
    D2 = D @ D
    inner = slice(1, m)
    d2 = D2[inner, inner]
    d1 = D[inner, inner]
    nodes = x[inner].copy()
    eye = np.eye(m - 1)
    L = np.kron(eye, d2) + np.kron(d2, eye)
    Gx = np.kron(eye, d1)
    Gy = np.kron(d1, eye)
    w1 = open_chebyshev_weights(m)
    w = np.kron(w1, w1)
    return SpectralOperator(
        kind="chebyshev",
        nodes_x=_ro(nodes),
        nodes_y=_ro(nodes.copy()),
        L=_ro(L),
        Gx=_ro(Gx),
        Gy=_ro(Gy),
        w=_ro(w),
    )


def fourier_operator(m: int) -> SpectralOperator:
    """Periodic Laplacian/gradient on the m^2 nodes of (0, 2*pi)^2 (m even)."""
    if m < 4 or m % 2 != 0:
        raise ValueError(f"need even m >= 4, got {m}")
    h = 2.0 * np.pi / m
    nodes = h * np.arange(m)
    diff = np.arange(m)[:, None] - np.arange(m)[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = 0.5 * diff * h
        D1 = 0.5 * sign / np.tan(half)
        D2 = -0.5 * sign / np.sin(half) ** 2
    np.fill_diagonal(D1, 0.0)
    np.fill_diagonal(D2, -np.pi**2 / (3.0 * h**2) - 1.0 / 6.0)
    eye = np.eye(m)
    L = np.kron(eye, D2) + np.kron(D2, eye)
    Gx = np.kron(eye, D1)
    Gy = np.kron(D1, eye)
    w = np.full(m * m, h * h)
    return SpectralOperator(
        kind="fourier",
        nodes_x=_ro(nodes),
        nodes_y=_ro(nodes.copy()),
        L=_ro(L),
        Gx=_ro(Gx),
        Gy=_ro(Gy),
        w=_ro(w),
    )


def _values(op: SpectralOperator, f) -> np.ndarray:
    v = f.values if isinstance(f, FieldState) else np.asarray(f, dtype=float)
    if v.shape != (op.n_unknowns,):
        raise ValueError(
            f"field has shape {v.shape}, operator has {op.n_unknowns} unknowns"
        )
    return v


def l2_norm(op: SpectralOperator, f, weighting: str = "quadrature") -> float:
    """Discrete L2 norm of a field.

    "quadrature" (default) uses the operator's weights; "rms" is the plain
    root mean square over nodes, kept as a sensitivity check.
    """
    v = _values(op, f)
    if weighting == "quadrature":
        return math.sqrt(float(op.w @ (v * v)))
    if weighting == "rms":
        return math.sqrt(float(np.mean(v * v)))
    raise ValueError(f"unknown weighting {weighting!r}")


def energy(op: SpectralOperator, f, eps2: float) -> float:
    """Discrete free energy: (eps2/2)*||grad u||^2 + (1/4)*||u^2 - 1||^2."""
    v = _values(op, f)
    gx = op.Gx @ v
    gy = op.Gy @ v
    grad2 = float(op.w @ (gx * gx + gy * gy))
    bulk = v * v - 1.0
    return 0.5 * eps2 * grad2 + 0.25 * float(op.w @ (bulk * bulk))


def _ro(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a
