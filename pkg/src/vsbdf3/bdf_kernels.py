"""Variable-step backward-differentiation kernels and their matrix forms.

Level n uses the one-step kernel for n = 1, the two-step kernel for n = 2
and the three-step kernel from n = 3 on.  Weights depend only on the local
data (tau_n, r_n, r_{n-1}) and are recomputed per level, so time stepping
never touches the N x N matrices; those exist for analysis and diagnostics.

The inverse kernels (rows of D = B^{-1}) are computed by the backward
recursion that defines them, one column at a time, exploiting that B has
lower bandwidth 3.  Total cost is O(N^2); matrix inversion is reserved for
test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .time_grid import TimeGrid

__all__ = [
    "BdfCoefficients",
    "KernelMatrices",
    "bdf1_weight",
    "bdf2_weights",
    "bdf3_weights",
    "scaled_bdf2_weights",
    "scaled_bdf3_weights",
    "bdf_coefficients",
    "assemble_B",
    "doc_kernels",
    "apply_D3",
]


@dataclass(frozen=True)
class BdfCoefficients:
    """Kernel weights at one time level; absent weights are exact zeros."""

    level: int
    b0: float
    b1: float = 0.0
    b2: float = 0.0


@dataclass(frozen=True)
class KernelMatrices:
    """Kernel matrix B, its step-scaled symmetrization A, and optionally D = B^{-1}.

    B is lower triangular with bandwidth 3.  Lambda holds the diagonal of the
    step matrix as a 1-D vector, and A = Lambda^{1/2} B Lambda^{1/2}.  D is
    None until the inverse kernels are requested.  Arrays are read-only.
    """

    B: np.ndarray
    Lambda: np.ndarray
    A: np.ndarray
    D: np.ndarray | None = None


def bdf1_weight(tau1: float) -> float:
    return 1.0 / tau1


def bdf2_weights(tau2: float, r2: float) -> tuple[float, float]:
    den = tau2 * (1.0 + r2)
    return (1.0 + 2.0 * r2) / den, -(r2 * r2) / den


def bdf3_weights(tau_n: float, r_n: float, r_nm1: float) -> tuple[float, float, float]:
    """Three-step weights (b0, b1, b2) from the step and the two trailing ratios."""
    den = tau_n * (1.0 + r_n) * (1.0 + r_nm1) * (1.0 + r_nm1 + r_n * r_nm1)
    b0 = (1.0 + r_nm1) * (1.0 + 2.0 * r_n + r_nm1 * (1.0 + 4.0 * r_n + 3.0 * r_n**2)) / den
    b1 = -(r_n**2) * ((1.0 + 2.0 * r_nm1 + r_n * r_nm1) ** 2 - r_nm1 * (1.0 + r_nm1)) / den
    b2 = (r_n**2) * (r_nm1**3) * (1.0 + r_n) ** 2 / den
    return b0, b1, b2


def scaled_bdf2_weights(r2: float) -> tuple[float, float]:
    """Dimensionless two-step weights: row 2 of Lambda^{1/2} B Lambda^{1/2}."""
    return (1.0 + 2.0 * r2) / (1.0 + r2), -(r2**1.5) / (1.0 + r2)


def scaled_bdf3_weights(r_n: float, r_nm1: float) -> tuple[float, float, float]:
    """Dimensionless three-step weights (a0, a1, a2); only ratios enter."""
    den = (1.0 + r_n) * (1.0 + r_nm1) * (1.0 + r_nm1 + r_n * r_nm1)
    a0 = (1.0 + r_nm1) * (1.0 + 2.0 * r_n + r_nm1 * (1.0 + 4.0 * r_n + 3.0 * r_n**2)) / den
    a1 = -(r_n**1.5) * ((1.0 + 2.0 * r_nm1 + r_n * r_nm1) ** 2 - r_nm1 * (1.0 + r_nm1)) / den
    a2 = (r_n**1.5) * (r_nm1**2.5) * (1.0 + r_n) ** 2 / den
    return a0, a1, a2


def bdf_coefficients(grid: TimeGrid, n: int) -> BdfCoefficients:
    """Kernel weights for level n on the given grid (1-based, n <= N)."""
    if not 1 <= n <= grid.n_steps:
        raise ValueError(f"level {n} outside 1..{grid.n_steps}")
    if n == 1:
        return BdfCoefficients(1, bdf1_weight(grid.step(1)))
    if n == 2:
        b0, b1 = bdf2_weights(grid.step(2), grid.ratio(2))
        return BdfCoefficients(2, b0, b1)
    b0, b1, b2 = bdf3_weights(grid.step(n), grid.ratio(n), grid.ratio(n - 1))
    return BdfCoefficients(n, b0, b1, b2)


def _kernel_rows(grid: TimeGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-level weight arrays b0[j], b1[j], b2[j], 1-based (index 0 unused)."""
    n = grid.n_steps
    b0 = np.zeros(n + 1)
    b1 = np.zeros(n + 1)
    b2 = np.zeros(n + 1)
    b0[1] = bdf1_weight(grid.step(1))
    if n >= 2:
        b0[2], b1[2] = bdf2_weights(grid.step(2), grid.ratio(2))
    for j in range(3, n + 1):
        b0[j], b1[j], b2[j] = bdf3_weights(grid.step(j), grid.ratio(j), grid.ratio(j - 1))
    return b0, b1, b2


def assemble_B(grid: TimeGrid) -> KernelMatrices:
    """Assemble B (lower triangular, bandwidth 3), Lambda and A for the grid."""
    n = grid.n_steps
    b0, b1, b2 = _kernel_rows(grid)
    B = np.zeros((n, n))
    idx = np.arange(n)
    B[idx, idx] = b0[1:]
    if n >= 2:
        B[idx[1:], idx[:-1]] = b1[2:]
    if n >= 3:
        B[idx[2:], idx[:-2]] = b2[3:]
    tau = np.asarray(grid.steps)
    root = np.sqrt(tau)
    A = root[:, None] * B * root[None, :]
    return KernelMatrices(B=_ro(B), Lambda=_ro(tau.copy()), A=_ro(A))


def doc_kernels(grid: TimeGrid) -> KernelMatrices:
    """Kernel matrices with D filled in by the inverse-kernel recursion.

    Row n of D satisfies d_0^(n) = 1/b0^(n) and, for k < n,
        d_{n-k}^(n) = -(1/b0^(k)) * sum_{j>k} d_{n-j}^(n) b_{j-k}^(j),
    where only j = k+1 and j = k+2 contribute (bandwidth 3).  The recursion
    is evaluated one column at a time so every row advances with vector ops.
    """
    km = assemble_B(grid)
    n = grid.n_steps
    b0, b1, b2 = _kernel_rows(grid)
    D = np.zeros((n, n))
    idx = np.arange(n)
    D[idx, idx] = 1.0 / b0[1:]
    # column j (0-based) holds d_{n-k}^(n) for k = j+1; rows i = j+1..n-1
    for j in range(n - 2, -1, -1):
        acc = D[j + 1 :, j + 1] * b1[j + 2]
        if j + 2 < n:
            acc[1:] += D[j + 2 :, j + 2] * b2[j + 3]
        D[j + 1 :, j] = -acc / b0[j + 1]
    return KernelMatrices(B=km.B, Lambda=km.Lambda, A=km.A, D=_ro(D))


def apply_D3(grid: TimeGrid, history) -> float | np.ndarray:
    """Discrete time derivative at level n = len(history)-1.

    history holds values (scalars or arrays of equal shape) at levels
    0..n; the level-appropriate kernel weights the backward differences.
    """
    n = len(history) - 1
    if n < 1:
        raise ValueError("history must span at least levels 0 and 1")
    c = bdf_coefficients(grid, n)
    out = c.b0 * (history[n] - history[n - 1])
    if n >= 2:
        out = out + c.b1 * (history[n - 1] - history[n - 2])
    if n >= 3:
        out = out + c.b2 * (history[n - 2] - history[n - 3])
    return out


def _ro(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a
