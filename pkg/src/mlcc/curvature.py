"""Pointwise curvature operator of a matrix field and log-concavity tests.

The curvature blocks are theta_{j,k} = d_k(g^{-1} d_j g); multiplied by g
they assemble into a symmetric dn x dn matrix whose nonpositivity (in the
block-weighted inner product) is the Nakano log-concavity condition.  The
weaker Griffiths condition tests the same operator on rank-one directions
only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, NotPositiveError, SymmetryError
from .fields import Jet2, MatrixField
from .metric import (
    ColumnBlockMatrix,
    ExtendedReal,
    QuadraticFormSpec,
    SpdMatrix,
    polar_value,
)

#: Largest generalized eigenvalue below which the operator counts as nonpositive.
TOL_PSD = 1e-9

#: Relative asymmetry of the assembled operator beyond which the jet is broken.
ASYMMETRY_TOL = 1e-6


def theta_block(jet: Jet2, j: int, k: int) -> np.ndarray:
    """Curvature block theta_{j,k} = g^{-1}[d2_{kj} g - (d_k g) g^{-1} (d_j g)].

    Indices are 0-based.  Solves against g, never forming its inverse.
    """
    n = jet.n
    if not (0 <= j < n and 0 <= k < n):
        raise InputError(f"block index ({j}, {k}) out of range for n={n}")
    g = jet.value.entries
    inner = jet.d2[k, j] - jet.d1[k] @ np.linalg.solve(g, jet.d1[j])
    return np.linalg.solve(g, inner)


def _theta_tilde_blocks(jet: Jet2) -> np.ndarray:
    """All raw blocks g * theta_{j,k} = d2_{kj} g - (d_k g) g^{-1} (d_j g)."""
    n, d = jet.n, jet.d
    g = jet.value.entries
    ginv_d1 = np.linalg.solve(g, jet.d1)
    blocks = np.empty((n, n, d, d))
    for j in range(n):
        for k in range(n):
            blocks[j, k] = jet.d2[k, j] - jet.d1[k] @ ginv_d1[j]
    return blocks


@dataclass(frozen=True)
class CurvatureMatrix:
    """The curvature operator at a point, as a dn x dn symmetric matrix.

    Index (j, l) of the flattened space is j*d + l for column j and
    coordinate l (0-based).  ``metric`` is the block-diagonal id_n (x) g.
    ``asymmetry`` records the pre-symmetrization asymmetry norm.
    """

    d: int
    n: int
    theta_tilde: np.ndarray
    metric: SpdMatrix
    g: SpdMatrix
    asymmetry: float

    @property
    def dim(self) -> int:
        return self.d * self.n

    def block(self, j: int, k: int) -> np.ndarray:
        """Symmetrized block g*theta_{j,k} (row-block k, column-block j)."""
        d = self.d
        return self.theta_tilde[k * d : (k + 1) * d, j * d : (j + 1) * d]

    def quadratic_form(self, u: ColumnBlockMatrix) -> float:
        v = u.flatten()
        return float(v @ self.theta_tilde @ v)


def curvature_from_jet(jet: Jet2) -> CurvatureMatrix:
    """Assemble the symmetric curvature matrix from a 2-jet."""
    n, d = jet.n, jet.d
    blocks = _theta_tilde_blocks(jet)
    raw = np.empty((n * d, n * d))
    for j in range(n):
        for k in range(n):
            # quadratic-form consistent placement: row-block k, column-block j
            raw[k * d : (k + 1) * d, j * d : (j + 1) * d] = blocks[j, k]
    asym = float(np.linalg.norm(raw - raw.T))
    scale = float(np.linalg.norm(raw))
    if scale > 0.0 and asym > ASYMMETRY_TOL * scale:
        raise SymmetryError(
            f"curvature matrix asymmetry {asym:.3e} exceeds {ASYMMETRY_TOL:.0e} "
            f"of norm {scale:.3e}; the jet is inconsistent"
        )
    theta = 0.5 * (raw + raw.T)
    theta.setflags(write=False)
    metric = SpdMatrix(np.kron(np.eye(n), jet.value.entries))
    return CurvatureMatrix(
        d=d, n=n, theta_tilde=theta, metric=metric, g=jet.value, asymmetry=asym
    )


def curvature_matrix(field: MatrixField, x) -> CurvatureMatrix:
    """Curvature operator of ``field`` at ``x``."""
    return curvature_from_jet(field.jet(x))


class NakanoVerdict(NamedTuple):
    lambda_max: float
    is_nlogconcave: bool
    lambda_max_std: float


def nakano_verdict(cm: CurvatureMatrix, tol_psd: float = TOL_PSD) -> NakanoVerdict:
    """Largest generalized eigenvalue of (theta_tilde, metric) and the verdict.

    ``lambda_max_std`` is the largest standard eigenvalue of theta_tilde; it
    shares the sign of ``lambda_max`` since the metric is positive definite.
    """
    _, invroot = cm.metric.sqrt_and_invsqrt()
    pencil = invroot @ cm.theta_tilde @ invroot
    lam = np.linalg.eigvalsh(0.5 * (pencil + pencil.T))
    lam_std = np.linalg.eigvalsh(cm.theta_tilde)
    lam_max = float(lam[-1])
    return NakanoVerdict(lam_max, lam_max <= tol_psd, float(lam_std[-1]))


def generalized_spectrum(cm: CurvatureMatrix) -> np.ndarray:
    """All generalized eigenvalues of (theta_tilde, metric), ascending."""
    _, invroot = cm.metric.sqrt_and_invsqrt()
    pencil = invroot @ cm.theta_tilde @ invroot
    return np.linalg.eigvalsh(0.5 * (pencil + pencil.T))


def griffiths_min_gap(
    cm: CurvatureMatrix,
    n_starts: int = 32,
    max_iter: int = 200,
    seed: int = 0,
    tol: float = 1e-10,
) -> float:
    """Best found value of <Theta(y (x) u), y (x) u> over unit rank-one pairs.

    Alternating maximization (top generalized eigenvector in u at fixed y,
    top eigenvector in y at fixed u), multi-started; the result is a lower
    bound on the true rank-one maximum.
    """
    if n_starts < 8:
        raise InputError("need at least 8 starts")
    d, n = cm.d, cm.n
    g = cm.g.entries
    blocks = np.array([[cm.block(j, k) for k in range(n)] for j in range(n)])
    root, invroot = cm.g.sqrt_and_invsqrt()
    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(n_starts):
        y = rng.standard_normal(n)
        y /= np.linalg.norm(y)
        u = rng.standard_normal(d)
        u /= np.sqrt(u @ g @ u)
        prev = -np.inf
        for _ in range(max_iter):
            # u-step: top generalized eigenpair of (sum y_j y_k block_{j,k}, g)
            a = np.einsum("j,k,jkab->ab", y, y, blocks)
            pencil = invroot @ (0.5 * (a + a.T)) @ invroot
            lam, w = np.linalg.eigh(0.5 * (pencil + pencil.T))
            u = invroot @ w[:, -1]
            # y-step: top eigenpair of the n x n matrix [u^T block_{j,k} u]
            b = np.einsum("a,jkab,b->jk", u, blocks, u)
            lam_y, w_y = np.linalg.eigh(0.5 * (b + b.T))
            y = w_y[:, -1]
            val = float(lam_y[-1]) / float(u @ g @ u)
            if abs(val - prev) <= tol * max(1.0, abs(val)):
                prev = val
                break
            prev = val
        best = max(best, prev)
    return best


@dataclass(frozen=True)
class BlockSplit:
    """Coordinate split of the curvature matrix into (0,0), (0,1), (1,1) parts.

    ``theta01_tilde`` maps flattened V0 to the flattened weighted image; the
    action of the mixed operator itself requires a solve against the metric.
    """

    d: int
    n0: int
    n1: int
    theta00: np.ndarray
    theta01_tilde: np.ndarray
    theta11: np.ndarray
    g: SpdMatrix
    metric0: SpdMatrix
    metric1: SpdMatrix


def block_split(cm: CurvatureMatrix, n0: int) -> BlockSplit:
    """Split off the first ``n0`` column-blocks of the curvature operator."""
    if not 1 <= n0 < cm.n:
        raise InputError(f"n0 must satisfy 1 <= n0 < {cm.n}")
    d = cm.d
    n1 = cm.n - n0
    cut = n0 * d
    t = cm.theta_tilde
    return BlockSplit(
        d=d,
        n0=n0,
        n1=n1,
        theta00=t[:cut, :cut],
        theta01_tilde=t[cut:, :cut],
        theta11=t[cut:, cut:],
        g=cm.g,
        metric0=SpdMatrix(np.kron(np.eye(n0), cm.g.entries)),
        metric1=SpdMatrix(np.kron(np.eye(n1), cm.g.entries)),
    )


def mixed_block_action(split: BlockSplit, v0: ColumnBlockMatrix) -> ColumnBlockMatrix:
    """Theta_{0,1} V0 = [sum_j theta_{j, n0+k} v_j]_k as a d x n1 block matrix."""
    if v0.d != split.d or v0.n != split.n0:
        raise InputError("V0 shape does not match the split")
    weighted = split.theta01_tilde @ v0.flatten()
    flat = np.linalg.solve(split.metric1.entries, weighted)
    return ColumnBlockMatrix.from_flat(flat, split.d)


def schur_gap(
    split: BlockSplit, v0: ColumnBlockMatrix, rel_null_tol: float = 1e-10
) -> ExtendedReal:
    """<-Theta_00 V0, V0> minus the polar Q°_11 at Theta_01 V0.

    Nonnegative (up to numerics) when the parent field is N-log-concave;
    an infinite polar along a degenerate direction yields -inf.
    """
    if v0.d != split.d or v0.n != split.n0:
        raise InputError("V0 shape does not match the split")
    flat0 = v0.flatten()
    lead = -float(flat0 @ split.theta00 @ flat0)
    image = split.theta01_tilde @ flat0
    mixed = np.linalg.solve(split.metric1.entries, image)
    spec = QuadraticFormSpec(split.metric1, -split.theta11)
    polar = polar_value(spec, mixed, rel_null_tol)
    if polar.is_infinite:
        return ExtendedReal.infinite(-1)
    return ExtendedReal(lead - polar.value)
