"""Quaternion SVD through the equivalent complex matrix, and helpers built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRankError
from .quaternion import QMatrix, complex_adjoint

__all__ = [
    "QsvdResult",
    "qsvd",
    "singular_values",
    "qsvt",
    "quaternion_rank",
    "low_rank_factorize",
]

PAIR_RTOL = 1e-8
_CLUSTER_RTOL = 1e-8
_UNITARY_ATOL = 1e-11


@dataclass(frozen=True)
class QsvdResult:
    U: QMatrix
    singulars: np.ndarray
    V: QMatrix

    def reconstruct(self) -> QMatrix:
        k = len(self.singulars)
        return self.U[:, :k].scale_columns(self.singulars) @ self.V[:, :k].H


def _as_quaternion_columns(c: np.ndarray) -> QMatrix:
    # complex column [a; b] of a 2n-row adjoint block <-> quaternion vector a - conj(b) j
    n = c.shape[0] // 2
    return QMatrix.from_cd(c[:n], -c[n:].conj())


def _pairing_check(s2: np.ndarray) -> None:
    odd, even = s2[0::2], s2[1::2]
    scale = s2[0] if s2.size and s2[0] > 0 else 1.0
    if odd.shape != even.shape or np.max(np.abs(odd - even), initial=0.0) > PAIR_RTOL * scale:
        raise AssertionError("complex adjoint singular values are not paired; SVD ordering is broken")


def _clusters(sigma: np.ndarray, width: int) -> list[np.ndarray]:
    """Group column indices ``0..width-1`` whose singular values coincide.

    Columns past ``len(sigma)`` belong to the null space and count as zero.
    """
    vals = np.zeros(width)
    vals[: len(sigma)] = sigma
    gap = _CLUSTER_RTOL * max(vals[0] if width else 0.0, 1e-300)
    groups, start = [], 0
    for i in range(1, width + 1):
        if i == width or abs(vals[i - 1] - vals[i]) > gap:
            groups.append(np.arange(start, i))
            start = i
    return groups


def _gram_schmidt(cands: QMatrix, need: int, basis: QMatrix | None,
                  fallback: QMatrix | None = None) -> QMatrix:
    """Quaternion-orthonormal ``need`` columns spanning candidates, orthogonal to ``basis``.

    ``fallback`` columns are tried after the candidates; this is only valid
    where any orthonormal completion will do (the null-space cluster).
    """
    accepted = []
    pool = [cands[:, c] for c in range(cands.cols)]
    if fallback is not None:
        pool += [fallback[:, c] for c in range(fallback.cols)]
    for w in pool:
        for _ in range(2):
            for q in ([basis] if basis is not None and basis.cols else []) + accepted:
                w = w - q @ (q.H @ w)
        nrm = w.norm()
        if nrm > 1e-3:
            accepted.append(w / nrm)
            if len(accepted) == need:
                break
    if len(accepted) < need:
        raise np.linalg.LinAlgError("could not complete a quaternion orthonormal basis")
    return QMatrix._wrap(np.concatenate([a.data for a in accepted], axis=1))


def _completion_pool(c: np.ndarray) -> QMatrix:
    # every adjoint column, then the canonical basis
    n = c.shape[0] // 2
    cols = _as_quaternion_columns(c)
    return QMatrix._wrap(np.concatenate([cols.data, QMatrix.eye(n).data], axis=1))


def _orthonormality_error(q: QMatrix) -> float:
    g = q.H @ q
    return float(np.abs(g.data - QMatrix.eye(q.cols).data).max(initial=0.0))


def _repair(a: QMatrix, uc: np.ndarray, vc: np.ndarray, sigma: np.ndarray,
            u: QMatrix, v: QMatrix) -> tuple[QMatrix, QMatrix]:
    # Repeated singular values let the complex SVD return odd columns that are
    # complex-orthogonal but not quaternion-orthogonal.  Rebuild each affected
    # cluster from its full 2k-dimensional complex singular subspace.
    ucols = [u[:, i] for i in range(u.cols)]
    vcols = [v[:, i] for i in range(v.cols)]
    # values this small sit in the same cluster as an exact zero
    positive = sigma > _CLUSTER_RTOL * sigma[0]
    for grp in _clusters(sigma, u.cols):
        if len(grp) < 2 and grp[0] < len(sigma) and positive[grp[0]]:
            continue
        others = [ucols[i] for i in range(u.cols) if i < grp[0]]
        basis = QMatrix._wrap(np.concatenate([o.data for o in others], axis=1)) if others else None
        cand_idx = np.concatenate([[2 * i, 2 * i + 1] for i in grp])
        cand_idx = cand_idx[cand_idx < uc.shape[1]]
        null = grp[0] >= len(sigma) or not positive[grp[0]]
        new = _gram_schmidt(_as_quaternion_columns(uc[:, cand_idx]), len(grp), basis,
                            _completion_pool(uc) if null else None)
        for pos, i in enumerate(grp):
            ucols[i] = new[:, pos]
    for grp in _clusters(sigma, v.cols):
        in_range = [i for i in grp if i < len(sigma) and positive[i] and i < u.cols]
        for i in in_range:
            vcols[i] = (a.H @ ucols[i]) / sigma[i]
        rest = [i for i in grp if i not in in_range]
        if rest:
            prior = [vcols[i] for i in range(v.cols) if i < rest[0]]
            basis = QMatrix._wrap(np.concatenate([p.data for p in prior], axis=1)) if prior else None
            cand_idx = np.concatenate([[2 * i, 2 * i + 1] for i in grp])
            cand_idx = cand_idx[cand_idx < vc.shape[1]]
            new = _gram_schmidt(_as_quaternion_columns(vc[:, cand_idx]), len(rest), basis,
                                _completion_pool(vc))
            for pos, i in enumerate(rest):
                vcols[i] = new[:, pos]
    u = QMatrix._wrap(np.concatenate([c.data for c in ucols], axis=1))
    v = QMatrix._wrap(np.concatenate([c.data for c in vcols], axis=1))
    return u, v


def qsvd(a: QMatrix, mode: str = "thin") -> QsvdResult:
    """Quaternion SVD ``a = U diag(s) V^H``.

    The complex SVD of the adjoint returns every quaternion singular value
    twice; the odd-indexed values and columns are kept.  ``mode="thin"``
    returns ``min(M, N)`` columns, ``mode="full"`` square unitaries.
    """
    if mode not in ("thin", "full"):
        raise ValueError(f"mode must be 'thin' or 'full', got {mode!r}")
    m, n = a.shape
    k = min(m, n)
    full = mode == "full"
    if a.norm() == 0.0:
        return QsvdResult(QMatrix.eye(m, m if full else k), np.zeros(k),
                          QMatrix.eye(n, n if full else k))
    uc, s2, vch = np.linalg.svd(complex_adjoint(a), full_matrices=full)
    _pairing_check(s2)
    vc = vch.conj().T
    sigma = s2[0::2].copy()
    u = _as_quaternion_columns(uc[:, 0::2])
    v = _as_quaternion_columns(vc[:, 0::2])
    if max(_orthonormality_error(u), _orthonormality_error(v)) > _UNITARY_ATOL:
        u, v = _repair(a, uc, vc, sigma, u, v)
    return QsvdResult(u, sigma, v)


def singular_values(a: QMatrix) -> np.ndarray:
    """Nonincreasing quaternion singular values (``min(M, N)`` of them)."""
    if a.norm() == 0.0:
        return np.zeros(min(a.shape))
    s2 = np.linalg.svd(complex_adjoint(a), compute_uv=False)
    _pairing_check(s2)
    return s2[0::2].copy()


def qsvt(m: QMatrix, delta: float) -> QMatrix:
    """Singular value soft-thresholding: the prox of ``delta * ||.||_*``."""
    if not delta >= 0:
        raise ValueError(f"threshold must be nonnegative, got {delta}")
    res = qsvd(m)
    shrunk = np.maximum(res.singulars - delta, 0.0)
    keep = int(np.count_nonzero(shrunk))
    if keep == 0:
        return QMatrix.zeros(*m.shape)
    return res.U[:, :keep].scale_columns(shrunk[:keep]) @ res.V[:, :keep].H


def quaternion_rank(a: QMatrix, tol: float = 1e-10) -> int:
    """Number of singular values above ``tol * sigma_1``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def low_rank_factorize(a: QMatrix, d: int, tol: float = 1e-10) -> tuple[QMatrix, QMatrix]:
    """Factor ``a = U V^H`` with ``U`` of shape ``M x d`` and ``V`` of shape ``N x d``.

    Uses the balanced split ``U = A [D^(1/2); 0]``, ``V = B [D^(1/2); 0]``
    of the QSVD ``a = A D B^H``.
    """
    r = quaternion_rank(a, tol)
    if d < r:
        raise InfeasibleRankError(f"d={d} is below the rank {r} of the matrix")
    m, n = a.shape
    res = qsvd(a)
    s = res.singulars.copy()
    if s.size and s[0] > 0:
        s[s <= tol * s[0]] = 0.0
    k = min(d, len(s))
    root = np.sqrt(s[:k])
    u = np.zeros((m, d, 4))
    v = np.zeros((n, d, 4))
    u[:, :k] = res.U[:, :k].scale_columns(root).data
    v[:, :k] = res.V[:, :k].scale_columns(root).data
    return QMatrix._wrap(u), QMatrix._wrap(v)
