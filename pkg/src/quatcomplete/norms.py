"""Q-Schatten-p norms and the three bilinear-factor surrogates.

The factor objectives

* ``QDFN``: ``(||U||_F^2 + ||V||_F^2) / 2``, minimum equals ``||X||_*``
* ``QDNN``: ``(||U||_* + ||V||_*)^2 / 4``, minimum equals ``||X||_{S_1/2}``
* ``QFNN``: ``((||U||_F^2 + 2 ||V||_*) / 3)^(3/2)``, minimum equals ``||X||_{S_2/3}``

are minimized over all factorizations ``X = U V^H``.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import DimensionError, InfeasibleRankError
from .qsvd import qsvd, quaternion_rank, singular_values
from .quaternion import QMatrix

__all__ = [
    "NormVariant",
    "q_schatten_p",
    "nuclear_norm",
    "factor_objective",
    "optimal_factors",
    "sv_product_bound",
]


class NormVariant(str, enum.Enum):
    QDFN = "qdfn"
    QDNN = "qdnn"
    QFNN = "qfnn"

    @property
    def schatten_p(self) -> float:
        """Exponent of the Q-Schatten quasi-norm this surrogate equals."""
        return {"qdfn": 1.0, "qdnn": 0.5, "qfnn": 2.0 / 3.0}[self.value]

    @classmethod
    def parse(cls, value) -> "NormVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", ""))
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {value!r}; expected one of {names}") from None


def q_schatten_p(a: QMatrix, p: float) -> float:
    """``(sum_k sigma_k^p)^(1/p)``.  For ``p < 1`` this is only a quasi-norm."""
    if not p > 0:
        raise ValueError("p must be positive")
    s = _drop_rounding(singular_values(a), a.shape)
    return float(np.sum(s ** p) ** (1.0 / p))


def _drop_rounding(s: np.ndarray, shape) -> np.ndarray:
    # rounding-level values would be inflated by fractional powers (1e-16 ** 0.5 = 1e-8)
    if s.size and s[0] > 0:
        s = np.where(s > max(shape) * np.finfo(float).eps * s[0], s, 0.0)
    return s


def nuclear_norm(a: QMatrix) -> float:
    return float(np.sum(singular_values(a)))


def _check_factors(u: QMatrix, v: QMatrix):
    if u.cols != v.cols:
        raise DimensionError(f"factor widths differ: {u.shape} vs {v.shape}")


def factor_objective(u: QMatrix, v: QMatrix, variant) -> float:
    variant = NormVariant.parse(variant)
    _check_factors(u, v)
    if variant is NormVariant.QDFN:
        return 0.5 * u.norm() ** 2 + 0.5 * v.norm() ** 2
    if variant is NormVariant.QDNN:
        return 0.25 * (nuclear_norm(u) + nuclear_norm(v)) ** 2
    return ((u.norm() ** 2 + 2.0 * nuclear_norm(v)) / 3.0) ** 1.5


def optimal_factors(a: QMatrix, d: int, variant, tol: float = 1e-10) -> tuple[QMatrix, QMatrix]:
    """Factors ``U, V`` (width ``d``) attaining the minimum of ``factor_objective``.

    With the QSVD ``a = A D B^H``: ``U = A D^(1/2)``, ``V = B D^(1/2)`` for
    QDFN and QDNN; ``U = A D^(1/3)``, ``V = B D^(2/3)`` for QFNN.
    """
    variant = NormVariant.parse(variant)
    r = quaternion_rank(a, tol)
    if d < r:
        raise InfeasibleRankError(f"d={d} is below the rank {r} of the matrix")
    eu, ev = (1 / 3, 2 / 3) if variant is NormVariant.QFNN else (0.5, 0.5)
    res = qsvd(a)
    s = _drop_rounding(res.singulars, a.shape)
    k = min(d, len(s))
    out_u = np.zeros((a.rows, d, 4))
    out_v = np.zeros((a.cols, d, 4))
    out_u[:, :k] = res.U[:, :k].scale_columns(s[:k] ** eu).data
    out_v[:, :k] = res.V[:, :k].scale_columns(s[:k] ** ev).data
    return QMatrix._wrap(out_u), QMatrix._wrap(out_v)


def sv_product_bound(u: QMatrix, v: QMatrix, p: float) -> tuple[float, float]:
    """Both sides of ``sum_k s_k^p(U V^H) <= sum_k s_k^p(U) s_k^p(V)``, ``k <= min(M, N, d)``."""
    _check_factors(u, v)
    if not p > 0:
        raise ValueError("p must be positive")
    kk = min(u.rows, v.rows, u.cols)
    su = singular_values(u)[:kk]
    sv = singular_values(v)[:kk]
    sx = singular_values(u @ v.H)[:kk]
    return float(np.sum(sx ** p)), float(np.sum(su ** p * sv ** p))
