"""Quaternion scalars, dense quaternion matrices and observation masks.

A quaternion matrix is stored as a real array of shape ``(M, N, 4)`` holding
the components ``q0 + q1 i + q2 j + q3 k`` of each entry, row-major.  Products
go through the Cayley-Dickson split ``Q = Qa + Qb j`` with complex
``Qa = Q0 + Q1 i`` and ``Qb = Q2 + Q3 i``, so every quaternion matmul costs
four complex matmuls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SingularMatrixError, StructureError

__all__ = [
    "Quaternion",
    "qmul",
    "QMatrix",
    "matmul",
    "conj_transpose",
    "frobenius_norm",
    "inner",
    "complex_adjoint",
    "from_complex_adjoint",
    "ObservationMask",
    "project_omega",
    "hermitian_solve",
    "inverse",
]


@dataclass(frozen=True)
class Quaternion:
    """Scalar quaternion ``q0 + q1 i + q2 j + q3 k``."""

    q0: float = 0.0
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a = np.asarray(arr, dtype=float).reshape(4)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    @property
    def real(self) -> float:
        return self.q0

    @property
    def imag(self) -> "Quaternion":
        return Quaternion(0.0, self.q1, self.q2, self.q3)

    def conj(self) -> "Quaternion":
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def __abs__(self) -> float:
        return math.sqrt(self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2)

    modulus = __abs__

    def is_pure(self) -> bool:
        return self.q0 == 0.0

    def __add__(self, other):
        other = _as_quaternion(other)
        if other is NotImplemented:
            return other
        return Quaternion(self.q0 + other.q0, self.q1 + other.q1,
                          self.q2 + other.q2, self.q3 + other.q3)

    __radd__ = __add__

    def __neg__(self):
        return Quaternion(-self.q0, -self.q1, -self.q2, -self.q3)

    def __sub__(self, other):
        other = _as_quaternion(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = _as_quaternion(other)
        if other is NotImplemented:
            return other
        return qmul(self, other)

    def __rmul__(self, other):
        other = _as_quaternion(other)
        if other is NotImplemented:
            return other
        return qmul(other, self)


def _as_quaternion(x):
    if isinstance(x, Quaternion):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Quaternion(float(x))
    return NotImplemented


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product ``a b`` (non-commutative)."""
    p0, p1, p2, p3 = a.q0, a.q1, a.q2, a.q3
    q0, q1, q2, q3 = b.q0, b.q1, b.q2, b.q3
    return Quaternion(
        p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
        p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
        p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
        p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
    )


class QMatrix:
    """Immutable dense quaternion matrix backed by an ``(M, N, 4)`` float array."""

    __slots__ = ("_data",)
    __array_priority__ = 1000

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise DimensionError(f"expected an (M, N, 4) array, got shape {arr.shape}")
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "QMatrix":
        # Internal constructor: takes ownership of ``arr`` without copying.
        obj = object.__new__(cls)
        arr.flags.writeable = False
        obj._data = arr
        return obj

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int) -> "QMatrix":
        return cls._wrap(np.zeros((rows, cols, 4)))

    @classmethod
    def eye(cls, rows: int, cols: int | None = None) -> "QMatrix":
        """Identity, zero padded to ``rows x cols`` when the matrix is rectangular."""
        cols = rows if cols is None else cols
        arr = np.zeros((rows, cols, 4))
        k = min(rows, cols)
        arr[np.arange(k), np.arange(k), 0] = 1.0
        return cls._wrap(arr)

    @classmethod
    def from_components(cls, q0, q1=None, q2=None, q3=None) -> "QMatrix":
        q0 = np.asarray(q0, dtype=np.float64)
        if q0.ndim != 2:
            raise DimensionError("components must be 2-D arrays")
        parts = [q0] + [np.zeros_like(q0) if q is None else np.asarray(q, dtype=np.float64)
                        for q in (q1, q2, q3)]
        for p in parts:
            if p.shape != q0.shape:
                raise DimensionError("component shapes differ")
        return cls._wrap(np.stack(parts, axis=-1))

    @classmethod
    def from_cd(cls, qa, qb) -> "QMatrix":
        """Build ``Qa + Qb j`` from the two complex Cayley-Dickson parts."""
        qa = np.asarray(qa, dtype=np.complex128)
        qb = np.asarray(qb, dtype=np.complex128)
        if qa.shape != qb.shape or qa.ndim != 2:
            raise DimensionError("Cayley-Dickson parts must be equal-shape 2-D arrays")
        arr = np.empty(qa.shape + (4,))
        arr[..., 0] = qa.real
        arr[..., 1] = qa.imag
        arr[..., 2] = qb.real
        arr[..., 3] = qb.imag
        return cls._wrap(arr)

    @classmethod
    def from_quaternions(cls, rows) -> "QMatrix":
        """Build from a nested list of :class:`Quaternion` (or real numbers)."""
        arr = np.array([[_as_quaternion(q).as_array() for q in row] for row in rows],
                       dtype=np.float64)
        return cls(arr.reshape(len(rows), -1, 4))

    @classmethod
    def random(cls, rows: int, cols: int, rng=None, scale: float = 1.0) -> "QMatrix":
        """Entries with i.i.d. standard normal components."""
        rng = np.random.default_rng(rng)
        return cls._wrap(scale * rng.standard_normal((rows, cols, 4)))

    # -- views ------------------------------------------------------------
    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape[:2]

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        d = self._data
        return d[..., 0], d[..., 1], d[..., 2], d[..., 3]

    @property
    def real(self) -> np.ndarray:
        return self._data[..., 0]

    def cd(self) -> tuple[np.ndarray, np.ndarray]:
        """Complex Cayley-Dickson parts ``(Qa, Qb)`` with ``Q = Qa + Qb j``."""
        d = self._data
        return d[..., 0] + 1j * d[..., 1], d[..., 2] + 1j * d[..., 3]

    def entry(self, m: int, n: int) -> Quaternion:
        return Quaternion.from_array(self._data[m, n])

    def is_pure(self) -> bool:
        return bool(np.all(self._data[..., 0] == 0.0))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self._data).all())

    def __getitem__(self, key) -> "QMatrix":
        if not isinstance(key, tuple) or len(key) != 2:
            raise IndexError("QMatrix indexing needs a (rows, cols) pair")
        r, c = key
        if isinstance(r, (int, np.integer)):
            r = slice(r, r + 1) if r != -1 else slice(r, None)
        if isinstance(c, (int, np.integer)):
            c = slice(c, c + 1) if c != -1 else slice(c, None)
        sub = self._data[r][:, c]
        return QMatrix._wrap(np.array(sub))

    def __repr__(self) -> str:
        return f"QMatrix(shape={self.shape})"

    # -- algebra ----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        _check_same(self, other)
        return QMatrix._wrap(self._data + other._data)

    def __sub__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        _check_same(self, other)
        return QMatrix._wrap(self._data - other._data)

    def __neg__(self):
        return QMatrix._wrap(-self._data)

    def __mul__(self, s):
        # real scalars only; quaternion products use @
        if isinstance(s, (int, float, np.floating, np.integer)):
            return QMatrix._wrap(self._data * float(s))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, s):
        if isinstance(s, (int, float, np.floating, np.integer)):
            return QMatrix._wrap(self._data / float(s))
        return NotImplemented

    def __matmul__(self, other):
        if not isinstance(other, QMatrix):
            return NotImplemented
        return matmul(self, other)

    def scale_columns(self, w) -> "QMatrix":
        """Right-multiply by the real diagonal matrix ``diag(w)``."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.cols,):
            raise DimensionError("weight vector length must equal the column count")
        return QMatrix._wrap(self._data * w[None, :, None])

    def conj(self) -> "QMatrix":
        out = self._data.copy()
        out[..., 1:] *= -1.0
        return QMatrix._wrap(out)

    @property
    def H(self) -> "QMatrix":
        return conj_transpose(self)

    @property
    def T(self) -> "QMatrix":
        return QMatrix._wrap(np.ascontiguousarray(self._data.transpose(1, 0, 2)))

    def norm(self) -> float:
        return frobenius_norm(self)

    def allclose(self, other: "QMatrix", rtol: float = 1e-10, atol: float = 0.0) -> bool:
        """Frobenius-relative closeness: ``||A - B|| <= atol + rtol * max(||A||, ||B||)``."""
        _check_same(self, other)
        diff = np.linalg.norm((self._data - other._data).ravel())
        scale = max(np.linalg.norm(self._data.ravel()), np.linalg.norm(other._data.ravel()))
        return bool(diff <= atol + rtol * scale)


def _check_same(a: QMatrix, b: QMatrix):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def matmul(a: QMatrix, b: QMatrix) -> QMatrix:
    """Quaternion matrix product ``a @ b`` with factor order preserved."""
    if a.cols != b.rows:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    aa, ab = a.cd()
    ba, bb = b.cd()
    # (Aa + Ab j)(Ba + Bb j) = (Aa Ba - Ab conj(Bb)) + (Aa Bb + Ab conj(Ba)) j
    return QMatrix.from_cd(aa @ ba - ab @ bb.conj(), aa @ bb + ab @ ba.conj())


def conj_transpose(a: QMatrix) -> QMatrix:
    out = a.data.transpose(1, 0, 2).copy()
    out[..., 1:] *= -1.0
    return QMatrix._wrap(out)


def frobenius_norm(a: QMatrix) -> float:
    return float(np.linalg.norm(a.data.ravel()))


def inner(a: QMatrix, b: QMatrix) -> float:
    """Real inner product ``Re tr(a^H b)``."""
    _check_same(a, b)
    return float(np.dot(a.data.ravel(), b.data.ravel()))


def complex_adjoint(a: QMatrix) -> np.ndarray:
    """Equivalent ``2M x 2N`` complex matrix ``[[Qa, Qb], [-conj(Qb), conj(Qa)]]``."""
    qa, qb = a.cd()
    return np.block([[qa, qb], [-qb.conj(), qa.conj()]])


def from_complex_adjoint(c, tol: float = 1e-10) -> QMatrix:
    """Inverse of :func:`complex_adjoint`; checks the block layout within ``tol``."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] % 2 or c.shape[1] % 2:
        raise StructureError(f"complex adjoint must have even dimensions, got {c.shape}")
    m, n = c.shape[0] // 2, c.shape[1] // 2
    qa, qb = c[:m, :n], c[:m, n:]
    scale = max(np.linalg.norm(c), 1.0)
    err = max(np.linalg.norm(c[m:, n:] - qa.conj()), np.linalg.norm(c[m:, :n] + qb.conj()))
    if err > tol * scale:
        raise StructureError(f"matrix violates the quaternion adjoint block layout (error {err:.3e})")
    return QMatrix.from_cd(qa, qb)


class ObservationMask:
    """Boolean grid of observed entries (``True`` = entry in the observed set)."""

    __slots__ = ("_observed",)

    def __init__(self, observed):
        obs = np.array(observed, dtype=bool)
        if obs.ndim != 2:
            raise DimensionError("mask must be 2-D")
        obs.flags.writeable = False
        self._observed = obs

    @classmethod
    def full(cls, rows: int, cols: int) -> "ObservationMask":
        return cls(np.ones((rows, cols), dtype=bool))

    @classmethod
    def empty(cls, rows: int, cols: int) -> "ObservationMask":
        return cls(np.zeros((rows, cols), dtype=bool))

    @property
    def observed(self) -> np.ndarray:
        return self._observed

    @property
    def shape(self) -> tuple[int, int]:
        return self._observed.shape

    @property
    def n_observed(self) -> int:
        return int(self._observed.sum())

    @property
    def n_missing(self) -> int:
        return self._observed.size - self.n_observed

    @property
    def missing_ratio(self) -> float:
        return self.n_missing / self._observed.size

    def complement(self) -> "ObservationMask":
        return ObservationMask(~self._observed)

    def project(self, a: QMatrix) -> QMatrix:
        return project_omega(a, self)

    def project_complement(self, a: QMatrix) -> QMatrix:
        return project_omega(a, self.complement())

    def __eq__(self, other):
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._observed, other._observed))

    def __hash__(self):
        return hash((self.shape, self._observed.tobytes()))

    def __repr__(self):
        return f"ObservationMask(shape={self.shape}, missing_ratio={self.missing_ratio:.4f})"

    # Text format: header "H W", then H rows of W space-separated 0/1 flags.
    def to_text(self) -> str:
        h, w = self.shape
        lines = [f"{h} {w}"]
        lines += [" ".join("1" if v else "0" for v in row) for row in self._observed]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ObservationMask":
        tokens = text.split()
        if len(tokens) < 2:
            raise ValueError("mask text is missing its 'H W' header")
        h, w = int(tokens[0]), int(tokens[1])
        flags = tokens[2:]
        if len(flags) != h * w or any(f not in ("0", "1") for f in flags):
            raise ValueError(f"mask body must hold {h * w} flags of 0/1")
        return cls(np.array([f == "1" for f in flags], dtype=bool).reshape(h, w))

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "ObservationMask":
        with open(path, encoding="ascii") as fh:
            return cls.from_text(fh.read())


def project_omega(a: QMatrix, mask: ObservationMask) -> QMatrix:
    """Keep entries in the observed set, zero the rest."""
    if a.shape != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match matrix shape {a.shape}")
    return QMatrix._wrap(a.data * mask.observed[..., None])


def hermitian_solve(h: QMatrix, b: QMatrix) -> QMatrix:
    """Solve ``X h = b`` for Hermitian positive definite ``h``.

    Works on the ``2d x 2d`` complex adjoint of ``h`` with a Cholesky
    factorization; no inverse is formed.
    """
    d = h.rows
    if h.cols != d:
        raise DimensionError("h must be square")
    if b.cols != d:
        raise DimensionError(f"b has {b.cols} columns, h is {d}x{d}")
    hc = complex_adjoint(h)
    if np.linalg.norm(hc - hc.conj().T) > 1e-10 * max(np.linalg.norm(hc), 1e-300):
        raise StructureError("h is not Hermitian")
    ba, bb = b.cd()
    rhs = np.hstack([ba, bb]).conj().T
    try:
        factor = scipy.linalg.cho_factor(hc, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = float(np.linalg.cond(hc)) if np.isfinite(hc).all() else float("inf")
        raise SingularMatrixError(
            f"Hermitian system is singular or indefinite (condition number {cond:.3e})",
            condition=cond,
        ) from exc
    y = scipy.linalg.cho_solve(factor, rhs).conj().T
    return QMatrix.from_cd(y[:, :d], y[:, d:])


def inverse(a: QMatrix) -> QMatrix:
    """Inverse of a square quaternion matrix (through the complex adjoint)."""
    if a.rows != a.cols:
        raise DimensionError("only square matrices have inverses")
    try:
        inv = np.linalg.inv(complex_adjoint(a))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is singular", condition=float("inf")) from exc
    return from_complex_adjoint(inv, tol=1e-8)
