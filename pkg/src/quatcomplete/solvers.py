"""ADMM solvers for quaternion matrix completion with bilinear-factor surrogates.

All three variants minimize a factor regularizer subject to ``X = U V^H`` and a
least-squares fit on the observed entries::

    QDFN:  lam/2 (||U||_F^2 + ||V||_F^2)
    QDNN:  lam/2 (||A_U||_* + ||A_V||_*),     A_U = U, A_V = V
    QFNN:  lam/3 (||U||_F^2 + 2 ||A_V||_*),   A_V = V

Each iteration updates the factors in closed form, the auxiliary variables by
singular value thresholding, then ``X``, the multipliers and the penalty
``mu``.  Once the singular values of ``U^H U`` show a large enough drop the
working rank ``d`` is cut, at most once per solve.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, SingularMatrixError
from .norms import NormVariant, nuclear_norm
from .qsvd import qsvd, qsvt, singular_values
from .quaternion import ObservationMask, QMatrix, hermitian_solve, inner, project_omega

__all__ = [
    "SolverConfig",
    "SolverState",
    "CompletionResult",
    "default_lambda",
    "default_mu0",
    "initial_state",
    "qdfn_update_uv",
    "qdnn_update_uv",
    "qdnn_update_aux",
    "qfnn_update_all",
    "update_x",
    "update_multipliers_and_mu",
    "rank_drop_statistic",
    "estimate_rank",
    "truncate_factors",
    "relative_error",
    "augmented_lagrangian",
    "solve",
]

log = logging.getLogger(__name__)


def default_lambda(shape) -> float:
    return 0.05 * math.sqrt(max(shape))


def default_mu0(variant) -> float:
    return 1e-2 if NormVariant.parse(variant) is NormVariant.QDNN else 1e-3


@dataclass(frozen=True)
class SolverConfig:
    """ADMM hyperparameters.

    ``lam`` and ``mu0`` left as ``None`` are filled from the data shape and
    the variant when the solve starts (``0.05 sqrt(max(M, N))``, and ``1e-3``
    or ``1e-2`` for QDNN).
    """

    lam: float | None = None
    mu0: float | None = None
    mu_max: float = 1e20
    beta: float = 1.03
    d0: int = 40
    tol: float = 1e-4
    max_iters: int = 500
    rank_drop_threshold: float = 20.0
    rank_warmup: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lam is not None and not self.lam >= 0:
            raise ConfigError(f"lam must be nonnegative, got {self.lam}")
        if self.mu0 is not None and not self.mu0 > 0:
            raise ConfigError(f"mu0 must be positive, got {self.mu0}")
        if self.mu0 is not None and not self.mu_max >= self.mu0:
            raise ConfigError("mu_max must be at least mu0")
        if not self.mu_max > 0:
            raise ConfigError("mu_max must be positive")
        if not self.beta >= 1:
            raise ConfigError(f"beta must be >= 1, got {self.beta}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if int(self.d0) != self.d0 or self.d0 < 1:
            raise ConfigError(f"d0 must be a positive integer, got {self.d0}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.rank_drop_threshold > 0:
            raise ConfigError("rank_drop_threshold must be positive")
        if int(self.rank_warmup) != self.rank_warmup or self.rank_warmup < 0:
            raise ConfigError("rank_warmup must be a nonnegative integer")

    def resolved(self, shape, variant) -> "SolverConfig":
        """Copy with ``lam`` and ``mu0`` filled in."""
        lam = default_lambda(shape) if self.lam is None else self.lam
        mu0 = default_mu0(variant) if self.mu0 is None else self.mu0
        return dataclasses.replace(self, lam=lam, mu0=mu0)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolverState:
    """Iterates of one solve.  Multiplier names follow the variant:

    * QDFN: ``F`` couples ``X = U V^H``
    * QDNN: ``F1`` (``U = A_U``), ``F2`` (``V = A_V``), ``F3`` (``X = U V^H``)
    * QFNN: ``F1`` (``V = A_V``), ``F2`` (``X = U V^H``)
    """

    variant: NormVariant
    U: QMatrix
    V: QMatrix
    X: QMatrix
    mu: float
    A_U: QMatrix | None = None
    A_V: QMatrix | None = None
    F: QMatrix | None = None
    F1: QMatrix | None = None
    F2: QMatrix | None = None
    F3: QMatrix | None = None
    tau: int = 0
    rank_adjusted: bool = False

    @property
    def d(self) -> int:
        return self.U.cols

    @property
    def coupling(self) -> QMatrix:
        """Multiplier attached to ``X - U V^H``."""
        return {NormVariant.QDFN: self.F, NormVariant.QDNN: self.F3,
                NormVariant.QFNN: self.F2}[self.variant]

    def product(self) -> QMatrix:
        return self.U @ self.V.H


@dataclass(frozen=True)
class CompletionResult:
    X_hat: QMatrix
    U: QMatrix
    V: QMatrix
    iters: int
    re_trace: tuple[float, ...]
    final_rank: int
    elapsed: float
    converged: bool
    variant: NormVariant
    config: SolverConfig
    rank_adjusted_at: int | None = None
    mu_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def final_re(self) -> float:
        return self.re_trace[-1] if self.re_trace else 0.0


def _lam(cfg: SolverConfig) -> float:
    if cfg.lam is None:
        raise ConfigError("lam is unset; call SolverConfig.resolved() first")
    return cfg.lam


def _shifted_gram(a: QMatrix, shift: float, scale: float = 1.0) -> QMatrix:
    # scale * a^H a + shift * I, symmetrized against rounding
    g = (a.H @ a) * scale
    g = (g + g.H) * 0.5
    return g + QMatrix.eye(a.cols) * shift


def initial_state(t: QMatrix, cfg: SolverConfig, variant) -> SolverState:
    """``X = T``, zero multipliers, seeded Gaussian ``V`` scaled by ``1/sqrt(d)``.

    ``U`` starts at zero and is produced by the first factor update.  The
    auxiliaries start at the zero-padded identity.
    """
    variant = NormVariant.parse(variant)
    m, n = t.shape
    d = int(cfg.d0)
    rng = np.random.default_rng(cfg.seed)
    v = QMatrix.random(n, d, rng, scale=1.0 / math.sqrt(d))
    state = SolverState(variant=variant, U=QMatrix.zeros(m, d), V=v, X=t, mu=float(cfg.mu0))
    zeros_mn = QMatrix.zeros(m, n)
    if variant is NormVariant.QDFN:
        state.F = zeros_mn
    elif variant is NormVariant.QDNN:
        state.A_U, state.A_V = QMatrix.eye(m, d), QMatrix.eye(n, d)
        state.F1, state.F2, state.F3 = QMatrix.zeros(m, d), QMatrix.zeros(n, d), zeros_mn
    else:
        state.A_V = QMatrix.eye(n, d)
        state.F1, state.F2 = QMatrix.zeros(n, d), zeros_mn
    return state


# -- per-variant factor updates ------------------------------------------

def qdfn_update_uv(state: SolverState, cfg: SolverConfig) -> tuple[QMatrix, QMatrix]:
    """Ridge updates ``U = C V (V^H V + lam/mu I)^-1`` then ``V = C^H U (U^H U + lam/mu I)^-1``."""
    mu = state.mu
    ridge = _lam(cfg) / mu
    c = state.X + state.F / mu
    u = hermitian_solve(_shifted_gram(state.V, ridge), c @ state.V)
    v = hermitian_solve(_shifted_gram(u, ridge), c.H @ u)
    return u, v


def qdnn_update_uv(state: SolverState, cfg: SolverConfig) -> tuple[QMatrix, QMatrix]:
    mu = state.mu
    if state.A_U.shape != state.U.shape or state.A_V.shape != state.V.shape:
        raise DimensionError("auxiliary variables do not match the factor shapes")
    c = state.X + state.F3 / mu
    u = hermitian_solve(_shifted_gram(state.V, 1.0), state.A_U - state.F1 / mu + c @ state.V)
    v = hermitian_solve(_shifted_gram(u, 1.0), state.A_V - state.F2 / mu + c.H @ u)
    return u, v


def qdnn_update_aux(state: SolverState, cfg: SolverConfig) -> tuple[QMatrix, QMatrix]:
    """Proximal steps ``A_U = D_{lam/2mu}(U + F1/mu)``, ``A_V = D_{lam/2mu}(V + F2/mu)``."""
    mu = state.mu
    thresh = _lam(cfg) / (2.0 * mu)
    return qsvt(state.U + state.F1 / mu, thresh), qsvt(state.V + state.F2 / mu, thresh)


def qfnn_update_all(state: SolverState, cfg: SolverConfig) -> tuple[QMatrix, QMatrix, QMatrix]:
    mu = state.mu
    lam = _lam(cfg)
    u = hermitian_solve(_shifted_gram(state.V, 2.0 * lam / 3.0, scale=mu),
                        (state.X * mu + state.F2) @ state.V)
    c = state.X + state.F2 / mu
    v = hermitian_solve(_shifted_gram(u, 1.0), state.A_V - state.F1 / mu + c.H @ u)
    a_v = qsvt(v + state.F1 / mu, 2.0 * lam / (3.0 * mu))
    return u, v, a_v


def update_x(state: SolverState, t: QMatrix, mask: ObservationMask,
             uv: QMatrix | None = None) -> QMatrix:
    """Closed-form ``X``: data-weighted average on observed entries, ``U V^H - F/mu`` elsewhere."""
    mu = state.mu
    uv = state.product() if uv is None else uv
    f = state.coupling
    obs = mask.observed[..., None]
    outside = uv.data - f.data / mu
    inside = (mu * uv.data - f.data + t.data) / (1.0 + mu)
    return QMatrix._wrap(np.where(obs, inside, outside))


def update_multipliers_and_mu(state: SolverState, cfg: SolverConfig,
                              uv: QMatrix | None = None) -> tuple[dict, float]:
    """Dual ascent on every constraint, then ``mu = min(beta mu, mu_max)``.

    Returns the new multipliers keyed by attribute name, and the new ``mu``.
    """
    mu = state.mu
    uv = state.product() if uv is None else uv
    gap = state.X - uv
    if state.variant is NormVariant.QDFN:
        new = {"F": state.F + gap * mu}
    elif state.variant is NormVariant.QDNN:
        new = {
            "F1": state.F1 + (state.U - state.A_U) * mu,
            "F2": state.F2 + (state.V - state.A_V) * mu,
            "F3": state.F3 + gap * mu,
        }
    else:
        new = {"F1": state.F1 + (state.V - state.A_V) * mu, "F2": state.F2 + gap * mu}
    return new, min(cfg.beta * mu, cfg.mu_max)


# -- rank estimation -------------------------------------------------------

def rank_drop_statistic(sigmas) -> tuple[int, float]:
    """Position ``p`` (1-based) of the largest quotient ``s_m / s_{m+1}`` and the drop ratio.

    The ratio is ``(d - 1) q_p / sum_{m != p} q_m``.  A zero ``s_{m+1}`` gives
    an infinite quotient; ties go to the smallest index.  An infinite quotient
    or an empty/zero denominator yields an infinite ratio.
    """
    s = np.asarray(sigmas, dtype=float)
    d = s.size
    if d < 2:
        raise ValueError("need at least two singular values")
    if s[0] <= 0:
        return 1, 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(s[1:] > 0, s[:-1] / np.where(s[1:] > 0, s[1:], 1.0), np.inf)
    p = int(np.argmax(q))  # first maximum
    rest = np.delete(q, p)
    top = q[p]
    denom = float(rest.sum())
    if math.isinf(top) or denom == 0.0:
        return p + 1, math.inf
    return p + 1, float((d - 1) * top / denom)


def estimate_rank(u: QMatrix, d: int | None = None, threshold: float = 20.0) -> tuple[int, bool]:
    """Rank cut suggested by the singular values of ``U^H U``.

    Returns ``(new_d, triggered)``; ``new_d == d`` when the drop ratio does not
    exceed ``threshold``.
    """
    d = u.cols if d is None else d
    if d != u.cols:
        raise DimensionError(f"U has {u.cols} columns, expected {d}")
    if d < 2:
        raise ValueError("rank estimation needs d >= 2")
    s = singular_values(u.H @ u)
    p, delta = rank_drop_statistic(s)
    if delta > threshold:
        return p, True
    return d, False


def truncate_factors(state: SolverState, new_d: int) -> SolverState:
    """Shrink every ``d``-wide iterate to ``new_d`` columns.

    The new factors are the balanced split of the best rank-``new_d``
    approximation of ``U V^H``.  With ``U_new = U G_u`` and ``V_new = V G_v``,
    the auxiliaries and their multipliers are mapped through the same
    ``G_u`` / ``G_v``.  ``X`` and the ``M x N`` multiplier are untouched.
    """
    d = state.d
    if not 1 <= new_d < d:
        raise ValueError(f"new_d must be in [1, {d}), got {new_d}")
    pu, pv = qsvd(state.U), qsvd(state.V)
    core = pu.V.scale_columns(pu.singulars).H @ pv.V.scale_columns(pv.singulars)
    cr = qsvd(core)
    root = np.sqrt(cr.singulars[:new_d])
    y, z = cr.U[:, :new_d].scale_columns(root), cr.V[:, :new_d].scale_columns(root)
    u_new = pu.U @ y
    v_new = pv.U @ z

    def pinv_diag(s):
        out = np.zeros_like(s)
        nz = s > 1e-12 * max(s[0], 1e-300) if s.size else s > 0
        out[nz] = 1.0 / s[nz]
        return out

    g_u = pu.V.scale_columns(pinv_diag(pu.singulars)) @ y
    g_v = pv.V.scale_columns(pinv_diag(pv.singulars)) @ z
    new = dataclasses.replace(state, U=u_new, V=v_new, rank_adjusted=True)
    if state.variant is NormVariant.QDNN:
        new.A_U, new.A_V = state.A_U @ g_u, state.A_V @ g_v
        new.F1, new.F2 = state.F1 @ g_u, state.F2 @ g_v
    elif state.variant is NormVariant.QFNN:
        new.A_V, new.F1 = state.A_V @ g_v, state.F1 @ g_v
    return new


# -- diagnostics -----------------------------------------------------------

def relative_error(u: QMatrix, v: QMatrix, x: QMatrix, t: QMatrix, uv: QMatrix | None = None) -> float:
    """``||U V^H - X||_F / ||T||_F``."""
    t_norm = t.norm()
    if t_norm == 0.0:
        raise ValueError("relative error is undefined for an all-zero observation")
    uv = u @ v.H if uv is None else uv
    return (uv - x).norm() / t_norm


def augmented_lagrangian(state: SolverState, t: QMatrix, mask: ObservationMask,
                         cfg: SolverConfig) -> float:
    """Value of the variant's augmented Lagrangian at ``state``."""
    lam, mu = _lam(cfg), state.mu
    gap = state.X - state.product()
    fit = 0.5 * project_omega(state.X - t, mask).norm() ** 2
    val = fit + inner(state.coupling, gap) + 0.5 * mu * gap.norm() ** 2
    if state.variant is NormVariant.QDFN:
        return val + 0.5 * lam * (state.U.norm() ** 2 + state.V.norm() ** 2)
    gv = state.V - state.A_V
    val += inner(state.F1 if state.variant is NormVariant.QFNN else state.F2, gv)
    val += 0.5 * mu * gv.norm() ** 2
    if state.variant is NormVariant.QDNN:
        gu = state.U - state.A_U
        val += inner(state.F1, gu) + 0.5 * mu * gu.norm() ** 2
        return val + 0.5 * lam * (nuclear_norm(state.A_U) + nuclear_norm(state.A_V))
    return val + lam / 3.0 * (state.U.norm() ** 2 + 2.0 * nuclear_norm(state.A_V))


# -- driver ----------------------------------------------------------------

def _step(state: SolverState, t: QMatrix, mask: ObservationMask, cfg: SolverConfig) -> None:
    if state.variant is NormVariant.QDFN:
        state.U, state.V = qdfn_update_uv(state, cfg)
    elif state.variant is NormVariant.QDNN:
        state.U, state.V = qdnn_update_uv(state, cfg)
        state.A_U, state.A_V = qdnn_update_aux(state, cfg)
    else:
        state.U, state.V, state.A_V = qfnn_update_all(state, cfg)
    uv = state.product()
    state.X = update_x(state, t, mask, uv)
    multipliers, mu = update_multipliers_and_mu(state, cfg, uv)
    for name, value in multipliers.items():
        setattr(state, name, value)
    state.mu = mu
    state.tau += 1


def _check_finite(state: SolverState) -> None:
    for name in ("U", "V", "X", "A_U", "A_V", "F", "F1", "F2", "F3"):
        val = getattr(state, name)
        if val is not None and not val.is_finite():
            raise DivergenceError(f"non-finite values in {name} at iteration {state.tau}",
                                  iteration=state.tau)


def solve(t: QMatrix, mask: ObservationMask, cfg: SolverConfig | None = None,
          variant="qdfn", callback=None) -> CompletionResult:
    """Complete ``t`` from the entries selected by ``mask``.

    ``callback(iteration, re, d, mu)`` is called after every iteration.
    Stops when the relative error drops to ``cfg.tol`` or after
    ``cfg.max_iters`` iterations.  An all-zero observation returns the zero
    matrix without iterating, since the regularizer alone drives every
    factor to zero.
    """
    variant = NormVariant.parse(variant)
    cfg = (cfg or SolverConfig()).resolved(t.shape, variant)
    if mask.shape != t.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match data shape {t.shape}")
    m, n = t.shape
    if cfg.d0 > min(m, n):
        raise ConfigError(f"d0={cfg.d0} exceeds min(M, N)={min(m, n)}")
    start = time.perf_counter()
    t = project_omega(t, mask)
    if t.norm() == 0.0:
        zu, zv = QMatrix.zeros(m, cfg.d0), QMatrix.zeros(n, cfg.d0)
        return CompletionResult(QMatrix.zeros(m, n), zu, zv, 0, (), 0,
                                time.perf_counter() - start, True, variant, cfg)

    state = initial_state(t, cfg, variant)
    trace, mus = [], []
    adjusted_at = None
    converged = False
    for _ in range(cfg.max_iters):
        try:
            # overflow is caught below and reported as divergence
            with np.errstate(over="ignore", invalid="ignore"):
                _step(state, t, mask, cfg)
        except SingularMatrixError as exc:
            if exc.condition is not None and math.isfinite(exc.condition):
                raise
            # overflowed iterates make the Gram matrices non-finite
            raise DivergenceError(f"non-finite factor system at iteration {state.tau + 1}",
                                  iteration=state.tau + 1) from exc
        _check_finite(state)
        # early iterates are dominated by the ridge term and act like power
        # iterations, which inflates the leading singular value
        if not state.rank_adjusted and state.d >= 2 and state.tau > cfg.rank_warmup:
            new_d, triggered = estimate_rank(state.U, state.d, cfg.rank_drop_threshold)
            if triggered:
                log.debug("iteration %d: rank cut %d -> %d", state.tau, state.d, new_d)
                state = truncate_factors(state, new_d)
                adjusted_at = state.tau
        re = relative_error(state.U, state.V, state.X, t)
        if not math.isfinite(re):
            raise DivergenceError(f"non-finite relative error at iteration {state.tau}",
                                  iteration=state.tau)
        trace.append(re)
        mus.append(state.mu)
        if callback is not None:
            callback(state.tau, re, state.d, state.mu)
        if re <= cfg.tol:
            converged = True
            break
    return CompletionResult(
        X_hat=state.X, U=state.U, V=state.V, iters=state.tau, re_trace=tuple(trace),
        final_rank=state.d, elapsed=time.perf_counter() - start, converged=converged,
        variant=variant, config=cfg, rank_adjusted_at=adjusted_at, mu_trace=tuple(mus),
    )
