"""Matching criteria for the joint alignment of J configurations.

All criteria share the form

    (1 / (J k)) sum_j || Z_j - mean_j' Z_j' ||^2

where ``Z_j`` is observation (or pattern) ``j`` pulled back by the candidate
similarity ``g_j``. ``M`` uses the smoothed observations, ``M0`` only their
centered part, ``Mbar`` only their landmark means. ``D`` and ``D0`` are the
noiseless analogues built from the true pattern and true deformations.

Rotations and scalings are handled in complex form: a landmark row ``x`` is
``x1 + i x2``, and ``exp(-a) x R(-alpha)`` becomes ``exp(-a + i alpha) x``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .geometry import ParameterVector, rotation, to_complex
from .spectral import smooth

R_MINUS_HALF_PI = rotation(-np.pi / 2)


def _checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


@dataclass(frozen=True, eq=False)
class CriterionContext:
    """Observations plus the smoothed quantities every criterion needs.

    Build with :meth:`from_observations`; the cache is computed once.
    """

    observations: np.ndarray  # (J, k, 2)
    lam: int
    centered: np.ndarray = field(repr=False)  # A0^lam Y_j, (J, k, 2)
    means: np.ndarray = field(repr=False)  # Ybar_j, (J, 2)
    centered_z: np.ndarray = field(repr=False)  # A0^lam Y_j as complex (J, k)
    checksum: str = ""

    @classmethod
    def from_observations(cls, observations, lam: int) -> "CriterionContext":
        obs = np.array(observations, dtype=float)
        if obs.ndim != 3 or obs.shape[2] != 2:
            raise DimensionMismatch(f"observations must be J x k x 2, got {obs.shape}")
        obs.setflags(write=False)
        centered = smooth(obs, lam, "centered")
        means = obs.mean(axis=1)
        z = to_complex(centered)
        for arr in (centered, means, z):
            arr.setflags(write=False)
        return cls(obs, int(lam), centered, means, z, _checksum(obs))

    @property
    def J(self) -> int:
        return self.observations.shape[0]

    @property
    def k(self) -> int:
        return self.observations.shape[1]

    @property
    def smoothed(self) -> np.ndarray:
        """``A^lam Y_j`` for every j."""
        return self.centered + self.means[:, None, :]

    def is_consistent(self) -> bool:
        return _checksum(self.observations) == self.checksum


def _check_J(ctx: CriterionContext, J: int) -> None:
    if J != ctx.J:
        raise DimensionMismatch(f"parameters have J={J}, context has J={ctx.J}")


def _spread(z: np.ndarray) -> float:
    """``sum_j ||z_j - mean z||^2`` for a stack of real arrays."""
    return float(np.sum((z - z.mean(axis=0)) ** 2))


def _pullback(x: np.ndarray, a, alpha, b=None) -> np.ndarray:
    """``exp(-a_j) (x_j - b_j) R(-alpha_j)`` for stacks x (J, k, 2)."""
    if b is not None:
        x = x - b[:, None, :]
    return np.exp(-a)[:, None, None] * (x @ rotation(-alpha))


def eval_M(ctx: CriterionContext, p: ParameterVector) -> float:
    _check_J(ctx, p.J)
    z = _pullback(ctx.smoothed, p.a, p.alpha, p.b)
    return _spread(z) / (ctx.J * ctx.k)


def eval_Mbar(ctx: CriterionContext, p: ParameterVector) -> float:
    """Degenerate-part criterion; each term is k copies of one landmark."""
    _check_J(ctx, p.J)
    z = _pullback(ctx.means[:, None, :], p.a, p.alpha, p.b)
    return ctx.k * _spread(z) / (ctx.J * ctx.k)


def _weights(a, alpha) -> np.ndarray:
    return np.exp(-np.asarray(a, dtype=float) + 1j * np.asarray(alpha, dtype=float))


def _centered_residuals(ctx: CriterionContext, a, alpha):
    a = np.asarray(a, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    _check_J(ctx, a.shape[0])
    if alpha.shape != a.shape:
        raise DimensionMismatch("a and alpha must have the same length")
    z = _weights(a, alpha)[:, None] * ctx.centered_z
    return z, z - z.mean(axis=0)


def eval_M0(ctx: CriterionContext, a, alpha) -> float:
    """Centered criterion; translations do not enter."""
    _, resid = _centered_residuals(ctx, a, alpha)
    return float(np.sum(resid.real**2 + resid.imag**2)) / (ctx.J * ctx.k)


def eval_M0_and_grad(ctx: CriterionContext, a, alpha) -> tuple[float, np.ndarray]:
    """``M0`` and its gradient as a ``2J`` vector ``(d/da, d/dalpha)``.

    ``Z_j = w_j x_j`` with ``w_j = exp(-a_j + i alpha_j)``, so
    ``dZ_j/da_j = -Z_j`` and ``dZ_j/dalpha_j = i Z_j``; the mean term
    contributes nothing because the residuals sum to zero.
    """
    z, resid = _centered_residuals(ctx, a, alpha)
    scale = 2.0 / (ctx.J * ctx.k)
    inner = np.sum(np.conj(z) * resid, axis=1)  # <Z_j, Z_j - Zbar> as complex
    value = float(np.sum(resid.real**2 + resid.imag**2)) / (ctx.J * ctx.k)
    grad = np.concatenate([-scale * inner.real, scale * inner.imag])
    return value, grad


def eval_M0_change(ctx: CriterionContext, a0, alpha0, a1, alpha1) -> float:
    """``M0(a1, alpha1) - M0(a0, alpha0)`` without cancellation.

    Near a minimum the two values agree to more digits than a double
    holds; expanding the difference in the weight increment keeps it
    accurate to the size of the change itself.
    """
    a0, alpha0 = np.asarray(a0, dtype=float), np.asarray(alpha0, dtype=float)
    a1, alpha1 = np.asarray(a1, dtype=float), np.asarray(alpha1, dtype=float)
    _, r0 = _centered_residuals(ctx, a0, alpha0)
    dw = _weights(a0, alpha0) * np.expm1(-(a1 - a0) + 1j * (alpha1 - alpha0))
    dz = dw[:, None] * ctx.centered_z
    dr = dz - dz.mean(axis=0)
    return float(np.sum(2.0 * (dr * np.conj(r0)).real + dr.real**2 + dr.imag**2)) / (ctx.J * ctx.k)


def eval_M0_direct(ctx: CriterionContext, a, alpha) -> float:
    """Same value as :func:`eval_M0`, evaluated with real k x 2 arrays and rotation matrices."""
    a = np.asarray(a, dtype=float)
    _check_J(ctx, a.shape[0])
    z = _pullback(ctx.centered, a, np.asarray(alpha, dtype=float))
    return _spread(z) / (ctx.J * ctx.k)


# ---------------------------------------------------------------------------
# noiseless criteria


def _true_images(pattern, truth: ParameterVector) -> np.ndarray:
    """``g*_j . f`` for every j, shape (J, k, 2)."""
    f = pattern.config if hasattr(pattern, "config") else np.asarray(pattern, dtype=float)
    return np.exp(truth.a)[:, None, None] * (f @ rotation(truth.alpha)) + truth.b[:, None, :]


def pattern_derivatives(pattern, truth: ParameterVector, p: ParameterVector):
    """Pulled-back patterns and their first derivatives.

    Returns ``(fg, dfg)`` with ``fg[j] = g_j^{-1} . g*_j . f`` of shape
    (J, k, 2) and ``dfg[j, q]`` its derivative in coordinate ``q`` of
    ``g_j = (a, alpha, b1, b2)``, shape (J, 4, k, 2).
    """
    if truth.J != p.J:
        raise DimensionMismatch("truth and parameters differ in J")
    fg = _pullback(_true_images(pattern, truth), p.a, p.alpha, p.b)
    J, k = fg.shape[:2]
    dfg = np.empty((J, 4, k, 2))
    dfg[:, 0] = -fg
    dfg[:, 1] = fg @ R_MINUS_HALF_PI
    # d/db_p of exp(-a)(W - b)R(-alpha) is -exp(-a) e_p R(-alpha), on every row
    rows = -np.exp(-p.a)[:, None, None] * rotation(-p.alpha)  # (J, 2, 2): row p is -e^{-a} e_p R
    dfg[:, 2] = rows[:, None, 0, :]
    dfg[:, 3] = rows[:, None, 1, :]
    return fg, dfg


def eval_D(pattern, truth: ParameterVector, p: ParameterVector) -> float:
    fg, _ = pattern_derivatives(pattern, truth, p)
    J, k = fg.shape[:2]
    return _spread(fg) / (J * k)


def grad_D(pattern, truth: ParameterVector, p: ParameterVector) -> np.ndarray:
    """Analytic gradient in the flat ``(a, alpha, b)`` order."""
    fg, dfg = pattern_derivatives(pattern, truth, p)
    J, k = fg.shape[:2]
    resid = fg - fg.mean(axis=0)
    g = 2.0 / (J * k) * np.einsum("jqlc,jlc->jq", dfg, resid)
    return np.concatenate([g[:, 0], g[:, 1], g[:, 2:].reshape(-1)])


def _flat_index(J: int, j: int, q: int) -> int:
    if q < 2:
        return q * J + j
    return 2 * J + 2 * j + (q - 2)


def hess_D(pattern, truth: ParameterVector, p: ParameterVector) -> np.ndarray:
    """Analytic ``4J x 4J`` Hessian of D in the flat order."""
    fg, dfg = pattern_derivatives(pattern, truth, p)
    J, k = fg.shape[:2]
    resid = fg - fg.mean(axis=0)
    # second derivatives of fg[j] within one block, (J, 4, 4, k, 2)
    d2 = np.zeros((J, 4, 4, k, 2))
    d2[:, 0, 0] = fg
    d2[:, 0, 1] = d2[:, 1, 0] = -dfg[:, 1]
    d2[:, 1, 1] = -fg
    for q in (2, 3):
        d2[:, 0, q] = d2[:, q, 0] = -dfg[:, q]
        d2[:, 1, q] = d2[:, q, 1] = dfg[:, q] @ R_MINUS_HALF_PI
    cross = np.einsum("iqlc,jrlc->iqjr", dfg, dfg)  # <d_q f_i, d_r f_j>
    H = np.zeros((4 * J, 4 * J))
    c_off = -2.0 / (J * J * k)
    c_diag = 2.0 / (J * k) - 2.0 / (J * J * k)
    for i in range(J):
        for q in range(4):
            row = _flat_index(J, i, q)
            for j in range(J):
                for r in range(4):
                    col = _flat_index(J, j, r)
                    if i != j:
                        H[row, col] = c_off * cross[i, q, j, r]
                    else:
                        H[row, col] = 2.0 / (J * k) * np.sum(d2[i, q, r] * resid[i]) + c_diag * cross[i, q, i, r]
    return H


def eval_D0(pattern, truth: ParameterVector, a, alpha) -> float:
    """Noiseless centered criterion on ``(a, alpha)``."""
    f0 = to_complex(pattern.centered if hasattr(pattern, "centered") else np.asarray(pattern) - np.mean(pattern, axis=0))
    w = np.exp(truth.a - np.asarray(a, dtype=float) + 1j * (np.asarray(alpha, dtype=float) - truth.alpha))
    z = w[:, None] * f0[None, :]
    J, k = z.shape
    return float(np.sum(np.abs(z - z.mean(axis=0)) ** 2)) / (J * k)


def grad_D0(pattern, truth: ParameterVector, a, alpha) -> np.ndarray:
    """Gradient of :func:`eval_D0` as a ``2J`` vector ``(d/da, d/dalpha)``."""
    f0 = to_complex(pattern.centered if hasattr(pattern, "centered") else np.asarray(pattern) - np.mean(pattern, axis=0))
    w = np.exp(truth.a - np.asarray(a, dtype=float) + 1j * (np.asarray(alpha, dtype=float) - truth.alpha))
    z = w[:, None] * f0[None, :]
    J, k = z.shape
    resid = z - z.mean(axis=0)
    # d z_j / d a_j = -z_j ; d z_j / d alpha_j = i z_j  (since x R(-alpha) <-> x e^{i alpha})
    da = np.sum((np.conj(-z) * resid).real, axis=1)
    dal = np.sum((np.conj(1j * z) * resid).real, axis=1)
    return 2.0 / (J * k) * np.concatenate([da, dal])


def hess_D0_at_section(pattern, truth: ParameterVector) -> np.ndarray:
    """Closed-form Hessian of D0 at the section point ``(a* - mean a*, alpha* - mean alpha*)``.

    Equals ``(2 / (J^2 k)) ||exp(mean a*) f0||^2 blockdiag(J I - 1, J I - 1)``.
    """
    from .errors import DegenerateConfiguration

    f0 = pattern.centered
    norm2 = float(np.sum(f0**2))
    if norm2 < (1e-12 * np.sqrt(pattern.k)) ** 2:
        raise DegenerateConfiguration("pattern is degenerate")
    J, k = truth.J, pattern.k
    block = J * np.eye(J) - np.ones((J, J))
    scale = 2.0 / (J * J * k) * np.exp(2.0 * truth.a.mean()) * norm2
    out = np.zeros((2 * J, 2 * J))
    out[:J, :J] = block
    out[J:, J:] = block
    return scale * out


def hess_D0_numeric(pattern, truth: ParameterVector, a, alpha, rel_step: float = 1e-6) -> np.ndarray:
    """Central differences of :func:`grad_D0`, symmetrised."""
    x0 = np.concatenate([np.asarray(a, dtype=float), np.asarray(alpha, dtype=float)])
    J = x0.size // 2
    H = np.empty((2 * J, 2 * J))
    for i in range(2 * J):
        h = rel_step * max(1.0, abs(x0[i]))
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        H[:, i] = (grad_D0(pattern, truth, xp[:J], xp[J:]) - grad_D0(pattern, truth, xm[:J], xm[J:])) / (2 * h)
    return 0.5 * (H + H.T)
