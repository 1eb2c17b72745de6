"""Two-step smoothed Procrustes estimation and the GPA baselines.

Step one minimises the centered criterion ``M0`` over log-scales and
angles inside a box intersected with a section (zero sums, or the first
observation held at the identity). Step two fills in the translations in
closed form, and the mean is the average of the smoothed observations
pulled back by the estimated similarities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .criteria import CriterionContext, eval_M0_and_grad, eval_M0_change
from .errors import DegenerateConfiguration, DimensionMismatch, NoConvergence, SingularAlignment
from .geometry import ParameterVector, Similarity, act, from_complex, inverse, preshape, rotation, to_complex
from .optim import BlockSet, minimize_projected_bfgs

SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class Constraints:
    """Search box ``|a_j| <= A``, ``|alpha_j| <= Abar`` plus one section.

    ``zero_sum`` asks for zero sums of every parameter family;
    ``reference_first`` fixes the first similarity at the identity.
    Leaving ``zero_sum`` unset picks whichever is not ``reference_first``.
    """

    A: float = 1.0
    Abar: float = np.pi / 4
    zero_sum: bool | None = None
    reference_first: bool = False

    def __post_init__(self):
        if self.zero_sum is None:
            object.__setattr__(self, "zero_sum", not self.reference_first)
        if not self.A > 0:
            raise ValueError("scale box A must be positive")
        if not 0 < self.Abar < np.pi:
            raise ValueError("angle box must lie in (0, pi)")
        if bool(self.zero_sum) == bool(self.reference_first):
            raise ValueError("exactly one of zero_sum / reference_first must be set")

    def feasible_set(self, J: int) -> BlockSet:
        kind = "zero_sum" if self.zero_sum else "reference_first"
        return BlockSet(J, (float(self.A), float(self.Abar)), kind)


@dataclass(frozen=True)
class OptimizerOptions:
    tol: float = 1e-9
    max_iter: int = 2000
    strict: bool = False  # raise NoConvergence instead of returning converged=False


@dataclass
class Diagnostics:
    criterion: float
    iterations: int
    grad_norm: float
    converged: bool
    active_bounds: list = field(default_factory=list)
    trace: list = field(default_factory=list, repr=False)
    message: str = ""


@dataclass
class EstimationResult:
    params: ParameterVector
    mean: np.ndarray
    diagnostics: Diagnostics
    lam: int


def _need_two(J: int) -> None:
    if J < 2:
        raise DimensionMismatch(f"estimation needs J >= 2 observations, got {J}")


def estimate_rotation_scaling(ctx: CriterionContext, constraints: Constraints | None = None, options: OptimizerOptions | None = None):
    """Minimise ``M0`` over the constrained ``(a, alpha)`` set, starting at zero.

    Returns ``(a, alpha, diagnostics)``. When the iteration cap is hit the
    result is still returned with ``converged=False`` unless ``options.strict``.
    """
    constraints = constraints or Constraints()
    options = options or OptimizerOptions()
    J = ctx.J
    _need_two(J)

    def fun_grad(x):
        return eval_M0_and_grad(ctx, x[:J], x[J:])

    def change(x0, x1):
        return eval_M0_change(ctx, x0[:J], x0[J:], x1[:J], x1[J:])

    res = minimize_projected_bfgs(
        fun_grad, np.zeros(2 * J), constraints.feasible_set(J), tol=options.tol, max_iter=options.max_iter, fun_change=change
    )
    names = [f"{fam}[{j}]" for fam in ("a", "alpha") for j in range(J)]
    diag = Diagnostics(
        criterion=float(res.fun),
        iterations=int(res.iterations),
        grad_norm=float(res.pg_norm),
        converged=bool(res.converged),
        active_bounds=[n for n, on in zip(names, res.active) if on],
        trace=list(res.trace),
        message=res.message,
    )
    if not res.converged and options.strict:
        raise NoConvergence(f"rotation/scaling search stopped: {res.message}", diag)
    return res.x[:J].copy(), res.x[J:].copy(), diag


def _mean_linear_part(a, alpha) -> np.ndarray:
    """``mean_j exp(a_j) R(alpha_j)`` with a singularity guard."""
    m = np.mean(np.exp(a)[:, None, None] * rotation(alpha), axis=0)
    if np.linalg.svd(m, compute_uv=False)[-1] < SINGULAR_TOL:
        raise SingularAlignment("mean of exp(a) R(alpha) is singular")
    return m


def closed_form_b(ctx: CriterionContext, a, alpha, constraints: Constraints | None = None) -> np.ndarray:
    """Translations minimising ``Mbar`` given ``(a, alpha)``, shape ``(J, 2)``.

    Under the zero-sum section the pulled-back landmark means all equal
    ``Ybar M^{-1}`` with ``M = mean exp(a) R(alpha)``; under the
    reference-first section they equal the first observation's mean.
    """
    a = np.asarray(a, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if a.shape != (ctx.J,) or alpha.shape != (ctx.J,):
        raise DimensionMismatch("a and alpha must have length J")
    constraints = constraints or Constraints()
    if constraints.reference_first:
        target = ctx.means[0]
    else:
        target = ctx.means.mean(axis=0) @ np.linalg.inv(_mean_linear_part(a, alpha))
    return ctx.means - np.exp(a)[:, None] * np.einsum("c,jcd->jd", target, rotation(alpha))


def aligned_mean(ctx: CriterionContext, params: ParameterVector) -> np.ndarray:
    """``(1/J) sum_j exp(-a_j) (A Y_j - b_j) R(-alpha_j)``."""
    x = ctx.smoothed - params.b[:, None, :]
    return np.mean(np.exp(-params.a)[:, None, None] * (x @ rotation(-params.alpha)), axis=0)


def smoothed_procrustes_mean(ctx: CriterionContext, constraints: Constraints | None = None, options: OptimizerOptions | None = None) -> EstimationResult:
    """Two-step estimate of the deformations and the smoothed mean."""
    constraints = constraints or Constraints()
    a, alpha, diag = estimate_rotation_scaling(ctx, constraints, options)
    b = closed_form_b(ctx, a, alpha, constraints)
    params = ParameterVector(a, alpha, b)
    return EstimationResult(params, aligned_mean(ctx, params), diag, ctx.lam)


def section_point(truth: ParameterVector) -> tuple[Similarity, ParameterVector]:
    """The ``g0`` that moves ``truth`` onto the zero-sum section.

    Returns ``(g0, projected)`` where ``projected_j = truth_j . g0`` has
    zero-sum log-scales, angles and translations.
    """
    m = _mean_linear_part(truth.a, truth.alpha)
    g0 = Similarity(-truth.a.mean(), -truth.alpha.mean(), -truth.b.mean(axis=0) @ np.linalg.inv(m))
    # compose directly so the angle is not wrapped away from the zero-sum value
    a = truth.a + g0.a
    alpha = truth.alpha - truth.alpha.mean()
    b = np.exp(truth.a)[:, None] * np.einsum("c,jcd->jd", g0.b, rotation(truth.alpha)) + truth.b
    return g0, ParameterVector(a, alpha, b)


def mean_at_section(pattern, truth: ParameterVector) -> np.ndarray:
    """The mean pattern as seen from the zero-sum section, ``g0^{-1} . f``."""
    f = pattern.config if hasattr(pattern, "config") else np.asarray(pattern, dtype=float)
    g0, _ = section_point(truth)
    return act(inverse(g0), f)


# ---------------------------------------------------------------------------
# generalized Procrustes baselines


def _preshapes(observations) -> np.ndarray:
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 3 or obs.shape[2] != 2:
        raise DimensionMismatch(f"observations must be J x k x 2, got {obs.shape}")
    _need_two(obs.shape[0])
    return np.stack([to_complex(preshape(y)) for y in obs])


def _gpa(observations, scale: bool, tol: float, max_iter: int) -> np.ndarray:
    z = _preshapes(observations)
    mu = z[0].copy()
    for _ in range(max_iter):
        inner = z.conj() @ mu  # <z_j, mu>
        if scale:
            w = inner  # optimal complex factor for unit-norm z_j
        else:
            mag = np.abs(inner)
            if np.any(mag == 0):
                raise DegenerateConfiguration("an observation is orthogonal to the current mean")
            w = inner / mag
        new = np.mean(w[:, None] * z, axis=0)
        norm = np.linalg.norm(new)
        if norm == 0:
            raise DegenerateConfiguration("aligned observations average to zero")
        new /= norm
        moved = np.linalg.norm(new - mu)
        mu = new
        if moved < tol:
            return from_complex(mu)
    raise NoConvergence(f"GPA did not settle within {max_iter} sweeps", {"movement": float(moved)})


def full_procrustes_mean(observations, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """Unit-norm full Procrustes mean (rotation and scale alignment)."""
    return _gpa(observations, True, tol, max_iter)


def partial_procrustes_mean(observations, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """Partial Procrustes mean (rotation-only alignment), renormalized every sweep."""
    return _gpa(observations, False, tol, max_iter)


def procrustes_sum_of_squares(observations, mean, kind: str = "full") -> float:
    """GPA objective: summed squared residuals after optimally aligning
    each pre-shape to ``mean`` (rotation and scale, or rotation only)."""
    z = _preshapes(observations)
    mu = to_complex(np.asarray(mean, dtype=float))
    mu = mu / np.linalg.norm(mu)
    rho = np.abs(z.conj() @ mu)
    if kind == "full":
        return float(np.sum(1.0 - rho**2))
    if kind == "partial":
        return float(np.sum(2.0 - 2.0 * rho))
    raise ValueError(f"unknown kind {kind!r}")
