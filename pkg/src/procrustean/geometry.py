"""Similarity group of the plane acting on k x 2 landmark configurations.

Conventions: a configuration is a ``(k, 2)`` float array whose rows are
landmarks. Landmarks are row vectors, so a rotation acts on the right,
``x @ rotation(alpha)``, and a translation ``b`` is added to every row.
A group element ``g = (a, alpha, b)`` maps ``x`` to ``exp(a) x R(alpha) + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateConfiguration, DimensionMismatch

DEGENERACY_RTOL = 1e-12


def wrap_angle(alpha):
    """Wrap angle(s) into ``[-pi, pi)``."""
    wrapped = np.mod(np.asarray(alpha, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def rotation(alpha):
    """2x2 rotation matrix ``[[cos, -sin], [sin, cos]]``.

    Accepts an array of angles and returns a stack of matrices in that case.
    """
    c, s = np.cos(alpha), np.sin(alpha)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


def as_configuration(x) -> np.ndarray:
    """Validate and return ``x`` as a float ``(k, 2)`` array with k >= 2."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise DimensionMismatch(f"configuration must be k x 2, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DimensionMismatch("a configuration needs at least two landmarks")
    if not np.all(np.isfinite(x)):
        raise ValueError("configuration has non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class Similarity:
    """Group element (log-scale, angle, translation)."""

    a: float = 0.0
    alpha: float = 0.0
    b: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(2)
        b.setflags(write=False)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls) -> "Similarity":
        return cls()

    @property
    def params(self) -> np.ndarray:
        """Flat ``(a, alpha, b1, b2)``."""
        return np.array([self.a, self.alpha, self.b[0], self.b[1]])

    def matrix(self) -> np.ndarray:
        """The linear part ``exp(a) R(alpha)``."""
        return np.exp(self.a) * rotation(self.alpha)

    def __matmul__(self, other: "Similarity") -> "Similarity":
        return compose(self, other)

    def __repr__(self):
        return f"Similarity(a={self.a!r}, alpha={self.alpha!r}, b=({self.b[0]!r}, {self.b[1]!r}))"


def compose(g1: Similarity, g2: Similarity) -> Similarity:
    """``g1 . g2``: apply ``g2`` first, then ``g1``."""
    return Similarity(g1.a + g2.a, g1.alpha + g2.alpha, np.exp(g1.a) * g2.b @ rotation(g1.alpha) + g1.b)


def inverse(g: Similarity) -> Similarity:
    return Similarity(-g.a, -g.alpha, -np.exp(-g.a) * g.b @ rotation(-g.alpha))


def act(g: Similarity, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(g.a) * x @ rotation(g.alpha) + g.b


class ConfigurationSplit(NamedTuple):
    centered: np.ndarray
    degenerate: np.ndarray

    def reassemble(self) -> np.ndarray:
        return self.centered + self.degenerate


def split(x) -> ConfigurationSplit:
    """Orthogonal split into the centered part and the landmark mean."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    return ConfigurationSplit(x - mean, mean)


def preshape(x) -> np.ndarray:
    """Center and scale to unit Frobenius norm."""
    x = as_configuration(x)
    centered = x - x.mean(axis=0)
    norm = np.linalg.norm(centered)
    if norm < DEGENERACY_RTOL * np.sqrt(x.shape[0]):
        raise DegenerateConfiguration("all landmarks coincide; pre-shape undefined")
    return centered / norm


def to_complex(x) -> np.ndarray:
    """Landmarks as complex numbers ``x1 + i x2``.

    Under this identification ``x @ rotation(alpha)`` is ``z * exp(-1j * alpha)``.
    """
    x = np.asarray(x)
    return x[..., 0] + 1j * x[..., 1]


def from_complex(z) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def procrustes_distance(x, y, kind: str = "full") -> float:
    """Procrustes distance between the shapes of two configurations.

    ``kind="full"`` minimises over rotation and scale, ``kind="partial"``
    over rotation only; both compare pre-shapes.
    """
    zx, zy = to_complex(preshape(x)), to_complex(preshape(y))
    rho = abs(np.vdot(zy, zx))
    if kind == "full":
        return float(np.sqrt(max(0.0, 1.0 - rho**2)))
    if kind == "partial":
        return float(np.sqrt(max(0.0, 2.0 - 2.0 * rho)))
    raise ValueError(f"unknown distance kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """J similarity parameters stored column-wise: ``a``, ``alpha`` of
    shape ``(J,)`` and ``b`` of shape ``(J, 2)``.

    The flat form orders coordinates as ``(a_1..a_J, alpha_1..alpha_J,
    b_1^(1), b_1^(2), ..., b_J^(1), b_J^(2))``.
    """

    a: np.ndarray
    alpha: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        alpha = wrap_angle(np.array(self.alpha, dtype=float).reshape(-1))
        alpha = np.atleast_1d(alpha)
        b = np.array(self.b, dtype=float).reshape(-1, 2)
        if not (a.shape[0] == alpha.shape[0] == b.shape[0]):
            raise DimensionMismatch("a, alpha and b must have the same length J")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(alpha)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        for name, value in (("a", a), ("alpha", alpha), ("b", b)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def J(self) -> int:
        return self.a.shape[0]

    @classmethod
    def zeros(cls, J: int) -> "ParameterVector":
        return cls(np.zeros(J), np.zeros(J), np.zeros((J, 2)))

    @classmethod
    def from_vector(cls, v) -> "ParameterVector":
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.size % 4:
            raise DimensionMismatch("flat parameter vector must have length 4J")
        J = v.size // 4
        return cls(v[:J], v[J : 2 * J], v[2 * J :].reshape(J, 2))

    @classmethod
    def from_similarities(cls, gs) -> "ParameterVector":
        gs = list(gs)
        return cls([g.a for g in gs], [g.alpha for g in gs], [g.b for g in gs])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.alpha, self.b.reshape(-1)])

    def similarities(self) -> list[Similarity]:
        return [Similarity(a, al, b) for a, al, b in zip(self.a, self.alpha, self.b)]

    def __getitem__(self, j) -> Similarity:
        return Similarity(self.a[j], self.alpha[j], self.b[j])

    def right_compose(self, g0: Similarity) -> "ParameterVector":
        """``(g_1 . g0, ..., g_J . g0)``: the right action of G on G^J."""
        return ParameterVector.from_similarities(compose(g, g0) for g in self.similarities())

    def __repr__(self):
        return f"ParameterVector(J={self.J}, a={self.a!r}, alpha={self.alpha!r}, b={self.b!r})"
