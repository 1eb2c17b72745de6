"""Synthetic data from the perturbation model

    Y_j = exp(a_j) (f + zeta_j) R(alpha_j) + b_j,    j = 1..J,

with a benchmark mean pattern, uniform nuisance deformations and three
Gaussian noise regimes (white, stationary Toeplitz, correlated).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz

from .errors import DimensionMismatch, EvenK
from .geometry import ParameterVector, act

NOISE_KINDS = ("white", "stationary", "correlated")

# half-widths of the uniform deformation law used in the experiments
DEFAULT_BOUNDS = (0.25, 0.5, 1.0)

DeformationSet = ParameterVector


def rng_for(seed, *key) -> np.random.Generator:
    """Counter-based generator for stream ``key`` under ``seed``.

    Streams with different keys are independent, so work split by key
    gives identical draws regardless of execution order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key) -> int:
    """A 64-bit integer seed for sub-stream ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def reference_curve(t, variant: str = "literal") -> np.ndarray:
    """Benchmark planar curve; returns shape ``t.shape + (2,)``.

    The first coordinate carries a ``cos(10 pi)`` term, taken literally
    (it equals 1). ``variant="cos10pit"`` substitutes ``cos(10 pi t)``.
    """
    t = np.asarray(t, dtype=float)
    if variant == "literal":
        c = np.cos(10.0 * np.pi) * np.ones_like(t)
    elif variant == "cos10pit":
        c = np.cos(10.0 * np.pi * t)
    else:
        raise ValueError(f"unknown curve variant {variant!r}")
    s2 = np.sin(np.pi * t) ** 2
    x1 = 10.0 * s2 + c + 20.0
    x2 = 2.0 * np.sin(6.0 * np.pi * t) - 11.0 * s2 + 12.0 * np.exp(-25.0 * (t - 0.4) ** 2) + 1.0
    return np.stack([x1, x2], axis=-1)


@dataclass(frozen=True, eq=False)
class MeanPattern:
    """The curve sampled at ``l / k``, ``l = 1..k``."""

    k: int
    config: np.ndarray
    curve_id: str = "reference"

    def __post_init__(self):
        if self.config.shape != (self.k, 2):
            raise DimensionMismatch("pattern config must be k x 2")
        if np.linalg.matrix_rank(self.config - self.config.mean(axis=0)) < 1:
            raise ValueError("mean pattern must contain at least two distinct landmarks")

    @classmethod
    def from_curve(cls, k: int, variant: str = "literal") -> "MeanPattern":
        t = np.arange(1, k + 1) / k
        cid = "reference" if variant == "literal" else f"reference-{variant}"
        return cls(k, reference_curve(t, variant), cid)

    @property
    def centered(self) -> np.ndarray:
        return self.config - self.config.mean(axis=0)


def pattern_from_id(k: int, curve_id: str) -> MeanPattern:
    if curve_id == "reference":
        return MeanPattern.from_curve(k)
    if curve_id.startswith("reference-"):
        return MeanPattern.from_curve(k, curve_id[len("reference-") :])
    raise ValueError(f"unknown curve id {curve_id!r}")


def sample_deformations(J: int, bounds, rng: np.random.Generator) -> DeformationSet:
    """Independent uniforms on ``[-A/2, A/2] x [-Abar/2, Abar/2] x [-B, B]^2``.

    ``bounds`` holds the half-widths ``(A/2, Abar/2, B)``.
    """
    ha, halpha, hb = (float(v) for v in bounds)
    if min(ha, halpha, hb) < 0:
        raise ValueError("bounds must be non-negative")
    u = rng.uniform(-1.0, 1.0, size=(J, 4))
    return ParameterVector(ha * u[:, 0], halpha * u[:, 1], hb * u[:, 2:])


def random_rotation(k: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a Gaussian matrix, sign-fixed and forced into SO(k)."""
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Gaussian landmark noise acting identically on both coordinates.

    Each column of a draw is ``S z`` with ``z`` standard normal, where the
    square-root factor ``S`` is ``2 Id`` (white), the Toeplitz matrix
    ``0.5 exp(-(|l - l'| / 100)^2)`` (stationary) or
    ``P diag(l / sqrt(2k))`` with a fixed random rotation ``P`` (correlated).
    ``rotation_seed`` pins ``P``; ``scale`` multiplies every draw (0 gives
    noiseless data with the same random streams).
    """

    kind: str
    k: int
    rotation_seed: int = 0
    scale: float = 1.0
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        k = self.k
        if self.kind == "white":
            factor = 2.0 * np.eye(k)
        elif self.kind == "stationary":
            factor = toeplitz(0.5 * np.exp(-((np.arange(k) / 100.0) ** 2)))
        else:
            p = random_rotation(k, rng_for(self.rotation_seed, 0))
            factor = p * (np.arange(1, k + 1) / np.sqrt(2.0 * k))
        if self.scale < 0:
            raise ValueError("noise scale must be non-negative")
        factor = float(self.scale) * factor
        factor.setflags(write=False)
        object.__setattr__(self, "_factor", factor)

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    @property
    def rotation_matrix(self) -> np.ndarray | None:
        if self.kind != "correlated":
            return None
        return random_rotation(self.k, rng_for(self.rotation_seed, 0))

    def column_covariance(self) -> np.ndarray:
        """``k x k`` covariance of one coordinate column."""
        return self._factor @ self._factor.T

    def covariance(self) -> np.ndarray:
        """Full ``2k x 2k`` covariance of the stacked vector (column 1, column 2)."""
        return np.kron(np.eye(2), self.column_covariance())

    def gamma_max(self) -> float:
        return float(np.linalg.eigvalsh(self.column_covariance())[-1])

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """One ``(k, 2)`` draw, or ``(size, k, 2)`` draws."""
        n = 1 if size is None else size
        z = rng.standard_normal((n, self.k, 2))
        out = np.einsum("lm,nmc->nlc", self._factor, z)
        return out[0] if size is None else out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "rotation_seed": self.rotation_seed, "scale": self.scale}


def sample_noise(model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    return model.sample(rng)


@dataclass(frozen=True, eq=False)
class Dataset:
    observations: np.ndarray  # (J, k, 2)
    pattern: MeanPattern
    truth: DeformationSet
    noise_model: NoiseModel | None
    noise: np.ndarray  # (J, k, 2), the zeta_j actually drawn
    seed: int
    bounds: tuple = DEFAULT_BOUNDS
    dataset_id: str = "dataset"

    @property
    def J(self) -> int:
        return self.observations.shape[0]

    @property
    def k(self) -> int:
        return self.observations.shape[1]


def generate_dataset(
    pattern: MeanPattern,
    J: int,
    bounds,
    noise: NoiseModel | None,
    seed: int,
    dataset_id: str = "dataset",
) -> Dataset:
    """Draw deformations (stream 0) and one noise stream per observation."""
    if noise is not None and noise.k != pattern.k:
        raise DimensionMismatch(f"noise model has k={noise.k}, pattern has k={pattern.k}")
    if J < 1:
        raise ValueError("J must be positive")
    truth = sample_deformations(J, bounds, rng_for(seed, 0))
    if noise is None:
        zeta = np.zeros((J, pattern.k, 2))
    else:
        zeta = np.stack([noise.sample(rng_for(seed, 1, j)) for j in range(J)])
    obs = np.stack([act(truth[j], pattern.config + zeta[j]) for j in range(J)])
    return Dataset(obs, pattern, truth, noise, zeta, int(seed), tuple(float(b) for b in bounds), dataset_id)


def _fmt(v: float) -> str:
    return repr(float(v))


def save_dataset(ds: Dataset, directory) -> Path:
    """Write ``observations.csv``, ``truth.csv`` and ``meta.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "observations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset_id", "j", "ell", "x1", "x2"])
        for j in range(ds.J):
            for ell in range(ds.k):
                x1, x2 = ds.observations[j, ell]
                w.writerow([ds.dataset_id, j + 1, ell + 1, _fmt(x1), _fmt(x2)])
    with open(directory / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "a", "alpha", "b1", "b2"])
        for j in range(ds.J):
            w.writerow([j + 1, _fmt(ds.truth.a[j]), _fmt(ds.truth.alpha[j]), _fmt(ds.truth.b[j, 0]), _fmt(ds.truth.b[j, 1])])
    meta = {
        "dataset_id": ds.dataset_id,
        "seed": ds.seed,
        "J": ds.J,
        "k": ds.k,
        "curve_id": ds.pattern.curve_id,
        "bounds": list(ds.bounds),
        "noise": None if ds.noise_model is None else ds.noise_model.to_dict(),
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return directory


def load_observations(directory) -> tuple[str, np.ndarray]:
    """Read ``observations.csv``; returns ``(dataset_id, (J, k, 2) array)``."""
    rows = []
    with open(Path(directory) / "observations.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((row["dataset_id"], int(row["j"]), int(row["ell"]), float(row["x1"]), float(row["x2"])))
    if not rows:
        raise ValueError(f"no observations in {directory}")
    J = max(r[1] for r in rows)
    k = max(r[2] for r in rows)
    if len(rows) != J * k:
        raise DimensionMismatch(f"expected {J * k} rows for J={J}, k={k}, got {len(rows)}")
    obs = np.full((J, k, 2), np.nan)
    for _, j, ell, x1, x2 in rows:
        obs[j - 1, ell - 1] = (x1, x2)
    return rows[0][0], obs


def load_truth(directory) -> DeformationSet | None:
    path = Path(directory) / "truth.csv"
    if not path.exists():
        return None
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["j"]))
    return ParameterVector(
        [float(r["a"]) for r in rows],
        [float(r["alpha"]) for r in rows],
        [[float(r["b1"]), float(r["b2"])] for r in rows],
    )


def load_dataset(directory) -> Dataset:
    """Inverse of :func:`save_dataset`. The stored noise draws are not kept,
    so ``Dataset.noise`` is regenerated from the seed."""
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    _, obs = load_observations(directory)
    pattern = pattern_from_id(meta["k"], meta["curve_id"])
    noise = None if meta["noise"] is None else NoiseModel(**meta["noise"])
    regenerated = generate_dataset(pattern, meta["J"], meta["bounds"], noise, meta["seed"], meta["dataset_id"])
    truth = load_truth(directory)
    return Dataset(obs, pattern, truth, noise, regenerated.noise, meta["seed"], tuple(meta["bounds"]), meta["dataset_id"])


def odd_k(k: int) -> int:
    """Smallest odd integer >= k."""
    if k < 3:
        raise EvenK("k must be at least 3")
    return k if k % 2 else k + 1
