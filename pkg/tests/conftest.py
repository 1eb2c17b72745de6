import numpy as np
import pytest

from procrustean.geometry import ParameterVector, Similarity
from procrustean.model import DEFAULT_BOUNDS, MeanPattern, NoiseModel, generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_similarity(rng, A=1.0, Abar=np.pi, B=3.0) -> Similarity:
    return Similarity(rng.uniform(-A, A), rng.uniform(-Abar, Abar), rng.uniform(-B, B, size=2))


def random_params(rng, J, A=0.5, Abar=0.7, B=2.0) -> ParameterVector:
    return ParameterVector(rng.uniform(-A, A, J), rng.uniform(-Abar, Abar, J), rng.uniform(-B, B, (J, 2)))


def noisy_dataset(k=21, J=4, kind="white", seed=0, bounds=DEFAULT_BOUNDS, curve="literal"):
    pattern = MeanPattern.from_curve(k, curve)
    noise = None if kind is None else NoiseModel(kind, k, rotation_seed=seed)
    return generate_dataset(pattern, J, bounds, noise, seed)


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(criterion: str, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
