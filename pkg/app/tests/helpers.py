import numpy as np

from app.models.codebook import Codebook, JointCodebook
from app.services.constellation_service import constellation_service


def random_joint(T: int = 4, K1: int = 3, K2: int = 3, power: float = 10.0, seed: int = 0) -> JointCodebook:
    return JointCodebook(
        constellation_service.random_grassmannian(T, 1, K1, power, seed),
        constellation_service.random_grassmannian(T, 1, K2, power, seed + 1),
    )


def random_symbol(rng: np.random.Generator, T: int, M: int = 1, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal((T, M)) + 1j * rng.standard_normal((T, M))) / np.sqrt(2)


def codebook_from_lines(lines: np.ndarray, power: float) -> Codebook:
    """(K, T) unit lines → Grassmannian single-antenna codebook at power P."""
    lines = lines / np.linalg.norm(lines, axis=1, keepdims=True)
    T = lines.shape[1]
    return Codebook(np.sqrt(power * T) * lines[:, :, None], power, grassmannian=True)
