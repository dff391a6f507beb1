"""Deterministic feature hashing and cosine similarity."""

from __future__ import annotations

import hashlib
import re

import numpy as np

_TOKEN = re.compile(r"[a-z0-9_]+")


def tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _bucket(feature: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feature.encode(), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    return value % dim, (1.0 if (value >> 63) & 1 else -1.0)


def hashed_vector(features, dim: int) -> np.ndarray:
    """Signed feature-hashing of an iterable of string features (counts add up)."""
    vec = np.zeros(dim)
    for feature in features:
        index, sign = _bucket(feature, dim)
        vec[index] += sign
    return vec


def normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0 else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def text_similarity(a: str, b: str, dim: int = 256) -> float:
    return cosine(hashed_vector(tokens(a), dim), hashed_vector(tokens(b), dim))
