"""Seedable Haar unitaries via Ginibre + QR with phase correction.

Every draw is addressed by ``(master_seed, stream_id)``; a stream is an
independent ``numpy`` generator, so draws are order independent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import hs_norm2, load_matrix, save_matrix

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(*values: int) -> int:
    """Fold integers into one 64-bit value with the splitmix finalizer."""
    h = 0
    for v in values:
        h = splitmix64(h ^ (int(v) & MASK64))
    return h


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed & MASK64, spawn_key=(self.stream_id & MASK64,))
        return np.random.Generator(np.random.PCG64(ss))


def _ginibre(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def sample_ginibre(n: int, stream: RngStream) -> np.ndarray:
    """n x n matrix of i.i.d. standard complex Gaussians (E|z|^2 = 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _ginibre(n, stream.generator())


def haar_from_ginibre(Z: np.ndarray, phase_correct: bool = True) -> np.ndarray | None:
    """Q factor of ``Z`` times diag(R)/|diag(R)|; None if R is singular."""
    Q, R = np.linalg.qr(Z)
    if not phase_correct:
        return Q
    d = np.diag(R)
    a = np.abs(d)
    if np.any(a == 0.0):
        return None
    return Q * (d / a)


def sample_haar_unitary(n: int, stream: RngStream) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream.generator()
    while True:
        U = haar_from_ginibre(_ginibre(n, rng))
        if U is not None:
            return U


@dataclass
class UnitaryTuple:
    n: int
    d: int
    unitaries: list[np.ndarray]
    seed: int
    stream_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.unitaries) != self.d:
            raise ValueError(f"expected {self.d} unitaries, got {len(self.unitaries)}")
        for U in self.unitaries:
            if U.shape != (self.n, self.n):
                raise ValueError(f"member of shape {U.shape} in a tuple of size {self.n}")
        if self.stream_ids and len(set(self.stream_ids)) != len(self.stream_ids):
            raise ValueError("stream ids must be pairwise distinct")

    def __iter__(self):
        return iter(self.unitaries)

    def __getitem__(self, j: int) -> np.ndarray:
        return self.unitaries[j]

    def max_unitarity_residual(self) -> float:
        eye = np.eye(self.n)
        return max(hs_norm2(U.conj().T @ U - eye) for U in self.unitaries)

    def doubled(self) -> "UnitaryTuple":
        """``(U_1, ..., U_d, U_1^*, ..., U_d^*)``."""
        adj = [U.conj().T for U in self.unitaries]
        ids = list(self.stream_ids) + [mix(s, 1) for s in self.stream_ids]
        return UnitaryTuple(self.n, 2 * self.d, list(self.unitaries) + adj, self.seed, ids)


def identity_tuple(n: int, d: int, seed: int = 0) -> UnitaryTuple:
    return UnitaryTuple(n, d, [np.eye(n, dtype=np.complex128) for _ in range(d)], seed,
                        list(range(d)))


def tuple_stream_ids(n: int, d: int, master_seed: int) -> list[int]:
    return [mix(master_seed, n, d, j) for j in range(d)]


def sample_tuple(n: int, d: int, master_seed: int) -> UnitaryTuple:
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    ids = tuple_stream_ids(n, d, master_seed)
    us = [sample_haar_unitary(n, RngStream(master_seed, sid)) for sid in ids]
    return UnitaryTuple(n, d, us, master_seed, ids)


def save_tuple(t: UnitaryTuple, directory, fmt: str = "bin") -> Path:
    """Write one file per member plus ``manifest.json``; return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".json" if fmt == "json" else ".qxm"
    files = []
    for j, U in enumerate(t.unitaries):
        name = f"u{j + 1}{suffix}"
        save_matrix(directory / name, U)
        files.append(name)
    manifest = {"n": t.n, "d": t.d, "seed": t.seed, "files": files, "stream_ids": t.stream_ids}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_tuple(manifest_path) -> UnitaryTuple:
    manifest_path = Path(manifest_path)
    m = json.loads(manifest_path.read_text())
    us = [load_matrix(manifest_path.parent / f) for f in m["files"]]
    ids = m.get("stream_ids") or list(range(len(us)))
    return UnitaryTuple(int(m["n"]), int(m["d"]), us, int(m["seed"]), [int(s) for s in ids])
