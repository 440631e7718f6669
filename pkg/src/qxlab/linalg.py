"""Dense complex matrices with the normalized-trace (Hilbert-Schmidt) geometry.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The inner product
is ``<A, B> = tr_n(A^* B)`` with ``tr_n = Tr / n``, so ``||I||_2 = 1``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

ATOL = 1e-10
RANK_RTOL = 1e-8

BINARY_MAGIC = b"QXM1"


def as_matrix(A) -> np.ndarray:
    """Coerce to a square, finite complex128 array."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _same_size(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")


def normalized_trace(A) -> complex:
    A = as_matrix(A)
    return complex(np.trace(A) / A.shape[0])


def hs_inner(A, B) -> complex:
    """``tr_n(A^* B)``; conjugate-linear in the first slot."""
    A, B = as_matrix(A), as_matrix(B)
    _same_size(A, B)
    return complex(np.vdot(A, B) / A.shape[0])


def hs_norm2(A) -> float:
    A = as_matrix(A)
    return float(np.linalg.norm(A) / np.sqrt(A.shape[0]))


def commutator(A, B) -> np.ndarray:
    A, B = as_matrix(A), as_matrix(B)
    _same_size(A, B)
    return A @ B - B @ A


def block_double(U, V) -> np.ndarray:
    """Block-diagonal ``diag(U, V)`` of size 2n."""
    U, V = as_matrix(U), as_matrix(V)
    _same_size(U, V)
    n = U.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    out[:n, :n] = U
    out[n:, n:] = V
    return out


def dagger(A) -> np.ndarray:
    return np.asarray(A).conj().T


def gram_schmidt(basis: Sequence, rtol: float = RANK_RTOL) -> list[np.ndarray]:
    """HS-orthonormalize ``basis``; raise if it is numerically rank deficient."""
    out: list[np.ndarray] = []
    for B in basis:
        B = as_matrix(B)
        scale = hs_norm2(B)
        if out:
            _same_size(out[0], B)
        for Q in out:
            B = B - hs_inner(Q, B) * Q
        # second pass keeps orthogonality at machine precision
        for Q in out:
            B = B - hs_inner(Q, B) * Q
        norm = hs_norm2(B)
        if scale == 0.0 or norm <= rtol * scale:
            raise ValueError("basis is linearly dependent below rank tolerance")
        out.append(B / norm)
    return out


def project_offspan(A, basis: Sequence, rtol: float = RANK_RTOL) -> np.ndarray:
    """``A`` minus its HS-orthogonal projection onto ``span(basis)``."""
    A = as_matrix(A)
    out = A.copy()
    for Q in gram_schmidt(basis, rtol):
        _same_size(A, Q)
        out -= hs_inner(Q, A) * Q
    return out


def project_traceless(A) -> np.ndarray:
    A = as_matrix(A)
    return A - normalized_trace(A) * np.eye(A.shape[0])


def operator_norm(A) -> float:
    return float(np.linalg.norm(as_matrix(A), 2))


def is_unitary(U, atol: float = 1e-11) -> bool:
    U = as_matrix(U)
    return hs_norm2(dagger(U) @ U - np.eye(U.shape[0])) <= atol


def matrix_units(n: int, i: int, j: int) -> np.ndarray:
    """The matrix unit E_ij (0-based)."""
    E = np.zeros((n, n), dtype=np.complex128)
    E[i, j] = 1.0
    return E


# -- interchange formats (row-major) -----------------------------------------

def matrix_to_json(A) -> dict:
    A = as_matrix(A)
    flat = A.ravel(order="C")
    return {"n": A.shape[0], "entries": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_json(obj: dict) -> np.ndarray:
    n = int(obj["n"])
    entries = obj["entries"]
    if n < 1 or len(entries) != n * n:
        raise ValueError(f"expected {n * n} entries for n={n}, got {len(entries)}")
    arr = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
    return as_matrix(arr.reshape(n, n))


def matrix_to_bytes(A) -> bytes:
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError("expected a 2-D array")
    rows, cols = A.shape
    # little-endian complex128 is exactly (re, im) IEEE-754 double pairs
    payload = np.ascontiguousarray(A).astype("<c16").tobytes()
    return BINARY_MAGIC + struct.pack("<QQ", rows, cols) + payload


def matrix_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != BINARY_MAGIC:
        raise ValueError("bad magic, expected QXM1")
    rows, cols = struct.unpack("<QQ", data[4:20])
    expected = 20 + 16 * rows * cols
    if len(data) != expected:
        raise ValueError(f"truncated matrix payload: {len(data)} != {expected} bytes")
    return np.frombuffer(data, dtype="<c16", offset=20).reshape(rows, cols).astype(np.complex128)


def save_matrix(path, A) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(matrix_to_json(A)))
    else:
        path.write_bytes(matrix_to_bytes(A))


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        return matrix_from_json(json.loads(path.read_text()))
    return matrix_from_bytes(path.read_bytes())
