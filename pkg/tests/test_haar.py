import numpy as np
import pytest
from scipy import stats

from qxlab.haar import (RngStream, UnitaryTuple, haar_from_ginibre, load_tuple, mix,
                        sample_ginibre, sample_haar_unitary, sample_tuple, save_tuple, splitmix64)
from qxlab.linalg import hs_norm2, normalized_trace


def test_splitmix_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_ginibre_moments():
    draws = np.stack([sample_ginibre(10, RngStream(5, k)) for k in range(1000)]).ravel()
    assert draws.size == 10**5
    se = np.sqrt(1 / draws.size)
    assert abs(draws.mean()) < 4 * se * np.sqrt(2)  # complex mean: both parts
    p2 = np.abs(draws) ** 2  # Exp(1): variance 1
    assert abs(p2.mean() - 1) < 4 * p2.std() / np.sqrt(draws.size)
    assert abs(draws.real.var() - 0.5) < 0.02 and abs(draws.imag.var() - 0.5) < 0.02


def test_ginibre_deterministic():
    s = RngStream(11, 3)
    assert np.array_equal(sample_ginibre(5, s), sample_ginibre(5, s))
    assert not np.array_equal(sample_ginibre(5, s), sample_ginibre(5, RngStream(11, 4)))
    with pytest.raises(ValueError):
        sample_ginibre(0, s)


@pytest.mark.parametrize("n", [2, 16, 64, 128])
def test_unitarity(n):
    count = 100 if n <= 64 else 20
    for k in range(count):
        U = sample_haar_unitary(n, RngStream(1, k))
        assert hs_norm2(U.conj().T @ U - np.eye(n)) <= 1e-11


def test_trace_moments():
    tr = np.array([np.trace(sample_haar_unitary(8, RngStream(2, k))) for k in range(10**4)])
    se = np.sqrt(1 / tr.size)  # E|Tr U|^2 = 1
    assert abs(tr.mean()) < 4 * se * np.sqrt(2)
    m2 = np.abs(tr) ** 2
    assert abs(m2.mean() - 1) < 4 * m2.std() / np.sqrt(tr.size)


def _angle_pvalue(n, count, phase_correct, seed):
    rng = RngStream(seed, 99).generator()
    angles = []
    for _ in range(count):
        Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        angles.append(np.angle(np.linalg.eigvals(haar_from_ginibre(Z, phase_correct))))
    counts, _ = np.histogram(np.concatenate(angles), bins=16, range=(-np.pi, np.pi))
    return stats.chisquare(counts).pvalue


def test_eigenangles_uniform():
    assert _angle_pvalue(8, 10**4, True, 3) > 1e-3


def test_phase_correction_is_necessary():
    assert _angle_pvalue(2, 10**4, True, 4) > 1e-3
    assert _angle_pvalue(2, 10**4, False, 4) < 1e-3


def test_left_invariance():
    V = sample_haar_unitary(8, RngStream(77, 0))
    a = [normalized_trace(V @ sample_haar_unitary(8, RngStream(6, k))).real for k in range(10**4)]
    b = [normalized_trace(sample_haar_unitary(8, RngStream(7, k))).real for k in range(10**4)]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_tuple_determinism_and_independence():
    t = sample_tuple(256, 3, 42)
    again = sample_tuple(256, 3, 42)
    for U, W in zip(t, again):
        assert np.array_equal(U, W)
    assert len(set(t.stream_ids)) == 3
    assert t.stream_ids == [mix(42, 256, 3, j) for j in range(3)]
    for j in range(3):
        for k in range(3):
            if j != k:
                assert not np.array_equal(t[j], t[k])
                assert abs(normalized_trace(t[j].conj().T @ t[k])) < 0.2
    assert t.max_unitarity_residual() <= 1e-11


def test_tuple_validation():
    with pytest.raises(ValueError):
        UnitaryTuple(2, 2, [np.eye(2)], 0)
    with pytest.raises(ValueError):
        UnitaryTuple(2, 2, [np.eye(2), np.eye(2)], 0, [5, 5])
    with pytest.raises(ValueError):
        sample_tuple(0, 1, 0)


@pytest.mark.parametrize("fmt", ["bin", "json"])
def test_manifest_roundtrip(tmp_path, fmt):
    t = sample_tuple(5, 3, 9)
    path = save_tuple(t, tmp_path / fmt, fmt)
    import json
    m = json.loads(path.read_text())
    assert (m["n"], m["d"], m["seed"], len(m["files"])) == (5, 3, 9, 3)
    back = load_tuple(path)
    assert back.stream_ids == t.stream_ids
    for U, W in zip(t, back):
        assert np.array_equal(U, W)
