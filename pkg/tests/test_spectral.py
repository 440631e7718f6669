import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qxlab.haar import RngStream, UnitaryTuple, identity_tuple, sample_haar_unitary, sample_tuple
from qxlab.linalg import hs_inner, hs_norm2, normalized_trace
from qxlab.spectral import (channel_apply, commutant_gap, dense_commutant_epsilon,
                            dense_expander_epsilon, dense_lambda2, expander_epsilon, lambda2,
                            verify_corollary_doubling, verify_gap_equivalence)
from oracles import conj_super, off_basis, phi_sym_matrix, random_complex, restricted, tt_matrix

LAMBDA2_LIMIT_D3 = np.sqrt(5) / 3


def test_channel_unital_and_identity_tuple(rng):
    t = sample_tuple(6, 3, 1)
    for sym in (True, False):
        assert np.allclose(channel_apply(t, np.eye(6), sym), np.eye(6), atol=1e-13)
    A = random_complex(6, rng)
    H = A + A.conj().T
    out = channel_apply(t, H, True)
    assert np.allclose(out, out.conj().T, atol=1e-13)
    assert np.allclose(channel_apply(identity_tuple(6, 2), A, True), A)
    assert np.allclose(channel_apply(identity_tuple(6, 2), A, False), A)
    with pytest.raises(ValueError):
        channel_apply(t, np.eye(5))


@given(st.integers(2, 16), st.integers(1, 3), st.integers(0, 2**32))
def test_channel_self_adjoint_contractive_trace_preserving(n, d, seed):
    t = sample_tuple(n, d, seed)
    r = np.random.default_rng(seed)
    A, B = random_complex(n, r), random_complex(n, r)
    lhs = hs_inner(channel_apply(t, A), B)
    rhs = hs_inner(A, channel_apply(t, B))
    assert abs(lhs - rhs) <= 1e-10 * (1 + hs_norm2(A) * hs_norm2(B))
    assert hs_norm2(channel_apply(t, A)) <= hs_norm2(A) * (1 + 1e-12)
    assert abs(normalized_trace(channel_apply(t, A)) - normalized_trace(A)) < 1e-12 * (1 + hs_norm2(A))


def test_channel_contraction_many():
    t = sample_tuple(24, 3, 5)
    r = np.random.default_rng(0)
    for _ in range(100):
        A = random_complex(24, r)
        assert hs_norm2(channel_apply(t, A)) <= hs_norm2(A) * (1 + 1e-12)


@pytest.mark.slow
def test_lambda2_limit_n256():
    spec = lambda2(sample_tuple(256, 3, 11))
    assert abs(spec.lambda2 - LAMBDA2_LIMIT_D3) < 0.06
    assert spec.converged and spec.residual <= 1e-7
    assert spec.restricted_space_dim == 256**2 - 1


def test_lambda2_identities_and_small_n():
    assert lambda2(identity_tuple(5, 3)).lambda2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        lambda2(sample_tuple(1, 2, 0))


def test_lambda2_d1_matches_dense_eigensolve():
    U = sample_haar_unitary(8, RngStream(3, 3))
    t = UnitaryTuple(8, 1, [U], 3)
    M = (conj_super(U) + conj_super(U.conj().T)) / 2  # 64 x 64
    ev = np.linalg.eigvals(restricted(M, 8, [np.eye(8)]))
    expected = np.max(np.abs(ev.real))
    assert lambda2(t).lambda2 == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n,d", [(n, d) for n in range(2, 11) for d in (1, 2, 3)])
def test_lambda2_matches_dense_oracle(n, d):
    t = sample_tuple(n, d, 100 * n + d)
    expected = np.linalg.eigvalsh(restricted(phi_sym_matrix(t.unitaries), n, [np.eye(n)]))[-1]
    assert lambda2(t).lambda2 == pytest.approx(expected, abs=1e-6)
    assert dense_lambda2(t) == pytest.approx(expected, abs=1e-10)


def test_power_iteration_agrees_with_lanczos():
    t = sample_tuple(7, 3, 2)
    a = lambda2(t, method="power")
    b = lambda2(t)
    assert a.converged
    assert a.lambda2 == pytest.approx(b.lambda2, abs=1e-6)


def test_expander_epsilon_trivial_cases():
    assert expander_epsilon(identity_tuple(6, 3)) == pytest.approx(0.0, abs=1e-10)
    U = sample_haar_unitary(9, RngStream(4, 4))
    assert expander_epsilon(UnitaryTuple(9, 1, [U], 4)) == pytest.approx(0.0, abs=1e-10)


def test_expander_epsilon_dense_n8():
    t = sample_tuple(8, 2, 8)
    Psi = sum(conj_super(U) for U in t.unitaries)
    s = np.linalg.norm(restricted(Psi, 8, [np.eye(8)]), 2)
    assert expander_epsilon(t) == pytest.approx(2 - s, abs=1e-8)
    assert dense_expander_epsilon(t) == pytest.approx(2 - s, abs=1e-10)


def test_expander_epsilon_positive_n128():
    t = sample_tuple(128, 3, 1)
    eps = expander_epsilon(t)
    assert eps > 0.1
    # non-Hermitian edge 2 sqrt(d - 1): eps -> d - 2 sqrt(2) at d = 3
    assert eps == pytest.approx(3 - 2 * np.sqrt(2), abs=0.05)


def test_expander_epsilon_vanishes_for_two_unitaries():
    """Any traceless function of U2^* U1 is mapped with norm exactly 2."""
    t = sample_tuple(32, 2, 1)
    w, V = np.linalg.eig(t[1].conj().T @ t[0])
    A = V @ np.diag(np.sign(np.cos(np.angle(w))) + 0j) @ np.linalg.inv(V)
    A = A - normalized_trace(A) * np.eye(32)
    image = t[0] @ A @ t[0].conj().T + t[1] @ A @ t[1].conj().T
    assert hs_norm2(image) == pytest.approx(2 * hs_norm2(A), rel=1e-10)
    assert expander_epsilon(t) == pytest.approx(0.0, abs=1e-8)


def test_commutant_gap_identities():
    rep = commutant_gap(identity_tuple(2, 3), [np.eye(2)])
    assert rep.epsilon == 0.0
    assert rep.constant_C == float("inf")


def test_commutant_gap_limit_constant_n128():
    rep = commutant_gap(sample_tuple(128, 3, 3), [np.eye(128)])
    assert rep.certified
    assert rep.epsilon >= 4 / 3 and rep.constant_C <= 3 / 4


def test_commutant_gap_dense_n4():
    t = sample_tuple(4, 2, 17)
    expected = np.linalg.eigvalsh(restricted(tt_matrix(t.unitaries), 4, [np.eye(4)]))[0]
    rep = commutant_gap(t, [np.eye(4)])
    assert rep.epsilon == pytest.approx(expected, abs=1e-8)
    assert rep.epsilon == pytest.approx(2 * rep.d * (1 - rep.lambda2_sym), abs=1e-8)
    assert rep.constant_C * rep.epsilon == pytest.approx(1.0, rel=1e-15)
    assert dense_commutant_epsilon(t, [np.eye(4)]) == pytest.approx(expected, abs=1e-10)


def test_commutant_gap_rejects_non_commutant():
    t = sample_tuple(4, 2, 1)
    with pytest.raises(ValueError, match="not in commutant"):
        commutant_gap(t, [np.diag([1, 0, 0, 0])])
    with pytest.raises(ValueError):
        commutant_gap(identity_tuple(1, 2), [np.eye(1)])


@pytest.mark.parametrize("n,d,seed", [(4, 2, 1), (6, 3, 2), (5, 1, 3), (12, 2, 4)])
def test_gap_equivalence(n, d, seed):
    assert verify_gap_equivalence(sample_tuple(n, d, seed), [np.eye(n)]) <= 1e-8


def test_gap_equivalence_identities_and_limits():
    assert verify_gap_equivalence(identity_tuple(3, 2), [np.eye(3)]) <= 1e-12
    with pytest.raises(ValueError):
        verify_gap_equivalence(sample_tuple(13, 2, 0), [np.eye(13)])


def test_restricted_top_never_exceeds_one():
    for seed in range(5):
        spec = lambda2(sample_tuple(6, 2, seed))
        assert spec.lambda2 <= 1 + spec.residual + 1e-12
        assert 0 <= spec.lambda2


def test_doubling_identities():
    rep = verify_corollary_doubling(identity_tuple(5, 3))
    assert rep.eps_sg == pytest.approx(0, abs=1e-10) and rep.eps_qe == pytest.approx(0, abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_doubling_is_one_sided(seed):
    """The doubled tuple's norm constant sees |lambda|; it never exceeds the gap constant."""
    t = sample_tuple(8, 2, seed)
    rep = verify_corollary_doubling(t)
    ev = np.linalg.eigvalsh(restricted(phi_sym_matrix(t.unitaries), 8, [np.eye(8)]))
    assert rep.eps_sg == pytest.approx(4 * (1 - ev[-1]), abs=1e-7)
    assert rep.eps_qe == pytest.approx(4 * (1 - max(ev[-1], -ev[0])), abs=1e-7)
    assert rep.eps_qe <= rep.eps_sg + 1e-8
    if ev[-1] >= -ev[0]:
        assert rep.discrepancy <= 1e-6


def test_doubling_rejects_large_n():
    with pytest.raises(ValueError):
        verify_corollary_doubling(identity_tuple(129, 1))
