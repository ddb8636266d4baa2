import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shadowsim.linalg import (dagger, eig_hermitian, embed, gamma_matrix, is_hermitian, is_psd, ket, min_eig,
                              partial_trace, permute_systems, phi_matrix, positive_negative_parts, proj, tensor,
                              trace_norm)


def random_matrix(rng, n, hermitian=False):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return m + m.conj().T if hermitian else m


def test_tensor_examples():
    assert np.abs(tensor(np.eye(2), np.eye(2)) - np.eye(4)).max() == 0
    assert np.abs(tensor(proj(ket(0, 2)), proj(ket(1, 2))) - np.diag([0, 1, 0, 0])).max() == 0
    assert np.abs(tensor(gamma_matrix(2), np.array([[2.0]])) - 2 * gamma_matrix(2)).max() == 0


def test_tensor_index_formula(rng):
    a, b = random_matrix(rng, 2), random_matrix(rng, 3)
    t = tensor(a, b)
    for i, j, k, l in [(0, 1, 2, 0), (1, 1, 1, 2), (1, 0, 0, 0)]:
        assert abs(t[i * 3 + k, j * 3 + l] - a[i, j] * b[k, l]) < 1e-14


def test_partial_trace_of_product(rng):
    a, b, c = (random_matrix(rng, n) for n in (2, 3, 2))
    m = tensor(a, b, c)
    assert np.abs(partial_trace(m, [2, 3, 2], [0, 2]) - np.trace(b) * tensor(a, c)).max() < 1e-12
    assert np.abs(partial_trace(m, [2, 3, 2], [1]) - np.trace(a) * np.trace(c) * b).max() < 1e-12
    assert np.abs(partial_trace(m, [2, 3, 2], []) - np.trace(m)).max() < 1e-12


def test_partial_trace_batched(rng):
    ms = np.stack([random_matrix(rng, 6) for _ in range(3)])
    out = partial_trace(ms, [2, 3], [1])
    for k in range(3):
        assert np.abs(out[k] - partial_trace(ms[k], [2, 3], [1])).max() < 1e-12


def test_partial_trace_rejects_bad_shape():
    with pytest.raises(ValueError):
        partial_trace(np.eye(5), [2, 3], [0])


def test_permute_systems_swaps_factors(rng):
    a, b = random_matrix(rng, 2), random_matrix(rng, 3)
    assert np.abs(permute_systems(tensor(a, b), [2, 3], [1, 0]) - tensor(b, a)).max() < 1e-12


def test_embed_places_identity(rng):
    a = random_matrix(rng, 2)
    assert np.abs(embed(a, [3, 2], [1]) - tensor(np.eye(3), a)).max() < 1e-12
    assert np.abs(embed(a, [2, 3], [0]) - tensor(a, np.eye(3))).max() < 1e-12


def test_gamma_and_phi():
    g = gamma_matrix(3)
    assert np.isclose(np.trace(g), 3)
    assert np.abs(phi_matrix(3) @ phi_matrix(3) - phi_matrix(3)).max() < 1e-12
    assert np.abs(g - 3 * phi_matrix(3)).max() < 1e-12


def test_eig_hermitian_sorted_and_reconstructs(rng):
    h = random_matrix(rng, 5, hermitian=True)
    w, v = eig_hermitian(h)
    assert np.all(np.diff(w) >= 0)
    assert np.abs(v @ np.diag(w) @ dagger(v) - h).max() < 1e-10


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_psd_predicates():
    assert is_psd(np.diag([0.0, 1.0]))
    assert not is_psd(np.diag([-1e-6, 1.0]))
    assert min_eig(np.diag([3.0, -2.0])) == -2.0
    assert is_hermitian(np.eye(2)) and not is_hermitian(np.array([[0, 1], [0, 0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_positive_negative_parts_property(n, seed):
    h = random_matrix(np.random.default_rng(seed), n, hermitian=True)
    pos, neg = positive_negative_parts(h)
    assert np.abs(pos - neg - h).max() < 1e-9
    assert min_eig(pos) > -1e-9 and min_eig(neg) > -1e-9
    assert np.abs(pos @ neg).max() < 1e-8
    assert abs(trace_norm(h) - (np.trace(pos) + np.trace(neg)).real) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2 ** 32 - 1))
def test_partial_trace_preserves_trace(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    m = random_matrix(rng, n)
    keep = [i for i in range(len(dims)) if rng.random() < 0.5]
    assert abs(np.trace(partial_trace(m, dims, keep)) - np.trace(m)) < 1e-9
