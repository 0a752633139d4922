import numpy as np
import pytest
from scipy.linalg import expm

from gkpstab import fock
from gkpstab.errors import DivergenceError, ShapeError, TruncationError

CFG = fock.HilbertConfig(dim=80)


def coherent(alpha, dim):
    n = np.arange(dim)
    from scipy.special import gammaln
    amp = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1))
    return amp * np.exp(1j * n * np.angle(alpha))


def test_config_validation():
    with pytest.raises(ValueError):
        fock.HilbertConfig(dim=1)
    with pytest.raises(ValueError):
        fock.HilbertConfig(dim=10, trunc_tol=0)


def test_ladder_commutator_away_from_edge():
    a = fock.annihilation(CFG)
    c = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(c[:-1, :-1], np.eye(CFG.dim - 1))


def test_displacement_of_vacuum_is_coherent_state():
    alpha = 1.3 - 0.7j
    psi = fock.displacement(alpha, CFG)[:, 0]
    assert abs(abs(np.vdot(coherent(alpha, CFG.dim), psi)) - 1) < 1e-12


def test_displacement_matches_expm():
    cfg = fock.HilbertConfig(40)
    a = fock.annihilation(cfg)
    alpha = 0.4 + 0.3j
    ref = expm(alpha * a.conj().T - np.conj(alpha) * a)
    D = fock.displacement(alpha, cfg)
    assert np.abs((D - ref)[:20, :20]).max() < 1e-10
    assert fock.is_unitary(D)


def test_displacement_composition_phase():
    a, b = 0.5 + 0.2j, -0.3 + 0.6j
    lhs = fock.displacement(a, CFG) @ fock.displacement(b, CFG)
    rhs = np.exp(1j * np.imag(a * np.conj(b))) * fock.displacement(a + b, CFG)
    assert np.abs((lhs - rhs)[:30, :30]).max() < 1e-10


def test_displacement_truncation_error():
    with pytest.raises(TruncationError):
        fock.displacement(8.0, fock.HilbertConfig(40))


def test_squeezed_vacuum_quadrature_variance():
    r = 0.6
    cfg = fock.HilbertConfig(120)
    psi = fock.squeezed_vacuum(r, cfg)
    x = fock.position(cfg)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    assert abs(fock.expect(x @ x, psi).real - np.exp(-2 * r) / 2) < 1e-10
    S = fock.squeeze(r, cfg)
    assert abs(abs(np.vdot(S[:, 0], psi)) - 1) < 1e-10


def test_envelope_and_inverse():
    E = fock.envelope(0.3, CFG)
    assert np.allclose(E @ fock.envelope_inverse(0.3, CFG), np.eye(CFG.dim))
    assert E[5, 5] == pytest.approx(np.exp(-0.09 * 5))


def test_matrix_exp_paths():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    H = A + A.conj().T
    assert np.allclose(fock.matrix_exp(1j * H), expm(1j * H))
    assert np.allclose(fock.matrix_exp(0.1 * H), expm(0.1 * H))
    assert np.allclose(fock.matrix_exp(0.3 * A), expm(0.3 * A))
    with pytest.raises(DivergenceError):
        fock.matrix_exp(np.full((3, 3), np.nan))


def test_fold_range():
    w = np.linspace(-20, 20, 1001)
    f = fock.fold(w, 3.0)
    assert f.min() > -1.5 - 1e-12 and f.max() <= 1.5 + 1e-12
    assert np.allclose(np.round((w - f) / 3.0), (w - f) / 3.0)


def test_p_functions_match_rotated_x():
    qb = fock.quadrature_basis(CFG.dim)
    assert np.allclose(qb.fx(lambda w: w), fock.position(CFG), atol=1e-10)
    assert np.allclose(qb.fp(lambda w: w), fock.momentum(CFG), atol=1e-10)


def test_qubit_helpers():
    psi = fock.fock(2, CFG)
    joint = np.kron(fock.PLUS, psi)
    rho = np.outer(joint, joint.conj())
    red = fock.partial_trace_qubit(rho)
    assert abs(red[2, 2] - 1) < 1e-14
    state, prob = fock.qubit_project(joint, "e")
    assert prob == pytest.approx(0.5)
    assert fock.mean_number(joint, joint=True) == pytest.approx(2)
    R = fock.qubit_rotation("x", np.pi / 2)
    assert np.allclose(R, (np.eye(2) - 1j * fock.SX) / np.sqrt(2))
    out = fock.rotate_qubit(rho, R)
    full = np.kron(R, np.eye(CFG.dim))
    assert np.allclose(out, full @ rho @ full.conj().T)


def test_shape_checks():
    with pytest.raises(ShapeError):
        fock.partial_trace_qubit(np.zeros(7))


def test_leakage_measures_top_levels():
    v = np.zeros(CFG.dim, dtype=complex)
    v[-1] = 1
    assert fock.leakage(v) == pytest.approx(1)
    assert fock.leakage(fock.fock(0, CFG)) == 0


def test_ladder_small_examples():
    a = fock.annihilation(fock.HilbertConfig(2))
    assert np.allclose(a @ [0, 1], [1, 0])
    assert fock.annihilation(fock.HilbertConfig(5))[3, 4] == pytest.approx(2)
    cfg = fock.HilbertConfig(100)
    a = fock.annihilation(cfg)
    c = a @ a.conj().T - a.conj().T @ a
    assert np.abs(c[:91, :91] - np.eye(91)).max() < 1e-12


def test_displacement_examples():
    assert np.allclose(fock.displacement(0, CFG), np.eye(CFG.dim))
    cfg = fock.HilbertConfig(60)
    psi = fock.displacement(1.0, cfg)[:, 0]
    assert fock.mean_number(psi) == pytest.approx(1.0, abs=1e-8)
    cfg = fock.HilbertConfig(100)
    alpha = 2 + 1j
    prod = fock.displacement(alpha, cfg) @ fock.displacement(-alpha, cfg)
    assert np.abs(prod - np.eye(100)).max() < 1e-9


def test_squeeze_examples():
    cfg = fock.HilbertConfig(100)
    assert np.allclose(fock.squeeze(0, cfg), np.eye(100))
    S = fock.squeeze(0.5, cfg)
    x = fock.position(cfg)
    psi = S[:, 0]
    var = fock.expect(x @ x, psi).real - fock.expect(x, psi).real ** 2
    assert var == pytest.approx(np.exp(-1) / 2, abs=1e-6)
    assert np.abs(S.conj().T @ S - np.eye(100)).max() < 1e-9


def test_envelope_examples():
    cfg = fock.HilbertConfig(100)
    assert np.allclose(fock.envelope(0, cfg), np.eye(100))
    assert fock.envelope(0.3, cfg)[10, 10] == pytest.approx(np.exp(-0.9))
    prod = fock.envelope(0.2, cfg) @ fock.envelope_inverse(0.2, cfg)
    assert np.abs(prod - np.eye(100)).max() < 1e-9


def test_matrix_exp_examples():
    assert np.allclose(fock.matrix_exp(np.zeros((4, 4))), np.eye(4))
    assert np.abs(fock.matrix_exp(1j * np.pi * fock.SX / 2) - 1j * fock.SX).max() < 1e-12
    rng = np.random.default_rng(5)
    A = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50))
    U = fock.matrix_exp(A - A.conj().T)
    assert fock.is_unitary(U, 1e-9)


def test_modular_quadrature_examples():
    cfg = fock.HilbertConfig(150)
    x = fock.position(cfg)
    wmax = np.abs(fock.quadrature_basis(150).w).max()
    assert np.abs(fock.modular_quadrature(3 * wmax, cfg) - x).max() < 1e-10
    assert fock.fold(0.6 * 2.0, 2.0) == pytest.approx(-0.4 * 2.0)
    m = 2 * np.sqrt(np.pi) / (2 * np.cosh(0.0367))
    ev = np.linalg.eigvalsh(fock.modular_quadrature(m, cfg))
    assert ev.min() > -m / 2 - 1e-12 and ev.max() <= m / 2 + 1e-12


def test_qubit_partial_trace_and_projection():
    rng = np.random.default_rng(6)
    v = rng.normal(size=10) + 1j * rng.normal(size=10)
    rho = np.outer(v, v.conj()) / np.vdot(v, v).real
    plus = np.outer(fock.PLUS, fock.PLUS.conj())
    assert np.abs(fock.partial_trace_qubit(np.kron(plus, rho)) - rho).max() < 1e-12
    joint = np.kron(fock.PLUS, np.eye(10)[0])
    assert fock.qubit_project(joint, "g")[1] == pytest.approx(0.5)
    w = rng.normal(size=20) + 1j * rng.normal(size=20)
    w /= np.linalg.norm(w)
    total = fock.qubit_project(w, "g")[1] + fock.qubit_project(w, "e")[1]
    assert total == pytest.approx(1, abs=1e-12)
