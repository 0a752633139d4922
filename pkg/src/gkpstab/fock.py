"""Truncated Fock-space linear algebra with one ancilla qubit.

Operators are plain complex ``numpy`` arrays. Oscillator operators are
``dim x dim``; joint operators are ``2 dim x 2 dim`` with the qubit as the
slow index (``q * dim + n``) and qubit basis ``(g, e)``, so that
``sigma_z = diag(1, -1)``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import DivergenceError, ShapeError, TruncationError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|, lowers e -> g
ID2 = np.eye(2, dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)

N_TOP = 5


@dataclass(frozen=True)
class HilbertConfig:
    """Fock cutoff and the truncation leakage tolerated per operation."""

    dim: int = 150
    trunc_tol: float = 1e-6

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")
        if not self.trunc_tol > 0:
            raise ValueError("trunc_tol must be positive")


def annihilation(cfg):
    """Lowering operator with sqrt(n) on the first superdiagonal."""
    return np.diag(np.sqrt(np.arange(1, cfg.dim)), 1).astype(complex)


def number(cfg):
    return np.diag(np.arange(cfg.dim)).astype(complex)


def position(cfg):
    a = annihilation(cfg)
    return (a + a.conj().T) / np.sqrt(2)


def momentum(cfg):
    a = annihilation(cfg)
    return -1j * (a - a.conj().T) / np.sqrt(2)


def fock(n, cfg):
    v = np.zeros(cfg.dim, dtype=complex)
    v[n] = 1.0
    return v


class QuadratureBasis:
    """Eigenbasis of the truncated position operator.

    ``x = V diag(w) V^T`` with real ``V``. Functions of ``p`` follow from the
    quarter-period rotation ``F = exp(i pi n / 2)``, which maps ``x`` to ``p``
    under ``F x F^dagger``.
    """

    def __init__(self, dim):
        self.dim = dim
        off = np.sqrt(np.arange(1, dim) / 2.0)
        self.w, self.V = sla.eigh_tridiagonal(np.zeros(dim), off)
        self.fourier = np.exp(0.5j * np.pi * np.arange(dim))

    def fx(self, f):
        """Matrix of ``f(x)`` for a vectorized scalar function ``f``."""
        return (self.V * f(self.w)) @ self.V.T

    def fp(self, f):
        F = self.fourier
        return F[:, None] * self.fx(f) * F.conj()[None, :]

    def apply_fx(self, f, v):
        """Apply ``f(x)`` to a vector or to the columns of a matrix."""
        fw = f(self.w)
        c = self.V.T @ v
        c = fw[:, None] * c if c.ndim == 2 else fw * c
        return self.V @ c


@lru_cache(maxsize=8)
def quadrature_basis(dim):
    return QuadratureBasis(dim)


def _coherent_leakage(alpha, dim):
    # Poisson tail of |alpha> above level dim - 1 - N_TOP
    return float(poisson.sf(dim - N_TOP - 1, abs(alpha) ** 2))


def displacement_phases(alpha, dim):
    """Diagonal ``G`` with ``D(alpha) = G exp(-i sqrt2 |alpha| x) G^dagger``."""
    return np.exp(1j * (np.angle(alpha) + np.pi / 2) * np.arange(dim))


def displacement(alpha, cfg):
    """Displacement ``exp(alpha a^dagger - alpha^* a)``.

    Built from the eigenbasis of the tridiagonal generator, so the result is
    unitary to machine precision. Raises ``TruncationError`` when the coherent
    state ``D(alpha)|0>`` leaks more than ``trunc_tol`` into the top levels.
    """
    leak = _coherent_leakage(alpha, cfg.dim)
    if leak > cfg.trunc_tol:
        raise TruncationError(
            f"|alpha|={abs(alpha):.3g}: top-level leakage {leak:.2e} at dim={cfg.dim}")
    if alpha == 0:
        return np.eye(cfg.dim, dtype=complex)
    qb = quadrature_basis(cfg.dim)
    r = abs(alpha)
    G = displacement_phases(alpha, cfg.dim)
    D = qb.fx(lambda w: np.exp(-1j * np.sqrt(2) * r * w))
    return G[:, None] * D * G.conj()[None, :]


def squeeze(xi, cfg):
    """Squeezing ``exp(xi^*/2 a a - xi/2 a^dagger a^dagger)``."""
    if xi == 0:
        return np.eye(cfg.dim, dtype=complex)
    a = annihilation(cfg)
    a2 = a @ a
    S = matrix_exp(0.5 * (np.conj(xi) * a2 - xi * a2.conj().T))
    leak = float(np.sum(np.abs(S[-N_TOP:, 0]) ** 2))
    if leak > cfg.trunc_tol:
        raise TruncationError(f"squeezed vacuum leakage {leak:.2e} at dim={cfg.dim}")
    return S


def squeezed_vacuum(r, cfg):
    """Analytic Fock amplitudes of ``S(r)|0>`` for real ``r``."""
    n = np.arange(cfg.dim)
    psi = np.zeros(cfg.dim)
    even = n[::2] // 2
    # log of sqrt((2k)!) / (2^k k!)
    logc = 0.5 * gammaln(2 * even + 1) - even * np.log(2) - gammaln(even + 1)
    tr = np.tanh(r)
    with np.errstate(divide="ignore"):
        mag = np.exp(logc + even * np.log(abs(tr))) if tr != 0 else (even == 0) * 1.0
    psi[::2] = mag * np.sign(-tr) ** even / np.sqrt(np.cosh(r))
    return psi.astype(complex)


def envelope(delta, cfg):
    """Diagonal envelope ``exp(-delta^2 n)``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return np.diag(np.exp(-delta ** 2 * np.arange(cfg.dim))).astype(complex)


def envelope_inverse(delta, cfg):
    return np.diag(np.exp(delta ** 2 * np.arange(cfg.dim))).astype(complex)


def _is_hermitian(G, tol=1e-12):
    scale = max(1.0, np.abs(G).max())
    return np.abs(G - G.conj().T).max() <= tol * scale


def matrix_exp(G, tol=1e-8):
    """Matrix exponential with an a-posteriori accuracy check.

    Hermitian and anti-Hermitian inputs go through an eigendecomposition.
    General inputs use ``scipy.linalg.expm`` (scaling and squaring with Pade),
    and the result is compared with the square of ``expm(G / 2)``; a relative
    mismatch above ``tol`` raises ``DivergenceError``.
    """
    G = np.asarray(G, dtype=complex)
    if not np.all(np.isfinite(G)):
        raise DivergenceError("non-finite generator")
    if _is_hermitian(G):
        lam, U = np.linalg.eigh(G)
        return (U * np.exp(lam)) @ U.conj().T
    if _is_hermitian(1j * G):
        lam, U = np.linalg.eigh(1j * G)
        return (U * np.exp(-1j * lam)) @ U.conj().T
    E = sla.expm(G)
    H = sla.expm(G / 2)
    err = np.linalg.norm(H @ H - E, 2) / max(1.0, np.linalg.norm(E, 2))
    if not np.isfinite(err) or err > tol:
        raise DivergenceError(f"expm self-consistency error {err:.2e}")
    return E


def fold(w, m):
    """Fold values into the symmetric interval (-m/2, m/2]."""
    return w - m * np.ceil(w / m - 0.5)


def modular_quadrature(m, cfg):
    """``x mod m`` obtained by folding the eigenvalues of truncated ``x``."""
    if not m > 0:
        raise ValueError("modulus must be positive")
    return quadrature_basis(cfg.dim).fx(lambda w: fold(w, m)).astype(complex)


def _dim_of(arr, joint):
    n = arr.shape[0]
    if joint:
        if n % 2:
            raise ShapeError(f"joint space needs even size, got {n}")
        return n // 2
    return n


def tensor_with_qubit(op, which_factor="oscillator", dim=None):
    """Lift an oscillator (or 2x2 qubit) operator to qubit x oscillator."""
    op = np.asarray(op, dtype=complex)
    if which_factor == "oscillator":
        return np.kron(ID2, op)
    if which_factor == "qubit":
        if op.shape != (2, 2) or dim is None:
            raise ShapeError("qubit factor needs a 2x2 operator and dim")
        return np.kron(op, np.eye(dim))
    raise ShapeError(f"unknown factor {which_factor!r}")


def partial_trace_qubit(state):
    """Trace out the qubit of a joint pure vector or density matrix."""
    state = np.asarray(state)
    N = _dim_of(state, True)
    if state.ndim == 1:
        psi = state.reshape(2, N)
        return psi.T @ psi.conj()
    if state.shape != (2 * N, 2 * N):
        raise ShapeError(f"bad joint density matrix shape {state.shape}")
    return state[:N, :N] + state[N:, N:]


def qubit_project(state, outcome):
    """Project the qubit on ``g`` or ``e``; returns (normalized state, probability)."""
    state = np.asarray(state, dtype=complex)
    N = _dim_of(state, True)
    q = {"g": 0, "e": 1}[outcome]
    P = np.zeros(2 * N)
    P[q * N:(q + 1) * N] = 1.0
    if state.ndim == 1:
        out = P * state
        prob = float(np.vdot(out, out).real)
        return (out / np.sqrt(prob) if prob > 0 else out), prob
    out = P[:, None] * state * P[None, :]
    prob = float(np.trace(out).real)
    return (out / prob if prob > 0 else out), prob


def leakage(state, joint=False):
    """Population of the top ``N_TOP`` Fock levels."""
    state = np.asarray(state)
    if joint:
        N = _dim_of(state, True)
        if state.ndim == 1:
            pops = np.abs(state.reshape(2, N)) ** 2
        else:
            pops = np.diagonal(state).real.reshape(2, N)
        return float(pops[:, -N_TOP:].sum())
    if state.ndim == 1:
        return float(np.sum(np.abs(state[-N_TOP:]) ** 2))
    return float(np.diagonal(state)[-N_TOP:].real.sum())


def check_state(state, tol=1e-10):
    """Validate a pure vector or density matrix; raises ``ValueError``."""
    state = np.asarray(state)
    if state.ndim == 1:
        nrm = np.linalg.norm(state)
        if abs(nrm - 1) > tol:
            raise ValueError(f"pure state norm {nrm}")
        return
    if np.abs(state - state.conj().T).max() > tol:
        raise ValueError("density matrix not Hermitian")
    tr = np.trace(state).real
    if abs(tr - 1) > tol:
        raise ValueError(f"density matrix trace {tr}")
    if np.linalg.eigvalsh(state).min() < -tol:
        raise ValueError("density matrix not positive")


def is_unitary(U, tol=1e-10):
    return np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2) <= tol


def expect(op, state):
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


def mean_number(state, joint=False):
    state = np.asarray(state)
    if joint:
        state = partial_trace_qubit(state)
    if state.ndim == 1:
        pops = np.abs(state) ** 2
        norm = pops.sum()
    else:
        pops = np.diagonal(state).real
        norm = pops.sum()
    return float(pops @ np.arange(len(pops)) / norm)


def rotate_qubit(rho, R):
    """Conjugate a joint density matrix by ``R`` acting on the qubit only."""
    N = rho.shape[0] // 2
    blocks = [[rho[:N, :N], rho[:N, N:]], [rho[N:, :N], rho[N:, N:]]]
    out = np.empty_like(rho)
    for a in (0, 1):
        for b in (0, 1):
            acc = 0
            for i in (0, 1):
                for j in (0, 1):
                    c = R[a, i] * np.conj(R[b, j])
                    if c != 0:
                        acc = acc + c * blocks[i][j]
            out[a * N:(a + 1) * N, b * N:(b + 1) * N] = acc
    return out


def qubit_rotation(axis, angle):
    """``exp(-i angle sigma_axis / 2)``."""
    s = {"x": SX, "y": SY, "z": SZ}[axis]
    return np.cos(angle / 2) * ID2 - 1j * np.sin(angle / 2) * s
