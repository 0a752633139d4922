"""Finite-energy GKP code words, stabilizers, Paulis and dark modes."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .errors import ConvergenceError, DegeneracyError, ShapeError, TruncationError

L_SQUARE = 2 * np.sqrt(np.pi)


@dataclass(frozen=True)
class GkpParams:
    """Square-lattice code geometry.

    Parameters
    ----------
    delta : float
        Envelope parameter, the envelope operator is ``exp(-delta^2 n)``.
    l : float
        Lattice constant, ``2 sqrt(pi)`` for the square code.
    """

    delta: float
    l: float = L_SQUARE

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.l > 0:
            raise ValueError("lattice constant must be positive")

    @classmethod
    def from_epsilon(cls, eps, l=L_SQUARE):
        """Parameters from the protocol knob ``eps = sinh(delta^2) l``."""
        if not eps > 0:
            raise ValueError("epsilon must be positive")
        return cls(delta=float(np.sqrt(np.arcsinh(eps / l))), l=l)

    @property
    def d2(self):
        return self.delta ** 2

    @property
    def c(self):
        return np.cosh(self.d2)

    @property
    def s(self):
        return np.sinh(self.d2)

    @property
    def t(self):
        return np.tanh(self.d2)

    @property
    def eps(self):
        return self.s * self.l


def recommended_dim(params, floor=150):
    """Cutoff that keeps code-word leakage and round truncation error small.

    The truncation error of a stabilization round falls roughly like
    ``exp(-2 delta^2 dim)``; ``dim = 11 / delta^2`` puts it below 1e-9 per
    round, which is what the lifetime experiments need. Rounded up to 50.
    """
    return max(floor, int(50 * np.ceil(11.0 / (50 * params.d2))))


def hermite_functions(dim, x):
    """Normalized Hermite functions ``<n|x>`` for ``n < dim``.

    Three-term recurrence with running rescaling so that large ``|x|`` does not
    underflow before the amplitudes grow back. Returns shape ``(dim, len(x))``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((dim, x.size))
    logs = -x ** 2 / 2
    prev = np.zeros_like(x)
    cur = np.full_like(x, np.pi ** -0.25)
    out[0] = cur * np.exp(logs)
    for n in range(dim - 1):
        nxt = np.sqrt(2.0 / (n + 1)) * x * cur - np.sqrt(n / (n + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e100
        if big.any():
            cur[big] *= 1e-100
            prev[big] *= 1e-100
            logs[big] += 100 * np.log(10)
        out[n + 1] = cur * np.exp(logs)
    return out


def _comb_teeth(mu, params, dim):
    # teeth beyond the classical turning point sqrt(2 dim) carry nothing
    xmax = np.sqrt(2.0 * dim) + 12.0
    jmax = int(np.ceil(xmax / params.l)) + 2
    j = np.arange(-jmax, jmax + 1)
    return (j + mu / 2.0) * params.l


def make_gkp_state(mu, params, cfg):
    """Finite-energy code word ``|mu_Delta>``.

    Envelope applied to the truncated position comb ``sum_j |(j + mu/2) l>``,
    expanded with Hermite-function amplitudes, then normalized.
    """
    if mu not in (0, 1):
        raise ValueError("mu must be 0 or 1")
    xs = _comb_teeth(mu, params, cfg.dim)
    env = np.exp(-params.d2 * np.arange(cfg.dim))
    teeth = env[:, None] * hermite_functions(cfg.dim, xs)
    psi = teeth.sum(axis=1)
    nrm = np.linalg.norm(psi)
    # outermost teeth must be negligible, otherwise the comb is cut short
    edge = max(np.linalg.norm(teeth[:, 0]), np.linalg.norm(teeth[:, -1])) / nrm
    if edge > 1e-10:
        raise ConvergenceError(f"comb not converged, edge tooth weight {edge:.1e}")
    psi = (psi / nrm).astype(complex)
    leak = fock.leakage(psi)
    if leak > cfg.trunc_tol:
        raise TruncationError(
            f"code word leakage {leak:.2e} > {cfg.trunc_tol:.0e} at dim={cfg.dim}")
    return psi


def make_gkp_state_squeezed(mu, params, cfg, tol=1e-14):
    """Independent construction as a Gaussian-weighted sum of squeezed states.

    Uses ``E_Delta |x> ~ exp(-t x^2 / 2) D(x / (c sqrt2)) S(r)|0>`` with
    ``Var(x) = t / 2`` in the squeezed vacuum, which follows from the Mehler
    kernel of the envelope operator.
    """
    r = -0.5 * np.log(params.t)
    vac = fock.squeezed_vacuum(r, cfg)
    qb = fock.quadrature_basis(cfg.dim)
    psi = np.zeros(cfg.dim, dtype=complex)
    for x in _comb_teeth(mu, params, cfg.dim):
        weight = np.exp(-params.t * x ** 2 / 2)
        if weight < tol:
            continue
        alpha = x / (params.c * np.sqrt(2))
        G = fock.displacement_phases(alpha, cfg.dim)
        v = qb.apply_fx(lambda w: np.exp(-1j * np.sqrt(2) * abs(alpha) * w), G.conj() * vac)
        psi += weight * G * v
    return psi / np.linalg.norm(psi)


def ideal_stabilizer(axis, params, cfg):
    """``exp(i l x)`` for axis ``"x"``, ``exp(-i l p)`` for axis ``"p"``."""
    _check_translation(params.l / np.sqrt(2), cfg)
    qb = fock.quadrature_basis(cfg.dim)
    if axis == "x":
        return qb.fx(lambda w: np.exp(1j * params.l * w))
    if axis == "p":
        return qb.fp(lambda w: np.exp(-1j * params.l * w))
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def ideal_pauli(pauli, params, cfg):
    """Half-lattice translations ``X = exp(-i l p / 2)``, ``Z = exp(i l x / 2)``.

    ``Y = exp(i l (x - p) / 2)`` is the diagonal translation, equal to
    ``X Z`` up to a global phase.
    """
    h = params.l / 2
    _check_translation(params.l / 2, cfg)
    qb = fock.quadrature_basis(cfg.dim)
    if pauli == "X":
        return qb.fp(lambda w: np.exp(-1j * h * w))
    if pauli == "Z":
        return qb.fx(lambda w: np.exp(1j * h * w))
    if pauli == "Y":
        return fock.displacement(h * (1 + 1j) / np.sqrt(2), cfg)
    raise ValueError(f"unknown Pauli {pauli!r}")


def _check_translation(amplitude, cfg):
    leak = fock._coherent_leakage(amplitude, cfg.dim)
    if leak > cfg.trunc_tol:
        raise TruncationError(f"translation leaks {leak:.2e} at dim={cfg.dim}")


def envelope_quadratures(params, cfg):
    """Images ``(c x + i s p, c p - i s x)`` of ``x`` and ``p`` under the envelope."""
    x, p = fock.position(cfg), fock.momentum(cfg)
    return params.c * x + 1j * params.s * p, params.c * p - 1j * params.s * x


def finite_stabilizer(axis, params, cfg):
    """Finite-energy stabilizer ``E T_0 E^-1`` written as a single exponential."""
    _check_translation(params.l / np.sqrt(2), cfg)
    xd, pd = envelope_quadratures(params, cfg)
    if axis == "x":
        return fock.matrix_exp(1j * params.l * xd)
    if axis == "p":
        return fock.matrix_exp(-1j * params.l * pd)
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


def finite_pauli(pauli, params, cfg):
    """Finite-energy logical Pauli ``E P_0 E^-1``."""
    _check_translation(params.l / 2, cfg)
    xd, pd = envelope_quadratures(params, cfg)
    h = params.l / 2
    gens = {"X": -1j * h * pd, "Z": 1j * h * xd, "Y": 1j * h * (xd - pd)}
    if pauli not in gens:
        raise ValueError(f"unknown Pauli {pauli!r}")
    return fock.matrix_exp(gens[pauli])


def dark_mode(axis, params, cfg):
    """Dark-mode operator whose kernel is the stabilizer's +1 eigenspace.

    ``d_x = (x_[m] / sqrt(t) + i p sqrt(t)) / sqrt2`` with ``m = l / (2 c)``;
    ``d_p`` follows from ``x -> p, p -> -x``.
    """
    m = params.l / (2 * params.c)
    rt = np.sqrt(params.t)
    qb = fock.quadrature_basis(cfg.dim)
    if axis == "x":
        xm = qb.fx(lambda w: fock.fold(w, m))
        return (xm / rt + 1j * rt * fock.momentum(cfg)) / np.sqrt(2)
    if axis == "p":
        pm = qb.fp(lambda w: fock.fold(w, m))
        return (pm / rt - 1j * rt * fock.position(cfg)) / np.sqrt(2)
    raise ValueError(f"axis must be 'x' or 'p', got {axis!r}")


@lru_cache(maxsize=16)
def _code_basis(params, cfg):
    zero = make_gkp_state(0, params, cfg)
    one = make_gkp_state(1, params, cfg)
    ov = np.vdot(zero, one)
    if abs(ov) > 0.1:
        raise DegeneracyError(f"code word overlap {abs(ov):.3f} > 0.1")
    W = np.stack([zero, one], axis=1)
    S = W.conj().T @ W
    lam, U = np.linalg.eigh(S)
    B = W @ (U * lam ** -0.5) @ U.conj().T
    B.setflags(write=False)
    return B


def code_basis(params, cfg):
    """Symmetrically orthogonalized code words as columns of a ``dim x 2`` array."""
    return _code_basis(params, cfg)


def code_projector(params, cfg):
    B = code_basis(params, cfg)
    return B @ B.conj().T


def _density(state):
    state = np.asarray(state)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def logical_components(state, basis):
    """Unnormalized ``(tr[rho X], tr[rho Y], tr[rho Z])`` on the code basis.

    Unlike ``logical_bloch`` this does not divide by the code-space weight, so
    population leaving the code space shows up as decay.
    """
    rho = _density(state)
    if rho.shape[0] != basis.shape[0]:
        raise ShapeError("state and code basis dimensions differ")
    r = basis.conj().T @ rho @ basis
    return np.array([2 * r[0, 1].real, -2 * r[0, 1].imag, (r[0, 0] - r[1, 1]).real])


def logical_bloch(state, params, basis=None):
    """Logical Bloch vector ``tr[rho s_P] / tr[rho P_C]``."""
    rho = _density(state)
    if basis is None:
        basis = code_basis(params, fock.HilbertConfig(dim=rho.shape[0], trunc_tol=1.0))
    r = basis.conj().T @ rho @ basis
    return logical_components(rho, basis) / np.trace(r).real


def stabilizer_residuals(params, cfg, window=None):
    """``|| P_w (T_a |mu> - |mu>) ||`` for ``a`` in x, p and ``mu`` in 0, 1.

    ``window`` is the highest Fock level kept by ``P_w``; default ``dim // 2``.
    """
    window = cfg.dim // 2 if window is None else window
    out = {}
    for axis in ("x", "p"):
        T = finite_stabilizer(axis, params, cfg)
        for mu in (0, 1):
            psi = make_gkp_state(mu, params, cfg)
            out[(axis, mu)] = float(np.linalg.norm((T @ psi - psi)[:window + 1]))
    return out


def dark_mode_residuals(params, cfg):
    out = {}
    for axis in ("x", "p"):
        d = dark_mode(axis, params, cfg)
        for mu in (0, 1):
            psi = make_gkp_state(mu, params, cfg)
            out[(axis, mu)] = float(np.linalg.norm(d @ psi))
    return out
