"""Oscillator and ancilla noise: master-equation integration and exact channels.

Rate conventions: loss jump ``sqrt(kappa) a``, oscillator dephasing
``sqrt(kappa_phi) a^dagger a``, ancilla decay ``sqrt(gamma_1) sigma_-`` and
ancilla dephasing ``sqrt(gamma_phi / 2) sigma_z``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from . import fock
from .errors import StepControlError


@dataclass(frozen=True)
class NoiseParams:
    """Noise rates (1/time) and timing.

    ``dt`` is the idle time after each instantaneous round (oscillator-noise
    experiments); ``t_cd`` is the duration of one big controlled displacement
    (ancilla-noise experiments).
    """

    kappa: float = 0.0
    kappa_phi: float = 0.0
    gamma1: float = 0.0
    gamma_phi: float = 0.0
    dt: float = 1.0
    t_cd: float = 1.0

    def __post_init__(self):
        for k in ("kappa", "kappa_phi", "gamma1", "gamma_phi"):
            if getattr(self, k) < 0:
                raise ValueError(f"{k} must be non-negative")
        if not (self.dt > 0 and self.t_cd > 0):
            raise ValueError("dt and t_cd must be positive")


def lindblad_rhs(H, jumps):
    """Right-hand side ``-i[H, rho] + sum_k r_k D[L_k] rho`` on a matrix."""
    Heff = np.asarray(H, dtype=complex).copy()
    terms = []
    for rate, L in jumps:
        if rate == 0:
            continue
        L = np.asarray(L, dtype=complex)
        Heff = Heff - 0.5j * rate * (L.conj().T @ L)
        terms.append((rate, L))

    def rhs(rho):
        out = -1j * (Heff @ rho - rho @ Heff.conj().T)
        for rate, L in terms:
            out += rate * (L @ rho @ L.conj().T)
        return out

    return rhs


def lindblad_evolve(rho, H, jumps, T, rtol=1e-10, atol=1e-12):
    """Integrate the Lindblad equation for time ``T`` with an adaptive RK45 pair.

    Raises ``StepControlError`` if the integrator fails, the trace drifts by
    more than 1e-9 or the smallest eigenvalue falls below -1e-8.
    """
    rho = np.asarray(rho, dtype=complex)
    if T == 0:
        return rho.copy()
    n = rho.shape[0]
    rhs = lindblad_rhs(H, jumps)
    sol = solve_ivp(lambda t, y: rhs(y.reshape(n, n)).ravel(), (0.0, T), rho.ravel(),
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise StepControlError(sol.message)
    out = sol.y[:, -1].reshape(n, n)
    tr0, tr1 = np.trace(rho).real, np.trace(out).real
    if abs(tr1 - tr0) > 1e-9:
        raise StepControlError(f"trace drift {tr1 - tr0:.2e}")
    if np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() < -1e-8:
        raise StepControlError("positivity violated")
    return out


@lru_cache(maxsize=16)
def _loss_coefficients(dim, kdt):
    # rho'_{mn} = sum_k c_{m,k} c_{n,k} rho_{m+k,n+k}, c^2 = C(m+k,k) eta^m (1-eta)^k
    eta = np.exp(-kdt)
    m = np.arange(dim)
    out = []
    for k in range(dim):
        mm = m[:dim - k]
        lc = 0.5 * (gammaln(mm + k + 1) - gammaln(mm + 1) - gammaln(k + 1) + mm * np.log(eta))
        if k:
            lc += 0.5 * k * np.log(-np.expm1(-kdt))
        c = np.exp(lc)
        if k and c.max() < 1e-17:
            break
        out.append(np.outer(c, c))
    return tuple(out)


def loss_channel(rho, kdt):
    """Exact amplitude-damping channel after loss ``kappa t = kdt``."""
    if kdt == 0:
        return rho.copy()
    n = rho.shape[0]
    out = np.zeros_like(rho)
    for k, C in enumerate(_loss_coefficients(n, float(kdt))):
        out[:n - k, :n - k] += C * rho[k:, k:]
    return out


def dephasing_channel(rho, kpdt):
    """Exact number dephasing: coherences decay as ``exp(-kpdt (m-n)^2 / 2)``."""
    if kpdt == 0:
        return rho.copy()
    m = np.arange(rho.shape[0])
    return rho * np.exp(-0.5 * kpdt * (m[:, None] - m[None, :]) ** 2)


def idle_channel(rho, noise, method="exact"):
    """Oscillator evolution over one idle time ``dt``.

    ``method="exact"`` uses the closed-form solution of the loss and dephasing
    master equation (the two dissipators commute); ``"integrate"`` calls
    ``lindblad_evolve``.
    """
    if method == "integrate":
        cfg = fock.HilbertConfig(rho.shape[0])
        a, n = fock.annihilation(cfg), fock.number(cfg)
        jumps = [(noise.kappa, a), (noise.kappa_phi, n)]
        return lindblad_evolve(rho, np.zeros_like(rho), jumps, noise.dt)
    out = loss_channel(rho, noise.kappa * noise.dt)
    return dephasing_channel(out, noise.kappa_phi * noise.dt)


def cd_duration(beta, params, t_cd):
    return abs(beta) / (params.l * params.c) * t_cd


def _z_over_expm1(z):
    # (1 - exp(-z)) / z with the z -> 0 limit
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-12
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def noisy_cd(rho, beta, gamma1, gamma_phi, tau):
    """Controlled displacement of duration ``tau`` with ancilla decay and dephasing.

    Exact solution of the master equation with the constant generator of the
    gate plus the ancilla jumps. In the eigenbasis ``W`` of the displacement
    generator the gate is diagonal, so each block of the joint density matrix
    evolves entrywise; a decay jump moves ``rho_ee`` to ``rho_gg`` after a
    random fraction of the gate, which is integrated in closed form.
    """
    N = rho.shape[0] // 2
    alpha = beta / (2 * np.sqrt(2))
    qb = fock.quadrature_basis(N)
    G = fock.displacement_phases(alpha, N)
    W = G[:, None] * qb.V
    phi = -np.sqrt(2) * abs(alpha) * qb.w
    Wh = W.conj().T
    gg, ge, ee = (Wh @ rho[:N, :N] @ W, Wh @ rho[:N, N:] @ W, Wh @ rho[N:, N:] @ W)
    u = gamma1 * tau
    delta = phi[:, None] - phi[None, :]
    rot = np.exp(1j * delta)
    if u > 0:
        jump = u * rot * _z_over_expm1(u + 2j * delta)
        gg = rot * gg + jump * ee
    else:
        gg = rot * gg
    ee = np.exp(-u) * rot.conj() * ee
    ge = np.exp(-(0.5 * u + gamma_phi * tau)) * np.exp(1j * (phi[:, None] + phi[None, :])) * ge
    out = np.empty_like(rho)
    out[:N, :N] = W @ gg @ Wh
    out[N:, N:] = W @ ee @ Wh
    out[:N, N:] = W @ ge @ Wh
    out[N:, :N] = out[:N, N:].conj().T
    return out


def noisy_gate(rho, step, noise, params, method="exact"):
    """Apply one circuit step to a joint density matrix.

    Controlled displacements last ``|beta| / (l c) t_cd`` and suffer ancilla
    decay and dephasing; rotations are instantaneous and ideal.
    ``method="integrate"`` solves the same master equation with
    ``lindblad_evolve`` (small cutoffs only).
    """
    N = rho.shape[0] // 2
    if step.kind == "rot":
        return fock.rotate_qubit(rho, fock.qubit_rotation(step.axis, step.angle))
    if step.kind != "cd":
        raise ValueError(f"noisy_gate handles rotations and displacements, got {step.kind}")
    tau = cd_duration(step.beta, params, noise.t_cd)
    if method == "exact":
        return noisy_cd(rho, step.beta, noise.gamma1, noise.gamma_phi, tau)
    cfg = fock.HilbertConfig(N)
    a = fock.annihilation(cfg)
    b = step.beta / (2 * np.sqrt(2))
    gen = np.kron(fock.SZ, b * a.conj().T - np.conj(b) * a)
    H = 1j * gen / tau
    jumps = [(noise.gamma1, np.kron(fock.SM, np.eye(N))),
             (noise.gamma_phi / 2, np.kron(fock.SZ, np.eye(N)))]
    return lindblad_evolve(rho, H, jumps, tau)


def fock01_rates(noise):
    """Pauli decay rates of the {0,1} Fock qubit under oscillator noise."""
    gx = 0.5 * noise.kappa + 0.5 * noise.kappa_phi
    return np.array([gx, gx, noise.kappa])


def bare_ancilla_rates(noise):
    """Pauli decay rates of an idle ancilla under decay and dephasing."""
    gx = 0.5 * noise.gamma1 + noise.gamma_phi
    return np.array([gx, gx, noise.gamma1])


def fock01_baseline(noise, horizon=None):
    """Channel infidelity of the {0,1} Fock qubit over ``horizon`` (default ``dt``)."""
    h = noise.dt if horizon is None else horizon
    g = fock01_rates(noise)
    return float(1 - (1 + np.exp(-g * h).sum()) / 4)
