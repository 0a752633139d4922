"""Pauli-state preparation, logical lifetimes, infidelity sweeps and Wigner maps."""
from dataclasses import dataclass, field

import numpy as np

from . import fock, gkp, noise as nz, protocols as pr
from .errors import FitError, PrepError, TruncationError

PAULIS = ("X", "Y", "Z")
# sign picked up by (s_X, s_Y, s_Z) under a logical frame Pauli
FRAME_SIGNS = {
    "I": np.array([1.0, 1.0, 1.0]),
    "X": np.array([1.0, -1.0, -1.0]),
    "Y": np.array([-1.0, 1.0, -1.0]),
    "Z": np.array([-1.0, -1.0, 1.0]),
}
CSV_COLUMNS = (
    "protocol", "epsilon", "rate_name", "rate_value",
    "gamma_X", "gamma_Y", "gamma_Z", "gamma_err_X", "gamma_err_Y", "gamma_err_Z",
    "infidelity", "infidelity_uncorrected", "baseline", "nbar_final", "leakage_max",
    "status",
)


@dataclass
class FitResult:
    rate: float
    stderr: float
    r2: float
    bounded: bool

    @property
    def reported(self):
        """Fitted rate, or the upper bound ``max(rate, 0) + 2 stderr`` when bounded."""
        if self.bounded:
            return max(self.rate, 0.0) + 2 * self.stderr
        return self.rate


@dataclass
class SweepResult:
    """Outcome of one lifetime experiment.

    Rates are per unit time; ``infidelity`` is evaluated at ``horizon``.
    ``bounded`` marks rates whose trajectory decayed by less than 20 %; those
    entries of ``rates`` are upper bounds ``max(fit, 0) + 2 stderr``.
    """

    protocol: str
    epsilon: float
    rates: np.ndarray
    rate_errors: np.ndarray
    infidelity: float
    horizon: float
    times: np.ndarray
    trajectories: np.ndarray
    nbar: np.ndarray
    leakage: np.ndarray
    bounded: tuple = ()
    r2: tuple = ()
    extra: dict = field(default_factory=dict)


def channel_infidelity(rates, horizon):
    """``1 - (1 + sum_P exp(-gamma_P h)) / 4``."""
    rates = np.asarray(rates, dtype=float)
    return float(1 - (1 + np.exp(-rates * horizon).sum()) / 4)


def fit_decay(t, s, skip=5, min_decay=0.2, r2_min=0.95):
    """Single-exponential fit ``s0 exp(-gamma t)`` by least squares on ``log s``.

    The first ``skip`` samples are dropped. When the trajectory decays by at
    least ``min_decay`` a poor fit (``R^2 < r2_min``) raises ``FitError``;
    otherwise the rate is flagged as ``bounded``.
    """
    t = np.asarray(t, dtype=float)[skip:]
    s = np.asarray(s, dtype=float)[skip:]
    if len(t) < 4:
        raise FitError("need at least 4 samples after the skip window")
    if np.any(s <= 0):
        raise FitError("trajectory reaches zero, no log-domain fit possible")
    y = np.log(s)
    coef, cov = np.polyfit(t, y, 1, cov=True)
    resid = y - np.polyval(coef, t)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else np.nan
    decay = 1 - s[-1] / s[0]
    bounded = decay < min_decay
    if not bounded and not (r2 >= r2_min):
        raise FitError(f"poor exponential fit, R^2 = {r2:.3f}")
    return FitResult(float(-coef[0]), float(np.sqrt(max(cov[0, 0], 0.0))), float(r2), bool(bounded))


def stabilize_from_vacuum(params, cfg, n_pairs=50, protocol="sBs"):
    """Noise-free stabilization rounds applied to the vacuum."""
    rho = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    rho[0, 0] = 1.0
    sched = pr.round_schedule(protocol, params, cfg)
    for _ in range(n_pairs):
        for ch in sched:
            rho = ch.apply(rho)
    return rho


def preparation_kraus(pauli, params, cfg):
    """Kraus pair ``K_+- = (1 +- P_0) / 2`` of a logical-operator measurement.

    Circuit: ancilla in ``|+>``, ``CD(beta)`` with ``beta = l/2`` (X),
    ``i l / 2`` (Z) or ``(1 + i) l / 2`` (Y), ancilla measured along x, then
    the unconditional correction ``D(beta / (2 sqrt2))``. The product of the
    branch ``(D(a) +- D(-a)) / 2`` with the correction gives the pair above.
    """
    P0 = gkp.ideal_pauli(pauli, params, cfg)
    one = np.eye(cfg.dim)
    return (one + P0) / 2, (one - P0) / 2


@dataclass
class Preparation:
    state: np.ndarray
    probability: float
    delta: np.ndarray
    bloch: np.ndarray
    mixed: np.ndarray


def prepare_pauli_eigenstate(pauli, sign, params, cfg, rho=None, n_pairs=50, check=True):
    """Prepare the ``sign`` eigenstate of logical ``pauli`` by measurement.

    ``rho`` defaults to the vacuum stabilized by ``n_pairs`` sBs round pairs.
    The unwanted outcome is absorbed in the Pauli frame, so the ensemble over
    both outcomes has the Bloch-component difference ``delta = K_s rho K_s^+ -
    K_-s rho K_-s^+``. Returns the post-selected state for the wanted outcome,
    its probability, ``delta``, the Bloch vector of the state and the
    unconditional post-measurement state.
    """
    if pauli not in PAULIS or sign not in (1, -1):
        raise ValueError("pauli must be X, Y or Z and sign +-1")
    if rho is None:
        rho = stabilize_from_vacuum(params, cfg, n_pairs)
    Kp, Km = preparation_kraus(pauli, params, cfg)
    if sign < 0:
        Kp, Km = Km, Kp
    a = Kp @ rho @ Kp.conj().T
    b = Km @ rho @ Km.conj().T
    prob = float(np.trace(a).real)
    state = a / prob
    bloch = gkp.logical_bloch(state, params)
    comp = sign * bloch[PAULIS.index(pauli)]
    if check and comp < 0.9:
        raise PrepError(f"prepared {pauli}{'+' if sign > 0 else '-'} component {comp:.3f}")
    return Preparation(state, prob, a - b, bloch, a + b)


def _run_ancilla_round(rho, ch, noise, params):
    # joint evolution with noisy controlled displacements, ancilla reset after
    N = rho.shape[0]
    joint = np.kron(np.full((2, 2), 0.5, dtype=complex), rho)
    for step in ch.steps:
        if step.kind in ("cd", "rot"):
            joint = nz.noisy_gate(joint, step, noise, params)
        elif step.kind == "measure":
            a = step.beta / (2 * np.sqrt(2))
            Dg = fock.displacement(a, fock.HilbertConfig(N, trunc_tol=1.0))
            Dg_dag = Dg.conj().T
            gg, ee = joint[:N, :N], joint[N:, N:]
            return Dg @ gg @ Dg_dag + Dg_dag @ ee @ Dg
    return joint[:N, :N] + joint[N:, N:]


def _round_time(ch, mode, noise):
    if mode == "oscillator":
        return noise.dt
    return sum(s.duration for s in ch.steps) * noise.t_cd


def lifetime(protocol, params, noise, n_rounds, mode="oscillator", cfg=None,
             variant="autonomous", st_order=(0, 1), skip=None, prep=None, n_pairs=50):
    """Logical decay rates of a stabilized (or idle) GKP qubit.

    Parameters
    ----------
    protocol : str
        ``"ST"``, ``"BsB"``, ``"sBs"`` or ``"none"`` for the uncorrected code,
        which idles for the same number of steps as sBs.
    mode : str
        ``"oscillator"``: instantaneous rounds each followed by an idle time
        ``dt``. ``"ancilla"``: rounds with finite-duration controlled
        displacements and ancilla noise, perfect oscillator.
    skip : int
        Rounds dropped before fitting; default ``max(5, n_rounds // 2)``.
    prep : dict
        Optional precomputed ``{pauli: Preparation}``.

    Returns
    -------
    SweepResult
        Rates per unit time and the infidelity at horizon ``dt`` (oscillator
        mode) or ``t_cd`` (ancilla mode).
    """
    cfg = cfg or fock.HilbertConfig(gkp.recommended_dim(params))
    if mode not in ("oscillator", "ancilla"):
        raise ValueError(f"unknown mode {mode!r}")
    skip = max(5, n_rounds // 2) if skip is None else skip
    basis = gkp.code_basis(params, cfg)
    if prep is None:
        rho0 = stabilize_from_vacuum(params, cfg, n_pairs)
        prep = {P: prepare_pauli_eigenstate(P, 1, params, cfg, rho0) for P in PAULIS}
    deltas = [prep[P].delta for P in PAULIS]
    mixed = prep["Z"].mixed
    if protocol == "none":
        sched = [None, None]
    else:
        sched = pr.round_schedule(protocol, params, cfg, variant, st_order)
    frame = np.ones(3)
    t = 0.0
    times, traj, nbar, leak = [], [], [], []
    for _ in range(n_rounds):
        for ch in sched:
            if ch is None:
                step = lambda r: nz.idle_channel(r, noise)
                dt = noise.dt
            elif mode == "oscillator":
                step = lambda r, ch=ch: nz.idle_channel(ch.apply(r), noise)
                dt = noise.dt
            else:
                step = lambda r, ch=ch: _run_ancilla_round(r, ch, noise, params)
                dt = _round_time(ch, mode, noise)
            deltas = [step(d) for d in deltas]
            mixed = step(mixed)
            if ch is not None:
                frame = frame * FRAME_SIGNS[ch.frame]
            t += dt
        comps = [gkp.logical_components(d, basis)[i] for i, d in enumerate(deltas)]
        times.append(t)
        traj.append(np.array(comps) * frame)
        nbar.append(fock.mean_number(mixed))
        leak.append(fock.leakage(mixed))
    times, traj = np.array(times), np.array(traj)
    fits = [fit_decay(times, traj[:, i], skip) for i in range(3)]
    rates = np.array([f.reported for f in fits])
    horizon = noise.dt if mode == "oscillator" else noise.t_cd
    return SweepResult(
        protocol=protocol if variant == "autonomous" else f"{protocol}-fb",
        epsilon=float(params.eps), rates=rates,
        rate_errors=np.array([f.stderr for f in fits]),
        infidelity=channel_infidelity(rates, horizon), horizon=horizon,
        times=times, trajectories=traj, nbar=np.array(nbar), leakage=np.array(leak),
        bounded=tuple(f.bounded for f in fits), r2=tuple(f.r2 for f in fits),
        extra={"round_time": float(times[0]), "n_rounds": n_rounds, "skip": skip,
               "n_big": sum(1 for ch in sched if ch is not None
                            for s in ch.steps if s.kind == "cd" and s.big)})


def error_per_big_cd(res):
    """Logical error probability per executed big controlled displacement.

    For a Pauli channel with decay rates ``gamma_P`` the total error
    probability over a round of length ``T`` is ``T sum_P gamma_P / 4``.
    Feedback displacements are not counted, they involve no ancilla in ``|e>``.
    """
    n_big = res.extra["n_big"]
    if not n_big:
        raise ValueError("no big controlled displacements in this run")
    return float(res.rates.sum() / 4 * res.extra["round_time"] / n_big)


def _noise_for(kind, value):
    return {
        "loss": nz.NoiseParams(kappa=value),
        "dephasing": nz.NoiseParams(kappa_phi=value),
        "decay": nz.NoiseParams(gamma1=value),
        "ancilla-dephasing": nz.NoiseParams(gamma_phi=value),
    }[kind]


RATE_NAMES = {"loss": "kappa_dt", "dephasing": "kappa_phi_dt",
              "decay": "gamma1_tcd", "ancilla-dephasing": "gamma_phi_tcd"}


def _row(res, kind, value, uncorrected, baseline):
    g, e = res.rates, res.rate_errors
    return {
        "protocol": res.protocol, "epsilon": res.epsilon, "rate_name": RATE_NAMES[kind],
        "rate_value": value, "gamma_X": g[0], "gamma_Y": g[1], "gamma_Z": g[2],
        "gamma_err_X": e[0], "gamma_err_Y": e[1], "gamma_err_Z": e[2],
        "infidelity": res.infidelity, "infidelity_uncorrected": uncorrected,
        "baseline": baseline, "nbar_final": float(res.nbar[-1]),
        "leakage_max": float(res.leakage.max()), "status": _status(res),
    }


def _status(res):
    bound = [P for P, b in zip(PAULIS, res.bounded) if b]
    return "ok" if not bound else "ok; upper bound " + "".join(bound)


def _failed_row(protocol, eps, kind, value, err):
    row = {k: "" for k in CSV_COLUMNS}
    row.update(protocol=protocol, epsilon=eps, rate_name=RATE_NAMES[kind],
               rate_value=value, status=f"error: {type(err).__name__}: {err}")
    return row


def sweep_points(protocols, eps_list, rate_grid):
    return [(p, e, r) for e in eps_list for p in protocols for r in rate_grid]


def sweep_fig3(protocols, eps_list, rate_grid, kind="loss", n_rounds=150, dim=None,
               on_row=None, skip_points=(), trunc_tol=1e-6):
    """Oscillator-noise sweep: one row per (protocol, epsilon, rate).

    ``kind`` is ``"loss"`` or ``"dephasing"``; rates are ``kappa dt`` or
    ``kappa_phi dt``. Each row carries the uncorrected-GKP infidelity and the
    {0,1} Fock baseline at the same rate. Failures are recorded per row.
    """
    if kind not in ("loss", "dephasing"):
        raise ValueError(f"fig3 kind must be loss or dephasing, got {kind!r}")
    return _sweep(protocols, eps_list, rate_grid, kind, "oscillator", n_rounds, dim,
                  on_row, skip_points, trunc_tol)


def sweep_fig4(protocols, eps_list, rate_grid, kind="decay", n_rounds=100, dim=None,
               on_row=None, skip_points=(), trunc_tol=1e-6):
    """Ancilla-noise sweep; protocol names may carry a ``-fb`` feedback suffix.

    The baseline column is the bare-ancilla infidelity over ``t_cd``.
    """
    if kind not in ("decay", "ancilla-dephasing"):
        raise ValueError(f"fig4 kind must be decay or ancilla-dephasing, got {kind!r}")
    return _sweep(protocols, eps_list, rate_grid, kind, "ancilla", n_rounds, dim,
                  on_row, skip_points, trunc_tol)


def _sweep(protocols, eps_list, rate_grid, kind, mode, n_rounds, dim, on_row, skip_points,
           trunc_tol=1e-6):
    rows = []
    done = set(skip_points)
    for eps in eps_list:
        params = gkp.GkpParams.from_epsilon(eps)
        cfg = fock.HilbertConfig(dim or gkp.recommended_dim(params), trunc_tol)
        prep = None
        uncorrected = {}
        for proto in protocols:
            for value in rate_grid:
                key = (proto, float(eps), float(value))
                if key in done:
                    continue
                noise = _noise_for(kind, value)
                try:
                    if prep is None:
                        rho0 = stabilize_from_vacuum(params, cfg)
                        prep = {P: prepare_pauli_eigenstate(P, 1, params, cfg, rho0)
                                for P in PAULIS}
                    name, variant = (proto[:-3], "feedback") if proto.endswith("-fb") \
                        else (proto, "autonomous")
                    res = lifetime(name, params, noise, n_rounds, mode, cfg, variant,
                                   prep=prep)
                    if mode == "oscillator":
                        if value not in uncorrected:
                            unc = lifetime("none", params, noise, n_rounds, mode, cfg, prep=prep)
                            uncorrected[value] = unc.infidelity
                        unc_inf = uncorrected[value]
                        base = nz.fock01_baseline(noise)
                    else:
                        unc_inf = ""
                        base = channel_infidelity(nz.bare_ancilla_rates(noise), noise.t_cd)
                    row = _row(res, kind, value, unc_inf, base)
                    row["epsilon"] = float(eps)
                except Exception as err:  # noqa: BLE001 - recorded per row, sweep continues
                    row = _failed_row(proto, float(eps), kind, value, err)
                rows.append(row)
                if on_row is not None:
                    on_row(key, row)
    return rows


def break_even(rows):
    """Rates at which each (protocol, epsilon) beats its baseline."""
    out = {}
    for r in rows:
        if not r["status"].startswith("ok"):
            continue
        key = (r["protocol"], r["epsilon"])
        out.setdefault(key, [])
        if r["infidelity"] < r["baseline"]:
            out[key].append(r["rate_value"])
    return out


def converge(protocol, params, cfg, n_pairs=50):
    """Cool the vacuum; returns rows ``(pair, <T_x>, <T_p>, nbar, leakage)``."""
    Tx = gkp.finite_stabilizer("x", params, cfg)
    Tp = gkp.finite_stabilizer("p", params, cfg)
    rho = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    rho[0, 0] = 1.0
    sched = pr.round_schedule(protocol, params, cfg)
    rows = []
    for k in range(1, n_pairs + 1):
        for ch in sched:
            rho = ch.apply(rho)
        rows.append((k, fock.expect(Tx, rho).real, fock.expect(Tp, rho).real,
                     fock.mean_number(rho), fock.leakage(rho)))
    return rows


def wigner(state, xvec, pvec, tol=1e-6):
    """Wigner function ``(2/pi) tr[rho D(a) Pi D(a)^+]`` on a quadrature grid.

    ``a = (x + i p) / sqrt2``. The array has shape ``(len(pvec), len(xvec))``
    and integrates to one with the measure ``dx dp / 2``. Raises
    ``TruncationError`` when a displaced state leaks more than ``tol`` into the
    top Fock levels.
    """
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        vecs, weights = state[:, None], np.array([1.0])
    else:
        lam, U = np.linalg.eigh(state)
        keep = lam > 1e-12 * lam.max()
        vecs, weights = U[:, keep], lam[keep]
    N = vecs.shape[0]
    qb = fock.quadrature_basis(N)
    parity = (-1.0) ** np.arange(N)
    W = np.zeros((len(pvec), len(xvec)))
    for i, p in enumerate(pvec):
        for j, x in enumerate(xvec):
            a = -(x + 1j * p) / np.sqrt(2)
            G = fock.displacement_phases(a, N)[:, None]
            r = abs(a)
            v = G * qb.apply_fx(lambda w: np.exp(-1j * np.sqrt(2) * r * w), G.conj() * vecs)
            pops = np.abs(v) ** 2
            if pops[-fock.N_TOP:].sum(axis=0) @ weights > tol:
                raise TruncationError(f"Wigner point ({x:.2f}, {p:.2f}) leaks at dim={N}")
            W[i, j] = 2 / np.pi * (parity @ pops) @ weights
    return W
