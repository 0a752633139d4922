"""One test per acceptance criterion, at the stated tolerances.

Criteria 2 and the slope part of 5 fail by construction of the physics; see the
docstrings. Criteria 7 to 11 run full lifetime experiments and take minutes.
"""
from functools import lru_cache

import numpy as np
import pytest
from scipy.linalg import expm

from gkpstab import experiments as ex, fock, gkp, noise as nz, protocols as pr

EPS = (0.1, 0.13, 0.15)
P13 = gkp.GkpParams.from_epsilon(0.13)
N_ROUNDS = 200
# first-run values at kappa dt = 2e-4 (or kappa_phi dt), eps = 0.13, dim 350;
# sBs under loss does not decay by 20 % in 200 rounds, so its value is the upper bound
PINS_LOSS = {"sBs": 9.267253631151107e-12, "ST": 4.675422138333829e-08}
PINS_DEPHASING = {"sBs": 6.475017789387971e-04, "ST": 8.907256940389185e-04}


@lru_cache(maxsize=None)
def oscillator_prep():
    cfg = fock.HilbertConfig(gkp.recommended_dim(P13))
    rho0 = ex.stabilize_from_vacuum(P13, cfg)
    return cfg, {P: ex.prepare_pauli_eigenstate(P, 1, P13, cfg, rho0) for P in ex.PAULIS}


@lru_cache(maxsize=None)
def oscillator_run(protocol, kind, value):
    cfg, prep = oscillator_prep()
    noise = nz.NoiseParams(kappa=value) if kind == "loss" else nz.NoiseParams(kappa_phi=value)
    return ex.lifetime(protocol, P13, noise, N_ROUNDS, cfg=cfg, prep=prep)


@lru_cache(maxsize=None)
def ancilla_prep():
    # ancilla-noise errors (~1e-4 per t_CD) sit far above the dim-200 truncation floor
    cfg = fock.HilbertConfig(200, 1e-4)
    rho0 = ex.stabilize_from_vacuum(P13, cfg)
    return cfg, {P: ex.prepare_pauli_eigenstate(P, 1, P13, cfg, rho0) for P in ex.PAULIS}


@lru_cache(maxsize=None)
def ancilla_run(protocol, variant, kind, value):
    cfg, prep = ancilla_prep()
    noise = nz.NoiseParams(gamma1=value) if kind == "decay" else nz.NoiseParams(gamma_phi=value)
    return ex.lifetime(protocol, P13, noise, 120, mode="ancilla", cfg=cfg, variant=variant,
                       prep=prep)


def test_c01_exact_eigen_relation():
    for eps in EPS:
        p = gkp.GkpParams.from_epsilon(eps)
        # dim-150 code words leak up to 4e-5 into the top levels
        res = gkp.stabilizer_residuals(p, fock.HilbertConfig(150, 1e-4))
        assert max(res.values()) <= 1e-6, (eps, res)


def test_c02_dark_mode_condition():
    """Fails: the folded quadrature has a sawtooth jump the Gaussian peaks
    straddle (floor ~2e-4 at eps 0.15), and at dim 150 truncation adds 4e-3 to 3e-2."""
    for eps in EPS:
        p = gkp.GkpParams.from_epsilon(eps)
        res = gkp.dark_mode_residuals(p, fock.HilbertConfig(150, 1e-4))
        assert max(res.values()) <= 1e-4, (eps, res)


def test_c03_mean_excitation_numbers():
    nbar = []
    for eps in EPS:
        p = gkp.GkpParams.from_epsilon(eps)
        psi = gkp.make_gkp_state(0, p, fock.HilbertConfig(gkp.recommended_dim(p)))
        nbar.append(fock.mean_number(psi))
    assert nbar[0] > nbar[1] > nbar[2]
    for got, want in zip(nbar, (17, 14, 12)):
        assert abs(got - want) <= 1, nbar


def test_c04_cooling_from_vacuum():
    cfg = fock.HilbertConfig(gkp.recommended_dim(P13))
    rows = ex.converge("sBs", P13, cfg, n_pairs=50)
    assert any(tx >= 0.98 and tp >= 0.98 for _, tx, tp, _, _ in rows)


def test_c05_trotter_ordering():
    cfg = fock.HilbertConfig(200)
    d = pr.trotter_distances(P13, cfg)
    assert d["sBs"] < d["ST"]
    assert d["BsB"] < d["ST"]
    eps_grid = np.array([0.05, 0.08, 0.12, 0.16, 0.2])
    dist = {k: [] for k in pr.PROTOCOLS}
    for eps in eps_grid:
        for k, v in pr.trotter_distances(gkp.GkpParams.from_epsilon(eps), cfg).items():
            dist[k].append(v)
    slope = {k: np.polyfit(np.log(eps_grid), np.log(v), 1)[0] for k, v in dist.items()}
    # fails: all slopes are ~1; the big term has fixed strength l c / 2, so eps is
    # not the small Trotter parameter and the error orders do not show as slopes
    assert slope["sBs"] - slope["ST"] >= 0.7, slope
    assert slope["BsB"] - slope["ST"] >= 0.7, slope


def test_c06_superlattice_commutation():
    p = gkp.GkpParams.from_epsilon(0.15)
    for name in pr.PROTOCOLS:
        dim = pr.superlattice_min_dim(pr.superlattice_constant(name, p.eps))
        for axis in ("x", "p"):
            spec = pr.ProtocolSpec(name, p, axis)
            for sub in range(spec.n_sub):
                assert pr.superlattice_defect(spec, dim, sub=sub) <= 1e-6, (name, axis, sub)


def _ordering(kind, pins):
    sbs = oscillator_run("sBs", kind, 2e-4)
    st = oscillator_run("ST", kind, 2e-4)
    unc = oscillator_run("none", kind, 2e-4)
    noise = nz.NoiseParams(kappa=2e-4) if kind == "loss" else nz.NoiseParams(kappa_phi=2e-4)
    assert sbs.infidelity < st.infidelity < unc.infidelity
    assert sbs.infidelity < nz.fock01_baseline(noise)
    for name, res in (("sBs", sbs), ("ST", st)):
        assert res.infidelity == pytest.approx(pins[name], rel=0.05)


@pytest.mark.slow
def test_c07_loss_protection_ordering():
    _ordering("loss", PINS_LOSS)


@pytest.mark.slow
def test_c08_dephasing_protection_ordering():
    _ordering("dephasing", PINS_DEPHASING)


@pytest.mark.slow
def test_c09_ancilla_decay_law():
    for g in (3e-4, 1e-3):
        res = ancilla_run("BsB", "autonomous", "decay", g)
        per_cd = ex.error_per_big_cd(res)
        assert 0.5 <= per_cd / (g / 2) <= 2, per_cd
        fb = ancilla_run("BsB", "feedback", "decay", g)
        assert fb.infidelity < res.infidelity


@pytest.mark.slow
def test_c10_ancilla_dephasing_robustness():
    for name in ("BsB", "sBs"):
        deph = ancilla_run(name, "autonomous", "dephasing", 1e-3)
        decay = ancilla_run(name, "autonomous", "decay", 1e-3)
        assert deph.infidelity <= 0.1 * decay.infidelity, name


@pytest.mark.slow
def test_c11_bsb_floor():
    # lowest rate where the BsB floor is a minor contribution; both protocols are
    # superlinear above it, so the linear extrapolation overestimates
    anchor = 3e-3
    ratio = {}
    for name in ("BsB", "sBs"):
        low = oscillator_run(name, "loss", 1e-5).infidelity
        linear = oscillator_run(name, "loss", anchor).infidelity * 1e-5 / anchor
        ratio[name] = low / linear
    assert ratio["BsB"] >= 2, ratio
    assert ratio["sBs"] < 2, ratio
    # the n-bar drift needs the superlattice resolved (dim 874 at eps 0.13); at the
    # dim-350 lifetime cutoff, truncation pulls n-bar down instead
    cfg = fock.HilbertConfig(900)
    rho = ex.stabilize_from_vacuum(P13, cfg)
    sched = pr.round_schedule("BsB", P13, cfg)
    noise = nz.NoiseParams(kappa=1e-5)
    nbar = []
    for _ in range(100):
        for ch in sched:
            rho = nz.idle_channel(ch.apply(rho), noise)
        nbar.append(fock.mean_number(rho))
    assert nbar[-1] > nbar[24], nbar[::25]


def test_c12_oracle_suite():
    cfg = fock.HilbertConfig(60)
    a = fock.annihilation(cfg)
    alpha = 0.8 - 0.4j
    D = fock.displacement(alpha, cfg)
    # D^dag a D = a + alpha away from the truncation edge
    assert np.abs((D.conj().T @ a @ D - a - alpha * np.eye(cfg.dim))[:30, :30]).max() < 1e-10
    ref = expm(alpha * a.conj().T - np.conj(alpha) * a)
    assert np.abs((D - ref)[:30, :30]).max() < 1e-10
    r = 0.5
    big = fock.HilbertConfig(120)
    S = fock.squeeze(r, big)
    x = fock.position(big)
    assert np.abs((S.conj().T @ x @ S - np.exp(-r) * x)[:20, :20]).max() < 1e-8
    E = fock.envelope(0.3, cfg)
    assert np.allclose(E, expm(-0.09 * fock.number(cfg)))

    cfg = fock.HilbertConfig(gkp.recommended_dim(P13))
    for mu in (0, 1):
        ov = abs(np.vdot(gkp.make_gkp_state(mu, P13, cfg),
                         gkp.make_gkp_state_squeezed(mu, P13, cfg)))
        assert ov >= 1 - 1e-8

    small = fock.HilbertConfig(25)
    alpha, kt = 1.2 + 0.3j, 0.5
    psi = fock.displacement(alpha, small)[:, 0]
    rho = nz.lindblad_evolve(np.outer(psi, psi.conj()), np.zeros((25, 25)),
                             [(1.0, fock.annihilation(small))], kt)
    phi = fock.displacement(alpha * np.exp(-kt / 2), small)[:, 0]
    assert np.abs(rho - np.outer(phi, phi.conj())).max() < 1e-8

    rng = np.random.default_rng(0)
    t = np.linspace(0, 100, 300)
    s = np.exp(-0.02 * t) * (1 + 0.005 * rng.normal(size=t.size))
    assert ex.fit_decay(t, s).rate == pytest.approx(0.02, rel=0.05)
