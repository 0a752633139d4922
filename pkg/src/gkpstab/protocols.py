"""ST, BsB and sBs stabilization rounds as qubit-oscillator circuits.

Compiled circuits act in the ancilla frame where the controlled displacement
conditions on ``sigma_z``. They equal the Hadamard conjugate of the
exponential products written with ``sigma_x`` and ``sigma_y`` conditioning,
and the ancilla starts in ``|+>``. Each round is reduced to the Kraus pair
``K_o = <o| U |+>`` acting on the oscillator.
"""
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .errors import CompletenessError, SpecError, TruncationError

PROTOCOLS = ("ST", "BsB", "sBs")
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SUPERLATTICE = {"ST": 2 * np.pi, "BsB": np.pi, "sBs": 4 * np.pi}


@dataclass(frozen=True)
class CircuitStep:
    """One circuit element.

    ``kind`` is ``"prepare"`` (ancilla to ``|+>``), ``"cd"`` (controlled
    displacement with amplitude ``beta``), ``"rot"`` (``exp(-i angle
    sigma_axis / 2)``), ``"reset"`` or ``"measure"`` (``sigma_z`` measurement
    followed by the displacement ``D(+-beta / (2 sqrt2))`` for outcome g/e,
    which stands in for a final controlled displacement).
    """

    kind: str
    beta: complex = 0j
    axis: str = "x"
    angle: float = 0.0
    duration: float = 0.0
    big: bool = False


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    params: object
    axis: str = "x"
    variant: str = "autonomous"
    st_order: tuple = (0, 1)

    def __post_init__(self):
        if self.name not in PROTOCOLS:
            raise SpecError(f"unknown protocol {self.name!r}")
        if self.axis not in ("x", "p"):
            raise SpecError(f"axis must be 'x' or 'p', got {self.axis!r}")
        if self.variant not in ("autonomous", "feedback"):
            raise SpecError(f"unknown variant {self.variant!r}")
        if self.variant == "feedback" and self.name == "sBs":
            raise SpecError("measurement feedback is defined for BsB and ST only")
        if sorted(self.st_order) != [0, 1]:
            raise SpecError("st_order must be a permutation of (0, 1)")

    @property
    def n_sub(self):
        return 2 if self.name == "ST" else 1


@dataclass(frozen=True)
class RoundChannel:
    """Kraus pair of one round with the logical Pauli frame it applies.

    ``frame`` is ``"I"``, ``"X"`` or ``"Z"``: with plain (non-modular)
    quadratures every big controlled displacement acts as a logical Pauli on
    the code, so readout must be multiplied by the accumulated frame.
    """

    kraus: tuple
    spec: ProtocolSpec
    sub: int = 0
    frame: str = "I"
    duration: float = 0.0
    steps: tuple = field(default=(), repr=False)

    def apply(self, rho):
        Kg, Ke = self.kraus
        return Kg @ rho @ Kg.conj().T + Ke @ rho @ Ke.conj().T


rotation = fock.qubit_rotation


def _cd_sequence(name, params, sub):
    # (kind, beta) in time order; small terms get sandwiched by R and R^dagger
    big = -1j * params.l * params.c
    eps = params.eps
    if name == "sBs":
        return [("s", -eps / 2), ("b", big), ("s", -eps / 2)]
    if name == "BsB":
        return [("b", big), ("s", -2 * eps), ("b", big)]
    if sub == 0:
        return [("b", big), ("s", -eps)]
    return [("s", -eps), ("b", big)]


def build_round(spec, sub=0, t_cd=1.0):
    """Step list of one (sub-)round.

    Sub-round ``sub`` selects ST case (i) or (ii); BsB and sBs have a single
    sub-round. Controlled-displacement durations scale as ``|beta| / (l c)``
    so that the big displacement lasts ``t_cd``.
    """
    if sub >= spec.n_sub:
        raise SpecError(f"{spec.name} has {spec.n_sub} sub-round(s)")
    p = spec.params
    rot = 1j if spec.axis == "p" else 1.0
    seq = _cd_sequence(spec.name, p, sub)
    steps = [CircuitStep("prepare")]
    for i, (kind, beta) in enumerate(seq):
        b = beta * rot
        dur = abs(b) / (p.l * p.c) * t_cd
        last = i == len(seq) - 1
        if kind == "s":
            steps.append(CircuitStep("rot", axis="x", angle=np.pi / 2))
            steps.append(CircuitStep("cd", beta=b, duration=dur))
            steps.append(CircuitStep("rot", axis="x", angle=-np.pi / 2))
        elif last and spec.variant == "feedback":
            steps.append(CircuitStep("measure", beta=b, big=True))
        else:
            steps.append(CircuitStep("cd", beta=b, duration=dur, big=True))
    if steps[-1].kind != "measure":
        steps.append(CircuitStep("reset"))
    return steps


def frame_of(spec, steps):
    """Logical frame of a round: one Pauli per big displacement."""
    n_big = sum(1 for s in steps if s.big)
    if n_big % 2 == 0:
        return "I"
    return "Z" if spec.axis == "x" else "X"


def controlled_displacement(beta, cfg):
    """``exp((beta a^dag - beta^* a) sigma_z / (2 sqrt2))`` as a joint matrix."""
    alpha = beta / (2 * np.sqrt(2))
    D = fock.displacement(alpha, cfg)
    Z = np.zeros_like(D)
    # D(-alpha) = D(alpha)^dagger
    return np.block([[D, Z], [Z, D.conj().T]])


def circuit_unitary(steps, cfg):
    """Product of the unitary steps (prepare, reset and measure skipped)."""
    N = cfg.dim
    U = np.eye(2 * N, dtype=complex)
    for s in steps:
        if s.kind == "cd":
            U = controlled_displacement(s.beta, cfg) @ U
        elif s.kind == "rot":
            U = np.kron(rotation(s.axis, s.angle), np.eye(N)) @ U
        elif s.kind == "measure":
            # deferred measurement: the conditioned displacement is a CD
            U = controlled_displacement(s.beta, cfg) @ U
    return U


def compile_channel(spec, cfg, sub=0, t_cd=1.0):
    """Kraus pair ``K_o = <o| U |+>`` of one (sub-)round."""
    steps = build_round(spec, sub, t_cd)
    U = circuit_unitary(steps, cfg)
    N = cfg.dim
    kraus = tuple((U[o * N:(o + 1) * N, :N] + U[o * N:(o + 1) * N, N:]) / np.sqrt(2)
                  for o in (0, 1))
    err = np.abs(sum(K.conj().T @ K for K in kraus) - np.eye(N)).max()
    if err > 1e-9:
        raise CompletenessError(f"Kraus completeness defect {err:.2e}")
    dur = sum(s.duration for s in steps)
    return RoundChannel(kraus, spec, sub, frame_of(spec, steps), dur, tuple(steps))


def round_schedule(name, params, cfg, variant="autonomous", st_order=(0, 1), t_cd=1.0):
    """Channels of one full round: x sub-rounds then p sub-rounds."""
    out = []
    for axis in ("x", "p"):
        spec = ProtocolSpec(name, params, axis, variant, tuple(st_order))
        subs = st_order if name == "ST" else (0,)
        out.extend(compile_channel(spec, cfg, sub, t_cd) for sub in subs)
    return out


def _trotter_factors(spec, cfg, sub, modular):
    # exponential factors in the sigma_x / sigma_y frame, left to right
    p = spec.params
    m = p.l / (2 * p.c)
    qb = fock.quadrature_basis(cfg.dim)
    if spec.axis == "x":
        X = qb.fx(lambda w: fock.fold(w, m)) if modular else fock.position(cfg)
        P = fock.momentum(cfg)
    else:
        X = qb.fp(lambda w: fock.fold(w, m)) if modular else fock.momentum(cfg)
        P = -fock.position(cfg)
    A = np.kron(fock.SX, X)
    B = np.kron(fock.SY, P)
    big = lambda k: fock.matrix_exp(-0.5j * k * p.l * p.c * A)
    small = lambda k: fock.matrix_exp(-1j * k * p.eps * B)
    if spec.name == "sBs":
        return [small(0.25), big(1), small(0.25)]
    if spec.name == "BsB":
        return [big(1), small(1), big(1)]
    if sub == 0:
        return [small(0.5), big(1)]
    return [big(1), small(0.5)]


def trotter_product(spec, cfg, sub=0, modular=False):
    """Exponential product of a round in the ``sigma_x``/``sigma_y`` frame.

    With ``modular=True`` the big term uses the folded quadrature, which is the
    Trotter product before the folded quadrature is replaced by the plain one.
    """
    U = np.eye(2 * cfg.dim, dtype=complex)
    for F in _trotter_factors(spec, cfg, sub, modular):
        U = U @ F
    return U


def to_circuit_frame(U, cfg):
    H = np.kron(HADAMARD, np.eye(cfg.dim))
    return H @ U @ H


def target_unitary(spec, cfg, prefactor=None, modular=True):
    """Untrotterized reference ``exp(-i k (x_[m] sigma_x + t p sigma_y))``.

    ``k = l c / 2`` by default, the normalization that makes a translation by
    one modulus a trivial qubit operation.
    """
    p = spec.params
    k = p.l * p.c / 2 if prefactor is None else prefactor
    m = p.l / (2 * p.c)
    qb = fock.quadrature_basis(cfg.dim)
    if spec.axis == "x":
        X = qb.fx(lambda w: fock.fold(w, m)) if modular else fock.position(cfg)
        P = fock.momentum(cfg)
    else:
        X = qb.fp(lambda w: fock.fold(w, m)) if modular else fock.momentum(cfg)
        P = -fock.position(cfg)
    G = np.kron(fock.SX, X) + p.t * np.kron(fock.SY, P)
    return fock.matrix_exp(-1j * k * G)


def phase_distance(U, V, P=None):
    """Operator-norm distance ``min_phi ||(U - e^{i phi} V) P||``."""
    if P is not None:
        U, V = U @ P, V @ P
    ov = np.vdot(V.ravel(), U.ravel())
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(U - ph * V, 2))


def trotter_distances(params, cfg, fock_max=40):
    """Per-step distance of each protocol to the reference unitary.

    Products use the folded quadrature, the form the Trotter decomposition is
    applied to. ST is averaged over its two one-step sub-rounds; BsB spans two
    reference steps and its distance to the squared reference is halved. The
    domain is the full qubit times Fock levels up to ``fock_max``.
    """
    N = cfg.dim
    P = np.kron(fock.ID2, np.eye(N)[:, :fock_max + 1])
    mk = lambda n: ProtocolSpec(n, params, "x")
    T = target_unitary(mk("sBs"), cfg)
    st = [phase_distance(trotter_product(mk("ST"), cfg, s, True), T, P) for s in (0, 1)]
    return {
        "ST": 0.5 * sum(st),
        "sBs": phase_distance(trotter_product(mk("sBs"), cfg, 0, True), T, P),
        "BsB": 0.5 * phase_distance(trotter_product(mk("BsB"), cfg, 0, True), T @ T, P),
    }


def superlattice_constant(name, eps):
    return SUPERLATTICE[name] / eps


def superlattice_min_dim(b, n_cell=20):
    """Cutoff needed to displace Fock states up to ``n_cell`` by ``b``."""
    return int(np.ceil((b / np.sqrt(2) + np.sqrt(n_cell) + 8) ** 2))


def superlattice_displacement(spec, cfg, name=None):
    """Translation by the superlattice constant, ``exp(i b x)`` for an x-round.

    For a p-round the image ``exp(-i b p)`` is returned. ``name`` overrides the
    protocol whose constant is used.
    """
    b = superlattice_constant(name or spec.name, spec.params.eps)
    leak = fock._coherent_leakage(b / np.sqrt(2), cfg.dim)
    if leak > cfg.trunc_tol:
        raise TruncationError(
            f"superlattice translation b={b:.1f} needs dim >= {superlattice_min_dim(b)}")
    qb = fock.quadrature_basis(cfg.dim)
    if spec.axis == "x":
        return qb.fx(lambda w: np.exp(1j * b * w))
    return qb.fp(lambda w: np.exp(-1j * b * w))


class _VectorEngine:
    """Applies round circuits to blocks of column vectors at large cutoff."""

    def __init__(self, dim):
        self.qb = fock.quadrature_basis(dim)
        self.dim = dim

    def disp(self, alpha, v):
        G = fock.displacement_phases(alpha, self.dim)[:, None]
        r = abs(alpha)
        return G * self.qb.apply_fx(lambda w: np.exp(-1j * np.sqrt(2) * r * w), G.conj() * v)

    def kraus(self, steps, v):
        # joint state as (g, e) blocks of columns, ancilla starts in |+>
        g, e = v / np.sqrt(2), v / np.sqrt(2)
        for s in steps:
            if s.kind in ("cd", "measure"):
                a = s.beta / (2 * np.sqrt(2))
                g, e = self.disp(a, g), self.disp(-a, e)
            elif s.kind == "rot":
                R = rotation(s.axis, s.angle)
                g, e = R[0, 0] * g + R[0, 1] * e, R[1, 0] * g + R[1, 1] * e
        return g, e


def superlattice_defect(spec, dim, n_cell=20, name=None, sub=0):
    """Commutation defect of the Kraus pair with a superlattice translation.

    Returns ``max_o min_s ||(K_o D - s D K_o) P||`` over the Fock levels up to
    ``n_cell`` and both signs ``s``; the translation commutes up to a sign.
    """
    b = superlattice_constant(name or spec.name, spec.params.eps)
    need = superlattice_min_dim(b, n_cell)
    if dim < need:
        raise TruncationError(f"superlattice check needs dim >= {need}, got {dim}")
    eng = _VectorEngine(dim)
    steps = build_round(spec, sub)
    v = np.eye(dim, dtype=complex)[:, :n_cell + 1]
    if spec.axis == "x":
        trans = lambda u: eng.qb.apply_fx(lambda w: np.exp(1j * b * w), u)
    else:
        trans = lambda u: eng.disp(b / np.sqrt(2), u)
    kd = eng.kraus(steps, trans(v))
    dk = [trans(k) for k in eng.kraus(steps, v)]
    out = 0.0
    for o in (0, 1):
        d = min(np.linalg.norm(kd[o] - s * dk[o], 2) for s in (1, -1))
        out = max(out, d)
    return float(out)


def feedback_round(spec, cfg, sub=0, t_cd=1.0):
    """Channel of the round whose final big displacement is replaced by feedback.

    The ancilla is measured in the ``sigma_z`` basis and the oscillator is
    displaced by ``D(+-beta / (2 sqrt2))`` according to the outcome. Returns
    the ``RoundChannel``; its Kraus pair is indexed by measurement outcome.
    """
    if spec.name == "sBs":
        raise SpecError("measurement feedback is defined for BsB and ST only")
    fb = ProtocolSpec(spec.name, spec.params, spec.axis, "feedback", spec.st_order)
    steps = build_round(fb, sub, t_cd)
    if steps[-1].kind != "measure":
        raise SpecError("this sub-round does not end with a big displacement")
    return compile_channel(fb, cfg, sub, t_cd)
