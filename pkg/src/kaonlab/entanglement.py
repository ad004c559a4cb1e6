"""Entanglement of the decohering meson pair.

Basis conventions
-----------------
Matrices use the tensor-product order ``(K_S K_S, K_S K_L, K_L K_S, K_L K_L)``
of :mod:`kaonlab.decoherence`, identifying ``K_S`` with spin up and
``K_L`` with spin down.  The spin-flip operation of the concurrence is
written in the order ``(up up, down down, up down, down up)``;
:data:`SPIN_FLIP_ORDER` maps that order onto tensor indices.  Bell states
in tensor order are listed in :data:`BELL_STATES`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .decoherence import PairDensityMatrix, evolve_pair, zeta_of_lambda
from .errors import DegenerateStateError, DomainError, UnsupportedInputError
from .meson import DEFAULT_DELTA_M_TAU_S, DEFAULT_TAU_RATIO, MesonParams, make_params

__all__ = [
    "SPIN_FLIP_ORDER",
    "BELL_STATES",
    "NormalizedState",
    "MeasureReport",
    "LossReport",
    "SpectrumVerdict",
    "normalize",
    "model_state",
    "bell_weights",
    "binary_entropy",
    "von_neumann_entropy",
    "model_entropy",
    "reduced_density",
    "ppt_check",
    "reduction_check",
    "concurrence",
    "fully_entangled_fraction",
    "eof_from_concurrence",
    "entanglement_of_formation",
    "loss_report",
    "measure_report",
    "SEPARABILITY_TOL",
]

#: Tensor indices of (up up, down down, up down, down up).
SPIN_FLIP_ORDER = (0, 3, 1, 2)
#: sigma_y x sigma_y in the order of :data:`SPIN_FLIP_ORDER`.
_FLIP = np.array([[0, -1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

_R = 1 / math.sqrt(2)
#: Bell states in tensor order.
BELL_STATES = {
    "psi_minus": np.array([0, _R, -_R, 0], dtype=complex),
    "psi_plus": np.array([0, _R, _R, 0], dtype=complex),
    "phi_minus": np.array([_R, 0, 0, -_R], dtype=complex),
    "phi_plus": np.array([_R, 0, 0, _R], dtype=complex),
}

#: Eigenvalues above this negative threshold count as zero in separability tests.
SEPARABILITY_TOL = 1e-10
_STATE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class NormalizedState:
    """Unit-trace pair density matrix.

    Attributes
    ----------
    rho_N : ndarray, shape (4, 4)
    t : float
    lam : float
    """

    rho_N: np.ndarray
    t: float
    lam: float


def normalize(rho: PairDensityMatrix | np.ndarray) -> NormalizedState:
    """Divide by the trace to compensate for decays.

    Raises
    ------
    DegenerateStateError
        If the trace is not positive.
    """
    if isinstance(rho, PairDensityMatrix):
        m, t, lam = rho.matrix, rho.time, rho.lam
    else:
        m, t, lam = np.asarray(rho, dtype=complex), math.nan, math.nan
    tr = float(np.trace(m).real)
    if not tr > 0 or not math.isfinite(tr):
        raise DegenerateStateError(f"cannot normalize a state with trace {tr}")
    return NormalizedState(m / tr, t, lam)


def model_state(t: float, lam: float, params: MesonParams | None = None) -> NormalizedState:
    """Normalized decohered singlet at time ``t``.

    The normalized state does not depend on the widths or the mass
    difference; ``params`` only has to be CP-invariant.
    """
    params = params if params is not None else make_params(DEFAULT_DELTA_M_TAU_S, DEFAULT_TAU_RATIO, 0.0)
    return normalize(evolve_pair(t, lam, params))


def bell_weights(t: float, lam: float) -> tuple[float, float]:
    """Weights of ``psi_minus`` and ``psi_plus`` in the model state."""
    c = math.exp(-lam * t)
    return 0.5 * (1 + c), 0.5 * (1 - c)


def _matrix(state) -> np.ndarray:
    m = state.rho_N if isinstance(state, NormalizedState) else np.asarray(state, dtype=complex)
    if m.shape != (4, 4):
        raise DomainError(f"expected a 4x4 density matrix, got shape {m.shape}")
    if not np.allclose(m, m.conj().T, atol=_STATE_TOL, rtol=0):
        raise DomainError("density matrix must be Hermitian")
    if abs(np.trace(m).real - 1) > _STATE_TOL:
        raise DomainError("density matrix must have unit trace")
    return 0.5 * (m + m.conj().T)


def binary_entropy(p):
    """``-p log2 p - (1-p) log2 (1-p)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("binary entropy needs p in [0, 1]")
    q = 1 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return float(h) if h.ndim == 0 else h


def _entropy_of(w: np.ndarray) -> float:
    w = np.clip(w.real, 0.0, None)
    w = w[w > 0]
    return float(max(0.0, -(w * np.log2(w)).sum()))


def von_neumann_entropy(state) -> float:
    """``-Tr rho log2 rho`` from the eigenvalues of any state."""
    return _entropy_of(np.linalg.eigvalsh(_matrix(state)))


def model_entropy(t: float, lam: float) -> float:
    """Entropy of the model state from its two Bell weights."""
    return binary_entropy(bell_weights(t, lam)[0])


def reduced_density(state, side: str) -> np.ndarray:
    """Partial trace over the opposite side; ``side`` is ``'left'`` or ``'right'``."""
    r = _matrix(state).reshape(2, 2, 2, 2)  # [l, r, l', r']
    if side == "left":
        return np.einsum("ijkj->ik", r)
    if side == "right":
        return np.einsum("ijil->jl", r)
    raise DomainError(f"side must be 'left' or 'right', got {side!r}")


@dataclass(frozen=True)
class SpectrumVerdict:
    """Ascending eigenvalues of a test matrix and the resulting verdict."""

    eigenvalues: tuple[float, ...]
    separable: bool


def _verdict(m: np.ndarray) -> SpectrumVerdict:
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return SpectrumVerdict(tuple(float(v) for v in w), bool(w[0] >= -SEPARABILITY_TOL))


def ppt_check(state) -> SpectrumVerdict:
    """Spectrum of the partial transpose on the right side."""
    r = _matrix(state).reshape(2, 2, 2, 2)
    return _verdict(r.transpose(0, 3, 2, 1).reshape(4, 4))


def reduction_check(state) -> SpectrumVerdict:
    """Spectrum of ``1 x rho_r - rho``.

    The verdict also requires ``rho_l x 1 - rho`` to be positive.
    """
    m = _matrix(state)
    right = np.kron(np.eye(2), reduced_density(m, "right")) - m
    left = np.kron(reduced_density(m, "left"), np.eye(2)) - m
    v = _verdict(right)
    return SpectrumVerdict(v.eigenvalues, v.separable and _verdict(left).separable)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # noise-level eigenvalues would otherwise leak sqrt(1e-17) ~ 3e-9 into C
    w = np.where(w > 1e-14 * max(w[-1], 1.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(state) -> float:
    """Wootters concurrence.

    The square roots of the eigenvalues of ``rho rho_tilde`` are obtained
    as singular values of ``sqrt(rho) sqrt(rho_tilde)``, which avoids
    taking square roots of rounding noise.
    """
    m = _matrix(state)
    idx = list(SPIN_FLIP_ORDER)
    m = m[np.ix_(idx, idx)]
    root = _psd_sqrt(m)
    root_tilde = _FLIP @ root.conj() @ _FLIP
    s = np.linalg.svd(root @ root_tilde, compute_uv=False)  # descending
    return float(min(1.0, max(0.0, s[0] - s[1:].sum())))


def fully_entangled_fraction(state, tol: float = 1e-10) -> float:
    """Largest Bell-state weight of a Bell-diagonal state.

    Raises
    ------
    UnsupportedInputError
        If the state has coherences between Bell states.
    """
    m = _matrix(state)
    b = np.column_stack(list(BELL_STATES.values()))
    in_bell = b.conj().T @ m @ b
    off = in_bell - np.diag(np.diag(in_bell))
    if np.abs(off).max() > tol:
        raise UnsupportedInputError("fully entangled fraction is implemented for Bell-diagonal states only")
    return float(np.diag(in_bell).real.max())


def eof_from_concurrence(c: float) -> float:
    """``H(1/2 + sqrt(1 - C**2)/2)``."""
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"concurrence must lie in [0, 1], got {c}")
    return binary_entropy(0.5 + 0.5 * math.sqrt(1.0 - c * c))


def entanglement_of_formation(state) -> float:
    """Entanglement of formation via the concurrence."""
    return eof_from_concurrence(concurrence(state))


@dataclass(frozen=True)
class LossReport:
    """Entanglement loss against decoherence at one time.

    Attributes
    ----------
    one_minus_C, one_minus_E, zeta : float
    linearized : float
        First-order prediction ``zeta / ln 2`` for ``1 - E``.
    """

    one_minus_C: float
    one_minus_E: float
    zeta: float
    linearized: float

    #: Coefficient of the leading correction, ``1 - E = zeta/ln2 - K zeta**2 + ...``.
    SERIES_K = 1 / (6 * math.log(2))

    def to_dict(self) -> dict:
        return asdict(self)


def loss_report(t: float, lam: float) -> LossReport:
    """``1 - C``, ``1 - E`` and ``zeta`` of the model state."""
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    st = model_state(t, lam)
    c = concurrence(st)
    zeta = zeta_of_lambda(t, t, lam)
    return LossReport(1.0 - c, 1.0 - eof_from_concurrence(c), zeta, zeta / math.log(2))


@dataclass(frozen=True)
class MeasureReport:
    """All entanglement measures of the model state at one time."""

    t: float
    lam: float
    entropy_S: float
    reduced_entropy_l: float
    reduced_entropy_r: float
    concurrence_C: float
    fef_f: float
    eof_E: float
    zeta: float

    def to_dict(self) -> dict:
        return asdict(self)


def measure_report(t: float, lam: float, params: MesonParams | None = None) -> MeasureReport:
    """Evaluate every measure on the normalized model state."""
    st = model_state(t, lam, params)
    c = concurrence(st)
    return MeasureReport(
        t=float(t),
        lam=float(lam),
        entropy_S=von_neumann_entropy(st),
        reduced_entropy_l=_entropy_of(np.linalg.eigvalsh(reduced_density(st, "left"))),
        reduced_entropy_r=_entropy_of(np.linalg.eigvalsh(reduced_density(st, "right"))),
        concurrence_C=c,
        fef_f=fully_entangled_fraction(st),
        eof_E=eof_from_concurrence(c),
        zeta=zeta_of_lambda(t, t, lam),
    )
