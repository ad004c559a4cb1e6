"""Entangled meson pairs: initial singlet, joint Yes/No probabilities, E(t_l; t_r).

Joint probabilities follow the factorized evolution
``U_l(t_l, 0) U_r(t_r, 0)``.  A single meson evolves as
``K_S -> exp(-i lambda_S t) K_S + Omega_S(t)`` and likewise for ``K_L``,
where the decay-product states ``Omega`` are orthogonal to every meson
state.  On each side the four vectors ``{K_S, K_L, Omega_S(t), Omega_L(t)}``
are represented by coordinates reproducing their Gram matrix, so
projector norms can be evaluated in an ordinary ``C^4``.  A "No" answer
is the complement ``Q = 1 - P`` and therefore includes the decay sector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidSpecError
from .meson import (
    Basis,
    MesonParams,
    QuasiSpinState,
    _check_time,
    _mass_phases,
    basis_matrix,
    kl_ks_overlap,
    named_state,
    omega_overlaps,
    to_basis,
)

__all__ = [
    "Side",
    "Outcome",
    "MeasurementSpec",
    "PairState",
    "initial_singlet",
    "side_gram",
    "joint_probability",
    "joint_probabilities",
    "expectation_from_probabilities",
    "expectation_general",
    "expectation_unitary",
    "expectation_approx",
    "expectation_bmeson",
    "KERNELS",
]

_GRAM_TOL = 1e-12


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Outcome(enum.Enum):
    YES = "yes"
    NO = "no"


@dataclass(frozen=True)
class MeasurementSpec:
    """What one detector asks and when.

    Attributes
    ----------
    side : Side
    quasi_spin : QuasiSpinState
        State projected on; must be normalized.
    time : float
        Detection time in ``tau_S``.
    outcome : Outcome
    """

    side: Side
    quasi_spin: QuasiSpinState
    time: float
    outcome: Outcome


@dataclass(frozen=True, eq=False)
class PairState:
    """Two-meson state ``sum_ij coef[i, j] |b_i>_l |b_j>_r`` at ``t = 0``.

    Attributes
    ----------
    basis : Basis
        Single-particle basis ``b`` on both sides.
    coef : ndarray, shape (2, 2)
        Coefficient matrix, left index first.
    params : MesonParams
    """

    basis: Basis
    coef: np.ndarray
    params: MesonParams

    def strangeness_coef(self) -> np.ndarray:
        b = basis_matrix(self.basis, self.params)
        return b @ self.coef @ b.T

    def in_basis(self, basis: Basis) -> PairState:
        """Same state, coefficients in another basis."""
        b_inv = np.linalg.inv(basis_matrix(basis, self.params))
        c = b_inv @ self.strangeness_coef() @ b_inv.T
        return PairState(basis, c, self.params)

    def swapped(self) -> PairState:
        """Exchange left and right."""
        return PairState(self.basis, self.coef.T.copy(), self.params)

    def amplitude(self, left: QuasiSpinState, right: QuasiSpinState) -> complex:
        """``(<left| x <right|) |psi>``."""
        a = left.strangeness(self.params)
        b = right.strangeness(self.params)
        return complex(a.conj() @ self.strangeness_coef() @ b.conj())


def initial_singlet(basis: Basis, params: MesonParams) -> PairState:
    """The antisymmetric pair ``(K0 K0bar - K0bar K0)/sqrt(2)`` in ``basis``.

    In the mass basis this reads ``N_SL (K_S K_L - K_L K_S)/sqrt(2)`` with
    ``N_SL = N**2 / (2 p q)``.
    """
    if basis is Basis.MASS:
        n_sl = params.norm_N**2 / (2 * params.p * params.q)
        coef = n_sl / math.sqrt(2) * np.array([[0, 1], [-1, 0]], dtype=complex)
        return PairState(Basis.MASS, coef, params)
    s = PairState(Basis.STRANGENESS, np.array([[0, 1], [-1, 0]], dtype=complex) / math.sqrt(2), params)
    return s if basis is Basis.STRANGENESS else s.in_basis(basis)


def side_gram(t: float, params: MesonParams) -> np.ndarray:
    """Gram matrix of ``(K_S, K_L, Omega_S(t), Omega_L(t))``."""
    d = kl_ks_overlap(params)
    om = omega_overlaps(t, params)
    g = np.zeros((4, 4), dtype=complex)
    g[0, 0] = g[1, 1] = 1.0
    g[1, 0] = d  # <K_L|K_S>
    g[0, 1] = d
    g[2, 2] = om.norm_SS
    g[3, 3] = om.norm_LL
    g[3, 2] = om.overlap_LS  # <Omega_L|Omega_S>
    g[2, 3] = np.conj(om.overlap_LS)
    return g


def _embedding(t: float, params: MesonParams) -> np.ndarray:
    """Matrix ``X`` with ``X^H X`` equal to the side Gram matrix."""
    w, v = np.linalg.eigh(side_gram(t, params))
    if w[0] < -_GRAM_TOL:
        raise InvalidParameterError(
            f"decay-product Gram matrix not positive (min eigenvalue {w[0]:.3e}); "
            "epsilon too large for these widths"
        )
    return np.sqrt(np.clip(w, 0.0, None))[:, None] * v.conj().T


def _evolved_tensor(t_l: float, t_r: float, params: MesonParams):
    """Embedded evolved state plus the per-side coordinate maps."""
    x_l = _embedding(t_l, params)
    x_r = _embedding(t_r, params)

    def propagate(t):
        e_s, e_l = _mass_phases(t, params)
        m = np.zeros((4, 2), dtype=complex)
        m[0, 0], m[1, 1] = e_s, e_l
        m[2, 0] = m[3, 1] = 1.0
        return m

    c = initial_singlet(Basis.MASS, params).coef
    psi = x_l @ propagate(t_l) @ c @ propagate(t_r).T @ x_r.T
    return psi, x_l, x_r


def _projector(state: QuasiSpinState, x: np.ndarray, params: MesonParams) -> np.ndarray:
    k = x[:, :2] @ np.asarray(to_basis(state, Basis.MASS, params).amp, dtype=complex)
    return np.outer(k, k.conj())


def _validate(spec: MeasurementSpec, side: Side, params: MesonParams) -> None:
    if spec.side is not side:
        raise InvalidSpecError(f"expected a {side.value} measurement, got {spec.side.value}")
    _check_time(spec.time)
    if not spec.quasi_spin.is_normalized(params):
        raise InvalidSpecError("quasi-spin state must be normalized")


def joint_probabilities(
    k_l: QuasiSpinState, t_l: float, k_r: QuasiSpinState, t_r: float, params: MesonParams
) -> dict[tuple[Outcome, Outcome], float]:
    """All four Yes/No probabilities for one pair of questions.

    Returns
    -------
    dict
        Keys ``(left outcome, right outcome)``.
    """
    for k in (k_l, k_r):
        if not k.is_normalized(params):
            raise InvalidSpecError("quasi-spin state must be normalized")
    _check_time([t_l, t_r])
    psi, x_l, x_r = _evolved_tensor(t_l, t_r, params)
    p_l = _projector(k_l, x_l, params)
    p_r = _projector(k_r, x_r, params)
    ops_l = {Outcome.YES: p_l, Outcome.NO: np.eye(4) - p_l}
    ops_r = {Outcome.YES: p_r, Outcome.NO: np.eye(4) - p_r}
    out = {}
    for ol, a in ops_l.items():
        for orr, b in ops_r.items():
            v = a @ psi @ b.T
            out[(ol, orr)] = float(np.vdot(v, v).real)
    return out


def joint_probability(spec_l: MeasurementSpec, spec_r: MeasurementSpec, params: MesonParams) -> float:
    """Probability that the left and right detectors answer as specified.

    Raises
    ------
    InvalidSpecError
        If a side is wrong or a quasi-spin state is not normalized.
    DomainError
        If a time is negative.
    InvalidParameterError
        If epsilon and the widths are incompatible with probability conservation.
    """
    _validate(spec_l, Side.LEFT, params)
    _validate(spec_r, Side.RIGHT, params)
    probs = joint_probabilities(spec_l.quasi_spin, spec_l.time, spec_r.quasi_spin, spec_r.time, params)
    return probs[(spec_l.outcome, spec_r.outcome)]


def expectation_from_probabilities(probs: dict) -> float:
    """``E = -1 + 2 (P_YY + P_NN)``."""
    return -1.0 + 2.0 * (probs[(Outcome.YES, Outcome.YES)] + probs[(Outcome.NO, Outcome.NO)])


def expectation_general(
    k_n: QuasiSpinState | str, t_a: float, k_m: QuasiSpinState | str, t_b: float, params: MesonParams
) -> float:
    """Correlation of two arbitrary quasi-spin questions at arbitrary times."""
    k_n = named_state(k_n) if isinstance(k_n, str) else k_n
    k_m = named_state(k_m) if isinstance(k_m, str) else k_m
    return expectation_from_probabilities(joint_probabilities(k_n, t_a, k_m, t_b, params))


def _times(t_l, t_r):
    t_l, t_r = np.broadcast_arrays(_check_time(t_l), _check_time(t_r))
    return t_l, t_r


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def _approx_kernel(t_l, t_r, params: MesonParams):
    return -np.cos(params.delta_m * (t_l - t_r)) * np.exp(-params.gamma_bar * (t_l + t_r))


def _unitary_kernel(t_l, t_r, params: MesonParams):
    gs, gl = params.gamma_S, params.gamma_L
    return (
        _approx_kernel(t_l, t_r, params)
        + 0.5 * np.expm1(-gl * t_l) * np.expm1(-gs * t_r)
        + 0.5 * np.expm1(-gs * t_l) * np.expm1(-gl * t_r)
    )


def _bmeson_kernel(t_l, t_r, params: MesonParams):
    g = params.gamma_bar
    return _approx_kernel(t_l, t_r, params) + np.expm1(-g * t_l) * np.expm1(-g * t_r)


def _require_equal_widths(params: MesonParams) -> None:
    if not math.isclose(params.gamma_L, params.gamma_S, rel_tol=1e-12, abs_tol=0.0):
        raise InvalidParameterError("B-meson model requires gamma_L == gamma_S")


#: Unchecked correlation kernels keyed by model name, for tight loops.
KERNELS = {"approx": _approx_kernel, "unitary": _unitary_kernel, "bmeson": _bmeson_kernel}


def expectation_approx(t_l, t_r, params: MesonParams):
    """Pure-meson strangeness correlation, decay products ignored.

    ``E = -cos(delta_m (t_l - t_r)) exp(-gamma_bar (t_l + t_r))``.
    """
    return _scalar(_approx_kernel(*_times(t_l, t_r), params))


def expectation_unitary(t_l, t_r, params: MesonParams):
    """Strangeness correlation including the decay-product contributions.

    CP violation is neglected here, whatever ``params.epsilon`` holds.
    """
    return _scalar(_unitary_kernel(*_times(t_l, t_r), params))


def expectation_bmeson(t_l, t_r, params: MesonParams):
    """Strangeness (flavour) correlation for equal widths.

    Raises
    ------
    InvalidParameterError
        If ``gamma_L != gamma_S``.
    """
    _require_equal_widths(params)
    return _scalar(_bmeson_kernel(*_times(t_l, t_r), params))
