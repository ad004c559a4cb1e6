"""Single neutral-meson physics: parameters, quasi-spin states, oscillation.

Units
-----
Rates are measured in units of the short-lived width, so ``gamma_S = 1``
whenever parameters are built with :func:`make_params`, and times are in
units of the short lifetime ``tau_S``.

Gauge
-----
Only the mass difference is observable, so the common mass is dropped:
``m_S = 0`` and ``m_L = delta_m``.  The complex eigenvalues of the
effective Hamiltonian are then ``lambda_S = -i gamma_S / 2`` and
``lambda_L = delta_m - i gamma_L / 2``.

Phase convention
----------------
``CP |K0> = -|K0bar>``, so ``K1 = (K0 - K0bar)/sqrt(2)`` is CP-even and
``K_S = (p K0 - q K0bar)/N``, ``K_L = (p K0 + q K0bar)/N``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError

__all__ = [
    "HBAR_MEV_S",
    "TAU_S_SECONDS",
    "DEFAULT_DELTA_M_TAU_S",
    "DEFAULT_TAU_RATIO",
    "DEFAULT_EPS_ABS",
    "DEFAULT_EPS_PHASE_DEG",
    "Basis",
    "MesonParams",
    "QuasiSpinState",
    "OmegaRecord",
    "make_params",
    "from_widths",
    "kaon_params",
    "epsilon_from_polar",
    "basis_matrix",
    "named_state",
    "to_basis",
    "eigen_rates",
    "g_pm",
    "oscillation_probability",
    "omega_overlaps",
    "kl_ks_overlap",
    "rate_to_mev",
    "mev_to_rate",
]

#: Reduced Planck constant in MeV s (CODATA).
HBAR_MEV_S = 6.582119569e-22
#: Short kaon lifetime in seconds.
TAU_S_SECONDS = 0.89e-10

DEFAULT_DELTA_M_TAU_S = 0.47
DEFAULT_TAU_RATIO = 581.0
DEFAULT_EPS_ABS = 2.23e-3
DEFAULT_EPS_PHASE_DEG = 45.0

_SYSTEM_LABELS = ("kaon", "B", "D", "Bs", "custom")


class Basis(enum.Enum):
    """Two-state bases of the quasi-spin space."""

    STRANGENESS = "strangeness"  # (K0, K0bar)
    MASS = "mass"  # (K_S, K_L)
    CP = "cp"  # (K1, K2)


@dataclass(frozen=True)
class MesonParams:
    """Physical constants of one neutral-meson system.

    Attributes
    ----------
    delta_m : float
        Mass difference ``m_L - m_S`` in units of ``gamma_S``.
    gamma_S, gamma_L : float
        Decay widths.
    gamma_bar : float
        Mean width ``(gamma_S + gamma_L) / 2``.
    x : float
        ``delta_m / gamma_bar``.
    epsilon : complex
        CP-violation parameter.
    p, q : complex
        Mixing weights ``1 + epsilon`` and ``1 - epsilon``.
    norm_N : float
        ``sqrt(|p|**2 + |q|**2)``.
    label : str
        System tag.

    Notes
    -----
    Build instances with :func:`make_params` or :func:`from_widths`, which
    fill in the derived fields consistently.
    """

    delta_m: float
    gamma_S: float
    gamma_L: float
    gamma_bar: float
    x: float
    epsilon: complex
    p: complex
    q: complex
    norm_N: float
    label: str = "kaon"

    @property
    def delta_gamma(self) -> float:
        """Width difference ``gamma_L - gamma_S``."""
        return self.gamma_L - self.gamma_S

    def to_dict(self) -> dict:
        """Plain-JSON view of the parameters."""
        return {
            "label": self.label,
            "delta_m": self.delta_m,
            "gamma_S": self.gamma_S,
            "gamma_L": self.gamma_L,
            "gamma_bar": self.gamma_bar,
            "x": self.x,
            "epsilon": [self.epsilon.real, self.epsilon.imag],
            "p": [self.p.real, self.p.imag],
            "q": [self.q.real, self.q.imag],
            "norm_N": self.norm_N,
        }


def from_widths(
    delta_m: float,
    gamma_S: float,
    gamma_L: float,
    epsilon: complex = 0.0,
    label: str = "custom",
) -> MesonParams:
    """Build parameters from explicit widths in an arbitrary rate unit.

    Parameters
    ----------
    delta_m : float
        Mass difference, same unit as the widths.
    gamma_S : float
        Short width, must be positive.
    gamma_L : float
        Long width, must be non-negative.
    epsilon : complex, optional
        CP-violation parameter.
    label : str, optional
        System tag.

    Raises
    ------
    InvalidParameterError
        If a width or the mass difference is out of range.
    """
    values = (delta_m, gamma_S, gamma_L, abs(epsilon))
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError("parameters must be finite")
    if delta_m < 0:
        raise InvalidParameterError(f"delta_m must be >= 0, got {delta_m}")
    if gamma_S <= 0:
        raise InvalidParameterError(f"gamma_S must be > 0, got {gamma_S}")
    if gamma_L < 0:
        raise InvalidParameterError(f"gamma_L must be >= 0, got {gamma_L}")
    if label not in _SYSTEM_LABELS:
        raise InvalidParameterError(f"unknown system label {label!r}; expected one of {_SYSTEM_LABELS}")
    eps = complex(epsilon)
    p, q = 1 + eps, 1 - eps
    if p == 0 or q == 0:
        raise InvalidParameterError("epsilon = +-1 makes the mass basis degenerate")
    gamma_bar = (gamma_S + gamma_L) / 2
    return MesonParams(
        delta_m=float(delta_m),
        gamma_S=float(gamma_S),
        gamma_L=float(gamma_L),
        gamma_bar=gamma_bar,
        x=delta_m / gamma_bar,
        epsilon=eps,
        p=p,
        q=q,
        norm_N=math.sqrt(abs(p) ** 2 + abs(q) ** 2),
        label=label,
    )


def make_params(
    delta_m_tau_S: float,
    tau_L_over_tau_S: float,
    epsilon: complex = 0.0,
    label: str = "kaon",
) -> MesonParams:
    """Build parameters in internal units (``gamma_S = 1``, time in ``tau_S``).

    Parameters
    ----------
    delta_m_tau_S : float
        Dimensionless product of mass difference and short lifetime.
    tau_L_over_tau_S : float
        Lifetime ratio, at least 1.  A ratio of 1 gives equal widths.
    epsilon : complex, optional
        CP-violation parameter.
    label : str, optional
        System tag.

    Raises
    ------
    InvalidParameterError
        On negative mass difference or a lifetime ratio below 1.

    Examples
    --------
    >>> round(make_params(0.77, 1.0, 0, label="B").x, 12)
    0.77
    """
    if not math.isfinite(tau_L_over_tau_S) or tau_L_over_tau_S < 1:
        raise InvalidParameterError(f"tau_L/tau_S must be >= 1, got {tau_L_over_tau_S}")
    return from_widths(delta_m_tau_S, 1.0, 1.0 / tau_L_over_tau_S, epsilon, label)


def epsilon_from_polar(magnitude: float, phase_deg: float) -> complex:
    """Complex epsilon from magnitude and phase in degrees."""
    if magnitude < 0:
        raise InvalidParameterError(f"|epsilon| must be >= 0, got {magnitude}")
    return cmath.rect(magnitude, math.radians(phase_deg))


def kaon_params(eps_abs: float = DEFAULT_EPS_ABS, eps_phase_deg: float = DEFAULT_EPS_PHASE_DEG) -> MesonParams:
    """Default neutral-kaon parameters."""
    return make_params(DEFAULT_DELTA_M_TAU_S, DEFAULT_TAU_RATIO, epsilon_from_polar(eps_abs, eps_phase_deg))


def basis_matrix(basis: Basis, params: MesonParams) -> np.ndarray:
    """Columns are the basis vectors in strangeness components."""
    if basis is Basis.STRANGENESS:
        return np.eye(2, dtype=complex)
    if basis is Basis.CP:
        return np.array([[1, 1], [-1, 1]], dtype=complex) / math.sqrt(2)
    p, q, n = params.p, params.q, params.norm_N
    return np.array([[p, p], [-q, q]], dtype=complex) / n


@dataclass(frozen=True)
class QuasiSpinState:
    """Two complex amplitudes in a declared basis.

    Normalization is defined through the strangeness components, since the
    mass basis is not orthogonal when CP is violated.
    """

    basis: Basis
    amp: tuple[complex, complex]

    def strangeness(self, params: MesonParams) -> np.ndarray:
        """Components along ``(K0, K0bar)``."""
        return basis_matrix(self.basis, params) @ np.asarray(self.amp, dtype=complex)

    def norm2(self, params: MesonParams) -> float:
        """Squared norm computed from strangeness components."""
        s = self.strangeness(params)
        return float(np.vdot(s, s).real)

    def is_normalized(self, params: MesonParams, tol: float = 1e-12) -> bool:
        return abs(self.norm2(params) - 1.0) <= tol


_NAMED = {
    "K0": (Basis.STRANGENESS, (1, 0)),
    "K0bar": (Basis.STRANGENESS, (0, 1)),
    "KS": (Basis.MASS, (1, 0)),
    "KL": (Basis.MASS, (0, 1)),
    "K1": (Basis.CP, (1, 0)),
    "K2": (Basis.CP, (0, 1)),
}


def named_state(name: str) -> QuasiSpinState:
    """One of ``K0, K0bar, KS, KL, K1, K2`` in its natural basis."""
    try:
        basis, amp = _NAMED[name]
    except KeyError:
        raise InvalidParameterError(f"unknown state {name!r}; expected one of {sorted(_NAMED)}") from None
    return QuasiSpinState(basis, (complex(amp[0]), complex(amp[1])))


def to_basis(state: QuasiSpinState, target: Basis, params: MesonParams) -> QuasiSpinState:
    """Re-express ``state`` in the ``target`` basis."""
    if state.basis is target:
        return state
    s = state.strangeness(params)
    a = np.linalg.solve(basis_matrix(target, params), s)
    return QuasiSpinState(target, (complex(a[0]), complex(a[1])))


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("times must be finite and >= 0")
    return t


def eigen_rates(params: MesonParams) -> tuple[complex, complex]:
    """Complex eigenvalues ``(lambda_S, lambda_L)`` in the ``m_S = 0`` gauge."""
    return complex(0.0, -params.gamma_S / 2), complex(params.delta_m, -params.gamma_L / 2)


def _mass_phases(t, params: MesonParams):
    """``exp(-i lambda_S t)`` and ``exp(-i lambda_L t)``."""
    t = _check_time(t)
    e_s = np.exp(-params.gamma_S * t / 2) + 0j
    e_l = np.exp(-1j * params.delta_m * t - params.gamma_L * t / 2)
    return e_s, e_l


def g_pm(t, params: MesonParams):
    """Evolution functions ``g_+`` and ``g_-``.

    ``K0(t) = g_+ K0 + (q/p) g_- K0bar`` and
    ``K0bar(t) = (p/q) g_- K0 + g_+ K0bar``.

    Parameters
    ----------
    t : float or array_like
        Proper time, non-negative.
    params : MesonParams

    Returns
    -------
    tuple
        ``(g_plus, g_minus)``; complex scalars or arrays matching ``t``.

    Raises
    ------
    DomainError
        If any time is negative.
    """
    e_s, e_l = _mass_phases(t, params)
    g_plus = 0.5 * (e_s + e_l)
    g_minus = 0.5 * (-e_s + e_l)
    if np.ndim(g_plus) == 0:
        return complex(g_plus), complex(g_minus)
    return g_plus, g_minus


def oscillation_probability(initial: str, final: str, t, params: MesonParams):
    """Probability to find ``final`` at time ``t`` in a beam prepared as ``initial``.

    Parameters
    ----------
    initial, final : {'K0', 'K0bar'}
    t : float or array_like
    params : MesonParams
    """
    for name in (initial, final):
        if name not in ("K0", "K0bar"):
            raise InvalidParameterError(f"strangeness state must be 'K0' or 'K0bar', got {name!r}")
    gp, gm = g_pm(t, params)
    if initial == final:
        amp = gp
    elif initial == "K0":
        amp = params.q / params.p * gm
    else:
        amp = params.p / params.q * gm
    prob = np.abs(amp) ** 2
    return float(prob) if np.ndim(prob) == 0 else prob


@dataclass(frozen=True)
class OmegaRecord:
    """Inner products of the decay-product states at one time.

    Attributes
    ----------
    norm_SS : float
        ``<Omega_S|Omega_S>``.
    norm_LL : float
        ``<Omega_L|Omega_L>``.
    overlap_LS : complex
        ``<Omega_L|Omega_S>``.
    """

    norm_SS: float
    norm_LL: float
    overlap_LS: complex


def kl_ks_overlap(params: MesonParams) -> float:
    """``<K_L|K_S> = 2 Re(eps) / (1 + |eps|**2)``."""
    eps = params.epsilon
    return 2 * eps.real / (1 + abs(eps) ** 2)


def omega_overlaps(t: float, params: MesonParams) -> OmegaRecord:
    """Decay-product inner products fixed by probability conservation.

    Raises
    ------
    DomainError
        If ``t`` is negative.
    """
    t = float(_check_time(t))
    delta = kl_ks_overlap(params)
    return OmegaRecord(
        norm_SS=-math.expm1(-params.gamma_S * t),
        norm_LL=-math.expm1(-params.gamma_L * t),
        overlap_LS=delta * (1 - cmath.exp(complex(-params.gamma_bar * t, params.delta_m * t))),
    )


def rate_to_mev(rate: float, tau_s: float = TAU_S_SECONDS) -> float:
    """Convert a rate in units of ``1/tau_s`` to MeV."""
    return rate * HBAR_MEV_S / tau_s


def mev_to_rate(energy_mev: float, tau_s: float = TAU_S_SECONDS) -> float:
    """Convert an energy in MeV to a rate in units of ``1/tau_s``."""
    return energy_mev * tau_s / HBAR_MEV_S
