"""Bell-type inequalities for spin-1/2 and meson pairs.

The meson CHSH combination is

    S = |E(t_a, t_b) - E(t_a, t_b')| + |E(t_a', t_b') + E(t_a', t_b)|

with strangeness measured on both sides and ``E`` one of the closed-form
correlation models of :mod:`kaonlab.pair`.

Maximizing over the four times uses a property of this combination:
``t_a`` appears only in the first term and ``t_a'`` only in the second.
For every pair ``(t_b, t_b')`` on a seed axis, the two inner maxima over
the axis are taken independently.  This covers the full 4-D seed grid
exactly with ``O(n**3)`` work.  The best seeds are then polished by a
bounded Nelder-Mead search.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import BracketError, DomainError
from .meson import (
    DEFAULT_TAU_RATIO,
    Basis,
    MesonParams,
    QuasiSpinState,
    from_widths,
    make_params,
    named_state,
)
from .pair import KERNELS, expectation_approx, expectation_bmeson, expectation_unitary, initial_singlet

__all__ = [
    "MODELS",
    "ChshTimes",
    "ScanResult",
    "OptimizerConfig",
    "WignerVerdict",
    "CpBoundsReport",
    "chsh_spin",
    "chsh_spin_directions",
    "wigner_spin",
    "params_for_x",
    "chsh_kaon",
    "maximize_chsh",
    "violation_boundary",
    "cp_like_state",
    "optimal_cp_phase",
    "wigner_kaon",
    "epsilon_wigner_condition",
    "cp_bounds",
    "DELTA_REFERENCE",
    "DELTA_REFERENCE_SIGMA",
]

#: Measured semileptonic charge asymmetry of the long-lived kaon.
DELTA_REFERENCE = 3.27e-3
DELTA_REFERENCE_SIGMA = 0.12e-3

_EXPECTATIONS: dict[str, Callable] = {
    "approx": expectation_approx,
    "unitary": expectation_unitary,
    "bmeson": expectation_bmeson,
}
MODELS = tuple(_EXPECTATIONS)


def chsh_spin(phi_nm, phi_nm2, phi_n2m2, phi_n2m):
    """CHSH value of the spin singlet from the four analyser angles.

    Parameters
    ----------
    phi_nm, phi_nm2, phi_n2m2, phi_n2m : float or array_like
        Angles in radians between ``(n, m)``, ``(n, m')``, ``(n', m')`` and
        ``(n', m)``.

    Returns
    -------
    float or ndarray
        ``|cos phi_nm - cos phi_nm'| + |cos phi_n'm' + cos phi_n'm|``.
    """
    s = np.abs(np.cos(phi_nm) - np.cos(phi_nm2)) + np.abs(np.cos(phi_n2m2) + np.cos(phi_n2m))
    return float(s) if np.ndim(s) == 0 else s


def chsh_spin_directions(n, n2, m, m2):
    """CHSH value for unit analyser directions (last axis = components)."""
    def angle(u, v):
        return np.arccos(np.clip(np.sum(np.asarray(u) * np.asarray(v), axis=-1), -1.0, 1.0))

    return chsh_spin(angle(n, m), angle(n, m2), angle(n2, m2), angle(n2, m))


@dataclass(frozen=True)
class WignerVerdict:
    """Outcome of a Wigner-type test ``lhs <= rhs``."""

    lhs: float
    rhs: float
    violated: bool

    def to_dict(self) -> dict:
        return asdict(self)


def wigner_spin(p_nm: float, p_nn2: float, p_n2m: float) -> WignerVerdict:
    """Check ``P(n; m) <= P(n; n') + P(n'; m)``."""
    for v in (p_nm, p_nn2, p_n2m):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"probabilities must lie in [0, 1], got {v}")
    lhs, rhs = float(p_nm), float(p_nn2 + p_n2m)
    return WignerVerdict(lhs, rhs, lhs > rhs + 1e-12)


@dataclass(frozen=True)
class ChshTimes:
    """Four detection times in ``tau_S``."""

    t_a: float
    t_b: float
    t_a2: float
    t_b2: float

    def __post_init__(self):
        for v in self.as_tuple():
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"CHSH times must be finite and >= 0, got {v}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.t_a, self.t_b, self.t_a2, self.t_b2)


@dataclass(frozen=True)
class ScanResult:
    """Best CHSH value found at one ``x``.

    Attributes
    ----------
    x : float
    s_max : float
        Largest value actually evaluated, hence a lower bound on the maximum.
    argmax : ChshTimes
    evaluations : int
        Correlation-function evaluations on the seed axis plus CHSH
        evaluations during refinement.
    """

    x: float
    s_max: float
    argmax: ChshTimes
    evaluations: int


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`maximize_chsh`.

    Attributes
    ----------
    t_max : float
        Upper time bound in ``tau_S``.
    n_uniform : int
        Uniformly spaced seed-axis points on ``[0, t_max]``.
    n_log : int
        Extra log-spaced seed-axis points on ``[log_min, log_max]``.  Some
        violating regions are thin slivers near ``t = 0``.
    n_refine : int
        Number of best seeds polished by Nelder-Mead.
    violation_tol : float
        ``S`` counts as a violation only above ``2 + violation_tol``.
    tau_ratio : float
        ``tau_L / tau_S`` used for the kaon-type models.
    """

    t_max: float = 8.0
    n_uniform: int = 97
    n_log: int = 40
    log_min: float = 1e-5
    log_max: float = 0.5
    n_refine: int = 16
    xatol: float = 1e-12
    fatol: float = 1e-16
    maxiter: int = 4000
    violation_tol: float = 1e-6
    tau_ratio: float = DEFAULT_TAU_RATIO

    def axis(self) -> np.ndarray:
        """Sorted seed axis shared by all four times."""
        parts = [np.linspace(0.0, self.t_max, self.n_uniform)]
        if self.n_log > 0:
            hi = min(self.log_max, self.t_max)
            parts.append(np.geomspace(self.log_min, hi, self.n_log))
        return np.unique(np.concatenate(parts))


def params_for_x(x: float, model: str, tau_ratio: float = DEFAULT_TAU_RATIO) -> MesonParams:
    """CP-conserving parameters realising a given ``x`` for ``model``.

    Kaon-type models keep the lifetime ratio and set
    ``delta_m = x * gamma_bar``; the B model uses equal widths.
    """
    _check_model(model)
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"x must be > 0, got {x}")
    if model == "bmeson":
        return from_widths(x, 1.0, 1.0, 0.0, label="B")
    gamma_bar = (1.0 + 1.0 / tau_ratio) / 2
    return make_params(x * gamma_bar, tau_ratio, 0.0)


def _check_model(model: str) -> None:
    if model not in _EXPECTATIONS:
        raise DomainError(f"unknown model {model!r}; expected one of {MODELS}")


def _chsh_from_e(e, t_a, t_b, t_a2, t_b2):
    return np.abs(e(t_a, t_b) - e(t_a, t_b2)) + np.abs(e(t_a2, t_b2) + e(t_a2, t_b))


def chsh_kaon(times: ChshTimes, model: str, params: MesonParams) -> float:
    """CHSH value of the strangeness correlation ``model`` at four times."""
    _check_model(model)
    fn = _EXPECTATIONS[model]

    def e(a, b):
        return fn(a, b, params)

    return float(_chsh_from_e(e, *times.as_tuple()))


def maximize_chsh(x: float, model: str, cfg: OptimizerConfig | None = None) -> ScanResult:
    """Largest CHSH value over detection times in ``[0, t_max]**4``.

    Parameters
    ----------
    x : float
        ``delta_m / gamma_bar``, positive.
    model : {'approx', 'unitary', 'bmeson'}
    cfg : OptimizerConfig, optional

    Returns
    -------
    ScanResult
        Deterministic for a fixed configuration.

    Raises
    ------
    DomainError
        If ``x <= 0`` or the model is unknown.
    """
    cfg = cfg or OptimizerConfig()
    params = params_for_x(x, model, cfg.tau_ratio)
    fn = KERNELS[model]

    def e(a, b):
        return fn(a, b, params)

    axis = cfg.axis()
    m = e(axis[:, None], axis[None, :])  # m[a, b]
    # first term over [a, b, b'], second over [a', b, b']
    f1 = np.abs(m[:, :, None] - m[:, None, :])
    f2 = np.abs(m[:, None, :] + m[:, :, None])
    i1 = f1.argmax(axis=0)
    i2 = f2.argmax(axis=0)
    grid = np.take_along_axis(f1, i1[None], 0)[0] + np.take_along_axis(f2, i2[None], 0)[0]
    del f1, f2

    flat = int(grid.argmax())
    ib, ib2 = np.unravel_index(flat, grid.shape)
    best = float(grid[ib, ib2])
    best_t = np.array([axis[i1[ib, ib2]], axis[ib], axis[i2[ib, ib2]], axis[ib2]])
    evaluations = axis.size**2

    def neg_s(t):
        a, b, a2, b2 = (float(v) for v in t)
        return -(abs(e(a, b) - e(a, b2)) + abs(e(a2, b2) + e(a2, b)))

    order = np.argsort(-grid, axis=None, kind="stable")[: cfg.n_refine]
    bounds = [(0.0, cfg.t_max)] * 4
    options = dict(xatol=cfg.xatol, fatol=cfg.fatol, maxiter=cfg.maxiter, adaptive=True)
    for o in order:
        jb, jb2 = np.unravel_index(int(o), grid.shape)
        t0 = np.array([axis[i1[jb, jb2]], axis[jb], axis[i2[jb, jb2]], axis[jb2]])
        res = minimize(neg_s, t0, method="Nelder-Mead", bounds=bounds, options=options)
        evaluations += int(res.nfev)
        t = np.clip(res.x, 0.0, cfg.t_max)
        val = -neg_s(t)
        if val > best:
            best, best_t = val, t
    return ScanResult(float(x), best, ChshTimes(*(float(v) for v in best_t)), int(evaluations))


def violation_boundary(
    model: str,
    x_lo: float,
    x_hi: float,
    tol: float = 1e-2,
    cfg: OptimizerConfig | None = None,
) -> float:
    """Smallest ``x`` at which the CHSH bound is exceeded, by bisection.

    Raises
    ------
    BracketError
        If ``x_lo`` already violates or ``x_hi`` does not.
    """
    cfg = cfg or OptimizerConfig()
    if not 0 < x_lo < x_hi:
        raise BracketError(f"need 0 < x_lo < x_hi, got ({x_lo}, {x_hi})")
    if tol <= 0:
        raise DomainError("tol must be positive")
    limit = 2.0 + cfg.violation_tol

    def violates(x):
        return maximize_chsh(x, model, cfg).s_max > limit

    if violates(x_lo):
        raise BracketError(f"S already exceeds 2 at x_lo = {x_lo}")
    if not violates(x_hi):
        raise BracketError(f"S does not exceed 2 at x_hi = {x_hi}")
    lo, hi = float(x_lo), float(x_hi)
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if violates(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def cp_like_state(phase: float = 0.0) -> QuasiSpinState:
    """``(K0 - exp(i phase) K0bar) / sqrt(2)``; ``phase = 0`` is ``K1``."""
    r = 1 / math.sqrt(2)
    return QuasiSpinState(Basis.STRANGENESS, (complex(r), -complex(math.cos(phase), math.sin(phase)) * r))


def optimal_cp_phase(params: MesonParams) -> float:
    """Phase of :func:`cp_like_state` that makes the Wigner test strongest."""
    return math.atan2(params.q.imag, params.q.real) - math.atan2(params.p.imag, params.p.real)


def wigner_kaon(params: MesonParams, cp_phase: float = 0.0) -> WignerVerdict:
    """Wigner-type test ``P(K_S, K0bar) <= P(K_S, k) + P(k, K0bar)`` at ``t = 0``.

    ``P(a, b)`` is the probability of finding ``a`` on the left and ``b``
    on the right in the initial singlet, and ``k`` is
    :func:`cp_like_state` with ``cp_phase`` (``K1`` by default).
    """
    psi = initial_singlet(Basis.STRANGENESS, params)
    ks, k0bar, k = named_state("KS"), named_state("K0bar"), cp_like_state(cp_phase)

    def prob(a, b):
        return abs(psi.amplitude(a, b)) ** 2

    lhs = prob(ks, k0bar)
    rhs = prob(ks, k) + prob(k, k0bar)
    return WignerVerdict(lhs, rhs, lhs > rhs + 1e-12)


def epsilon_wigner_condition(epsilon: complex) -> bool:
    """Whether ``Re(eps) <= |eps|**2`` holds, the epsilon form of the Wigner test."""
    return epsilon.real <= abs(epsilon) ** 2


@dataclass(frozen=True)
class CpBoundsReport:
    """CP-violation constraints implied by local realism.

    ``constraints`` maps each constraint name to whether the given epsilon
    satisfies it.
    """

    p: complex
    q: complex
    abs_p: float
    abs_q: float
    delta: float
    delta_reference: float
    delta_reference_sigma: float
    constraints: dict[str, bool] = field(default_factory=dict)
    wigner: WignerVerdict | None = None
    wigner_optimal: WignerVerdict | None = None

    @property
    def violated(self) -> list[str]:
        return [k for k, ok in self.constraints.items() if not ok]

    def to_dict(self) -> dict:
        return {
            "p": [self.p.real, self.p.imag],
            "q": [self.q.real, self.q.imag],
            "abs_p": self.abs_p,
            "abs_q": self.abs_q,
            "delta": self.delta,
            "delta_reference": self.delta_reference,
            "delta_reference_sigma": self.delta_reference_sigma,
            "constraints": dict(self.constraints),
            "violated": self.violated,
            "wigner_k1": self.wigner.to_dict() if self.wigner else None,
            "wigner_optimal_phase": self.wigner_optimal.to_dict() if self.wigner_optimal else None,
        }


def cp_bounds(params: MesonParams, tol: float = 1e-12) -> CpBoundsReport:
    """Compare ``|p|`` and ``|q|`` against the three local-realist constraints.

    The constraints are ``|p| <= |q|`` (``delta <= 0``), its mirror image
    ``|p| >= |q|`` obtained by exchanging ``K0`` and ``K0bar``, and their
    conjunction ``|p| = |q|``.
    """
    ap, aq = abs(params.p), abs(params.q)
    delta = (ap**2 - aq**2) / (ap**2 + aq**2)
    constraints = {
        "abs_p_le_abs_q": delta <= tol,
        "abs_p_ge_abs_q": delta >= -tol,
        "abs_p_eq_abs_q": abs(delta) <= tol,
    }
    return CpBoundsReport(
        p=params.p,
        q=params.q,
        abs_p=ap,
        abs_q=aq,
        delta=delta,
        delta_reference=DELTA_REFERENCE,
        delta_reference_sigma=DELTA_REFERENCE_SIGMA,
        constraints=constraints,
        wigner=wigner_kaon(params),
        wigner_optimal=wigner_kaon(params, optimal_cp_phase(params)),
    )
