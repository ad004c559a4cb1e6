"""Decoherence of single and entangled mesons and its fit to asymmetry data.

The master equation is

    d rho/dt = -i H rho + i rho H^+ - lambda (P_S rho P_L + P_L rho P_S)

with ``H`` the non-Hermitian effective Hamiltonian and ``P`` the
projectors on the mass eigenstates.  In the mass eigenbasis every
matrix element evolves independently: diagonals decay with their width
and off-diagonals acquire an extra ``exp(-lambda t)``.

The pair density matrix uses the product mass basis in tensor order,
``(K_S K_S, K_S K_L, K_L K_S, K_L K_L)``, so ``e1 = K_S K_L`` is index 1
and ``e2 = K_L K_S`` is index 2.

CP invariance (``epsilon = 0``) is assumed throughout this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DataFormatError, DomainError, InvalidParameterError
from .meson import MesonParams, _check_time, eigen_rates

__all__ = [
    "PairDensityMatrix",
    "AsymmetryDataset",
    "FitResult",
    "MODELS",
    "DEFAULT_DESIGN",
    "evolve_single",
    "evolve_pair",
    "prob_lambda",
    "asymmetry_qm",
    "asymmetry_lambda",
    "prob_zeta",
    "asymmetry_zeta",
    "zeta_of_lambda",
    "fit_decoherence",
    "combine_fits",
    "synth_dataset",
    "default_time_pairs",
    "LAMBDA_REFERENCE",
    "LAMBDA_REFERENCE_MEV",
]

#: Published decoherence fit in units of gamma_S, with its asymmetric errors.
LAMBDA_REFERENCE = (0.25, 0.34, 0.32)
#: The same fit expressed in MeV (central value, upper bound).
LAMBDA_REFERENCE_MEV = (1.84e-12, 4.34e-12)

MODELS = ("lambda", "zeta")
_MODEL_ALIASES = {"zeta_const": "zeta"}
_STRANGENESS = ("K0", "K0bar")


def _require_cp_invariant(params: MesonParams) -> None:
    if params.epsilon != 0:
        raise InvalidParameterError("the decoherence model assumes epsilon = 0")


def _check_rate(lam: float, name: str = "lambda") -> float:
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {lam}")
    return float(lam)


def _offdiag_mask(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def evolve_single(rho0, t: float, lam: float, params: MesonParams) -> np.ndarray:
    """Evolve a one-meson density matrix in the ``(K_S, K_L)`` basis.

    Parameters
    ----------
    rho0 : array_like, shape (2, 2)
    t : float
        Time in ``tau_S``.
    lam : float
        Decoherence rate in ``gamma_S``.
    params : MesonParams
        Must have ``epsilon == 0``.

    Returns
    -------
    ndarray, shape (2, 2)
    """
    _require_cp_invariant(params)
    lam = _check_rate(lam)
    t = float(_check_time(t))
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise DomainError("rho0 must be 2x2")
    eig = np.array(eigen_rates(params))
    return rho0 * _propagator(eig, t, lam)


def _propagator(eig: np.ndarray, t: float, lam: float) -> np.ndarray:
    """Element-wise factor ``exp(-i(L_j - conj(L_k)) t)``, off-diagonals damped."""
    phase = np.exp(-1j * (eig[:, None] - eig[None, :].conj()) * t)
    return phase * np.exp(-lam * t * _offdiag_mask(eig.size))


@dataclass(frozen=True, eq=False)
class PairDensityMatrix:
    """Two-meson density matrix in the product mass basis.

    Attributes
    ----------
    matrix : ndarray, shape (4, 4)
        Basis order ``(K_S K_S, e1, e2, K_L K_L)``; trace drops with decay.
    time : float
    lam : float
    """

    matrix: np.ndarray
    time: float
    lam: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


def _singlet_projector() -> np.ndarray:
    psi = np.array([0.0, 1.0, -1.0, 0.0]) / math.sqrt(2)
    return np.outer(psi, psi).astype(complex)


def evolve_pair(t: float, lam: float, params: MesonParams) -> PairDensityMatrix:
    """Evolve the singlet ``(e1 - e2)/sqrt(2)`` under the pair master equation.

    Each side's eigenvalues add, and every product-basis coherence is
    damped by ``exp(-lambda t)``.
    """
    _require_cp_invariant(params)
    lam = _check_rate(lam)
    t = float(_check_time(t))
    ls, ll = eigen_rates(params)
    eig = np.array([ls + ls, ls + ll, ll + ls, ll + ll])
    return PairDensityMatrix(_singlet_projector() * _propagator(eig, t, lam), t, lam)


def _strangeness_sign(s_l: str, s_r: str) -> float:
    for s in (s_l, s_r):
        if s not in _STRANGENESS:
            raise DomainError(f"strangeness must be one of {_STRANGENESS}, got {s!r}")
    return -1.0 if s_l == s_r else 1.0


def _interference(t_l, t_r, params: MesonParams):
    """``2 cos(delta_m dt) exp(-gamma_bar (t_l + t_r))`` and the incoherent sum."""
    gs, gl = params.gamma_S, params.gamma_L
    incoherent = np.exp(-gs * t_l - gl * t_r) + np.exp(-gl * t_l - gs * t_r)
    coherent = 2 * np.cos(params.delta_m * (t_l - t_r)) * np.exp(-params.gamma_bar * (t_l + t_r))
    return incoherent, coherent


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def zeta_of_lambda(t_l, t_r, lam):
    """``1 - exp(-lambda min(t_l, t_r))``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(lam) | (lam < 0)):
        raise DomainError("lambda must be finite and >= 0")
    t_first = np.minimum(_check_time(t_l), _check_time(t_r))
    return _scalar(-np.expm1(-lam * t_first))


def prob_zeta(s_l: str, t_l, s_r: str, t_r, zeta, params: MesonParams):
    """Joint strangeness probability with interference scaled by ``1 - zeta``.

    ``zeta = 0`` is quantum mechanics, ``zeta = 1`` removes interference.
    """
    _require_cp_invariant(params)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(~(zeta >= 0) | ~(zeta <= 1)):
        raise DomainError("zeta must lie in [0, 1]")
    sign = _strangeness_sign(s_l, s_r)
    incoherent, coherent = _interference(_check_time(t_l), _check_time(t_r), params)
    return _scalar((incoherent + sign * (1 - zeta) * coherent) / 8)


def prob_lambda(s_l: str, t_l, s_r: str, t_r, lam: float, params: MesonParams):
    """Joint strangeness probability in the decoherence model.

    The damping uses the earlier of the two detection times, so the
    sides may be given in either order.
    """
    lam = _check_rate(lam)
    return prob_zeta(s_l, t_l, s_r, t_r, zeta_of_lambda(t_l, t_r, lam), params)


def asymmetry_qm(t_l, t_r, params: MesonParams):
    """Unlike-minus-like over unlike-plus-like strangeness asymmetry.

    ``cos(delta_m dt) / cosh(delta_gamma dt / 2)`` with ``dt = t_l - t_r``.
    """
    dt = _check_time(t_l) - _check_time(t_r)
    return _scalar(np.cos(params.delta_m * dt) / np.cosh(0.5 * params.delta_gamma * dt))


def asymmetry_lambda(t_l, t_r, lam: float, params: MesonParams):
    """Decoherence-model asymmetry ``A_qm exp(-lambda min(t_l, t_r))``."""
    _require_cp_invariant(params)
    lam = _check_rate(lam)
    t_first = np.minimum(_check_time(t_l), _check_time(t_r))
    return _scalar(asymmetry_qm(t_l, t_r, params) * np.exp(-lam * t_first))


def asymmetry_zeta(t_l, t_r, zeta, params: MesonParams):
    """Phenomenological asymmetry ``A_qm (1 - zeta)``."""
    _require_cp_invariant(params)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(~(zeta >= 0) | ~(zeta <= 1)):
        raise DomainError("zeta must lie in [0, 1]")
    return _scalar(asymmetry_qm(t_l, t_r, params) * (1 - zeta))


@dataclass(frozen=True, eq=False)
class AsymmetryDataset:
    """Measured or synthetic asymmetries.

    Attributes
    ----------
    t_l, t_r, asym, sigma : ndarray
        One entry per row; ``sigma > 0`` and times ``>= 0``.
    source : str
        Free-form provenance label.
    """

    t_l: np.ndarray
    t_r: np.ndarray
    asym: np.ndarray
    sigma: np.ndarray
    source: str = ""

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.t_l, self.t_r, self.asym, self.sigma)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise DataFormatError("dataset columns must be 1-D and of equal length")
        for name, a in zip(("t_l", "t_r", "asym", "sigma"), arrays):
            if not np.all(np.isfinite(a)):
                raise DataFormatError(f"non-finite value in column {name}", column=name)
        if np.any(arrays[0] < 0) or np.any(arrays[1] < 0):
            raise DataFormatError("times must be >= 0")
        if np.any(arrays[3] <= 0):
            raise DataFormatError("sigma must be > 0", column="sigma")
        for name, a in zip(("t_l", "t_r", "asym", "sigma"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return int(self.t_l.size)


@dataclass(frozen=True)
class FitResult:
    """Best-fit decoherence parameter with its ``delta chi2 = 1`` interval.

    Attributes
    ----------
    model : {'lambda', 'zeta'}
    estimate : float
        ``lambda`` in ``gamma_S`` or the constant ``zeta``.
    ci_lo, ci_hi : float
    chi2 : float
    ndf : int
    at_boundary : bool
        True when the minimum sits on an edge of the scan range.
    ci_clipped : bool
        True when an interval edge hit the scan range instead of the
        ``delta chi2 = 1`` crossing.
    """

    model: str
    estimate: float
    ci_lo: float
    ci_hi: float
    chi2: float
    ndf: int
    at_boundary: bool = False
    ci_clipped: bool = False

    @property
    def lambda_hat(self) -> float:
        if self.model != "lambda":
            raise AttributeError("lambda_hat is only defined for the lambda model")
        return self.estimate

    @property
    def sigma(self) -> float:
        """Symmetrized one-sigma error."""
        return 0.5 * (self.ci_hi - self.ci_lo)

    def zeta_equivalent(self, t_l, t_r):
        """Effective ``zeta`` implied by the fit at the given times."""
        if self.model == "zeta":
            shape = np.broadcast(np.asarray(t_l), np.asarray(t_r)).shape
            return _scalar(np.full(shape, self.estimate))
        return zeta_of_lambda(t_l, t_r, self.estimate)

    def to_dict(self) -> dict:
        key = "lambda_hat" if self.model == "lambda" else "zeta_hat"
        return {
            "model": self.model,
            key: self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "chi2": self.chi2,
            "ndf": self.ndf,
            "at_boundary": self.at_boundary,
            "ci_clipped": self.ci_clipped,
        }


def fit_decoherence(
    data: AsymmetryDataset,
    model: str,
    params: MesonParams,
    scan_max: float | None = None,
    scan_steps: int = 200,
    xtol: float = 1e-6,
) -> FitResult:
    """Weighted least-squares fit of a one-parameter decoherence model.

    A coarse scan over ``[0, scan_max]`` brackets the minimum, which
    golden-section search then refines.  The interval is where
    ``chi2 <= chi2_min + 1``, clipped to the scan range.

    Parameters
    ----------
    data : AsymmetryDataset
        At least two rows.
    model : {'lambda', 'zeta'}
        ``lambda``: ``A_qm exp(-lambda t_first)``.
        ``zeta``: ``A_qm (1 - zeta)`` with a constant ``zeta``.
    params : MesonParams
    scan_max : float, optional
        Upper end of the scan; 5 for ``lambda`` and 1 for ``zeta``.
    scan_steps : int, optional
    xtol : float, optional
        Absolute tolerance of the golden-section refinement.
    """
    model = _MODEL_ALIASES.get(model, model)
    if model not in MODELS:
        raise DomainError(f"unknown fit model {model!r}; expected one of {MODELS}")
    if len(data) < 2:
        raise DataFormatError("a fit needs at least two data rows")
    _require_cp_invariant(params)
    hi = (5.0 if model == "lambda" else 1.0) if scan_max is None else float(scan_max)

    a_qm = np.asarray(asymmetry_qm(data.t_l, data.t_r, params))
    t_first = np.minimum(data.t_l, data.t_r)
    w = 1.0 / data.sigma

    if model == "lambda":
        def predict(theta):
            return a_qm * np.exp(-theta * t_first)
    else:
        def predict(theta):
            return a_qm * (1 - theta)

    def chi2(theta):
        r = (predict(theta) - data.asym) * w
        return float(r @ r)

    grid = np.linspace(0.0, hi, scan_steps + 1)
    values = np.array([chi2(g) for g in grid])
    i = int(values.argmin())
    at_boundary = i == 0 or i == grid.size - 1
    if at_boundary:
        lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(chi2, bounds=(lo_b, hi_b), method="bounded", options={"xatol": xtol})
        theta = float(res.x)
        if chi2(grid[i]) <= chi2(theta):
            theta = float(grid[i])
    else:
        res = minimize_scalar(chi2, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=xtol)
        theta = float(res.x)
    theta = min(max(theta, 0.0), hi)
    c_min = chi2(theta)
    target = c_min + 1.0

    def crossing(a, b):
        return float(brentq(lambda v: chi2(v) - target, a, b, xtol=1e-12))

    # zeta = 0 or lambda = 0 is a physical edge, not a clipped interval
    ci_lo = crossing(0.0, theta) if theta > 0 and chi2(0.0) > target else 0.0
    clipped = not (theta < hi and chi2(hi) > target)
    ci_hi = hi if clipped else crossing(theta, hi)
    return FitResult(
        model=model,
        estimate=theta,
        ci_lo=min(ci_lo, theta),
        ci_hi=max(ci_hi, theta),
        chi2=c_min,
        ndf=len(data) - 1,
        at_boundary=at_boundary,
        ci_clipped=clipped,
    )


def combine_fits(results: list[FitResult]) -> tuple[float, float]:
    """Inverse-variance weighted mean of several fits and its error.

    Each fit enters with its symmetrized interval half-width.
    """
    if not results:
        raise DomainError("nothing to combine")
    if len({r.model for r in results}) != 1:
        raise DomainError("cannot combine fits of different models")
    sig = np.array([r.sigma for r in results])
    if np.any(sig <= 0):
        raise DomainError("every fit needs a positive interval width")
    w = 1.0 / sig**2
    est = np.array([r.estimate for r in results])
    return float(w @ est / w.sum()), float(1.0 / math.sqrt(w.sum()))


def default_time_pairs() -> np.ndarray:
    """Twenty ``(t_l, t_r)`` pairs: ten first-decay times at two separations."""
    t_first = np.linspace(0.5, 4.0, 10)
    pairs = [(t, t + dt) for dt in (0.0, 1.2) for t in t_first]
    return np.array(pairs)


DEFAULT_DESIGN = default_time_pairs()


def synth_dataset(
    lambda_true: float,
    time_pairs,
    noise_sigma: float,
    seed: int,
    params: MesonParams,
    source: str | None = None,
) -> AsymmetryDataset:
    """Model asymmetries plus seeded Gaussian noise of fixed width.

    With ``noise_sigma = 0`` the values are exact and the ``sigma``
    column is set to 1 so the dataset stays fittable.
    """
    lam = _check_rate(lambda_true, "lambda_true")
    if not math.isfinite(noise_sigma) or noise_sigma < 0:
        raise DomainError(f"noise_sigma must be >= 0, got {noise_sigma}")
    pairs = np.asarray(time_pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise DomainError("time_pairs must have shape (n, 2)")
    t_l, t_r = pairs[:, 0], pairs[:, 1]
    exact = np.asarray(asymmetry_lambda(t_l, t_r, lam, params))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, size=exact.size) if noise_sigma > 0 else np.zeros(exact.size)
    sigma = np.full(exact.size, noise_sigma if noise_sigma > 0 else 1.0)
    label = source if source is not None else f"synthetic lambda={lam!r} noise={noise_sigma!r} seed={seed}"
    return AsymmetryDataset(t_l, t_r, exact + noise, sigma, label)
