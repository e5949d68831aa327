"""
Desingularization of steady point-vortex configurations into hollow vortices.

A :class:`Scenario` fixes the base configuration, the parameter split and the reflection
symmetries that reduce the unknowns. :func:`newton_solve` solves 𝓕(u; ρ) = 0 at a fixed
radius on the reduced coordinates, and :func:`continue_branch` follows the solution
curve in ρ until one of the blowup monitors fires.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from time import time
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from vortexforge import spectral
from vortexforge.diagnostics import DiagnosticsReport, GateTolerances, diagnose
from vortexforge.exceptions import (
    ConvergenceError,
    DomainError,
    InputError,
    InvariantViolation,
    NearSingularityError,
    PreconditionError,
)
from vortexforge.hollowvortex import HollowState, Residual, assemble_flow, hv_phi, phi_kind, residual
from vortexforge.pointvortex import (
    EXPECTED_CODIM,
    ParameterSplit,
    VortexConfiguration,
    classify_nondegeneracy,
    is_steady,
    slack_directions,
)
from vortexforge.spectral import DensityVector, SpectralDensity, SymmetryClass

logger = logging.getLogger(__name__)

#: Violations of the scenario symmetry up to this size are projected away
SYMMETRY_PROJECTION_LIMIT = 1e-8

#: Newton refuses Jacobians with a larger condition number
SINGULAR_CONDITION = 1e12

#: The continuation switches to pseudo-arclength above this condition number
ARCLENGTH_CONDITION = 1e8

#: Smallest step attempted by the continuation
MIN_STEP = 1e-8

#: Default truncation of the densities
DEFAULT_N = 32

_TWO_PI_I = 2j * np.pi

_REAL_CONSTANT_CLASSES = {SymmetryClass.RR, SymmetryClass.RI, SymmetryClass.RR_RI, SymmetryClass.NONE}

_TRANSFORMS = {
    "same": lambda d: d,
    "reflect": lambda d: d.reflect(),
    "neg_reflect": lambda d: -d.reflect(),
    "star": lambda d: d.star(),
}


class ScenarioKind(Enum):
    ROTATING_PAIR = "rotating_pair"
    STATIONARY_TRIPOLE = "stationary_tripole"
    TRANSLATING_PAIR = "translating_pair"
    GENERAL = "general"


@dataclass(frozen=True)
class VortexSymmetry:
    """Classes of the unknown densities and of the residual slots of one independent vortex"""

    mu: SymmetryClass
    nu: SymmetryClass
    kinematic: SymmetryClass
    bernoulli: SymmetryClass


@dataclass(frozen=True)
class Coupling:
    """Vortex determined by an independent one: μ_k = T_μ(μ_source), ν_k = T_ν(ν_source), Q_k = Q_source"""

    source: int
    mu: str
    nu: str


_SYMMETRIC_FREE = VortexSymmetry(SymmetryClass.RR, SymmetryClass.IR, SymmetryClass.IR, SymmetryClass.RR)
_FREE = VortexSymmetry(SymmetryClass.NONE, SymmetryClass.NONE, SymmetryClass.NONE, SymmetryClass.NONE)


def _require(condition: bool, message: str):
    if not condition:
        raise InputError(message)


def _close(a, b, scale: float) -> bool:
    return abs(a - b) <= 1e-12 * scale


def _split_for(cfg: VortexConfiguration, varying: list) -> ParameterSplit:
    split = ParameterSplit(varying, cfg.M)
    if cfg.split is not None and cfg.split != split:
        logger.debug("Replacing the split %s by the scenario split %s", cfg.split, split)
    return split


@dataclass(frozen=True, eq=False)
class Scenario:
    """Base configuration with its split and the symmetry reduction of the unknowns

    :param kind: Scenario kind.

    :param base: Steady configuration carrying the parameter split.

    :param free: Symmetry classes of the independent vortices, by vortex index.

    :param couplings: Vortices obtained from independent ones, by vortex index.
    """

    kind: ScenarioKind
    base: VortexConfiguration
    free: dict
    couplings: dict = field(default_factory=dict)

    @property
    def split(self) -> ParameterSplit:
        return self.base.split

    @property
    def M(self) -> int:
        return self.base.M

    @classmethod
    def rotating_pair(cls, cfg: VortexConfiguration) -> "Scenario":
        """Co-rotating equal pair on the real axis, ζ₂ = −ζ₁"""
        scale = cfg.scale()
        _require(cfg.M == 2, f"A rotating pair has 2 vortices, got {cfg.M}")
        g, z = cfg.circulations, cfg.centers
        _require(_close(g[0], g[1], scale), f"A rotating pair needs equal circulations, got {g.tolist()}")
        _require(
            _close(z[1], -z[0], scale) and _close(z[0].imag, 0.0, scale),
            f"A rotating pair needs centers ±a on the real axis, got {z.tolist()}",
        )
        _require(cfg.wave_speed == 0.0, f"A rotating pair has c = 0, got {cfg.wave_speed}")
        base = cfg.with_split(_split_for(cfg, ["omega"]))
        return cls(ScenarioKind.ROTATING_PAIR, base, {0: _SYMMETRIC_FREE}, {1: Coupling(0, "neg_reflect", "reflect")})

    @classmethod
    def stationary_tripole(cls, cfg: VortexConfiguration) -> "Scenario":
        """Collinear tripole a, 0, −a with equal outer circulations"""
        scale = cfg.scale()
        _require(cfg.M == 3, f"A tripole has 3 vortices, got {cfg.M}")
        g, z = cfg.circulations, cfg.centers
        _require(_close(g[0], g[2], scale), f"A tripole needs γ₁ = γ₃, got {g.tolist()}")
        _require(
            np.all(np.abs(z.imag) <= 1e-12 * scale) and _close(z[1], 0.0, scale) and _close(z[2], -z[0], scale),
            f"A tripole needs centers a, 0, −a on the real axis, got {z.tolist()}",
        )
        _require(
            cfg.wave_speed == 0.0 and cfg.angular_velocity == 0.0,
            f"A tripole is stationary, got c={cfg.wave_speed}, Ω={cfg.angular_velocity}",
        )
        base = cfg.with_split(_split_for(cfg, ["gamma2"]))
        center = VortexSymmetry(SymmetryClass.RR_II, SymmetryClass.IR_II, SymmetryClass.IR_II, SymmetryClass.RR_RI)
        return cls(
            ScenarioKind.STATIONARY_TRIPOLE,
            base,
            {0: _SYMMETRIC_FREE, 1: center},
            {2: Coupling(0, "neg_reflect", "reflect")},
        )

    @classmethod
    def translating_pair(cls, cfg: VortexConfiguration) -> "Scenario":
        """Counter-rotating pair ±ib translating along the real axis"""
        scale = cfg.scale()
        _require(cfg.M == 2, f"A translating pair has 2 vortices, got {cfg.M}")
        g, z = cfg.circulations, cfg.centers
        _require(_close(g[1], -g[0], scale), f"A translating pair needs γ₂ = −γ₁, got {g.tolist()}")
        _require(
            _close(z[1], np.conj(z[0]), scale) and _close(z[0].real, 0.0, scale),
            f"A translating pair needs centers ±ib, got {z.tolist()}",
        )
        _require(cfg.angular_velocity == 0.0, f"A translating pair has Ω = 0, got {cfg.angular_velocity}")
        base = cfg.with_split(_split_for(cfg, ["c"]))
        ii = SymmetryClass.II
        return cls(
            ScenarioKind.TRANSLATING_PAIR,
            base,
            {0: VortexSymmetry(ii, ii, ii, SymmetryClass.RI)},
            {1: Coupling(0, "star", "star")},
        )

    @classmethod
    def general(cls, cfg: VortexConfiguration) -> "Scenario":
        """No symmetry reduction; the split must be non-degenerate"""
        if cfg.split is None:
            raise InputError("A general scenario needs a configuration with a parameter split")
        steady = classify_nondegeneracy(cfg)
        if not steady.nondegenerate:
            raise PreconditionError(f"The split {cfg.split} is degenerate (codim {steady.codim}, rank {steady.rank})")
        return cls(ScenarioKind.GENERAL, cfg, {k: _FREE for k in range(cfg.M)})

    @classmethod
    def build(cls, kind, cfg: VortexConfiguration) -> "Scenario":
        kind = ScenarioKind(kind) if not isinstance(kind, ScenarioKind) else kind
        return {
            ScenarioKind.ROTATING_PAIR: cls.rotating_pair,
            ScenarioKind.STATIONARY_TRIPOLE: cls.stationary_tripole,
            ScenarioKind.TRANSLATING_PAIR: cls.translating_pair,
            ScenarioKind.GENERAL: cls.general,
        }[kind](cfg)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "config": self.base.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            kind = ScenarioKind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"Unknown scenario kind in {data!r}") from exc
        if "config" not in data:
            raise InputError("Scenario object needs a 'config'")
        return cls.build(kind, VortexConfiguration.from_dict(data["config"]))

    def __repr__(self):
        return f"Scenario(kind={self.kind.value}, base={self.base})"


@dataclass(frozen=True)
class NewtonSettings:
    residual_tol: float = 1e-11
    max_iter: int = 25
    fd_step: float = 1e-7
    backtracking: int = 20

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise InputError(f"Newton setting {name} must be positive, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "NewtonSettings":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"Unknown Newton settings {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ContinuationThresholds:
    """Limits of the monitors; the blowup factors are relative to the first accepted point"""

    conformal_factor: float = 1e3
    velocity_factor: float = 1e3
    parameter_bound: float = 1e6
    angular_momentum_bound: float = 1e6

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ContinuationThresholds":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"Unknown thresholds {sorted(unknown)}")
        return cls(**data)


class TerminationReason(Enum):
    """Why a branch run stopped

    The first four are the monitored blowups of the branch. ``STEP_FAILURE`` marks a step
    that kept failing or a branch that came back through ρ = 0. ``MAX_STEPS`` and
    ``RHO_LIMIT`` are budget stops: the run reached its point count or its radius
    ``rho_max`` and says nothing about how the branch ends.
    """

    CONFORMAL_DEGENERACY = "conformal_degeneracy"
    VELOCITY_DEGENERACY = "velocity_degeneracy"
    PARAMETER_BLOWUP = "parameter_blowup"
    ANGULAR_MOMENTUM_BLOWUP = "angular_momentum_blowup"
    STEP_FAILURE = "step_failure"
    MAX_STEPS = "max_steps"
    RHO_LIMIT = "rho_limit"


@dataclass(frozen=True, eq=False)
class BranchPoint:
    """Accepted solution on a branch with the step-control state needed to resume after it"""

    state: HollowState
    diagnostics: DiagnosticsReport
    arclength: float
    accepted: bool = True
    step: float = 0.0
    streak: int = 0
    arclength_mode: bool = False

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
            "arclength": self.arclength,
            "accepted": self.accepted,
            "step": self.step,
            "streak": self.streak,
            "arclength_mode": self.arclength_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BranchPoint":
        try:
            return cls(
                HollowState.from_dict(data["state"]),
                DiagnosticsReport.from_dict(data["diagnostics"]),
                float(data["arclength"]),
                bool(data.get("accepted", True)),
                float(data.get("step", 0.0)),
                int(data.get("streak", 0)),
                bool(data.get("arclength_mode", False)),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"Malformed branch point: {exc}") from exc


@dataclass
class BranchResult:
    points: list
    reason: TerminationReason
    fired: list = field(default_factory=list)
    note: str = ""


@dataclass
class NewtonResult:
    x: NDArray[np.float64]
    trace: list
    condition: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def strain_coefficients(cfg: VortexConfiguration) -> NDArray[np.complex128]:
    """S_k = −½ Σ_{j≠k} (γ_j/2πi)/(ζ_j − ζ_k)², the strain felt by every vortex"""
    gammas, centers = cfg.circulations, cfg.centers
    strain = np.zeros(cfg.M, dtype=complex)
    for k in range(cfg.M):
        for j in range(cfg.M):
            if j != k:
                strain[k] -= 0.5 * gammas[j] / (_TWO_PI_I * (centers[j] - centers[k]) ** 2)
    return strain


def leading_guess(scenario: Scenario, rho: float, N: int = DEFAULT_N, n_nodes: int = 0) -> HollowState:
    """First-order hollow vortex at radius ρ

    μ_k = (16π/γ_k)ρRe(iS_kτ), ν_k = −2ρRe(S_kτ²), Q_k = −γ_kΩρ/π and λ = λ₀.

    :param scenario: Scenario with a steady base configuration.

    :param rho: Radius.

    :param N: Truncation, at least 2.

    :param n_nodes: Quadrature size, ``4N`` by default.

    :return: The guess, with an O(ρ²) residual.
    """
    cfg = scenario.base
    if not is_steady(cfg):
        raise PreconditionError("The leading-order guess needs a steady base configuration")
    if N < 2:
        raise InputError(f"The leading-order guess needs N ≥ 2, got {N}")
    strain = strain_coefficients(cfg)
    gammas = cfg.circulations
    mu = np.zeros((cfg.M, N), dtype=complex)
    nu = np.zeros((cfg.M, N), dtype=complex)
    mu[:, 0] = 8.0j * np.pi * rho * strain / gammas
    nu[:, 1] = -rho * strain
    Q = -gammas * cfg.angular_velocity * rho / np.pi
    return HollowState(DensityVector(mu), DensityVector(nu), Q, cfg.varying_values(), rho, cfg, n_nodes)


def far_field_coeffs(u: HollowState) -> NDArray[np.complex128]:
    """Per vortex, coefficients of (ζ−ζ_k)^{-1} in f − ζ and of (ζ−ζ_k)^{-3} in w_ζ − w⁰_ζ, shape ``(M, 2)``"""
    fields = assemble_flow(u)
    return np.array([fields.far_field(k) for k in range(u.M)], dtype=complex)


def far_field_prediction(cfg: VortexConfiguration, rho: float) -> NDArray[np.complex128]:
    """Leading terms 8πiρ⁴conj(S_k)/γ_k and −2ρ⁴conj(S_k) of :func:`far_field_coeffs`"""
    strain = np.conj(strain_coefficients(cfg))
    return np.column_stack([8.0j * np.pi * rho**4 * strain / cfg.circulations, -2.0 * rho**4 * strain])


def _thread_count() -> int:
    value = os.environ.get("VORTEXFORGE_THREADS", "1")
    try:
        threads = int(value)
    except ValueError as exc:
        raise InputError(f"VORTEXFORGE_THREADS must be a positive integer, got {value!r}") from exc
    if threads < 1:
        raise InputError(f"VORTEXFORGE_THREADS must be a positive integer, got {threads}")
    return threads


def fd_jacobian(func: Callable, x: NDArray, f0: NDArray, fd_step: float) -> NDArray[np.float64]:
    """Forward-difference Jacobian with steps fd_step·(1+|x_i|), columns evaluated in a thread pool"""
    steps = fd_step * (1.0 + np.abs(x))

    def column(i):
        shifted = x.copy()
        shifted[i] += steps[i]
        return (func(shifted) - f0) / steps[i]

    threads = _thread_count()
    if threads == 1:
        columns = [column(i) for i in range(x.size)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            columns = list(pool.map(column, range(x.size)))
    return np.column_stack(columns)


def _newton(func: Callable, x0: NDArray, settings: NewtonSettings, label: str) -> NewtonResult:
    start = time()
    x = np.array(x0, dtype=float)
    f = func(x)
    trace = [float(np.max(np.abs(f)))]
    condition = float("nan")
    for iteration in range(settings.max_iter + 1):
        if trace[-1] < settings.residual_tol:
            break
        if iteration == settings.max_iter:
            raise ConvergenceError(
                f"{label}: Newton did not converge in {settings.max_iter} iterations", trace[-1], trace
            )
        jacobian = fd_jacobian(func, x, f, settings.fd_step)
        condition = float(np.linalg.cond(jacobian))
        if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
            raise NearSingularityError(f"{label}: Jacobian condition number {condition:.3e} exceeds {SINGULAR_CONDITION:.0e}")
        step = linalg.solve(jacobian, -f)
        factor = 1.0
        domain_failure = None
        for _ in range(settings.backtracking + 1):
            trial_x = x + factor * step
            try:
                trial = func(trial_x)
            except DomainError as exc:
                domain_failure = exc
                factor /= 2.0
                continue
            if np.max(np.abs(trial)) < trace[-1]:
                break
            factor /= 2.0
        else:
            if domain_failure is not None:
                raise DomainError(f"{label}: line search left the admissible set ({domain_failure})") from domain_failure
            raise ConvergenceError(f"{label}: line search failed", trace[-1], trace)
        x, f = trial_x, trial
        trace.append(float(np.max(np.abs(f))))
        logger.debug("%s: iteration %d, residual %.3e, step factor %g", label, iteration + 1, trace[-1], factor)
    logger.info(
        "%s: converged in %d iterations (residual %.2e) in %.3f s", label, len(trace) - 1, trace[-1], time() - start
    )
    return NewtonResult(x, trace, condition)


class _ReducedSystem:
    """Real coordinates of the symmetry-reduced unknowns and residual of a scenario

    Unknowns are, per independent vortex, the class coordinates of μ_k and ν_k, then
    the independent Q_k, then λ, then (general scenario only) the slack variables.
    The residual keeps, per independent vortex, the class coordinates of 𝓐_k (modes
    1..N), the mean of 𝓑_k when its class admits a real constant, and the class
    coordinates of 𝓑_k (modes 1..N+1).
    """

    def __init__(self, scenario: Scenario, reference: HollowState):
        self._scenario = scenario
        self._base = scenario.base
        self._N = reference.N
        self._n_nodes = reference.n_nodes
        modes = np.arange(1, self._N + 1)
        bernoulli_modes = np.arange(1, self._N + 2)
        self._free = sorted(scenario.free)
        self._unknown_bases = []
        self._residual_bases = []
        for k in self._free:
            sym = scenario.free[k]
            self._unknown_bases.append(
                (spectral.class_basis(sym.mu, modes), spectral.class_basis(sym.nu, modes))
            )
            self._residual_bases.append(
                (
                    spectral.class_basis(sym.kinematic, modes),
                    sym.bernoulli in _REAL_CONSTANT_CLASSES,
                    spectral.class_basis(sym.bernoulli, bernoulli_modes),
                )
            )
        self._n_state = sum(bm.shape[1] + bn.shape[1] for bm, bn in self._unknown_bases)
        self._n_state += len(self._free) + len(scenario.split)
        self._slack = np.zeros((self.residual_size, 0))
        if scenario.kind is ScenarioKind.GENERAL:
            self._slack = self._slack_basis(reference)
        if self._n_state + self._slack.shape[1] != self.residual_size:
            raise PreconditionError(
                f"Reduced system is not square: {self._n_state + self._slack.shape[1]} unknowns, "
                f"{self.residual_size} equations"
            )

    @property
    def N(self) -> int:
        return self._N

    @property
    def n_slack(self) -> int:
        return self._slack.shape[1]

    @property
    def residual_size(self) -> int:
        size = 0
        for basis_a, constant, basis_b in self._residual_bases:
            size += basis_a.shape[1] + int(constant) + basis_b.shape[1]
        return size

    def _slack_basis(self, reference: HollowState) -> NDArray[np.float64]:
        """Mode-1 Bernoulli coordinates best conditioned for the identity functional"""
        kind = phi_kind(reference)
        n_nodes = reference.n_nodes
        tau = spectral.unit_nodes(n_nodes)
        M = self._base.M
        block = 4 * self._N + 3
        zeros = np.zeros((M, n_nodes))
        columns, positions = [], []
        for k in range(M):
            for offset, direction in ((0, 1.0), (self._N + 1, 1j)):
                B = zeros.copy()
                B[k] = 2.0 * np.real(direction * tau)
                value = hv_phi(kind, zeros, B, reference)
                if isinstance(value, tuple):
                    value = [value[0].real, value[0].imag, value[1]]
                columns.append(np.atleast_1d(value))
                positions.append(k * block + 2 * self._N + 1 + offset)
        functional = np.column_stack(columns)
        codim = EXPECTED_CODIM[{"t": "translating", "r": "rotating", "s": "stationary"}[kind]]
        picked = slack_directions(functional)[:codim]
        basis = np.zeros((self.residual_size, picked.size))
        basis[np.array(positions)[picked], np.arange(picked.size)] = 1.0
        return basis

    def unknowns(self, u: HollowState) -> NDArray[np.float64]:
        """Class coordinates of a state (an orthogonal projection onto the scenario classes)"""
        parts = []
        for k, (basis_mu, basis_nu) in zip(self._free, self._unknown_bases):
            parts.append(np.real(np.conj(basis_mu).T @ u.mu.coeffs[k]))
            parts.append(np.real(np.conj(basis_nu).T @ u.nu.coeffs[k]))
        parts.append(u.Q[self._free])
        parts.append(u.lam)
        parts.append(np.zeros(self.n_slack))
        return np.concatenate(parts)

    def state(self, x: NDArray, rho: float) -> HollowState:
        M, N = self._base.M, self._N
        mu = np.zeros((M, N), dtype=complex)
        nu = np.zeros((M, N), dtype=complex)
        Q = np.zeros(M)
        position = 0
        for k, (basis_mu, basis_nu) in zip(self._free, self._unknown_bases):
            mu[k] = basis_mu @ x[position : position + basis_mu.shape[1]]
            position += basis_mu.shape[1]
            nu[k] = basis_nu @ x[position : position + basis_nu.shape[1]]
            position += basis_nu.shape[1]
        Q[self._free] = x[position : position + len(self._free)]
        position += len(self._free)
        lam = x[position : position + len(self._scenario.split)]
        for k, coupling in self._scenario.couplings.items():
            mu[k] = _TRANSFORMS[coupling.mu](SpectralDensity(mu[coupling.source])).coeffs
            nu[k] = _TRANSFORMS[coupling.nu](SpectralDensity(nu[coupling.source])).coeffs
            Q[k] = Q[coupling.source]
        return HollowState(DensityVector(mu), DensityVector(nu), Q, lam, rho, self._base, self._n_nodes)

    def slack(self, x: NDArray) -> NDArray[np.float64]:
        return x[self._n_state :]

    def residual_vector(self, res: Residual) -> NDArray[np.float64]:
        A = res.kinematic_coeffs(self._N)
        B = res.bernoulli_coeffs(self._N)
        parts = []
        for k, (basis_a, constant, basis_b) in zip(self._free, self._residual_bases):
            parts.append(np.real(np.conj(basis_a).T @ A[k]))
            if constant:
                parts.append(B[k, :1].real)
            parts.append(np.real(np.conj(basis_b).T @ B[k, 1:]))
        return np.concatenate(parts)

    def __call__(self, x: NDArray, rho: float) -> NDArray[np.float64]:
        vector = self.residual_vector(residual(self.state(x, rho)))
        return vector - self._slack @ self.slack(x)

    def violation(self, u: HollowState) -> float:
        """Distance of a state to the scenario classes and couplings"""
        projected = self.state(self.unknowns(u), u.rho)
        return float(
            max(
                np.max(np.abs(projected.mu.coeffs - u.mu.coeffs), initial=0.0),
                np.max(np.abs(projected.nu.coeffs - u.nu.coeffs), initial=0.0),
                np.max(np.abs(projected.Q - u.Q), initial=0.0),
            )
        )

    def check_slack(self, x: NDArray, tol: float):
        slack = self.slack(x)
        if slack.size and np.max(np.abs(slack)) >= tol:
            raise ConvergenceError(f"Slack variables did not vanish: {slack.tolist()}", float(np.max(np.abs(slack))))


def _solve(system: _ReducedSystem, u_init: HollowState, settings: NewtonSettings, label: str):
    violation = system.violation(u_init)
    if violation > SYMMETRY_PROJECTION_LIMIT:
        raise PreconditionError(f"Initial state violates the scenario symmetry by {violation:.3e}")
    x0 = system.unknowns(u_init)
    rho = u_init.rho
    result = _newton(lambda x: system(x, rho), x0, settings, label)
    system.check_slack(result.x, settings.residual_tol)
    if violation == 0.0 and result.iterations == 0:
        return u_init, result
    return system.state(result.x, rho), result


def newton_solve(
    u_init: HollowState, scenario: Scenario, settings: NewtonSettings | None = None, full_output: bool = False
):
    """Solves 𝓕(u; ρ) = 0 at the radius of ``u_init`` on the scenario's reduced coordinates

    Symmetric scenarios solve square systems on their classes. The general scenario
    adds one slack variable per identity in mode-1 Bernoulli coordinates; the identities
    force the slack to vanish at a solution.

    :param u_init: Initial state, within ``SYMMETRY_PROJECTION_LIMIT`` of the scenario classes.

    :param scenario: Scenario.

    :param settings: Newton settings.

    :param full_output: Also return the :class:`NewtonResult` with the residual trace.

    :return: The converged state; ``u_init`` itself if it already solves the system. With
        ``full_output`` a ``(state, NewtonResult)`` pair.
    """
    settings = settings or NewtonSettings()
    if u_init.M != scenario.M or u_init.split != scenario.split:
        raise InputError(f"State {u_init} does not belong to {scenario}")
    system = _ReducedSystem(scenario, u_init)
    u, result = _solve(system, u_init, settings, f"{scenario.kind.value} at ρ={u_init.rho:.6g}")
    return (u, result) if full_output else u


class _Rejected(Exception):
    pass


def _monitors(report: DiagnosticsReport, reference: DiagnosticsReport, u: HollowState, thresholds) -> list:
    fired = []
    if report.n_conf > thresholds.conformal_factor * reference.n_conf:
        fired.append(TerminationReason.CONFORMAL_DEGENERACY)
    if report.n_vel > thresholds.velocity_factor * reference.n_vel:
        fired.append(TerminationReason.VELOCITY_DEGENERACY)
    if np.max(np.abs(u.lam), initial=0.0) > thresholds.parameter_bound:
        fired.append(TerminationReason.PARAMETER_BLOWUP)
    if report.excess_L is not None and abs(report.excess_L) > thresholds.angular_momentum_bound:
        fired.append(TerminationReason.ANGULAR_MOMENTUM_BLOWUP)
    return fired


def continue_branch(
    scenario: Scenario,
    rho_start: float,
    rho_max: float,
    step: float = 0.01,
    max_steps: int = 50,
    N: int = DEFAULT_N,
    n_nodes: int = 0,
    settings: NewtonSettings | None = None,
    thresholds: ContinuationThresholds | None = None,
    tolerances: GateTolerances | None = None,
    history: list | None = None,
    on_point: Callable | None = None,
) -> BranchResult:
    """Follows the solution branch of a scenario in ρ

    Steps are predicted by secant extrapolation of (unknowns, ρ) and corrected by Newton
    at fixed ρ; when the Jacobian condition number exceeds ``ARCLENGTH_CONDITION`` the
    corrector switches to pseudo-arclength. Failed steps are halved, three consecutive
    successes double the step, which is capped at 0.1·(min gap − 2ρ).

    :param scenario: Scenario to follow.

    :param rho_start: Radius of the first point.

    :param rho_max: Radius at which the run stops.

    :param step: Initial step in ρ.

    :param max_steps: Maximum number of accepted points, the first one included.

    :param N: Truncation.

    :param n_nodes: Quadrature size, ``4N`` by default.

    :param history: Accepted points of an earlier run to resume from.

    :param on_point: Called with every new accepted :class:`BranchPoint`.

    :return: The :class:`BranchResult` with all accepted points and the termination reason.
    """
    if not 0.0 < rho_start < rho_max:
        raise InputError(f"Expected 0 < rho_start < rho_max, got {rho_start}, {rho_max}")
    settings = settings or NewtonSettings()
    thresholds = thresholds or ContinuationThresholds()
    tolerances = tolerances or GateTolerances()
    track_L = scenario.kind is ScenarioKind.ROTATING_PAIR
    points = list(history or [])
    if points:
        rho_start = points[0].state.rho
        N, n_nodes = points[0].state.N, points[0].state.n_nodes
    reference_guess = leading_guess(scenario, rho_start, N, n_nodes)
    system = _ReducedSystem(scenario, reference_guess)

    def emit(point):
        points.append(point)
        if on_point is not None:
            on_point(point)

    if points:
        logger.info("Resuming %s branch after %d points at ρ=%.6g", scenario.kind.value, len(points), points[-1].state.rho)
    else:
        u0, _ = _solve(system, reference_guess, settings, f"{scenario.kind.value} start at ρ={rho_start:.6g}")
        report = diagnose(u0, compute_L=track_L)
        failures = report.gate_failures(tolerances)
        if failures:
            raise InvariantViolation(f"The starting point at ρ={rho_start} fails the gates {failures}")
        emit(BranchPoint(u0, report, 0.0, True, step, 0, False))

    reference = points[0].diagnostics
    step, streak, arclength_mode = points[-1].step, points[-1].streak, points[-1].arclength_mode

    def composite(u):
        return np.concatenate([system.unknowns(u), [u.rho]])

    def predict(delta):
        last = points[-1].state
        y_last = composite(last)
        if len(points) == 1:
            offset = system.unknowns(last) - system.unknowns(leading_guess(scenario, last.rho, N, n_nodes))
            ahead = leading_guess(scenario, last.rho + delta, N, n_nodes)
            return np.concatenate([system.unknowns(ahead) + offset, [last.rho + delta]]), None
        secant = y_last - composite(points[-2].state)
        if arclength_mode:
            tangent = secant / np.linalg.norm(secant)
            return y_last + delta * tangent, tangent
        y_pred = y_last + secant * (delta / secant[-1])
        y_pred[-1] = last.rho + delta
        return y_pred, None

    def correct(y_pred, tangent, label):
        if tangent is None:
            rho = y_pred[-1]
            result = _newton(lambda x: system(x, rho), y_pred[:-1], settings, label)
            y_new = np.concatenate([result.x, [rho]])
        else:

            def augmented(y):
                return np.concatenate([system(y[:-1], y[-1]), [tangent @ (y - y_pred)]])

            result = _newton(augmented, y_pred, settings, label)
            y_new = result.x
        system.check_slack(y_new[:-1], settings.residual_tol)
        return y_new, result

    reason, fired, note = None, [], ""
    while reason is None:
        last = points[-1]
        rho = last.state.rho
        if len(points) >= max_steps:
            reason = TerminationReason.MAX_STEPS
            break
        if rho >= rho_max:
            reason = TerminationReason.RHO_LIMIT
            break
        delta = step
        gap = last.state.config.min_gap()
        if np.isfinite(gap):
            delta = min(delta, 0.1 * (gap - 2.0 * abs(rho)))
        if not arclength_mode:
            delta = min(delta, rho_max - rho)
        if delta < MIN_STEP:
            reason, note = TerminationReason.STEP_FAILURE, f"step underflow at ρ={rho:.6g}"
            break
        label = f"{scenario.kind.value} step {len(points)} (Δ={delta:.3e})"
        try:
            y_pred, tangent = predict(delta)
            y_new, result = correct(y_pred, tangent, label)
            candidate = system.state(y_new[:-1], y_new[-1])
            if candidate.rho == 0.0:
                raise _Rejected("the corrector returned to ρ = 0")
            report = diagnose(candidate, compute_L=track_L)
            failures = report.gate_failures(tolerances)
            if failures:
                raise _Rejected(f"gates {failures} failed")
        except (ConvergenceError, DomainError, _Rejected) as exc:
            logger.info("Rejected step Δ=%.3e at ρ=%.6g: %s", delta, rho, exc)
            step, streak = delta / 2.0, 0
            continue

        streak += 1
        step = delta
        if streak >= 3:
            step, streak = 2.0 * delta, 0
        if not arclength_mode and result.condition > ARCLENGTH_CONDITION:
            arclength_mode = True
            logger.info("Switching to pseudo-arclength at ρ=%.6g (condition %.3e)", candidate.rho, result.condition)
        arclength = last.arclength + float(np.linalg.norm(y_new - composite(last.state)))
        emit(BranchPoint(candidate, report, arclength, True, step, streak, arclength_mode))
        logger.info(
            "Accepted point %d at ρ=%.6g (N_conf=%.4g, N_vel=%.4g)", len(points) - 1, candidate.rho, report.n_conf, report.n_vel
        )
        if candidate.rho < 0.0:
            reason, note = TerminationReason.STEP_FAILURE, "the branch came back through ρ = 0"
            break
        fired = _monitors(report, reference, candidate, thresholds)
        if fired:
            reason = fired[0]
    logger.info("%s branch terminated: %s after %d points", scenario.kind.value, reason.value, len(points))
    return BranchResult(points, reason, [f.value for f in fired], note)
