"""
Hollow-vortex states and the nonlinear operator 𝓕 = (𝓐, 𝓑).

A state carries real densities μ, ν on the M circles ∂B_ρ(ζ_k), normalized Bernoulli
constants Q and the varying parameters λ. The conformal map and the complex
potential are

    f(ζ) = ζ + ρ² 𝒵^ρ[μ](ζ),      w(ζ) = w⁰(ζ) + ρ 𝒵^ρ[ν](ζ),

so that f_ζ = 1 + ρ𝒵^ρ[μ′] and w_ζ = w⁰_ζ + 𝒵^ρ[ν′]. All nonlinear products are
formed on the quadrature grid of the state.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from vortexforge import spectral
from vortexforge.exceptions import DomainError, InputError, PreconditionError, UnphysicalStateError
from vortexforge.pointvortex import (
    ParameterSplit,
    SteadyKind,
    VortexConfiguration,
    eval_pv_residual,
    full_jacobian,
    is_steady,
    steady_kind,
)
from vortexforge.spectral import DensityVector, GridFunction

logger = logging.getLogger(__name__)

#: Below this |ρ| the Bernoulli operator is evaluated in its cancelled form
CANCELLED_FORM_RADIUS = 1e-4

#: States with inf|1 + ρ𝒵_kμ′| below this value are outside the admissible set
CONFORMAL_MARGIN = 1e-6

_TWO_PI_I = 2j * np.pi


@dataclass(frozen=True, eq=False)
class HollowState:
    """Unknowns (μ, ν, Q, λ) of the hollow-vortex problem at a radius ρ

    :param mu: Densities of the conformal map.

    :param nu: Densities of the complex potential.

    :param Q: Normalized Bernoulli constants, one per vortex.

    :param lam: Values of the varying coordinates, ordered as ``cfg_base.split.varying``.

    :param rho: Common radius of the circles (signed).

    :param cfg_base: Configuration providing λ′ and the parameter split.

    :param n_nodes: Quadrature size, ``4N`` by default.
    """

    mu: DensityVector
    nu: DensityVector
    Q: NDArray[np.float64]
    lam: NDArray[np.float64]
    rho: float
    cfg_base: VortexConfiguration
    n_nodes: int = field(default=0)

    def __post_init__(self):
        if self.cfg_base.split is None:
            raise PreconditionError("A hollow-vortex state needs a configuration with a parameter split")
        Q = np.array(self.Q, dtype=float).reshape(-1)
        lam = np.array(self.lam, dtype=float).reshape(-1)
        M = self.cfg_base.M
        if self.mu.M != M or self.nu.M != M:
            raise InputError(f"Densities for {self.mu.M}/{self.nu.M} vortices given for M={M}")
        if self.mu.N != self.nu.N:
            raise InputError(f"μ and ν truncations differ: {self.mu.N} != {self.nu.N}")
        if Q.size != M:
            raise InputError(f"Expected {M} Bernoulli constants, got {Q.size}")
        if lam.size != len(self.cfg_base.split):
            raise InputError(f"Expected {len(self.cfg_base.split)} varying values, got {lam.size}")
        Q.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", float(self.rho))
        n_nodes = self.n_nodes or 4 * self.mu.N
        if n_nodes < 2 * (self.mu.N + 1) + 1:
            raise DomainError(f"{n_nodes} nodes cannot resolve the Bernoulli residual of N={self.mu.N}")
        object.__setattr__(self, "n_nodes", int(n_nodes))

    @classmethod
    def trivial(cls, cfg: VortexConfiguration, N: int, rho: float = 0.0, n_nodes: int = 0) -> "HollowState":
        """The state (0, 0, 0, λ₀) built on the configuration ``cfg``"""
        return cls(
            DensityVector.zeros(cfg.M, N),
            DensityVector.zeros(cfg.M, N),
            np.zeros(cfg.M),
            cfg.varying_values(),
            rho,
            cfg,
            n_nodes,
        )

    @property
    def M(self) -> int:
        return self.cfg_base.M

    @property
    def N(self) -> int:
        return self.mu.N

    @property
    def split(self) -> ParameterSplit:
        return self.cfg_base.split

    @property
    def config(self) -> VortexConfiguration:
        """Full configuration Λ = (λ, λ′)"""
        return self.cfg_base.with_coordinates(self.lam, self.split.indices)

    def replace(self, **changes) -> "HollowState":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "config": self.cfg_base.to_dict(),
            "rho": self.rho,
            "Q": [float(q) for q in self.Q],
            "lambda": [float(x) for x in self.lam],
            "mu": self.mu.to_list(),
            "nu": self.nu.to_list(),
            "n_nodes": self.n_nodes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HollowState":
        try:
            return cls(
                DensityVector.from_list(data["mu"]),
                DensityVector.from_list(data["nu"]),
                np.asarray(data["Q"], dtype=float),
                np.asarray(data["lambda"], dtype=float),
                float(data["rho"]),
                VortexConfiguration.from_dict(data["config"]),
                int(data.get("n_nodes", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"Malformed hollow-vortex state: {exc}") from exc

    def __repr__(self):
        return f"HollowState(M={self.M}, N={self.N}, rho={self.rho:.6g}, lam={self.lam.tolist()})"


@dataclass(frozen=True, eq=False)
class BoundaryTraces:
    """Grid values on every circle ζ_k + ρτ, arrays of shape ``(M, N_q)``"""

    tau: NDArray[np.complex128]
    Z_mu: NDArray[np.complex128]
    Z_dmu: NDArray[np.complex128]
    Z_dnu: NDArray[np.complex128]
    regular: NDArray[np.complex128]
    F: NDArray[np.complex128]
    f: NDArray[np.complex128]
    E: NDArray[np.complex128]


def boundary_traces(u: HollowState) -> BoundaryTraces:
    """Traces of 𝒵^ρ[μ], 𝒵^ρ[μ′], 𝒵^ρ[ν′] and of the derived boundary quantities

    :raises DomainError: if (ρ, Λ) is not admissible or inf|1 + ρ𝒵_kμ′| ≤ ``CONFORMAL_MARGIN``.
    """
    cfg = u.config
    rho, n = u.rho, u.n_nodes
    centers = cfg.centers
    spectral.check_admissible(rho, centers)
    tau = spectral.unit_nodes(n)
    mu_values = u.mu.grid_values(n)
    Z_mu = spectral.traces(rho, centers, mu_values)
    Z_dmu = spectral.traces(rho, centers, spectral.derivative_values(mu_values))
    Z_dnu = spectral.traces(rho, centers, u.nu.derivative_values(n))

    F = 1.0 + rho * Z_dmu
    smallest = float(np.min(np.abs(F)))
    if smallest <= CONFORMAL_MARGIN:
        raise DomainError(f"State leaves the admissible set: inf|1+ρ𝒵μ′| = {smallest:.3e}")

    points = centers[:, None] + rho * tau[None, :]
    regular = _regular_part(cfg, points)
    c, omega = cfg.wave_speed, cfg.angular_velocity
    rigid = 1j * omega * np.conj(points) - c
    E = (
        Z_dnu
        + regular
        + rigid
        + rho * rigid * Z_dmu
        + 1j * omega * rho**2 * (np.conj(Z_mu) + rho * Z_dmu * np.conj(Z_mu))
    )
    f = points + rho**2 * Z_mu
    return BoundaryTraces(tau, Z_mu, Z_dmu, Z_dnu, regular, F, f, E)


def _regular_part(cfg: VortexConfiguration, points: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Σ_{j≠k} γ_j/(2πi(ζ − ζ_j)) evaluated at row k of ``points``"""
    gammas, centers = cfg.circulations, cfg.centers
    regular = np.zeros(points.shape, dtype=complex)
    for k in range(cfg.M):
        for j in range(cfg.M):
            if j != k:
                regular[k] += gammas[j] / (_TWO_PI_I * (points[k] - centers[j]))
    return regular


def build_w0(cfg: VortexConfiguration, zeta) -> tuple:
    """Point-vortex potential w⁰ = Σγ_k/(2πi)·log(ζ−ζ_k) and its derivative

    Each logarithm uses the principal branch, so w⁰ itself is only defined up to the
    cuts; w⁰_ζ is the exact rational sum.

    :return: ``(w0, w0_zeta)`` with the shape of ``zeta``.
    """
    zeta_arr = np.asarray(zeta, dtype=complex)
    offsets = zeta_arr[..., None] - cfg.centers
    if np.any(offsets == 0):
        raise DomainError("w⁰ evaluated at a vortex center")
    weights = cfg.circulations / _TWO_PI_I
    w0 = np.sum(weights * np.log(offsets), axis=-1)
    w0_zeta = np.sum(weights / offsets, axis=-1)
    if zeta_arr.ndim == 0:
        return complex(w0), complex(w0_zeta)
    return w0, w0_zeta


def eval_Vrho(rho: float, cfg: VortexConfiguration, k: int, n_nodes: int = 64) -> GridFunction:
    """Λ_k^ρ(τ) = Σ_{j≠k}γ_j/(2πi(ζ_k+ρτ−ζ_j)) − c + iΩ conj(ζ_k+ρτ) on ``n_nodes`` nodes"""
    spectral.check_admissible(rho, cfg.centers)
    points = cfg.centers[k] + rho * spectral.unit_nodes(n_nodes)
    stacked = np.tile(points, (cfg.M, 1))
    regular = _regular_part(cfg, stacked)[k]
    return GridFunction(regular - cfg.wave_speed + 1j * cfg.angular_velocity * np.conj(points))


def vrho_series(rho: float, cfg: VortexConfiguration, k: int, n_nodes: int = 64, terms: int = 60) -> GridFunction:
    """Truncated expansion 𝒱_k + iΩρτ̄ − Σ_{m≥1}Σ_{j≠k} γ_j/(2πi)·(ρτ)^m/(ζ_j−ζ_k)^{m+1}"""
    tau = spectral.unit_nodes(n_nodes)
    values = np.full(n_nodes, eval_pv_residual(cfg)[k], dtype=complex)
    values += 1j * cfg.angular_velocity * rho * np.conj(tau)
    for j in range(cfg.M):
        if j == k:
            continue
        ratio = rho * tau / (cfg.centers[j] - cfg.centers[k])
        series = sum(ratio**m for m in range(1, terms + 1))
        values -= cfg.circulations[j] / (_TWO_PI_I * (cfg.centers[j] - cfg.centers[k])) * series
    return GridFunction(values)


@dataclass(frozen=True, eq=False)
class Residual:
    """Grid values of 𝓐 and 𝓑, arrays of shape ``(M, N_q)``"""

    A: NDArray[np.float64]
    B: NDArray[np.float64]

    def kinematic_coeffs(self, N: int) -> NDArray[np.complex128]:
        """Coefficients of modes 1..N of every 𝓐_k"""
        return spectral.analyze(self.A, N)

    def bernoulli_coeffs(self, N: int) -> NDArray[np.complex128]:
        """Mean (column 0) and coefficients of modes 1..N+1 of every 𝓑_k"""
        return np.concatenate([np.mean(self.B, axis=1, keepdims=True) + 0j, spectral.analyze(self.B, N + 1)], axis=1)

    def sup(self) -> float:
        return float(max(np.max(np.abs(self.A)), np.max(np.abs(self.B))))

    def vector(self, N: int) -> NDArray[np.float64]:
        """Real coordinates of the projected residual: per vortex Re/Im of 𝓐 modes, mean of 𝓑, Re/Im of 𝓑 modes"""
        A = self.kinematic_coeffs(N)
        B = self.bernoulli_coeffs(N)
        parts = []
        for k in range(A.shape[0]):
            parts += [A[k].real, A[k].imag, B[k, :1].real, B[k, 1:].real, B[k, 1:].imag]
        return np.concatenate(parts)


def _bernoulli(u: HollowState, traces: BoundaryTraces) -> NDArray[np.float64]:
    rho = u.rho
    gammas = u.config.circulations[:, None]
    a = gammas / (_TWO_PI_I * traces.tau[None, :])
    a2 = gammas**2 / (4.0 * np.pi**2)
    E, F = traces.E, traces.F
    if abs(rho) < CANCELLED_FORM_RADIUS:
        numerator = (
            2.0 * np.real(np.conj(a) * E)
            + rho * np.abs(E) ** 2
            - a2 * (2.0 * np.real(traces.Z_dmu) + rho * np.abs(traces.Z_dmu) ** 2)
        )
        values = numerator / np.abs(F) ** 2
    else:
        values = (np.abs(a + rho * E) ** 2 / np.abs(F) ** 2 - a2) / rho
    return values - u.Q[:, None]


def residual(u: HollowState, traces: BoundaryTraces | None = None) -> Residual:
    """Nonlinear residual 𝓕(u, ρ) = (𝓐, 𝓑) on the quadrature grid

    :param u: State.

    :param traces: Precomputed :func:`boundary_traces` of ``u``.

    :return: The :class:`Residual`.
    """
    traces = traces or boundary_traces(u)
    A = np.real(traces.tau[None, :] * traces.E)
    return Residual(A, _bernoulli(u, traces))


def kinematic_residual(u: HollowState) -> NDArray[np.float64]:
    """𝓐_k = Re(τE_k), one row per vortex"""
    return residual(u).A


def bernoulli_residual(u: HollowState) -> NDArray[np.float64]:
    """𝓑_k = 𝓑_k^ρ − Q_k, one row per vortex"""
    return residual(u).B


def q_from_state(u: HollowState, k: int) -> float:
    """Boundary speed q_k from q_k² = (γ_k²/4π² + ρQ_k)/ρ²"""
    if u.rho == 0.0:
        raise DomainError("The boundary speed is undefined at ρ = 0")
    gamma = u.config.circulations[k]
    radicand = gamma**2 / (4.0 * np.pi**2) + u.rho * u.Q[k]
    if radicand <= 0.0:
        raise UnphysicalStateError(f"q_{k + 1}² has nonpositive numerator {radicand:.3e}")
    return float(np.sqrt(radicand) / abs(u.rho))


def circulation(u: HollowState, k: int, n_nodes: int | None = None) -> float:
    """Trapezoid value of ∮ w_ζ dζ around the k-th circle

    The contour has radius 1.5|ρ| when it stays in the fluid domain, the boundary
    circle itself otherwise, and a quarter of the closest gap at ρ = 0.
    """
    fields = assemble_flow(u)
    cfg = u.config
    n_nodes = n_nodes or u.n_nodes
    radius = 1.5 * abs(u.rho)
    if u.rho == 0.0:
        radius = 0.25 * min(cfg.min_gap(), 4.0)
    elif cfg.M > 1 and cfg.min_gap() <= 2.5 * abs(u.rho) + 1e-12:
        radius = abs(u.rho)
    tau = spectral.unit_nodes(n_nodes)
    points = cfg.centers[k] + radius * tau
    distances = np.abs(points[:, None] - cfg.centers[None, :])
    if np.any(distances < abs(u.rho) * (1.0 - 1e-12)):
        raise DomainError(f"Circulation contour around vortex {k + 1} crosses another circle")
    integral = np.sum(fields.w_zeta(points) * 1j * radius * tau) * 2.0 * np.pi / n_nodes
    return float(integral.real)


def _phi_integrand(u: HollowState, A: NDArray, B: NDArray, traces: BoundaryTraces) -> NDArray[np.complex128]:
    rho = u.rho
    gammas = u.config.circulations[:, None]
    rho_tau_w = gammas / _TWO_PI_I + rho * traces.tau[None, :] * (traces.regular + traces.Z_dnu)
    return 0.5 * B * traces.F - np.conj(rho_tau_w) * A / np.conj(traces.F)


def _tau_integral(values: NDArray, tau: NDArray) -> NDArray:
    """Trapezoid value of ∫_𝕋 g dτ along the last axis"""
    return np.sum(values * 1j * tau, axis=-1) * 2.0 * np.pi / tau.size


def phi_integrals(u: HollowState, A: ArrayLike, B: ArrayLike) -> tuple[complex, complex]:
    """The two complex boundary integrals Σ∫I_k dτ and Σ∫I_k·conj(f) dτ entering the φ maps"""
    traces = boundary_traces(u)
    integrand = _phi_integrand(u, np.asarray(A, dtype=float), np.asarray(B, dtype=float), traces)
    plain = complex(np.sum(_tau_integral(integrand, traces.tau)))
    weighted = complex(np.sum(_tau_integral(integrand * np.conj(traces.f), traces.tau)))
    return plain, weighted


def hv_phi(kind: str, A: ArrayLike, B: ArrayLike, u: HollowState):
    """Identity maps φ_t, φ_r, φ_s of a state, as functions of the residual slots (A, B)

    :param kind: ``"t"``, ``"r"`` or ``"s"``; must match the (c, Ω) class of the state.

    :param A: Kinematic slot, shape ``(M, N_q)``.

    :param B: Bernoulli slot, shape ``(M, N_q)``.

    :param u: State.

    :return: A real number for ``t`` and ``r``, a ``(complex, real)`` pair for ``s``.
    """
    cfg = u.config
    c, omega = cfg.wave_speed, cfg.angular_velocity
    if kind == "t" and omega != 0.0:
        raise PreconditionError(f"φ_t needs Ω = 0, got Ω={omega}")
    if kind == "r" and c != 0.0:
        raise PreconditionError(f"φ_r needs c = 0, got c={c}")
    if kind == "s" and (c != 0.0 or omega != 0.0):
        raise PreconditionError(f"φ_s needs c = Ω = 0, got c={c}, Ω={omega}")
    if kind not in ("t", "r", "s"):
        raise InputError(f"Unknown identity kind {kind!r}")
    plain, weighted = phi_integrals(u, A, B)
    if kind == "t":
        return plain.imag
    if kind == "r":
        return weighted.real
    return plain, weighted.real


def phi_kind(u: HollowState) -> str:
    """The identity kind matching the steady frame of ``u``"""
    return {SteadyKind.TRANSLATING: "t", SteadyKind.ROTATING: "r", SteadyKind.STATIONARY: "s"}[
        steady_kind(u.config)
    ]


@dataclass(frozen=True, eq=False)
class LinearizedTrivial:
    """Exact derivative of 𝓕 at a trivial state (0, 0, 0, λ₀; ρ = 0)

    Coefficient conventions follow :class:`Residual`: 𝓐 blocks return modes 1..N,
    𝓑 blocks return the mean followed by modes 1..N+1.
    """

    gammas: NDArray[np.float64]
    V_lambda: NDArray[np.complex128]
    N: int

    def A_nu(self, nu: DensityVector) -> NDArray[np.complex128]:
        return nu.coeffs * np.arange(1, self.N + 1) / 2.0

    def A_lambda(self, lam_dot: ArrayLike) -> NDArray[np.complex128]:
        out = np.zeros((self.gammas.size, self.N), dtype=complex)
        out[:, 0] = (self.V_lambda @ np.asarray(lam_dot, dtype=float)) / 2.0
        return out

    def B_mu(self, mu: DensityVector) -> NDArray[np.complex128]:
        out = np.zeros((self.gammas.size, self.N + 2), dtype=complex)
        factor = -(self.gammas**2) / (2.0 * np.pi**2)
        out[:, 2:] = factor[:, None] * mu.coeffs * np.arange(1, self.N + 1) / 2.0
        return out

    def B_nu(self, nu: DensityVector) -> NDArray[np.complex128]:
        out = np.zeros((self.gammas.size, self.N + 2), dtype=complex)
        out[:, 1:-1] = (self.gammas / np.pi)[:, None] * (-0.5j * np.arange(1, self.N + 1) * nu.coeffs)
        return out

    def B_Q(self, Q_dot: ArrayLike) -> NDArray[np.complex128]:
        out = np.zeros((self.gammas.size, self.N + 2), dtype=complex)
        out[:, 0] = -np.asarray(Q_dot, dtype=float)
        return out

    def B_lambda(self, lam_dot: ArrayLike) -> NDArray[np.complex128]:
        out = np.zeros((self.gammas.size, self.N + 2), dtype=complex)
        out[:, 1] = self.gammas / np.pi * 0.5j * (self.V_lambda @ np.asarray(lam_dot, dtype=float))
        return out

    def apply(self, mu: DensityVector, nu: DensityVector, Q_dot: ArrayLike, lam_dot: ArrayLike) -> tuple:
        """(𝓐, 𝓑) coefficients of D_u𝓕(u⁰, 0) applied to a direction"""
        A = self.A_nu(nu) + self.A_lambda(lam_dot)
        B = self.B_mu(mu) + self.B_nu(nu) + self.B_Q(Q_dot) + self.B_lambda(lam_dot)
        return A, B

    def row_reduced(self, mu: DensityVector, Q_dot: ArrayLike, lam_dot: ArrayLike) -> NDArray[np.complex128]:
        """𝓛 = 𝓑_μ μ̇ + 𝓑_Q Q̇ + (𝓑_λ − 𝓑_ν(𝓐_ν)⁻¹𝓐_λ) λ̇"""
        return self.B_mu(mu) + self.B_Q(Q_dot) + 2.0 * self.B_lambda(lam_dot)


def linearized_trivial(cfg: VortexConfiguration, N: int, split: ParameterSplit | None = None) -> LinearizedTrivial:
    """Multiplier blocks of the linearization at the trivial solution over a steady ``cfg``"""
    split = split or cfg.split
    if split is None:
        raise PreconditionError("A parameter split is required for the linearization")
    if not is_steady(cfg):
        raise PreconditionError("The linearization is taken at a steady configuration")
    jacobian = full_jacobian(cfg)[:, split.indices]
    V_lambda = jacobian[0::2] + 1j * jacobian[1::2]
    return LinearizedTrivial(np.array(cfg.circulations, dtype=float), V_lambda, N)


class FlowFields:
    """Evaluators of f, w and U for a state, with cached boundary traces

    Exterior values use the exact multipole form of the layer potentials, so they are
    valid on the whole closed fluid domain.
    """

    def __init__(self, state: HollowState):
        self._state = state
        self._config = state.config
        self._traces = boundary_traces(state)
        self._mu_modes = state.mu.negative_modes()
        self._nu_modes = state.nu.negative_modes()

    @property
    def state(self) -> HollowState:
        return self._state

    @property
    def config(self) -> VortexConfiguration:
        return self._config

    @property
    def traces(self) -> BoundaryTraces:
        return self._traces

    def _Z(self, modes, zeta, derivative=0):
        return spectral.multipole_Z(self._state.rho, self._config.centers, modes, zeta, derivative)

    def f(self, zeta):
        return np.asarray(zeta) + self._state.rho**2 * self._Z(self._mu_modes, zeta)

    def f_zeta(self, zeta):
        return 1.0 + self._state.rho**2 * self._Z(self._mu_modes, zeta, 1)

    def dw_correction(self, zeta):
        """∂_ζ(w − w⁰) = 𝒵^ρ[ν′]"""
        return self._state.rho * self._Z(self._nu_modes, zeta, 1)

    def w_zeta(self, zeta):
        return build_w0(self._config, zeta)[1] + self.dw_correction(zeta)

    def U(self, zeta):
        """U = w_ζ/f_ζ + iΩ conj(f) − c"""
        cfg = self._config
        return self.w_zeta(zeta) / self.f_zeta(zeta) + 1j * cfg.angular_velocity * np.conj(self.f(zeta)) - cfg.wave_speed

    def boundary_points(self) -> NDArray[np.complex128]:
        """Images Γ_k of the circles, shape ``(M, N_q)``"""
        return self._traces.f

    def boundary_tangent(self) -> NDArray[np.complex128]:
        """dz/dθ = iρτ f_ζ on every boundary"""
        return 1j * self._state.rho * self._traces.tau[None, :] * self._traces.F

    def boundary_U(self) -> NDArray[np.complex128]:
        """U on the boundaries, (γ_k/(2πiτ) + ρE)/(ρ f_ζ)"""
        rho = self._state.rho
        if rho == 0.0:
            raise DomainError("Boundary velocities are undefined at ρ = 0")
        a = self._config.circulations[:, None] / (_TWO_PI_I * self._traces.tau[None, :])
        return (a + rho * self._traces.E) / (rho * self._traces.F)

    def far_field(self, k: int) -> tuple[complex, complex]:
        """Coefficients of (ζ−ζ_k)^{-1} in f − ζ and of (ζ−ζ_k)^{-3} in w_ζ − w⁰_ζ"""
        rho = self._state.rho
        mu_modes, nu_modes = self._mu_modes[k], self._nu_modes[k]
        f_coeff = -(rho**3) * mu_modes[0] if mu_modes.size else 0j
        w_coeff = 2.0 * rho**3 * nu_modes[1] if nu_modes.size > 1 else 0j
        return complex(f_coeff), complex(w_coeff)


def assemble_flow(u: HollowState) -> FlowFields:
    """Bundles the field evaluators of a state"""
    return FlowFields(u)


def reflect_state(u: HollowState) -> HollowState:
    """The state (μ(−·), −ν(−·), −Q, λ) at −ρ, which describes the same flow"""
    mu = DensityVector.from_densities(d.reflect() for d in u.mu)
    nu = DensityVector.from_densities(-d.reflect() for d in u.nu)
    return u.replace(mu=mu, nu=nu, Q=-u.Q, rho=-u.rho)


def random_state(
    cfg: VortexConfiguration, N: int, rho: float, amplitude: float, rng: np.random.Generator, decay: float = 0.5
) -> HollowState:
    """State with random geometrically decaying densities and small Bernoulli constants"""
    modes = np.arange(1, N + 1)
    scale = amplitude * decay ** (modes - 1) / 4.0

    def draw():
        coeffs = (rng.standard_normal((cfg.M, N)) + 1j * rng.standard_normal((cfg.M, N))) * scale
        return DensityVector(coeffs)

    return HollowState(draw(), draw(), amplitude * rng.standard_normal(cfg.M), cfg.varying_values(), rho, cfg)
