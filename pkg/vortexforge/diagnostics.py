"""
Geometric and physical monitors of hollow-vortex states.

All quantities are evaluated from the boundary grid of the state: area-type integrals
are reduced to contour integrals over the images Γ_k = f(∂B_ρ(ζ_k)) with the complex
Green formula ∫∫ ∂_z̄H dA = (1/2i)∮ H dz, and every boundary is traversed
counterclockwise with dz/dθ = iρτ f_ζ (valid for either sign of ρ).
"""

import logging
from dataclasses import asdict, dataclass
from time import time

import numpy as np
import pandas as pd
from numpy.polynomial import legendre
from numpy.typing import NDArray
from scipy import fft

from vortexforge import spectral
from vortexforge.exceptions import DomainError, PreconditionError
from vortexforge.hollowvortex import (
    FlowFields,
    HollowState,
    assemble_flow,
    build_w0,
    circulation,
    hv_phi,
    phi_integrals,
    phi_kind,
    q_from_state,
    residual,
)
from vortexforge.pointvortex import ParameterSplit, VortexConfiguration, eval_pv_residual

logger = logging.getLogger(__name__)

#: Value reported instead of infinity by the blowup norms
SENTINEL = 1e300

#: A winding integral below this magnitude is read as zero
WINDING_TOLERANCE = 0.25

#: Radial Gauss-Legendre points of every annulus used for the angular momentum
RADIAL_POINTS = 48

#: Tail tolerance of the angular momentum quadrature
L_TOLERANCE = 1e-8

#: Maximum number of doublings of the outer radius
MAX_DOUBLINGS = 16


def _weights(n_nodes: int) -> float:
    return 2.0 * np.pi / n_nodes


def _contour_integral(values: NDArray, tangent: NDArray) -> NDArray:
    """Trapezoid value of ∮ g dz along the last axis"""
    return np.sum(values * tangent, axis=-1) * _weights(values.shape[-1])


def _node_points(u: HollowState) -> NDArray[np.complex128]:
    tau = spectral.unit_nodes(u.n_nodes)
    return u.config.centers[:, None] + u.rho * tau[None, :]


def chord_arc(fields: FlowFields) -> float:
    """sup over all distinct boundary nodes of |ζ − ζ′| / |f(ζ) − f(ζ′)|"""
    zeta = _node_points(fields.state).ravel()
    images = fields.boundary_points().ravel()
    upper = np.triu_indices(zeta.size, k=1)
    chords = np.abs(images[:, None] - images[None, :])[upper]
    if np.any(chords == 0.0):
        return SENTINEL
    ratios = np.abs(zeta[:, None] - zeta[None, :])[upper] / chords
    return float(np.max(ratios))


def boundary_gap(fields: FlowFields) -> float:
    """Minimum distance between nodes of two different boundaries, ``inf`` for M = 1"""
    points = fields.boundary_points()
    gap = np.inf
    for k in range(points.shape[0]):
        for j in range(k + 1, points.shape[0]):
            gap = min(gap, float(np.min(np.abs(points[k][:, None] - points[j][None, :]))))
    return gap


def n_conf(fields: FlowFields) -> float:
    """Conformal blowup norm sup|f_ζ| + chord-arc constant + 1/min dist(Γ_j, Γ_k)

    All three terms are discrete maxima over the boundary grid.

    :param fields: Field evaluators of the state.

    :return: The norm, or ``SENTINEL`` if two image nodes coincide.
    """
    ratio = chord_arc(fields)
    gap = boundary_gap(fields)
    if ratio >= SENTINEL or gap == 0.0:
        return SENTINEL
    value = float(np.max(np.abs(fields.traces.F))) + ratio
    if np.isfinite(gap):
        value += 1.0 / gap
    return value


def n_vel(fields: FlowFields) -> float:
    """Velocity blowup norm sup over ∂𝒟 of |U| + 1/|U|"""
    speed = np.abs(fields.boundary_U())
    if np.any(speed == 0.0):
        return SENTINEL
    return float(np.max(speed + 1.0 / speed))


def boundary_curves(fields: FlowFields) -> tuple:
    """Boundary images and speeds

    :return: ``(theta, points, speed)`` with ``points`` and ``speed`` of shape ``(M, N_q)``.
    """
    n_nodes = fields.state.n_nodes
    theta = _weights(n_nodes) * np.arange(n_nodes)
    return theta, fields.boundary_points(), np.abs(fields.boundary_U())


def non_circularity(fields: FlowFields) -> float:
    """max over k and τ of ||f − ζ_k| − |ρ|| / |ρ|"""
    rho = abs(fields.state.rho)
    if rho == 0.0:
        raise DomainError("Non-circularity is undefined at ρ = 0")
    radii = np.abs(fields.boundary_points() - fields.config.centers[:, None])
    return float(np.max(np.abs(radii - rho)) / rho)


@dataclass(frozen=True)
class BoundaryGeometry:
    perimeters: NDArray[np.float64]
    areas: NDArray[np.float64]
    vacuum_area: float
    moment_inertia: float


def boundary_geometry(fields: FlowFields) -> BoundaryGeometry:
    """Perimeters |Γ_k|, enclosed areas A_k, total vacuum area and moment of inertia I

    A_k = (1/2i)∮ z̄ dz and I = Σ_k (1/2i)∮ z z̄²/2 dz, both on Γ_k.
    """
    z = fields.boundary_points()
    dz = fields.boundary_tangent()
    perimeters = np.sum(np.abs(dz), axis=-1) * _weights(z.shape[-1])
    areas = (_contour_integral(np.conj(z), dz) / 2j).real
    inertia = (_contour_integral(z * np.conj(z) ** 2 / 2.0, dz) / 2j).real
    return BoundaryGeometry(perimeters, areas, float(np.sum(areas)), float(np.sum(inertia)))


def winding_integral(fields: FlowFields) -> float:
    """(1/2πi)∮_{∂𝒟} f_ζζ/f_ζ dζ by spectral differentiation of the boundary traces of f_ζ"""
    F = fields.traces.F
    tau = fields.traces.tau
    dF = spectral.derivative_values(F)
    per_circle = np.mean(tau[None, :] * dF / F, axis=-1)
    return float(-np.sum(per_circle).real)


def _loop_winding(loop: NDArray[np.complex128], point: complex) -> int:
    offsets = loop - point
    if np.any(offsets == 0.0):
        return 0
    increments = np.angle(np.roll(offsets, -1) / offsets)
    return int(np.rint(np.sum(increments) / (2.0 * np.pi)))


def _segments_cross(points: NDArray[np.complex128]) -> bool:
    """True if two non-adjacent edges of the closed polygons (rows of ``points``) intersect"""
    starts = points.ravel()
    ends = np.roll(points, -1, axis=-1).ravel()
    curve = np.repeat(np.arange(points.shape[0]), points.shape[1])
    index = np.tile(np.arange(points.shape[1]), points.shape[0])
    n_nodes = points.shape[1]

    def orient(a, b, c):
        return np.imag(np.conj(b - a) * (c - a))

    i, j = np.triu_indices(starts.size, k=1)
    same = curve[i] == curve[j]
    gap = np.abs(index[i] - index[j])
    adjacent = same & ((gap == 1) | (gap == n_nodes - 1))
    i, j = i[~adjacent], j[~adjacent]
    a, b, c, d = starts[i], ends[i], starts[j], ends[j]
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return bool(np.any((o1 * o2 < 0.0) & (o3 * o4 < 0.0)))


@dataclass(frozen=True)
class WindingChecks:
    winding_ok: bool
    boundary_injective: bool
    mutually_exterior: bool
    winding_value: float


def winding_injectivity(fields: FlowFields) -> WindingChecks:
    """Argument-principle and simple-curve checks of the boundary images

    * ``winding_ok``: f_ζ has no zero in 𝒟_ρ, read from the winding integral.
    * ``boundary_injective``: finite chord-arc constant and no two boundary edges cross.
    * ``mutually_exterior``: no Γ_j winds around a point enclosed by Γ_k.
    """
    value = winding_integral(fields)
    points = fields.boundary_points()
    injective = chord_arc(fields) < SENTINEL and not _segments_cross(points)
    exterior = True
    for k in range(points.shape[0]):
        inner = complex(np.mean(points[k]))
        if _loop_winding(points[k], inner) == 0:
            exterior = False
            break
        if any(_loop_winding(points[j], inner) != 0 for j in range(points.shape[0]) if j != k):
            exterior = False
            break
    return WindingChecks(abs(value) < WINDING_TOLERANCE, injective, exterior, value)


def speed_identity_residual(fields: FlowFields, k: int, geometry: BoundaryGeometry | None = None) -> float:
    """|q_k|Γ_k| − |γ_k − 2ΩA_k|| / |γ_k|, zero for exact solutions"""
    geometry = geometry or boundary_geometry(fields)
    cfg = fields.config
    gamma = cfg.circulations[k]
    q = q_from_state(fields.state, k)
    expected = abs(gamma - 2.0 * cfg.angular_velocity * geometry.areas[k])
    return float(abs(q * geometry.perimeters[k] - expected) / abs(gamma))


def flux_spread(fields: FlowFields, k: int) -> float:
    """max − min of the stream function Im W along Γ_k

    Im W is obtained as the spectral antiderivative in θ of Im(U dz/dθ), anchored at the
    first node; a nonzero mean of the derivative is kept as a linear drift.
    """
    derivative = np.imag(fields.boundary_U()[k] * fields.boundary_tangent()[k])
    n_nodes = derivative.size
    theta = _weights(n_nodes) * np.arange(n_nodes)
    spectrum = fft.fft(derivative) / n_nodes
    modes = spectral.signed_modes(n_nodes)
    mean = spectrum[0].real
    safe = np.where(modes == 0, 1, modes)
    integrated = np.where(modes == 0, 0.0, spectrum / (1j * safe))
    if n_nodes % 2 == 0:
        integrated[n_nodes // 2] = 0.0
    stream = fft.ifft(integrated * n_nodes).real + mean * theta
    return float(np.max(stream) - np.min(stream))


def speed_spread(fields: FlowFields, k: int) -> float:
    """max − min of |U| on Γ_k"""
    speed = np.abs(fields.boundary_U()[k])
    return float(np.max(speed) - np.min(speed))


def wave_speed_check(fields: FlowFields) -> float:
    """Margin M·sup|U| − |c| of the wave-speed bound"""
    cfg = fields.config
    return float(cfg.M * np.max(np.abs(fields.boundary_U())) - abs(cfg.wave_speed))


def _momentum_density(fields: FlowFields, zeta: NDArray[np.complex128]) -> tuple:
    """h = f·conj(f_ζ)·g and H = |f|²·g, with g = w_ζ − f_ζ·w⁰_z(f), so that ∂_ζ̄H = h"""
    f = fields.f(zeta)
    f_zeta = fields.f_zeta(zeta)
    g = fields.w_zeta(zeta) - f_zeta * build_w0(fields.config, f)[1]
    return f * np.conj(f_zeta) * g, np.abs(f) ** 2 * g


def _annulus_integral(fields, center: complex, r_min: float, r_max: float, n_angles: int) -> complex:
    """∫∫ h dA over r_min ≤ |ζ − center| ≤ r_max, Gauss-Legendre in log r × trapezoid in θ"""
    nodes, weights = legendre.leggauss(RADIAL_POINTS)
    lo, hi = np.log(r_min), np.log(r_max)
    radii = np.exp(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
    radial = 0.5 * (hi - lo) * weights * radii**2
    tau = spectral.unit_nodes(n_angles)
    h, _ = _momentum_density(fields, center + radii[:, None] * tau[None, :])
    return complex(np.sum(radial[:, None] * h) * _weights(n_angles))


def _green_circle(fields, center: complex, radius: float, n_points: int) -> complex:
    """(1/2i)∮ H dζ over the counterclockwise circle |ζ − center| = radius"""
    tau = spectral.unit_nodes(n_points)
    _, H = _momentum_density(fields, center + radius * tau)
    return complex(_contour_integral(H, 1j * radius * tau) / 2j)


def excess_angular_momentum(fields: FlowFields, tol: float = L_TOLERANCE) -> float:
    """Excess angular momentum L = Im ∫∫_fluid z ∂_z(w − w⁰) dA_z

    Pulled back to the circular domain the integrand is h = f·conj(f_ζ)·g with
    g = w_ζ − f_ζ·w⁰_z(f). The domain is split into annuli around every circle, an
    outer annulus about the origin and the middle region, which is reduced to contour
    integrals of H = |f|²g. The outer radius doubles until the Richardson tail
    estimate (tail of order R⁻²) is below ``tol``.

    :param fields: Field evaluators of the state.

    :param tol: Tail tolerance.

    :return: The extrapolated value of L.
    """
    u = fields.state
    cfg = fields.config
    rho = abs(u.rho)
    if rho == 0.0:
        return 0.0
    start = time()
    centers = cfg.centers
    r_near = 2.0 * rho if cfg.M == 1 else rho + 0.45 * (cfg.min_gap() - 2.0 * rho)
    r_in = float(np.max(np.abs(centers))) + r_near
    n_angles = 2 * u.n_nodes
    n_contour = 4 * u.n_nodes

    value = sum(_annulus_integral(fields, zeta_k, rho, r_near, n_angles) for zeta_k in centers)
    middle = _green_circle(fields, 0.0, r_in, n_contour)
    middle -= sum(_green_circle(fields, zeta_k, r_near, n_contour) for zeta_k in centers)
    value += middle

    radius = max(4.0 * float(np.max(np.abs(centers))), 2.0 * r_in)
    value += _annulus_integral(fields, 0.0, r_in, radius, n_angles)
    previous = value.imag
    for _ in range(MAX_DOUBLINGS):
        value += _annulus_integral(fields, 0.0, radius, 2.0 * radius, n_angles)
        radius *= 2.0
        tail = (value.imag - previous) / 3.0
        logger.debug("L quadrature: R=%.3e, L=%.15e, tail=%.3e", radius, value.imag, tail)
        if abs(tail) < tol:
            break
        previous = value.imag
    else:
        logger.warning("L quadrature tail not converged at R=%.3e: tail estimate %.3e", radius, tail)
    logger.debug("L evaluated in %.2f seconds", time() - start)
    return float(value.imag + tail)


def _enclosed_kernel(fields: FlowFields, k: int) -> complex:
    """K_k = π|ζ_k|² + Σ_j ∫∫_{R_j} z/(z − ζ_k) dA, with R_j the region enclosed by Γ_j"""
    zeta_k = fields.config.centers[k]
    z = fields.boundary_points()
    dz = fields.boundary_tangent()
    integrand = z * (np.conj(z) - np.conj(zeta_k)) / (z - zeta_k)
    return np.pi * abs(zeta_k) ** 2 + complex(np.sum(_contour_integral(integrand, dz)) / 2j)


def momentum_identity_terms(fields: FlowFields, L: float | None = None, geometry=None) -> dict:
    """Terms of the momentum identity of a rotating state

    L − ΩI + (1/2π)Re Σγ_kK_k + (1/4Ω)Im∮_{∂𝒟} zU²dz − (Σγ_k)²/(8πΩ) = 0.

    :raises PreconditionError: if c ≠ 0, Ω = 0 or Σγ_kζ_k ≠ 0.
    """
    cfg = fields.config
    omega = cfg.angular_velocity
    if cfg.wave_speed != 0.0 or omega == 0.0:
        raise PreconditionError(f"The momentum identity needs c = 0 and Ω ≠ 0, got c={cfg.wave_speed}, Ω={omega}")
    gammas, centers = cfg.circulations, cfg.centers
    impulse = abs(np.sum(gammas * centers))
    if impulse > 1e-9 * max(1.0, float(np.sum(np.abs(gammas * centers)))):
        raise PreconditionError(f"The momentum identity needs Σγ_kζ_k = 0, got |Σγ_kζ_k|={impulse:.3e}")
    geometry = geometry or boundary_geometry(fields)
    L = excess_angular_momentum(fields) if L is None else L
    z = fields.boundary_points()
    boundary = -np.sum(_contour_integral(z * fields.boundary_U() ** 2, fields.boundary_tangent()))
    kernels = np.array([_enclosed_kernel(fields, k) for k in range(cfg.M)])
    return {
        "L": L,
        "inertia": -omega * geometry.moment_inertia,
        "enclosed": float(np.real(np.sum(gammas * kernels))) / (2.0 * np.pi),
        "boundary": float(np.imag(boundary)) / (4.0 * omega),
        "circulation": -float(np.sum(gammas)) ** 2 / (8.0 * np.pi * omega),
    }


def momentum_identity_residual(fields: FlowFields, L: float | None = None, geometry=None) -> float:
    """Relative residual of the momentum identity, normalised by the sum of the absolute terms"""
    terms = momentum_identity_terms(fields, L, geometry)
    total = sum(terms.values())
    scale = sum(abs(v) for v in terms.values())
    return float(abs(total) / scale) if scale else 0.0


def phi_residual(u: HollowState) -> float:
    """|φ(𝓕(u))| for the identity matching the frame of ``u``"""
    res = residual(u)
    value = hv_phi(phi_kind(u), res.A, res.B, u)
    if isinstance(value, tuple):
        return float(max(abs(value[0]), abs(value[1])))
    return float(abs(value))


def appendix_limit_check(cfg: VortexConfiguration, rhos=(0.04, 0.02, 0.01), N: int = 8) -> pd.DataFrame:
    """Small-ρ limits of the combined boundary integrals at zero densities

    For a configuration that need not be steady, −Σ∫I_k dτ tends to −Σγ_k·conj(𝒱_k)
    and −ReΣ∫I_k·conj(f) dτ tends to −ReΣγ_kζ_k𝒱_k, both with an O(ρ) error.

    :param cfg: Admissible configuration.

    :param rhos: Decreasing radii.

    :param N: Truncation of the zero densities.

    :return: One row per radius with the integrals, their errors and the observed orders.
    """
    if cfg.split is None:
        cfg = cfg.with_split(ParameterSplit([], cfg.M))
    V = eval_pv_residual(cfg)
    gammas = cfg.circulations
    plain_limit = -complex(np.sum(gammas * np.conj(V)))
    weighted_limit = -float(np.real(np.sum(gammas * cfg.centers * V)))
    rows = []
    for rho in rhos:
        u = HollowState.trivial(cfg, N, rho)
        res = residual(u)
        plain, weighted = phi_integrals(u, res.A, res.B)
        rows.append(
            {
                "rho": rho,
                "plain": -plain,
                "plain_error": abs(-plain - plain_limit),
                "weighted": -weighted.real,
                "weighted_error": abs(-weighted.real - weighted_limit),
            }
        )
    table = pd.DataFrame(rows)
    for column in ("plain", "weighted"):
        errors = table[f"{column}_error"].to_numpy()
        orders = [np.nan]
        for previous, current, r0, r1 in zip(errors[:-1], errors[1:], table["rho"][:-1], table["rho"][1:]):
            if previous > 0.0 and current > 0.0:
                orders.append(np.log(previous / current) / np.log(r0 / r1))
            else:
                orders.append(np.nan)
        table[f"{column}_order"] = orders
    table.attrs["plain_limit"] = plain_limit
    table.attrs["weighted_limit"] = weighted_limit
    return table


@dataclass(frozen=True)
class GateTolerances:
    circulation: float = 1e-10
    speed_identity: float = 1e-8
    flux: float = 1e-9
    speed_spread: float = 1e-9
    phi: float = 1e-9

    @classmethod
    def from_dict(cls, data: dict | None) -> "GateTolerances":
        return cls(**(data or {}))

    def to_dict(self) -> dict:
        return asdict(self)


def _floats(values) -> list:
    return [float(v) for v in values]


@dataclass(frozen=True)
class DiagnosticsReport:
    """Monitors of one state; ``None`` marks a value that was not computed"""

    n_conf: float
    n_vel: float
    perimeters: list
    areas: list
    vacuum_area: float
    moment_inertia: float
    excess_L: float | None
    circulations: list
    circulation_defects: list
    speed_identity_resid: list
    flux_spread: list
    speed_spread: list
    winding_ok: bool
    boundary_injective: bool
    mutually_exterior: bool
    phi_resid: float
    wave_speed_margin: float
    non_circularity: float
    winding_value: float = 0.0
    momentum_resid: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsReport":
        return cls(**{key: value for key, value in data.items() if key in cls.__dataclass_fields__})

    def gate_failures(self, tolerances: GateTolerances | None = None) -> list:
        """Names of the acceptance gates this report fails"""
        tol = tolerances or GateTolerances()
        failures = []
        if not self.winding_ok:
            failures.append("winding")
        if not self.boundary_injective:
            failures.append("injectivity")
        if not self.mutually_exterior:
            failures.append("exterior")
        if self.n_conf >= SENTINEL or self.n_vel >= SENTINEL:
            failures.append("blowup_norm")
        if max(self.circulation_defects) >= tol.circulation:
            failures.append("circulation")
        if max(self.speed_identity_resid) >= tol.speed_identity:
            failures.append("speed_identity")
        if max(self.flux_spread) >= tol.flux:
            failures.append("flux")
        if max(self.speed_spread) >= tol.speed_spread:
            failures.append("speed_spread")
        if self.phi_resid >= tol.phi:
            failures.append("phi")
        return failures

    def gates_ok(self, tolerances: GateTolerances | None = None) -> bool:
        return not self.gate_failures(tolerances)


def diagnose(u: HollowState, compute_L: bool = True, compute_momentum: bool = False) -> DiagnosticsReport:
    """Assembles the :class:`DiagnosticsReport` of a state

    :param u: State with ρ ≠ 0.

    :param compute_L: Evaluate the excess angular momentum (domain quadrature).

    :param compute_momentum: Evaluate the momentum identity; only for rotating states with zero impulse.

    :return: The report.
    """
    if u.rho == 0.0:
        raise DomainError("Diagnostics need a nonzero radius")
    fields = assemble_flow(u)
    cfg = fields.config
    geometry = boundary_geometry(fields)
    checks = winding_injectivity(fields)
    circulations = [circulation(u, k) for k in range(cfg.M)]
    L = excess_angular_momentum(fields) if compute_L else None
    momentum = None
    if compute_momentum:
        momentum = momentum_identity_residual(fields, L, geometry)
    return DiagnosticsReport(
        n_conf=n_conf(fields),
        n_vel=n_vel(fields),
        perimeters=_floats(geometry.perimeters),
        areas=_floats(geometry.areas),
        vacuum_area=geometry.vacuum_area,
        moment_inertia=geometry.moment_inertia,
        excess_L=L,
        circulations=_floats(circulations),
        circulation_defects=_floats(np.abs(np.array(circulations) - cfg.circulations)),
        speed_identity_resid=[speed_identity_residual(fields, k, geometry) for k in range(cfg.M)],
        flux_spread=[flux_spread(fields, k) for k in range(cfg.M)],
        speed_spread=[speed_spread(fields, k) for k in range(cfg.M)],
        winding_ok=checks.winding_ok,
        boundary_injective=checks.boundary_injective,
        mutually_exterior=checks.mutually_exterior,
        phi_resid=phi_residual(u),
        wave_speed_margin=wave_speed_check(fields),
        non_circularity=non_circularity(fields),
        winding_value=checks.winding_value,
        momentum_resid=momentum,
    )
