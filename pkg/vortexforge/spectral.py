"""
Truncated Fourier representation of real, mean-zero densities on the unit circle,
together with the Cauchy operator, the Fourier multipliers, the projections, the
layer-potential traces and the reflection symmetry classes used by the
hollow-vortex formulation.

Convention: a real density is φ(τ) = Σ_{m≥1} (φ̂_m τ^m + conj(φ̂_m) τ^{-m}), so that
``φ̂_1 = 1`` is the function ``2cosθ``. Grid functions live on the equispaced
nodes ``τ_j = exp(2πij/N_q)``.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial
from numpy.typing import ArrayLike, NDArray
from scipy import fft

from vortexforge.exceptions import DomainError, NearSingularityError

logger = logging.getLogger(__name__)

#: Minimum distance (relative to ρ) from a boundary circle accepted by :func:`field_Z`
NEAR_BOUNDARY_BAND = 0.05

#: Default truncation order of the densities
DEFAULT_TRUNCATION = 64


def _frozen(array: NDArray) -> NDArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Real mean-zero function on 𝕋 stored by its coefficients φ̂_1..φ̂_N

    :param coeffs: Complex Fourier coefficients for the modes ``m = 1..N``.
    """

    coeffs: NDArray[np.complex128]

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @property
    def N(self) -> int:
        """Truncation order"""
        return self.coeffs.shape[0]

    @property
    def modes(self) -> NDArray[np.int_]:
        """Mode numbers 1..N"""
        return np.arange(1, self.N + 1)

    @classmethod
    def zeros(cls, N: int) -> "SpectralDensity":
        return cls(np.zeros(N, dtype=complex))

    @classmethod
    def from_modes(cls, modes: dict, N: int) -> "SpectralDensity":
        """Builds a density from a ``{m: φ̂_m}`` mapping"""
        coeffs = np.zeros(N, dtype=complex)
        for m, value in modes.items():
            if not 1 <= m <= N:
                raise ValueError(f"Mode {m} outside the truncation 1..{N}")
            coeffs[m - 1] = value
        return cls(coeffs)

    def evaluate(self, theta: ArrayLike) -> NDArray[np.float64]:
        """Direct summation of the series at the angles ``theta``"""
        theta = np.asarray(theta, dtype=float)
        phases = np.exp(1j * np.multiply.outer(theta, self.modes))
        return 2.0 * np.real(phases @ self.coeffs)

    def reflect(self) -> "SpectralDensity":
        """φ(−·), i.e. the density composed with τ ↦ −τ"""
        return SpectralDensity(self.coeffs * (-1.0) ** self.modes)

    def star(self) -> "SpectralDensity":
        """φ*(τ) = conj(φ(τ̄))"""
        return SpectralDensity(np.conj(self.coeffs))

    def truncate(self, N: int) -> "SpectralDensity":
        coeffs = np.zeros(N, dtype=complex)
        keep = min(N, self.N)
        coeffs[:keep] = self.coeffs[:keep]
        return SpectralDensity(coeffs)

    def norm(self) -> float:
        """Upper bound of the sup norm, 2Σ|φ̂_m|"""
        return float(2.0 * np.sum(np.abs(self.coeffs)))

    def to_list(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self.coeffs]

    @classmethod
    def from_list(cls, pairs: Sequence[Sequence[float]]) -> "SpectralDensity":
        return cls(np.array([complex(re, im) for re, im in pairs], dtype=complex))

    def __add__(self, other: "SpectralDensity") -> "SpectralDensity":
        return SpectralDensity(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralDensity") -> "SpectralDensity":
        return SpectralDensity(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralDensity":
        return SpectralDensity(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralDensity":
        return SpectralDensity(-self.coeffs)

    def __repr__(self):
        return f"SpectralDensity(N={self.N}, norm={self.norm():.3e})"


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a (possibly complex) function at the nodes τ_j = exp(2πij/N_q)"""

    values: NDArray[np.complex128]

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).reshape(-1)
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> NDArray[np.complex128]:
        return unit_nodes(self.n_nodes)

    @property
    def real(self) -> NDArray[np.float64]:
        return self.values.real

    def mean(self) -> complex:
        return complex(np.mean(self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"GridFunction(n_nodes={self.n_nodes}, sup={self.sup():.3e})"


@dataclass(frozen=True, eq=False)
class DensityVector:
    """One real mean-zero density per vortex boundary, stored as an ``(M, N)`` array"""

    coeffs: NDArray[np.complex128]

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 2:
            raise ValueError(f"Density vector coefficients must be 2D, got shape {coeffs.shape}")
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @property
    def M(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    def __getitem__(self, k: int) -> SpectralDensity:
        return SpectralDensity(self.coeffs[k])

    def __iter__(self):
        return (self[k] for k in range(self.M))

    def __len__(self):
        return self.M

    @classmethod
    def zeros(cls, M: int, N: int) -> "DensityVector":
        return cls(np.zeros((M, N), dtype=complex))

    @classmethod
    def from_densities(cls, densities: Iterable[SpectralDensity]) -> "DensityVector":
        densities = list(densities)
        truncations = {d.N for d in densities}
        if len(truncations) != 1:
            raise ValueError(f"All densities must share the truncation, got {sorted(truncations)}")
        return cls(np.stack([d.coeffs for d in densities]))

    def grid_values(self, n_nodes: int) -> NDArray[np.complex128]:
        """Values on the grid, one row per vortex"""
        return synthesize(self.coeffs, n_nodes)

    def derivative_values(self, n_nodes: int) -> NDArray[np.complex128]:
        """τ-derivatives on the grid, one row per vortex"""
        return derivative_values(self.grid_values(n_nodes))

    def negative_modes(self) -> NDArray[np.complex128]:
        """Coefficients of τ^{-n}, n = 1..N, i.e. conj(φ̂_n)"""
        return np.conj(self.coeffs)

    def norm(self) -> float:
        return float(max((d.norm() for d in self), default=0.0))

    def to_list(self) -> list:
        return [d.to_list() for d in self]

    @classmethod
    def from_list(cls, rows: Sequence) -> "DensityVector":
        return cls.from_densities(SpectralDensity.from_list(row) for row in rows)

    def __add__(self, other: "DensityVector") -> "DensityVector":
        return DensityVector(self.coeffs + other.coeffs)

    def __sub__(self, other: "DensityVector") -> "DensityVector":
        return DensityVector(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "DensityVector":
        return DensityVector(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"DensityVector(M={self.M}, N={self.N})"


class SymmetryClass(Enum):
    """Reflection classes of boundary densities, as linear constraints on φ̂_m

    ``rr``: φ̂_m ∈ ℝ, ``ir``: φ̂_m ∈ iℝ, ``ii``: i^m φ̂_m ∈ iℝ, ``ri``: i^m φ̂_m ∈ ℝ,
    intersections are the mode-wise intersections of the lines, ``none`` is unconstrained.
    """

    RR = "rr"
    IR = "ir"
    II = "ii"
    RI = "ri"
    RR_II = "rr&ii"
    RR_RI = "rr&ri"
    IR_II = "ir&ii"
    NONE = "none"

    @classmethod
    def parse(cls, value) -> "SymmetryClass":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("∩", "&"))


def _line_directions(kind: SymmetryClass, modes: NDArray[np.int_]) -> NDArray[np.complex128]:
    """Unit direction of the admissible real line per mode (0 where the class forces zero)"""
    modes = np.asarray(modes)
    i_pow = np.array([1.0, -1j, -1.0, 1j])[modes % 4]  # i^{-m}
    ones = np.ones(modes.shape, dtype=complex)
    if kind is SymmetryClass.RR:
        return ones
    if kind is SymmetryClass.IR:
        return 1j * ones
    if kind is SymmetryClass.II:
        return 1j * i_pow
    if kind is SymmetryClass.RI:
        return i_pow
    if kind is SymmetryClass.RR_II:
        return np.where(modes % 2 == 1, 1.0 + 0j, 0j)
    if kind is SymmetryClass.RR_RI:
        return np.where(modes % 2 == 0, 1.0 + 0j, 0j)
    if kind is SymmetryClass.IR_II:
        return np.where(modes % 2 == 0, 1j, 0j)
    raise ValueError(f"Class {kind} has no line structure")


def project_coefficients(kind, coeffs: ArrayLike, modes: ArrayLike) -> NDArray[np.complex128]:
    """Orthogonal projection of coefficients with explicit mode numbers onto a class"""
    kind = SymmetryClass.parse(kind)
    coeffs = np.asarray(coeffs, dtype=complex)
    if kind is SymmetryClass.NONE:
        return coeffs.copy()
    directions = _line_directions(kind, np.asarray(modes))
    return np.real(np.conj(directions) * coeffs) * directions


def class_basis(kind, modes: ArrayLike) -> NDArray[np.complex128]:
    """Complex matrix ``B`` with ℝ-orthonormal columns so that class members are ``B @ t``"""
    kind = SymmetryClass.parse(kind)
    modes = np.asarray(modes)
    if kind is SymmetryClass.NONE:
        eye = np.eye(modes.size, dtype=complex)
        return np.concatenate([eye, 1j * eye], axis=1)
    directions = _line_directions(kind, modes)
    kept = np.flatnonzero(directions != 0)
    basis = np.zeros((modes.size, kept.size), dtype=complex)
    basis[kept, np.arange(kept.size)] = directions[kept]
    return basis


def symmetry_project(kind, d: SpectralDensity) -> SpectralDensity:
    """Orthogonal projection of a density onto a symmetry class

    :param kind: A :class:`SymmetryClass` or its string value.

    :param d: Density to project.

    :return: The projected density.
    """
    return SpectralDensity(project_coefficients(kind, d.coeffs, d.modes))


def is_member(kind, d: SpectralDensity, tol: float = 1e-12) -> bool:
    """True if the distance of ``d`` to the class is below ``tol`` (max coefficient defect)"""
    defect = d.coeffs - project_coefficients(kind, d.coeffs, d.modes)
    return bool(np.max(np.abs(defect), initial=0.0) < tol)


def class_defect(kind, d: SpectralDensity) -> float:
    defect = d.coeffs - project_coefficients(kind, d.coeffs, d.modes)
    return float(np.max(np.abs(defect), initial=0.0))


def unit_nodes(n_nodes: int) -> NDArray[np.complex128]:
    return np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)


def signed_modes(n_nodes: int) -> NDArray[np.int_]:
    """Mode number of each FFT bin (the Nyquist bin, if any, is reported as -n/2)"""
    return np.rint(fft.fftfreq(n_nodes, 1.0 / n_nodes)).astype(int)


def _check_resolution(N: int, n_nodes: int):
    if n_nodes < 2 * N + 1:
        raise DomainError(
            f"Aliasing: {n_nodes} nodes cannot represent {N} modes (need at least {2 * N + 1})"
        )


def synthesize(coeffs: ArrayLike, n_nodes: int) -> NDArray[np.complex128]:
    """Grid values of real densities given by rows of positive-mode coefficients"""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    N = coeffs.shape[-1]
    _check_resolution(N, n_nodes)
    spectrum = np.zeros(coeffs.shape[:-1] + (n_nodes,), dtype=complex)
    spectrum[..., 1 : N + 1] = coeffs
    if N:
        spectrum[..., n_nodes - N :] = np.conj(coeffs[..., ::-1])
    return fft.ifft(spectrum, axis=-1).real * n_nodes + 0j


def analyze(values: ArrayLike, N: int) -> NDArray[np.complex128]:
    """Positive-mode coefficients 1..N of grid values (rows are independent)"""
    values = np.asarray(values, dtype=complex)
    _check_resolution(N, values.shape[-1])
    return fft.fft(values, axis=-1)[..., 1 : N + 1] / values.shape[-1]


def to_grid(d: SpectralDensity, n_nodes: int) -> GridFunction:
    """Samples a density on ``n_nodes`` equispaced nodes

    :param d: Density to sample.

    :param n_nodes: Number of quadrature nodes, at least ``2N+1``.

    :return: A :class:`GridFunction` with real values.
    """
    return GridFunction(synthesize(d.coeffs, n_nodes)[0])


def to_coeffs(g: GridFunction, N: int) -> SpectralDensity:
    """Coefficients φ̂_1..φ̂_N of a real grid function (the mean is discarded)"""
    return SpectralDensity(analyze(g.values, N))


def derivative_values(values: ArrayLike) -> NDArray[np.complex128]:
    """Spectral τ-derivative of grid values along the last axis"""
    values = np.asarray(values, dtype=complex)
    n_nodes = values.shape[-1]
    modes = signed_modes(n_nodes)
    multiplier = modes.astype(complex)
    if n_nodes % 2 == 0:
        multiplier[n_nodes // 2] = 0.0
    spectrum = fft.fft(values, axis=-1) * multiplier
    return np.conj(unit_nodes(n_nodes)) * fft.ifft(spectrum, axis=-1)


def cauchy_values(values: ArrayLike) -> NDArray[np.complex128]:
    """𝒞 applied to grid values: nonnegative modes removed, negative modes negated"""
    values = np.asarray(values, dtype=complex)
    n_nodes = values.shape[-1]
    modes = signed_modes(n_nodes)
    multiplier = np.where(modes < 0, -1.0, 0.0)
    if n_nodes % 2 == 0:
        multiplier[n_nodes // 2] = 0.0
    return fft.ifft(fft.fft(values, axis=-1) * multiplier, axis=-1)


def cauchy(d: SpectralDensity, n_nodes: int | None = None) -> GridFunction:
    """Cauchy-type integral operator 𝒞, exact on the truncated representation

    𝒞τ^m = 0 for m ≥ 0 and 𝒞τ^m = −τ^m for m < 0, so the result is
    −Σ conj(φ̂_m) τ^{-m}.

    :param d: Density.

    :param n_nodes: Grid size, ``4N`` by default.

    :return: Complex :class:`GridFunction`.
    """
    n_nodes = n_nodes or 4 * d.N
    _check_resolution(d.N, n_nodes)
    spectrum = np.zeros(n_nodes, dtype=complex)
    if d.N:
        spectrum[n_nodes - d.N :] = -np.conj(d.coeffs[::-1])
    return GridFunction(fft.ifft(spectrum) * n_nodes)


class Multiplier(Enum):
    RE_C_DTAU = "Re_C_dtau"
    RE_TAU_C_DTAU = "Re_tauC_dtau"
    RE_ITAU_C_DTAU = "Re_itauC_dtau"


def apply_multiplier(kind, d: SpectralDensity) -> SpectralDensity:
    """Exact action of Re(𝒞∂_τ), Re(τ𝒞∂_τ) and Re(iτ𝒞∂_τ) on a density

    Re(τ𝒞φ′) has coefficients mφ̂_m/2, Re(iτ𝒞φ′) has −imφ̂_m/2, and Re(𝒞φ′) maps
    φ̂_m to mφ̂_m/2 at mode m+1 (the result therefore has N+1 modes).
    """
    kind = Multiplier(kind)
    m = d.modes
    if kind is Multiplier.RE_TAU_C_DTAU:
        return SpectralDensity(m * d.coeffs / 2.0)
    if kind is Multiplier.RE_ITAU_C_DTAU:
        return SpectralDensity(-1j * m * d.coeffs / 2.0)
    shifted = np.zeros(d.N + 1, dtype=complex)
    shifted[1:] = m * d.coeffs / 2.0
    return SpectralDensity(shifted)


def invert_multiplier(kind, target, N: int | None = None) -> SpectralDensity:
    """Inverse of :func:`apply_multiplier` on its range

    :param kind: Multiplier name.

    :param target: A :class:`SpectralDensity`, or a real :class:`GridFunction` that must have zero mean.

    :param N: Truncation used when ``target`` is a grid function (``n_nodes // 4`` by default).

    :return: The preimage density.
    """
    kind = Multiplier(kind)
    if isinstance(target, GridFunction):
        scale = max(1.0, target.sup())
        if abs(target.mean()) > 1e-12 * scale:
            raise DomainError(f"Target has nonzero mean {target.mean():.3e}; the multiplier range is mean-zero")
        target = to_coeffs(target, N or target.n_nodes // 4)
    t = target.coeffs
    m = target.modes
    if kind is Multiplier.RE_TAU_C_DTAU:
        return SpectralDensity(2.0 * t / m)
    if kind is Multiplier.RE_ITAU_C_DTAU:
        return SpectralDensity(2j * t / m)
    if target.N and abs(t[0]) > 1e-14 * max(1.0, np.max(np.abs(t))):
        raise DomainError("Re(𝒞∂_τ) has no mode-1 component in its range")
    return SpectralDensity(2.0 * t[1:] / m[:-1])


class Projection(Enum):
    EQ = "P_m"
    LE = "P_le_m"
    GT = "P_gt_m"


def project(kind, d, m: int):
    """Fourier projections P_m, P_{≤m}, P_{>m}

    P_m keeps the pair of modes ±m (the constant for m = 0). Works on
    :class:`SpectralDensity` (whose constant mode is identically zero) and on
    :class:`GridFunction`.
    """
    kind = Projection(kind)
    if isinstance(d, SpectralDensity):
        modes = d.modes
    else:
        modes = np.abs(signed_modes(d.n_nodes))
    if kind is Projection.EQ:
        keep = modes == m
    elif kind is Projection.LE:
        keep = modes <= m
    else:
        keep = modes > m
    if isinstance(d, SpectralDensity):
        return SpectralDensity(np.where(keep, d.coeffs, 0.0))
    return GridFunction(fft.ifft(np.where(keep, fft.fft(d.values), 0.0)))


def check_admissible(rho: float, centers: ArrayLike, margin: float = 0.0):
    """Raises :class:`DomainError` unless min_{j≠k}|ζ_j−ζ_k| > 2|ρ| + margin"""
    centers = np.asarray(centers, dtype=complex)
    if centers.size < 2:
        return
    gaps = np.abs(centers[:, None] - centers[None, :])
    np.fill_diagonal(gaps, np.inf)
    gap = float(np.min(gaps))
    if not gap > 2.0 * abs(rho) + margin:
        raise DomainError(
            f"Radius ρ={rho:.6g} is not admissible: minimal center gap {gap:.6g} must exceed 2|ρ|+{margin:g}"
        )


@lru_cache(maxsize=64)
def _offdiag_kernel(rho: float, zeta_k: complex, zeta_j: complex, n_nodes: int) -> NDArray[np.complex128]:
    """Trapezoid weights of the smooth kernel coupling circle j into the trace on circle k"""
    sigma = unit_nodes(n_nodes)
    tau = sigma[:, None]
    kernel = rho * sigma[None, :] / (n_nodes * (rho * (sigma[None, :] - tau) + zeta_j - zeta_k))
    return _frozen(kernel)


def trace_values(rho: float, centers: ArrayLike, values: ArrayLike, k: int) -> NDArray[np.complex128]:
    """Trace 𝒵_k^ρ of the layer potential generated by complex grid densities ``values``

    The diagonal term is the exact multiplier 𝒞; the couplings to the other circles
    use the trapezoid rule on the same nodes.
    """
    centers = np.asarray(centers, dtype=complex)
    values = np.asarray(values, dtype=complex)
    trace = cauchy_values(values[k])
    if rho == 0.0:
        return trace
    n_nodes = values.shape[-1]
    for j in range(centers.size):
        if j != k:
            kernel = _offdiag_kernel(float(rho), complex(centers[k]), complex(centers[j]), n_nodes)
            trace = trace + kernel @ values[j]
    return trace


def traces(rho: float, centers: ArrayLike, values: ArrayLike) -> NDArray[np.complex128]:
    """All traces 𝒵_1..𝒵_M at once, shape ``(M, N_q)``"""
    return np.stack([trace_values(rho, centers, values, k) for k in range(len(values))])


def trace_Z(rho: float, cfg, mu: DensityVector, k: int, n_nodes: int | None = None) -> GridFunction:
    """Boundary trace 𝒵_k^ρ[μ](τ) = 𝒵^ρ[μ](ζ_k + ρτ)

    :param rho: Common circle radius.

    :param cfg: :class:`~vortexforge.pointvortex.VortexConfiguration` giving the centers.

    :param mu: Real densities, one per circle.

    :param k: Index of the circle (0-based).

    :param n_nodes: Quadrature size, ``4N`` by default.

    :return: Complex :class:`GridFunction` on circle ``k``.
    """
    n_nodes = n_nodes or 4 * mu.N
    check_admissible(rho, cfg.centers)
    return GridFunction(trace_values(rho, cfg.centers, mu.grid_values(n_nodes), k))


def field_Z(rho: float, cfg, mu: DensityVector, zeta, n_nodes: int | None = None):
    """Trapezoid evaluation of the layer potential 𝒵^ρ[μ] at exterior points

    Points within ``0.05ρ`` of a circle are refused with :class:`NearSingularityError`;
    use :func:`multipole_Z` there.
    """
    n_nodes = n_nodes or 4 * mu.N
    zeta_arr = np.atleast_1d(np.asarray(zeta, dtype=complex))
    centers = np.asarray(cfg.centers, dtype=complex)
    result = np.zeros(zeta_arr.shape, dtype=complex)
    if rho != 0.0:
        distances = np.abs(zeta_arr[..., None] - centers) - abs(rho)
        closest = float(np.min(distances))
        if closest <= 0.0:
            raise DomainError(f"Point at signed distance {closest:.3e} is not exterior to the circles")
        if closest <= NEAR_BOUNDARY_BAND * abs(rho):
            raise NearSingularityError(
                f"Point at distance {closest:.3e} from a circle of radius {abs(rho):.3e} is inside the exclusion band"
            )
        sigma = unit_nodes(n_nodes)
        values = mu.grid_values(n_nodes)
        for j, zeta_j in enumerate(centers):
            weights = rho * sigma / (n_nodes * (rho * sigma[None, :] + zeta_j - zeta_arr.reshape(-1, 1)))
            result += (weights @ values[j]).reshape(zeta_arr.shape)
    if np.ndim(zeta) == 0:
        return complex(result[0])
    return result


def negative_modes_of(values: ArrayLike, count: int | None = None) -> NDArray[np.complex128]:
    """Coefficients ĝ_{-n}, n = 1..count, of complex grid values (rows are independent)"""
    values = np.asarray(values, dtype=complex)
    n_nodes = values.shape[-1]
    count = count or (n_nodes - 1) // 2
    spectrum = fft.fft(values, axis=-1) / n_nodes
    return spectrum[..., n_nodes - np.arange(1, count + 1)]


def multipole_Z(rho: float, centers: ArrayLike, negative_modes: ArrayLike, zeta, derivative: int = 0):
    """Exact exterior value of 𝒵^ρ[g] for band-limited densities

    𝒵^ρ[g](ζ) = −Σ_j Σ_n ĝ_{j,−n} (ρ/(ζ−ζ_j))^n, valid on the closed fluid domain.

    :param rho: Circle radius.

    :param centers: Circle centers.

    :param negative_modes: Array ``(M, K)`` of ĝ_{j,−n}, n = 1..K.

    :param zeta: Evaluation point(s), exterior to every circle.

    :param derivative: 0 for the field, 1 for its ζ-derivative.
    """
    centers = np.asarray(centers, dtype=complex)
    negative_modes = np.atleast_2d(np.asarray(negative_modes, dtype=complex))
    zeta_arr = np.asarray(zeta, dtype=complex)
    result = np.zeros(zeta_arr.shape, dtype=complex)
    if rho == 0.0:
        return result if zeta_arr.ndim else complex(result)
    orders = np.arange(negative_modes.shape[1] + 1)
    for zeta_j, g in zip(centers, negative_modes):
        offset = zeta_arr - zeta_j
        if np.any(np.abs(offset) < abs(rho) * (1.0 - 1e-12)):
            raise DomainError("Multipole evaluation requested inside a vortex circle")
        ratio = rho / offset
        if derivative == 0:
            result = result - polynomial.polyval(ratio, np.concatenate(([0.0], g)))
        else:
            result = result + polynomial.polyval(ratio, np.concatenate(([0.0], orders[1:] * g))) / offset
    return result if zeta_arr.ndim else complex(result)


def recover_density(trace: GridFunction, N: int | None = None) -> SpectralDensity:
    """Density recovered from its trace, μ_k = 2Re(𝒞𝒵_k^ρμ)

    :param trace: Trace on one circle.

    :param N: Truncation of the result, ``n_nodes // 4`` by default.
    """
    N = N or trace.n_nodes // 4
    doubled = 2.0 * cauchy_values(trace.values).real
    return SpectralDensity(analyze(doubled, N))


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes shared by all circles for a given truncation"""

    N: int
    n_nodes: int = field(default=0)

    def __post_init__(self):
        if not self.n_nodes:
            object.__setattr__(self, "n_nodes", 4 * self.N)
        _check_resolution(self.N + 1, self.n_nodes)

    @property
    def tau(self) -> NDArray[np.complex128]:
        return unit_nodes(self.n_nodes)

    @property
    def theta(self) -> NDArray[np.float64]:
        return 2.0 * np.pi * np.arange(self.n_nodes) / self.n_nodes
