"""
Steady point-vortex configurations: evaluation, differentiation, classification
and solution of the system V(Λ) = 0, plus the Helmholtz–Kirchhoff dynamics.

The residual uses the convention

    V_k(Λ) = Σ_{j≠k} γ_j/(2πi) · 1/(ζ_k − ζ_j) − c + iΩ conj(ζ_k),

under which ∂_t conj(z_k) = Σ_{j≠k} γ_j/(2πi) · 1/(z_k − z_j).
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from time import time
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from vortexforge.exceptions import (
    CollisionError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    InputError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

#: Singular values below this fraction of the largest one count as zero
RANK_THRESHOLD = 1e-9

#: Relative tolerance used to decide that a configuration is steady
STEADY_TOLERANCE = 1e-10

#: Number of identities explaining the rank deficit, per kind of steady state
EXPECTED_CODIM = {"translating": 1, "rotating": 1, "stationary": 3}

#: Frame coordinates that must stay fixed for each steady kind
FRAME_FIXED = {"translating": ["omega"], "rotating": ["c"], "stationary": ["c", "omega"]}

_TWO_PI_I = 2j * np.pi


def coordinate_names(M: int) -> list[str]:
    """Names of the 3M+2 real coordinates of Λ, in storage order"""
    names = [f"gamma{k}" for k in range(1, M + 1)]
    for k in range(1, M + 1):
        names += [f"re_zeta{k}", f"im_zeta{k}"]
    return names + ["c", "omega"]


class ParameterSplit:
    """Partition of the real coordinates of Λ into the varying block λ and the fixed block λ′

    :param varying: Names of the varying coordinates (see :func:`coordinate_names`).

    :param M: Number of vortices.
    """

    def __init__(self, varying: Sequence[str], M: int):
        names = coordinate_names(M)
        varying = list(varying)
        unknown = [name for name in varying if name not in names]
        if unknown:
            raise InputError(f"Unknown coordinate names {unknown}; valid names are {names}")
        if len(set(varying)) != len(varying):
            raise InputError(f"Repeated coordinate names in {varying}")
        self._M = M
        self._varying = sorted(varying, key=names.index)

    @property
    def M(self) -> int:
        """Number of vortices"""
        return self._M

    @property
    def varying(self) -> list[str]:
        """Names in the λ block"""
        return list(self._varying)

    @property
    def fixed(self) -> list[str]:
        """Names in the λ′ block"""
        return [name for name in coordinate_names(self._M) if name not in self._varying]

    @property
    def indices(self) -> NDArray[np.int_]:
        """Positions of the varying coordinates inside the full coordinate vector"""
        names = coordinate_names(self._M)
        return np.array([names.index(name) for name in self._varying], dtype=int)

    def __len__(self):
        return len(self._varying)

    def to_dict(self) -> dict:
        return {"varying": self.varying}

    @classmethod
    def from_dict(cls, data: dict, M: int) -> "ParameterSplit":
        if "varying" not in data:
            raise InputError("Split object needs a 'varying' list")
        return cls(data["varying"], M)

    def __eq__(self, other):
        return isinstance(other, ParameterSplit) and other.M == self.M and other.varying == self.varying

    def __repr__(self):
        return f"ParameterSplit(varying={self._varying})"


class VortexConfiguration:
    """Parameter vector Λ = (γ₁..γ_M, ζ₁..ζ_M, c, Ω) of a point-vortex configuration

    Instances are treated as values: every modifying operation returns a new object.

    :param circulations: Circulations γ_k.

    :param centers: Complex centers ζ_k.

    :param wave_speed: Translation speed c of the steady frame.

    :param angular_velocity: Angular velocity Ω of the steady frame.

    :param split: Optional :class:`ParameterSplit` travelling with the configuration.
    """

    def __init__(
        self,
        circulations: ArrayLike,
        centers: ArrayLike,
        wave_speed: float = 0.0,
        angular_velocity: float = 0.0,
        split: ParameterSplit | None = None,
    ):
        gammas = np.array(circulations, dtype=float).reshape(-1)
        zetas = np.array(centers, dtype=complex).reshape(-1)
        if gammas.size < 1:
            raise InputError("A configuration needs at least one vortex")
        if gammas.size != zetas.size:
            raise InputError(f"Got {gammas.size} circulations for {zetas.size} centers")
        if not (np.all(np.isfinite(gammas)) and np.all(np.isfinite(zetas))):
            raise InputError("Circulations and centers must be finite")
        gammas.setflags(write=False)
        zetas.setflags(write=False)
        self._gammas = gammas
        self._centers = zetas
        self._c = float(wave_speed)
        self._omega = float(angular_velocity)
        if split is not None and split.M != gammas.size:
            raise InputError(f"Split built for M={split.M} used with M={gammas.size}")
        self._split = split

    @property
    def M(self) -> int:
        """Number of vortices"""
        return self._gammas.size

    @property
    def circulations(self) -> NDArray[np.float64]:
        """Circulations γ_k"""
        return self._gammas

    @property
    def centers(self) -> NDArray[np.complex128]:
        """Centers ζ_k"""
        return self._centers

    @property
    def wave_speed(self) -> float:
        """c"""
        return self._c

    @property
    def angular_velocity(self) -> float:
        """Ω"""
        return self._omega

    @property
    def split(self) -> ParameterSplit | None:
        """The attached parameter split, if any"""
        return self._split

    def coordinates(self) -> NDArray[np.float64]:
        """All 3M+2 real coordinates in the order of :func:`coordinate_names`"""
        interleaved = np.column_stack([self._centers.real, self._centers.imag]).reshape(-1)
        return np.concatenate([self._gammas, interleaved, [self._c, self._omega]])

    @classmethod
    def from_coordinates(cls, values: ArrayLike, M: int, split: ParameterSplit | None = None):
        values = np.asarray(values, dtype=float)
        if values.size != 3 * M + 2:
            raise InputError(f"Expected {3 * M + 2} coordinates, got {values.size}")
        centers = values[M : 3 * M : 2] + 1j * values[M + 1 : 3 * M : 2]
        return cls(values[:M], centers, values[-2], values[-1], split=split)

    def with_coordinates(self, values: ArrayLike, indices: ArrayLike) -> "VortexConfiguration":
        """Copy with the coordinates at ``indices`` replaced by ``values``"""
        coordinates = self.coordinates()
        coordinates[np.asarray(indices, dtype=int)] = values
        return VortexConfiguration.from_coordinates(coordinates, self.M, split=self._split)

    def varying_values(self, split: ParameterSplit | None = None) -> NDArray[np.float64]:
        split = split or self._split
        if split is None:
            raise PreconditionError("Configuration has no parameter split")
        return self.coordinates()[split.indices]

    def with_split(self, split: ParameterSplit | None) -> "VortexConfiguration":
        return VortexConfiguration(self._gammas, self._centers, self._c, self._omega, split=split)

    def scale(self) -> float:
        """Magnitude used for relative tolerances"""
        return float(max(1.0, np.max(np.abs(self.coordinates()))))

    def min_gap(self) -> float:
        if self.M < 2:
            return float("inf")
        gaps = np.abs(self._centers[:, None] - self._centers[None, :])
        np.fill_diagonal(gaps, np.inf)
        return float(np.min(gaps))

    def to_dict(self) -> dict:
        data = {
            "gammas": [float(g) for g in self._gammas],
            "centers": [[float(z.real), float(z.imag)] for z in self._centers],
            "c": self._c,
            "omega": self._omega,
        }
        if self._split is not None:
            data["split"] = self._split.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "VortexConfiguration":
        """Builds a configuration from its JSON object"""
        try:
            gammas = [float(g) for g in data["gammas"]]
            centers = [complex(float(re), float(im)) for re, im in data["centers"]]
            c = float(data.get("c", 0.0))
            omega = float(data.get("omega", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"Malformed configuration object: {exc}") from exc
        split = None
        if data.get("split") is not None:
            split = ParameterSplit.from_dict(data["split"], len(gammas))
        return cls(gammas, centers, c, omega, split=split)

    @classmethod
    def from_serialized(cls, input_path: str | Path) -> "VortexConfiguration":
        """Reads a configuration JSON file"""
        input_path = Path(input_path)
        if not input_path.exists():
            raise InputError(f"File {input_path} not found")
        try:
            with open(input_path, "r", encoding="utf-8") as fl:
                data = json.load(fl)
        except json.JSONDecodeError as exc:
            raise InputError(f"File {input_path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def __eq__(self, other):
        return (
            isinstance(other, VortexConfiguration)
            and np.array_equal(self.coordinates(), other.coordinates())
            and self._split == other.split
        )

    def __repr__(self):
        return (
            f"VortexConfiguration(gammas={self._gammas.tolist()}, centers={self._centers.tolist()}, "
            f"c={self._c}, omega={self._omega})"
        )


class SteadyKind(Enum):
    TRANSLATING = "translating"
    ROTATING = "rotating"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class SteadyClass:
    """Classification of a steady configuration with respect to a split"""

    kind: SteadyKind
    codim: int
    nondegenerate: bool
    rank: int = 0
    ambiguous: bool = False
    singular_values: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "codim": self.codim,
            "nondegenerate": self.nondegenerate,
            "rank": self.rank,
            "ambiguous": self.ambiguous,
        }


def steady_kind(cfg: VortexConfiguration) -> SteadyKind:
    """Kind of steady frame implied by (c, Ω)"""
    if cfg.wave_speed != 0.0 and cfg.angular_velocity != 0.0:
        raise PreconditionError(
            f"Both c={cfg.wave_speed} and Ω={cfg.angular_velocity} are nonzero; no steady class applies"
        )
    if cfg.wave_speed != 0.0:
        return SteadyKind.TRANSLATING
    if cfg.angular_velocity != 0.0:
        return SteadyKind.ROTATING
    return SteadyKind.STATIONARY


def pairwise_offsets(centers: ArrayLike) -> NDArray[np.complex128]:
    """Matrix of ζ_k − ζ_j (rows k), with the diagonal set to ``inf``"""
    centers = np.asarray(centers, dtype=complex)
    offsets = centers[:, None] - centers[None, :]
    scale = max(1.0, float(np.max(np.abs(centers), initial=0.0)))
    magnitudes = np.abs(offsets)
    np.fill_diagonal(magnitudes, np.inf)
    if centers.size > 1 and np.min(magnitudes) <= 1e-14 * scale:
        j, k = np.unravel_index(np.argmin(magnitudes), magnitudes.shape)
        raise DomainError(f"Centers {j + 1} and {k + 1} coincide: |ζ_j−ζ_k|={magnitudes[j, k]:.3e}")
    np.fill_diagonal(offsets, np.inf)
    return offsets


def interaction_velocities(cfg: VortexConfiguration) -> NDArray[np.complex128]:
    """Σ_{j≠k} γ_j/(2πi) · 1/(ζ_k − ζ_j) for every k"""
    offsets = pairwise_offsets(cfg.centers)
    return (1.0 / offsets) @ (cfg.circulations / _TWO_PI_I)


def eval_pv_residual(cfg: VortexConfiguration) -> NDArray[np.complex128]:
    """Residual (V_1, …, V_M) of the steady point-vortex system

    :param cfg: Configuration Λ.

    :return: Complex array, zero exactly when Λ is steady.
    """
    return interaction_velocities(cfg) - cfg.wave_speed + 1j * cfg.angular_velocity * np.conj(cfg.centers)


def pv_velocity(cfg: VortexConfiguration, k: int) -> complex:
    """∂_t conj(z_k) in the laboratory frame (``k`` is 0-based)"""
    return complex(interaction_velocities(cfg)[k])


def check_pv_identities(cfg: VortexConfiguration) -> tuple[complex, complex]:
    """Defects of the translation and rotation identities satisfied by every Λ

    Σγ_kV_k = −cΣγ_k + iΩΣγ_k conj(ζ_k) and
    Σγ_kζ_kV_k = (1/2πi)Σ_{j<k}γ_jγ_k − cΣγ_kζ_k + iΩΣγ_k|ζ_k|².
    """
    gammas, centers = cfg.circulations, cfg.centers
    c, omega = cfg.wave_speed, cfg.angular_velocity
    residual = eval_pv_residual(cfg)
    translation = np.sum(gammas * residual) - (-c * np.sum(gammas) + 1j * omega * np.sum(gammas * np.conj(centers)))
    pair_sum = (np.sum(gammas) ** 2 - np.sum(gammas**2)) / 2.0
    rotation = np.sum(gammas * centers * residual) - (
        pair_sum / _TWO_PI_I - c * np.sum(gammas * centers) + 1j * omega * np.sum(gammas * np.abs(centers) ** 2)
    )
    return complex(translation), complex(rotation)


def _residual_vector(residual: NDArray[np.complex128]) -> NDArray[np.float64]:
    return np.column_stack([residual.real, residual.imag]).reshape(-1)


def full_jacobian(cfg: VortexConfiguration) -> NDArray[np.float64]:
    """Real Jacobian of (Re V_1, Im V_1, …) with respect to all 3M+2 coordinates"""
    M = cfg.M
    gammas, centers, omega = cfg.circulations, cfg.centers, cfg.angular_velocity
    offsets = pairwise_offsets(centers)
    inverse = 1.0 / offsets
    columns = np.zeros((M, 3 * M + 2), dtype=complex)
    columns[:, :M] = inverse / _TWO_PI_I
    # holomorphic derivative of V_k with respect to ζ_j
    d_zeta = (inverse**2) * (gammas[None, :] / _TWO_PI_I)
    np.fill_diagonal(d_zeta, -np.sum(d_zeta, axis=1))
    for j in range(M):
        d_re = d_zeta[:, j].copy()
        d_im = 1j * d_zeta[:, j]
        d_re[j] += 1j * omega
        d_im[j] += omega
        columns[:, M + 2 * j] = d_re
        columns[:, M + 2 * j + 1] = d_im
    columns[:, -2] = -1.0
    columns[:, -1] = 1j * np.conj(centers)
    real = np.empty((2 * M, 3 * M + 2))
    real[0::2] = columns.real
    real[1::2] = columns.imag
    return real


def pv_jacobian(cfg: VortexConfiguration, split: ParameterSplit | None = None) -> NDArray[np.float64]:
    """Real Jacobian of V with respect to the varying coordinates

    :param cfg: Configuration Λ.

    :param split: Parameter split, defaults to the one attached to ``cfg``.

    :return: Matrix of shape ``(2M, |varying|)``, rows (Re V_1, Im V_1, Re V_2, …).
    """
    split = split or cfg.split
    if split is None:
        raise PreconditionError("A parameter split is required to differentiate V")
    return full_jacobian(cfg)[:, split.indices]


def identity_functional(cfg: VortexConfiguration, kind: SteadyKind | None = None) -> NDArray[np.float64]:
    """Rows of the φ⁰ maps as linear functionals of (Re V_1, Im V_1, …)

    φ⁰_t = Im Σγ_kV_k, φ⁰_r = Re Σγ_kζ_kV_k, φ⁰_s = (Re Σγ_kV_k, Im Σγ_kV_k, φ⁰_r).
    """
    kind = kind or steady_kind(cfg)
    gammas, centers = cfg.circulations, cfg.centers
    M = cfg.M
    rotation = np.zeros(2 * M)
    rotation[0::2] = gammas * centers.real
    rotation[1::2] = -gammas * centers.imag
    if kind is SteadyKind.ROTATING:
        return rotation[None, :]
    imaginary = np.zeros(2 * M)
    imaginary[1::2] = gammas
    if kind is SteadyKind.TRANSLATING:
        return imaginary[None, :]
    real = np.zeros(2 * M)
    real[0::2] = gammas
    return np.vstack([real, imaginary, rotation])


def is_steady(cfg: VortexConfiguration, tol: float = STEADY_TOLERANCE) -> bool:
    return bool(np.max(np.abs(eval_pv_residual(cfg))) <= tol * cfg.scale())


def classify_nondegeneracy(cfg: VortexConfiguration, split: ParameterSplit | None = None) -> SteadyClass:
    """Steady kind, codimension and non-degeneracy of a steady configuration

    :param cfg: A steady configuration.

    :param split: Parameter split, defaults to the one attached to ``cfg``.

    :return: The :class:`SteadyClass`; ``ambiguous`` flags a singular value close to the threshold.
    """
    split = split or cfg.split
    if split is None:
        raise PreconditionError("A parameter split is required for the classification")
    if not is_steady(cfg):
        defect = float(np.max(np.abs(eval_pv_residual(cfg))))
        raise PreconditionError(f"Configuration is not steady: ‖V‖∞ = {defect:.3e}")
    kind = steady_kind(cfg)
    clashing = [name for name in FRAME_FIXED[kind.value] if name in split.varying]
    if clashing:
        raise PreconditionError(f"Coordinates {clashing} must stay fixed for a {kind.value} configuration")

    jacobian = pv_jacobian(cfg, split)
    singular_values = linalg.svdvals(jacobian) if jacobian.size else np.zeros(0)
    top = float(singular_values[0]) if singular_values.size else 0.0
    threshold = RANK_THRESHOLD * top
    rank = int(np.sum(singular_values > threshold))
    ambiguous = bool(np.any((singular_values > threshold / 10.0) & (singular_values < 10.0 * threshold)))
    if ambiguous:
        logger.warning("Numerically ambiguous rank for %s: singular values %s", split, singular_values)
    codim = 2 * cfg.M - rank
    nondegenerate = codim == EXPECTED_CODIM[kind.value] and rank == len(split)
    return SteadyClass(kind, codim, nondegenerate, rank, ambiguous, tuple(float(s) for s in singular_values))


def slack_directions(functional: NDArray[np.float64]) -> NDArray[np.int_]:
    """Coordinates whose minor of the identity functional is best conditioned (pivoted QR)"""
    _, _, pivots = linalg.qr(functional, pivoting=True)
    return np.sort(pivots[: functional.shape[0]])


def solve_steady_pv(
    seed: VortexConfiguration,
    split: ParameterSplit | None = None,
    max_iter: int = 50,
    tol: float = 1e-12,
    max_halvings: int = 30,
) -> VortexConfiguration:
    """Newton solve of V(λ, λ′) = 0 for λ with the λ′ block of ``seed`` held fixed

    The map is augmented with a slack 𝒵₁ spanned by the coordinate directions selected
    by :func:`slack_directions`, which makes the system square; the identities force
    the slack to vanish at the solution.

    :param seed: Initial configuration.

    :param split: Parameter split, defaults to the one attached to ``seed``.

    :return: A steady configuration with the same λ′ and split.
    """
    split = split or seed.split
    if split is None:
        raise PreconditionError("A parameter split is required to solve for λ")
    start = time()
    kind = steady_kind(seed)
    clashing = [name for name in FRAME_FIXED[kind.value] if name in split.varying]
    if clashing:
        raise InputError(f"Cannot vary {clashing} in a {kind.value} solve")
    functional = identity_functional(seed, kind)
    codim = functional.shape[0]
    M = seed.M
    if len(split) + codim != 2 * M:
        raise PreconditionError(
            f"A {kind.value} solve with M={M} needs {2 * M - codim} varying coordinates, got {len(split)}"
        )
    slack_idx = slack_directions(functional)
    slack_basis = np.eye(2 * M)[:, slack_idx]

    indices = split.indices
    base = seed.with_split(split)
    lam = base.coordinates()[indices]
    slack = np.zeros(codim)

    def residual_of(lam_values, slack_values):
        cfg = base.with_coordinates(lam_values, indices)
        return cfg, _residual_vector(eval_pv_residual(cfg)) - slack_basis @ slack_values

    cfg, residual = residual_of(lam, slack)
    trace = [float(np.max(np.abs(residual)))]
    for iteration in range(max_iter + 1):
        if trace[-1] < tol * cfg.scale():
            break
        if iteration == max_iter:
            raise ConvergenceError(
                f"Point-vortex Newton did not converge in {max_iter} iterations", trace[-1], trace
            )
        jacobian = np.hstack([pv_jacobian(cfg, split), -slack_basis])
        if np.linalg.cond(jacobian) > 1e12:
            raise DegeneracyError("Augmented point-vortex Jacobian is singular", trace[-1], trace)
        step = linalg.solve(jacobian, -residual)
        factor = 1.0
        for _ in range(max_halvings + 1):
            trial_cfg, trial = residual_of(lam + factor * step[: len(split)], slack + factor * step[len(split) :])
            if np.max(np.abs(trial)) < trace[-1]:
                break
            factor /= 2.0
        else:
            raise ConvergenceError("Line search failed in point-vortex Newton", trace[-1], trace)
        lam = lam + factor * step[: len(split)]
        slack = slack + factor * step[len(split) :]
        cfg, residual = trial_cfg, trial
        trace.append(float(np.max(np.abs(residual))))
        logger.debug("pv newton iteration %d: residual %.3e, step factor %g", iteration + 1, trace[-1], factor)

    if np.max(np.abs(slack), initial=0.0) >= tol * cfg.scale():
        raise ConvergenceError(f"Slack did not vanish: {slack}", trace[-1], trace)
    logger.info(
        "Steady %s configuration solved in %d iterations (residual %.2e) in %.3f s",
        kind.value,
        len(trace) - 1,
        trace[-1],
        time() - start,
    )
    return cfg


def _hk_rhs(gammas: NDArray[np.float64], z: NDArray[np.complex128]) -> NDArray[np.complex128]:
    offsets = z[:, None] - z[None, :]
    np.fill_diagonal(offsets, np.inf)
    return np.conj((1.0 / offsets) @ (gammas / _TWO_PI_I))


def advance_dynamics(
    cfg: VortexConfiguration, dt: float, steps: int, min_separation: float = 1e-6
) -> NDArray[np.complex128]:
    """Classical fourth-order Runge–Kutta integration of the Helmholtz–Kirchhoff system

    :param cfg: Initial configuration (c and Ω are ignored: the motion is computed in the laboratory frame).

    :param dt: Time step.

    :param steps: Number of steps.

    :param min_separation: The run aborts with :class:`CollisionError` below this separation.

    :return: Array of shape ``(steps + 1, M)`` with the centers at every step.
    """
    if not np.isfinite(dt * steps):
        raise InputError(f"Non finite integration horizon dt={dt}, steps={steps}")
    gammas = cfg.circulations
    trajectory = np.empty((steps + 1, cfg.M), dtype=complex)
    z = np.array(cfg.centers, dtype=complex)
    trajectory[0] = z
    for n in range(steps):
        k1 = _hk_rhs(gammas, z)
        k2 = _hk_rhs(gammas, z + 0.5 * dt * k1)
        k3 = _hk_rhs(gammas, z + 0.5 * dt * k2)
        k4 = _hk_rhs(gammas, z + dt * k3)
        z = z + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        trajectory[n + 1] = z
        if cfg.M > 1:
            gaps = np.abs(z[:, None] - z[None, :])
            np.fill_diagonal(gaps, np.inf)
            if np.min(gaps) < min_separation:
                raise CollisionError(
                    f"Vortices came within {np.min(gaps):.3e} at step {n + 1}", trajectory[: n + 2].copy()
                )
    return trajectory


def pv_invariants(cfg: VortexConfiguration) -> tuple[float, complex, float]:
    """Hamiltonian, linear impulse Σγ_kζ_k and angular impulse Σγ_k|ζ_k|² of the configuration"""
    gammas, centers = cfg.circulations, cfg.centers
    hamiltonian = 0.0
    for k in range(cfg.M):
        for j in range(k):
            hamiltonian -= gammas[j] * gammas[k] * np.log(abs(centers[j] - centers[k]) ** 2) / (4.0 * np.pi)
    return float(hamiltonian), complex(np.sum(gammas * centers)), float(np.sum(gammas * np.abs(centers) ** 2))
