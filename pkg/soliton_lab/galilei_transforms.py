"""
Galilei symmetry of the NLS and the change of frame between the residual Z = (R, conj R) and the
modulated field U.

    (g(t) f)(x) = exp(i (gamma + v.x - t |v|^2)) f(x - 2 t v - D)

Fields are either radial samples (frames with v = D = 0 only) or values on a periodic Cartesian
box described by `CartesianSampling`, where shifts are carried out in Fourier space.
"""
from dataclasses import (
    dataclass,
    replace,
)
from functools import (
    cached_property,
)
import logging
import math
from typing import (
    Optional,
    Sequence,
    Tuple,
)

import numpy as np
from scipy import (
    fft,
)

from soliton_lab.exceptions import (
    InvalidArgument,
)
from soliton_lab.typing import (
    PairField,
)

logger = logging.getLogger(__name__)

Vector3 = Tuple[float, float, float]
ZERO3: Vector3 = (0.0, 0.0, 0.0)


def _vector3(value, name: str) -> Vector3:
    vec = np.asarray(value, dtype=float).ravel()
    if vec.size != 3 or not np.all(np.isfinite(vec)):
        raise InvalidArgument(f"{name} must be a finite 3-vector, got {value!r}")
    return tuple(float(x) for x in vec)


@dataclass(frozen=True)
class SolitonParams:
    """
    A point (gamma, v, D, alpha) on the soliton path.
    """
    gamma: float = 0.0
    v: Vector3 = ZERO3
    D: Vector3 = ZERO3
    alpha: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.gamma):
            raise InvalidArgument(f"Phase must be finite, got {self.gamma}")
        if not math.isfinite(self.alpha) or self.alpha <= 0:
            raise InvalidArgument(f"Frequency alpha must be positive, got {self.alpha}")
        object.__setattr__(self, 'gamma', float(self.gamma))
        object.__setattr__(self, 'alpha', float(self.alpha))
        object.__setattr__(self, 'v', _vector3(self.v, 'v'))
        object.__setattr__(self, 'D', _vector3(self.D, 'D'))

    @property
    def radial(self) -> bool:
        return self.v == ZERO3 and self.D == ZERO3

    def replace(self, **changes) -> 'SolitonParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class GalileiFrame:
    gamma_inf: float = 0.0
    v_inf: Vector3 = ZERO3
    D_inf: Vector3 = ZERO3
    alpha_inf: float = 1.0

    def __post_init__(self):
        # same validation as a path point
        params = SolitonParams(self.gamma_inf, self.v_inf, self.D_inf, self.alpha_inf)
        object.__setattr__(self, 'gamma_inf', params.gamma)
        object.__setattr__(self, 'v_inf', params.v)
        object.__setattr__(self, 'D_inf', params.D)
        object.__setattr__(self, 'alpha_inf', params.alpha)

    @classmethod
    def from_params(cls, params: SolitonParams) -> 'GalileiFrame':
        return cls(params.gamma, params.v, params.D, params.alpha)

    @property
    def radial(self) -> bool:
        return self.v_inf == ZERO3 and self.D_inf == ZERO3

    def omega(self, t: float) -> float:
        return -t * self.alpha_inf ** 2

    def shift(self, t: float) -> np.ndarray:
        return 2.0 * t * np.asarray(self.v_inf) + np.asarray(self.D_inf)

    def speed_squared(self) -> float:
        return float(np.dot(self.v_inf, self.v_inf))


@dataclass(frozen=True)
class CartesianSampling:
    """
    Uniform periodic box of one to three dimensions, centered at the origin.  Shifts larger than
    `padding` times the box length are refused.
    """
    lengths: Tuple[float, ...]
    counts: Tuple[int, ...]
    padding: float = 0.25

    def __post_init__(self):
        if len(self.lengths) != len(self.counts) or not 1 <= len(self.lengths) <= 3:
            raise InvalidArgument("Sampling needs one to three axes with matching lengths/counts")
        if any(length <= 0 for length in self.lengths) or any(n < 2 for n in self.counts):
            raise InvalidArgument(
                "Sampling lengths must be positive with at least two points per axis",
                {'lengths': self.lengths, 'counts': self.counts},
            )
        if not 0 < self.padding < 0.5:
            raise InvalidArgument(f"Padding must lie in (0, 0.5), got {self.padding}")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.counts)

    @cached_property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            (np.arange(n) - n // 2) * dx for n, dx in zip(self.counts, self.spacing)
        )

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing='ij'))

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        grids = [2.0 * np.pi * fft.fftfreq(n, d=dx) for n, dx in zip(self.counts, self.spacing)]
        return tuple(np.meshgrid(*grids, indexing='ij'))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k ** 2 for k in self.wavenumbers)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(self.cell_volume * np.sum(f * np.conj(g)))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(max(self.inner(f, f).real, 0.0))

    def dot(self, vector: Sequence[float]) -> np.ndarray:
        """
        v.x on the mesh for the first `dim` components of a 3-vector.
        """
        return sum(float(vector[j]) * self.mesh[j] for j in range(self.dim))


def _check_planar(sampling: CartesianSampling, vectors: Sequence[Vector3]) -> None:
    for vector in vectors:
        if any(vector[j] != 0.0 for j in range(sampling.dim, 3)):
            raise InvalidArgument(
                f"{sampling.dim}-D sampling cannot carry the vector {vector}"
            )


def fourier_shift(f: np.ndarray, shift: Sequence[float], sampling: CartesianSampling) -> np.ndarray:
    """
    f(x - shift) on the periodic box.
    """
    for j in range(sampling.dim):
        if abs(shift[j]) > sampling.padding * sampling.lengths[j]:
            raise InvalidArgument(
                "Galilei shift exceeds the sampling padding",
                {'axis': j, 'shift': float(shift[j]),
                 'limit': sampling.padding * sampling.lengths[j]},
            )
    phase = sum(k * float(a) for k, a in zip(sampling.wavenumbers, shift))
    return fft.ifftn(fft.fftn(f) * np.exp(-1j * phase))


def _phase(frame: GalileiFrame, t: float, sampling: Optional[CartesianSampling]):
    base = frame.gamma_inf - t * frame.speed_squared()
    if sampling is None:
        return np.exp(1j * base)
    return np.exp(1j * (base + sampling.dot(frame.v_inf)))


def _require_radial(frame: GalileiFrame) -> None:
    if not frame.radial:
        raise InvalidArgument(
            "Radial samples admit only frames with v = D = 0",
            {'v': frame.v_inf, 'D': frame.D_inf},
        )


def apply_galilei(frame: GalileiFrame, t: float, f: np.ndarray,
                  sampling: Optional[CartesianSampling] = None) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if sampling is None:
        _require_radial(frame)
        return _phase(frame, t, None) * f
    _check_planar(sampling, (frame.v_inf, frame.D_inf))
    return _phase(frame, t, sampling) * fourier_shift(f, frame.shift(t), sampling)


def inverse_galilei(frame: GalileiFrame, t: float, f: np.ndarray,
                    sampling: Optional[CartesianSampling] = None) -> np.ndarray:
    """
    (g(t)^-1 f)(x) = exp(-i (gamma + v.D + v.x + t |v|^2)) f(x + 2 t v + D).
    """
    f = np.asarray(f, dtype=complex)
    if sampling is None:
        _require_radial(frame)
        return np.conj(_phase(frame, t, None)) * f
    _check_planar(sampling, (frame.v_inf, frame.D_inf))
    return fourier_shift(np.conj(_phase(frame, t, sampling)) * f, -frame.shift(t), sampling)


def free_evolve(f: np.ndarray, t: float, sampling: CartesianSampling) -> np.ndarray:
    """
    exp(i t Delta) f, exact on the periodic box.
    """
    return fft.ifftn(fft.fftn(np.asarray(f, dtype=complex)) * np.exp(-1j * t * sampling.k_squared))


def gaussian_free_solution(t: float, sampling: CartesianSampling, width: float = 1.0) -> np.ndarray:
    """
    exp(i t Delta) applied to exp(-|x|^2 / (2 width^2)) in closed form.
    """
    spread = width ** 2 + 2j * t
    out = np.ones(sampling.shape, dtype=complex)
    for x in sampling.mesh:
        out = out * np.sqrt(width ** 2 / spread) * np.exp(-x ** 2 / (2.0 * spread))
    return out


def frame_change_Z_to_U(Z: PairField, frame: GalileiFrame, t: float,
                        sampling: Optional[CartesianSampling] = None) -> PairField:
    """
    U = M(t) G(t) Z with M = diag(exp(i omega), exp(-i omega)) and G acting as g^-1 on the first
    component and as its conjugate on the second, so that J-invariance is preserved.
    """
    Z = np.asarray(Z, dtype=complex)
    omega = frame.omega(t)
    first = np.exp(1j * omega) * inverse_galilei(frame, t, Z[0], sampling)
    second = np.exp(-1j * omega) * np.conj(inverse_galilei(frame, t, np.conj(Z[1]), sampling))
    return np.stack((first, second))


def frame_change_U_to_Z(U: PairField, frame: GalileiFrame, t: float,
                        sampling: Optional[CartesianSampling] = None) -> PairField:
    U = np.asarray(U, dtype=complex)
    omega = frame.omega(t)
    first = apply_galilei(frame, t, np.exp(-1j * omega) * U[0], sampling)
    second = np.conj(apply_galilei(frame, t, np.exp(-1j * omega) * np.conj(U[1]), sampling))
    return np.stack((first, second))
