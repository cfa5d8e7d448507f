"""RIS phase profiles, aperture reflectivity and the on/off reflection schedule."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .scenario import SPEED_OF_LIGHT, CodeTiming

TWO_PI = 2.0 * math.pi


class RisMode(str, enum.Enum):
    BACK_REFLECT = "back-reflect"
    SPECULAR = "specular"
    RANDOM_SCATTER = "random"
    OFF = "off"


NON_REFLECTING = (RisMode.SPECULAR, RisMode.RANDOM_SCATTER, RisMode.OFF)


@dataclass(frozen=True)
class RisProfile:
    """One phase configuration of an M-element square RIS.

    ``leakage_power_ratio`` is the residual monostatic power of a non-reflecting
    profile relative to back-reflection (0 for an ideal switch).
    """

    element_count: int
    mode: RisMode
    phases: np.ndarray
    leakage_power_ratio: float = 0.0

    def __post_init__(self):
        if len(self.phases) != self.element_count:
            raise ConfigError("ris_elements", "phase vector length differs from element count")

    @property
    def side(self) -> int:
        return math.isqrt(self.element_count)

    @property
    def reflecting(self) -> bool:
        return self.mode is RisMode.BACK_REFLECT

    def diagonal(self) -> np.ndarray:
        """Diagonal entries of the reflection matrix Phi."""
        return np.exp(1j * self.phases)


def wrap_phase(x) -> np.ndarray:
    """Reduce to [0, 2*pi); tiny negative inputs would otherwise round up to exactly 2*pi."""
    w = np.mod(x, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


def _check_square(m: int) -> int:
    side = math.isqrt(int(m))
    if m < 1 or side * side != m:
        raise ConfigError("ris_elements", f"{m} is not a perfect square")
    return side


def ris_grid(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Element indices (u, v) flattened with u varying fastest."""
    side = _check_square(m)
    v, u = np.divmod(np.arange(m), side)
    return u, v


def backreflect_phases(m: int, theta_rad: float, psi_rad: float) -> RisProfile:
    """Phase profile returning a wave incident from (theta, psi) back to its source."""
    u, v = ris_grid(m)
    gamma = -math.pi * (u * math.cos(theta_rad) * math.sin(psi_rad)
                        + v * math.sin(theta_rad) * math.sin(psi_rad))
    return RisProfile(m, RisMode.BACK_REFLECT, wrap_phase(gamma))


def nonreflect_phases(m: int, variant: str = "random", rng=None,
                      leakage_power_ratio: float = 0.0) -> RisProfile:
    """Bit-0 configuration: constant phase (specular) or i.i.d. uniform phases."""
    _check_square(m)
    if variant == "specular":
        return RisProfile(m, RisMode.SPECULAR, np.zeros(m), leakage_power_ratio)
    if variant == "random":
        if rng is None:
            raise ValueError("random non-reflecting profile needs an rng")
        return RisProfile(m, RisMode.RANDOM_SCATTER, rng.uniform(0.0, TWO_PI, m), leakage_power_ratio)
    raise ConfigError("nonreflect_variant", f"unknown variant {variant!r}")


def coherent_sum(profile: RisProfile, theta_rad: float, psi_rad: float) -> complex:
    """Monostatic RIS response a_M^T Phi a_M for incidence (theta, psi)."""
    from .channels import ArrayGeometry, steering_ris

    a = steering_ris(ArrayGeometry.ris(profile.element_count), theta_rad, psi_rad)
    return complex(np.sum(a * profile.diagonal() * a))


def ris_reflectivity(m: int, f0: float) -> float:
    """Physical reflectivity (m^2) of a perfectly back-scattering M-element RIS."""
    if m < 1:
        raise ConfigError("ris_elements", "must be >= 1")
    return math.pi * SPEED_OF_LIGHT**2 * m**2 / (2**6 * f0**2)


def ris_side_length(m: int, f0: float) -> float:
    """Side of a square RIS with lambda/4 element spacing."""
    return math.sqrt(m) * SPEED_OF_LIGHT / f0 / 4.0


def schedule_reflection(codeword, timing: CodeTiming, incidence: tuple[float, float], m: int,
                        variant: str = "random", rng=None,
                        leakage_power_ratio: float = 0.0) -> list[RisProfile]:
    """One profile per bit period: back-reflection for 1, non-reflection for 0.

    The RIS toggles between exactly two configurations, so every bit-1 entry is the
    same back-reflect profile object and every bit-0 entry the same bit-0 profile.
    """
    codeword = np.asarray(codeword)
    if len(codeword) != timing.code_length:
        raise ConfigError("code_length", f"codeword length {len(codeword)} != {timing.code_length}")
    on = backreflect_phases(m, *incidence)
    off = nonreflect_phases(m, variant, rng, leakage_power_ratio)
    return [on if bit else off for bit in codeword]
