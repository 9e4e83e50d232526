"""Point-dipole forward model of a single magnetic taxel.

A disc magnet sits above a tri-axial Hall chip; applied force displaces the
magnet through a diagonal linear compliance and the chip sees the dipole
field of the magnet. Closed forms replace finite-element simulation: with a
vertical moment and pure x-shear, bx is extremal at dx = z0/2 and bz is
stationary at dx = 2*z0, and field magnitude falls off as 1/z0^3.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ForceVector

MU0_OVER_4PI = 1e-7  # T*m/A

# mm, vertical gap between cavity ceiling and the Hall chip die. Chosen so
# the bx extremum (z0/2) sits past the 3 mm inter-taxel gap at h = 6 mm.
CHIP_OFFSET_MM = 1.5


class SingularFieldError(ValueError):
    """Magnet center coincides with the sensor location."""


@dataclass(frozen=True)
class TaxelGeometry:
    """Structural dimensions of one taxel, mm."""

    wall_thickness: float = 2.5
    width: float = 12.0
    cavity_height: float = 1.5875  # 1/16 in
    magnet_height: float = 6.0
    chip_offset: float = CHIP_OFFSET_MM

    def __post_init__(self):
        for name in ("wall_thickness", "width", "cavity_height", "magnet_height", "chip_offset"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def sensor_standoff(self) -> float:
        """z0: rest distance from magnet center down to the Hall chip, mm."""
        return self.cavity_height + self.magnet_height / 2.0 + self.chip_offset


@dataclass(frozen=True)
class DipoleParams:
    """Equivalent point-dipole of the disc magnet."""

    moment: float = 0.01  # A*m^2; gives a rest bz of order 10 mT
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.moment <= 0:
            raise ValueError("moment must be positive")
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("direction must be unit-norm")


@dataclass(frozen=True)
class FluxSample:
    """Flux density at the chip, mT."""

    bx: float
    by: float
    bz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz])


@dataclass(frozen=True)
class StiffnessModel:
    """Diagonal compliance of the silicone structure, N/mm.

    Defaults keep the full force range (+-2 N shear, -7 N normal) under
    1.5 mm of travel, well clear of the 3 mm inter-taxel gap and stiff
    enough that a quadratic flux-to-force fit is a good inverse.
    """

    kx: float = 1.5
    ky: float = 1.5
    kz: float = 5.0

    def __post_init__(self):
        if min(self.kx, self.ky, self.kz) <= 0:
            raise ValueError("stiffnesses must be positive")


def dipole_flux(
    displacement: tuple[float, float, float],
    geom: TaxelGeometry = TaxelGeometry(),
    dip: DipoleParams = DipoleParams(),
) -> FluxSample:
    """Flux at the chip for a magnet displaced (dx, dy, dz) mm from rest.

    B(r) = (mu0/4pi) * (3(m.rhat)rhat - m) / |r|^3 with r the sensor-to-
    magnet-center vector; vertical component of r is z0 - dz.
    """
    dx, dy, dz = displacement
    r = np.array([dx, dy, geom.sensor_standoff - dz]) * 1e-3  # m
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise SingularFieldError("magnet center coincides with the sensor")
    rhat = r / dist
    m_vec = dip.moment * np.asarray(dip.direction, dtype=float)
    b_tesla = MU0_OVER_4PI * (3.0 * np.dot(m_vec, rhat) * rhat - m_vec) / dist**3
    bx, by, bz = (b_tesla * 1e3).tolist()  # mT
    return FluxSample(bx, by, bz)


@dataclass(frozen=True)
class SweepCurve:
    """Flux vs pure x-shear for one magnet height."""

    magnet_height: float
    shear_mm: np.ndarray
    bx: np.ndarray
    bz: np.ndarray


def flux_sweep(
    heights: list[float],
    shear_max: float,
    steps: int,
    geom: TaxelGeometry = TaxelGeometry(),
    dip: DipoleParams = DipoleParams(),
) -> list[SweepCurve]:
    """Tabulate (bx, bz) along pure x-shear for each magnet height."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if shear_max <= 0:
        raise ValueError("shear_max must be positive")
    shears = np.linspace(0.0, shear_max, steps)
    curves = []
    for h in heights:
        g = TaxelGeometry(
            wall_thickness=geom.wall_thickness,
            width=geom.width,
            cavity_height=geom.cavity_height,
            magnet_height=h,
            chip_offset=geom.chip_offset,
        )
        samples = [dipole_flux((d, 0.0, 0.0), g, dip) for d in shears]
        curves.append(
            SweepCurve(
                magnet_height=h,
                shear_mm=shears,
                bx=np.array([s.bx for s in samples]),
                bz=np.array([s.bz for s in samples]),
            )
        )
    return curves


def force_to_displacement(f: ForceVector, k: StiffnessModel = StiffnessModel()) -> tuple[float, float, float]:
    """Linear compliance: displacement (mm) per axis is force / stiffness."""
    return (f.fx / k.kx, f.fy / k.ky, f.fz / k.kz)


def simulate_taxel(
    f: ForceVector,
    geom: TaxelGeometry = TaxelGeometry(),
    dip: DipoleParams = DipoleParams(),
    k: StiffnessModel = StiffnessModel(),
) -> FluxSample:
    """Force -> displacement -> flux forward model for one taxel."""
    return dipole_flux(force_to_displacement(f, k), geom, dip)
