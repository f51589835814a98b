"""Yttrium sublattice geometry and random ion placement.

Ions substitute onto the Y sites of YVO4.  A simulation region is a cube
centered on the origin whose volume is chosen so that the expected number
of occupied sites at the given doping concentration equals the requested
spin count; the site closest to the region center is always occupied and
serves as the readout spin, the remaining spins occupy sites drawn
uniformly without replacement.

Sites are enumerated over whole conventional cells and kept when they fall
inside the half-open box [-L/2, L/2) in every coordinate, which makes the
site count of a box of exactly one cell volume equal the number of basis
sites.  Enumeration order is lexicographic by cell index, then basis index,
so site lists are reproducible.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS, YVO4_BASIS, MaterialConstants
from .errors import GeometryError


@dataclass(frozen=True)
class CrystalLattice:
    """Tetragonal host lattice with its substitutional basis."""

    constants: MaterialConstants = CONSTANTS
    basis: np.ndarray = field(default_factory=lambda: YVO4_BASIS.copy())

    def __post_init__(self) -> None:
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[1] != 3:
            raise GeometryError("basis must be an (m, 3) array of fractional coords")
        if np.any(basis < 0.0) or np.any(basis >= 1.0):
            raise GeometryError("fractional coordinates must lie in [0, 1)")
        object.__setattr__(self, "basis", basis)

    @property
    def cell_lengths(self) -> np.ndarray:
        c = self.constants
        return np.array([c.a_nm, c.a_nm, c.c_nm])

    @property
    def site_density(self) -> float:
        """Substitutional sites per nm^3."""
        c = self.constants
        return self.basis.shape[0] / (c.a_nm**2 * c.c_nm)

    def min_site_distance(self) -> float:
        """Smallest distance between two sites of the infinite lattice."""
        lengths = self.cell_lengths
        best = np.inf
        shifts = np.array(
            [[i, j, k] for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)]
        )
        for p in self.basis:
            for q in self.basis:
                d = (q[None, :] + shifts - p[None, :]) * lengths[None, :]
                r = np.sqrt(np.einsum("ij,ij->i", d, d))
                r = r[r > 1e-12]
                best = min(best, float(r.min()))
        return best


@dataclass(frozen=True)
class DensitySpec:
    """Doping concentration in ppm of substitutional sites."""

    ppm: float

    def __post_init__(self) -> None:
        if not (0.0 < self.ppm <= 1e6):
            raise GeometryError("concentration must be in (0, 1e6] ppm")

    @property
    def fraction(self) -> float:
        return self.ppm * 1e-6

    def mean_distance_nm(self, constants: MaterialConstants = CONSTANTS) -> float:
        """Characteristic ion spacing <r> = c / (4 f)^(1/3).

        Equivalent to the quoted form 0.629 / ((4 n_ppm)^(1/3) x 10^-2).
        This is the spacing convention the coupling scale is defined
        against, not the literal mean nearest-neighbor distance.
        """
        return constants.c_nm / (4.0 * self.fraction) ** (1.0 / 3.0)

    def mean_coupling(self, constants: MaterialConstants = CONSTANTS) -> float:
        """Characteristic coupling J = prefactor / <r>^3, rad/us.

        Linear in concentration: J = prefactor * 4 f / c^3.
        """
        return constants.j_prefactor_nm3 / self.mean_distance_nm(constants) ** 3


@dataclass(frozen=True)
class SpinConfiguration:
    """Positions (nm) of the simulated spins; index 0 is the readout spin."""

    positions: np.ndarray
    concentration_ppm: float
    region_extent: np.ndarray
    center_index: int = 0

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError("positions must be an (N, 3) array")
        if not 0 <= self.center_index < pos.shape[0]:
            raise GeometryError("center index out of range")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(
            self, "region_extent", np.asarray(self.region_extent, dtype=np.float64)
        )

    @property
    def n_spins(self) -> int:
        return self.positions.shape[0]


def _axis_ranges(half: float, scale: float, offsets: np.ndarray):
    """Integer cell ranges [lo, hi) per basis offset covering [-half, half)."""
    lo = np.ceil(-half / scale - offsets).astype(np.int64)
    hi = np.ceil(half / scale - offsets).astype(np.int64)
    return lo, hi


def generate_sites(lattice: CrystalLattice, extent) -> np.ndarray:
    """All lattice sites inside the half-open box [-e/2, e/2)^3, ordered.

    Ordering is lexicographic by (cell i, cell j, cell k, basis index).
    Raises GeometryError when the box contains no site.
    """
    extent = np.asarray(extent, dtype=np.float64)
    if extent.shape != (3,) or np.any(extent <= 0):
        raise GeometryError("extent must be three positive lengths")
    lengths = lattice.cell_lengths
    half = extent / 2.0
    chunks = []
    order_keys = []
    for b_idx, frac in enumerate(lattice.basis):
        ranges = [
            _axis_ranges(half[ax], lengths[ax], np.array([frac[ax]]))
            for ax in range(3)
        ]
        axes = []
        for ax in range(3):
            lo, hi = int(ranges[ax][0][0]), int(ranges[ax][1][0])
            if hi <= lo:
                axes = None
                break
            axes.append(np.arange(lo, hi))
        if axes is None:
            continue
        ii, jj, kk = np.meshgrid(*axes, indexing="ij")
        cells = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        pos = (cells + frac[None, :]) * lengths[None, :]
        chunks.append(pos)
        order_keys.append(
            np.column_stack([cells, np.full(len(cells), b_idx, dtype=np.int64)])
        )
    if not chunks:
        raise GeometryError("region contains no lattice site")
    pos = np.concatenate(chunks, axis=0)
    keys = np.concatenate(order_keys, axis=0)
    order = np.lexsort((keys[:, 3], keys[:, 2], keys[:, 1], keys[:, 0]))
    return pos[order]


class _SiteBox:
    """Materialized site list for one sampling geometry, reused across draws."""

    def __init__(self, lattice: CrystalLattice, side: float):
        self.side = side
        self.sites = generate_sites(lattice, (side, side, side))
        self.n_sites = self.sites.shape[0]
        r2 = np.einsum("ij,ij->i", self.sites, self.sites)
        self.center = int(np.argmin(r2))


_BOX_CACHE: "OrderedDict[tuple, _SiteBox]" = OrderedDict()
_BOX_CACHE_MAX = 8


def _site_box(lattice: CrystalLattice, side: float) -> _SiteBox:
    key = (
        lattice.constants.a_nm,
        lattice.constants.c_nm,
        lattice.basis.shape[0],
        round(side, 9),
    )
    box = _BOX_CACHE.get(key)
    if box is None:
        box = _SiteBox(lattice, side)
        _BOX_CACHE[key] = box
        while len(_BOX_CACHE) > _BOX_CACHE_MAX:
            _BOX_CACHE.popitem(last=False)
    else:
        _BOX_CACHE.move_to_end(key)
    return box


def region_side(
    density: DensitySpec, n_spins: int, lattice: CrystalLattice | None = None
) -> float:
    """Cube side for which the expected occupied-site count equals n_spins."""
    lattice = lattice or CrystalLattice()
    volume = n_spins / (density.fraction * lattice.site_density)
    return volume ** (1.0 / 3.0)


def sample_configuration(
    rng: np.random.Generator,
    density: DensitySpec,
    n_spins: int,
    lattice: CrystalLattice | None = None,
) -> SpinConfiguration:
    """Draw one random ion configuration.

    The readout spin (index 0) always sits on the site nearest the region
    center; the other n_spins - 1 ions occupy distinct sites drawn
    uniformly.  Identical generator state reproduces the configuration bit
    for bit.
    """
    if n_spins < 1:
        raise GeometryError("need at least one spin")
    lattice = lattice or CrystalLattice()
    side = region_side(density, n_spins, lattice)
    box = _site_box(lattice, side)
    if box.n_sites < n_spins:
        raise GeometryError(
            f"region holds {box.n_sites} sites, cannot place {n_spins} spins"
        )
    chosen = [box.center]
    seen = {box.center}
    # rejection draws; collisions are vanishingly rare at ppm dilution
    while len(chosen) < n_spins:
        c = int(rng.integers(0, box.n_sites))
        if c not in seen:
            seen.add(c)
            chosen.append(c)
    positions = box.sites[np.array(chosen, dtype=np.int64)]
    return SpinConfiguration(
        positions=positions,
        concentration_ppm=density.ppm,
        region_extent=np.array([side, side, side]),
        center_index=0,
    )
