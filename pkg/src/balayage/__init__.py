"""Balayage of discretised charges with respect to finite harmonic and
subharmonic test families."""

from .checker import (BalayageVerdict, MassReport, NotACandidate, PreconditionError,
                      SweepResult, check, mass_relations, polar_witness_sweep,
                      verify_arens_singer, verify_jensen)
from .construct import (ConstructionError, ShiftFamily, TableFamily, convolution_balayage,
                        family_integral_balayage, harmonic_measure_ball, jensen_mixture,
                        smooth)
from .geom import Ball, Diff, PoleError, Union, annulus, constants, invert, kelvin_value
from .hull import GridMask, HullDisagreement, components, inward_filled_hull, koc_check, rasterize
from .lyons import LyonsFixture, build_example5, hull_equality_fixture, verify_example5
from .measure import (DiscreteCharge, NotFlattened, UndefinedIntegral, ball_mass, coalesce,
                      convolve, integrate, jordan, mix, pushforward, restrict, shift, total_mass)
from .testfn import (Family, harmonic_family, harmonic_poly_basis, point_potential,
                     riesz_measure_grid, smooth_family, subharmonic_family, truncate)

__version__ = "0.1.0"
