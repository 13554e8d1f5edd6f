"""Closed geodesics as critical loops: search, iterate spectra, Bott checks and loop-product degrees."""
from .geodesic_search import ClosedGeodesic, minimize, refine_newton, seed_library
from .index_spectrum import (check_bott, classify_growth, index_nullity,
                             iterate_spectrum)
from .loop_space import DiscreteLoop, energy, gradient, hessian, iterate, length
from .manifold_models import build_model

__version__ = "0.1.0"
