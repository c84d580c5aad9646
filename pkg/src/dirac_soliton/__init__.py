"""Pseudospectral simulator and spectral-analysis toolkit for a 3D Dirac
field coupled to a relativistic particle.

Submodules
----------
spinor_algebra      Dirac matrices, Gaussian charge density, Wiener function.
field_grid          Periodic-grid spinor fields, transforms, propagators.
soliton_manifold    Soliton construction and the tangent-vector basis.
symplectic_geometry Symplectic form, Omega(v) matrix, manifold projection.
coupled_dynamics    Nonlinear time integration and modulation tracking.
linearized_spectral Linearized operator and the resolvent matrix objects.
experiments         Decay, persistence and scattering experiment drivers.
cli                 Command-line entry point.
"""

__version__ = "0.1.0"
