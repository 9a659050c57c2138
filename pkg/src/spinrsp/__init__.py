"""Exact Fock-basis simulation of remote state preparation (RSP) between
two-component spin ensembles.

The package models two atomic ensembles (e.g. two-component BECs) in the
permutation-symmetric subspace, where each ensemble of N atoms lives in an
(N+1)-dimensional Fock space.  It covers:

* collective spin operators, rotations and expectation values
  (:mod:`spinrsp.collective_spin`);
* generation of the entangled resource by two-axis two-spin (2A2S)
  squeezing, and the ideal spin-EPR resource (:mod:`spinrsp.squeezing`);
* the RSP measurement/correction protocol, outcome statistics, error
  metrics, post-selection and atom-number fluctuations
  (:mod:`spinrsp.protocol`);
* spin Wigner quasi-probability functions on the Bloch sphere
  (:mod:`spinrsp.wigner`);
* a deterministic command-line driver (:mod:`spinrsp.cli`).
"""

__version__ = "0.1.0"

from . import collective_spin, protocol, squeezing, wigner  # noqa: F401
