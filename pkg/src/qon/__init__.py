"""Entanglement routing with storage-assisted overlays.

Subpackages and modules:

* :mod:`qon.topology`    graphs, link parameters, storage selection, paths
* :mod:`qon.overlay`     virtual links between storage pairs and path expansion
* :mod:`qon.fidelity`    Werner swapping and DEJMPS purification cost
* :mod:`qon.lp`          LP model, revised simplex and LP-file export
* :mod:`qon.formulation` scenario assembly, LP builders, schedules
* :mod:`qon.workload`    spike demand generation and capacity normalisation
* :mod:`qon.experiment`  batch sweeps and metrics
"""

__version__ = "0.1.0"
