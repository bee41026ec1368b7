"""Two-level emitter spectroscopy toolkit.

Closed-form thermal-bath model of an incoherently pumped two-level emitter,
a master-equation oracle for it, Monte Carlo photon streams, and the fitting
pipelines used to characterize single quantum dots (fine-structure splitting,
saturation, lifetimes, g2 purity, IRF-corrected and zero-power linewidths).
"""

__version__ = "0.1.0"
