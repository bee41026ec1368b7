"""Containers shared between modules."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Measured:
    """A value with a one-standard-deviation uncertainty."""
    value: float
    sigma: float = 0.0

    def __iter__(self):
        return iter((self.value, self.sigma))

    def __format__(self, spec):
        spec = spec or ".4g"
        return f"{self.value:{spec}} ± {self.sigma:{spec}}"


@dataclass
class Spectrum:
    """Ordered axis with counts and optional per-bin uncertainty.

    ``axis_unit`` names the abscissa ("nm", "MHz", "rad/s"); ``metadata``
    carries the string key=value header of spectrum files.
    """
    axis: np.ndarray
    counts: np.ndarray
    sigma: np.ndarray | None = None
    axis_unit: str = "nm"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.counts.shape:
                raise DomainError("sigma must match counts")
        if self.axis.shape != self.counts.shape or self.axis.ndim != 1:
            raise DomainError("axis and counts must be 1-d arrays of equal length")

    def __len__(self):
        return len(self.axis)

    def window(self, lo, hi):
        keep = (self.axis >= lo) & (self.axis <= hi)
        return Spectrum(self.axis[keep], self.counts[keep],
                        None if self.sigma is None else self.sigma[keep],
                        self.axis_unit, dict(self.metadata))

    def meta_float(self, key, default=None):
        if key not in self.metadata:
            return default
        return float(self.metadata[key])

    def scaled(self, factor):
        return Spectrum(self.axis, self.counts * factor,
                        None if self.sigma is None else self.sigma * abs(factor),
                        self.axis_unit, dict(self.metadata))


@dataclass
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise DomainError("x and y must be 1-d arrays of equal length")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.y.shape:
                raise DomainError("sigma must match y")
            if np.any(self.sigma <= 0):
                raise DomainError("sigma must be strictly positive")

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_spectrum(cls, spectrum):
        return cls(spectrum.axis, spectrum.counts, spectrum.sigma)
