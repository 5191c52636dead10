"""Grid-sampled scalar fields and their CSV export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """Real values sampled on a tensor grid.

    Parameters
    ----------
    values : ndarray
        One value per grid node; shape matches ``tuple(len(c) for c in coords)``.
    coords : tuple of ndarray
        1D coordinate arrays, one per axis.
    names : tuple of str
        Axis names used as CSV column headers.
    mask : ndarray of bool, optional
        Nodes where the field is defined. ``None`` means everywhere.
    label : str
        Column header of the value column.
    """

    values: np.ndarray
    coords: tuple
    names: tuple = ("x",)
    mask: np.ndarray | None = None
    label: str = "value"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        coords = tuple(np.asarray(c, dtype=float) for c in self.coords)
        shape = tuple(len(c) for c in coords)
        if values.shape != shape:
            raise ValueError(f"values shape {values.shape} does not match grid {shape}")
        if len(self.names) != len(coords):
            raise ValueError("one name per axis required")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "coords", coords)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != shape:
                raise ValueError("mask shape mismatch")
            if not np.all(np.isfinite(values[mask])):
                raise ValueError("field values must be finite on the mask")
            object.__setattr__(self, "mask", mask)

    @property
    def ndim(self):
        return len(self.coords)

    @property
    def defined(self):
        if self.mask is None:
            return np.ones(self.values.shape, dtype=bool)
        return self.mask

    def at(self, *point):
        """Linear (1D) or bilinear (2D) interpolation at a single point."""
        if self.ndim == 1:
            return float(np.interp(point[0], self.coords[0], self.values))
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.coords, self.values, method="linear")
        return float(interp(np.array([point]))[0])

    def to_csv(self, path=None, masked_only=True, fmt="%.12e"):
        """Write ``coord_1, ..., coord_n, value`` rows in C order.

        Returns the CSV text; also writes it when ``path`` is given.
        """
        mesh = np.meshgrid(*self.coords, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        table = np.column_stack(cols)
        if masked_only and self.mask is not None:
            table = table[self.mask.ravel()]
        buf = io.StringIO()
        np.savetxt(buf, table, delimiter=",", fmt=fmt,
                   header=",".join((*self.names, self.label)), comments="")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text
