"""
Detection outputs from a scan: the significance map (smallest significant
scale covering each pixel), the union of significant regions and a
segmentation that keeps only the smallest significant scale.

Rasters hold cardinalities in pixels, 0 meaning "not significant". A physical
pixel size adds areas to the region list and the scan summary; rasters stay
in pixels.
"""

from dataclasses import dataclass

import numpy as np

from errors import DomainError
from statistic import reject_regions


NOT_SIGNIFICANT = 0


@dataclass(frozen=True)
class SignificanceMap:
    raster: np.ndarray  # int64, minimum covering cardinality or 0
    coverage: np.ndarray  # bool, union of significant regions
    regions: list  # Rejection records in scan order
    alpha: float
    eta: float
    pixel_size: float = None
    pixel_unit: str = 'px'

    @property
    def is_empty(self):
        return not self.regions

    @property
    def area_unit(self):
        """Unit of physical areas, e.g. "nm^2"; "px" without a pixel size."""
        if self.pixel_size is None:
            return 'px'
        return f"{self.pixel_unit}^{self.raster.ndim}"

    def physical_area(self, cardinality):
        """Size of `cardinality` pixels in area_unit (pixel_size^d per pixel)."""
        if self.pixel_size is None:
            return cardinality
        return cardinality * float(self.pixel_size) ** self.raster.ndim

    def physical_raster(self):
        """Raster in physical area units; 0 stays 0."""
        return self.physical_area(self.raster.astype(float))


@dataclass(frozen=True)
class Segmentation:
    mask: np.ndarray
    source_scale: int  # smallest significant cardinality, None for an empty map


def rasterize(rejections, n, d):
    """
    Fold rejected regions into (raster, coverage).
    Overlapping regions keep the smaller cardinality.
    """
    shape = (n,) * d
    sentinel = np.iinfo(np.int64).max
    smallest = np.full(shape, sentinel, dtype=np.int64)

    for rejection in rejections:
        window = rejection.region.slices()
        np.minimum(smallest[window], rejection.region.cardinality, out=smallest[window])

    coverage = smallest != sentinel
    raster = np.where(coverage, smallest, NOT_SIGNIFICANT)
    return raster, coverage


def significance_map(result, table, alpha, pixel_size=None, pixel_unit='px'):
    """
    Threshold a scan at eta = q_{1-alpha} and build the significance map.

    Every region with calibrated value >= eta is significant; the family-wise
    error rate of the map is then asymptotically at most alpha.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if pixel_size is not None and pixel_size <= 0:
        raise DomainError(f"pixel_size must be > 0, got {pixel_size}")

    eta = table.quantile(alpha)
    rejections = reject_regions(result, eta)
    raster, coverage = rasterize(rejections, result.system.n, result.system.d)

    return SignificanceMap(
        raster=raster,
        coverage=coverage,
        regions=rejections,
        alpha=alpha,
        eta=eta,
        pixel_size=pixel_size,
        pixel_unit=pixel_unit,
    )


def segment(significance):
    """Mask of the pixels labelled with the smallest cardinality present in the map."""
    raster = significance.raster
    if not raster.any():
        return Segmentation(mask=np.zeros(raster.shape, dtype=bool), source_scale=None)

    smallest = int(raster[raster > NOT_SIGNIFICANT].min())
    return Segmentation(mask=raster == smallest, source_scale=smallest)
