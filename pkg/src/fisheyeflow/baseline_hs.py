"""Coarse-to-fine Horn-Schunck optical flow.

Each pyramid level warps the second image towards the first with the current
flow, linearizes brightness constancy around it and runs Jacobi sweeps of the
Horn-Schunck update on the total flow::

    u <- u_avg - Ix * (Ix * (u_avg - u0) + Iy * (v_avg - v0) + It) / (alpha^2 + Ix^2 + Iy^2)

where ``(u0, v0)`` is the flow the image was warped with and ``u_avg`` is the
mean over the in-domain 4-neighbors. With zero initial flow this is the
classic single-scale update.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .flowio import FlowField

LUMA = np.array([0.299, 0.587, 0.114])


class DegenerateInputWarning(UserWarning):
    """Both images are constant; there is no motion information."""


@dataclass(frozen=True)
class HSParams:
    alpha: float = 15.0
    iterations: int = 400
    pyramid_levels: int = 4
    warp_per_level: int = 2
    # Gaussian pre-smoothing of the input and before each decimation
    sigma: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.warp_per_level < 1:
            raise ValueError("warp_per_level must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


def to_gray(image) -> np.ndarray:
    """Luma of an RGB image (or the image itself if already 2-D), as float64."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return image[..., :3] @ LUMA
    return image


@numba.njit(cache=True)
def _sweep(a, b, an, bn, u0, v0, ix, iy, it, wgt, inv, den):
    h = a.shape[0] - 2
    w = a.shape[1] - 2
    for i in range(1, h + 1):
        for j in range(1, w + 1):
            q = inv[i - 1, j - 1]
            ub = (wgt[i - 1, j] * a[i - 1, j] + wgt[i + 1, j] * a[i + 1, j]
                  + wgt[i, j - 1] * a[i, j - 1] + wgt[i, j + 1] * a[i, j + 1]) * q
            vb = (wgt[i - 1, j] * b[i - 1, j] + wgt[i + 1, j] * b[i + 1, j]
                  + wgt[i, j - 1] * b[i, j - 1] + wgt[i, j + 1] * b[i, j + 1]) * q
            gx = ix[i - 1, j - 1]
            gy = iy[i - 1, j - 1]
            k = (gx * (ub - u0[i - 1, j - 1]) + gy * (vb - v0[i - 1, j - 1]) + it[i - 1, j - 1]) * den[i - 1, j - 1]
            m = wgt[i, j]
            an[i, j] = m * (ub - gx * k)
            bn[i, j] = m * (vb - gy * k)


@numba.njit(cache=True)
def _jacobi(u, v, u0, v0, ix, iy, it, domain, alpha2, iterations):
    h, w = u.shape
    # padded copies: neighbors outside the image or domain get weight 0
    wgt = np.zeros((h + 2, w + 2))
    for i in range(h):
        for j in range(w):
            if domain[i, j]:
                wgt[i + 1, j + 1] = 1.0
    inv = np.zeros((h, w))
    den = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            c = wgt[i, j + 1] + wgt[i + 2, j + 1] + wgt[i + 1, j] + wgt[i + 1, j + 2]
            inv[i, j] = 1.0 / c if c > 0 else 0.0
            den[i, j] = 1.0 / (alpha2 + ix[i, j] ** 2 + iy[i, j] ** 2)
    a = np.zeros((h + 2, w + 2))
    b = np.zeros((h + 2, w + 2))
    a[1:h + 1, 1:w + 1] = u
    b[1:h + 1, 1:w + 1] = v
    an = a.copy()
    bn = b.copy()
    for _ in range(iterations):
        _sweep(a, b, an, bn, u0, v0, ix, iy, it, wgt, inv, den)
        a, an = an, a
        b, bn = bn, b
    # bn/an hold the previous iterate after the final swap
    resid = 0.0
    for i in range(1, h + 1):
        for j in range(1, w + 1):
            d = max(abs(a[i, j] - an[i, j]), abs(b[i, j] - bn[i, j]))
            if d > resid:
                resid = d
    return a[1:h + 1, 1:w + 1].copy(), b[1:h + 1, 1:w + 1].copy(), resid


def hs_iterate(u, v, u0, v0, ix, iy, it, domain, alpha, iterations):
    """Run Jacobi sweeps; returns ``(u, v, residual)`` where ``residual`` is
    the max-norm change of the last sweep."""
    return _jacobi(
        np.ascontiguousarray(u, np.float64), np.ascontiguousarray(v, np.float64),
        np.ascontiguousarray(u0, np.float64), np.ascontiguousarray(v0, np.float64),
        np.ascontiguousarray(ix, np.float64), np.ascontiguousarray(iy, np.float64),
        np.ascontiguousarray(it, np.float64), np.ascontiguousarray(domain, np.bool_),
        float(alpha) ** 2, int(iterations),
    )


def _smooth(img, domain, sigma):
    """Gaussian blur normalized over the domain, so outside pixels don't bleed in."""
    if sigma <= 0:
        return img
    d = domain.astype(np.float64)
    num = ndimage.gaussian_filter(img * d, sigma, mode="nearest")
    den = ndimage.gaussian_filter(d, sigma, mode="nearest")
    return np.where(domain, np.divide(num, den, out=np.zeros_like(num), where=den > 0), 0.0)


def _downsample(img, domain):
    h, w = img.shape
    ph, pw = h % 2, w % 2
    img = np.pad(img * domain, ((0, ph), (0, pw)))
    dom = np.pad(domain.astype(np.float64), ((0, ph), (0, pw)))
    s = img.reshape(img.shape[0] // 2, 2, img.shape[1] // 2, 2).sum(axis=(1, 3))
    c = dom.reshape(dom.shape[0] // 2, 2, dom.shape[1] // 2, 2).sum(axis=(1, 3))
    return np.divide(s, c, out=np.zeros_like(s), where=c > 0), c > 0


def _upsample_flow(f, shape):
    up = ndimage.zoom(f, 2, order=1, mode="nearest", grid_mode=True)
    up = np.pad(up, ((0, max(0, shape[0] - up.shape[0])), (0, max(0, shape[1] - up.shape[1]))), mode="edge")
    return 2.0 * up[:shape[0], :shape[1]]


def _warp(img, u, v):
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest")


def _level_flow(i1, i2, domain, u, v, params: HSParams):
    resid = 0.0
    for _ in range(params.warp_per_level):
        i2w = _warp(i2, u, v)
        gy1, gx1 = np.gradient(i1)
        gy2, gx2 = np.gradient(i2w)
        ix = np.where(domain, 0.5 * (gx1 + gx2), 0.0)
        iy = np.where(domain, 0.5 * (gy1 + gy2), 0.0)
        it = np.where(domain, i2w - i1, 0.0)
        u, v, resid = hs_iterate(u, v, u.copy(), v.copy(), ix, iy, it, domain, params.alpha, params.iterations)
    return u, v, resid


def hs_estimate(img1, img2, params: HSParams | None = None, domain=None) -> FlowField:
    """Estimate flow from ``img1`` to ``img2``.

    Images may be RGB or grayscale. ``domain`` restricts the estimate (and the
    neighbor averaging) to a set of pixels, typically the image circle;
    pixels outside it are returned invalid.
    """
    params = params or HSParams()
    i1, i2 = to_gray(img1), to_gray(img2)
    if i1.shape != i2.shape:
        raise ValueError(f"image dimensions differ: {i1.shape} vs {i2.shape}")
    domain = np.ones(i1.shape, bool) if domain is None else np.asarray(domain, dtype=bool)
    if domain.shape != i1.shape:
        raise ValueError("domain mask does not match the images")

    if not np.any(domain) or (np.ptp(i1[domain]) == 0 and np.ptp(i2[domain]) == 0):
        warnings.warn("constant input images, returning zero flow", DegenerateInputWarning, stacklevel=2)
        return FlowField.zeros(*i1.shape, valid=domain)

    i1 = _smooth(i1, domain, params.sigma)
    i2 = _smooth(i2, domain, params.sigma)
    pyramid = [(i1, i2, domain)]
    for _ in range(params.pyramid_levels - 1):
        a, b, d = pyramid[-1]
        if min(a.shape) < 8:
            break
        a2, d2 = _downsample(_smooth(a, d, params.sigma), d)
        b2, _ = _downsample(_smooth(b, d, params.sigma), d)
        pyramid.append((a2, b2, d2))

    u = np.zeros(pyramid[-1][0].shape)
    v = np.zeros_like(u)
    for level in range(len(pyramid) - 1, -1, -1):
        a, b, d = pyramid[level]
        if u.shape != a.shape:
            u = _upsample_flow(u, a.shape)
            v = _upsample_flow(v, a.shape)
        u = np.where(d, u, 0.0)
        v = np.where(d, v, 0.0)
        u, v, _ = _level_flow(a, b, d, u, v, params)
    return FlowField(u, v, domain)
