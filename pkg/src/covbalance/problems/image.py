"""Pixel-parametrised image problems with L1 and structural-similarity losses."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from covbalance.problems.base import Problem, problem_rng

C1 = 0.01**2
C2 = 0.03**2


def global_ssim(x, y, c1=C1, c2=C2):
    """Single-window SSIM using whole-image means, variances and covariance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    vx, vy, cxy = (dx * dx).mean(), (dy * dy).mean(), (dx * dy).mean()
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def global_ssim_grad(x, y, c1=C1, c2=C2):
    """SSIM value and its gradient with respect to ``x`` (same shape as ``x``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    vx, vy, cxy = (dx * dx).mean(), (dy * dy).mean(), (dx * dy).mean()
    a1 = 2 * mx * my + c1
    a2 = 2 * cxy + c2
    b1 = mx * mx + my * my + c1
    b2 = vx + vy + c2
    s = (a1 * a2) / (b1 * b2)
    # d/dx_k of each factor; the centred terms already absorb the mean's dependence
    da1 = 2 * my / n
    da2 = 2 * dy / n
    db1 = 2 * mx / n
    db2 = 2 * dx / n
    grad = s * (da1 / a1 + da2 / a2 - db1 / b1 - db2 / b2)
    return s, grad


def avg_pool(img, factor):
    if factor == 1:
        return img
    h, w = img.shape
    if h % factor or w % factor:
        raise ValueError(f"image {h}x{w} is not divisible by pooling factor {factor}")
    return img.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def avg_pool_adjoint(grad, factor):
    """Pull a gradient on the pooled image back to full resolution."""
    if factor == 1:
        return grad
    return np.kron(grad, np.ones((factor, factor))) / (factor * factor)


def smoothness(img):
    """Mean squared horizontal plus vertical forward differences, and gradient."""
    gx = img[:, 1:] - img[:, :-1]
    gy = img[1:, :] - img[:-1, :]
    value = (gx * gx).mean() + (gy * gy).mean()
    grad = np.zeros_like(img)
    ex = 2 * gx / gx.size
    ey = 2 * gy / gy.size
    grad[:, 1:] += ex
    grad[:, :-1] -= ex
    grad[1:, :] += ey
    grad[:-1, :] -= ey
    return value, grad


def check_target(target, min_side=8):
    t = np.asarray(target, dtype=float)
    if t.ndim != 2 or min(t.shape) < min_side:
        raise ValueError(f"target image must be at least {min_side}x{min_side}, got shape {t.shape}")
    if not np.all(np.isfinite(t)) or t.min() < 0 or t.max() > 1:
        raise ValueError("target pixel values must lie in [0, 1]")
    return t


def read_pgm(path) -> np.ndarray:
    """Load a binary (P5) graymap as floats in [0, 1]."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(2) != b"P5":
            raise ValueError(f"{path}: not a binary PGM (P5) file")
    with Image.open(path) as im:
        arr = np.asarray(im)
        maxval = 65535.0 if arr.dtype == np.uint16 or im.mode.startswith("I") else 255.0
    return arr.astype(float) / maxval


def write_pgm(path, img):
    img = check_target(img, min_side=1)
    Image.fromarray(np.round(img * 255).astype(np.uint8), mode="L").save(path, format="PPM")


def synthetic_image(size=16, seed=0):
    """Smooth random pattern in [0, 1]: a few low-frequency sinusoids."""
    rng = problem_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size))
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        img += np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    img = (img - img.min()) / (img.max() - img.min())
    return 0.1 + 0.8 * img


class PixelHeads:
    """Per-scale prediction heads for pixel-parametrised problems.

    A head at scale ``s`` holds ``n_images`` images downsampled by ``2**s``.
    Expanding a head by nearest-neighbour upsampling gives full-resolution
    parameters whose ``2**s`` average pool is the head itself, so the base
    losses at scale ``s`` evaluated on the expansion are the losses of the
    head.
    """

    supports_heads = True
    n_images = 1

    def head_shape(self, scale):
        k = 2**scale
        h, w = self.shape
        if h % k or w % k:
            raise ValueError(f"image {h}x{w} is not divisible by 2**{scale}")
        return h // k, w // k

    def head_dim(self, scale) -> int:
        h, w = self.head_shape(scale)
        return self.n_images * h * w

    def expand(self, head, scale):
        k = 2**scale
        h, w = self.head_shape(scale)
        imgs = head.reshape(self.n_images, h, w)
        return np.repeat(np.repeat(imgs, k, axis=1), k, axis=2).ravel()

    def expand_adjoint(self, grad, scale):
        """Transpose of :meth:`expand`; accepts a leading batch axis."""
        k = 2**scale
        h, w = self.head_shape(scale)
        g = np.asarray(grad)
        lead = g.shape[:-1]
        return g.reshape(lead + (self.n_images, h, k, w, k)).sum(axis=(-3, -1)).reshape(lead + (-1,))

    def pool(self, params, scale):
        imgs = params.reshape((self.n_images,) + self.shape)
        return np.concatenate([avg_pool(img, 2**scale).ravel() for img in imgs])

    def initial_head(self, rng, scale):
        if rng is None:
            return np.full(self.head_dim(scale), 0.5)
        return rng.uniform(0.25, 0.75, self.head_dim(scale))


class ImageFitProblem(PixelHeads, Problem):
    """Fit pixels to a target image under mean-L1 and DSSIM = (1 - SSIM) / 2.

    Parameters are the flattened predicted image. ``noise`` adds fresh
    Gaussian noise to the target at every step when an rng is given.
    """

    supports_scales = True

    def __init__(self, target, noise=0.0):
        self.target = check_target(target)
        if not noise >= 0:
            raise ValueError("noise must be >= 0")
        self.noise = float(noise)
        self.shape = self.target.shape
        self.parameter_dim = self.target.size
        self.loss_names = ["l1", "dssim"]
        self.optimum = self.target.ravel().copy()

    def draw(self, rng, step=1):
        if rng is None or self.noise == 0.0:
            return self.target
        return self.target + self.noise * rng.standard_normal(self.shape)

    def evaluate_sample(self, params, sample, scale=0):
        k = 2**scale
        x = avg_pool(params.reshape(self.shape), k)
        y = avg_pool(sample, k)
        diff = x - y
        l1 = np.abs(diff).mean()
        g_l1 = np.sign(diff) / diff.size
        s, g_s = global_ssim_grad(x, y)
        losses = np.array([l1, (1.0 - s) / 2.0])
        grads = np.stack([avg_pool_adjoint(g_l1, k).ravel(), avg_pool_adjoint(-g_s / 2.0, k).ravel()])
        return losses, grads

    def initial_params(self, rng=None):
        if rng is None:
            return np.full(self.parameter_dim, 0.5)
        return rng.uniform(0.25, 0.75, self.parameter_dim)


class StereoImageProblem(PixelHeads, Problem):
    """Left/right image pair with the four loss families of a stereo depth objective.

    Parameters are the two predicted images, left then right. Per side:

    - ``l1``: mean absolute error against that side's target
    - ``dssim``: ``(1 - SSIM) / 2`` against that side's target
    - ``lr``: mean squared left-right consistency residual, where the
      right image shifted by ``shift`` columns should match the left one
    - ``disp``: smoothness of the prediction (squared finite differences);
      the loss attenuated by ``1/2**s`` in a multiscale composite

    ``lr`` and ``disp`` are auxiliary: they do not depend on the targets
    and are satisfied by trivial predictions.
    """

    supports_scales = True
    n_images = 2
    KINDS = ("l1", "dssim", "lr", "disp")
    SIDES = ("left", "right")

    def __init__(self, left_target, right_target=None, noise=0.0, shift=1):
        self.left = check_target(left_target)
        self.shift = int(shift)
        if right_target is None:
            right_target = np.roll(self.left, -self.shift, axis=1)
        self.right = check_target(right_target)
        if self.right.shape != self.left.shape:
            raise ValueError("left and right targets must have equal shape")
        if not noise >= 0:
            raise ValueError("noise must be >= 0")
        self.noise = float(noise)
        self.shape = self.left.shape
        self.parameter_dim = 2 * self.left.size
        self.loss_names = [f"{kind}_{side}" for side in self.SIDES for kind in self.KINDS]
        self.designated_losses = (3, 7)
        self.optimum = np.concatenate([self.left.ravel(), self.right.ravel()])

    def draw(self, rng, step=1):
        if rng is None or self.noise == 0.0:
            return self.left, self.right
        return (
            self.left + self.noise * rng.standard_normal(self.shape),
            self.right + self.noise * rng.standard_normal(self.shape),
        )

    def _side_losses(self, x, target, k):
        xp = avg_pool(x, k)
        diff = xp - avg_pool(target, k)
        l1 = np.abs(diff).mean()
        g_l1 = avg_pool_adjoint(np.sign(diff) / diff.size, k)
        s, g_s = global_ssim_grad(xp, avg_pool(target, k))
        g_dssim = avg_pool_adjoint(-g_s / 2.0, k)
        smooth, g_smooth = smoothness(xp)
        return (l1, g_l1), ((1.0 - s) / 2.0, g_dssim), (smooth, avg_pool_adjoint(g_smooth, k))

    def evaluate_sample(self, params, sample, scale=0):
        k = 2**scale
        n = self.left.size
        xl = params[:n].reshape(self.shape)
        xr = params[n:].reshape(self.shape)
        zero = np.zeros(self.shape)
        losses, grads = [], []
        # consistency residuals; right-side residual is the left one rolled back
        r_left = xl - np.roll(xr, self.shift, axis=1)
        r_right = xr - np.roll(xl, -self.shift, axis=1)
        for side, x, target, r in (("left", xl, sample[0], r_left), ("right", xr, sample[1], r_right)):
            (l1, g_l1), (dssim, g_dssim), (smooth, g_smooth) = self._side_losses(x, target, k)
            rp = avg_pool(r, k)
            lr = (rp * rp).mean()
            g_r = avg_pool_adjoint(2 * rp / rp.size, k)
            if side == "left":
                g_lr = (g_r, -np.roll(g_r, -self.shift, axis=1))
                own = lambda g: (g, zero)  # noqa: E731
            else:
                g_lr = (-np.roll(g_r, self.shift, axis=1), g_r)
                own = lambda g: (zero, g)  # noqa: E731
            for value, pair in ((l1, own(g_l1)), (dssim, own(g_dssim)), (lr, g_lr), (smooth, own(g_smooth))):
                losses.append(value)
                grads.append(np.concatenate([pair[0].ravel(), pair[1].ravel()]))
        return np.array(losses), np.stack(grads)

    def initial_params(self, rng=None):
        if rng is None:
            return np.full(self.parameter_dim, 0.5)
        return rng.uniform(0.25, 0.75, self.parameter_dim)
