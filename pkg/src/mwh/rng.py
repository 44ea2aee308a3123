"""Seedable random stream shared by every stochastic decision in a run.

Within one training step the stream is consumed in a fixed order:
schedule decision (stage-3 threshold), then the mixing coefficient,
then the pairing permutation. Epoch shuffles happen before the first
batch of each epoch and weight init before everything else.
"""
import numpy as np

from .exceptions import ConfigError

__all__ = ["RngStream", "uniform01", "sample_gamma", "sample_beta", "permutation"]


class RngStream:
    """Single-owner wrapper around a PCG64 generator."""

    def __init__(self, seed=0):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.gen = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return f"RngStream(seed={self.seed})"

    def integers(self, high, size=None):
        """Uniform integers in [0, high)."""
        return self.gen.integers(0, high, size=size)

    def normal(self, size=None):
        return self.gen.standard_normal(size)


def uniform01(stream, size=None):
    return stream.gen.random(size)


def _gamma_ge1(stream, shape, n):
    # Marsaglia & Tsang (2000), valid for shape >= 1.
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        k = max(need + need // 4, 8)
        x = stream.gen.standard_normal(k)
        u = stream.gen.random(k)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            logv = np.where(ok, np.log(np.where(ok, v, 1.0)), -np.inf)
            accept = ok & (
                (u < 1.0 - 0.0331 * x**4)
                | (np.log(u) < 0.5 * x**2 + d * (1.0 - v + logv))
            )
        got = (d * v)[accept][:need]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def sample_gamma(stream, shape, size=None):
    """Gamma(shape, 1) variates.

    Shapes below one use the boost G(a) = G(a + 1) * U**(1/a).
    """
    if not shape > 0:
        raise ConfigError(f"gamma shape must be positive, got {shape}")
    n = 1 if size is None else int(np.prod(size))
    if shape >= 1.0:
        g = _gamma_ge1(stream, shape, n)
    else:
        g = _gamma_ge1(stream, shape + 1.0, n)
        g *= stream.gen.random(n) ** (1.0 / shape)
    if size is None:
        return float(g[0])
    return g.reshape(size)


def sample_beta(stream, alpha, size=None):
    """Symmetric Beta(alpha, alpha) draw(s) as G1 / (G1 + G2)."""
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(n)
    filled = 0
    while filled < n:
        k = n - filled
        g1 = sample_gamma(stream, alpha, k)
        g2 = sample_gamma(stream, alpha, k)
        total = g1 + g2
        # both gammas can underflow to 0 for tiny alpha; redraw those
        ok = total > 0
        lam = g1[ok] / total[ok]
        out[filled:filled + lam.size] = lam
        filled += lam.size
    if size is None:
        return float(out[0])
    return out.reshape(size)


def permutation(stream, n):
    """Uniform random permutation of range(n); empty for n == 0."""
    n = int(n)
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    return stream.gen.permutation(n)
