"""Memoryless sources, channels, posteriors and single-letter rate quantities.

Sources and channels are per-index tables, so non-stationary and
asymmetric models cost nothing extra.  All probability accounting is in
the log2 domain; exact zeros stay zero.

Channel output alphabets may be finite (per-index pmf tables) or real
valued (a density evaluator plus sampler; binary-input AWGN ships as the
reference model) since decoding only ever consumes likelihoods.
"""

from dataclasses import dataclass

import numpy as np

from .stats import entropy_bits

_PMF_TOL = 1e-9


def _check_pmfs(pmfs: np.ndarray, what: str) -> np.ndarray:
    pmfs = np.asarray(pmfs, dtype=float)
    if pmfs.ndim != 2:
        raise ValueError(f"{what} must be a (n, q) table")
    if np.any(pmfs < 0):
        raise ValueError(f"{what} has negative entries")
    if np.any(np.abs(pmfs.sum(axis=1) - 1.0) > _PMF_TOL):
        raise ValueError(f"{what} rows must sum to 1 within {_PMF_TOL}")
    return pmfs


class MemorylessSource:
    """Product law on X^n given per-index pmfs over an alphabet of size q."""

    def __init__(self, pmfs):
        self.pmfs = _check_pmfs(pmfs, "source pmfs")
        self.n, self.q = self.pmfs.shape

    def log_prob(self, x) -> float:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n,):
            raise ValueError("sequence length mismatch")
        if x.min() < 0 or x.max() >= self.q:
            raise ValueError("symbol outside the source alphabet")
        p = self.pmfs[np.arange(self.n), x]
        if np.any(p == 0):
            return float("-inf")
        return float(np.log2(p).sum())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.pmfs, axis=1)
        u = rng.random(self.n)
        return np.minimum((u[:, None] >= cdf).sum(axis=1), self.q - 1).astype(np.int64)


class DiscreteChannel:
    """Per-index kernels mu_{Y_i|X_i} over a finite output alphabet."""

    continuous = False

    def __init__(self, kernels):
        kernels = np.asarray(kernels, dtype=float)
        if kernels.ndim != 3:
            raise ValueError("kernels must be a (n, q, ny) table")
        if np.any(kernels < 0) or np.any(np.abs(kernels.sum(axis=2) - 1.0) > _PMF_TOL):
            raise ValueError(f"kernel rows must be pmfs within {_PMF_TOL}")
        self.kernels = kernels
        self.n, self.q, self.ny = kernels.shape

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        x = self._check_input(x)
        rows = self.kernels[np.arange(self.n), x]
        cdf = np.cumsum(rows, axis=1)
        u = rng.random(self.n)
        return np.minimum((u[:, None] >= cdf).sum(axis=1), self.ny - 1).astype(np.int64)

    def log_lik(self, y, x) -> float:
        x = self._check_input(x)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (self.n,) or y.min() < 0 or y.max() >= self.ny:
            raise ValueError("output outside the channel alphabet")
        p = self.kernels[np.arange(self.n), x, y]
        if np.any(p == 0):
            return float("-inf")
        return float(np.log2(p).sum())

    def lik_rows(self, y) -> np.ndarray:
        """(n, q) array of mu_{Y_i|X_i}(y_i|.) for an observed y."""
        y = np.asarray(y, dtype=np.int64)
        return self.kernels[np.arange(self.n), :, y]

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n,) or x.min() < 0 or x.max() >= self.q:
            raise ValueError("input outside the channel alphabet")
        return x


class BiAwgnChannel:
    """Binary-input AWGN: 0 -> +1, 1 -> -1, y = s + sigma Z."""

    continuous = True

    def __init__(self, sigma: float, n: int):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.n = int(n)
        self.q = 2

    def sample(self, x, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.n,):
            raise ValueError("input length mismatch")
        s = 1.0 - 2.0 * x
        return s + self.sigma * rng.standard_normal(self.n)

    def density(self, y: np.ndarray) -> np.ndarray:
        """(n, 2) per-index densities of y_i under x_i = 0, 1."""
        y = np.asarray(y, dtype=float)
        s = np.array([1.0, -1.0])
        z = (y[:, None] - s[None, :]) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * np.sqrt(2 * np.pi))

    def log_lik(self, y, x) -> float:
        x = np.asarray(x, dtype=np.int64)
        d = self.density(y)[np.arange(self.n), x]
        return float(np.log2(d).sum())

    def lik_rows(self, y) -> np.ndarray:
        return self.density(y)


@dataclass
class ReverseModel:
    """Per-index Bayes posteriors mu_{X_i|Y_i}(.|y_i) plus the prior marginals."""

    posteriors: np.ndarray  # (n, q)
    priors: np.ndarray      # (n, q)


def reverse_model(prior_pmfs, channel, y) -> ReverseModel:
    """Posteriors prop. to mu_{X_i} * mu_{Y_i|X_i}(y_i|.), one index at a time."""
    priors = _check_pmfs(prior_pmfs, "prior pmfs")
    lik = channel.lik_rows(y)
    if lik.shape != priors.shape:
        raise ValueError("prior and channel kernel shapes disagree")
    unnorm = priors * lik
    evid = unnorm.sum(axis=1)
    dead = np.nonzero(evid == 0)[0]
    if dead.size:
        raise ValueError(f"zero evidence at index {int(dead[0])}: all-zero posterior")
    return ReverseModel(unnorm / evid[:, None], priors)


@dataclass
class RateQuantities:
    """Position-averaged single-letter quantities in bits per symbol."""

    h_x: float
    h_x_given_y: float
    i_xy: float


def rate_quantities(prior_pmfs, channel, quad_nodes: int = 101) -> RateQuantities:
    priors = _check_pmfs(prior_pmfs, "prior pmfs")
    n = priors.shape[0]
    h_x = float(np.mean([entropy_bits(priors[i]) for i in range(n)]))
    if not channel.continuous:
        h_xy = 0.0
        for i in range(n):
            joint = priors[i][:, None] * channel.kernels[i]
            p_y = joint.sum(axis=0)
            for yv in range(channel.ny):
                if p_y[yv] > 0:
                    h_xy += p_y[yv] * entropy_bits(joint[:, yv] / p_y[yv])
        h_xy /= n
    else:
        h_xy = _h_x_given_y_biawgn(priors, channel, quad_nodes) / n
    return RateQuantities(h_x, h_xy, h_x - h_xy)


def _h_x_given_y_biawgn(priors, channel: BiAwgnChannel, quad_nodes: int) -> float:
    # Gauss-Hermite (probabilists') quadrature over y = s_x + sigma z
    nodes, weights = np.polynomial.hermite_e.hermegauss(quad_nodes)
    weights = weights / np.sqrt(2 * np.pi)
    s = np.array([1.0, -1.0])
    total = 0.0
    for i in range(priors.shape[0]):
        # E_y[H(X|Y=y)] expanded over the two conditional laws of y
        hi = 0.0
        for xv in range(2):
            y = s[xv] + channel.sigma * nodes
            z = (y[:, None] - s[None, :]) / channel.sigma
            dens = np.exp(-0.5 * z * z) / (channel.sigma * np.sqrt(2 * np.pi))
            post = priors[i][None, :] * dens
            post_sum = post.sum(axis=1)
            post = post / post_sum[:, None]
            plogp = np.where(post > 0, post * np.log2(post), 0.0)
            h_given = -plogp.sum(axis=1)
            hi += priors[i, xv] * float((weights * h_given).sum())
        total += hi
    return total


class DistortionSpec:
    """Additive per-letter distortion given by a finite X x Y table."""

    def __init__(self, table):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ValueError("distortion table must be finite and nonnegative")
        self.table = table

    def total(self, x, y) -> float:
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if x.shape != y.shape:
            raise ValueError("length mismatch")
        return float(self.table[x, y].sum())


def hamming_distortion(q: int) -> DistortionSpec:
    return DistortionSpec(1.0 - np.eye(q))


# -- named presets -------------------------------------------------------------


def bsc(p: float, n: int) -> DiscreteChannel:
    k = np.array([[1 - p, p], [p, 1 - p]])
    return DiscreteChannel(np.broadcast_to(k, (n, 2, 2)).copy())


def bac(p01: float, p10: float, n: int) -> DiscreteChannel:
    k = np.array([[1 - p01, p01], [p10, 1 - p10]])
    return DiscreteChannel(np.broadcast_to(k, (n, 2, 2)).copy())


def qsc(q: int, p: float, n: int) -> DiscreteChannel:
    k = np.full((q, q), p / (q - 1))
    np.fill_diagonal(k, 1 - p)
    return DiscreteChannel(np.broadcast_to(k, (n, q, q)).copy())


def biawgn(sigma: float, n: int) -> BiAwgnChannel:
    return BiAwgnChannel(sigma, n)


def uniform_source(n: int, q: int) -> MemorylessSource:
    return MemorylessSource(np.full((n, q), 1.0 / q))


def bernoulli_source(p: float, n: int) -> MemorylessSource:
    return MemorylessSource(np.broadcast_to([1 - p, p], (n, 2)).copy())


def nonstationary_source(path, n: int | None = None) -> MemorylessSource:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"no pmfs found in {path}")
    pmfs = np.asarray(rows, dtype=float)
    if n is not None and pmfs.shape[0] != n:
        raise ValueError(f"{path} lists {pmfs.shape[0]} pmfs, expected {n}")
    return MemorylessSource(pmfs)


def parse_channel(text: str, n: int):
    """Channel presets: bsc(p), bac(p01,p10), qsc(q,p), biawgn(sigma)."""
    name, args = _parse_call(text)
    if name == "bsc":
        (p,) = args
        return bsc(float(p), n)
    if name == "bac":
        p01, p10 = args
        return bac(float(p01), float(p10), n)
    if name == "qsc":
        qv, p = args
        return qsc(int(qv), float(p), n)
    if name == "biawgn":
        (sigma,) = args
        return biawgn(float(sigma), n)
    raise ValueError(f"unknown channel preset {text!r}")


def parse_source(text: str, n: int, q: int) -> MemorylessSource:
    """Source presets: uniform, bernoulli(p), nonstationary(file)."""
    if text.strip() == "uniform":
        return uniform_source(n, q)
    name, args = _parse_call(text)
    if name == "bernoulli":
        if q != 2:
            raise ValueError("bernoulli preset needs q = 2")
        (p,) = args
        return bernoulli_source(float(p), n)
    if name == "nonstationary":
        (path,) = args
        src = nonstationary_source(path, n)
        if src.q != q:
            raise ValueError("pmf width does not match q")
        return src
    raise ValueError(f"unknown source preset {text!r}")


def _parse_call(text: str):
    text = text.strip()
    if "(" not in text or not text.endswith(")"):
        raise ValueError(f"expected name(args), got {text!r}")
    name, inner = text[:-1].split("(", 1)
    args = [a.strip() for a in inner.split(",")] if inner.strip() else []
    return name.strip(), args
