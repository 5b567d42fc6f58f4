"""Fixed-rate lossy source coding via coset-constrained sampling.

The encoder builds per-index reproduction posteriors for the observed
source word, samples a coset member from them, and transmits its image
under B; the decoder returns the highest-prior member of the joint coset
pinned by (c, m).  When the stacked map has full column rank the joint
coset is a single point and decoding is a linear solve, which is also
the deterministic special case through the pairing bijection.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fastbp import CosetBP
from .models import DiscreteChannel, DistortionSpec, MemorylessSource
from .sampler import EncodingError, SamplerConfig, make_engine
from .sparsemat import (
    SparseMatrix,
    all_vectors,
    complement_bijection,
    kernel_basis,
    row_reduce,
    solve_particular,
)
from .stats import entropy_bits, wilson_interval
from .streams import stream


@dataclass
class LossyCodeSpec:
    """(A, B, c) plus the source model, the given conditional mu_{X|Y},
    the per-letter distortion table and the target level."""

    A: SparseMatrix
    B: SparseMatrix
    c: np.ndarray
    source: MemorylessSource          # law of Y
    test_channel: DiscreteChannel     # per-index tables mu_{X_i|Y_i}: (n, ny, q)
    distortion: DistortionSpec        # table over X x Y
    target_d: float

    def __post_init__(self):
        q = self.A.field.q
        self.c = np.asarray(self.c, dtype=np.int64) % q
        if self.A.cols != self.B.cols or self.A.field != self.B.field:
            raise ValueError("A and B must share the domain")
        if solve_particular(self.A, self.c) is None:
            raise ValueError("c is not in Im A")
        n = self.A.cols
        if self.test_channel.n != n or self.test_channel.ny != q:
            raise ValueError("test channel must map the source alphabet to GF(q)")
        if self.source.n != n or self.source.q != self.test_channel.q:
            raise ValueError("source and test channel disagree on the Y alphabet")
        if self.distortion.table.shape != (q, self.source.q):
            raise ValueError("distortion table must be X x Y")
        # mu_{X_i}(x) = sum_y mu_{Y_i}(y) mu_{X_i|Y_i}(x|y)
        self.x_marginals = np.einsum("iy,iyx->ix", self.source.pmfs,
                                     self.test_channel.kernels)
        self.stacked = self.A.stack(self.B)
        self.ech_stacked = row_reduce(self.stacked)
        self.rank_a = row_reduce(self.A).rank
        self.rank_b = row_reduce(self.B).rank
        logq = math.log2(q)
        self.rate_r = self.rank_a / n * logq
        self.rate_R = self.rank_b / n * logq

    @property
    def n(self) -> int:
        return self.A.cols

    @property
    def q(self) -> int:
        return self.A.field.q

    def posteriors(self, y) -> np.ndarray:
        """(n, q) per-index reproduction posteriors for the observed word."""
        y = np.asarray(y, dtype=np.int64)
        return self.test_channel.kernels[np.arange(self.n), y, :]


def encode(spec: LossyCodeSpec, y, cfg: SamplerConfig, rng) -> np.ndarray:
    """m = B x for x sampled from the posterior product restricted to C_A(c)."""
    x = encode_reproduction(spec, y, cfg, rng)
    return spec.B.mat_vec(x)


def encode_reproduction(spec: LossyCodeSpec, y, cfg: SamplerConfig, rng) -> np.ndarray:
    posts = spec.posteriors(y)
    engine = make_engine(spec.A, spec.c, posts, cfg)
    return engine.draw(rng).x


def decode(spec: LossyCodeSpec, m, cap: int = 2 ** 20,
           mode: str = "auto", bp_iters: int = 100) -> np.ndarray | None:
    """Highest-prior member of {x : Ax = c, Bx = m}; None when it is empty.

    Full-column-rank stacked maps decode by a linear solve; otherwise an
    exhaustive argmax under the marginal prior (lexicographic ties) or,
    above the cap, BP argmax with a final constraint check.
    """
    q = spec.q
    m = np.asarray(m, dtype=np.int64) % q
    if m.shape != (spec.B.rows,):
        raise ValueError("message length mismatch")
    target = np.concatenate([spec.c, m])
    ech = spec.ech_stacked
    d = ech.transform @ target % q
    if np.any(d[ech.rank:]):
        return None
    if ech.rank == spec.n:
        x = np.zeros(spec.n, dtype=np.int64)
        x[ech.pivots] = d[: ech.rank]
        return x
    K = kernel_basis(spec.stacked)
    size = q ** K.shape[0]
    if mode == "bp" or (mode == "auto" and size > cap):
        bp = CosetBP(spec.stacked, target, spec.x_marginals)
        bp.run(bp_iters, 1e-8)
        if bp.failed:
            return None
        x_hat = np.argmax(bp.marginals(), axis=1)
        ok = np.array_equal(spec.stacked.mat_vec(x_hat), target)
        return x_hat if ok else None
    x0 = np.zeros(spec.n, dtype=np.int64)
    x0[ech.pivots] = d[: ech.rank]
    combos = all_vectors(q, K.shape[0])
    members = (x0[None, :] + combos @ K) % q
    order = np.lexsort(members.T[::-1])
    members = members[order]
    logp = np.full(members.shape[0], -np.inf)
    marg = spec.x_marginals
    idx = np.arange(spec.n)
    with np.errstate(divide="ignore"):
        lp = np.log2(marg)
    for i, x in enumerate(members):
        logp[i] = lp[idx, x].sum()
    return members[int(np.argmax(logp))]


def linear_decode(spec: LossyCodeSpec, m) -> np.ndarray:
    """Deterministic special case: invert (c, m) through the pairing bijection."""
    if not np.allclose(spec.x_marginals, 1.0 / spec.q):
        raise ValueError("the deterministic special case assumes uniform marginals")
    xab = complement_bijection(spec.A, spec.B)
    return xab(spec.c, np.asarray(m, dtype=np.int64) % spec.q)


@dataclass
class DistortionStats:
    trials: int
    errors: int                      # d_n > n * D (encoding errors included)
    error_rate: float
    wilson: tuple
    encoding_errors: int
    decode_failures: int
    mean_per_letter: float           # over trials with finite distortion
    histogram: dict                  # per-letter distortion -> count
    exact_error: float | None = None

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "wilson_lo": self.wilson[0],
            "wilson_hi": self.wilson[1],
            "encoding_errors": self.encoding_errors,
            "decode_failures": self.decode_failures,
            "mean_per_letter_distortion": self.mean_per_letter,
            "exact_error": self.exact_error,
        }


def simulate(spec: LossyCodeSpec, trials: int, cfg: SamplerConfig, seed: int,
             target_d: float | None = None, decode_cap: int = 2 ** 20,
             bp_iters: int = 100, threads: int = 1) -> DistortionStats:
    """Monte-Carlo estimate of P(d_n > n D); encoding errors score infinity."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    D = spec.target_d if target_d is None else target_d
    n = spec.n

    def run_trial(t: int):
        rng = stream(seed, 202, t)
        y = spec.source.sample(rng)
        try:
            x_tilde = encode_reproduction(spec, y, cfg, rng)
        except EncodingError:
            return (math.inf, 1, 0)
        m = spec.B.mat_vec(x_tilde)
        x_hat = decode(spec, m, cap=decode_cap, bp_iters=bp_iters)
        if x_hat is None:
            return (math.inf, 0, 1)
        return (spec.distortion.total(x_hat, y), 0, 0)

    from .channel import _run_trials
    results = _run_trials(run_trial, trials, threads)
    dists = np.array([r[0] for r in results])
    enc_err = sum(r[1] for r in results)
    dec_fail = sum(r[2] for r in results)
    errors = int((dists > n * D).sum())
    finite = dists[np.isfinite(dists)]
    mean_pl = float(finite.mean() / n) if finite.size else math.inf
    hist = {}
    for d in dists:
        key = round(float(d) / n, 6) if math.isfinite(d) else "inf"
        hist[key] = hist.get(key, 0) + 1
    return DistortionStats(trials, errors, errors / trials,
                           wilson_interval(errors, trials), enc_err, dec_fail,
                           mean_pl, hist)


def exact_error(spec: LossyCodeSpec, target_d: float | None = None,
                cap: int = 2 ** 20) -> float:
    """Exact P(d_n > n D) by summing over source words and encoder outputs."""
    from .sampler import exact_coset_law
    D = spec.target_d if target_d is None else target_d
    n, q, ny = spec.n, spec.q, spec.source.q
    if ny ** n > cap:
        raise ValueError("source space exceeds the cap")
    total = 0.0
    for y in all_vectors(ny, n):
        py = 2.0 ** spec.source.log_prob(y)
        if py == 0:
            continue
        posts = spec.posteriors(y)
        try:
            members, probs = exact_coset_law(spec.A, spec.c, posts, cap=cap)
        except EncodingError:
            total += py
            continue
        for x_tilde, p in zip(members, probs):
            if p == 0:
                continue
            m = spec.B.mat_vec(x_tilde)
            x_hat = decode(spec, m, cap=cap)
            if x_hat is None or spec.distortion.total(x_hat, y) > n * D:
                total += py * p
    return total


def rate_check(spec: LossyCodeSpec) -> dict:
    """Achievability conditions for the lossy construction (advisory)."""
    n = spec.n
    h_x = float(np.mean([entropy_bits(spec.x_marginals[i]) for i in range(n)]))
    h_xy = 0.0
    for i in range(n):
        for yv in range(spec.source.q):
            py = spec.source.pmfs[i, yv]
            if py > 0:
                h_xy += py * entropy_bits(spec.test_channel.kernels[i, yv])
    h_xy /= n
    r, R = spec.rate_r, spec.rate_R
    return {
        "r": r,
        "R": R,
        "h_x": h_x,
        "h_x_given_y": h_xy,
        "cond_r": r < h_xy,          # r < H(X|Y)
        "cond_rR": r + R > h_x,      # r + R > H(X)
    }
