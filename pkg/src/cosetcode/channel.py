"""Channel coding over sparse-matrix cosets.

The encoder samples the channel input prior restricted to the joint
coset {x : Ax = c, Bx = m} (the stacked map carries both the hash target
and the message); the decoder estimates the coset member from y and
reads the message back through B.  An exhaustive posterior-argmax
decoder serves as the oracle at desk scale; the BP decoder is the
practical one.  The deterministic generator-matrix special case (uniform
prior) is also provided.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fastbp import CosetBP
from .models import MemorylessSource, rate_quantities, reverse_model
from .sampler import (
    EncodingError,
    ExactStepper,
    SamplerConfig,
    _ExactEngine,
    _SumProductEngine,
    _early_stop_index,
    _is_uniform,
)
from .sparsemat import (
    EchelonForm,
    SparseMatrix,
    all_vectors,
    column_space_basis,
    kernel_basis,
    left_inverse_of_generator,
    row_reduce,
    solve_particular,
)
from .stats import wilson_interval
from .streams import stream


@dataclass
class ChannelCodeSpec:
    """One concrete code instance: (A, B, c), the input prior, and its rates."""

    A: SparseMatrix
    B: SparseMatrix
    c: np.ndarray
    prior: MemorylessSource

    def __post_init__(self):
        if self.A.cols != self.B.cols or self.A.field != self.B.field:
            raise ValueError("A and B must share the domain")
        q = self.A.field.q
        self.c = np.asarray(self.c, dtype=np.int64) % q
        if self.c.shape != (self.A.rows,):
            raise ValueError("c length must equal the row count of A")
        if self.prior.n != self.A.cols or self.prior.q != q:
            raise ValueError("prior shape must match the code domain")
        self.stacked = self.A.stack(self.B)
        self.ech_stacked: EchelonForm = row_reduce(self.stacked)
        self.rank_a = row_reduce(self.A).rank
        if solve_particular(self.A, self.c) is None:
            raise ValueError("c is not in Im A")
        self.msg_rank = self.ech_stacked.rank - self.rank_a
        self.msg_basis = column_space_basis(self.B)   # basis of Im B
        self.kernel_stacked = kernel_basis(self.stacked)
        n, logq = self.A.cols, math.log2(q)
        self.rate_r = self.rank_a / n * logq
        self.rate_R = self.msg_rank / n * logq

    @property
    def n(self) -> int:
        return self.A.cols

    @property
    def q(self) -> int:
        return self.A.field.q

    def random_message(self, rng) -> np.ndarray:
        """Uniform draw from Im B."""
        if self.msg_basis.shape[0] == 0:
            return np.zeros(self.B.rows, dtype=np.int64)
        z = rng.integers(0, self.q, size=self.msg_basis.shape[0])
        return z @ self.msg_basis % self.q

    def message_in_im_b(self, m) -> bool:
        return solve_particular(self.B, m) is not None

    def all_messages(self) -> np.ndarray:
        """Every element of Im B (oracle scale)."""
        d = self.msg_basis.shape[0]
        if self.q ** d > 2 ** 20:
            raise ValueError("message space too large to enumerate")
        if d == 0:
            return np.zeros((1, self.B.rows), dtype=np.int64)
        return all_vectors(self.q, d) @ self.msg_basis % self.q


def sample_code(n: int, l: int, k: int, tau: int, field, prior: MemorylessSource,
                seed: int) -> ChannelCodeSpec:
    """Draw A, B independently from the tau ensemble and c uniform on Im A."""
    from .sparsemat import EnsembleSpec, sample_sparse_matrix
    A = sample_sparse_matrix(EnsembleSpec(n=n, l=l, field=field, tau=tau),
                             stream(seed, 1))
    B = sample_sparse_matrix(EnsembleSpec(n=n, l=k, field=field, tau=tau),
                             stream(seed, 2))
    u = stream(seed, 3).integers(0, field.q, size=n)
    c = A.mat_vec(u)   # image of a uniform input is uniform on Im A
    return ChannelCodeSpec(A, B, c, prior)


class ChannelEncoder:
    """Reusable encoder: shares the expensive structures across messages."""

    def __init__(self, spec: ChannelCodeSpec, cfg: SamplerConfig):
        self.spec = spec
        self.cfg = cfg
        self.q = spec.q
        self.uniform = cfg.uniform_shortcut and _is_uniform(spec.prior.pmfs)
        if self.uniform:
            self._ech = spec.ech_stacked
            self._kernel = spec.kernel_stacked
        elif cfg.method == "exact":
            self._stepper = ExactStepper(spec.stacked, spec.prior.pmfs,
                                         cfg.exact_cap_states)
            self._kstar = _early_stop_index(spec.stacked, cfg.early_stop)

    def encode(self, m, rng) -> np.ndarray:
        spec, q = self.spec, self.q
        m = np.asarray(m, dtype=np.int64) % q
        if m.shape != (spec.B.rows,):
            raise ValueError("message length mismatch")
        target = np.concatenate([spec.c, m])
        if self.uniform:
            ech = self._ech
            d = ech.transform @ target % q
            if np.any(d[ech.rank:]):
                raise EncodingError("C_AB(c, m) is empty")
            x0 = np.zeros(spec.n, dtype=np.int64)
            x0[ech.pivots] = d[: ech.rank]
            if self._kernel.shape[0]:
                z = rng.integers(0, q, size=self._kernel.shape[0])
                x0 = (x0 + z @ self._kernel) % q
            return x0
        if self.cfg.method == "exact":
            eng = _ExactEngine(spec.stacked, target, spec.prior.pmfs, self.cfg,
                               stepper=self._stepper, kstar=self._kstar)
            return eng.draw(rng).x
        eng = _SumProductEngine(spec.stacked, target, spec.prior.pmfs, self.cfg)
        return eng.draw(rng).x


def encode(spec: ChannelCodeSpec, m, cfg: SamplerConfig, rng,
           check_message: bool = True) -> np.ndarray:
    """Draw x ~ prior restricted to {x : Ax = c, Bx = m}."""
    if check_message and not spec.message_in_im_b(np.asarray(m) % spec.q):
        raise ValueError("message is not in Im B")
    return ChannelEncoder(spec, cfg).encode(m, rng)


@dataclass
class DecodeOutcome:
    m_hat: np.ndarray | None
    method: str
    tie: bool = False
    converged: bool | None = None
    iterations: int | None = None

    @property
    def success(self) -> bool:
        return self.m_hat is not None


def _coset_array(A: SparseMatrix, c, cap: int) -> np.ndarray:
    """Members of C_A(c) (no particular order), refusing above cap members."""
    x0 = solve_particular(A, c)
    if x0 is None:
        return np.zeros((0, A.cols), dtype=np.int64)
    K = kernel_basis(A)
    size = A.field.q ** K.shape[0]
    if size > cap:
        raise ValueError(f"coset size {size} exceeds cap {cap}")
    if K.shape[0] == 0:
        return x0[None, :]
    combos = all_vectors(A.field.q, K.shape[0])
    return (x0[None, :] + combos @ K) % A.field.q


def decode_map(spec: ChannelCodeSpec, y, channel, cap: int = 2 ** 20) -> DecodeOutcome:
    """Exhaustive posterior argmax over C_A(c); ties go lexicographically."""
    members = _coset_array(spec.A, spec.c, cap)
    if members.shape[0] == 0:
        return DecodeOutcome(None, "map-exhaustive")
    order = np.lexsort(members.T[::-1])
    members = members[order]
    best, best_score, tie = None, -np.inf, False
    for x in members:
        score = spec.prior.log_prob(x) + channel.log_lik(y, x)
        if score > best_score:
            best, best_score, tie = x, score, False
        elif score == best_score and best is not None:
            tie = True
    if best is None or best_score == -np.inf:
        # zero posterior everywhere on the coset: fall back to the first member
        best, tie = members[0], members.shape[0] > 1
    return DecodeOutcome(spec.B.mat_vec(best), "map-exhaustive", tie=tie)


def decode_bp(spec: ChannelCodeSpec, y, channel, iters: int = 100,
              damping: float = 0.0, tol: float = 1e-8) -> DecodeOutcome:
    """BP marginals on the coset graph with per-index posteriors as priors."""
    try:
        rm = reverse_model(spec.prior.pmfs, channel, y)
    except ValueError:
        return DecodeOutcome(None, "bp-then-B")
    bp = CosetBP(spec.A, spec.c, rm.posteriors, damping=damping)
    converged = bp.run(iters, tol)
    if bp.failed:
        return DecodeOutcome(None, "bp-then-B", converged=False,
                             iterations=bp.iterations)
    x_hat = np.argmax(bp.marginals(), axis=1)
    if not np.array_equal(spec.A.mat_vec(x_hat), spec.c):
        return DecodeOutcome(None, "bp-then-B", converged=converged,
                             iterations=bp.iterations)
    return DecodeOutcome(spec.B.mat_vec(x_hat), "bp-then-B",
                         converged=converged, iterations=bp.iterations)


@dataclass
class ErrorStats:
    trials: int
    errors: int
    error_rate: float
    wilson: tuple
    encoding_errors: int
    decode_failures: int
    bp_converged: int
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
            "bp_converged": self.bp_converged,
            "exact_error": self.exact_error,
        }


def simulate(spec: ChannelCodeSpec, channel, trials: int, cfg: SamplerConfig,
             seed: int, decoder: str = "bp", bp_iters: int = 100,
             map_cap: int = 2 ** 20, threads: int = 1) -> ErrorStats:
    """Monte-Carlo error rate: uniform message, encode, transmit, decode.

    Per-trial randomness comes from counter-derived substreams of `seed`,
    so results are identical for any thread count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    encoder = ChannelEncoder(spec, cfg)

    def run_trial(t: int):
        rng = stream(seed, 101, t)
        m = spec.random_message(rng)
        try:
            x = encoder.encode(m, rng)
        except EncodingError:
            return (1, 1, 0, 0)
        y = channel.sample(x, rng)
        if decoder == "map":
            out = decode_map(spec, y, channel, cap=map_cap)
        else:
            out = decode_bp(spec, y, channel, iters=bp_iters)
        conv = 1 if out.converged else 0
        if not out.success:
            return (1, 0, 1, conv)
        return (0 if np.array_equal(out.m_hat, m) else 1, 0, 0, conv)

    results = _run_trials(run_trial, trials, threads)
    errors = sum(r[0] for r in results)
    enc_err = sum(r[1] for r in results)
    dec_fail = sum(r[2] for r in results)
    conv = sum(r[3] for r in results)
    return ErrorStats(trials, errors, errors / trials,
                      wilson_interval(errors, trials), enc_err, dec_fail, conv)


def _run_trials(fn, trials: int, threads: int):
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def exact_error(spec: ChannelCodeSpec, channel, cap: int = 2 ** 20) -> float:
    """Full summation of the stochastic-code error probability.

    Sums over every message in Im B, every x in its joint coset and every
    channel output; needs a finite-output channel at oracle scale.
    """
    if channel.continuous:
        raise ValueError("exact summation needs a finite output alphabet")
    q, n = spec.q, spec.n
    msgs = spec.all_messages()
    n_msgs = msgs.shape[0]
    ny = channel.ny
    if ny ** n > cap:
        raise ValueError("output space exceeds the cap")
    ys = all_vectors(ny, n)
    decoded = [decode_map(spec, y, channel, cap=cap).m_hat for y in ys]
    total = 0.0
    for m in msgs:
        target = np.concatenate([spec.c, m])
        members = _coset_array(spec.stacked, target, cap)
        if members.shape[0] == 0:
            total += 1.0 / n_msgs
            continue
        mass = sum(2.0 ** spec.prior.log_prob(x) for x in members)
        if mass == 0:
            total += 1.0 / n_msgs
            continue
        for x in members:
            px = 2.0 ** spec.prior.log_prob(x)
            if px == 0:
                continue
            for iy, y in enumerate(ys):
                if decoded[iy] is not None and np.array_equal(decoded[iy], m):
                    continue
                total += (2.0 ** channel.log_lik(y, x)) * px / (n_msgs * mass)
    return total


# -- deterministic special case (uniform prior) ---------------------------------


@dataclass
class LinearCodeSpec:
    """Generator-matrix form: encode m as G m + x_c, decode via a left inverse."""

    A: SparseMatrix
    c: np.ndarray

    def __post_init__(self):
        q = self.A.field.q
        self.c = np.asarray(self.c, dtype=np.int64) % q
        self.x_c = solve_particular(self.A, self.c)
        if self.x_c is None:
            raise ValueError("c is not in Im A")
        self.gen = kernel_basis(self.A)          # rows span C_A(0)
        self.msg_dim = self.gen.shape[0]
        if self.msg_dim:
            self.left_inv = left_inverse_of_generator(self.gen.T, self.A.field)
        else:
            self.left_inv = np.zeros((0, self.A.cols), dtype=np.int64)

    @property
    def q(self) -> int:
        return self.A.field.q


def linear_encode(spec: LinearCodeSpec, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.int64) % spec.q
    if m.shape != (spec.msg_dim,):
        raise ValueError("message length mismatch")
    return (m @ spec.gen + spec.x_c) % spec.q


def linear_decode(spec: LinearCodeSpec, y, channel, prior: MemorylessSource,
                  cap: int = 2 ** 20) -> np.ndarray | None:
    """MAP over the coset, then strip the offset and invert the generator."""
    if not _is_uniform(prior.pmfs):
        raise ValueError("the deterministic special case assumes a uniform prior")
    members = _coset_array(spec.A, spec.c, cap)
    order = np.lexsort(members.T[::-1])
    members = members[order]
    best, best_score = None, -np.inf
    for x in members:
        score = channel.log_lik(y, x)
        if score > best_score:
            best, best_score = x, score
    if best is None:
        return None
    return spec.left_inv @ ((best - spec.x_c) % spec.q) % spec.q


# -- rate conditions ---------------------------------------------------------------


def rate_check(spec: ChannelCodeSpec, channel) -> dict:
    """Achievability conditions (advisory at finite n)."""
    rq = rate_quantities(spec.prior.pmfs, channel)
    r, R = spec.rate_r, spec.rate_R
    return {
        "r": r,
        "R": R,
        "h_x": rq.h_x,
        "h_x_given_y": rq.h_x_given_y,
        "cond_r": r > rq.h_x_given_y,        # r > H(X|Y)
        "cond_rR": r + R < rq.h_x,           # r + R < H(X)
    }
