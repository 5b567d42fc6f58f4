"""Vectorized sum-product for coset-shaped graphs.

Same fixed point as factorgraph.sum_product on graphs made of per-index
priors plus affine checks, but all factor updates run as batched array
ops: check messages go through a DFT over Z_q so the per-factor
convolutions become products, and exclusive products use padded
prefix/suffix cumulative products.

Supports in-place conditioning (fix x_i = v): the symbol is folded into
the residual targets and the variable's edges go inactive, which is what
the sequential sampler needs.  Inactive edges contribute delta_0, whose
transform is all-ones, so the padded products need no masking.
"""

import numpy as np

from .gf import GF
from .sparsemat import SparseMatrix


class CosetBP:
    def __init__(self, A: SparseMatrix, c, priors, damping: float = 0.0):
        q = A.field.q
        self.q = q
        self.n = A.cols
        self.l = A.rows
        self.damping = float(damping)
        priors = np.asarray(priors, dtype=float)
        if priors.shape != (self.n, q):
            raise ValueError("priors must be (n, q)")
        self.priors = priors.copy()
        c = np.asarray(c, dtype=np.int64) % q
        if c.shape != (self.l,):
            raise ValueError("target length mismatch")
        self.targets = c.copy()

        # flat edge arrays in CSR (factor-major) order
        self.e_var = A.col_idx.copy()
        self.e_factor = A.row_of.copy()
        self.e_coeff = A.coeffs.copy()
        self.E = int(self.e_var.size)
        deg = np.diff(A.indptr)
        self.e_pos = np.concatenate([np.arange(d) for d in deg]) if self.E else \
            np.zeros(0, dtype=np.int64)
        self.f_deg = deg
        self.active_deg = deg.copy()
        self.D = int(deg.max()) if self.l else 0

        # variable-side grouping
        order = np.argsort(self.e_var, kind="stable")
        self.v_edges = order
        self.v_deg = np.bincount(self.e_var, minlength=self.n)
        self.Dv = int(self.v_deg.max()) if self.E else 0
        self.ve_pos = np.concatenate([np.arange(d) for d in self.v_deg]) if self.E else \
            np.zeros(0, dtype=np.int64)
        self.ve_var = self.e_var[order]
        bounds = np.concatenate([[0], np.cumsum(self.v_deg)])
        self.var_edge_list = [order[bounds[v]:bounds[v + 1]] for v in range(self.n)]

        # DFT matrices; real Hadamard for q = 2, complex roots of unity otherwise
        if q == 2:
            self.W = np.array([[1.0, 1.0], [1.0, -1.0]])
            self.Winv = self.W / 2.0
            self._cdtype = np.float64
        else:
            j, k = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
            w = np.exp(-2j * np.pi / q)
            self.W = w ** (j * k)
            self.Winv = np.conj(self.W) / q
            self._cdtype = np.complex128
        inv_table = GF(q).inv_table
        # IDX_IN[e, v] = coeff^-1 * v: scaled[e, a*x] = pi[e, x]
        invc = inv_table[self.e_coeff]
        self.idx_in = (invc[:, None] * np.arange(q)[None, :]) % q
        self.neg_cx = (-self.e_coeff[:, None] * np.arange(q)[None, :]) % q

        self.active = np.ones(self.E, dtype=bool)
        self.fixed = np.full(self.n, -1, dtype=np.int64)
        self.pi = self.priors[self.e_var].copy()
        self.sigma = np.full((self.E, q), 1.0 / q)
        self.failed = False
        self.iterations = 0

        bad = np.nonzero((self.f_deg == 0) & (self.targets != 0))[0]
        if bad.size:
            self.failed = True

    def clone(self) -> "CosetBP":
        """Copy of the mutable message state; structure arrays are shared."""
        other = object.__new__(CosetBP)
        other.__dict__.update(self.__dict__)
        for name in ("targets", "active", "active_deg", "fixed", "pi", "sigma"):
            setattr(other, name, getattr(self, name).copy())
        return other

    # -- conditioning ------------------------------------------------------

    def condition(self, v: int, value: int) -> bool:
        """Fix x_v = value; returns False on an immediate contradiction."""
        if self.fixed[v] >= 0:
            raise ValueError(f"variable {v} already fixed")
        self.fixed[v] = value
        ok = True
        for e in self.var_edge_list[v]:
            if not self.active[e]:
                continue
            f = self.e_factor[e]
            self.targets[f] = (self.targets[f] - self.e_coeff[e] * value) % self.q
            self.active[e] = False
            self.pi[e] = 0.0
            self.pi[e, value] = 1.0
            self.active_deg[f] -= 1
            if self.active_deg[f] == 0 and self.targets[f] != 0:
                ok = False
        if not ok:
            self.failed = True
        return ok

    # -- message passing ---------------------------------------------------

    def run(self, iters: int, tol: float = 1e-8) -> bool:
        """Flooding iterations; returns the convergence flag."""
        if self.failed:
            return False
        if self.E == 0:
            return True
        q, E = self.q, self.E
        for _ in range(iters):
            self.iterations += 1
            # factor side: sigma from pi
            scaled = np.take_along_axis(self.pi, self.idx_in, axis=1)
            scaled[~self.active] = 0.0
            scaled[~self.active, 0] = 1.0
            F = scaled.astype(self._cdtype) @ self.W.T
            P = np.ones((self.l, self.D, q), dtype=self._cdtype)
            P[self.e_factor, self.e_pos] = F
            cp = np.cumprod(P, axis=1)
            prefix = np.ones_like(P)
            prefix[:, 1:] = cp[:, :-1]
            rcp = np.cumprod(P[:, ::-1], axis=1)[:, ::-1]
            suffix = np.ones_like(P)
            suffix[:, :-1] = rcp[:, 1:]
            excl = prefix * suffix
            G = excl[self.e_factor, self.e_pos]
            conv = (G @ self.Winv).real if self._cdtype is np.complex128 else G @ self.Winv
            np.clip(conv, 0.0, None, out=conv)
            idx_out = (self.targets[self.e_factor][:, None] + self.neg_cx) % q
            sig_new = np.take_along_axis(conv, idx_out, axis=1)
            sums = sig_new.sum(axis=1)
            dead = (sums <= 0) & self.active
            if np.any(dead):
                self.failed = True
                return False
            safe = np.where(sums > 0, sums, 1.0)
            sig_new = sig_new / safe[:, None]
            sig_new[~self.active] = 1.0 / q
            if self.damping:
                sig_new = (1 - self.damping) * sig_new + self.damping * self.sigma
            delta = float(np.abs(sig_new - self.sigma)[self.active].max()) \
                if np.any(self.active) else 0.0
            self.sigma = sig_new

            # variable side: pi from sigma
            V = np.ones((self.n, self.Dv, q))
            sig_by_var = self.sigma[self.v_edges]
            act_by_var = self.active[self.v_edges]
            sig_by_var = np.where(act_by_var[:, None], sig_by_var, 1.0)
            V[self.ve_var, self.ve_pos] = sig_by_var
            cp = np.cumprod(V, axis=1)
            prefix = np.ones_like(V)
            prefix[:, 1:] = cp[:, :-1]
            rcp = np.cumprod(V[:, ::-1], axis=1)[:, ::-1]
            suffix = np.ones_like(V)
            suffix[:, :-1] = rcp[:, 1:]
            excl = (prefix * suffix)[self.ve_var, self.ve_pos]
            pi_new = self.priors[self.ve_var] * excl
            sums = pi_new.sum(axis=1)
            dead = (sums <= 0) & act_by_var
            if np.any(dead):
                self.failed = True
                return False
            safe = np.where(sums > 0, sums, 1.0)
            pi_new = pi_new / safe[:, None]
            upd = np.zeros_like(self.pi)
            upd[self.v_edges] = pi_new
            keep = ~self.active
            upd[keep] = self.pi[keep]
            self.pi = upd
            if delta < tol:
                return True
        return False

    # -- readout -------------------------------------------------------------

    def marginal(self, v: int):
        """Belief for x_v, or None when it is all zero (dead end)."""
        if self.fixed[v] >= 0:
            out = np.zeros(self.q)
            out[self.fixed[v]] = 1.0
            return out
        g = self.priors[v].copy()
        for e in self.var_edge_list[v]:
            if self.active[e]:
                g = g * self.sigma[e]
        s = g.sum()
        if s <= 0:
            return None
        return g / s

    def marginals(self) -> np.ndarray:
        V = np.ones((self.n, max(self.Dv, 1), self.q))
        if self.E:
            sig_by_var = np.where(self.active[self.v_edges][:, None],
                                  self.sigma[self.v_edges], 1.0)
            V[self.ve_var, self.ve_pos] = sig_by_var
        g = self.priors * V.prod(axis=1)
        sums = g.sum(axis=1)
        zero = sums <= 0
        g[zero] = 1.0 / self.q
        sums = np.where(zero, 1.0, sums)
        out = g / sums[:, None]
        for v in np.nonzero(self.fixed >= 0)[0]:
            out[v] = 0.0
            out[v, self.fixed[v]] = 1.0
        return out
