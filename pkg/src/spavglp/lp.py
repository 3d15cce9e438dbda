"""Standard-form equality LP solver: min c'x, Ax = b, x >= 0.

Specialized for problems with few rows (tens) and very many columns
(up to ~1e6).  Columns are produced by a pure generator and priced in
blocks; a dense matrix may be attached for fast vectorized pricing.
The solver is a two-phase revised simplex with Dantzig pricing and a
lexicographic ratio test for anti-cycling under degeneracy.
Everything is deterministic: ties break toward the lowest column index.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import IterationLimit

BLOCK_SIZE = 65536


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LinearProgram:
    """Equality LP with implicitly generated columns.

    column_source(j) -> (column: (num_rows,) array, cost: float) must be a
    pure function of j.  When the full matrix is available, pass it as
    ``dense`` (shape (num_rows, num_cols)) with ``costs``; pricing then
    avoids per-column Python calls entirely.
    """

    def __init__(self, num_rows, num_cols, b, column_source=None, dense=None, costs=None):
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self.b = np.asarray(b, dtype=float)
        if self.b.shape != (self.num_rows,):
            raise ValueError("b has wrong length")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("b must be finite")
        if dense is not None:
            dense = np.ascontiguousarray(dense, dtype=float)
            costs = np.asarray(costs, dtype=float)
            if dense.shape != (self.num_rows, self.num_cols) or costs.shape != (self.num_cols,):
                raise ValueError("dense/costs shape mismatch")
        elif column_source is None:
            raise ValueError("need column_source or dense")
        self._dense = dense
        self._costs = costs
        self._source = column_source
        self._block_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def column(self, j):
        if not 0 <= j < self.num_cols:
            raise IndexError(f"column {j} out of range")
        if self._dense is not None:
            return self._dense[:, j].copy(), float(self._costs[j])
        return self._source(j)

    def block_columns(self, start, stop):
        """Columns [start, stop) as (A_block (rows, k), costs (k,))."""
        if self._dense is not None:
            return self._dense[:, start:stop], self._costs[start:stop]
        key = (start, stop)
        hit = self._block_cache.get(key)
        if hit is not None:
            return hit
        k = stop - start
        A = np.empty((self.num_rows, k))
        c = np.empty(k)
        for i in range(k):
            A[:, i], c[i] = self._source(start + i)
        self._block_cache[key] = (A, c)
        return A, c

    def blocks(self, block_size=BLOCK_SIZE):
        for start in range(0, self.num_cols, block_size):
            yield start, min(start + block_size, self.num_cols)


def price_columns(lp: LinearProgram, duals, block: range):
    """Most negative reduced cost within a column block (Dantzig pricing).

    Returns (col_index, reduced_cost); ties break to the lowest index.
    """
    duals = np.asarray(duals, dtype=float)
    A, c = lp.block_columns(block.start, block.stop)
    r = c - duals @ A
    j = int(np.argmin(r))
    return block.start + j, float(r[j])


@dataclass
class SolveOptions:
    max_iter: int | None = None       # default 10 * num_cols
    block_size: int = BLOCK_SIZE
    feas_tol: float = 1e-9
    opt_tol: float = 1e-8
    pivot_tol: float = 1e-11
    candidates: int = 200             # candidate-list size for pricing


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    basic_cols: list = field(default_factory=list)   # [(col_index, value)]
    duals: np.ndarray | None = None
    iterations: int = 0
    pivot_log: tuple = ()
    dropped_rows: tuple = ()
    primal_residual: float = float("nan")
    basis: tuple = ()                 # final basis column order (warm-start seed)


def solve(lp: LinearProgram, options: SolveOptions | None = None,
          warm_basis=None) -> LpSolution:
    """Solve the LP.  ``warm_basis`` (a column-index sequence, e.g.
    ``LpSolution.basis`` of a related solve) is used to skip phase 1 when it
    is a valid primal-feasible basis of this problem; otherwise it is
    ignored and the standard two-phase path runs."""
    return _Simplex(lp, options or SolveOptions(), warm_basis).run()


class _Simplex:
    def __init__(self, lp, opts, warm_basis=None):
        self.lp = lp
        self.opts = opts
        self.n = lp.num_cols
        self.max_iter = opts.max_iter if opts.max_iter is not None else max(1000, 10 * self.n)
        self.iterations = 0
        self.pivot_log = []
        self._b_override = None
        self._warm = warm_basis
        self._absAi = None

    # -- setup -------------------------------------------------------------

    def _scan_rows(self):
        """One pass over all columns: per-row max |entry| for equilibration
        and trivially-zero-row preprocessing."""
        m = np.zeros(self.lp.num_rows)
        for s, e in self.lp.blocks(self.opts.block_size):
            A, _ = self.lp.block_columns(s, e)
            np.maximum(m, np.abs(A).max(axis=1), out=m)
        return m

    def run(self) -> LpSolution:
        lp, opts = self.lp, self.opts
        row_max = self._scan_rows()
        zero_rows = row_max < 1e-12
        if np.any(zero_rows & (np.abs(lp.b) > 1e-12)):
            return LpSolution(LpStatus.INFEASIBLE, float("nan"),
                              dropped_rows=tuple(np.flatnonzero(zero_rows)))
        keep = ~zero_rows
        self.orig_rows = np.flatnonzero(keep)
        R = self.orig_rows.size
        if R > self.n:
            raise ValueError(f"num_rows ({R}) exceeds num_cols ({self.n}); basis cannot exist")
        b = lp.b[self.orig_rows]
        scale = np.maximum(row_max[self.orig_rows], 1e-12)
        self.D = np.where(b >= 0, 1.0, -1.0) / scale            # row transform
        self.bi = self.D * b                                     # internal rhs, >= 0
        # internal (equilibrated, sign-fixed) matrix; dense copy when available
        if lp._dense is not None:
            self.Ai = self.D[:, None] * lp._dense[keep, :]
            self.ci_real = lp._costs
        else:
            self.Ai = None
            self._keep = keep
        self.R = R
        if R == 0:
            # no effective constraints: x = 0 is optimal unless some cost < 0
            costs = self._real_costs() if lp._dense is None else lp._costs
            if np.any(costs < -opts.opt_tol):
                return LpSolution(LpStatus.UNBOUNDED, float("-inf"))
            return LpSolution(LpStatus.OPTIMAL, 0.0, duals=np.zeros(lp.num_rows),
                              dropped_rows=tuple(np.flatnonzero(zero_rows)),
                              primal_residual=0.0)
        self.rows_act = np.ones(R, dtype=bool)
        c2 = np.zeros(self.n + R)
        c2[:self.n] = self._real_costs()
        status = None
        if self._try_warm_start():
            try:
                status = self._phase(c2, phase=2)
            except (RuntimeError, IterationLimit):
                # a stale warm basis can walk into numerical trouble that a
                # fresh phase-1 start avoids; retry cold with a fresh budget
                status = None
                self._b_override = None
                self.rows_act = np.ones(R, dtype=bool)
                self.max_iter += self.iterations
        if status is None:
            # Phase I: artificial identity basis, variable index n + row
            self.basis = [self.n + r for r in range(R)]
            c1 = np.zeros(self.n + R)
            c1[self.n:] = 1.0
            status = self._phase(c1, phase=1)
            self._b_override = None
            if status is LpStatus.UNBOUNDED:                     # cannot happen: obj >= 0
                return LpSolution(LpStatus.INFEASIBLE, float("nan"), iterations=self.iterations)
            if self._objective(c1) > 1e-7 * max(1.0, np.abs(self.bi).max()):
                duals = self._original_duals(self._duals(c1))
                return LpSolution(LpStatus.INFEASIBLE, float("nan"), duals=duals,
                                  iterations=self.iterations, pivot_log=tuple(self.pivot_log))
            self._purge_artificials()
            status = self._phase(c2, phase=2)
        self._b_override = None
        if status is LpStatus.UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, float("-inf"),
                              iterations=self.iterations, pivot_log=tuple(self.pivot_log))
        self._factorize()
        xB = self._basic_values()
        obj = float(c2[self.basis] @ xB)
        duals = self._original_duals(self._duals(c2))
        # residual on the original system, restricted to kept rows
        res = self._primal_residual(xB)
        basic = [(j, float(max(x, 0.0))) for j, x in zip(self.basis, xB) if j < self.n]
        dropped = tuple(int(i) for i in np.flatnonzero(zero_rows)) + \
            tuple(int(self.orig_rows[i]) for i in np.flatnonzero(~self.rows_act))
        return LpSolution(LpStatus.OPTIMAL, obj, basic_cols=basic, duals=duals,
                          iterations=self.iterations, pivot_log=tuple(self.pivot_log),
                          dropped_rows=dropped, primal_residual=res,
                          basis=tuple(int(j) for j in self.basis))

    def _try_warm_start(self):
        """Adopt the caller-supplied basis when it is a valid primal-feasible
        basis of this problem, skipping phase 1 entirely.  Returns False on
        any mismatch (wrong size, duplicates, singular or infeasible basis),
        in which case the standard two-phase path runs."""
        if self._warm is None:
            return False
        wb = [int(j) for j in self._warm]
        if (len(wb) != self.R or len(set(wb)) != self.R
                or any(not 0 <= j < self.n for j in wb)):
            return False
        self.basis = wb
        try:
            self._factorize()
        except (ValueError, np.linalg.LinAlgError):
            return False
        xB = self._basic_values()
        if not np.all(np.isfinite(xB)):
            return False
        if float(xB.min(initial=0.0)) < -self.opts.feas_tol:
            return False
        if self._primal_residual(np.maximum(xB, 0.0)) > \
                1e-7 * max(1.0, float(np.abs(self.bi).max())):
            return False
        return True

    # -- internal column access -------------------------------------------

    def _int_block(self, s, e):
        if self.Ai is not None:
            return self.Ai[:, s:e], self.ci_real[s:e]
        A, c = self.lp.block_columns(s, e)
        return self.D[:, None] * A[self._keep, :], c

    def _int_col(self, j):
        """Internal column restricted to active rows (artificials included)."""
        act = np.flatnonzero(self.rows_act)
        if j >= self.n:
            col = np.zeros(act.size)
            pos = np.searchsorted(act, j - self.n)
            if pos < act.size and act[pos] == j - self.n:
                col[pos] = 1.0
            return col
        if self.Ai is not None:
            return self.Ai[act, j]
        a, _ = self.lp.column(j)
        return (self.D * a[self._keep])[act]

    def _real_costs(self):
        if self.Ai is not None:
            return self.ci_real
        c = np.empty(self.n)
        for s, e in self.lp.blocks(self.opts.block_size):
            _, cb = self.lp.block_columns(s, e)
            c[s:e] = cb
        return c

    # -- simplex machinery -------------------------------------------------

    def _factorize(self):
        act = np.flatnonzero(self.rows_act)
        k = act.size
        B = np.empty((k, k))
        for p, j in enumerate(self.basis):
            B[:, p] = self._int_col(j)
        self._B = B
        self._lu = lu_factor(B)

    def _basic_values(self):
        rhs = (self._b_override if self._b_override is not None
               else self.bi[self.rows_act])
        return lu_solve(self._lu, rhs)

    def _duals(self, costs):
        cB = costs[self.basis]
        y = lu_solve(self._lu, cB, trans=1)
        # one step of iterative refinement: the pricing tolerances assume the
        # duals are accurate to O(eps * |y|' |A|), which a single LU solve on
        # an ill-conditioned basis does not deliver on its own
        y += lu_solve(self._lu, cB - self._B.T @ y, trans=1)
        return y

    def _objective(self, costs):
        self._factorize()
        return float(costs[self.basis] @ self._basic_values())

    def _full_duals(self, y):
        yf = np.zeros(self.R)
        yf[self.rows_act] = y
        return yf

    def _original_duals(self, y):
        duals = np.zeros(self.lp.num_rows)
        duals[self.orig_rows] = self._full_duals(y) * self.D
        return duals

    def _price(self, yf, phase):
        """Dantzig pricing with a candidate list; returns (j, r_j) or None.

        A full pass over every column records the most negative reduced
        costs as candidates; subsequent iterations re-price only the
        candidates (exactly, against the current duals) until the list is
        exhausted, then do another full pass.  Optimality is only declared
        by a full pass, so the candidate list affects speed, not results.
        Phase I real columns carry zero cost; Phase II the true cost.
        Basic columns are masked out so a noisy dual solve can never
        re-select a column already in the basis.

        The tolerance scales with the dual magnitude: the error in a
        reduced cost grows with |y| (the matrix is row-equilibrated to
        entries <= 1), so an absolute cutoff would chase noise whenever
        the duals are large.
        """
        tol = self.opts.opt_tol * (1.0 + float(np.abs(yf).max(initial=0.0)))
        if self._gamma is not None:
            # Devex pricing (full pass, dense matrix): pick the improving
            # column with the largest r^2 / gamma, gamma approximating the
            # steepest-edge norm ||B^{-1} a_j||^2.  Dantzig's most-negative
            # rule zigzags badly on the near-degenerate vertices these
            # discretizations produce; Devex cuts the path by orders of
            # magnitude at one extra matrix pass per pivot.
            #
            # The tolerance is per column: the roundoff in r_j is bounded by
            # eps * sum_i |y_i| |A_ij|, which is much sharper than a global
            # ||y||-scaled cutoff when equilibration makes some duals huge.
            r = (self.ci_real - yf @ self.Ai) if phase == 2 else -(yf @ self.Ai)
            for bj in self._basis_set:
                if bj < self.n:
                    r[bj] = 0.0
            if self._absAi is None:
                self._absAi = np.abs(self.Ai)
            # refined duals are accurate to a small multiple of machine eps
            # times |y|'|A|, so the cutoff can sit near roundoff level even
            # when equilibration makes the duals huge
            tol_j = self.opts.opt_tol + 5e-14 * (np.abs(yf) @ self._absAi)
            neg = np.flatnonzero(r < -tol_j)
            if neg.size == 0:
                return None
            if self._randomize:
                k = int(self._rng.integers(neg.size))
                return int(neg[k]), float(r[neg[k]])
            score = r[neg] ** 2 / self._gamma[neg]
            j = int(neg[np.argmax(score)])
            return j, float(r[j])
        cand = self._cand
        if cand.size:
            A, c = self._cand_block(cand)
            r = (c - yf @ A) if phase == 2 else -(yf @ A)
            r[np.fromiter((j in self._basis_set for j in cand), bool, cand.size)] = 0.0
            keep = r < -tol
            self._cand = cand[keep]
            if self._cand.size:
                rr = r[keep]
                k = (int(self._rng.integers(rr.size)) if self._randomize
                     else int(np.argmin(rr)))
                return int(self._cand[k]), float(rr[k])
        best_j, best_r = -1, -tol
        tops = []
        for s, e in self.lp.blocks(self.opts.block_size):
            A, c = self._int_block(s, e)
            r = (c - yf @ A) if phase == 2 else -(yf @ A)
            for bj in self._basis_set:
                if s <= bj < e:
                    r[bj - s] = 0.0
            neg = np.flatnonzero(r < -tol)
            if neg.size > self.opts.candidates:
                part = neg[np.argpartition(r[neg], self.opts.candidates)
                           [:self.opts.candidates]]
            else:
                part = neg
            tops.append((s + part, r[part]))
            j = int(np.argmin(r))
            if r[j] < best_r:
                best_j, best_r = s + j, float(r[j])
        if best_j < 0:
            self._cand = np.empty(0, dtype=np.int64)
            return None
        idx = np.concatenate([t[0] for t in tops])
        vals = np.concatenate([t[1] for t in tops])
        if idx.size > self.opts.candidates:
            sel = np.argpartition(vals, self.opts.candidates)[:self.opts.candidates]
            idx = idx[sel]
            vals = vals[sel]
        if self._randomize and idx.size:
            k = int(self._rng.integers(idx.size))
            best_j, best_r = int(idx[k]), float(vals[k])
        self._cand = np.sort(idx[idx != best_j])
        return best_j, best_r

    def _cand_block(self, cand):
        if self.Ai is not None:
            return self.Ai[:, cand], self.ci_real[cand]
        A = np.empty((self.R, cand.size))
        c = np.empty(cand.size)
        for i, j in enumerate(cand):
            a, c[i] = self.lp.column(int(j))
            A[:, i] = self.D * a[self._keep]
        return A, c

    def _phase(self, costs, phase):
        # lexicographic reference: the phase-start basis matrix, so that
        # B^{-1} B0 = I initially and every row starts lex-positive
        k = int(np.sum(self.rows_act))
        B0 = np.empty((k, k))
        for p, j in enumerate(self.basis):
            B0[:, p] = self._int_col(j)
        self._lex_ref = B0
        self._cand = np.empty(0, dtype=np.int64)
        self._gamma = np.ones(self.n) if self.Ai is not None else None
        # stall handling: floating-point noise corrupts both the reduced
        # costs and the lexicographic comparisons on heavily degenerate
        # vertices, so no deterministic rule is safe.  After a long stretch
        # without objective progress we rebase the lexicographic reference
        # to the current basis and switch the entering-column choice to a
        # seeded random pick among the priced improving columns: a random
        # walk over the (finitely many) bases of the stuck vertex, which
        # escapes it with probability one and is still fully reproducible.
        stall_limit = 2 * k + 50
        stall = 0
        strict = False
        best_obj = np.inf
        self._randomize = False
        self._rng = np.random.default_rng(0x5eed)
        self._b_override = None
        banned = set()          # columns whose entry made the basis singular
        last_pivot = None       # (basis position, previous column)
        reverts = 0
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimit(
                    f"pivot cap {self.max_iter} reached in phase {phase}")
            self._factorize()
            xB = self._basic_values()
            if not np.all(np.isfinite(xB)):
                # the last pivot element was numerically zero: undo it, then
                # either break the degeneracy (rhs perturbation, drawn once)
                # or exclude the offending column from pricing
                if last_pivot is None or reverts >= 50:
                    raise RuntimeError("simplex basis became singular; the "
                                       "problem may be badly scaled")
                pos, old_j, bad_j = last_pivot
                self.basis[pos] = old_j
                self.pivot_log.append((phase, old_j, bad_j))
                last_pivot = None
                reverts += 1
                if self._b_override is None:
                    kk = int(np.sum(self.rows_act))
                    self._b_override = (
                        self.bi[self.rows_act]
                        + 1e-8 * max(1.0, np.abs(self.bi).max())
                        * self._rng.uniform(1.0, 2.0, kk))
                    best_obj = np.inf
                else:
                    banned.add(bad_j)
                self._factorize()
                xB = self._basic_values()
                if not np.all(np.isfinite(xB)):
                    raise RuntimeError("simplex basis became singular; the "
                                       "problem may be badly scaled")
            if phase == 1:
                # done as soon as every artificial is at zero; dual optimality
                # of the phase-1 objective is irrelevant
                art = [p for p, j in enumerate(self.basis) if j >= self.n]
                infeas = float(np.sum(np.abs(xB[art]))) if art else 0.0
                if infeas <= 1e-10 * max(1.0, np.abs(self.bi).max()):
                    return LpStatus.OPTIMAL
            obj = float(costs[self.basis] @ xB)
            if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
                best_obj = obj
                stall = 0
                strict = False
                self._randomize = False
                banned.clear()
            else:
                stall += 1
                if stall >= stall_limit:
                    stall = 0
                    if not strict:
                        strict = True
                        kk = int(np.sum(self.rows_act))
                        B0 = np.empty((kk, kk))
                        for p, jj in enumerate(self.basis):
                            B0[:, p] = self._int_col(jj)
                        self._lex_ref = B0
                    elif self._b_override is None:
                        # intrinsic degeneracy (far fewer support points than
                        # rows): perturb the rhs once so vertices become
                        # nondegenerate and ratio steps are strictly positive.
                        # Dual feasibility is independent of b, so the exact
                        # certificate survives; the primal gets a slack of
                        # the perturbation size, well under the tolerances.
                        kk = int(np.sum(self.rows_act))
                        self._b_override = (
                            self.bi[self.rows_act]
                            + 1e-8 * max(1.0, np.abs(self.bi).max())
                            * self._rng.uniform(1.0, 2.0, kk))
                        best_obj = np.inf
            y = self._duals(costs)
            self._basis_set = set(self.basis) | banned
            yf = self._full_duals(y)
            picked = self._price(yf, phase)
            if picked is None:
                return LpStatus.OPTIMAL
            j, _ = picked
            d = lu_solve(self._lu, self._int_col(j))
            cand = np.flatnonzero(d > self.opts.pivot_tol)
            if cand.size == 0:
                return LpStatus.UNBOUNDED
            ratios = np.maximum(xB[cand], 0.0) / d[cand]
            theta = ratios.min()
            ties = cand[ratios <= theta + 1e-12 * (1.0 + theta)]
            # keep the basis well conditioned: among tied rows, only accept
            # pivot elements within a factor of the largest; in strict mode
            # the factor is loose enough to keep the lexicographic order in
            # charge while still rejecting numerically-zero pivots
            floor = 1e-7 if strict else 0.05
            strong = ties[d[ties] >= floor * d[ties].max()]
            if strong.size:
                ties = strong
            if ties.size == 1:
                leave = int(ties[0])
            else:
                leave = self._lex_leave(ties, d)
            if self._gamma is not None:
                self._devex_update(j, leave)
            self.pivot_log.append((phase, j, self.basis[leave]))
            last_pivot = (leave, self.basis[leave], j)
            self.basis[leave] = j
            self.iterations += 1

    def _devex_update(self, q, leave):
        """Reference-weight update for Devex pricing after deciding that
        column q enters at basis position ``leave`` (before the swap).
        Uses the pivot row of B^{-1}A; weights cap at 1e12 before the
        framework is reset to ones."""
        k = int(np.sum(self.rows_act))
        e = np.zeros(k)
        e[leave] = 1.0
        w = lu_solve(self._lu, e, trans=1)
        wf = self._full_duals(w)
        alpha = wf @ self.Ai                          # pivot row over columns
        aq = alpha[q] if q < self.n else wf[q - self.n]
        if abs(aq) < 1e-12:
            return
        gq = self._gamma[q] if q < self.n else 1.0
        np.maximum(self._gamma, (alpha / aq) ** 2 * gq, out=self._gamma)
        old = self.basis[leave]
        if old < self.n:
            self._gamma[old] = max(gq / aq ** 2, 1.0)
        if self._gamma.max() > 1e12:
            self._gamma[:] = 1.0

    def _lex_leave(self, ties, d):
        """Lexicographic ratio-test tie break: among the tied rows, pick the
        one whose row of B^{-1} B0 (B0 the phase-start basis), scaled by the
        pivot element, is lexicographically smallest.  Prevents cycling under
        degeneracy while Dantzig pricing stays in effect."""
        k = int(np.sum(self.rows_act))
        E = np.zeros((k, ties.size))
        E[ties, np.arange(ties.size)] = 1.0
        V = lu_solve(self._lu, E, trans=1)               # columns = rows of B^-1
        M = (V.T @ self._lex_ref) / d[ties][:, None]     # rows to compare
        order = np.lexsort(M.T[::-1])
        return int(ties[order[0]])

    def _purge_artificials(self):
        """After Phase I at value ~0: pivot artificials out of the basis, or
        drop their rows as redundant when no real pivot element exists."""
        changed = True
        while changed:
            changed = False
            for pos, j in enumerate(list(self.basis)):
                if j < self.n:
                    continue
                self._factorize()
                k = int(np.sum(self.rows_act))
                e = np.zeros(k)
                e[pos] = 1.0
                w = lu_solve(self._lu, e, trans=1)
                wf = self._full_duals(w)
                pivot_j = None
                basis_set = set(self.basis)
                for s, t in self.lp.blocks(self.opts.block_size):
                    A, _ = self._int_block(s, t)
                    vals = np.abs(wf @ A)
                    hits = np.flatnonzero(vals > 1e-7)
                    for h in hits:
                        if (s + h) not in basis_set:
                            pivot_j = s + int(h)
                            break
                    if pivot_j is not None:
                        break
                if pivot_j is not None:
                    self.pivot_log.append((1, pivot_j, j))
                    self.basis[pos] = pivot_j
                else:
                    # redundant row: deactivate it and remove the artificial
                    act = np.flatnonzero(self.rows_act)
                    self.rows_act[act[pos]] = False
                    del self.basis[pos]
                changed = True
                break

    def _primal_residual(self, xB):
        act = np.flatnonzero(self.rows_act)
        res = -self.bi[act]
        for p, j in enumerate(self.basis):
            res = res + self._int_col(j) * xB[p]
        return float(np.abs(res).max()) if res.size else 0.0
