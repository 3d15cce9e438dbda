"""Discretized averaged LP (outer) and per-z associated LP (inner).

The outer problem minimizes the running cost over discrete occupational
measures gamma on a product grid of U x Y x Z, subject to normalization,
M fast constraints (integrals of grad(phi_i)' f vanish) and N slow
constraints (integrals of grad(psi_j)' g vanish).  The outer duals give
the slow polynomial multiplier zeta(z) and the optimal value theta; the
per-z inner LP recovers the fast multiplier eta_z(y) and the pointwise
Hamiltonian value sigma(z).
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .basis import MonomialBasis
from .errors import DomainViolation, GridTooCoarse, IterationLimit
from .model import ControlProblem

_log = logging.getLogger(__name__)

SUPPORT_WEIGHT_TOL = 1e-10
OMEGA_QUANT = 1e-6
INNER_FEAS_TOL = 1e-6


def _num_threads():
    env = os.environ.get("SPAVGLP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class GridSpec:
    points_per_dim_u: int
    points_per_dim_y: int
    points_per_dim_z: int

    def __post_init__(self):
        for p in (self.points_per_dim_u, self.points_per_dim_y, self.points_per_dim_z):
            if p < 2:
                raise ValueError("grids need >= 2 points per dimension")

    def axes(self, problem: ControlProblem):
        def mk(box, p):
            return [np.linspace(box.lower[d], box.upper[d], p) for d in range(box.dim)]
        return (mk(problem.u_box, self.points_per_dim_u),
                mk(problem.y_box, self.points_per_dim_y),
                mk(problem.z_box, self.points_per_dim_z))


def _product(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class OuterIndex:
    """Decodes flat outer-LP column indices into (u, y, z) grid points."""
    U: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    @property
    def shape(self):
        return (self.U.shape[0], self.Y.shape[0], self.Z.shape[0])

    def decode(self, j):
        nu, ny, nz = self.shape
        iz = j % nz
        iy = (j // nz) % ny
        iu = j // (nz * ny)
        return iu, iy, iz

    def point(self, j):
        iu, iy, iz = self.decode(j)
        return self.U[iu], self.Y[iy], self.Z[iz]


def build_outer_lp(problem: ControlProblem, grids: GridSpec,
                   basis_y: MonomialBasis, basis_z: MonomialBasis) -> lpmod.LinearProgram:
    """Outer LP over the product grid; see the module docstring for rows."""
    au, ay, az = grids.axes(problem)
    return build_outer_lp_from_axes(problem, au, ay, az, basis_y, basis_z)


def build_outer_lp_from_axes(problem, axes_u, axes_y, axes_z, basis_y, basis_z):
    U, Y, Z = _product(axes_u), _product(axes_y), _product(axes_z)
    nu, ny, nz = U.shape[0], Y.shape[0], Z.shape[0]
    M, N = basis_y.count, basis_z.count
    rows = 1 + M + N
    ncols = nu * ny * nz
    if ncols < rows:
        raise GridTooCoarse(f"{ncols} columns < {rows} constraint rows")

    full = (nu, ny, nz)
    f_vals = np.broadcast_to(
        problem.f_batch(U[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :]),
        full + (problem.dim_y,))
    g_vals = np.broadcast_to(
        problem.g_batch(U[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :]),
        full + (problem.dim_z,))
    G_vals = np.broadcast_to(
        problem.G_batch(U[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :]),
        full)
    gradphi = basis_y.gradients_at(Y)        # (M, ny, dim_y)
    gradpsi = basis_z.gradients_at(Z)        # (N, nz, dim_z)

    A = np.empty((rows, ncols))
    A[0, :] = 1.0
    np.einsum("iym,uyzm->iuyz", gradphi, f_vals,
              out=A[1:1 + M].reshape(M, nu, ny, nz))
    np.einsum("izn,uyzn->iuyz", gradpsi, g_vals,
              out=A[1 + M:].reshape(N, nu, ny, nz))
    b = np.zeros(rows)
    b[0] = 1.0
    out = lpmod.LinearProgram(rows, ncols, b, dense=A, costs=G_vals.reshape(ncols))
    out.index = OuterIndex(U=U, Y=Y, Z=Z)
    out.num_fast = M
    out.num_slow = N
    return out


def build_inner_lp(problem: ControlProblem, z, lam, grids: GridSpec,
                   basis_y: MonomialBasis, basis_z: MonomialBasis) -> lpmod.LinearProgram:
    """Per-z LP over measures mu on the U x Y grid: minimize the integral of
    G + grad(zeta)' g subject to normalization and the M fast constraints
    evaluated at this z."""
    z = np.asarray(z, dtype=float)
    if not problem.z_box.contains(z):
        raise DomainViolation(f"z={z} outside Z box")
    au, ay, _ = grids.axes(problem)
    U, Y = _product(au), _product(ay)
    nu, ny = U.shape[0], Y.shape[0]
    M = basis_y.count
    lam = np.asarray(lam, dtype=float)
    grad_zeta = np.einsum("i,id->d", lam, basis_z.gradients_at(z[None, :])[:, 0, :])

    f_vals = np.broadcast_to(problem.f_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny, problem.dim_y))
    g_vals = np.broadcast_to(problem.g_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny, problem.dim_z))
    G_vals = np.broadcast_to(problem.G_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny))
    gradphi = basis_y.gradients_at(Y)
    ncols = nu * ny
    A = np.empty((1 + M, ncols))
    A[0, :] = 1.0
    np.einsum("iym,uym->iuy", gradphi, f_vals, out=A[1:].reshape(M, nu, ny))
    cost = (G_vals + g_vals @ grad_zeta).reshape(ncols)
    b = np.zeros(1 + M)
    b[0] = 1.0
    out = lpmod.LinearProgram(1 + M, ncols, b, dense=A, costs=cost)
    out.U = U
    out.Y = Y
    return out


@dataclass
class DiscreteMeasure:
    """Finitely supported probability measure."""
    points: list                     # tuples of arrays, (u, y) or (u, y, z)
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-12):
            raise ValueError("negative weight")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        self.weights = w


class DualCertificate:
    """Polynomial multipliers defining the synthesized feedback.

    lambda gives zeta(z) = sum_i lambda_i psi_i(z); omega_z (cached per
    quantized z, computed by an inner LP on demand) gives
    eta_z(y) = sum_i omega_{z,i} phi_i(y) with the inner optimal value
    sigma(z).  theta is the outer optimal value.
    """

    def __init__(self, lambda_, theta, omega_bar, problem, grids, basis_y, basis_z,
                 lp_options=None):
        self.lambda_ = np.asarray(lambda_, dtype=float)
        self.theta = float(theta)
        self.omega_bar = np.asarray(omega_bar, dtype=float)  # outer fast duals
        self.problem = problem
        self.grids = grids
        self.basis_y = basis_y
        self.basis_z = basis_z
        self.lp_options = lp_options
        self.omega_cache: dict[tuple, tuple[np.ndarray, float]] = {}
        self._lock = threading.Lock()

    # -- polynomial evaluation --------------------------------------------

    def zeta(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return float(self.lambda_ @ self.basis_z.values_at(z)[:, 0])

    def grad_zeta_at(self, Z):
        """Gradient of zeta at points Z (B, dim_z) -> (B, dim_z)."""
        g = self.basis_z.gradients_at(np.atleast_2d(Z))
        return np.einsum("i,ibd->bd", self.lambda_, g)

    def grad_eta_at(self, omegas, Y):
        """Gradients of eta for per-point omega rows (B, M) at Y (B, dim_y)."""
        g = self.basis_y.gradients_at(np.atleast_2d(Y))
        return np.einsum("bi,ibd->bd", np.atleast_2d(omegas), g)

    # -- inner problem ------------------------------------------------------

    @staticmethod
    def _key(z):
        return tuple(np.round(np.asarray(z, dtype=float) / OMEGA_QUANT).astype(np.int64))

    def omega_sigma(self, z):
        """(omega_z, sigma(z)); solves and caches the inner LP on a miss."""
        z = np.asarray(z, dtype=float)
        if not self.problem.z_box.contains(z):
            raise DomainViolation(f"z={z} outside Z box")
        key = self._key(z)
        with self._lock:
            hit = self.omega_cache.get(key)
        if hit is not None:
            return hit
        inner = build_inner_lp(self.problem, z, self.lambda_, self.grids,
                               self.basis_y, self.basis_z)
        sol = lpmod.solve(inner, self.lp_options)
        if sol.status is not lpmod.LpStatus.OPTIMAL:
            raise RuntimeError(f"inner LP at z={z}: {sol.status}")
        omega = -sol.duals[1:]
        sigma = float(sol.objective)
        with self._lock:
            self.omega_cache.setdefault(key, (omega, sigma))
        return self.omega_cache[key]

    def omegas_batch(self, Z):
        """omega rows and sigmas for many z values; misses solved in order."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        out_w = np.empty((Z.shape[0], self.basis_y.count))
        out_s = np.empty(Z.shape[0])
        for i, z in enumerate(Z):
            out_w[i], out_s[i] = self.omega_sigma(z)
        return out_w, out_s

    def to_dict(self):
        entries = [{"key": list(k), "omega": w.tolist(), "sigma": s}
                   for k, (w, s) in sorted(self.omega_cache.items())]
        return {"lambda": self.lambda_.tolist(), "theta": self.theta,
                "omega_bar": self.omega_bar.tolist(), "omega_quant": OMEGA_QUANT,
                "omega_cache": entries}

    def load_cache(self, entries):
        for e in entries:
            self.omega_cache[tuple(e["key"])] = (np.array(e["omega"]), float(e["sigma"]))

    @classmethod
    def from_dict(cls, data, problem, grids, basis_y, basis_z,
                  lp_options=None) -> "DualCertificate":
        cert = cls(data["lambda"], data["theta"], data["omega_bar"],
                   problem, grids, basis_y, basis_z, lp_options=lp_options)
        cert.load_cache(data.get("omega_cache", []))
        return cert


def hamiltonian_sigma(certificate: DualCertificate, z) -> float:
    """Inner LP optimal value sigma(z), cached on quantized z."""
    return certificate.omega_sigma(z)[1]


@dataclass
class StructuredSolution:
    """Dirac decomposition of the optimal outer measure plus certificates."""
    outer_value: float
    z_groups: list                    # [(z_k, p_k, DiscreteMeasure over (u, y))]
    certificate: DualCertificate
    support: list = field(default_factory=list)   # [(col_index, weight)]
    residuals: dict = field(default_factory=dict)

    @property
    def support_size(self):
        return sum(len(inner.weights) for _, _, inner in self.z_groups)

    def sigma_by_z(self):
        out = {}
        for z_k, _, _ in self.z_groups:
            out[tuple(np.round(z_k, 12))] = hamiltonian_sigma(self.certificate, z_k)
        return out

    def to_dict(self):
        groups = []
        for z_k, p_k, inner in self.z_groups:
            groups.append({
                "z": np.asarray(z_k).tolist(),
                "p": float(p_k),
                "inner": [{"u": np.asarray(u).tolist(), "y": np.asarray(y).tolist(),
                           "q": float(q)}
                          for (u, y), q in zip(inner.points, inner.weights)],
            })
        return {
            "outer_value": self.outer_value,
            "lambda": self.certificate.lambda_.tolist(),
            "theta": self.certificate.theta,
            "groups": groups,
            "support": [[int(j), float(w)] for j, w in self.support],
            "sigma_by_z": {",".join(f"{v:.12g}" for v in k): s
                           for k, s in self.sigma_by_z().items()},
            "residuals": self.residuals,
        }

    @classmethod
    def from_dict(cls, data, certificate: DualCertificate) -> "StructuredSolution":
        groups = []
        for g in data["groups"]:
            pts = [(np.asarray(e["u"], dtype=float), np.asarray(e["y"], dtype=float))
                   for e in g["inner"]]
            wts = np.asarray([e["q"] for e in g["inner"]], dtype=float)
            groups.append((np.asarray(g["z"], dtype=float), float(g["p"]),
                           DiscreteMeasure(points=pts, weights=wts)))
        return cls(outer_value=float(data["outer_value"]), z_groups=groups,
                   certificate=certificate,
                   support=[(int(j), float(w)) for j, w in data.get("support", [])],
                   residuals=dict(data.get("residuals", {})))

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def mixture_measure(self) -> DiscreteMeasure:
        """Flattened measure sum_k sum_j p_k q_j^k delta(u_j^k, y_j^k, z_k)."""
        pts, wts = [], []
        for z_k, p_k, inner in self.z_groups:
            for (u, y), q in zip(inner.points, inner.weights):
                pts.append((u, y, z_k))
                wts.append(p_k * q)
        return DiscreteMeasure(points=pts, weights=np.asarray(wts))


def solve_averaged(problem: ControlProblem, grids: GridSpec,
                   basis_y: MonomialBasis, basis_z: MonomialBasis,
                   lp_options: lpmod.SolveOptions | None = None,
                   refine: bool = False) -> StructuredSolution:
    """Solve the discretized averaged problem with the fast constraints
    enforced separately at every z grid point.

    The full LP (normalization + M fast rows per z point + N slow rows)
    is solved by column generation: a small master LP over columns that
    pair a z grid point with a vertex of its fast-constraint polytope,
    priced by the per-z inner LPs under the current slow multiplier.
    This keeps every LP small while being exactly equivalent to the
    per-z-constrained product-grid LP at convergence.

    With ``refine``, re-solves once on grids locally refined (3x) around
    the support points of the first solve.
    """
    axes = grids.axes(problem)
    res = _column_generation(problem, axes, basis_y, basis_z, lp_options)
    if refine:
        axes = _refined_axes(problem, axes, res["support_points"])
        res = _column_generation(problem, axes, basis_y, basis_z, lp_options)
    return _structure(problem, grids, basis_y, basis_z, res, lp_options)


def _refined_axes(problem, axes, pts):
    axes_u, axes_y, axes_z = axes

    def refine(axes, vals, box):
        out = []
        for d, ax in enumerate(axes):
            h = ax[1] - ax[0]
            extra = []
            for v in vals:
                for k in (-2, -1, 1, 2):
                    extra.append(v[d] + k * h / 3.0)
            merged = np.unique(np.clip(np.concatenate([ax, extra]),
                                       box.lower[d], box.upper[d]))
            # drop near-duplicates introduced by clipping
            keep = np.concatenate([[True], np.diff(merged) > 1e-12])
            out.append(merged[keep])
        return out

    return (refine(axes_u, [p[0] for p in pts], problem.u_box),
            refine(axes_y, [p[1] for p in pts], problem.y_box),
            refine(axes_z, [p[2] for p in pts], problem.z_box))


MAX_CG_ROUNDS = 300


def _column_generation(problem, axes, basis_y, basis_z, lp_options):
    """Column generation for the per-z-constrained averaged LP.

    Master rows: 1 normalization + N slow constraints.  Each real column
    is a pair (z grid point, probability vector w on the U x Y grid with
    all M fast moments of w vanishing at that z); its master entries are
    (1, grad(psi_j)(z)' gbar_w) with gbar_w the w-average of g, and its
    cost is the w-average of G.  Pricing at duals (theta, lambda) solves
    the per-z inner LP; a column enters while sigma(z) - theta < -tol.
    """
    axes_u, axes_y, axes_z = axes
    U, Y, Z = _product(axes_u), _product(axes_y), _product(axes_z)
    nu, ny, nz = U.shape[0], Y.shape[0], Z.shape[0]
    nuy = nu * ny
    M, N = basis_y.count, basis_z.count
    if nuy * nz < 1 + M + N:
        raise GridTooCoarse(f"{nuy * nz} columns < {1 + M + N} constraint rows")

    n = problem.dim_z
    shape = (nu, ny, nz)
    G_all = np.ascontiguousarray(np.broadcast_to(
        problem.G_batch(U[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :]),
        shape).transpose(2, 0, 1).reshape(nz, nuy))
    g_all = np.ascontiguousarray(np.broadcast_to(
        problem.g_batch(U[:, None, None, :], Y[None, :, None, :], Z[None, None, :, :]),
        shape + (n,)).transpose(2, 0, 1, 3).reshape(nz, nuy, n))
    gradphi = basis_y.gradients_at(Y)        # (M, ny, dim_y)
    gradpsi = basis_z.gradients_at(Z)        # (N, nz, dim_z)

    def inner_matrix(k):
        fk = np.broadcast_to(problem.f_batch(U[:, None, :], Y[None, :, :], Z[k]),
                             (nu, ny, problem.dim_y))
        A = np.empty((1 + M, nuy))
        A[0, :] = 1.0
        np.einsum("iym,uym->iuy", gradphi, fk, out=A[1:].reshape(M, nu, ny))
        return A

    A_shared = inner_matrix(0) if problem.weakly_coupled else None

    def matrix_for(k):
        return A_shared if A_shared is not None else inner_matrix(k)

    e0 = np.zeros(1 + M)
    e0[0] = 1.0
    b_master = np.zeros(1 + N)
    b_master[0] = 1.0
    tol = (lp_options or lpmod.SolveOptions()).opt_tol
    # the master must out-resolve the pricing threshold even when its duals
    # are large (its relative pricing tolerance scales with ||duals||), or
    # near-converged columns are re-priced forever without being adopted
    master_opts = lp_options
    if master_opts is None:
        master_opts = lpmod.SolveOptions(opt_tol=1e-11)

    col_vecs, col_costs, col_meta = [], [], []
    seen = set()
    inner_warm: dict[int, tuple] = {}

    def price(lam_vec, theta_val, with_cost):
        """One pricing sweep over the z grid.  With ``with_cost`` the inner
        objective is the running cost plus the slow-multiplier term (regular
        pricing); without, only the slow-multiplier term (Farkas pricing to
        restore master feasibility: a column helps when the inner value
        drops below theta_val = y_0 of the infeasibility certificate)."""
        grad_zeta = np.einsum("i,ikd->kd", lam_vec, gradpsi)   # (nz, dim_z)
        added = 0
        worst = np.inf
        om = {}
        for k in range(nz):
            cost_k = g_all[k] @ grad_zeta[k]
            if with_cost:
                cost_k = cost_k + G_all[k]
            inner = lpmod.LinearProgram(1 + M, nuy, e0, dense=matrix_for(k),
                                        costs=cost_k)
            # warm start: same rows and rhs, only the costs move between
            # pricing rounds (and, when f is z-independent, between z too),
            # so the previous optimal basis is primal feasible here
            isol = lpmod.solve(inner, lp_options,
                               warm_basis=inner_warm.get(k) or
                               (inner_warm.get(k - 1) if A_shared is not None
                                else None))
            if isol.status is not lpmod.LpStatus.OPTIMAL:
                raise RuntimeError(f"inner LP at z={Z[k]}: {isol.status.value}")
            if not isol.dropped_rows:
                inner_warm[k] = isol.basis
            sigma = float(isol.objective)
            om[k] = (-isol.duals[1:], sigma)
            red = sigma - theta_val
            worst = min(worst, red)
            if red < -tol * (1.0 + abs(theta_val) if np.isfinite(theta_val) else 1.0):
                pairs = [(j, v) for j, v in isol.basic_cols if v > SUPPORT_WEIGHT_TOL]
                idx = np.array([j for j, _ in pairs], dtype=int)
                wts = np.array([v for _, v in pairs])
                key = (k, tuple(idx), tuple(np.round(wts, 12)))
                if key in seen:
                    continue
                seen.add(key)
                vec = np.empty(1 + N)
                vec[0] = 1.0
                vec[1:] = gradpsi[:, k, :] @ (wts @ g_all[k][idx])
                col_vecs.append(vec)
                col_costs.append(float(wts @ G_all[k][idx]))
                col_meta.append((k, idx, wts))
                added += 1
        return added, worst, om

    # primer: the per-z optima under a zero slow multiplier
    price(np.zeros(N), np.inf, with_cost=True)
    theta = np.inf
    lam = np.zeros(N)
    omegas = {}
    master_sol = None
    min_red = np.inf
    converged = False
    master_warm = None
    for _round in range(MAX_CG_ROUNDS):
        mlp = lpmod.LinearProgram(1 + N, len(col_costs), b_master,
                                  dense=np.stack(col_vecs, axis=1),
                                  costs=np.array(col_costs))
        master_sol = lpmod.solve(mlp, master_opts, warm_basis=master_warm)
        if (master_sol.status is lpmod.LpStatus.OPTIMAL
                and not master_sol.dropped_rows):
            master_warm = master_sol.basis
        if master_sol.status is lpmod.LpStatus.INFEASIBLE:
            if master_sol.duals is None:
                raise RuntimeError("master LP infeasible without certificate")
            y = master_sol.duals
            added, _, _ = price(-y[1:], float(y[0]), with_cost=False)
            if added == 0:
                raise RuntimeError("averaged problem infeasible on this grid: "
                                   "no measure satisfies the slow constraints")
            continue
        if master_sol.status is not lpmod.LpStatus.OPTIMAL:
            raise RuntimeError(f"master LP: {master_sol.status.value}")
        theta = float(master_sol.duals[0])
        lam = -master_sol.duals[1:]
        added, min_red, omegas = price(lam, theta, with_cost=True)
        _log.debug("round %d: master %.9f, theta %.9f, %d columns added, "
                   "worst reduced cost %.3e (%d columns total)",
                   _round, float(master_sol.objective), theta, added,
                   min_red, len(col_costs))
        if added == 0:
            converged = True
            break
    if not converged:
        raise IterationLimit(f"column generation: no convergence in "
                             f"{MAX_CG_ROUNDS} rounds (gap {min_red:.3e})")

    value = float(master_sol.objective)

    # accumulate the optimal measure per z group
    groups: dict[int, dict[int, float]] = {}
    for j, v in master_sol.basic_cols:
        if v <= SUPPORT_WEIGHT_TOL:
            continue
        k, idx, wts = col_meta[j]
        acc = groups.setdefault(k, {})
        for i, w in zip(idx, wts):
            acc[int(i)] = acc.get(int(i), 0.0) + v * w

    # pointwise dual-feasibility transcript on the full product grid
    grad_zeta = np.einsum("i,ikd->kd", lam, gradpsi)
    min_feas = np.inf
    sup_res = 0.0
    for k in range(nz):
        omega, _sigma = omegas[k]
        r = (G_all[k] + g_all[k] @ grad_zeta[k]
             + omega @ matrix_for(k)[1:] - theta)
        min_feas = min(min_feas, float(r.min()))
        if k in groups:
            idx = np.fromiter(groups[k].keys(), dtype=int)
            sup_res = max(sup_res, float(np.abs(r[idx]).max()))

    return {
        "value": float(value),
        "theta": theta,
        "lam": lam,
        "omegas": omegas,
        "groups": groups,
        "U": U, "Y": Y, "Z": Z,
        "g_all": g_all, "G_all": G_all,
        "matrix_for": matrix_for,
        "support_points": [(U[i // ny], Y[i % ny], Z[k])
                           for k, acc in groups.items() for i in acc],
        "residuals": {
            "min_dual_feasibility": min_feas,
            "max_abs_support_residual": sup_res,
            "primal_residual": master_sol.primal_residual,
            "pricing_gap": float(min_red) if np.isfinite(min_red) else 0.0,
        },
    }


def _reduce_group(Ak, g_k, G_k, idx, q, lp_options):
    """Shrink a group's inner measure to a basic solution that preserves
    its mass, fast moments, g-average and G-average."""
    Asub = np.vstack([Ak[:, idx], g_k[idx].T, G_k[idx][None, :]])
    if idx.size <= Asub.shape[0]:
        return idx, q
    b = Asub @ q
    sol = lpmod.solve(lpmod.LinearProgram(Asub.shape[0], idx.size, b,
                                          dense=Asub, costs=np.zeros(idx.size)),
                      lp_options)
    if sol.status is not lpmod.LpStatus.OPTIMAL:
        return idx, q
    pairs = [(j, v) for j, v in sol.basic_cols if v > SUPPORT_WEIGHT_TOL]
    if not pairs:
        return idx, q
    sub = np.array([j for j, _ in pairs], dtype=int)
    wts = np.array([v for _, v in pairs])
    return idx[sub], wts / wts.sum()


def _structure(problem, grids, basis_y, basis_z, res, lp_options):
    theta = res["theta"]
    lam = res["lam"]
    U, Y, Z = res["U"], res["Y"], res["Z"]
    ny, nz = Y.shape[0], Z.shape[0]

    heaviest = max(res["groups"], key=lambda k: sum(res["groups"][k].values()),
                   default=None)
    omega_bar = (res["omegas"][heaviest][0] if heaviest is not None
                 else np.zeros(basis_y.count))
    cert = DualCertificate(lam, theta, omega_bar, problem, grids, basis_y, basis_z,
                           lp_options=lp_options)
    for k, (omega, sigma) in res["omegas"].items():
        cert.omega_cache[cert._key(Z[k])] = (omega, sigma)

    z_groups = []
    support = []
    for k in sorted(res["groups"]):
        acc = res["groups"][k]
        idx = np.fromiter(acc.keys(), dtype=int)
        wts = np.fromiter((acc[int(i)] for i in idx), dtype=float)
        p_k = float(wts.sum())
        idx, q = _reduce_group(res["matrix_for"](k), res["g_all"][k],
                               res["G_all"][k], idx, wts / p_k, lp_options)
        pts = [(U[i // ny], Y[i % ny]) for i in idx]
        z_groups.append((Z[k], p_k, DiscreteMeasure(points=pts, weights=q)))
        support.extend((int(i) * nz + k, p_k * float(w)) for i, w in zip(idx, q))
    # reorder groups by weight (heaviest first), deterministic
    z_groups.sort(key=lambda g: (-g[1], tuple(g[0])))

    residuals = dict(res["residuals"])
    structured = StructuredSolution(outer_value=res["value"],
                                    z_groups=z_groups, certificate=cert,
                                    support=support, residuals=residuals)
    residuals["inner_consistency_max"] = _inner_consistency(structured)
    return structured


def verify_solution(problem, grids: GridSpec, basis_y: MonomialBasis,
                    basis_z: MonomialBasis, solution: StructuredSolution) -> dict:
    """Independent certificate check on the full product grid.

    Re-evaluates the pointwise dual feasibility
    G + grad(zeta)' g + grad(eta_z)' f - theta >= -tol at every grid point
    (eta_z from the per-z inner LPs) and the residuals at the solution's
    support, plus the measure-structure invariants.
    """
    cert = solution.certificate
    axes_u, axes_y, axes_z = grids.axes(problem)
    U, Y, Z = _product(axes_u), _product(axes_y), _product(axes_z)
    nu, ny = U.shape[0], Y.shape[0]
    nuy = nu * ny
    theta = cert.theta
    gradphi = basis_y.gradients_at(Y)
    sup_by_k = {}
    for z_k, p_k, inner in solution.z_groups:
        k = int(np.argmin(np.abs(Z - z_k).sum(axis=1)))
        sup_by_k[k] = inner
    min_feas = np.inf
    sup_res = 0.0
    for k, z in enumerate(Z):
        omega, _sigma = cert.omega_sigma(z)
        fk = np.broadcast_to(problem.f_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny, problem.dim_y))
        gk = np.broadcast_to(problem.g_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny, problem.dim_z)).reshape(nuy, problem.dim_z)
        Gk = np.broadcast_to(problem.G_batch(U[:, None, :], Y[None, :, :], z),
                             (nu, ny)).reshape(nuy)
        eta_rows = np.einsum("i,iym,uym->uy", omega, gradphi, fk).reshape(nuy)
        gz = cert.grad_zeta_at(z[None, :])[0]
        r = Gk + gk @ gz + eta_rows - theta
        min_feas = min(min_feas, float(r.min()))
        if k in sup_by_k:
            inner = sup_by_k[k]
            for (u, y), q in zip(inner.points, inner.weights):
                i = (int(np.argmin(np.abs(U - u).sum(axis=1))) * ny
                     + int(np.argmin(np.abs(Y - y).sum(axis=1))))
                sup_res = max(sup_res, abs(float(r[i])))
    masses = [p_k for _, p_k, _ in solution.z_groups]
    weight_err = abs(sum(masses) - 1.0)
    for _, _, inner in solution.z_groups:
        weight_err = max(weight_err, abs(float(inner.weights.sum()) - 1.0))
    return {
        "min_dual_feasibility": min_feas,
        "max_abs_support_residual": sup_res,
        "weight_error": weight_err,
        "support_size": solution.support_size,
        "num_groups": len(solution.z_groups),
        "theta": theta,
        "outer_value": solution.outer_value,
        "value_matches_theta": abs(solution.outer_value - theta)
        <= 1e-6 * (1 + abs(theta)),
    }


def residual_report(outer, sol, support):
    """Dual-feasibility and complementary-slackness transcript for the
    outer LP: residual_j = c_j - duals . A_j over every grid column."""
    r = outer._costs - sol.duals @ outer._dense
    sup = np.array([j for j, _ in support], dtype=int)
    return {
        "min_dual_feasibility": float(r.min()),
        "max_abs_support_residual": float(np.abs(r[sup]).max()) if sup.size else 0.0,
        "primal_residual": sol.primal_residual,
    }


def _inner_consistency(structured: StructuredSolution) -> float:
    """max over groups of sigma(z_k) - sum_j q_j [G + grad(zeta)' g](u_j, y_j, z_k);
    should be <= tolerance (the inner LP can only do at least as well)."""
    cert = structured.certificate
    problem = cert.problem
    worst = -np.inf
    for z_k, _, inner in structured.z_groups:
        gz = cert.grad_zeta_at(z_k[None, :])[0]
        total = 0.0
        for (u, y), q in zip(inner.points, inner.weights):
            g = np.asarray(problem.g(u, y, z_k), dtype=float)
            total += q * (float(problem.G(u, y, z_k)) + gz @ g)
        sigma = hamiltonian_sigma(cert, z_k)
        worst = max(worst, sigma - total)
    return float(worst) if structured.z_groups else 0.0
