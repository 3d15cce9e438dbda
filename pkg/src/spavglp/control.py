"""Feedback synthesis from dual certificates.

The control at (y, z) is the minimizer over the control box of

    Q(u) = G(u, y, z) + grad(zeta)(z)' g(u, y, z) + grad(eta_z)(y)' f(u, y, z),

found by a coarse grid scan followed by per-coordinate golden-section
refinement inside the bracketing cell.  Evaluation is deterministic:
the scan breaks ties toward the lowest grid index and the refinement
schedule is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .averaging import DualCertificate
from .errors import DomainViolation

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    scan_points: int = 11
    refine_iters: int = 30


class FeedbackLaw:
    def __init__(self, certificate: DualCertificate, problem=None,
                 u_search: SearchConfig = SearchConfig()):
        self.certificate = certificate
        self.problem = problem if problem is not None else certificate.problem
        self.u_search = u_search
        self._z_cache = None
        box = self.problem.u_box
        axes = [np.linspace(box.lower[d], box.upper[d], u_search.scan_points)
                for d in range(box.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self._scan = np.stack([m.ravel() for m in mesh], axis=-1)   # (S, du)
        self._cell = (box.upper - box.lower) / (u_search.scan_points - 1)

    # -- Q evaluation -------------------------------------------------------

    def _q_batch(self, U, Y, Z, grad_zeta, grad_eta):
        """Q at U (..., du) against broadcastable Y, Z and the per-point
        certificate gradients (..., dim)."""
        p = self.problem
        f = p.f_batch(U, Y, Z)
        g = p.g_batch(U, Y, Z)
        G = p.G_batch(U, Y, Z)
        return G + np.sum(grad_zeta * g, axis=-1) + np.sum(grad_eta * f, axis=-1)

    def _grads(self, Y, Z):
        cert = self.certificate
        # associated-system runs call this thousands of times with the very
        # same frozen Z batch; the z-dependent half (omegas, grad zeta) is
        # memoized on the Z buffer, only the y-dependent half is recomputed
        key = (Z.shape, hash(Z.tobytes()))
        if self._z_cache is None or self._z_cache[0] != key:
            omegas, _ = cert.omegas_batch(Z)
            self._z_cache = (key, omegas, cert.grad_zeta_at(Z))
        _, omegas, grad_zeta = self._z_cache
        return grad_zeta, cert.grad_eta_at(omegas, Y)

    def q_value(self, u, y, z):
        """Q(u) at a single point."""
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        gz, ge = self._grads(y[None, :], z[None, :])
        return float(self._q_batch(np.asarray(u, dtype=float)[None, :],
                                   y[None, :], z[None, :], gz, ge)[0])

    # -- argmin -------------------------------------------------------------

    def feedback_batch(self, Y, Z, check=True):
        """Minimizers of Q for a batch of (y, z) pairs; shapes (B, dim)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if check:
            for y in Y:
                if not self.problem.y_box.contains(y, 1e-9):
                    raise DomainViolation(f"y={y} outside Y box")
            for z in Z:
                if not self.problem.z_box.contains(z, 1e-9):
                    raise DomainViolation(f"z={z} outside Z box")
        B = max(Y.shape[0], Z.shape[0])
        if Y.shape[0] != B:
            Y = np.broadcast_to(Y, (B, Y.shape[1]))
        if Z.shape[0] != B:
            Z = np.broadcast_to(Z, (B, Z.shape[1]))
        grad_zeta, grad_eta = self._grads(Y, Z)

        q = self._q_batch(self._scan[None, :, :], Y[:, None, :], Z[:, None, :],
                          grad_zeta[:, None, :], grad_eta[:, None, :])   # (B, S)
        best_idx = np.argmin(q, axis=1)                                  # first min
        u = self._scan[best_idx].copy()                                  # (B, du)
        best_f = q[np.arange(B), best_idx]

        box = self.problem.u_box
        for d in range(box.dim):
            lo = np.clip(u[:, d] - self._cell[d], box.lower[d], box.upper[d])
            hi = np.clip(u[:, d] + self._cell[d], box.lower[d], box.upper[d])
            xd, fd = self._golden(d, u, lo, hi, Y, Z, grad_zeta, grad_eta)
            improve = fd < best_f
            u[improve, d] = xd[improve]
            best_f = np.where(improve, fd, best_f)
        return u

    def _golden(self, d, u, a, b, Y, Z, grad_zeta, grad_eta):
        """Vectorized golden-section minimization of Q along coordinate d
        within [a, b]; returns the best evaluated point and value."""
        def qd(x):
            uu = u.copy()
            uu[:, d] = x
            return self._q_batch(uu, Y, Z, grad_zeta, grad_eta)

        x1 = b - _INVPHI * (b - a)
        x2 = a + _INVPHI * (b - a)
        f1, f2 = qd(x1), qd(x2)
        best_x = np.where(f1 <= f2, x1, x2)
        best_f = np.minimum(f1, f2)
        for _ in range(self.u_search.refine_iters):
            left = f1 < f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            xe = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
            fe = qd(xe)
            x1, f1, x2, f2 = (np.where(left, xe, x2), np.where(left, fe, f2),
                              np.where(left, x1, xe), np.where(left, f1, fe))
            improve = fe < best_f
            best_x = np.where(improve, xe, best_x)
            best_f = np.where(improve, fe, best_f)
        return best_x, best_f

    def feedback(self, y, z):
        return self.feedback_batch(np.asarray(y, dtype=float)[None, :],
                                   np.asarray(z, dtype=float)[None, :])[0]

    def optimality_residual(self, u, y, z) -> float:
        """Q(u, y, z) - theta; vanishes at support points of the outer LP,
        nonnegative (up to grid tolerance) elsewhere."""
        u = np.asarray(u, dtype=float)
        if not self.problem.u_box.contains(u, 1e-9):
            raise DomainViolation(f"u={u} outside U box")
        if not self.problem.y_box.contains(np.asarray(y, dtype=float), 1e-9):
            raise DomainViolation(f"y={y} outside Y box")
        if not self.problem.z_box.contains(np.asarray(z, dtype=float), 1e-9):
            raise DomainViolation(f"z={z} outside Z box")
        return self.q_value(u, y, z) - self.certificate.theta


def feedback(law: FeedbackLaw, y, z):
    return law.feedback(y, z)


def optimality_residual(law: FeedbackLaw, u, y, z) -> float:
    return law.optimality_residual(u, y, z)
