"""Numerical integration of the associated, averaged and singularly
perturbed systems, occupational-measure estimation, and the two-timescale
control schedule.

All integrators are fixed-step RK4 with the control sampled at the start
of each step and held constant across the four stages.  The averaged
drift is the long-run average of g along closed-loop associated runs;
it is cached on a quantized z-grid with batched (vectorized) refills so
that averaged integration stays tractable in pure numpy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import make_basis
from .errors import (NoPeriodDetected, ScheduleExhausted, ViabilityViolation)

VIABILITY_TOL = 1e-6


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def prefix_average(times, values):
    """Trapezoidal prefix time-average; entry 0 equals values[0]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size != values.size:
        raise ValueError("length mismatch")
    out = np.empty_like(values)
    out[0] = values[0]
    if times.size > 1:
        dt = np.diff(times)
        cum = np.concatenate([[0.0], np.cumsum(dt * (values[1:] + values[:-1]) / 2.0)])
        out[1:] = cum[1:] / (times[1:] - times[0])
    return out


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray                      # (T, d)
    state_labels: tuple
    cost: np.ndarray                        # running cost G (or averaged cost)
    running_cost_avg: np.ndarray = None
    controls: np.ndarray = None             # (T, du) or None
    control_labels: tuple = ()
    violations: list = field(default_factory=list)   # [(time, excess)]

    def __post_init__(self):
        if self.running_cost_avg is None:
            self.running_cost_avg = prefix_average(self.times, self.cost)

    @property
    def horizon(self):
        return float(self.times[-1])

    def column(self, label):
        if label in self.state_labels:
            return self.states[:, self.state_labels.index(label)]
        if label in self.control_labels:
            return self.controls[:, self.control_labels.index(label)]
        raise KeyError(label)

    def to_csv(self, path):
        labels = ["t", *self.state_labels, *self.control_labels, "G", "run_avg"]
        cols = [self.times]
        cols += [self.states[:, i] for i in range(self.states.shape[1])]
        if self.controls is not None:
            cols += [self.controls[:, i] for i in range(self.controls.shape[1])]
        cols += [self.cost, self.running_cost_avg]
        data = np.column_stack(cols)
        with open(path, "w") as fh:
            fh.write(",".join(labels) + "\n")
            for row in data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        labels = header[1:-2]
        state_labels = tuple(l for l in labels if not l.startswith("u"))
        control_labels = tuple(l for l in labels if l.startswith("u"))
        ns, nc = len(state_labels), len(control_labels)
        states = data[:, 1:1 + ns]
        controls = data[:, 1 + ns:1 + ns + nc] if nc else None
        return cls(times=data[:, 0], states=states, state_labels=state_labels,
                   cost=data[:, -2], running_cost_avg=data[:, -1],
                   controls=controls, control_labels=control_labels)


def _labels(prefix, dim):
    return tuple(f"{prefix}{i + 1}" for i in range(dim))


# ---------------------------------------------------------------------------
# Associated system (fast subsystem in stretched time, z frozen)
# ---------------------------------------------------------------------------

def integrate_associated(problem, law, z, y0, tau_max, dtau):
    """Closed-loop fast subsystem y' = f(u(y), y, z) with z a parameter."""
    z = np.asarray(z, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if dtau > 0.05:
        raise ValueError("dtau must be <= 0.05")
    if not problem.z_box.contains(z):
        raise ValueError(f"z={z} outside Z box")
    if not problem.y_box.contains(y0):
        raise ValueError(f"y0={y0} outside Y box")
    n = int(round(tau_max / dtau))
    times = np.arange(n + 1) * dtau
    ys = np.empty((n + 1, problem.dim_y))
    us = np.empty((n + 1, problem.dim_u))
    Gs = np.empty(n + 1)
    y = y0.copy()
    violations = []
    for k in range(n + 1):
        yc = problem.y_box.clip(y)
        u = law.feedback_batch(yc[None, :], z[None, :], check=False)[0]
        ys[k], us[k] = y, u
        Gs[k] = float(problem.G(u, yc, z))
        if k == n:
            break
        y = _rk4(lambda yy: np.asarray(problem.f(u, yy, z), dtype=float), y, dtau)
        excess = problem.y_box.violation(y)
        if excess > VIABILITY_TOL:
            raise ViabilityViolation(f"y left Y by {excess:.2e}", exit_time=times[k + 1])
        if excess > 0:
            violations.append((times[k + 1], excess))
    return Trajectory(times=times, states=ys, state_labels=_labels("y", problem.dim_y),
                      cost=Gs, controls=us, control_labels=_labels("u", problem.dim_u),
                      violations=violations)


def _rk4(rhs, x, h):
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _associated_batch_averages(problem, law, Zb, tau_max=200.0, dtau=0.05,
                               warmup=20.0, sub_target=512):
    """Run a batch of closed-loop associated systems (one per row of Zb)
    from the center of Y and return time-averages over [warmup, tau_max]:

    returns dict with avg_g (B, dim_z), avg_G (B,), subsampled control and
    state histories (B, ns, dim) for later exact-z re-averaging, worst
    viability excess and first exit times.
    """
    Zb = np.atleast_2d(np.asarray(Zb, dtype=float))
    B = Zb.shape[0]
    n = int(round(tau_max / dtau))
    k0 = int(round(warmup / dtau))
    if not 0 <= k0 < n:
        raise ValueError("need 0 <= warmup < tau_max")
    y = np.broadcast_to((problem.y_box.lower + problem.y_box.upper) / 2.0,
                        (B, problem.dim_y)).copy()
    acc_g = np.zeros((B, problem.dim_z))
    acc_G = np.zeros(B)
    stride = max(1, (n - k0) // sub_target)
    sub_u, sub_y = [], []
    worst = np.zeros(B)
    exit_time = np.full(B, np.inf)
    lo, hi = problem.y_box.lower, problem.y_box.upper
    for k in range(n + 1):
        np.clip(y, lo, hi, out=y)
        U = law.feedback_batch(y, Zb, check=False)
        if k >= k0:
            w = 0.5 if k in (k0, n) else 1.0
            acc_g += w * problem.g_batch(U, y, Zb)
            acc_G += w * problem.G_batch(U, y, Zb)
            if (k - k0) % stride == 0:
                sub_u.append(U.copy())
                sub_y.append(y.copy())
        if k == n:
            break
        k1 = problem.f_batch(U, y, Zb)
        k2 = problem.f_batch(U, y + 0.5 * dtau * k1, Zb)
        k3 = problem.f_batch(U, y + 0.5 * dtau * k2, Zb)
        k4 = problem.f_batch(U, y + dtau * k3, Zb)
        y = y + (dtau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        excess = np.maximum(np.max(lo - y, axis=1), np.max(y - hi, axis=1))
        newly = (excess > VIABILITY_TOL) & ~np.isfinite(exit_time)
        exit_time[newly] = (k + 1) * dtau
        np.maximum(worst, excess, out=worst)
    denom = n - k0
    return {
        "avg_g": acc_g / denom,
        "avg_G": acc_G / denom,
        "sub_u": np.stack(sub_u, axis=1),
        "sub_y": np.stack(sub_y, axis=1),
        "worst_excess": worst,
        "exit_time": exit_time,
    }


# ---------------------------------------------------------------------------
# Occupational measure estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OccupationalEstimate:
    moments: np.ndarray
    horizon: float
    warmup: float


def occupational_measure(traj: Trajectory, h_list, warmup=0.0) -> OccupationalEstimate:
    """Trapezoidal time-averages of each h(states, controls) over
    [warmup, horizon]; each h maps full histories to a (T,) array."""
    if traj.times.size < 2:
        raise ValueError("trajectory needs >= 2 points")
    if warmup >= traj.horizon:
        raise ValueError("warmup must precede the horizon")
    mask = traj.times >= warmup - 1e-12
    t = traj.times[mask]
    moments = np.empty(len(h_list))
    for i, h in enumerate(h_list):
        vals = np.asarray(h(traj.states, traj.controls), dtype=float)[mask]
        moments[i] = np.trapezoid(vals, t) / (t[-1] - t[0])
    return OccupationalEstimate(moments=moments, horizon=traj.horizon, warmup=warmup)


# ---------------------------------------------------------------------------
# Averaged system
# ---------------------------------------------------------------------------

def g_tilde(problem, law, z, S=200.0, warmup=20.0, dtau=0.05):
    """Long-run average of g along the closed-loop associated run at z.

    Memoized on the law object with z quantized to 1e-4 per coordinate.
    """
    z = np.asarray(z, dtype=float)
    if not problem.z_box.contains(z):
        raise ViabilityViolation(f"z={z} outside Z box", exit_time=0.0)
    cache = getattr(law, "_gtilde_cache", None)
    if cache is None:
        cache = law._gtilde_cache = {}
    key = (tuple(np.round(z / 1e-4).astype(np.int64)), S, warmup, dtau)
    hit = cache.get(key)
    if hit is not None:
        return hit
    res = _associated_batch_averages(problem, law, z[None, :], tau_max=S,
                                     dtau=dtau, warmup=warmup)
    if np.isfinite(res["exit_time"][0]):
        raise ViabilityViolation(f"associated run at z={z} left Y",
                                 exit_time=float(res["exit_time"][0]))
    val = res["avg_g"][0]
    cache[key] = val
    return val


class AveragedDynamics:
    """Averaged drift z -> g_tilde(z) backed by a quantized-cell cache.

    Cells of side ``cell`` store the batch-computed time averages at the
    cell center plus a subsampled (u, y) history; queries re-average g
    over that history at the exact z requested, so only the measure
    (not the explicit z argument of g) is quantized.  cell=0 disables
    caching and evaluates pointwise through g_tilde.
    """

    def __init__(self, problem, law, horizon=120.0, warmup=20.0, dtau=0.05,
                 cell=0.05, correct_z=True, batch_max=256):
        self.problem = problem
        self.law = law
        self.horizon = horizon
        self.warmup = warmup
        self.dtau = dtau
        self.cell = cell
        self.correct_z = correct_z
        self.batch_max = batch_max
        self._keys: dict[tuple, int] = {}
        self._centers = np.empty((0, problem.dim_z))
        self._gbar = np.empty((0, problem.dim_z))
        self._Gbar = np.empty(0)
        self._sub_u: list = []
        self._sub_y: list = []
        self.batch_evals = 0

    def _cellkey(self, z):
        return tuple(np.floor(np.asarray(z) / self.cell).astype(np.int64))

    def _center(self, key):
        c = (np.asarray(key, dtype=float) + 0.5) * self.cell
        return self.problem.z_box.clip(c)

    def ensure(self, keys):
        missing = [k for k in keys if k not in self._keys]
        if not missing:
            return
        for start in range(0, len(missing), self.batch_max):
            chunk = missing[start:start + self.batch_max]
            centers = np.array([self._center(k) for k in chunk])
            res = _associated_batch_averages(self.problem, self.law, centers,
                                             tau_max=self.horizon, dtau=self.dtau,
                                             warmup=self.warmup)
            self.batch_evals += 1
            bad = np.isfinite(res["exit_time"])
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ViabilityViolation(
                    f"associated run at z={centers[i]} left Y",
                    exit_time=float(res["exit_time"][i]))
            base = self._centers.shape[0]
            self._centers = np.vstack([self._centers, centers])
            self._gbar = np.vstack([self._gbar, res["avg_g"]])
            self._Gbar = np.concatenate([self._Gbar, res["avg_G"]])
            for i, k in enumerate(chunk):
                self._keys[k] = base + i
                self._sub_u.append(res["sub_u"][i])
                self._sub_y.append(res["sub_y"][i])

    def _lookup(self, z):
        key = self._cellkey(z)
        idx = self._keys.get(key)
        if idx is None:
            self.ensure([key])
            idx = self._keys[key]
        return idx

    def rhs(self, z):
        if self.cell <= 0:
            return g_tilde(self.problem, self.law, z, S=self.horizon,
                           warmup=self.warmup, dtau=self.dtau)
        idx = self._lookup(z)
        val = self._gbar[idx]
        if self.correct_z:
            U, Y = self._sub_u[idx], self._sub_y[idx]
            zc = self._centers[idx]
            val = val + (self.problem.g_batch(U, Y, z).mean(axis=0)
                         - self.problem.g_batch(U, Y, zc).mean(axis=0))
        return val

    def cost(self, z):
        """Averaged running cost at z (same associated run as rhs)."""
        if self.cell <= 0:
            res = _associated_batch_averages(self.problem, self.law,
                                             np.asarray(z)[None, :],
                                             tau_max=self.horizon,
                                             dtau=self.dtau, warmup=self.warmup)
            return float(res["avg_G"][0])
        idx = self._lookup(z)
        val = float(self._Gbar[idx])
        if self.correct_z:
            U, Y = self._sub_u[idx], self._sub_y[idx]
            zc = self._centers[idx]
            val += float(self.problem.G_batch(U, Y, np.asarray(z)).mean()
                         - self.problem.G_batch(U, Y, zc).mean())
        return val

    def rhs_nearest(self, z):
        """Cheap predictor: drift of the nearest cached cell (no refills)."""
        if self._centers.shape[0] == 0:
            raise RuntimeError("empty cache")
        d = np.linalg.norm(self._centers - np.asarray(z), axis=1)
        return self._gbar[int(np.argmin(d))]


def integrate_averaged(problem, law, z0, t_max, dt=0.02, dynamics=None,
                       lookahead=0.4, cell=0.05):
    """RK4 on the averaged slow system z' = g_tilde(z).

    Upcoming drift cells are prefetched in vectorized batches along a
    provisionally predicted path; stage-point misses fall back to exact
    single-cell evaluation.  The recorded cost is the associated-run
    average of G at each accepted state.
    """
    z0 = np.asarray(z0, dtype=float)
    if not problem.z_box.contains(z0):
        raise ValueError(f"z0={z0} outside Z box")
    dyn = dynamics if dynamics is not None else AveragedDynamics(
        problem, law, cell=cell)
    n = int(round(t_max / dt))
    times = np.arange(n + 1) * dt
    zs = np.empty((n + 1, problem.dim_z))
    Gs = np.empty(n + 1)
    z = z0.copy()
    violations = []
    seg = max(1, int(round(lookahead / dt)))
    k = 0
    zs[0] = z
    Gs[0] = dyn.cost(z)
    while k < n:
        m = min(seg, n - k)
        if dyn.cell > 0:
            _prefetch(dyn, z, dt, m)
        for _ in range(m):
            z = _rk4(dyn.rhs, z, dt)
            k += 1
            excess = problem.z_box.violation(z)
            if excess > VIABILITY_TOL:
                raise ViabilityViolation(f"z left Z by {excess:.2e}",
                                         exit_time=times[k])
            if excess > 0:
                violations.append((times[k], excess))
                z = problem.z_box.clip(z)
            zs[k] = z
            Gs[k] = dyn.cost(z)
    return Trajectory(times=times, states=zs, state_labels=_labels("z", problem.dim_z),
                      cost=Gs, violations=violations)


def _prefetch(dyn, z, dt, m):
    """Provisionally integrate m steps with the nearest-cell predictor and
    batch-fill every cell (plus a one-cell safety margin) the exact pass
    might touch.  One step can cross many cells (|g| * dt >> cell), so
    whole segments between stage points are swept, not just endpoints."""
    dyn.ensure([dyn._cellkey(z)])
    needed = set()
    dim = z.size
    offsets = np.stack(np.meshgrid(*([[-1, 0, 1]] * dim), indexing="ij"),
                       axis=-1).reshape(-1, dim)

    def visit_seg(a, b):
        ns = 1 + int(np.ceil(np.linalg.norm(b - a) / (0.5 * dyn.cell)))
        for s in np.linspace(0.0, 1.0, ns + 1):
            base = np.floor((a + s * (b - a)) / dyn.cell).astype(np.int64)
            for off in offsets:
                needed.add(tuple(base + off))

    zp = z.copy()
    for _ in range(m):
        k1 = dyn.rhs_nearest(zp)
        p2 = zp + 0.5 * dt * k1
        visit_seg(zp, p2)
        k2 = dyn.rhs_nearest(p2)
        p3 = zp + 0.5 * dt * k2
        visit_seg(zp, p3)
        k3 = dyn.rhs_nearest(p3)
        p4 = zp + dt * k3
        visit_seg(zp, p4)
        k4 = dyn.rhs_nearest(p4)
        zp = zp + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        visit_seg(p4, zp)
    dyn.ensure(sorted(needed))


# ---------------------------------------------------------------------------
# Singularly perturbed system with the two-timescale schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleParams:
    """Slow-partition schedule: controls are synthesized with z frozen at
    the start of each interval of length delta; delta shrinks with epsilon
    while delta/epsilon grows."""
    epsilon: float
    delta: float = None
    dt: float = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.delta is None:
            object.__setattr__(self, "delta",
                               max(math.sqrt(self.epsilon), 10.0 * self.epsilon))
        if self.dt is None:
            object.__setattr__(self, "dt", min(self.epsilon / 20.0, 1e-3))
        if self.delta / self.epsilon < 10.0 - 1e-9:
            raise ValueError("delta/epsilon must be >= 10")
        if self.delta > 0.5 + 1e-12:
            raise ValueError("delta must be <= 0.5")
        if self.dt <= 0 or self.dt > self.epsilon / 20.0 + 1e-15:
            raise ValueError("dt must satisfy 0 < dt <= epsilon/20")


def _z_at(traj: Trajectory, t):
    times = traj.times
    if t > times[-1] + 1e-9:
        raise ScheduleExhausted(f"t={t} beyond stored horizon {times[-1]}")
    return np.array([np.interp(t, times, traj.states[:, i])
                     for i in range(traj.states.shape[1])])


def sp_schedule_control(law, averaged_traj: Trajectory, params: ScheduleParams, t, y):
    """Control at clock time t: feedback with the slow state frozen at the
    start of the current partition interval (right-continuous switching)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    t_l = math.floor(t / params.delta + 1e-12) * params.delta
    z_l = _z_at(averaged_traj, t_l)
    y = np.asarray(y, dtype=float)
    return law.feedback_batch(law.problem.y_box.clip(y)[None, :],
                              law.problem.z_box.clip(z_l)[None, :], check=False)[0]


def _feedback_table(problem, law, z_l, pts):
    """Tabulate u = law(y, z_l) on a product y-grid for interpolation."""
    axes = [np.linspace(problem.y_box.lower[d], problem.y_box.upper[d], pts)
            for d in range(problem.dim_y)]
    mesh = np.meshgrid(*axes, indexing="ij")
    Y = np.stack([m.ravel() for m in mesh], axis=-1)
    U = law.feedback_batch(Y, z_l[None, :], check=False)
    return axes, U.reshape(tuple(len(a) for a in axes) + (problem.dim_u,))


def _interp_u(axes, tab, y):
    """Multilinear interpolation of the tabulated feedback at y."""
    d = len(axes)
    idx, frac = [], []
    for k, ax in enumerate(axes):
        h = ax[1] - ax[0]
        x = min(max(y[k], ax[0]), ax[-1])
        i = min(int((x - ax[0]) / h), len(ax) - 2)
        idx.append(i)
        frac.append((x - ax[i]) / h)
    u = 0.0
    for corner in itertools.product((0, 1), repeat=d):
        w = 1.0
        for k, c in enumerate(corner):
            w *= frac[k] if c else 1.0 - frac[k]
        u = u + w * tab[tuple(idx[k] + corner[k] for k in range(d))]
    return u


def integrate_sp(problem, law, averaged_traj: Trajectory, params: ScheduleParams,
                 y0, z0, T, u_grid=65):
    """Full stiff system eps y' = f, z' = g under the scheduled control.

    Within each schedule interval the slow argument of the feedback is
    frozen, so the control is a fixed function of y there; with ``u_grid``
    set (the default) it is tabulated once per interval on a ``u_grid``
    points-per-dimension y-grid and evaluated by multilinear interpolation,
    which is orders of magnitude faster than calling the feedback search at
    every step.  ``u_grid=None`` evaluates the feedback exactly per step.
    Tables are cached per frozen slow state, which repeat once the averaged
    trajectory settles onto its cycle.
    """
    y0 = np.asarray(y0, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    if not problem.y_box.contains(y0):
        raise ValueError(f"y0={y0} outside Y box")
    if not problem.z_box.contains(z0):
        raise ValueError(f"z0={z0} outside Z box")
    dt, eps, delta = params.dt, params.epsilon, params.delta
    n = int(round(T / dt))
    if (n * dt) > averaged_traj.horizon + delta:
        raise ScheduleExhausted("averaged trajectory shorter than requested T")
    m_y, m_z = problem.dim_y, problem.dim_z
    times = np.arange(n + 1) * dt
    states = np.empty((n + 1, m_y + m_z))
    us = np.empty((n + 1, problem.dim_u))
    Gs = np.empty(n + 1)
    y, z = y0.copy(), z0.copy()
    violations = []
    cur_l = -1
    z_l = None
    tab = None
    tab_cache = {}
    for k in range(n + 1):
        t = k * dt
        l = int(math.floor(t / delta + 1e-12))
        if l != cur_l:
            cur_l = l
            z_l = problem.z_box.clip(_z_at(averaged_traj, l * delta))
            if u_grid is not None:
                zkey = tuple(np.round(z_l, 10))
                tab = tab_cache.get(zkey)
                if tab is None:
                    tab = tab_cache[zkey] = _feedback_table(problem, law,
                                                            z_l, u_grid)
        yc = problem.y_box.clip(y)
        if tab is not None:
            u = _interp_u(tab[0], tab[1], yc)
        else:
            u = law.feedback_batch(yc[None, :], z_l[None, :], check=False)[0]
        states[k, :m_y] = y
        states[k, m_y:] = z
        us[k] = u
        Gs[k] = float(problem.G(u, yc, problem.z_box.clip(z)))
        if k == n:
            break
        k1y = np.asarray(problem.f(u, y, z), dtype=float) / eps
        k1z = np.asarray(problem.g(u, y, z), dtype=float)
        y2, z2 = y + 0.5 * dt * k1y, z + 0.5 * dt * k1z
        k2y = np.asarray(problem.f(u, y2, z2), dtype=float) / eps
        k2z = np.asarray(problem.g(u, y2, z2), dtype=float)
        y3, z3 = y + 0.5 * dt * k2y, z + 0.5 * dt * k2z
        k3y = np.asarray(problem.f(u, y3, z3), dtype=float) / eps
        k3z = np.asarray(problem.g(u, y3, z3), dtype=float)
        y4, z4 = y + dt * k3y, z + dt * k3z
        k4y = np.asarray(problem.f(u, y4, z4), dtype=float) / eps
        k4z = np.asarray(problem.g(u, y4, z4), dtype=float)
        y = y + (dt / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        z = z + (dt / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
        ey = problem.y_box.violation(y)
        ez = problem.z_box.violation(z)
        excess = max(ey, ez)
        if excess > VIABILITY_TOL:
            raise ViabilityViolation(f"state left its box by {excess:.2e}",
                                     exit_time=times[k + 1])
        if excess > 0:
            violations.append((times[k + 1], excess))
    labels = _labels("y", m_y) + _labels("z", m_z)
    return Trajectory(times=times, states=states, state_labels=labels,
                      cost=Gs, controls=us, control_labels=_labels("u", problem.dim_u),
                      violations=violations)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def long_run_average(traj: Trajectory, warmup=0.0) -> float:
    """Trapezoidal time-average of the recorded cost over [warmup, horizon]."""
    if warmup >= traj.horizon:
        raise ValueError("warmup must precede the horizon")
    mask = traj.times >= warmup - 1e-12
    t = traj.times[mask]
    return float(np.trapezoid(traj.cost[mask], t) / (t[-1] - t[0]))


def estimate_period(traj: Trajectory, component=0) -> float:
    """Mean gap between upward zero crossings of the centered component,
    with linear interpolation between samples.  Needs >= 3 crossings."""
    x = traj.states[:, component] - traj.states[:, component].mean()
    t = traj.times
    idx = np.flatnonzero((x[:-1] <= 0.0) & (x[1:] > 0.0))
    crossings = t[idx] + (t[idx + 1] - t[idx]) * (-x[idx]) / (x[idx + 1] - x[idx])
    if crossings.size < 3:
        raise NoPeriodDetected(f"only {crossings.size} upward crossings")
    return float(np.mean(np.diff(crossings)))


@dataclass(frozen=True)
class MomentReport:
    exponents: tuple                 # multi-indices over (u, y, z)
    trajectory_moments: np.ndarray
    solution_moments: np.ndarray
    max_abs_diff: float


def sp_occupational_measure(traj: Trajectory, solution, max_degree=2,
                            warmup=0.0) -> MomentReport:
    """Compare time-average monomial moments of an SP run (in the joint
    (u, y, z) variables) with the moments of the structured solution's
    Dirac mixture."""
    if max_degree < 1:
        return MomentReport(exponents=(), trajectory_moments=np.empty(0),
                            solution_moments=np.empty(0), max_abs_diff=0.0)
    mix = solution.mixture_measure()
    du = mix.points[0][0].shape[0]
    dy = mix.points[0][1].shape[0]
    dz = mix.points[0][2].shape[0]
    dict_basis = make_basis(du + dy + dz, max_degree)

    mask = traj.times >= warmup - 1e-12
    t = traj.times[mask]
    W = np.column_stack([traj.controls[mask], traj.states[mask]])
    vals = dict_basis.values_at(W)                       # (count, T)
    traj_m = np.trapezoid(vals, t, axis=1) / (t[-1] - t[0])

    P = np.array([np.concatenate([u, y, z]) for u, y, z in mix.points])
    sol_m = dict_basis.values_at(P) @ mix.weights
    return MomentReport(exponents=dict_basis.multi_indices,
                        trajectory_moments=traj_m, solution_moments=sol_m,
                        max_abs_diff=float(np.abs(traj_m - sol_m).max()))
