"""Problem data for singularly perturbed long-run average control.

A problem consists of fast dynamics f(u, y, z), slow dynamics g(u, y, z),
a running cost G(u, y, z) and box constraints on controls and states.
Problems are registered under string keys; the built-in key "gr-example"
is a two-dimensional weakly coupled instance with a known near-optimal
value, used throughout the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolation

BOX_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower_i, upper_i]^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be 1-d of equal length")
        if np.any(lo > hi):
            raise ValueError("lower must not exceed upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x, tol: float = BOX_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def violation(self, x) -> float:
        """Largest componentwise excursion outside the box (<= 0 inside)."""
        x = np.asarray(x, dtype=float)
        return float(np.max(np.maximum(self.lower - x, x - self.upper)))

    def grid(self, points_per_dim: int) -> np.ndarray:
        """Uniform product grid including endpoints, shape (p^dim, dim)."""
        axes = [np.linspace(self.lower[d], self.upper[d], points_per_dim) for d in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class ControlProblem:
    """Immutable problem instance.

    f, g, G take (u, y, z) arrays.  If ``vectorized`` is true they must
    accept broadcast batches with a trailing component axis, returning
    arrays with trailing axes (dim_y,), (dim_z,) and () respectively;
    the solver exploits this heavily.
    """

    dim_u: int
    dim_y: int
    dim_z: int
    f: callable = field(compare=False)
    g: callable = field(compare=False)
    G: callable = field(compare=False)
    u_box: Box
    y_box: Box
    z_box: Box
    weakly_coupled: bool = False
    vectorized: bool = False
    name: str = ""

    def __post_init__(self):
        dims = (self.dim_u, self.dim_y, self.dim_z)
        boxes = (self.u_box, self.y_box, self.z_box)
        if any(d < 1 for d in dims):
            raise ValueError("dimensions must be positive")
        for d, b in zip(dims, boxes):
            if b.dim != d:
                raise ValueError(f"box dimension {b.dim} != {d}")

    def f_batch(self, u, y, z):
        if self.vectorized:
            return np.asarray(self.f(u, y, z), dtype=float)
        return _loop_eval(self.f, u, y, z, self.dim_y)

    def g_batch(self, u, y, z):
        if self.vectorized:
            return np.asarray(self.g(u, y, z), dtype=float)
        return _loop_eval(self.g, u, y, z, self.dim_z)

    def G_batch(self, u, y, z):
        if self.vectorized:
            return np.asarray(self.G(u, y, z), dtype=float)
        return _loop_eval(self.G, u, y, z, None)


def _loop_eval(fn, u, y, z, out_dim):
    """Broadcast fallback for problems defined with scalar-point callables."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast_shapes(u.shape[:-1], y.shape[:-1], z.shape[:-1])
    ub = np.broadcast_to(u, shape + u.shape[-1:]).reshape(-1, u.shape[-1])
    yb = np.broadcast_to(y, shape + y.shape[-1:]).reshape(-1, y.shape[-1])
    zb = np.broadcast_to(z, shape + z.shape[-1:]).reshape(-1, z.shape[-1])
    n = ub.shape[0]
    if out_dim is None:
        out = np.empty(n)
        for i in range(n):
            out[i] = fn(ub[i], yb[i], zb[i])
        return out.reshape(shape)
    out = np.empty((n, out_dim))
    for i in range(n):
        out[i] = fn(ub[i], yb[i], zb[i])
    return out.reshape(shape + (out_dim,))


def eval_dynamics(problem: ControlProblem, u, y, z):
    """Evaluate (f, g, G) at a single admissible point.

    Raises DomainViolation if any argument leaves its box by more than
    the shared tolerance.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    for name, val, box in (("u", u, problem.u_box), ("y", y, problem.y_box), ("z", z, problem.z_box)):
        if val.shape != (box.dim,):
            raise DomainViolation(f"{name} has shape {val.shape}, expected ({box.dim},)")
        if not box.contains(val):
            raise DomainViolation(f"{name}={val} outside box [{box.lower}, {box.upper}]")
    f_val = np.asarray(problem.f(u, y, z), dtype=float)
    g_val = np.asarray(problem.g(u, y, z), dtype=float)
    G_val = float(problem.G(u, y, z))
    return f_val, g_val, G_val


@dataclass(frozen=True)
class ContractionReport:
    fast_ok: bool
    fast_margin: float  # max over samples of (df)^T dy + |dy|^2; ok iff <= tol
    slow_margin: float  # analogous probe on g in z, report-only


def check_contraction(problem: ControlProblem, samples: int, seed: int = 0,
                      tol: float = 1e-9) -> ContractionReport:
    """Sampled sufficient check of one-sided Lipschitz contraction of the
    fast dynamics with the identity metric:

        (f(u, y', z) - f(u, y'', z))^T (y' - y'') <= -|y' - y''|^2.

    This is a probe, not a proof; the report also carries the analogous
    slow-state margin for diagnostics.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    fast_margin = -np.inf
    slow_margin = -np.inf
    for _ in range(samples):
        u = problem.u_box.sample(rng)[0]
        z = problem.z_box.sample(rng)[0]
        y1, y2 = problem.y_box.sample(rng, 2)
        dy = y1 - y2
        if np.linalg.norm(dy) < 1e-12:
            continue
        df = np.asarray(problem.f(u, y1, z)) - np.asarray(problem.f(u, y2, z))
        fast_margin = max(fast_margin, float(df @ dy + dy @ dy))
        y = problem.y_box.sample(rng)[0]
        z1, z2 = problem.z_box.sample(rng, 2)
        dz = z1 - z2
        if np.linalg.norm(dz) < 1e-12:
            continue
        dg = np.asarray(problem.g(u, y, z1)) - np.asarray(problem.g(u, y, z2))
        slow_margin = max(slow_margin, float(dg @ dz + dz @ dz))
    return ContractionReport(fast_ok=bool(fast_margin <= tol),
                             fast_margin=fast_margin, slow_margin=slow_margin)


# ---------------------------------------------------------------------------
# Problem registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, callable] = {}


def register_problem(key: str, factory):
    _REGISTRY[key] = factory


def get_problem(key: str) -> ControlProblem:
    try:
        factory = _REGISTRY[key]
    except KeyError:
        raise KeyError(f"unknown problem key {key!r}; known: {sorted(_REGISTRY)}") from None
    return factory()


def problem_keys():
    return sorted(_REGISTRY)


def _gr_example() -> ControlProblem:
    """Weakly coupled 2+2 instance: fast relaxation toward the control,
    a lightly damped slow oscillator driven by the fast/control coupling
    -y1*u2 + y2*u1, and a cost rewarding slow-oscillation amplitude."""

    def f(u, y, z):
        return -y + u

    def g(u, y, z):
        z1 = z[..., 0]
        z2 = z[..., 1]
        cross = -y[..., 0] * u[..., 1] + y[..., 1] * u[..., 0]
        return np.stack(np.broadcast_arrays(z2, -4.0 * z1 - 0.3 * z2 + cross), axis=-1)

    def G(u, y, z):
        val = 0.1 * u[..., 0] ** 2 + 0.1 * u[..., 1] ** 2 - z[..., 0] ** 2
        return val

    return ControlProblem(
        dim_u=2, dim_y=2, dim_z=2,
        f=f, g=g, G=G,
        u_box=Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        y_box=Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        z_box=Box(np.array([-2.5, -4.5]), np.array([2.5, 4.5])),
        weakly_coupled=True,
        vectorized=True,
        name="gr-example",
    )


register_problem("gr-example", _gr_example)
