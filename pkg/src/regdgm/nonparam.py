"""Global minimizers of energy-regularized divergence objectives on an interval.

Over all densities on a compact interval, minimizing ``D(p_d, p_g) + lam * E_{p_g}[E]``
for D = KL or JS yields a reweighted data density ``p_g*(x) = p_d(x) * w(x)``
with

    KL:  w(x) = 1 / (alpha + lam * E(x))
    JS:  w(x) = 1 / (exp(alpha + lam * E(x)) - 1)

where the multiplier ``alpha`` is the unique root of the normalization
residual ``phi(alpha) = int p_d(x) w(x) dx - 1``. ``phi`` is strictly
decreasing on the feasible ray ``alpha > -lam * min E``, so the root is found
by bracketing and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InfeasibleAlpha, InvalidInput, NoFeasibleRoot, QuadratureUnstable

KL = "KL"
JS = "JS"
DIVERGENCES = (KL, JS)

DEFAULT_QUAD_NODES = 1024
DEFAULT_TOL = 1e-10
PANEL_ORDER = 16


def composite_gauss_legendre(a: float, b: float, n_nodes: int, order: int = PANEL_ORDER):
    """Nodes and weights of composite Gauss-Legendre quadrature on ``[a, b]``.

    ``n_nodes`` is rounded to a whole number of equal panels of ``order``
    points each (one panel when ``n_nodes < order``).
    """
    if n_nodes < 1:
        raise InvalidInput("quadrature needs at least one node")
    order = min(order, n_nodes)
    panels = max(1, n_nodes // order)
    return _panels(np.linspace(a, b, panels + 1), order)


def _panels(edges, order):
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * t[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def graded_gauss_legendre(
    a: float,
    b: float,
    n_nodes: int,
    focus: float,
    order: int = PANEL_ORDER,
    smallest: float = 1e-12,
    breakpoints=(),
):
    """Composite Gauss-Legendre with panels refined geometrically toward ``focus``.

    Half of the ``n_nodes // order`` panels are uniform; the other half have
    breakpoints at ``focus +- s * smallest**(j/k)`` where ``s`` is the distance
    from ``focus`` to the end of the interval on that side. This resolves a
    sharp peak at ``focus`` without losing accuracy on the rest of the interval.
    Any ``breakpoints`` inside ``(a, b)`` are added as extra panel edges.
    """
    if n_nodes < 1:
        raise InvalidInput("quadrature needs at least one node")
    order = min(order, n_nodes)
    panels = max(1, n_nodes // order)
    if panels < 4 or not a <= focus <= b:
        return composite_gauss_legendre(a, b, n_nodes, order)
    n_uniform = panels // 2
    interior = a < focus < b
    k = panels - n_uniform - int(interior)
    sides = [(sign, s) for sign, s in ((-1.0, focus - a), (1.0, b - focus)) if s > 0]
    br = np.asarray(breakpoints, dtype=float)
    parts = [np.linspace(a, b, n_uniform + 1), np.array([focus]), br[(br > a) & (br < b)]]
    for i, (sign, s) in enumerate(sides):
        ks = k // len(sides) + (i < k % len(sides))
        parts.append(focus + sign * s * smallest ** (np.arange(1, ks + 1) / ks))
    return _panels(np.unique(np.concatenate(parts)), order)


@dataclass(frozen=True)
class DensitySpec:
    """A density on ``support = (a, b)``; ``pdf`` must accept numpy arrays."""

    support: tuple[float, float]
    pdf: Callable[[np.ndarray], np.ndarray]
    quad_nodes: int = DEFAULT_QUAD_NODES

    def __post_init__(self):
        a, b = self.support
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise InvalidInput(f"support must be a finite interval with a < b, got {self.support}")
        x, w = self.quadrature()
        p = np.asarray(self.pdf(x), dtype=float)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidInput("pdf must be finite and nonnegative on the support")
        mass = float(np.dot(w, p))
        if abs(mass - 1.0) > 1e-8:
            raise InvalidInput(f"pdf integrates to {mass!r}, not 1")

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, quad_nodes: int = DEFAULT_QUAD_NODES):
        height = 1.0 / (b - a)
        return cls((a, b), lambda x: np.full(np.shape(x), height), quad_nodes)

    def quadrature(self, n_nodes: int | None = None):
        return composite_gauss_legendre(*self.support, n_nodes or self.quad_nodes)

    def with_nodes(self, quad_nodes: int) -> "DensitySpec":
        return DensitySpec(self.support, self.pdf, quad_nodes)


@dataclass(frozen=True)
class EnergySpec1D:
    """A bounded energy function with declared bounds ``min_bound <= E <= max_bound``."""

    eval: Callable[[np.ndarray], np.ndarray]
    min_bound: float
    max_bound: float
    argmin: float | None = None  # where the energy is smallest, if known exactly
    breakpoints: tuple = ()  # kinks of the energy; used as quadrature panel edges

    def __post_init__(self):
        if not (math.isfinite(self.min_bound) and math.isfinite(self.max_bound)):
            raise InvalidInput("energy bounds must be finite")
        if self.min_bound > self.max_bound:
            raise InvalidInput("energy min_bound exceeds max_bound")

    @classmethod
    def linear(cls, slope: float, intercept: float, support: tuple[float, float]):
        a, b = support
        ends = (slope * a + intercept, slope * b + intercept)
        return cls(
            lambda x: slope * np.asarray(x, dtype=float) + intercept,
            min(ends), max(ends), a if ends[0] <= ends[1] else b,
        )

    @classmethod
    def tabulated(cls, xs, values):
        """Piecewise-linear interpolation through ``(xs, values)``."""
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise InvalidInput("tabulated energy needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise InvalidInput("tabulated energy abscissae must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("tabulated energy values must be finite")
        return cls(
            lambda x: np.interp(x, xs, values),
            float(values.min()), float(values.max()), float(xs[np.argmin(values)]),
            tuple(float(v) for v in xs),
        )

    def check(self, support: tuple[float, float], n: int = 4097) -> None:
        """Verify the declared bounds on a dense sample of ``support``."""
        x = np.linspace(*support, n)
        e = np.asarray(self.eval(x), dtype=float)
        slack = 1e-12 * (1.0 + max(abs(self.min_bound), abs(self.max_bound)))
        if not np.all(np.isfinite(e)):
            raise InvalidInput("energy is not finite on the support")
        if e.min() < self.min_bound - slack or e.max() > self.max_bound + slack:
            raise InvalidInput(
                f"energy range [{e.min()}, {e.max()}] violates declared bounds "
                f"[{self.min_bound}, {self.max_bound}]"
            )


    def locate_min(self, support: tuple[float, float], n: int = 4097) -> float:
        """Point of smallest energy on ``support``: the hint if given, else a refined grid search."""
        a, b = support
        if self.argmin is not None and a <= self.argmin <= b:
            return float(self.argmin)
        x = np.linspace(a, b, n)
        i = int(np.argmin(self.eval(x)))
        lo, hi = x[max(i - 1, 0)], x[min(i + 1, n - 1)]
        g = (math.sqrt(5.0) - 1.0) / 2.0
        for _ in range(80):
            c, d = hi - g * (hi - lo), lo + g * (hi - lo)
            if self.eval(np.array([c]))[0] <= self.eval(np.array([d]))[0]:
                hi = d
            else:
                lo = c
        return float(0.5 * (lo + hi))


def solver_quadrature(spec: "DensitySpec", energy: EnergySpec1D, quad_nodes: int | None = None):
    """Quadrature for the weighted integrals, refined where the weight peaks.

    Both weights are largest where the energy is smallest, and near the
    feasible bound they become sharply peaked there.
    """
    focus = energy.locate_min(spec.support)
    return graded_gauss_legendre(
        *spec.support, quad_nodes or spec.quad_nodes, focus, breakpoints=energy.breakpoints
    )


def toy_problem(quad_nodes: int = DEFAULT_QUAD_NODES) -> tuple[DensitySpec, EnergySpec1D]:
    """Uniform data on [0, 1] with energy ``0.7 x + 0.9``."""
    return DensitySpec.uniform(0.0, 1.0, quad_nodes), EnergySpec1D.linear(0.7, 0.9, (0.0, 1.0))


def _check_divergence(divergence: str) -> str:
    d = divergence.upper()
    if d not in DIVERGENCES:
        raise InvalidInput(f"unknown divergence {divergence!r}")
    return d


def weight(divergence: str, alpha: float, lam: float, energy_value):
    """Reweighting coefficient ``p_g* / p_d``; vectorized over ``energy_value``."""
    divergence = _check_divergence(divergence)
    u = alpha + lam * np.asarray(energy_value, dtype=float)
    if np.any(u <= 0):
        raise InfeasibleAlpha(f"alpha={alpha!r} gives a nonpositive denominator")
    w = 1.0 / u if divergence == KL else 1.0 / np.expm1(u)
    return float(w) if np.ndim(w) == 0 else w


def feasible_lower_bound(energy: EnergySpec1D, lam: float) -> float:
    return -lam * energy.min_bound


def normalization_residual(
    spec: DensitySpec,
    energy: EnergySpec1D,
    divergence: str,
    alpha: float,
    lam: float,
    quad_nodes: int | None = None,
) -> float:
    """``int p_d(x) w(x) dx - 1`` by fixed-node quadrature."""
    return _residual(solver_quadrature(spec, energy, quad_nodes), spec, energy, divergence, alpha, lam)


def _residual(nodes, spec, energy, divergence, alpha, lam):
    if not alpha > feasible_lower_bound(energy, lam):
        raise InfeasibleAlpha(
            f"alpha={alpha!r} is not above the feasible bound {feasible_lower_bound(energy, lam)!r}"
        )
    x, qw = nodes
    w = weight(divergence, alpha, lam, energy.eval(x))
    return float(np.dot(qw, spec.pdf(x) * w)) - 1.0


@dataclass
class SolveResult:
    divergence: str
    lam: float
    alpha_star: float
    residual: float
    x: np.ndarray
    p_d: np.ndarray
    energy: np.ndarray
    weight: np.ndarray
    p_g_star: np.ndarray
    mass: float  # quadrature of p_g_star over the support
    quad_nodes: int

    def rows(self):
        return zip(self.x, self.p_d, self.energy, self.weight, self.p_g_star)


def _bisect_root(residual, lo: float, tol: float, residual_fine=None, max_doublings: int = 200):
    r_lo = residual(lo)
    if r_lo <= 0:
        # a near-singular integrand at the bound can hide the true root from
        # fixed nodes; distinguish that from a genuinely missing root
        if residual_fine is not None:
            r_fine = residual_fine(lo)
            if abs(r_fine - r_lo) > 1e-6:
                raise QuadratureUnstable(
                    f"residual at the feasible bound moves from {r_lo:.6g} to {r_fine:.6g} "
                    "when quadrature nodes are doubled"
                )
        raise NoFeasibleRoot(
            f"residual is {r_lo:.3g} <= 0 at the bracket start {lo!r}; no normalizing alpha "
            "exists on the feasible ray (a root closer to the bound than the bracket margin "
            "is not resolvable)"
        )
    step = 1.0 + abs(lo)
    hi = lo + step
    r_hi = residual(hi)
    doublings = 0
    while r_hi > 0:
        lo, r_lo = hi, r_hi
        step *= 2.0
        hi = lo + step
        r_hi = residual(hi)
        doublings += 1
        if doublings > max_doublings or not math.isfinite(hi):
            raise NoFeasibleRoot("residual never became negative on the feasible ray")
    if r_hi == 0:
        return hi
    # stop once alpha is within tol of the root and the residual is within tol
    # of zero; near the feasible bound the residual is steep, so the second
    # condition can need more halvings (bounded by float resolution)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        r = residual(mid)
        if r == 0 or (hi - lo <= 2 * tol and abs(r) <= tol):
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid


def _find_alpha(spec, energy, divergence, lam, tol, quad_nodes):
    bound = feasible_lower_bound(energy, lam)
    eps = 1e-12 * (1.0 + abs(bound))
    coarse = solver_quadrature(spec, energy, quad_nodes)
    fine = solver_quadrature(spec, energy, 2 * quad_nodes)
    return _bisect_root(
        lambda a: _residual(coarse, spec, energy, divergence, a, lam),
        bound + eps,
        tol,
        lambda a: _residual(fine, spec, energy, divergence, a, lam),
    )


def solve_alpha(
    spec: DensitySpec,
    energy: EnergySpec1D,
    divergence: str,
    lam: float,
    tol: float = DEFAULT_TOL,
    grid_points: int = 201,
    check_refinement: bool = True,
) -> SolveResult:
    """Find the normalizing multiplier and tabulate the optimal density.

    The density, energy, weight and ``p_g*`` are reported on a uniform grid of
    ``grid_points`` points including both endpoints of the support.

    Raises:
        NoFeasibleRoot: the residual does not change sign on the feasible ray.
        QuadratureUnstable: doubling the quadrature nodes moves the root by
            more than ``10 * tol``.
    """
    divergence = _check_divergence(divergence)
    if not lam > 0:
        raise InvalidInput(f"lambda must be positive, got {lam}")
    if not tol > 0:
        raise InvalidInput("tol must be positive")
    energy.check(spec.support)

    alpha = _find_alpha(spec, energy, divergence, lam, tol, spec.quad_nodes)
    if check_refinement:
        alpha_fine = _find_alpha(spec, energy, divergence, lam, tol, 2 * spec.quad_nodes)
        if abs(alpha_fine - alpha) > 10 * tol:
            raise QuadratureUnstable(
                f"doubling quadrature nodes moved alpha* by {abs(alpha_fine - alpha):.3g}"
            )

    residual = normalization_residual(spec, energy, divergence, alpha, lam)
    x = np.linspace(*spec.support, grid_points)
    p_d = np.asarray(spec.pdf(x), dtype=float)
    e = np.asarray(energy.eval(x), dtype=float)
    w = weight(divergence, alpha, lam, e)
    qx, qw = solver_quadrature(spec, energy)
    mass = float(np.dot(qw, spec.pdf(qx) * weight(divergence, alpha, lam, energy.eval(qx))))
    return SolveResult(
        divergence=divergence,
        lam=lam,
        alpha_star=alpha,
        residual=residual,
        x=x,
        p_d=p_d,
        energy=e,
        weight=w,
        p_g_star=p_d * w,
        mass=mass,
        quad_nodes=spec.quad_nodes,
    )


def weight_range(result: SolveResult) -> tuple[float, float, float]:
    lo = float(np.min(result.weight))
    hi = float(np.max(result.weight))
    return lo, hi, hi / lo


def sup_deviation(result: SolveResult) -> float:
    """``max |p_g* - p_d|`` over the result grid."""
    return float(np.max(np.abs(result.p_g_star - result.p_d)))


NONPARAM_HEADER = ("x", "p_d", "energy", "weight", "p_g_star")
SUMMARY_HEADER = ("divergence", "lambda", "alpha_star", "residual")
