"""Real-coded genetic algorithm for box-bounded minimisation.

Tournament selection, blend (BLX-alpha) crossover, per-gene Gaussian mutation
and elitism. The objective is evaluated on whole populations at once so the
likelihood can be vectorised.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class GASettings:
    lower_bound: float = -0.05
    upper_bound: float = 0.05
    generations: int = 100
    tolerance: float = 1e-15
    population_size: int = 60
    window_size: Optional[int] = None
    seed: int = 0
    tournament_size: int = 3
    crossover_prob: float = 0.9
    blend_alpha: float = 0.5
    mutation_scale: float = 0.1  # fraction of the box width
    elite_count: int = 2
    # stop once the best fitness improved less than `tolerance` over this many generations
    stall_generations: int = 50
    # refine the GA winner with a bounded quasi-Newton step
    polish: bool = True

    def __post_init__(self):
        if not self.lower_bound < self.upper_bound:
            raise InvalidArgumentError("GA lower_bound must be below upper_bound")
        if self.generations < 1:
            raise InvalidArgumentError("generations must be >= 1")
        if self.population_size < 4:
            raise InvalidArgumentError("population_size must be >= 4")
        if self.window_size is not None and self.window_size < 1:
            raise InvalidArgumentError("window_size must be >= 1")
        if not 0 <= self.elite_count < self.population_size:
            raise InvalidArgumentError("elite_count must be in [0, population_size)")
        if self.tournament_size < 1 or self.stall_generations < 1:
            raise InvalidArgumentError("tournament_size and stall_generations must be >= 1")

    @classmethod
    def realtime(cls, **overrides) -> "GASettings":
        """Window-of-10, 50-generation settings for streaming use."""
        return replace(cls(generations=50, window_size=10), **overrides)


@dataclass
class GAResult:
    best: np.ndarray
    best_fitness: float
    history: list[float]
    population: np.ndarray
    fitness: np.ndarray
    generations_run: int
    converged_at: int = field(default=0)


def _evaluate(objective, pop) -> np.ndarray:
    f = np.asarray(objective(pop), dtype=float)
    return np.where(np.isnan(f), np.inf, f)


def run_ga(
    objective: Callable[[np.ndarray], np.ndarray],
    n_dims: int,
    settings: GASettings,
    rng: np.random.Generator,
    initial_population: Optional[np.ndarray] = None,
) -> GAResult:
    """Minimise ``objective`` over ``[lower, upper] ** n_dims``.

    ``objective`` maps a (P, n_dims) array to P fitness values. A supplied
    ``initial_population`` is used row by row (clipped to the box); missing
    rows are drawn uniformly.
    """
    lo, hi = settings.lower_bound, settings.upper_bound
    size = settings.population_size
    pop = rng.uniform(lo, hi, size=(size, n_dims))
    if initial_population is not None:
        seed_pop = np.clip(np.asarray(initial_population, dtype=float).reshape(-1, n_dims), lo, hi)
        take = min(size, len(seed_pop))
        pop[:take] = seed_pop[:take]
    fit = _evaluate(objective, pop)
    history = [float(fit.min())]
    sigma = settings.mutation_scale * (hi - lo)
    p_mut = 1.0 / n_dims
    n_children = size - settings.elite_count
    gen = 0

    for gen in range(1, settings.generations + 1):
        order = np.argsort(fit, kind="stable")
        elites = pop[order[: settings.elite_count]]

        contenders = rng.integers(0, size, size=(2 * n_children, settings.tournament_size))
        winners = contenders[np.arange(2 * n_children), np.argmin(fit[contenders], axis=1)]
        pa, pb = pop[winners[:n_children]], pop[winners[n_children:]]

        # BLX-alpha: uniform draw on the parents' interval widened by alpha on each side
        lo_p, hi_p = np.minimum(pa, pb), np.maximum(pa, pb)
        span = hi_p - lo_p
        u = rng.uniform(size=pa.shape)
        blended = lo_p - settings.blend_alpha * span + u * (1 + 2 * settings.blend_alpha) * span
        do_cross = rng.uniform(size=(n_children, 1)) < settings.crossover_prob
        children = np.where(do_cross, blended, pa)

        mutate = rng.uniform(size=children.shape) < p_mut
        children = children + mutate * rng.normal(0.0, sigma, size=children.shape)
        children = np.clip(children, lo, hi)

        pop = np.vstack([elites, children])
        fit = np.concatenate([fit[order[: settings.elite_count]], _evaluate(objective, children)])
        history.append(float(fit.min()))

        window = settings.stall_generations
        if gen >= window and history[-window - 1] - history[-1] < settings.tolerance:
            break

    best_idx = int(np.argmin(fit))
    final = history[-1]
    converged_at = next(g for g, h in enumerate(history) if h - final <= max(abs(final) * 1e-9, 1e-12))
    return GAResult(
        best=pop[best_idx].copy(),
        best_fitness=float(fit[best_idx]),
        history=history,
        population=pop,
        fitness=fit,
        generations_run=gen,
        converged_at=converged_at,
    )
