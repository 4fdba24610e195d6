"""Growth-law fitting and stigmergy simulations.

Two halves share one package:

* ``timeseries``, ``macrodynamics`` and ``growthfit`` integrate the coupled
  population/technology model and fit hyperbolic, exponential, logistic and
  escalating-logistic laws to historical series.
* ``medium``, ``quantstig`` and ``qualstig`` simulate agents coordinating
  through a shared environment: pheromone trails, Hebbian link learning,
  spreading activation, link ranking and collaborative article editing.
"""

__version__ = "0.1.0"
