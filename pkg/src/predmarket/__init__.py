"""predmarket: a deterministic simulator of competing ML predictors that can
purchase user data under finite budgets, plus closed-form analysis of the
quality users experience when they pick a predictor by softmax choice.

Subpackage map:

- ``dataset``     user distributions: CSV ingestion, synthetic mixtures,
                  label noise, splits, i.i.d. streaming
- ``models``      online multinomial-logistic and one-hidden-layer
                  classifiers trained with Adam
- ``strategy``    entropy-threshold buying rules and budget accounting
- ``environment`` the per-round competition dynamics
- ``metrics``     population-level evaluation (overall quality, QoE,
                  diversity, class-specific quality, Z histograms)
- ``theory``      closed forms, explicit constants, and sufficient-condition
                  checks relating data purchase to user-experienced quality
- ``harness``     experiment grids, seed derivation, CSV/JSON reports

Hot numeric kernels are JIT-compiled with numba by default; set
``PREDMARKET_BACKEND=numpy`` to force the pure-numpy fallback.
"""

from predmarket.backend import active_backend

__version__ = "0.1.0"

__all__ = ["active_backend", "__version__"]
