"""Sample-size bounds for bipartition cover under the multispecies coalescent.

Library layout:

* `coalescent` - ancestral-lineage transition probabilities and pmf algebra.
* `treegen`    - species-tree construction, bipartitions, rebalancing.
* `bounds`     - the four gene-count bounds and their inversion machinery.
* `mscsim`     - gene-tree simulation, cover experiments, quantiles.
* `asymptotics`- hypoexponential tools, the lineage-count limit law, regimes.
* `checks`     - runnable verification suites (also behind `bipcover check`).
* `cli`        - the `bipcover` command.
"""

from .bounds import (
    BoundReport,
    BoundSpec,
    balanced_bound,
    balanced_bound_envelope,
    bound_report,
    caterpillar_bound,
    invert_sum_bound,
    one_step_bound,
    original_bound,
)
from .coalescent import LineageDistribution, convolve, evolve, g
from .errors import (
    AlreadyBalanced,
    CapExceeded,
    DomainError,
    NeverSatisfiable,
    Overflow,
    UnstableEvaluation,
)
from .treegen import Bipartition, SpeciesTree, balanced, caterpillar, yule

__version__ = "0.1.0"

__all__ = [
    "AlreadyBalanced",
    "Bipartition",
    "BoundReport",
    "BoundSpec",
    "CapExceeded",
    "DomainError",
    "LineageDistribution",
    "NeverSatisfiable",
    "Overflow",
    "SpeciesTree",
    "UnstableEvaluation",
    "balanced",
    "balanced_bound",
    "balanced_bound_envelope",
    "bound_report",
    "caterpillar",
    "caterpillar_bound",
    "convolve",
    "evolve",
    "g",
    "invert_sum_bound",
    "one_step_bound",
    "original_bound",
    "yule",
    "__version__",
]
