"""Device-independent certification of genuine multipartite entanglement.

Core pipeline: build a state, pick a covering set of party pairs, extract an
entangled pair for each covering pair with an LOCC protocol, tailor and
rescale a bipartite Bell expression per protocol branch, and turn the
observed Bell values into biseparable bounds and noise-robustness figures.
"""

from .qstate import (
    DensityMatrix,
    MemoryBudgetExceeded,
    PureState,
    QuditRegister,
    SchmidtDecomposition,
    apply_local,
    entanglement_entropy,
    fidelity,
    is_genuinely_entangled,
    is_product,
    measure_site,
    partial_trace,
    pure_to_density,
    schmidt,
    tensor,
)

__version__ = "0.1.0"
