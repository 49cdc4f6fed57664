"""Time-series segmentation by correspondence analysis, sequence-constrained
hierarchical clustering and Haar wavelet regression on the dendrogram."""

from .errors import DataError, NumericalError, UltrasegError, ValidationError
from .ingest import (
    ContingencyTable,
    EventRecord,
    ExternalSignal,
    aggregate,
    load_signal,
    parse_events,
    read_table,
    serialize_events,
    write_table,
)
from .correspondence import (
    FactorDecomposition,
    FrequencyModel,
    chi2_sq_distance,
    factor_decomposition,
    frequency_model,
    total_inertia,
    transition_consistency,
)
from .cluster import (
    Dendrogram,
    Partition,
    constrained_complete_link,
    cophenetic_matrix,
    cut,
    median_linkage,
)
from .haar import HaarDecomposition, forward, inverse, threshold
from .regression import (
    PiecewiseFit,
    baseline_fit,
    extract_breakpoints,
    fold_and_regress,
    format_breakpoints,
    mse_sweep,
)

__version__ = "0.1.0"
