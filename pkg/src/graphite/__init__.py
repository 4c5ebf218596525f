"""Feature-node graph transformation for heterophilic graphs."""
from graphite.graph import (
    AssumptionReport,
    CsrAdjacency,
    Graph,
    GraphError,
    build_graph,
    check_assumptions,
    to_csr,
)
from graphite.transform import (
    SizeReport,
    TransformedGraph,
    TransformOptions,
    graphite_transform,
    nhb_transform,
    size_report,
    two_hop_witness,
)

__version__ = "0.1.0"
