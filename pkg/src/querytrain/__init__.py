"""Query training for binary RBMs: unrolled belief propagation trained over random queries."""

__version__ = "0.1.0"

from .model import RbmParamsQT, RbmParamsStd, from_standard, to_standard, load_checkpoint, save_checkpoint  # noqa: E402
from .qtnn import encode_evidence, forward, infer, transfer, transfer_mp  # noqa: E402
from .queries import QueryDistribution, generate_query_set  # noqa: E402

__all__ = [
    "RbmParamsQT",
    "RbmParamsStd",
    "from_standard",
    "to_standard",
    "load_checkpoint",
    "save_checkpoint",
    "encode_evidence",
    "forward",
    "infer",
    "transfer",
    "transfer_mp",
    "QueryDistribution",
    "generate_query_set",
]
