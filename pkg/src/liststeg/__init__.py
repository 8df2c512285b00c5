"""liststeg: high-capacity steganographic codec over token distributions.

A payload bitstream is hidden inside a token sequence sampled from an
autoregressive model.  Both endpoints share a 256-bit key and the model;
candidate payload prefixes are filtered by each emitted token and re-grown
until a keyed validation suffix pins down the unique message.
"""

from .alias import AliasTable, build as build_alias
from .bitstream import BitString, SecretKey, concat, prefix, slice_bits
from .codec import (
    CandidateList,
    CodecParams,
    StegoTrace,
    StepEvent,
    collision_bound,
    decode,
    encode,
    encode_auto,
    match_suffix,
    read_stegotext,
    suffix_length,
    write_stegotext,
)
from .dist import (
    GRID,
    GRID_BITS,
    MarkovModel,
    ModelSource,
    PeakedModel,
    QuantizedDistribution,
    ServerModel,
    TemperatureProfileModel,
    UniformModel,
    from_config,
    quantize,
)
from .errors import (
    AmbiguousDecodeError,
    DesyncError,
    InvalidDistributionError,
    ModelProtocolError,
    StegError,
    StreamExhaustedError,
    SuffixMatchError,
    TokenBudgetError,
    TransportError,
    TruncatedStegotextError,
    UndefinedUtilizationError,
)
from .metrics import (
    CapacityReport,
    build_report,
    chi_square_gof,
    information_content,
    success_rate,
    utilization,
    utilization_bound,
)
from .prg import Domain, PrgStream

__version__ = "0.1.0"

__all__ = [
    "AliasTable", "build_alias",
    "BitString", "SecretKey", "concat", "prefix", "slice_bits",
    "CandidateList", "CodecParams", "StegoTrace", "StepEvent",
    "collision_bound", "decode", "encode", "encode_auto", "match_suffix",
    "read_stegotext", "suffix_length", "write_stegotext",
    "GRID", "GRID_BITS", "MarkovModel", "ModelSource", "PeakedModel",
    "QuantizedDistribution", "ServerModel", "TemperatureProfileModel",
    "UniformModel", "from_config", "quantize",
    "AmbiguousDecodeError", "DesyncError", "InvalidDistributionError",
    "ModelProtocolError", "StegError", "StreamExhaustedError",
    "SuffixMatchError", "TokenBudgetError", "TransportError",
    "TruncatedStegotextError", "UndefinedUtilizationError",
    "CapacityReport", "build_report", "chi_square_gof",
    "information_content", "success_rate", "utilization",
    "utilization_bound",
    "Domain", "PrgStream",
]
