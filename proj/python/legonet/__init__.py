"""Python bindings for the legonet C++ core.

Weights are cut into b x b blocks, the blocks are clustered into K shared
"legos", and each block is stored as a packed index into that codebook.
"""

from ._legonet import (
    CompressedModel,
    DatasetBundle,
    LegonetError,
    ModelBundle,
    Tensor,
    bits_for_k,
    compress,
    compute_cr,
    decode_compressed,
    forward,
    output_deviation,
    pack_indices,
    read_compressed,
    read_dataset,
    read_model,
    reconstruct,
    search,
    top1_accuracy,
    unpack_indices,
    write_compressed,
    write_model,
)

__all__ = [
    "CompressedModel",
    "DatasetBundle",
    "LegonetError",
    "ModelBundle",
    "Tensor",
    "bits_for_k",
    "compress",
    "compute_cr",
    "decode_compressed",
    "forward",
    "output_deviation",
    "pack_indices",
    "read_compressed",
    "read_dataset",
    "read_model",
    "reconstruct",
    "search",
    "top1_accuracy",
    "unpack_indices",
    "write_compressed",
    "write_model",
]
