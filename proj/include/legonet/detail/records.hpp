#pragma once

#include "legonet/detail/byte_io.hpp"
#include "legonet/tensor.hpp"

namespace legonet::detail {

// Tensor record: name str16 | role u8 | dtype u8 | ndim u8 | dims u32*ndim |
// payload f32*prod(dims). Shared by LGTW and the raw section of LGNC.
void write_tensor_record(ByteWriter& w, const Tensor& t);
Tensor read_tensor_record(ByteReader& r);

void write_shape(ByteWriter& w, const Shape& shape);
Shape read_shape(ByteReader& r);

// Manifest block: u32 byte length followed by tag-length-value records.
void write_manifest(ByteWriter& w, const ArchManifest& manifest);
ArchManifest read_manifest(ByteReader& r);

}  // namespace legonet::detail
