#pragma once

#include "nsdf/decoder.hpp"
#include "nsdf/feature_volume.hpp"

#include <iosfwd>
#include <string>

namespace nsdf {

/// Map snapshot: feature volume tables plus the decoder, one binary file.
///
/// Layout (little-endian):
///   magic "NSDFSNAP", u32 version (1)
///   i32 levels, i32 active_levels, f64 leaf_size, 3 x f64 origin
///   per active level (coarse to fine):
///     u64 node count,   entries sorted by key: u64 key + 8 x u64 corner keys
///     u64 corner count, entries sorted by key: u64 key + u32 feature index
///   u64 feature count, rows of 12 x f32
///   4 x u32 decoder widths (12, 32, 32, 1), then row-major f32 weight
///   matrices and bias vectors layer by layer.
///
/// Tables are dumped in sorted key order, so identical content produces
/// identical bytes.
void save_snapshot(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                   const std::string& path);

struct Snapshot {
  HierarchicalFeatureVolume volume;
  SdfDecoder decoder;
};

Snapshot load_snapshot(const std::string& path);

void save_snapshot(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                   std::ostream& out);
Snapshot load_snapshot(std::istream& in);

}  // namespace nsdf
