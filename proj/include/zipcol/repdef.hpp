// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zipcol/array.hpp"
#include "zipcol/common.hpp"
#include "zipcol/data_type.hpp"
#include "zipcol/value_stream.hpp"

namespace zipcol {

// Repetition and definition level streams for one leaf column, plus the
// flattened leaf values with nulls removed.
//
// Levels follow the inverted convention: repetition value max_rep marks an
// entry that starts a new top-level row and 0 continues the innermost list.
// Definition value 0 is a fully-valid item; each nullable layer adds one
// level and each list layer adds an empty-list level, numbered from the leaf
// outward (item-null, then list-empty, list-null, ..., struct-null).
struct RepDefLevels {
  std::vector<uint16_t> rep;
  std::vector<uint16_t> def;
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
  ValueStream leaf_values;
};

struct LevelWidths {
  int rep_bits = 0;
  int def_bits = 0;
};

namespace repdef {

namespace detail {

enum class LayerRole : uint8_t { kStruct, kList, kLeaf };

struct PathLayer {
  LayerRole role;
  bool nullable = false;
  uint16_t null_code = 0;   // 0 = layer not nullable
  uint16_t empty_code = 0;  // lists only
  int list_level = 0;       // lists only, 1-based from the top
  int child_index = 0;      // structs only
  std::string field_name;   // structs only
  DataType leaf_type;       // leaf only (includes any FSL subtree)
};

struct LeafPath {
  std::vector<PathLayer> layers;  // root to leaf
  uint16_t max_rep = 0;
  uint16_t max_def = 0;
};

inline bool IsLeafNode(const DataType& type) {
  return IsPrimitive(type.kind) || type.kind == Kind::kUtf8 ||
         type.kind == Kind::kBinary || type.kind == Kind::kFixedSizeList;
}

inline void CollectPaths(const DataType& type, std::vector<PathLayer> prefix,
                         std::vector<LeafPath>* out) {
  if (IsLeafNode(type)) {
    if (type.kind == Kind::kFixedSizeList) {
      Check(IsFixedWidthLeafSubtree(type), ErrorCode::kUnsupported,
            "fixed-size-list leaves must have a non-nullable fixed-width "
            "subtree: " +
                type.ToString());
    }
    PathLayer leaf;
    leaf.role = LayerRole::kLeaf;
    leaf.nullable = type.nullable;
    leaf.leaf_type = type;
    prefix.push_back(std::move(leaf));
    out->push_back(LeafPath{std::move(prefix), 0, 0});
    return;
  }
  if (type.kind == Kind::kList) {
    PathLayer layer;
    layer.role = LayerRole::kList;
    layer.nullable = type.nullable;
    prefix.push_back(std::move(layer));
    CollectPaths(type.children[0], std::move(prefix), out);
    return;
  }
  // Struct: one path per descendant leaf.
  for (size_t i = 0; i < type.children.size(); i++) {
    PathLayer layer;
    layer.role = LayerRole::kStruct;
    layer.nullable = type.nullable;
    layer.child_index = static_cast<int>(i);
    layer.field_name = type.field_names[i];
    auto branch = prefix;
    branch.push_back(std::move(layer));
    CollectPaths(type.children[i], std::move(branch), out);
  }
}

inline void AssignCodes(LeafPath* path) {
  uint16_t code = 0;
  int list_count = 0;
  for (auto& layer : path->layers) {
    if (layer.role == LayerRole::kList) {
      list_count++;
    }
  }
  path->max_rep = static_cast<uint16_t>(list_count);
  int list_seen = 0;
  for (auto it = path->layers.rbegin(); it != path->layers.rend(); ++it) {
    switch (it->role) {
      case LayerRole::kLeaf:
        if (it->nullable) {
          it->null_code = ++code;
        }
        break;
      case LayerRole::kList:
        it->empty_code = ++code;
        if (it->nullable) {
          it->null_code = ++code;
        }
        it->list_level = list_count - list_seen;
        list_seen++;
        break;
      case LayerRole::kStruct:
        if (it->nullable) {
          it->null_code = ++code;
        }
        break;
    }
  }
  path->max_def = code;
}

inline std::vector<LeafPath> BuildPaths(const DataType& type) {
  std::vector<LeafPath> paths;
  CollectPaths(type, {}, &paths);
  for (auto& path : paths) {
    AssignCodes(&path);
  }
  return paths;
}

// Bytes of one row of a fixed-width leaf (descends through FSL layers to the
// innermost contiguous primitive buffer).
inline std::span<const uint8_t> FixedLeafRow(const LogicalArray& leaf,
                                             uint64_t row, uint64_t width) {
  const LogicalArray* node = &leaf;
  while (node->dtype.kind == Kind::kFixedSizeList) {
    node = &node->children[0];
  }
  return std::span<const uint8_t>(node->values).subspan(row * width, width);
}

struct ShredWalker {
  const LeafPath& path;
  RepDefLevels* out;

  void EmitEntry(uint16_t rep, uint16_t def) {
    out->rep.push_back(rep);
    out->def.push_back(def);
  }

  void Walk(size_t depth, const LogicalArray& node, uint64_t index,
            uint16_t pending_rep) {
    const PathLayer& layer = path.layers[depth];
    switch (layer.role) {
      case LayerRole::kLeaf: {
        if (layer.nullable && !node.IsValid(index)) {
          EmitEntry(pending_rep, layer.null_code);
          return;
        }
        EmitEntry(pending_rep, 0);
        if (node.dtype.kind == Kind::kUtf8 ||
            node.dtype.kind == Kind::kBinary) {
          out->leaf_values.Append(std::span<const uint8_t>(node.values)
                                      .subspan(node.offsets[index],
                                               node.offsets[index + 1] -
                                                   node.offsets[index]));
        } else {
          out->leaf_values.Append(
              FixedLeafRow(node, index, out->leaf_values.width));
        }
        return;
      }
      case LayerRole::kStruct: {
        if (layer.nullable && !node.IsValid(index)) {
          // A null struct absorbs its subtree: one entry, nothing below.
          EmitEntry(pending_rep, layer.null_code);
          return;
        }
        Walk(depth + 1, node.children[layer.child_index], index, pending_rep);
        return;
      }
      case LayerRole::kList: {
        if (layer.nullable && !node.IsValid(index)) {
          EmitEntry(pending_rep, layer.null_code);
          return;
        }
        uint64_t begin = node.offsets[index];
        uint64_t end = node.offsets[index + 1];
        if (begin == end) {
          EmitEntry(pending_rep, layer.empty_code);
          return;
        }
        // Items after the first continue this list: they start levels
        // (list_level+1)..max_rep, i.e. repetition max_rep - list_level.
        auto continue_rep =
            static_cast<uint16_t>(path.max_rep - layer.list_level);
        for (uint64_t j = begin; j < end; j++) {
          Walk(depth + 1, node.children[0], j,
               j == begin ? pending_rep : continue_rep);
        }
        return;
      }
    }
  }
};

inline RepDefLevels ShredPath(const LogicalArray& array, const LeafPath& path) {
  RepDefLevels out;
  out.max_rep = path.max_rep;
  out.max_def = path.max_def;
  const DataType& leaf_type = path.layers.back().leaf_type;
  if (leaf_type.kind == Kind::kUtf8 || leaf_type.kind == Kind::kBinary) {
    out.leaf_values.fixed_width = false;
  } else {
    out.leaf_values.width = FixedLeafWidth(leaf_type);
  }
  ShredWalker walker{path, &out};
  for (uint64_t row = 0; row < array.length; row++) {
    walker.Walk(0, array, row, path.max_rep);
  }
  return out;
}

// --- Reconstruction ---

struct LayerBuilder {
  std::vector<bool> valid;
  std::vector<uint64_t> offsets{0};  // lists only
  uint64_t slot_count = 0;
};

// Rebuilds the leaf sub-array (possibly an FSL subtree) from dense bytes.
inline LogicalArray BuildLeafArray(const DataType& leaf_type,
                                   std::vector<uint8_t> bytes,
                                   std::vector<uint64_t> offsets,
                                   const std::vector<bool>& valid,
                                   uint64_t count, bool any_invalid) {
  LogicalArray out;
  out.dtype = leaf_type;
  out.length = count;
  if (leaf_type.nullable && any_invalid) {
    out.validity = MakeBitmap(valid);
  }
  if (leaf_type.kind == Kind::kUtf8 || leaf_type.kind == Kind::kBinary) {
    out.values = std::move(bytes);
    out.offsets = std::move(offsets);
    return out;
  }
  if (IsPrimitive(leaf_type.kind)) {
    out.values = std::move(bytes);
    return out;
  }
  // FSL subtree: wrap the innermost primitive buffer.
  DataType inner = leaf_type.children[0];
  LogicalArray child;
  child.dtype = inner;
  uint64_t child_count = count * leaf_type.fsl_dimension;
  if (IsPrimitive(inner.kind)) {
    child.length = child_count;
    child.values = std::move(bytes);
  } else {
    child = BuildLeafArray(inner, std::move(bytes), {}, {}, child_count, false);
  }
  out.children.push_back(std::move(child));
  return out;
}

inline LogicalArray UnshredPath(const RepDefLevels& levels,
                                const LeafPath& path) {
  Check(levels.rep.size() == levels.def.size(), ErrorCode::kCorrupt,
        "rep/def stream length mismatch");
  size_t n_layers = path.layers.size();
  std::vector<LayerBuilder> builders(n_layers);
  const PathLayer& leaf = path.layers.back();
  bool leaf_fixed = leaf.leaf_type.kind != Kind::kUtf8 &&
                    leaf.leaf_type.kind != Kind::kBinary;
  uint64_t leaf_width = leaf_fixed ? FixedLeafWidth(leaf.leaf_type) : 0;
  std::vector<uint8_t> leaf_bytes;
  std::vector<uint64_t> leaf_offsets{0};
  uint64_t next_value = 0;

  // Layer index of each list level (1-based level -> path position).
  std::vector<size_t> list_pos(path.max_rep + 1, 0);
  for (size_t i = 0; i < n_layers; i++) {
    if (path.layers[i].role == LayerRole::kList) {
      list_pos[path.layers[i].list_level] = i;
    }
  }

  enum class Term { kValue, kNull, kEmpty };

  for (size_t e = 0; e < levels.rep.size(); e++) {
    uint16_t rep = levels.rep[e];
    uint16_t def = levels.def[e];
    Check(rep <= path.max_rep && def <= path.max_def, ErrorCode::kCorrupt,
          "corrupt levels: value exceeds maximum at entry " +
              std::to_string(e));

    size_t term_layer = n_layers - 1;
    Term term = Term::kValue;
    if (def != 0) {
      bool found = false;
      for (size_t i = 0; i < n_layers; i++) {
        if (path.layers[i].null_code == def) {
          term_layer = i;
          term = Term::kNull;
          found = true;
          break;
        }
        if (path.layers[i].role == LayerRole::kList &&
            path.layers[i].empty_code == def) {
          term_layer = i;
          term = Term::kEmpty;
          found = true;
          break;
        }
      }
      Check(found, ErrorCode::kCorrupt, "corrupt levels: unassigned "
            "definition code " + std::to_string(def));
    }

    // First layer that receives a new slot.
    size_t start_layer = 0;
    if (path.max_rep > 0 && rep < path.max_rep) {
      start_layer = list_pos[path.max_rep - rep] + 1;
      Check(start_layer <= term_layer, ErrorCode::kCorrupt,
            "corrupt levels: repetition continues below termination at entry " +
                std::to_string(e));
    }

    for (size_t l = start_layer; l <= term_layer; l++) {
      const PathLayer& layer = path.layers[l];
      if (l > 0 && path.layers[l - 1].role == LayerRole::kList) {
        builders[l - 1].offsets.back()++;
      }
      bool slot_valid = !(l == term_layer && term == Term::kNull);
      builders[l].valid.push_back(slot_valid);
      builders[l].slot_count++;
      if (layer.role == LayerRole::kList) {
        builders[l].offsets.push_back(builders[l].offsets.back());
      }
      if (layer.role == LayerRole::kLeaf) {
        if (l == term_layer && term == Term::kValue) {
          Check(next_value < levels.leaf_values.Count(), ErrorCode::kCorrupt,
                "corrupt levels: more valid entries than leaf values");
          auto value = levels.leaf_values.ValueAt(next_value++);
          leaf_bytes.insert(leaf_bytes.end(), value.begin(), value.end());
        } else if (leaf_fixed) {
          leaf_bytes.resize(leaf_bytes.size() + leaf_width, 0);
        }
        leaf_offsets.push_back(leaf_bytes.size());
      }
    }

    // Canonical filler below a null struct: child layers still need slots so
    // that struct children keep the parent length.
    if (term == Term::kNull &&
        path.layers[term_layer].role == LayerRole::kStruct) {
      for (size_t l = term_layer + 1; l < n_layers; l++) {
        const PathLayer& layer = path.layers[l];
        builders[l].valid.push_back(false);
        builders[l].slot_count++;
        if (layer.role == LayerRole::kList) {
          builders[l].offsets.push_back(builders[l].offsets.back());
          break;  // a null list contains no items
        }
        if (layer.role == LayerRole::kLeaf) {
          if (leaf_fixed) {
            leaf_bytes.resize(leaf_bytes.size() + leaf_width, 0);
          }
          leaf_offsets.push_back(leaf_bytes.size());
          break;
        }
      }
    }
  }
  Check(next_value == levels.leaf_values.Count(), ErrorCode::kCorrupt,
        "corrupt levels: leaf value count mismatch");

  // Assemble bottom-up.
  auto any_invalid = [](const std::vector<bool>& bits) {
    for (bool b : bits) {
      if (!b) return true;
    }
    return false;
  };
  LogicalArray current = BuildLeafArray(
      leaf.leaf_type, std::move(leaf_bytes), std::move(leaf_offsets),
      builders.back().valid, builders.back().slot_count,
      any_invalid(builders.back().valid));
  for (size_t l = n_layers - 1; l-- > 0;) {
    const PathLayer& layer = path.layers[l];
    LogicalArray wrapped;
    wrapped.length = builders[l].slot_count;
    bool invalid = any_invalid(builders[l].valid);
    if (layer.nullable && invalid) {
      wrapped.validity = MakeBitmap(builders[l].valid);
    }
    if (layer.role == LayerRole::kList) {
      wrapped.dtype = DataType::List(current.dtype, layer.nullable);
      wrapped.offsets = std::move(builders[l].offsets);
      wrapped.children.push_back(std::move(current));
    } else {
      wrapped.dtype = DataType::Struct(
          {{layer.field_name, current.dtype}}, layer.nullable);
      wrapped.children.push_back(std::move(current));
    }
    current = std::move(wrapped);
  }
  return current;
}

inline size_t CountLeaves(const DataType& dtype) {
  if (IsLeafNode(dtype)) {
    return 1;
  }
  if (dtype.kind == Kind::kList) {
    return CountLeaves(dtype.children[0]);
  }
  size_t count = 0;
  for (const auto& child : dtype.children) {
    count += CountLeaves(child);
  }
  return count;
}

// Zips per-leaf path arrays back into the full (multi-field) column.  Each
// path array is rooted at this node; shared layers (struct validity, list
// offsets) must agree across paths.
inline LogicalArray MergePaths(const DataType& dtype,
                               std::vector<LogicalArray> arrays) {
  if (IsLeafNode(dtype)) {
    return std::move(arrays[0]);
  }
  if (dtype.kind == Kind::kList) {
    for (size_t i = 1; i < arrays.size(); i++) {
      Check(arrays[i].offsets == arrays[0].offsets &&
                arrays[i].validity == arrays[0].validity,
            ErrorCode::kCorrupt, "leaf streams disagree on list layer");
    }
    LogicalArray proto = std::move(arrays[0]);
    std::vector<LogicalArray> child_arrays;
    child_arrays.push_back(std::move(proto.children[0]));
    for (size_t i = 1; i < arrays.size(); i++) {
      child_arrays.push_back(std::move(arrays[i].children[0]));
    }
    LogicalArray out;
    out.dtype = dtype;
    out.length = proto.length;
    out.validity = std::move(proto.validity);
    out.offsets = std::move(proto.offsets);
    out.children.push_back(
        MergePaths(dtype.children[0], std::move(child_arrays)));
    return out;
  }
  // Struct: paths are in depth-first field order, so each field owns a
  // contiguous run of path arrays.
  for (size_t i = 1; i < arrays.size(); i++) {
    Check(arrays[i].validity == arrays[0].validity && arrays[i].length ==
              arrays[0].length,
          ErrorCode::kCorrupt, "leaf streams disagree on struct layer");
  }
  LogicalArray out;
  out.dtype = dtype;
  out.length = arrays[0].length;
  out.validity = arrays[0].validity;
  size_t next = 0;
  for (const auto& field : dtype.children) {
    size_t field_leaves = CountLeaves(field);
    std::vector<LogicalArray> child_arrays;
    child_arrays.reserve(field_leaves);
    for (size_t i = 0; i < field_leaves; i++) {
      child_arrays.push_back(std::move(arrays[next++].children[0]));
    }
    out.children.push_back(MergePaths(field, std::move(child_arrays)));
  }
  return out;
}

}  // namespace detail

}  // namespace repdef

// Bit widths of the level streams for a data type with a single leaf column.
inline LevelWidths LevelWidthsFor(const DataType& dtype) {
  auto paths = repdef::detail::BuildPaths(dtype);
  Check(paths.size() == 1, ErrorCode::kInvalid,
        "level widths are per leaf column; type has " +
            std::to_string(paths.size()) + " leaves");
  const auto& path = paths[0];
  LevelWidths w;
  w.rep_bits = bit_util::BitLength(path.max_rep);
  w.def_bits = bit_util::BitLength(path.max_def);
  return w;
}

inline LevelWidths LevelWidthsFromMax(uint16_t max_rep, uint16_t max_def) {
  return {bit_util::BitLength(max_rep), bit_util::BitLength(max_def)};
}

// Shreds a nested array into one level stream per leaf column (depth-first
// field order).
inline std::vector<RepDefLevels> Shred(const LogicalArray& array) {
  auto violation = array::Validate(array);
  Check(!violation.has_value(), ErrorCode::kInvalid,
        "cannot shred invalid array: " + violation.value_or(""));
  auto paths = repdef::detail::BuildPaths(array.dtype);
  std::vector<RepDefLevels> out;
  out.reserve(paths.size());
  for (const auto& path : paths) {
    out.push_back(repdef::detail::ShredPath(array, path));
  }
  return out;
}

// Exact inverse of Shred for a single-leaf dtype.
inline LogicalArray Unshred(const RepDefLevels& levels, const DataType& dtype) {
  auto paths = repdef::detail::BuildPaths(dtype);
  Check(paths.size() == 1, ErrorCode::kInvalid,
        "Unshred takes a single-leaf dtype; use UnshredColumn");
  LogicalArray path_array = repdef::detail::UnshredPath(levels, paths[0]);
  // The path array for a single-leaf dtype is already the full column.
  return path_array;
}

// Exact inverse of Shred for any dtype (one RepDefLevels per leaf).
inline LogicalArray UnshredColumn(std::span<const RepDefLevels> levels,
                                  const DataType& dtype) {
  auto paths = repdef::detail::BuildPaths(dtype);
  Check(levels.size() == paths.size(), ErrorCode::kCorrupt,
        "leaf stream count mismatch");
  std::vector<LogicalArray> path_arrays;
  path_arrays.reserve(paths.size());
  for (size_t i = 0; i < paths.size(); i++) {
    path_arrays.push_back(repdef::detail::UnshredPath(levels[i], paths[i]));
  }
  return repdef::detail::MergePaths(dtype, std::move(path_arrays));
}

}  // namespace zipcol
