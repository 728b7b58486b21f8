#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "relsem/model.hpp"
#include "relsem/optim.hpp"

namespace relsem {

using CheckpointMeta = std::map<std::string, std::string>;

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
  std::optional<AdamW> optimizer;
};

// Binary layout (little-endian): magic "RSCKPT01", u32 version, u64 config
// hash, config text, meta pairs, tensor table (name, rank, dims), raw float
// payload in table order, then an optional optimizer section.
void save_checkpoint(std::ostream& out, const Model& model, const CheckpointMeta& meta,
                     const AdamW* optimizer = nullptr);
Checkpoint load_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta,
                     const AdamW* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relsem
