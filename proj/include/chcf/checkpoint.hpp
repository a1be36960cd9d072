#pragma once

#include <filesystem>
#include <iosfwd>

#include "chcf/cf_models.hpp"
#include "chcf/criterion.hpp"

namespace chcf {

struct Checkpoint {
  CfParams params;
  CriterionParams criterion;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Text container, layout in docs/checkpoint.md. Every value is written with
// 17 significant digits so reading it back is bit-exact.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace chcf
