#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "jap/graph.hpp"

namespace jap {

/// Parse failure in an instance record, with 1-based line number and the field
/// that failed.
class MalformedRecord : public std::runtime_error {
 public:
  MalformedRecord(std::size_t line, std::string field, const std::string& message);
  std::size_t line;
  std::string field;
};

// Instance text format:
//
//   jap 1
//   people <n>
//   jobs <n>
//   s <person> <job>      one per selection edge
//   c <job> <job>         one per conflict arc
//
// `#` starts a comment. serialize() writes edges in canonical sorted order so
// equal graphs produce identical text.
std::string serialize(const JobAllocationGraph& g);
JobAllocationGraph deserialize(std::string_view record);

void write_instance_file(const std::filesystem::path& path, const JobAllocationGraph& g);
JobAllocationGraph read_instance_file(const std::filesystem::path& path);

}  // namespace jap
