#include "jap/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace jap {

MalformedRecord::MalformedRecord(std::size_t line_no, std::string field_name,
                                 const std::string& message)
    : std::runtime_error("line " + std::to_string(line_no) + ", field '" + field_name +
                         "': " + message),
      line(line_no),
      field(std::move(field_name)) {}

std::string serialize(const JobAllocationGraph& g) {
  std::ostringstream os;
  os << "jap 1\n";
  os << "people " << g.n_people() << '\n';
  os << "jobs " << g.n_jobs() << '\n';
  for (const auto& a : g.selection()) os << "s " << a.person << ' ' << a.job << '\n';
  for (const auto& c : g.conflicts()) os << "c " << c.from << ' ' << c.to << '\n';
  return os.str();
}

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::int64_t parse_count(std::string_view token, std::size_t line, const char* field) {
  std::int64_t value = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw MalformedRecord(line, field, "expected an integer, got '" + std::string(token) + "'");
  if (value < 0) throw MalformedRecord(line, field, "must be non-negative");
  return value;
}

}  // namespace

JobAllocationGraph deserialize(std::string_view record) {
  std::int64_t n_people = -1;
  std::int64_t n_jobs = -1;
  bool have_header = false;
  std::vector<Assignment> selection;
  std::vector<ConflictArc> conflicts;
  std::vector<std::size_t> selection_lines;
  std::vector<std::size_t> conflict_lines;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= record.size()) {
    auto next = record.find('\n', pos);
    if (next == std::string_view::npos) next = record.size();
    const auto tokens = tokenize(record.substr(pos, next - pos));
    pos = next + 1;
    ++line_no;
    if (tokens.empty()) continue;

    const auto key = tokens[0];
    if (!have_header) {
      if (key != "jap") throw MalformedRecord(line_no, "header", "expected 'jap 1'");
      if (tokens.size() != 2 || tokens[1] != "1")
        throw MalformedRecord(line_no, "version", "unsupported format version");
      have_header = true;
      continue;
    }
    auto expect_arity = [&](std::size_t n) {
      if (tokens.size() != n)
        throw MalformedRecord(line_no, std::string(key),
                              "expected " + std::to_string(n - 1) + " value(s)");
    };
    if (key == "people" || key == "jobs") {
      expect_arity(2);
      auto& target = key == "people" ? n_people : n_jobs;
      if (target >= 0) throw MalformedRecord(line_no, std::string(key), "declared twice");
      if (!selection.empty() || !conflicts.empty())
        throw MalformedRecord(line_no, std::string(key), "must precede edge lines");
      target = parse_count(tokens[1], line_no, key == "people" ? "people" : "jobs");
      if (target > INT32_MAX) throw MalformedRecord(line_no, std::string(key), "too large");
    } else if (key == "s" || key == "c") {
      expect_arity(3);
      if (n_people < 0 || n_jobs < 0)
        throw MalformedRecord(line_no, std::string(key), "edge before 'people'/'jobs' header");
      if (key == "s") {
        const auto p = parse_count(tokens[1], line_no, "person");
        const auto j = parse_count(tokens[2], line_no, "job");
        if (p >= n_people) throw MalformedRecord(line_no, "person", "index out of range");
        if (j >= n_jobs) throw MalformedRecord(line_no, "job", "index out of range");
        selection.push_back({static_cast<PersonIndex>(p), static_cast<JobIndex>(j)});
        selection_lines.push_back(line_no);
      } else {
        const auto u = parse_count(tokens[1], line_no, "from");
        const auto v = parse_count(tokens[2], line_no, "to");
        if (u >= n_jobs) throw MalformedRecord(line_no, "from", "index out of range");
        if (v >= n_jobs) throw MalformedRecord(line_no, "to", "index out of range");
        conflicts.push_back({static_cast<JobIndex>(u), static_cast<JobIndex>(v)});
        conflict_lines.push_back(line_no);
      }
    } else {
      throw MalformedRecord(line_no, std::string(key), "unknown record type");
    }
  }
  if (!have_header) throw MalformedRecord(line_no, "header", "empty record");
  if (n_people < 0) throw MalformedRecord(line_no, "people", "missing");
  if (n_jobs < 0) throw MalformedRecord(line_no, "jobs", "missing");

  try {
    return JobAllocationGraph(static_cast<std::int32_t>(n_people),
                              static_cast<std::int32_t>(n_jobs), std::move(selection),
                              std::move(conflicts));
  } catch (const GraphError& e) {
    const auto& v = e.violations().front();
    const auto& lines = v.in_conflicts ? conflict_lines : selection_lines;
    throw MalformedRecord(lines.at(v.edge_index), v.in_conflicts ? "c" : "s",
                          std::string(to_string(v.kind)) + " " + v.detail);
  }
}

void write_instance_file(const std::filesystem::path& path, const JobAllocationGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize(g);
}

JobAllocationGraph read_instance_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

}  // namespace jap
