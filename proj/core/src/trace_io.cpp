#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "voxstream/error.hpp"
#include "voxstream/pipeline_sim.hpp"

namespace voxstream {

TraceFormat parse_trace_format(std::string_view name) {
  if (name == "json" || name == "jsonl") return TraceFormat::kJson;
  if (name == "csv") return TraceFormat::kCsv;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown trace format '{}'", name),
              {{"format", std::string(name)}, {"allowed", {"json", "csv"}}});
}

namespace {

std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Splits one CSV record. Quoted fields may contain commas and doubled quotes
// but not newlines (payloads are single-line JSON).
std::vector<std::string> csv_fields(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, fmt::format("line {}: unterminated quote", line_no), {{"line", line_no}});
  fields.push_back(std::move(cur));
  return fields;
}

double parse_time(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double t = std::stod(text, &used);
    if (used == text.size()) return t;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kParse, fmt::format("line {}: bad time '{}'", line_no, text), {{"line", line_no}});
}

}  // namespace

void write_trace(std::ostream& out, std::span<const TraceEvent> events, TraceFormat format) {
  if (format == TraceFormat::kCsv) {
    out << "t,stage,payload\n";
    for (const auto& e : events) {
      out << fmt::format("{:.17g},{},{}\n", e.t, to_string(e.stage), csv_quote(e.payload.dump()));
    }
    return;
  }
  for (const auto& e : events) {
    const nlohmann::json rec = {{"t", e.t}, {"stage", std::string(to_string(e.stage))}, {"payload", e.payload}};
    out << rec.dump() << '\n';
  }
}

std::vector<TraceEvent> read_trace(std::istream& in, TraceFormat format) {
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t line_no = 0;
  if (format == TraceFormat::kCsv) {
    if (!std::getline(in, line) || line != "t,stage,payload") {
      throw Error(ErrorCode::kParse, "trace CSV must start with header t,stage,payload");
    }
    ++line_no;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      if (format == TraceFormat::kCsv) {
        const auto fields = csv_fields(line, line_no);
        if (fields.size() != 3) {
          throw Error(ErrorCode::kParse, fmt::format("line {}: expected 3 fields, got {}", line_no, fields.size()),
                      {{"line", line_no}});
        }
        events.push_back({parse_time(fields[0], line_no), parse_stage(fields[1]), nlohmann::json::parse(fields[2])});
      } else {
        const auto rec = nlohmann::json::parse(line);
        events.push_back({rec.at("t").get<double>(), parse_stage(rec.at("stage").get<std::string>()),
                          rec.value("payload", nlohmann::json::object())});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: {}", line_no, e.what()), {{"line", line_no}});
    }
  }
  return events;
}

void emit_trace(std::span<const TraceEvent> events, TraceFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kIo, fmt::format("cannot open {} for writing", path.string()), {{"path", path.string()}});
  }
  write_trace(out, events, format);
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, fmt::format("write to {} failed", path.string()), {{"path", path.string()}});
}

std::vector<TraceEvent> load_trace(const std::filesystem::path& path, TraceFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()), {{"path", path.string()}});
  return read_trace(in, format);
}

}  // namespace voxstream
