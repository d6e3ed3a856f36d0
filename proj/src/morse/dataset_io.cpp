#include "morse/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "morse/error.hpp"
#include "morse/text.hpp"

namespace morse {

namespace {

constexpr std::size_t kMetaColumns = 3;

std::filesystem::path meta_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".meta.json");
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::Format, "ParseError", "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string dataset_csv_header() {
  std::string h = "subject,hand,label";
  char buf[8];
  for (auto name : kChannelNames) {
    for (std::size_t t = 0; t < kWindowLength; ++t) {
      std::snprintf(buf, sizeof buf, "%03zu", t);
      h += ',';
      h += name;
      h += buf;
    }
  }
  return h;
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os << dataset_csv_header() << '\n';
  std::string line;
  for (const auto& s : data.samples) {
    line.clear();
    line += std::to_string(s.subject_id);
    line += ',';
    line += hand_code(s.hand);
    line += ',';
    line += to_string(s.label);
    for (double v : s.window.values()) {
      line += ',';
      line += text::format_double(v);
    }
    line += '\n';
    os << line;
  }
}

Dataset read_dataset_csv(std::istream& is) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) parse_error(1, "empty file, expected header row");
  ++line_no;
  if (text::trim(line) != dataset_csv_header()) {
    const auto cols = text::split(text::trim(line), ',');
    throw Error(ErrorKind::Format, "SchemaMismatch",
                "line 1: header does not match dataset schema (" + std::to_string(cols.size()) +
                    " columns, expected " + std::to_string(kMetaColumns + kWindowValues) + ")");
  }
  std::array<double, kWindowValues> values{};
  while (std::getline(is, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto cols = text::split(trimmed, ',');
    if (cols.size() != kMetaColumns + kWindowValues) {
      throw Error(ErrorKind::Format, "SchemaMismatch",
                  "line " + std::to_string(line_no) + ": " + std::to_string(cols.size()) +
                      " columns, expected " + std::to_string(kMetaColumns + kWindowValues));
    }
    LabeledWindow s;
    long long subject = 0;
    if (!text::parse_int(cols[0], subject) || subject < 1) parse_error(line_no, "bad subject id");
    s.subject_id = static_cast<int>(subject);
    try {
      s.hand = parse_hand(cols[1]);
      s.label = parse_gesture(cols[2]);
    } catch (const Error& e) {
      parse_error(line_no, e.what());
    }
    for (std::size_t i = 0; i < kWindowValues; ++i) {
      if (!text::parse_double(cols[kMetaColumns + i], values[i]) || !std::isfinite(values[i])) {
        parse_error(line_no, "bad value in column " + std::to_string(kMetaColumns + i + 1));
      }
    }
    s.window = ImuWindow::from_values(values);
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) parse_error(line_no, "no data rows");
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string() + " for writing");
  write_dataset_csv(os, data);
  if (!os) throw Error(ErrorKind::Io, "IoError", "write failed: " + path.string());

  nlohmann::ordered_json meta{{"schema_version", data.meta.schema_version},
                              {"seed", data.meta.seed},
                              {"generator", data.meta.generator},
                              {"samples", data.samples.size()}};
  std::ofstream ms(meta_path(path), std::ios::binary);
  if (!ms) throw Error(ErrorKind::Io, "IoError", "cannot write " + meta_path(path).string());
  ms << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "IoError", "cannot open " + path.string());
  Dataset data = read_dataset_csv(is);
  std::ifstream ms(meta_path(path), std::ios::binary);
  if (ms) {
    try {
      auto meta = nlohmann::json::parse(ms);
      data.meta.schema_version = meta.value("schema_version", 1);
      data.meta.seed = meta.value("seed", std::uint64_t{0});
      data.meta.generator = meta.value("generator", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, "ParseError",
                  meta_path(path).string() + ": " + std::string(e.what()));
    }
    if (data.meta.schema_version != 1) {
      throw Error(ErrorKind::Format, "SchemaMismatch",
                  "unsupported dataset schema_version " + std::to_string(data.meta.schema_version));
    }
  }
  return data;
}

}  // namespace morse
