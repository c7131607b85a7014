#include "varlab/json_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "varlab/error.hpp"

namespace varlab {

namespace fs = std::filesystem;

Json to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::kValidation, "expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorCode::kValidation, "expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json to_json(const EmotionProbs& p) { return Json(std::vector<double>(p.begin(), p.end())); }

EmotionProbs probs_from_json(const Json& j) {
  require(j.is_array() && j.size() == kNumEmotions, ErrorCode::kValidation,
          "expected 6 emotion probabilities");
  EmotionProbs p{};
  for (int i = 0; i < kNumEmotions; ++i) p[i] = j[i].get<double>();
  return p;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    require(static_cast<bool>(out), ErrorCode::kIo, "short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kValidation, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::vector<Json> read_jsonl(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<Json> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::kValidation, path.string() + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += row.dump();
    text += '\n';
  }
  write_text_atomic(path, text);
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

}  // namespace varlab
