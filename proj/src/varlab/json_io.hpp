#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "varlab/types.hpp"

namespace varlab {

using Json = nlohmann::json;

Json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const EmotionProbs& p);
EmotionProbs probs_from_json(const Json& j);

// Whole-file helpers. Writes go through a temporary file and rename so that
// readers never observe a half-written artifact.
std::string read_text(const std::filesystem::path& path);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

// One JSON value per line. A trailing partial line (no newline) is ignored.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

// Shortest round-trip rendering used in CSV output.
std::string format_double(double value);

}  // namespace varlab
