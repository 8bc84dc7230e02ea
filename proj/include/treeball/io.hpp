#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "treeball/tasks.hpp"

namespace treeball::io {

using Json = nlohmann::ordered_json;

// Metadata block carried by every output file (first JSONL line / '#' CSV
// header lines): tool version, config hash, seed. No timestamps, so re-runs
// are byte-identical.
Json meta_block(const Json& config, uint64_t seed);

Json params_to_json(const tasks::Params& params);
tasks::Params params_from_json(tasks::TaskId task, const Json& j);

Json instance_to_json(const tasks::ProblemInstance& inst);
tasks::ProblemInstance instance_from_json(const Json& j);

// JSONL with a leading {"_meta": ...} record. UTF-8, one record per line,
// stable key order.
void write_jsonl(const std::filesystem::path& path, const Json& meta,
                 const std::vector<Json>& records);
std::vector<Json> read_jsonl(const std::filesystem::path& path, Json* meta = nullptr);

void write_instances(const std::filesystem::path& path, const Json& meta,
                     const std::vector<tasks::ProblemInstance>& instances);
std::vector<tasks::ProblemInstance> read_instances(const std::filesystem::path& path);

// CSV with '#'-prefixed metadata lines before the header row.
void write_csv(const std::filesystem::path& path, const Json& meta,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

std::string config_hash(const Json& config);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace treeball::io
