#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dpgrpo/dataset.hpp"

namespace dpgrpo {

// One line of a record file. The "format" field tells them apart:
// seed, solution_set, think, discrimination, preference.
using Record = std::variant<SeedSample, SolutionSet, ThinkSample, PairSample>;

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const Record& rec);
Record record_from_json(const ordered_json& j);

std::string record_format(const Record& rec);

// One compact JSON object per line, fields in a fixed order.
void write_records(std::ostream& os, std::span<const Record> records);
// Blank lines are skipped. Throws ParseError carrying the 1-based line number.
std::vector<Record> read_records(std::istream& is);

void write_records(const std::filesystem::path& path, std::span<const Record> records);
std::vector<Record> read_records(const std::filesystem::path& path);

// Reads a file whose records must all be of type T.
template <class T>
std::vector<T> read_records_as(const std::filesystem::path& path);

template <class T>
std::vector<Record> as_records(const std::vector<T>& items) {
    return std::vector<Record>(items.begin(), items.end());
}

ordered_json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const ordered_json& j);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace dpgrpo
