#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "morse/core.hpp"

namespace morse {

/// Header row of the dataset CSV: subject,hand,label then ax000..gz249.
std::string dataset_csv_header();

void write_dataset_csv(std::ostream& os, const Dataset& data);
/// Throws Format/ParseError (with line number) or Format/SchemaMismatch.
Dataset read_dataset_csv(std::istream& is);

/// Writes the CSV plus a `<path>.meta.json` sidecar holding seed, schema
/// version and generator name.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
/// The sidecar is optional on load.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace morse
