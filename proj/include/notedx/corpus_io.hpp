#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "notedx/textprep.hpp"

namespace notedx {

/// `{"id": str, "text": str, "label": str|null, "sections": {name: str}}` per line.
std::vector<RawNote> read_raw_notes(const std::filesystem::path& path);
void write_raw_notes(const std::filesystem::path& path, const std::vector<RawNote>& notes);
RawNote parse_raw_note(const std::string& line);
std::string raw_note_json(const RawNote& note);

/// `{"id": str, "tokens": [str], "label": str}` per line.
std::vector<Document> read_documents(const std::filesystem::path& path);
void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Accepts either a preprocessed corpus or raw notes; raw notes go through
/// preprocess_note with the given aliases, sections and rules.
std::vector<Document> read_corpus(const std::filesystem::path& path, const AliasMap& aliases = {},
                                  const std::vector<std::string>& sections = default_admission_sections(),
                                  const DiagnosisRules& rules = {});

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace notedx
