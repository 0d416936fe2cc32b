#include "notedx/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "notedx/error.hpp"

namespace notedx {

using nlohmann::json;

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      fn(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::CorruptFile,
           path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

RawNote parse_raw_note(const std::string& line) {
  const json j = json::parse(line);
  RawNote note;
  note.id = j.at("id").get<std::string>();
  note.text = j.value("text", std::string());
  if (j.contains("label") && !j["label"].is_null()) note.label = j["label"].get<std::string>();
  if (j.contains("sections") && j["sections"].is_object()) {
    for (const auto& [name, body] : j["sections"].items()) {
      note.sections[name] = body.get<std::string>();
    }
  }
  if (note.id.empty()) fail(ErrorCode::InvalidArgument, "note with empty id");
  return note;
}

std::vector<RawNote> read_raw_notes(const std::filesystem::path& path) {
  std::vector<RawNote> notes;
  for_each_line(path, [&](const std::string& line) { notes.push_back(parse_raw_note(line)); });
  return notes;
}

std::string raw_note_json(const RawNote& note) {
  json j;
  j["id"] = note.id;
  j["text"] = note.text;
  j["label"] = note.label ? json(*note.label) : json(nullptr);
  if (!note.sections.empty()) j["sections"] = note.sections;
  return j.dump();
}

void write_raw_notes(const std::filesystem::path& path, const std::vector<RawNote>& notes) {
  std::ofstream out = open_out(path);
  for (const auto& note : notes) out << raw_note_json(note) << '\n';
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_line(path, [&](const std::string& line) {
    const json j = json::parse(line);
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("label") && !j["label"].is_null()) doc.label = j["label"].get<std::string>();
    docs.push_back(std::move(doc));
  });
  return docs;
}

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out = open_out(path);
  for (const auto& doc : docs) {
    json j;
    j["id"] = doc.id;
    j["tokens"] = doc.tokens;
    j["label"] = doc.label ? json(*doc.label) : json(nullptr);
    out << j.dump() << '\n';
  }
}

std::vector<Document> read_corpus(const std::filesystem::path& path, const AliasMap& aliases,
                                  const std::vector<std::string>& sections,
                                  const DiagnosisRules& rules) {
  std::vector<Document> docs;
  for_each_line(path, [&](const std::string& line) {
    const json j = json::parse(line);
    if (j.contains("tokens")) {
      Document doc;
      doc.id = j.at("id").get<std::string>();
      doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (j.contains("label") && !j["label"].is_null()) doc.label = j["label"].get<std::string>();
      docs.push_back(std::move(doc));
    } else {
      docs.push_back(preprocess_note(parse_raw_note(line), aliases, sections, rules));
    }
  });
  return docs;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out = open_out(path);
  out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace notedx
