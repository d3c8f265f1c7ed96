#pragma once
// The annotated document model shared by every pipeline stage. Immutable
// after construction.

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace redee {

struct DocumentLimits {
  int max_sentences = 128;
  int max_sentence_len = 64;
};

struct Document {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  bool truncated = false;
};

// Drops trailing sentences/tokens over the limits; never rejects.
inline void apply_limits(Document& doc, const DocumentLimits& limits) {
  if (static_cast<int>(doc.sentences.size()) > limits.max_sentences) {
    doc.sentences.resize(static_cast<std::size_t>(limits.max_sentences));
    doc.truncated = true;
  }
  for (auto& s : doc.sentences)
    if (static_cast<int>(s.size()) > limits.max_sentence_len) {
      s.resize(static_cast<std::size_t>(limits.max_sentence_len));
      doc.truncated = true;
    }
}

struct EntityMention {
  int sentence = 0;
  int begin = 0;  // half-open token span [begin, end)
  int end = 0;
  std::string surface;

  bool operator<(const EntityMention& o) const {
    return std::tie(sentence, begin, end, surface) < std::tie(o.sentence, o.begin, o.end, o.surface);
  }
  bool operator==(const EntityMention& o) const {
    return sentence == o.sentence && begin == o.begin && end == o.end && surface == o.surface;
  }
};

struct Entity {
  std::string id;
  std::string type;
  std::vector<EntityMention> mentions;  // non-empty
};

struct EventRecord {
  std::string event_type;
  std::map<std::string, std::string> args;  // role -> entity id; missing roles allowed

  bool operator==(const EventRecord& o) const { return event_type == o.event_type && args == o.args; }
  bool operator<(const EventRecord& o) const {
    return std::tie(event_type, args) < std::tie(o.event_type, o.args);
  }
};

struct RelationTriple {
  std::string head;
  std::string tail;
  std::string relation;

  bool operator<(const RelationTriple& o) const {
    return std::tie(head, tail, relation) < std::tie(o.head, o.tail, o.relation);
  }
  bool operator==(const RelationTriple& o) const {
    return head == o.head && tail == o.tail && relation == o.relation;
  }
};

// Entity identity within a document is keyed by the exact trimmed surface
// string; no case folding.
inline std::string normalize_surface(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

enum class Tokenization { Chars, Whitespace };

// Character mode splits UTF-8 code points (Chinese-like corpora); whitespace
// mode splits on blanks.
inline std::vector<std::string> tokenize(const std::string& text, Tokenization mode) {
  std::vector<std::string> out;
  if (mode == Tokenization::Whitespace) {
    std::string cur;
    for (char c : text) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, text.size() - i);
    std::string tok = text.substr(i, len);
    if (tok != " " && tok != "\t" && tok != "\n" && tok != "\r") out.push_back(std::move(tok));
    i += len;
  }
  return out;
}

inline std::string span_surface(const std::vector<std::string>& sentence, int begin, int end,
                                const std::string& joiner = "") {
  std::string s;
  for (int i = begin; i < end; ++i) {
    if (i > begin) s += joiner;
    s += sentence[static_cast<std::size_t>(i)];
  }
  return s;
}

}  // namespace redee
