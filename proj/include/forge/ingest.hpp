#pragma once

#include <string>
#include <vector>

#include "forge/core.hpp"

namespace forge {

struct Section {
    std::string section_id;
    std::string heading;
    std::string body;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::vector<Section> sections;
};

enum class LengthUnit { chars, tokens };

struct Segment {
    std::string segment_id;   // "<doc_id>#<index>"
    std::string doc_id;
    std::string first_section;
    std::string last_section;
    std::string text;         // concatenated section bodies, byte for byte
};

struct RawMethod {
    std::string name;
    std::string summary;
};

struct RawRelation {
    std::string src;
    std::string dst;
    int rating = 0;
    std::string explanation;
};

struct ExtractionRecord {
    std::string segment_id;
    std::string doc_id;
    std::vector<RawMethod> pre_methods;   // inputs: never a relation target here
    std::vector<RawMethod> post_methods;  // derived: named as a relation target
    std::vector<RawRelation> relations;
    bool rejected = false;
    std::vector<std::string> diagnostics;
};

std::size_t document_length(const Document& doc, LengthUnit unit);

// Greedy packing of whole sections: a section is never split, a segment takes
// sections until adding the next would exceed `limit`. A single section above
// the limit becomes its own oversized segment. Concatenating the segment
// texts reproduces the document body exactly.
std::vector<Segment> segment_document(const Document& doc, std::size_t limit,
                                      LengthUnit unit = LengthUnit::chars);

class Extractor {
public:
    virtual ~Extractor() = default;
    virtual std::string id() const = 0;
    virtual ExtractionRecord extract(const Segment& segment) = 0;
};

// Line grammar:
//   METHOD <name>:: <summary>
//   REL <src> -> <dst> @<rating>:: <explanation>
// Anything else is prose. A method named as a relation target is classified
// as derived (post); the rest are inputs (pre). Malformed grammar lines are
// skipped with a diagnostic.
class RuleBasedExtractor : public Extractor {
public:
    std::string id() const override { return "rules-v1"; }
    ExtractionRecord extract(const Segment& segment) override;
};

// Runs the extractor, then validates: every relation endpoint must name a
// declared method and ratings must sit in [1,5]. Violations mark the record
// rejected with diagnostics naming the offender.
ExtractionRecord run_extraction(const Segment& segment, Extractor& extractor);

// One JSON object per line:
// {"doc_id": ..., "title": ..., "sections": [{"section_id","heading","body"}, ...]}
std::vector<Document> read_corpus_jsonl(const std::string& path);
Document document_from_json_line(const std::string& line, std::size_t line_no);

} // namespace forge
