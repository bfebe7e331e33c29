#include "forge/ingest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/util.hpp"

namespace forge {

namespace {

std::size_t section_length(const Section& s, LengthUnit unit) {
    if (unit == LengthUnit::chars) return s.body.size();
    return tokenize(s.body).size();
}

} // namespace

std::size_t document_length(const Document& doc, LengthUnit unit) {
    std::size_t total = 0;
    for (const auto& s : doc.sections) total += section_length(s, unit);
    return total;
}

std::vector<Segment> segment_document(const Document& doc, std::size_t limit, LengthUnit unit) {
    if (limit == 0) throw ValidationError("segment limit must be positive");
    std::vector<Segment> out;
    if (doc.sections.empty()) return out;

    Segment cur;
    std::size_t cur_len = 0;
    auto flush = [&]() {
        if (cur.first_section.empty()) return;
        cur.segment_id = doc.doc_id + "#" + std::to_string(out.size());
        cur.doc_id = doc.doc_id;
        out.push_back(std::move(cur));
        cur = Segment{};
        cur_len = 0;
    };

    for (const auto& section : doc.sections) {
        std::size_t len = section_length(section, unit);
        if (cur_len > 0 && cur_len + len > limit) flush();
        if (cur.first_section.empty()) cur.first_section = section.section_id;
        cur.last_section = section.section_id;
        cur.text += section.body;
        cur_len += len;
        if (cur_len > limit) flush();  // oversized single section rides alone
    }
    flush();
    return out;
}

ExtractionRecord RuleBasedExtractor::extract(const Segment& segment) {
    ExtractionRecord rec;
    rec.segment_id = segment.segment_id;
    rec.doc_id = segment.doc_id;

    std::vector<RawMethod> methods;
    std::set<std::string> declared;

    std::istringstream lines(segment.text);
    std::string raw;
    while (std::getline(lines, raw)) {
        std::string line = trim(raw);
        if (line.rfind("METHOD ", 0) == 0) {
            auto sep = line.find("::");
            if (sep == std::string::npos) {
                rec.diagnostics.push_back("malformed METHOD line skipped: " + line);
                continue;
            }
            RawMethod m;
            m.name = trim(line.substr(7, sep - 7));
            m.summary = trim(line.substr(sep + 2));
            if (m.name.empty()) {
                rec.diagnostics.push_back("METHOD line with empty name skipped");
                continue;
            }
            if (!declared.insert(m.name).second) {
                rec.diagnostics.push_back("duplicate METHOD declaration ignored: " + m.name);
                continue;
            }
            methods.push_back(std::move(m));
        } else if (line.rfind("REL ", 0) == 0) {
            auto sep = line.find("::");
            std::string head = sep == std::string::npos ? line.substr(4) : line.substr(4, sep - 4);
            std::string explanation = sep == std::string::npos ? "" : trim(line.substr(sep + 2));
            auto arrow = head.find("->");
            auto at = head.rfind('@');
            if (arrow == std::string::npos || at == std::string::npos || at < arrow) {
                rec.diagnostics.push_back("malformed REL line skipped: " + line);
                continue;
            }
            RawRelation r;
            r.src = trim(head.substr(0, arrow));
            r.dst = trim(head.substr(arrow + 2, at - arrow - 2));
            r.explanation = explanation;
            try {
                r.rating = std::stoi(trim(head.substr(at + 1)));
            } catch (const std::exception&) {
                rec.diagnostics.push_back("REL line with non-numeric rating skipped: " + line);
                continue;
            }
            if (r.src.empty() || r.dst.empty()) {
                rec.diagnostics.push_back("REL line with empty endpoint skipped: " + line);
                continue;
            }
            rec.relations.push_back(std::move(r));
        }
    }

    std::set<std::string> targets;
    for (const auto& r : rec.relations) targets.insert(r.dst);
    for (auto& m : methods) {
        if (targets.count(m.name))
            rec.post_methods.push_back(std::move(m));
        else
            rec.pre_methods.push_back(std::move(m));
    }
    return rec;
}

ExtractionRecord run_extraction(const Segment& segment, Extractor& extractor) {
    ExtractionRecord rec = extractor.extract(segment);
    std::set<std::string> declared;
    for (const auto& m : rec.pre_methods) declared.insert(m.name);
    for (const auto& m : rec.post_methods) declared.insert(m.name);
    for (const auto& r : rec.relations) {
        if (!declared.count(r.src)) {
            rec.rejected = true;
            rec.diagnostics.push_back("relation endpoint not declared in segment: " + r.src);
        }
        if (!declared.count(r.dst)) {
            rec.rejected = true;
            rec.diagnostics.push_back("relation endpoint not declared in segment: " + r.dst);
        }
        if (r.rating < 1 || r.rating > 5) {
            rec.rejected = true;
            rec.diagnostics.push_back("relation rating " + std::to_string(r.rating) +
                                      " outside [1,5] for " + r.src + " -> " + r.dst);
        }
    }
    return rec;
}

Document document_from_json_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    Document doc;
    if (!j.contains("doc_id") || !j["doc_id"].is_string())
        throw ValidationError("corpus line " + std::to_string(line_no) + ": missing doc_id");
    doc.doc_id = j["doc_id"].get<std::string>();
    doc.title = j.value("title", std::string{});
    if (!j.contains("sections") || !j["sections"].is_array())
        throw ValidationError("corpus line " + std::to_string(line_no) + ": missing sections");
    std::size_t idx = 0;
    for (const auto& js : j["sections"]) {
        Section s;
        s.section_id = js.value("section_id", doc.doc_id + ".s" + std::to_string(idx));
        s.heading = js.value("heading", std::string{});
        if (!js.contains("body") || !js["body"].is_string())
            throw ValidationError("corpus line " + std::to_string(line_no) +
                                  ": section without body");
        s.body = js["body"].get<std::string>();
        doc.sections.push_back(std::move(s));
        ++idx;
    }
    return doc;
}

std::vector<Document> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open corpus: " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Document doc = document_from_json_line(line, line_no);
        if (!seen.insert(doc.doc_id).second)
            throw ValidationError("duplicate doc_id in corpus: " + doc.doc_id);
        docs.push_back(std::move(doc));
    }
    return docs;
}

} // namespace forge
