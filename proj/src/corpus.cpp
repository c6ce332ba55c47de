#include "eduvl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace eduvl {

namespace {

bool is_ascii_space(char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
}

// ASCII whitespace plus the common Unicode space separators.
bool is_unicode_space(char32_t c) {
    if (is_ascii_space(c)) return true;
    switch (c) {
        case 0x0085:  // NEL
        case 0x00A0:  // no-break space
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_ascii_punct(unsigned char c) {
    return c < 128 && std::ispunct(c) != 0;
}

// Decodes one UTF-8 code point starting at i; malformed bytes are passed
// through as single code units so no input is ever rejected.
char32_t decode_utf8(std::string_view s, size_t i, size_t* len) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        *len = 1;
        return c;
    }
    size_t extra = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
        extra = 1;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        extra = 2;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        extra = 3;
        cp = c & 0x07;
    } else {
        *len = 1;
        return c;
    }
    if (i + extra >= s.size()) {
        *len = 1;
        return c;
    }
    for (size_t k = 1; k <= extra; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xC0) != 0x80) {
            *len = 1;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    *len = extra + 1;
    return cp;
}

// Emits the chunk split into leading punctuation, core, trailing punctuation.
void emit_chunk(std::string_view chunk, std::vector<Token>& out) {
    size_t b = 0;
    size_t e = chunk.size();
    std::vector<std::string> trailing;
    while (b < e && is_ascii_punct(static_cast<unsigned char>(chunk[b])) && e - b > 1) {
        out.push_back(make_token(std::string(1, chunk[b])));
        ++b;
    }
    while (e > b + 1 && is_ascii_punct(static_cast<unsigned char>(chunk[e - 1]))) {
        trailing.emplace_back(1, chunk[e - 1]);
        --e;
    }
    if (e > b) out.push_back(make_token(std::string(chunk.substr(b, e - b))));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(make_token(*it));
}

const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> abbrevs = {"mr.", "mrs.", "dr.",
                                                            "st.", "e.g.", "i.e."};
    return abbrevs;
}

const std::unordered_set<std::string>& clause_connectives() {
    static const std::unordered_set<std::string> words = {
        "because", "although", "while", "which", "who",    "that",     "and",
        "but",     "when",     "if",    "after", "before", "since",    "citing",
        "according"};
    return words;
}

bool is_sentence_final(char c) {
    return c == '.' || c == '!' || c == '?';
}

// The whitespace-delimited word ending at text[i], lowercased, with leading
// punctuation stripped. Used for the abbreviation check.
std::string word_ending_at(std::string_view text, size_t i) {
    size_t b = i + 1;
    while (b > 0 && !is_ascii_space(static_cast<unsigned char>(text[b - 1]))) --b;
    while (b <= i && is_ascii_punct(static_cast<unsigned char>(text[b])) && text[b] != '.') ++b;
    return fold_case(text.substr(b, i - b + 1));
}

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

void assign_positions(Document& doc) {
    int flat = 0;
    for (size_t si = 0; si < doc.sentences.size(); ++si) {
        auto& edus = doc.sentences[si].edus;
        for (size_t ei = 0; ei < edus.size(); ++ei) {
            edus[ei].sentence_index = static_cast<int>(si);
            edus[ei].position_in_sentence = static_cast<int>(ei);
            edus[ei].document_position = flat++;
        }
    }
}

// Drops whole trailing EDUs until the document fits the token budget. An EDU
// is kept only if it fits entirely.
void truncate_document(Document& doc) {
    int budget = doc.truncation_limit;
    std::vector<Sentence> kept;
    for (auto& sentence : doc.sentences) {
        Sentence out;
        for (auto& edu : sentence.edus) {
            int n = static_cast<int>(edu.tokens.size());
            if (n > budget) {
                budget = -1;
                break;
            }
            budget -= n;
            out.edus.push_back(std::move(edu));
        }
        if (!out.edus.empty()) kept.push_back(std::move(out));
        if (budget < 0) break;
    }
    doc.sentences = std::move(kept);
    if (doc.sentences.empty())
        throw InputError("document '" + doc.doc_id + "': truncation to " +
                         std::to_string(doc.truncation_limit) + " tokens leaves no content");
    assign_positions(doc);
}

}  // namespace

Token make_token(std::string text) {
    Token t;
    t.lower = fold_case(text);
    t.text = std::move(text);
    return t;
}

std::string fold_case(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string join_text(const TokenList& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i].text;
    }
    return out;
}

TokenList Sentence::tokens() const {
    TokenList out;
    for (const auto& edu : edus) out.insert(out.end(), edu.tokens.begin(), edu.tokens.end());
    return out;
}

int Document::edu_count() const {
    int m = 0;
    for (const auto& s : sentences) m += static_cast<int>(s.edus.size());
    return m;
}

int Document::token_count() const {
    int n = 0;
    for (const auto& s : sentences)
        for (const auto& e : s.edus) n += static_cast<int>(e.tokens.size());
    return n;
}

const Edu& Document::edu(int document_position) const {
    for (const auto& s : sentences) {
        for (const auto& e : s.edus) {
            if (e.document_position == document_position) return e;
        }
    }
    throw std::out_of_range("edu position out of range: " + std::to_string(document_position));
}

CorpusFormat format_from_string(std::string_view s) {
    if (s == "raw") return CorpusFormat::raw;
    if (s == "pre" || s == "pre_segmented") return CorpusFormat::pre_segmented;
    throw InputError("unknown corpus format: " + std::string(s));
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::string chunk;
    size_t i = 0;
    while (i < text.size()) {
        size_t len = 0;
        char32_t cp = decode_utf8(text, i, &len);
        if (is_unicode_space(cp)) {
            if (!chunk.empty()) {
                emit_chunk(chunk, out);
                chunk.clear();
            }
        } else {
            chunk.append(text.substr(i, len));
        }
        i += len;
    }
    if (!chunk.empty()) emit_chunk(chunk, out);
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    size_t start = 0;
    size_t i = 0;
    while (i < text.size()) {
        if (!is_sentence_final(text[i])) {
            ++i;
            continue;
        }
        size_t run_end = i;
        while (run_end + 1 < text.size() && is_sentence_final(text[run_end + 1])) ++run_end;

        bool abbrev = text[i] == '.' && run_end == i &&
                      abbreviations().count(word_ending_at(text, i)) > 0;

        size_t k = run_end + 1;
        bool saw_space = false;
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) {
            saw_space = true;
            ++k;
        }
        bool boundary = !abbrev && saw_space &&
                        (k < text.size() ? std::isupper(static_cast<unsigned char>(text[k])) != 0
                                         : true);
        if (boundary) {
            std::string sentence = trim(text.substr(start, run_end + 1 - start));
            if (!sentence.empty()) out.push_back(std::move(sentence));
            start = k;
        }
        i = run_end + 1;
    }
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::vector<Edu> segment_edus(const TokenList& sentence_tokens) {
    const int n = static_cast<int>(sentence_tokens.size());
    std::vector<int> cut_points;  // cut before index p
    int seg_start = 0;
    for (int p = 1; p < n; ++p) {
        const Token& tok = sentence_tokens[p];
        if (clause_connectives().count(tok.lower) > 0 && p - seg_start >= 3 && n - p >= 3) {
            cut_points.push_back(p);
            seg_start = p;
        } else if ((tok.text == "," || tok.text == ";") && p - seg_start + 1 >= 3 &&
                   n - p - 1 >= 3) {
            cut_points.push_back(p + 1);
            seg_start = p + 1;
        }
    }
    std::vector<Edu> out;
    int begin = 0;
    auto flush = [&](int end) {
        Edu edu;
        edu.tokens.assign(sentence_tokens.begin() + begin, sentence_tokens.begin() + end);
        out.push_back(std::move(edu));
        begin = end;
    };
    for (int cut : cut_points) flush(cut);
    if (begin < n) flush(n);
    return out;
}

Document document_from_text(std::string doc_id, std::string_view text, int truncation_limit) {
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.truncation_limit = truncation_limit;
    for (const std::string& sentence_text : split_sentences(text)) {
        TokenList tokens = tokenize(sentence_text);
        if (tokens.empty()) continue;
        Sentence sentence;
        sentence.edus = segment_edus(tokens);
        doc.sentences.push_back(std::move(sentence));
    }
    if (doc.sentences.empty())
        throw InputError("document '" + doc.doc_id + "': no sentences after tokenization");
    truncate_document(doc);
    return doc;
}

Document document_from_edus(std::string doc_id,
                            const std::vector<std::vector<std::string>>& sentence_edu_strings,
                            int truncation_limit) {
    Document doc;
    doc.doc_id = std::move(doc_id);
    doc.truncation_limit = truncation_limit;
    for (const auto& edu_strings : sentence_edu_strings) {
        Sentence sentence;
        for (const auto& edu_text : edu_strings) {
            Edu edu;
            edu.tokens = tokenize(edu_text);
            if (edu.tokens.empty())
                throw InputError("document '" + doc.doc_id + "': empty EDU in pre-segmented input");
            sentence.edus.push_back(std::move(edu));
        }
        if (!sentence.edus.empty()) doc.sentences.push_back(std::move(sentence));
    }
    if (doc.sentences.empty())
        throw InputError("document '" + doc.doc_id + "': no sentences in pre-segmented input");
    truncate_document(doc);
    return doc;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, int truncation_limit,
                   Split split) {
    std::ifstream in(path);
    if (!in.is_open()) throw InputError("cannot open corpus file: " + path.string());

    Corpus corpus;
    corpus.split = split;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed JSON record: " + e.what());
        }
        auto context = path.string() + ":" + std::to_string(line_no);
        auto require_string = [&](const char* field) {
            if (!record.contains(field) || !record[field].is_string())
                throw InputError(context + ": missing or non-string field '" + field + "'");
            return record[field].get<std::string>();
        };
        std::string doc_id = require_string("doc_id");
        std::string summary = require_string("summary");
        if (!seen_ids.insert(doc_id).second)
            throw InputError(context + ": duplicate doc_id '" + doc_id + "'");

        bool has_text = record.contains("text");
        bool has_edus = record.contains("edus");
        if (has_text == has_edus)
            throw InputError(context + ": record must carry exactly one of 'text' or 'edus'");
        if (format == CorpusFormat::raw && !has_text)
            throw InputError(context + ": raw format requires field 'text'");
        if (format == CorpusFormat::pre_segmented && !has_edus)
            throw InputError(context + ": pre-segmented format requires field 'edus'");

        CorpusEntry entry;
        try {
            if (has_text) {
                entry.document =
                    document_from_text(doc_id, record["text"].get<std::string>(), truncation_limit);
            } else {
                if (!record["edus"].is_array())
                    throw InputError("field 'edus' must be an array of arrays of strings");
                std::vector<std::vector<std::string>> sentences;
                for (const auto& sent : record["edus"]) {
                    if (!sent.is_array())
                        throw InputError("field 'edus' must be an array of arrays of strings");
                    std::vector<std::string> edus;
                    for (const auto& e : sent) {
                        if (!e.is_string())
                            throw InputError("field 'edus' must contain only strings");
                        edus.push_back(e.get<std::string>());
                    }
                    sentences.push_back(std::move(edus));
                }
                entry.document = document_from_edus(doc_id, sentences, truncation_limit);
            }
        } catch (const InputError& e) {
            throw InputError(context + ": " + e.what());
        }

        entry.reference.raw = summary;
        entry.reference.tokens = tokenize(summary);
        if (entry.reference.tokens.empty())
            throw InputError(context + ": field 'summary' is empty");
        corpus.entries.push_back(std::move(entry));
    }
    return corpus;
}

std::string corpus_to_pre_segmented_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& entry : corpus.entries) {
        nlohmann::json record;
        record["doc_id"] = entry.document.doc_id;
        record["summary"] = entry.reference.raw;
        nlohmann::json sentences = nlohmann::json::array();
        for (const auto& sentence : entry.document.sentences) {
            nlohmann::json edus = nlohmann::json::array();
            for (const auto& edu : sentence.edus) edus.push_back(join_text(edu.tokens));
            sentences.push_back(std::move(edus));
        }
        record["edus"] = std::move(sentences);
        out += record.dump();
        out += '\n';
    }
    return out;
}

}  // namespace eduvl
