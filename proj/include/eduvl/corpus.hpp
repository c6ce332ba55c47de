#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eduvl/common.hpp"

namespace eduvl {

struct Token {
    std::string text;   // original form, never contains whitespace
    std::string lower;  // case-folded form, the one all scoring uses
};
using TokenList = std::vector<Token>;

Token make_token(std::string text);
std::string fold_case(std::string_view text);
std::string join_text(const TokenList& tokens);  // original forms, single spaces

struct Edu {
    TokenList tokens;
    int sentence_index = 0;
    int position_in_sentence = 0;
    int document_position = 0;
};

struct Sentence {
    std::vector<Edu> edus;
    TokenList tokens() const;  // concatenation of the EDU token lists, in order
};

struct Document {
    std::string doc_id;
    std::vector<Sentence> sentences;
    int truncation_limit = 768;

    int edu_count() const;
    int token_count() const;
    const Edu& edu(int document_position) const;
};

struct Reference {
    TokenList tokens;
    std::string raw;
};

struct CorpusEntry {
    Document document;
    Reference reference;
};

struct Corpus {
    Split split = Split::train;
    std::vector<CorpusEntry> entries;
};

enum class CorpusFormat { raw, pre_segmented };
CorpusFormat format_from_string(std::string_view s);

// Splits on Unicode whitespace, then detaches leading/trailing ASCII
// punctuation as single-character tokens. Internal punctuation stays put.
std::vector<Token> tokenize(std::string_view text);

// Splits on . ! ? followed by whitespace and an uppercase letter, or at end
// of text. A fixed abbreviation list (Mr., Mrs., Dr., St., e.g., i.e.)
// suppresses splits.
std::vector<std::string> split_sentences(std::string_view text);

// Rule-based clause segmentation: cuts immediately before a fixed list of
// connectives and after commas/semicolons, with at least 3 tokens required
// on each side of a cut. Concatenating the output reproduces the input.
std::vector<Edu> segment_edus(const TokenList& sentence_tokens);

Document document_from_text(std::string doc_id, std::string_view text, int truncation_limit);
Document document_from_edus(std::string doc_id,
                            const std::vector<std::vector<std::string>>& sentence_edu_strings,
                            int truncation_limit);

// JSONL, one record per line:
//   {"doc_id": ..., "summary": ..., "text": ...}   (raw)
//   {"doc_id": ..., "summary": ..., "edus": [["..."],...]}  (pre-segmented)
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, int truncation_limit,
                   Split split);

std::string corpus_to_pre_segmented_jsonl(const Corpus& corpus);

}  // namespace eduvl
